import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.polynomial import legendre
from scipy.spatial import Delaunay

from sdrk.errors import UnsupportedPatternError
from sdrk.fourier import (
    CARTESIAN,
    GeneratingPattern,
    assemble_shift_matrices,
    fourier_symbol,
    sample_spectrum,
    write_spectrum,
)
from sdrk.sdspace import advection, build_sd_operator, cartesian_mesh
from sdrk.sdspace.residual import SDResidual


def multiset_close(a, b, tol):
    """Greedy nearest matching of two complex multisets."""
    a, b = list(np.asarray(a)), list(np.asarray(b))
    if len(a) != len(b):
        return False
    for z in a:
        k = int(np.argmin(np.abs(np.array(b) - z)))
        if abs(b[k] - z) > tol:
            return False
        b.pop(k)
    return True


def lagrange(nodes, x):
    """L[i, j] = l_j(x_i) through a Vandermonde solve."""
    V = np.vander(nodes, increasing=True)
    return np.vander(np.atleast_1d(x), len(nodes), increasing=True) @ np.linalg.inv(V)


def lagrange_deriv(nodes, x):
    V = np.vander(nodes, increasing=True)
    n = len(nodes)
    dV = np.zeros((len(x), n))
    for k in range(1, n):
        dV[:, k] = k * np.asarray(x) ** (k - 1)
    return dV @ np.linalg.inv(V)


def sd_1d_symbol(p, K):
    """Upwind SD symbol of u_t + u_x = 0 on unit cells, assembled from scratch."""
    sol, _ = legendre.leggauss(p + 1)
    flux = np.concatenate([[-1.0], legendre.leggauss(p)[0], [1.0]])
    M = lagrange(sol, flux)
    M = M.astype(complex)
    M[0] = lagrange(sol, [1.0])[0] * np.exp(-1j * K)
    D = lagrange_deriv(flux, sol)
    return -2.0 * D @ M


# --- shift matrices -----------------------------------------------------------


@pytest.mark.parametrize("p", [1, 2, 3, 4])
def test_constant_state_is_steady(p):
    for psi in (0.0, 0.7, 2.9):
        T = assemble_shift_matrices(p, psi_angle=psi)
        total = sum(T.values())
        assert np.max(np.abs(total @ np.ones(total.shape[0]))) <= 1e-12


@pytest.mark.parametrize("p", [1, 3])
def test_downstream_neighbours_drop_out(p):
    assert np.max(np.abs(assemble_shift_matrices(p, psi_angle=0.0)[(1, 0)])) == 0.0
    assert np.max(np.abs(assemble_shift_matrices(p, psi_angle=np.pi / 2)[(0, 1)])) <= 1e-15


def test_non_cartesian_pattern_rejected():
    with pytest.raises(UnsupportedPatternError):
        assemble_shift_matrices(2, GeneratingPattern((1.0, 0.0), (0.5, 1.0)))
    with pytest.raises(ValueError):
        GeneratingPattern((1.0, 0.0), (2.0, 0.0))


# --- symbol -------------------------------------------------------------------


def test_zero_wave_has_constant_null_vector():
    T = assemble_shift_matrices(2, psi_angle=0.4)
    L = fourier_symbol(T, np.zeros(2))
    assert np.max(np.abs(L @ np.ones(9))) <= 1e-12


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 3), st.floats(0, 2 * np.pi), st.floats(-3, 3), st.floats(-3, 3))
def test_symbol_conjugate_pairs(p, psi, kx, ky):
    T = assemble_shift_matrices(p, psi_angle=psi)
    a = np.linalg.eigvals(fourier_symbol(T, np.array([kx, ky])))
    b = np.linalg.eigvals(fourier_symbol(T, -np.array([kx, ky])))
    assert multiset_close(a, np.conj(b), 1e-10)


@pytest.mark.parametrize("p", [1, 2, 3, 4])
def test_axis_flow_matches_1d_sd(p):
    T = assemble_shift_matrices(p, psi_angle=0.0)
    for K in (0.3, 1.7, 3.0):
        ev2 = np.linalg.eigvals(fourier_symbol(T, np.array([K, 0.0])))
        ev1 = np.linalg.eigvals(sd_1d_symbol(p, K))
        assert multiset_close(ev2, np.repeat(ev1, p + 1), 1e-9)


@pytest.mark.parametrize("p,N", [(1, 5), (2, 4)])
def test_symbol_matches_full_periodic_operator(p, N):
    """Dual route: eigenvalues of the assembled N x N periodic operator."""
    psi = 0.6
    op = build_sd_operator(p)
    mesh = cartesian_mesh(N, N, 0.0, float(N), 0.0, float(N), periodic=(True, True))
    res = SDResidual(mesh, op, advection((np.cos(psi), np.sin(psi))))
    n = p + 1
    dof = N * N * n * n
    R = res.apply(np.eye(dof).reshape(N * N, n, n, dof)).reshape(dof, dof)
    full = np.linalg.eigvals(R)
    T = assemble_shift_matrices(p, psi_angle=psi)
    ks = 2 * np.pi * np.arange(N) / N
    sym = np.concatenate([np.linalg.eigvals(fourier_symbol(T, np.array([kx, ky])))
                          for kx in ks for ky in ks])
    assert multiset_close(full, sym, 1e-8)


@pytest.mark.parametrize("p", [1, 2])
def test_square_grid_symmetry(p):
    rot = np.array([[0, -1], [1, 0]])
    rng = np.random.default_rng(p)
    for _ in range(4):
        psi, K = rng.uniform(0, 2 * np.pi), rng.uniform(-3, 3, 2)
        a = np.linalg.eigvals(fourier_symbol(assemble_shift_matrices(p, psi_angle=psi), K))
        b = np.linalg.eigvals(fourier_symbol(assemble_shift_matrices(p, psi_angle=psi + np.pi / 2), rot @ K))
        assert multiset_close(a, b, 1e-10)


@pytest.mark.parametrize("p", [1, 2])
def test_small_wave_consistency(p):
    psi, theta = 0.3, 1.1
    T = assemble_shift_matrices(p, psi_angle=psi)
    Ks = np.array([1e-2, 2e-2, 4e-2, 8e-2])
    errs = []
    for k in Ks:
        K = k * np.array([np.cos(theta), np.sin(theta)])
        ev = np.linalg.eigvals(fourier_symbol(T, K))
        exact = -1j * (K @ [np.cos(psi), np.sin(psi)])
        errs.append(np.min(np.abs(ev - exact)))
    slope = np.polyfit(np.log(Ks), np.log(errs), 1)[0]
    assert slope >= p + 1.0


# --- sampling -----------------------------------------------------------------


def test_cardinality_and_zero():
    spec = sample_spectrum(2, 4, 4, 8)
    assert len(spec) == 4 * 4 * 8 * 9
    assert np.min(np.abs(spec.points)) <= 1e-12
    assert spec.provenance["pattern"] == CARTESIAN.to_dict()


@pytest.mark.parametrize("p", [1, 2, 3, 4])
def test_spectra_are_stable_and_symmetric(p):
    z = sample_spectrum(p, 4, 4, 8).points
    assert z.real.max() <= 1e-10
    assert multiset_close(z, np.conj(z), 1e-10)


def test_refined_sampling_keeps_hull():
    coarse = sample_spectrum(1, 2, 4, 8).points
    fine = sample_spectrum(1, 4, 8, 16).points
    tri = Delaunay(np.column_stack([fine.real, fine.imag]))
    assert np.all(tri.find_simplex(np.column_stack([coarse.real, coarse.imag]), tol=1e-12) >= 0)


def test_write_spectrum(tmp_path):
    spec = sample_spectrum(1, 2, 2, 4)
    write_spectrum(tmp_path / "s.csv", spec, tmp_path / "s.json")
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "re,im" and len(lines) == len(spec) + 1
    assert '"n_K": 4' in (tmp_path / "s.json").read_text()
