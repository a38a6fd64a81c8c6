"""Von Neumann analysis of the SD advection operator on a uniform Cartesian grid.

The five shift matrices are extracted by probing the sdspace residual of
the centre cell of a 3x3 periodic block with unit-vector neighbour states.
"""

from dataclasses import dataclass

import numpy as np

from . import _io
from .errors import NumericalFailureError, UnsupportedPatternError
from .sdspace import advection, build_sd_operator, cartesian_mesh
from .sdspace.residual import SDResidual
from .stabpoly import Spectrum, write_spectrum_csv

SHIFTS = ((0, 0), (-1, 0), (0, -1), (1, 0), (0, 1))
DEFAULT_SAMPLING = (8, 8, 32)


@dataclass(frozen=True)
class GeneratingPattern:
    r1p: tuple = (1.0, 0.0)
    r2p: tuple = (0.0, 1.0)

    def __post_init__(self):
        det = self.r1p[0] * self.r2p[1] - self.r1p[1] * self.r2p[0]
        if abs(det) < 1e-14:
            raise ValueError("pattern vectors must be linearly independent")

    @property
    def is_cartesian(self):
        return tuple(map(float, self.r1p)) == (1.0, 0.0) and tuple(map(float, self.r2p)) == (0.0, 1.0)

    def to_dict(self):
        return {"r1p": [float(v) for v in self.r1p], "r2p": [float(v) for v in self.r2p]}


CARTESIAN = GeneratingPattern()


@dataclass(frozen=True, eq=False)
class SymbolSample:
    psi_angle: float
    theta: float
    Kmag: float
    L: np.ndarray


def assemble_shift_matrices(p, pattern=CARTESIAN, psi_angle=0.0):
    """{(dx, dy): T} with dQ_c/dt = -sum_d T^d Q_{c+d} for unit speed and cell size."""
    if not pattern.is_cartesian:
        raise UnsupportedPatternError("only the uniform Cartesian pattern is supported")
    op = build_sd_operator(p)
    mesh = cartesian_mesh(3, 3, 0.0, 3.0, 0.0, 3.0, periodic=(True, True))
    res = SDResidual(mesh, op, advection((np.cos(psi_angle), np.sin(psi_angle))))
    n = p + 1
    d = n * n
    centre = 4
    Q = np.zeros((9, n, n, len(SHIFTS) * d))
    for k, (dx, dy) in enumerate(SHIFTS):
        cell = centre + dx + 3 * dy
        Q[cell].reshape(d, -1)[np.arange(d), k * d + np.arange(d)] = 1.0
    R = res.apply(Q)[centre].reshape(d, len(SHIFTS), d)
    return {shift: -R[:, k, :] for k, shift in enumerate(SHIFTS)}


def _symbols(T, K, pattern=CARTESIAN):
    """Batched symbols for wave vectors K of shape (N, 2)."""
    K = np.atleast_2d(np.asarray(K, dtype=float))
    r1, r2 = np.asarray(pattern.r1p, float), np.asarray(pattern.r2p, float)
    L = np.zeros((K.shape[0],) + T[(0, 0)].shape, dtype=complex)
    for (dx, dy), Td in T.items():
        phase = np.exp(1j * (K @ (dx * r1 + dy * r2)))
        L -= phase[:, None, None] * Td
    return L


def fourier_symbol(T, K, pattern=CARTESIAN):
    return _symbols(T, np.asarray(K, dtype=float)[None, :], pattern)[0]


def _eigvals(L, labels):
    try:
        ev = np.linalg.eigvals(L)
    except np.linalg.LinAlgError:
        ev = None
    if ev is None or not np.all(np.isfinite(ev)):
        for k in range(L.shape[0]):
            try:
                e = np.linalg.eigvals(L[k])
            except np.linalg.LinAlgError:
                e = None
            if e is None or not np.all(np.isfinite(e)):
                psi, theta, kk = labels[k]
                raise NumericalFailureError(
                    f"eigen-solver failed at psi={psi:.17g}, theta={theta:.17g}, K={kk:.17g}")
    return ev


def canonical_order(points):
    points = np.asarray(points, dtype=complex)
    return points[np.lexsort((points.imag, points.real))]


def sample_spectrum(p, n_psi=DEFAULT_SAMPLING[0], n_theta=DEFAULT_SAMPLING[1],
                    n_K=DEFAULT_SAMPLING[2], pattern=CARTESIAN):
    """Eigenvalues of the symbol on the uniform (psi, theta, |K|) grid in [0, 2pi)^3."""
    for label, v in (("n_psi", n_psi), ("n_theta", n_theta), ("n_K", n_K)):
        if int(v) < 1:
            raise ValueError(f"{label} must be >= 1")
    psis = 2 * np.pi * np.arange(n_psi) / n_psi
    thetas = 2 * np.pi * np.arange(n_theta) / n_theta
    mags = 2 * np.pi * np.arange(n_K) / n_K
    th, kk = np.meshgrid(thetas, mags, indexing="ij")
    th, kk = th.ravel(), kk.ravel()
    K = np.column_stack([kk * np.cos(th), kk * np.sin(th)])
    out = []
    for psi in psis:
        T = assemble_shift_matrices(p, pattern, psi)
        L = _symbols(T, K, pattern)
        labels = [(psi, a, b) for a, b in zip(th, kk)]
        out.append(_eigvals(L, labels).ravel())
    prov = provenance(p, n_psi, n_theta, n_K, pattern)
    return Spectrum(canonical_order(np.concatenate(out)), prov)


def provenance(p, n_psi, n_theta, n_K, pattern=CARTESIAN):
    return {"p": int(p), "n_psi": int(n_psi), "n_theta": int(n_theta), "n_K": int(n_K),
            "pattern": pattern.to_dict()}


def write_spectrum(csv_path, spec, json_path=None):
    """Spectrum CSV plus its provenance block."""
    write_spectrum_csv(csv_path, spec)
    if json_path is not None:
        _io.write_json(json_path, spec.provenance)
