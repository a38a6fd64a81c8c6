"""1D spectral difference point sets and interpolation/derivative arrays."""

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import legendre

from ..errors import UnsupportedDegreeError

MAX_DEGREE = 5


def lagrange_matrix(nodes, x):
    """L[m, k] = l_k(x_m) for the Lagrange basis on ``nodes``."""
    nodes = np.asarray(nodes, dtype=float)
    x = np.asarray(x, dtype=float)
    L = np.ones((x.size, nodes.size))
    for k in range(nodes.size):
        for j in range(nodes.size):
            if j != k:
                L[:, k] *= (x - nodes[j]) / (nodes[k] - nodes[j])
    return L


def lagrange_derivative_matrix(nodes, x):
    """D[m, k] = l_k'(x_m)."""
    nodes = np.asarray(nodes, dtype=float)
    x = np.asarray(x, dtype=float)
    n = nodes.size
    D = np.zeros((x.size, n))
    for k in range(n):
        denom = np.prod([nodes[k] - nodes[j] for j in range(n) if j != k])
        for i in range(n):
            if i == k:
                continue
            term = np.ones(x.size)
            for j in range(n):
                if j != k and j != i:
                    term *= x - nodes[j]
            D[:, k] += term
        D[:, k] /= denom
    return D


@dataclass(frozen=True, eq=False)
class SDOperator:
    p: int
    solution_points_1d: np.ndarray
    flux_points_1d: np.ndarray
    sol_to_flux: np.ndarray
    flux_deriv_to_sol: np.ndarray
    weights_1d: np.ndarray

    @property
    def n_sol(self):
        return self.p + 1


def build_sd_operator(p):
    """Degree-p SD operator: Gauss solution points, endpoints + Gauss flux points."""
    if not isinstance(p, (int, np.integer)) or not 1 <= p <= MAX_DEGREE:
        raise UnsupportedDegreeError(f"polynomial degree must be in 1..{MAX_DEGREE}, got {p}")
    sol, w = legendre.leggauss(p + 1)
    inner, _ = legendre.leggauss(p)
    flux = np.concatenate([[-1.0], inner, [1.0]])
    M = lagrange_matrix(sol, flux)
    D = lagrange_derivative_matrix(flux, sol)
    for arr in (sol, w, flux, M, D):
        arr.setflags(write=False)
    return SDOperator(p=int(p), solution_points_1d=sol, flux_points_1d=flux,
                      sol_to_flux=M, flux_deriv_to_sol=D, weights_1d=w)
