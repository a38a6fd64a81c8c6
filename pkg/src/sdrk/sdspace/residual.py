"""SD residual on a QuadMesh.

Solution arrays have shape (n_cells, p+1, p+1, n_vars), indexed
[cell, xi point, eta point, variable]; the residual follows dQ/dt = R.
"""

from dataclasses import dataclass

import numpy as np

from ..errors import ConnectivityError, ContractViolationError
from . import equations as eqs


@dataclass(frozen=True, eq=False)
class SDField:
    values: np.ndarray
    eqset: eqs.EquationSet

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 4 or v.shape[1] != v.shape[2]:
            raise ContractViolationError(f"field values must be (cells, n, n, vars), got {v.shape}")
        if v.shape[-1] != self.eqset.n_vars:
            raise ContractViolationError(
                f"{self.eqset.variant} needs {self.eqset.n_vars} variables, got {v.shape[-1]}")
        if not np.all(np.isfinite(v)):
            raise ContractViolationError("field contains non-finite values")
        object.__setattr__(self, "values", v)

    @property
    def p(self):
        return self.values.shape[1] - 1


class SDResidual:
    """Residual evaluator bound to a mesh, operator and equation set.

    ``boundary_state(x, t)`` supplies prescribed states for dirichlet faces;
    ``mean_gradients`` switches on the LEE mean-flow source.
    """

    def __init__(self, mesh, op, eqset, boundary_state=None, mean_gradients=None):
        if eqset.n_vars > 1 and mesh.rotational_periodicity:
            raise ConnectivityError("rotationally periodic faces only support scalar equations")
        self.mesh, self.op, self.eq = mesh, op, eqset
        self.geo = mesh.geometry(op)
        self.boundary_state = boundary_state
        self.mean_gradients = mean_gradients
        self._scalar = eqset.n_vars == 1
        if self._scalar:
            U_xi, U_eta = self.geo.contravariant(lambda x, y: eqs.streamfunction(eqset, x, y))
            self._U_xi, self._U_eta = U_xi[..., None], U_eta[..., None]
            self._Un = np.stack([-U_xi[:, 0], U_xi[:, -1], -U_eta[:, :, 0], U_eta[:, :, -1]],
                                axis=1)[..., None]
        bmask = mesh.boundary_faces
        self._bnd = {tag: bmask & (mesh.tags == tag) for tag in set(mesh.tags[bmask])}
        if "dirichlet" in self._bnd and boundary_state is None:
            from ..errors import MissingDataError

            raise MissingDataError("mesh has dirichlet faces but no boundary_state")

    @property
    def shape(self):
        n = self.op.p + 1
        return (self.mesh.n_cells, n, n, self.eq.n_vars)

    def __call__(self, Q, t=0.0):
        return self.apply(np.asarray(Q, dtype=float).reshape(self.shape), t)

    def apply(self, Q, t=0.0):
        """Residual of an array (C, n, n, V); scalar equations accept any V
        (each trailing slot is an independent field)."""
        g, op, eq = self.geo, self.op, self.eq
        M, D = op.sol_to_flux, op.flux_deriv_to_sol
        V = Q.shape[-1]
        Qxi = np.einsum("ai,cijv->cajv", M, Q)
        Qeta = np.einsum("bj,cijv->cibv", M, Q)
        if self._scalar:
            fhat = self._U_xi * Qxi
            ghat = self._U_eta * Qeta
        else:
            f, gg = eqs.physical_flux(eq, Qxi, g.x_fxi)
            fhat = f * g.S_xi[..., 0:1] + gg * g.S_xi[..., 1:2]
            f, gg = eqs.physical_flux(eq, Qeta, g.x_feta)
            ghat = f * g.S_eta[..., 0:1] + gg * g.S_eta[..., 1:2]

        trace = np.stack([Qxi[:, 0], Qxi[:, -1], Qeta[:, :, 0], Qeta[:, :, -1]], axis=1)
        ext = trace.reshape(-1, V)[g.gather].reshape(trace.shape)
        for tag, mask in self._bnd.items():
            prescribed = None
            if tag == "dirichlet":
                prescribed = self.boundary_state(g.x_face[mask], t)
            ext[mask] = eqs.apply_boundary(tag, trace[mask], prescribed)
        if self._scalar:
            # upwind flux with the mapped normal velocity (area times a.n)
            Un = self._Un
            F = Un * 0.5 * (trace + ext) - np.abs(Un) * 0.5 * (ext - trace)
        else:
            F = g.area[..., None] * eqs.numerical_flux(eq, trace, ext, g.normal, g.x_face)
        fhat[:, 0] = -F[:, 0]
        fhat[:, -1] = F[:, 1]
        ghat[:, :, 0] = -F[:, 2]
        ghat[:, :, -1] = F[:, 3]

        div = np.einsum("ia,cajv->cijv", D, fhat) + np.einsum("jb,cibv->cijv", D, ghat)
        R = -div / g.J[..., None]
        if self.mean_gradients and eq.variant == "lee":
            R += eqs.lee_source(eq, Q, self.mean_gradients)
        return R


def semidiscrete_residual(field, mesh, op, t=0.0, boundary_state=None, mean_gradients=None):
    if field.p != op.p:
        raise ContractViolationError(f"field degree {field.p} does not match operator degree {op.p}")
    if field.values.shape[0] != mesh.n_cells:
        raise ContractViolationError("field and mesh cell counts differ")
    res = SDResidual(mesh, op, field.eqset, boundary_state, mean_gradients)
    return SDField(res(field.values, t), field.eqset)


def solution_points(mesh, op):
    """Physical coordinates of every solution point, shape (C, n, n, 2)."""
    return mesh.geometry(op).x_sol


def project(func, mesh, op, eqset):
    """Sample ``func(x, y) -> (..., n_vars)`` (or scalar) at the solution points."""
    x = solution_points(mesh, op)
    v = np.asarray(func(x[..., 0], x[..., 1]), dtype=float)
    if v.ndim == 3:
        v = v[..., None]
    return SDField(v, eqset)


def integrate_field(values, mesh, op):
    """Gauss quadrature of each variable over the whole mesh."""
    w = mesh.geometry(op).quadrature_weights(op)
    return np.einsum("cij,cijv->v", w, values)
