"""Equation sets: physical fluxes, sources, Riemann fluxes and boundary ghosts.

All functions are vectorized over leading axes: states are ``(..., n_vars)``
and positions/normals ``(..., 2)``. Problems are 2D; LEE and Euler keep the
five-component 3D layout with the z-momentum identically zero.
"""

from dataclasses import dataclass, field
from math import sqrt

import numpy as np

from ..errors import ContractViolationError, MissingDataError, UnphysicalStateError

KINDS = ("advection", "rotational_advection", "lee", "euler")


@dataclass(frozen=True)
class EquationSet:
    variant: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.variant not in KINDS:
            raise ValueError(f"unknown equation set {self.variant!r}")
        if self.variant in ("lee", "euler") and not self.params.get("gamma", 1.4) > 1:
            raise ValueError("gamma must exceed 1")
        if self.variant == "lee" and not (self.params["rho0"] > 0 and self.params["p0"] > 0):
            raise ValueError("mean density and pressure must be positive")

    @property
    def n_vars(self):
        return 1 if self.variant in ("advection", "rotational_advection") else 5

    @property
    def c0(self):
        q = self.params
        return sqrt(q["gamma"] * q["p0"] / q["rho0"])

    def describe(self):
        return {"variant": self.variant, **{k: float(v) if not isinstance(v, (list, tuple)) else list(v)
                                            for k, v in self.params.items()}}


def advection(a=(1.0, 0.0)):
    return EquationSet("advection", {"a": (float(a[0]), float(a[1]))})


def rotational_advection(omega):
    """Solid-body rotation a = omega * (-y, x); omega > 0 turns counter-clockwise."""
    return EquationSet("rotational_advection", {"omega": float(omega)})


def lee(rho0=1.0, p0=1.0, u0=0.0, v0=0.0, gamma=1.4):
    return EquationSet("lee", {"rho0": rho0, "p0": p0, "u0": u0, "v0": v0, "gamma": gamma})


def euler(gamma=1.4):
    return EquationSet("euler", {"gamma": gamma})


def velocity(eq, x):
    """Advection velocity at positions ``x`` (scalar variants only)."""
    x = np.asarray(x, dtype=float)
    if eq.variant == "advection":
        a = np.asarray(eq.params["a"], dtype=float)
        return np.broadcast_to(a, x.shape)
    if eq.variant == "rotational_advection":
        w = eq.params["omega"]
        return np.stack([-w * x[..., 1], w * x[..., 0]], axis=-1)
    raise ValueError(f"{eq.variant} has no advection velocity")


def streamfunction(eq, x, y):
    """Streamfunction of the (divergence-free) advection velocity."""
    if eq.variant == "advection":
        ax, ay = eq.params["a"]
        return ax * y - ay * x
    if eq.variant == "rotational_advection":
        return -0.5 * eq.params["omega"] * (x * x + y * y)
    raise ValueError(f"{eq.variant} has no streamfunction")


def _euler_primitives(q, gamma):
    rho = q[..., 0]
    if np.any(~(rho > 0)):
        raise UnphysicalStateError("non-positive density")
    u = q[..., 1] / rho
    v = q[..., 2] / rho
    w = q[..., 3] / rho
    p = (gamma - 1.0) * (q[..., 4] - 0.5 * rho * (u * u + v * v + w * w))
    if np.any(~(p > 0)):
        raise UnphysicalStateError("non-positive pressure")
    return rho, u, v, w, p


def physical_flux(eq, q, x=None):
    """Cartesian flux components (f, g)."""
    q = np.asarray(q, dtype=float)
    if eq.variant in ("advection", "rotational_advection"):
        a = velocity(eq, x if x is not None else np.zeros(q.shape[:-1] + (2,)))
        return a[..., 0:1] * q, a[..., 1:2] * q
    if eq.variant == "lee":
        P = eq.params
        rho0, p0, u0, v0, gam = P["rho0"], P["p0"], P["u0"], P["v0"], P["gamma"]
        r, mx, my, mz, pp = (q[..., k] for k in range(5))
        f = np.stack([mx + u0 * r, u0 * mx + pp, u0 * my, u0 * mz,
                      u0 * pp + gam * p0 * mx / rho0], axis=-1)
        g = np.stack([my + v0 * r, v0 * mx, v0 * my + pp, v0 * mz,
                      v0 * pp + gam * p0 * my / rho0], axis=-1)
        return f, g
    gam = eq.params["gamma"]
    rho, u, v, w, p = _euler_primitives(q, gam)
    E = q[..., 4]
    f = np.stack([rho * u, rho * u * u + p, rho * u * v, rho * u * w, u * (E + p)], axis=-1)
    g = np.stack([rho * v, rho * u * v, rho * v * v + p, rho * v * w, v * (E + p)], axis=-1)
    return f, g


def lee_source(eq, q, mean_gradients):
    """Mean-flow-gradient source of the LEE (2D: w0 = 0, no z-derivatives)."""
    P = eq.params
    rho0, u0, v0, gam = P["rho0"], P["u0"], P["v0"], P["gamma"]
    G = mean_gradients
    r, mx, my, _, pp = (q[..., k] for k in range(5))
    fx = mx + u0 * r  # rho0 u' + u0 rho'
    fy = my + v0 * r
    zero = np.zeros_like(r)
    s = np.stack([
        zero,
        fx * G.get("du0dx", 0.0) + fy * G.get("du0dy", 0.0),
        fx * G.get("dv0dx", 0.0) + fy * G.get("dv0dy", 0.0),
        zero,
        (gam - 1.0) * (pp * (G.get("du0dx", 0.0) + G.get("dv0dy", 0.0))
                       - mx / rho0 * G.get("dp0dx", 0.0) - my / rho0 * G.get("dp0dy", 0.0)),
    ], axis=-1)
    return -s


def physical_flux_and_source(eq, state, x, mean_gradients=None):
    state = np.asarray(state, dtype=float)
    f, g = physical_flux(eq, state, x)
    if eq.variant == "lee" and mean_gradients:
        src = lee_source(eq, state, mean_gradients)
    else:
        src = np.zeros_like(state)
    return f, g, src


def numerical_flux(eq, qL, qR, n, x=None):
    """Normal interface flux; ``n`` is the unit normal pointing from L to R."""
    qL = np.asarray(qL, dtype=float)
    qR = np.asarray(qR, dtype=float)
    n = np.asarray(n, dtype=float)
    if eq.variant in ("advection", "rotational_advection"):
        a = velocity(eq, x if x is not None else np.zeros(n.shape))
        an = (a[..., 0] * n[..., 0] + a[..., 1] * n[..., 1])[..., None]
        return an * 0.5 * (qL + qR) - np.abs(an) * 0.5 * (qR - qL)
    fL, gL = physical_flux(eq, qL, x)
    fR, gR = physical_flux(eq, qR, x)
    nx, ny = n[..., 0:1], n[..., 1:2]
    central = 0.5 * ((fL + fR) * nx + (gL + gR) * ny)
    if eq.variant == "lee":
        P = eq.params
        speed = np.abs(P["u0"] * n[..., 0] + P["v0"] * n[..., 1]) + eq.c0
    else:
        gam = eq.params["gamma"]
        rL, uL, vL, _, pL = _euler_primitives(qL, gam)
        rR, uR, vR, _, pR = _euler_primitives(qR, gam)
        sL = np.abs(uL * n[..., 0] + vL * n[..., 1]) + np.sqrt(gam * pL / rL)
        sR = np.abs(uR * n[..., 0] + vR * n[..., 1]) + np.sqrt(gam * pR / rR)
        speed = np.maximum(sL, sR)
    return central - 0.5 * np.asarray(speed)[..., None] * (qR - qL)


BOUNDARY_KINDS = ("extrapolation", "dirichlet")


def apply_boundary(tag, interior_state, prescribed=None):
    """Ghost state for a boundary face."""
    if tag == "extrapolation":
        return np.array(interior_state, dtype=float, copy=True)
    if tag == "dirichlet":
        if prescribed is None:
            raise MissingDataError("dirichlet boundary needs a prescribed state")
        return np.broadcast_to(np.asarray(prescribed, dtype=float),
                               np.shape(interior_state)).copy()
    if tag == "periodic":
        raise ContractViolationError("periodic faces are resolved by mesh connectivity")
    raise ValueError(f"unknown boundary tag {tag!r}")


def primitive_to_conserved_euler(rho, u, v, p, gamma=1.4):
    rho = np.asarray(rho, dtype=float)
    E = p / ((gamma - 1.0) * rho) + 0.5 * (u * u + v * v)
    return np.stack(np.broadcast_arrays(rho, rho * u, rho * v, 0.0 * rho, rho * E), axis=-1)
