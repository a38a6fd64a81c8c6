"""Benchmark problems, error norms, CFL conversion and convergence studies."""

import time
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import legendre

from . import _io
from .errors import InstabilityError, InvalidArgumentsError, NonFiniteStateError, QuadratureError, UndefinedTimestepError
from .sdspace import annulus_mesh, build_sd_operator, disk_mesh, lee, rotational_advection
from .sdspace.residual import SDField, SDResidual
from .tableau import LowStorage3SStar, integrate, stepper_for

RESULTS_HEADER = ["scheme", "s", "p", "nu", "dt", "n_dof", "linf", "cpu_seconds"]


@dataclass(frozen=True, eq=False)
class BenchmarkProblem:
    kind: str
    params: dict
    t0: float
    te: float
    initial: object
    exact: object
    rhs: object = None
    error_variable: int = 0

    def __post_init__(self):
        if not self.te > self.t0:
            raise ValueError("end time must exceed start time")


@dataclass(frozen=True)
class ErrorMeasure:
    linf: float
    n_dof: int
    cpu_seconds: float = float("nan")


@dataclass(frozen=True)
class ConvergenceResult:
    dts: tuple
    errors: tuple
    slope: float

    def to_dict(self):
        return {"dts": list(self.dts), "errors": list(self.errors), "slope": self.slope}


# ---------------------------------------------------------------------------
# ODE order test


def _ode_rhs(q, t):
    e = np.exp(t * t)
    return np.array([1.0 / q[0] - q[1] * e / (t * t) - t,
                     1.0 / q[1] - e - 2.0 * t * np.exp(-t * t)])


def ode_test_problem():
    """Nonlinear non-autonomous 2x2 system with exact solution (1/t, exp(-t^2))."""
    exact = lambda t: np.array([1.0 / t, np.exp(-t * t)])  # noqa: E731
    return BenchmarkProblem(kind="ode_order_test", params={}, t0=1.0, te=1.4,
                            initial=lambda: exact(1.0), exact=exact, rhs=_ode_rhs)


def ode_error(problem, q):
    """|(Q1 - q1) + (Q2 - q2)| at the end time."""
    return float(abs(np.sum(np.asarray(q) - problem.exact(problem.te))))


# ---------------------------------------------------------------------------
# annulus advection


def _gaussian(x, y, xc, yc, b):
    return np.exp(-((x - xc) ** 2 + (y - yc) ** 2) / (2.0 * b * b))


def annulus_problem(omega=2 * np.pi, b=0.6, r_inner=5.0, r_outer=10.0, te=0.25):
    """Gaussian carried clockwise by solid-body rotation around the quarter annulus.

    ``exact(x, y, t)`` is the single rotated Gaussian; the periodic runner
    sums its four quarter-turn images.
    """
    xc, yc = 0.0, 0.5 * (r_inner + r_outer)

    def exact(x, y, t):
        # clockwise rotation by omega t: rotate the sample point back counter-clockwise
        c, s = np.cos(omega * t), np.sin(omega * t)
        return _gaussian(c * x - s * y, s * x + c * y, xc, yc, b)

    return BenchmarkProblem(kind="annulus_advection",
                            params={"omega": omega, "b": b, "r_inner": r_inner, "r_outer": r_outer},
                            t0=0.0, te=te, initial=lambda x, y: exact(x, y, 0.0), exact=exact)


def periodic_images(func, x, y, *args):
    """Sum of ``func`` over the four quarter-turn images of (x, y)."""
    out = 0.0
    for k in range(4):
        c, s = np.cos(0.5 * np.pi * k), np.sin(0.5 * np.pi * k)
        out = out + func(c * x - s * y, s * x + c * y, *args)
    return out


# ---------------------------------------------------------------------------
# acoustic pulse


QUAD_TOL = 1e-12


def _xi_max(b):
    return (2.0 / b) * np.sqrt(np.log(1e14))


def _pulse_integral(t, eta, b, c0, panels, nodes=16):
    from scipy.special import j0

    eta = np.atleast_1d(np.asarray(eta, dtype=float))
    xg, wg = legendre.leggauss(nodes)
    edges = np.linspace(0.0, _xi_max(b), panels + 1)
    half = 0.5 * np.diff(edges)
    xi = (edges[:-1, None] + half[:, None] * (xg[None, :] + 1.0)).ravel()
    w = (half[:, None] * wg[None, :]).ravel()
    base = w * np.exp(-(xi * b / 2.0) ** 2) * np.cos(xi * c0 * t) * xi
    vals = j0(np.outer(eta, xi)) @ base
    return 0.5 * c0 * c0 * b * b * vals


def acoustic_pressure(t, eta, b=0.05, c0=np.sqrt(1.4), tol=QUAD_TOL, max_panels=4096):
    """Unscaled exact acoustic pressure at distance ``eta`` from the pulse centre.

    Composite Gauss-Legendre on [0, xi_max], doubling the panel count until
    two successive results agree to ``tol``.
    """
    eta = np.asarray(eta, dtype=float)
    flat = eta.ravel()
    uniq, inv = np.unique(flat, return_inverse=True)
    panels = 32
    prev = _pulse_integral(t, uniq, b, c0, panels)
    while True:
        panels *= 2
        cur = _pulse_integral(t, uniq, b, c0, panels)
        err = float(np.max(np.abs(cur - prev))) if cur.size else 0.0
        if err <= tol:
            return cur[inv].reshape(eta.shape)
        if panels >= max_panels:
            raise QuadratureError(f"pulse quadrature did not reach {tol:g} (estimate {err:.2e})")
        prev = cur


def acoustic_problem(b=0.05, radius=0.5, amplitude=1e-3, rho0=1.0, p0=1.0, gamma=1.4, te=0.3):
    """Gaussian acoustic pulse in a quiescent gas, LEE with uniform mean flow."""
    eq = lee(rho0=rho0, p0=p0, u0=0.0, v0=0.0, gamma=gamma)
    c0 = eq.c0

    def initial(x, y):
        rho = amplitude * np.exp(-(x * x + y * y) / (b * b))
        z = np.zeros_like(rho)
        return np.stack([rho, z, z, z, c0 * c0 * rho], axis=-1)

    def exact(x, y, t):
        """Acoustic pressure p'."""
        return amplitude * acoustic_pressure(t, np.hypot(x, y), b=b, c0=c0)

    return BenchmarkProblem(kind="acoustic_pulse",
                            params={"b": b, "radius": radius, "amplitude": amplitude, "rho0": rho0,
                                    "p0": p0, "gamma": gamma},
                            t0=0.0, te=te, initial=initial, exact=exact, error_variable=4)


# ---------------------------------------------------------------------------
# errors and time steps


def max_norm_error(numerical, exact_values, variable=None):
    """L-infinity error over all degrees of freedom of one variable."""
    v = numerical.values if isinstance(numerical, SDField) else np.asarray(numerical, dtype=float)
    if variable is not None and v.ndim >= 1 and v.shape[-1] > 1:
        v = v[..., variable]
    elif v.ndim == 4 and v.shape[-1] == 1:
        v = v[..., 0]
    ex = np.asarray(exact_values, dtype=float).reshape(v.shape)
    return ErrorMeasure(linf=float(np.max(np.abs(v - ex))) if v.size else 0.0, n_dof=int(v.size))


def cfl_to_timestep(nu, u, v, dx, dy):
    """dt = nu / (|u|/dx + |v|/dy), minimised over all entries of array inputs."""
    u, v, dx, dy = (np.asarray(a, dtype=float) for a in (u, v, dx, dy))
    if np.any(dx <= 0) or np.any(dy <= 0):
        raise InvalidArgumentsError("cell sizes must be positive")
    rate = np.abs(u) / dx + np.abs(v) / dy
    if not np.any(rate > 0):
        raise UndefinedTimestepError("zero velocity everywhere: the time step is undefined")
    return float(nu / np.max(rate))


def mesh_timestep(nu, geometry, velocity=None, sound_speed=0.0):
    """CFL step on a curvilinear mesh from reference-direction arc lengths.

    The speed along each reference direction is |a . e| + c at every
    solution point; the smallest resulting step is returned.
    """
    e_xi, e_eta = geometry.e_xi, geometry.e_eta
    if velocity is None:
        velocity = np.zeros(e_xi.shape)
    a = np.broadcast_to(np.asarray(velocity, dtype=float), e_xi.shape)
    u = np.abs(np.sum(a * e_xi, axis=-1)) + sound_speed
    v = np.abs(np.sum(a * e_eta, axis=-1)) + sound_speed
    return cfl_to_timestep(nu, u, v, geometry.h_xi, geometry.h_eta)


# ---------------------------------------------------------------------------
# convergence study


def _fit_slope(dts, errors):
    x, y = np.log(np.asarray(dts)), np.log(np.asarray(errors))
    return float(np.polyfit(x, y, 1)[0])


def run_convergence(scheme, problem, dt_list):
    """Integrate at every dt; least-squares slope of log|error| against log dt."""
    dts = [float(d) for d in dt_list]
    if len(dts) < 3:
        raise InvalidArgumentsError("a convergence study needs at least three time steps")
    if any(b >= a for a, b in zip(dts, dts[1:])) or dts[-1] <= 0:
        raise InvalidArgumentsError("time steps must be positive and strictly decreasing")
    if problem.rhs is None:
        raise InvalidArgumentsError("run_convergence needs an ODE problem with a right-hand side")
    errors = []
    for dt in dts:
        try:
            q = integrate(scheme, problem.rhs, problem.initial(), problem.t0, problem.te, dt)
        except NonFiniteStateError as exc:
            raise InstabilityError(f"non-finite state at dt={dt:.17g}: {exc}", dt=dt) from exc
        if not np.all(np.isfinite(q)):
            raise InstabilityError(f"non-finite state at dt={dt:.17g}", dt=dt)
        errors.append(ode_error(problem, q))
    return ConvergenceResult(dts=tuple(dts), errors=tuple(errors), slope=_fit_slope(dts, errors))


# ---------------------------------------------------------------------------
# PDE runs


@dataclass(frozen=True, eq=False)
class PDESetup:
    problem: BenchmarkProblem
    p: int
    residual: SDResidual
    q0: np.ndarray
    exact_end: np.ndarray
    velocity: object = None
    sound_speed: float = 0.0


def _cells_for_dof(n_dof, p):
    return max(1, int(round(np.sqrt(n_dof / (p + 1) ** 2))))


def annulus_setup(p, n_cells=None, n_dof=12544, problem=None):
    """Quarter annulus with rotationally periodic cuts; n_cells per direction."""
    problem = problem or annulus_problem()
    P = problem.params
    n = n_cells or _cells_for_dof(n_dof, p)
    mesh = annulus_mesh(n, n, P["r_inner"], P["r_outer"], periodic=True)
    op = build_sd_operator(p)
    eq = rotational_advection(-P["omega"])
    res = SDResidual(mesh, op, eq)
    x = res.geo.x_sol
    q0 = periodic_images(lambda a, b: problem.initial(a, b), x[..., 0], x[..., 1])[..., None]
    ex = periodic_images(lambda a, b: problem.exact(a, b, problem.te), x[..., 0], x[..., 1])
    vel = P["omega"] * np.stack([x[..., 1], -x[..., 0]], axis=-1)
    return PDESetup(problem, p, res, q0, ex, velocity=vel)


def acoustic_setup(p, n_center=None, n_radial=None, n_dof=8448, problem=None):
    """O-grid disk; default sizes keep about ``n_dof`` degrees of freedom per variable."""
    problem = problem or acoustic_problem()
    P = problem.params
    if n_center is None or n_radial is None:
        cells = n_dof / (p + 1) ** 2
        # n_center^2 + 4 n_center n_radial with n_radial ~ 2/3 n_center
        m = max(2, int(round(np.sqrt(cells / (1 + 8 / 3)))))
        n_center, n_radial = m, max(1, int(round(2 * m / 3)))
    mesh = disk_mesh(n_center, n_radial, radius=P["radius"])
    op = build_sd_operator(p)
    eq = lee(rho0=P["rho0"], p0=P["p0"], gamma=P["gamma"])
    res = SDResidual(mesh, op, eq)
    x = res.geo.x_sol
    q0 = problem.initial(x[..., 0], x[..., 1])
    ex = problem.exact(x[..., 0], x[..., 1], problem.te)
    return PDESetup(problem, p, res, q0, ex, velocity=None, sound_speed=eq.c0)


def run_pde(setup, scheme, nu, timing=False):
    """Integrate a PDE benchmark at CFL ``nu``; returns (ErrorMeasure, dt, final state)."""
    res = setup.residual
    dt = mesh_timestep(nu, res.geo, setup.velocity, setup.sound_speed)
    pr = setup.problem
    n = int(np.ceil((pr.te - pr.t0) / dt - 1e-12))
    dt = (pr.te - pr.t0) / n
    step = stepper_for(scheme)
    q = setup.q0.copy()
    t = pr.t0
    rhs = res.apply
    start = time.perf_counter()
    try:
        for k in range(n):
            q = step(rhs, q, t, dt)
            t = pr.t0 + (k + 1) * dt
    except NonFiniteStateError as exc:
        raise InstabilityError(f"non-finite state at dt={dt:.17g}: {exc}", dt=dt) from exc
    cpu = time.perf_counter() - start if timing else float("nan")
    if not np.all(np.isfinite(q)):
        raise InstabilityError(f"non-finite state at dt={dt:.17g}", dt=dt)
    err = max_norm_error(q, setup.exact_end, variable=pr.error_variable)
    return ErrorMeasure(linf=err.linf, n_dof=err.n_dof, cpu_seconds=cpu), dt, q


def scheme_label(scheme):
    return scheme.name or ("3S*" if isinstance(scheme, LowStorage3SStar) else "RK")


def results_row(scheme, nu, dt, measure, timing=False):
    cpu = measure.cpu_seconds if timing else ""
    return [scheme_label(scheme), scheme.s, scheme.p, float(nu), float(dt), measure.n_dof,
            float(measure.linf), float(cpu) if timing else cpu]


def write_results_csv(path, rows):
    _io.atomic_write_text(path, _io.csv_text(RESULTS_HEADER, rows))


def write_convergence_json(path, result):
    _io.write_json(path, result.to_dict())
