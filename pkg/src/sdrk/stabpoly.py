"""Stability polynomials: evaluation, stable CFL limits and optimization.

The optimizer maximizes the stable CFL number ``nu`` of a degree-``s``
polynomial whose first ``p+1`` coefficients match the exponential, by
bisection on ``nu`` with a convex minimax feasibility solve at every trial.
"""

import csv
import logging
from dataclasses import dataclass, field
from math import factorial

import numpy as np

from . import _io
from .errors import DomainError, InvalidArgumentsError, SolverFailureError

log = logging.getLogger(__name__)

FEAS_TOL = 1e-8
BISECTION_TOL = 1e-7
# constraint sets up to this size are solved without hull reduction
DIRECT_LIMIT = 2000
POLYGON_SIDES = 64
# violating points brought into the constraint set per round
MAX_NEW_POINTS = 64
# slack for the LP's own tolerances when its bound is used to reject a trial
LP_SLACK = 1e-9
# tight HiGHS tolerances, falling back to its defaults if these stall
LP_OPTIONS = {"primal_feasibility_tolerance": 1e-9, "dual_feasibility_tolerance": 1e-9}


@dataclass(frozen=True, eq=False)
class StabilityPolynomial:
    coeffs: np.ndarray
    p: int

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float).reshape(-1)
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def s(self):
        return self.coeffs.shape[0] - 1

    def check_invariants(self, tol=1e-12):
        ref = np.array([1.0 / factorial(j) for j in range(self.p + 1)])
        return float(np.max(np.abs(self.coeffs[: self.p + 1] - ref)))


@dataclass(frozen=True, eq=False)
class Spectrum:
    points: np.ndarray
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=complex).reshape(-1)
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return self.points.shape[0]


@dataclass(frozen=True, eq=False)
class PolyOptResult:
    nu_star: float
    poly: StabilityPolynomial
    bisection_width: float
    feasibility_margin: float
    provenance: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "nu_star": self.nu_star,
            "s": self.poly.s,
            "p": self.poly.p,
            "beta": self.poly.coeffs.tolist(),
            "feasibility_margin": self.feasibility_margin,
            "bisection_width": self.bisection_width,
            "provenance": self.provenance,
        }

    @classmethod
    def from_dict(cls, d):
        poly = StabilityPolynomial(coeffs=d["beta"], p=int(d["p"]))
        return cls(nu_star=float(d["nu_star"]), poly=poly,
                   bisection_width=float(d["bisection_width"]),
                   feasibility_margin=float(d["feasibility_margin"]),
                   provenance=d.get("provenance", {}))


def eval_psi(poly, z):
    """Horner evaluation of sum_j beta_j z^j (vectorized over ``z``)."""
    z = np.asarray(z, dtype=complex)
    acc = np.zeros_like(z)
    for beta in poly.coeffs[::-1]:
        acc = acc * z + beta
    return acc if acc.ndim else complex(acc)


def search_upper_bound(s):
    """Upper end of the CFL search bracket.

    10 s covers disk-like spectra; 2 s^2 is the real-axis (Chebyshev) limit,
    which exceeds 10 s once s > 5.
    """
    return float(max(10 * s, 2 * s * s))


def _max_modulus(poly, points, nu):
    return float(np.max(np.abs(eval_psi(poly, nu * points))))


def max_stable_cfl(poly, spec, tol=BISECTION_TOL, feas_tol=FEAS_TOL, n_scan=400):
    """Largest nu in [0, search_upper_bound(s)] with |psi(nu*lambda)| <= 1 + feas_tol on the spectrum.

    The interval is first scanned on a uniform grid so that the result is the
    edge of the stable interval containing the origin; the edge is then
    located by bisection to width ``tol``.
    """
    points = spec.points if isinstance(spec, Spectrum) else np.asarray(spec, dtype=complex)
    if points.size == 0:
        raise DomainError("empty spectrum")
    upper = search_upper_bound(max(poly.s, 1))

    def ok(nu):
        return _max_modulus(poly, points, nu) <= 1.0 + feas_tol

    lo, hi = 0.0, None
    for nu in np.linspace(0.0, upper, n_scan + 1)[1:]:
        if ok(nu):
            lo = nu
        else:
            hi = nu
            break
    if hi is None:
        return upper
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return lo


# ---------------------------------------------------------------------------
# convex hull helpers


def _unique_points(points):
    xy = np.column_stack([points.real, points.imag])
    xy = np.unique(np.round(xy, 14), axis=0)
    return xy


def _hull(xy):
    from scipy.spatial import ConvexHull, QhullError

    try:
        return ConvexHull(xy)
    except (QhullError, ValueError):
        return None


def reduce_spectrum(spec):
    """Vertices of the convex hull of the spectrum (duplicates removed)."""
    xy = _unique_points(spec.points)
    prov = dict(spec.provenance)
    prov["reduced_from"] = int(len(spec))
    if xy.shape[0] <= 2:
        return Spectrum(xy[:, 0] + 1j * xy[:, 1], prov)
    hull = _hull(xy)
    if hull is None:
        # collinear: keep the two extreme points along the line
        d = xy - xy.mean(axis=0)
        _, _, vt = np.linalg.svd(d, full_matrices=False)
        proj = d @ vt[0]
        ends = xy[[int(np.argmin(proj)), int(np.argmax(proj))]]
        return Spectrum(ends[:, 0] + 1j * ends[:, 1], prov)
    v = xy[np.sort(hull.vertices)]
    return Spectrum(v[:, 0] + 1j * v[:, 1], prov)


def disk_upper_bound(spec, s, slack=2e-3):
    """Upper bound 2 s / delta on the stable CFL number.

    ``delta`` is the diameter of the largest disk tangent to the imaginary
    axis at the origin and lying inside the convex hull of ``spec`` and 0.
    The hull is a polygon through sampled points, so the disk may touch its
    edges up to a relative ``slack`` of the radius; edges through the origin
    itself are therefore not binding.
    """
    pts = np.concatenate([np.asarray(spec.points, dtype=complex), [0.0]])
    xy = _unique_points(pts)
    hull = _hull(xy) if xy.shape[0] >= 3 else None
    if hull is None:
        return float("inf")
    radius = float("inf")
    for nx, ny, off in hull.equations:
        # halfplane nx*x + ny*y + off <= 0, with the disk centred at (-r, 0)
        h = -off
        denom = 1.0 - slack - nx
        if denom > 0:
            radius = min(radius, h / denom)
    if not np.isfinite(radius) or radius <= 0:
        return float("inf")
    return 2.0 * s / (2.0 * radius)


# ---------------------------------------------------------------------------
# optimization


def _arnoldi_basis(w, p, s):
    """Columns spanning w^(p+1) .. w^s, orthonormalized over the sample set.

    Returns (B, C) with B[:, k] = sum_j C[j, k] w^j. The recurrence has real
    coefficients, so real combinations of the columns stay real polynomials.
    """
    N = w.shape[0]
    m = s - p
    B = np.zeros((N, m), dtype=complex)
    C = np.zeros((s + 1, m))
    v = w ** (p + 1)
    c = np.zeros(s + 1)
    c[p + 1] = 1.0
    for k in range(m):
        if k > 0:
            v = w * B[:, k - 1]
            c = np.roll(C[:, k - 1], 1)
            for _ in range(2):  # re-orthogonalize once
                h = (B[:, :k].conj().T @ v).real / N
                v = v - B[:, :k] @ h
                c = c - C[:, :k] @ h
        nrm = np.linalg.norm(v) / np.sqrt(N)
        if not nrm > 0:
            raise SolverFailureError("degenerate polynomial basis on the sample set", nu=float("nan"))
        B[:, k] = v / nrm
        C[:, k] = c / nrm
    return B, C


def _minimax_solve(points, angles, nu, s, p):
    """LP relaxation of min over free coefficients of max_k |psi(nu * points_k)|.

    ``angles[k]`` lists the directions d with Re(conj(e^{id}) psi) <= t imposed
    at point k; a uniform polygon of directions is an outer approximation of
    the modulus constraint, refined by cuts at the phase of violators.
    Returns (free monomial coefficients beta_{p+1..s}, LP objective).
    """
    from scipy.optimize import linprog

    z = nu * points
    R = max(float(np.max(np.abs(z))), 1e-300)
    fixed = np.zeros_like(z)
    for j in range(p, -1, -1):
        fixed = fixed * z + 1.0 / factorial(j)
    if s == p:
        return np.zeros(0), float(np.max(np.abs(fixed)))
    B, Cm = _arnoldi_basis(z / R, p, s)
    idx = np.concatenate([np.full(len(a), k) for k, a in enumerate(angles)])
    d = np.concatenate(angles)
    cs, sn = np.cos(d), np.sin(d)
    rows = cs[:, None] * B.real[idx] + sn[:, None] * B.imag[idx]
    rhs = -(cs * fixed.real[idx] + sn * fixed.imag[idx])
    m = B.shape[1]
    A = np.hstack([rows, -np.ones((rows.shape[0], 1))])
    cost = np.zeros(m + 1)
    cost[-1] = 1.0
    bounds = [(None, None)] * (m + 1)
    for options in (LP_OPTIONS, {}):
        res = linprog(cost, A_ub=A, b_ub=rhs, bounds=bounds, method="highs", options=options)
        if res.status == 0 and res.x is not None:
            break
    else:
        raise SolverFailureError(f"minimax LP failed ({res.message})", nu=nu)
    gw = Cm @ res.x[:m]
    scale = R ** np.arange(p + 1, s + 1, dtype=float)
    return gw[p + 1:] / scale, float(res.x[-1])


def _full_poly(free, s, p):
    coeffs = np.zeros(s + 1)
    coeffs[: p + 1] = [1.0 / factorial(j) for j in range(p + 1)]
    coeffs[p + 1:] = free
    return StabilityPolynomial(coeffs=coeffs, p=p)


def _feasible_poly(all_points, active, nu, s, p, feas_tol, max_rounds=200):
    """Decide feasibility at ``nu`` by cutting planes; returns (poly or None, margin).

    ``active`` is the set of point indices constrained so far; it is updated
    in place so that later trials start from every point found binding.
    Each point carries POLYGON_SIDES uniform directions plus, within this
    trial, a cut at the phase of psi each time its exact modulus exceeds
    1 + feas_tol. Every such cut removes the current LP solution, so the
    loop only stops on a verdict or on ``max_rounds``.
    """
    uniform = 2 * np.pi * np.arange(POLYGON_SIDES) / POLYGON_SIDES
    cuts = {k: [] for k in active}
    margin = float("inf")
    for _ in range(max_rounds):
        keys = sorted(cuts)
        angles = [np.concatenate([uniform, cuts[k]]) for k in keys]
        free, obj = _minimax_solve(all_points[keys], angles, nu, s, p)
        if obj > 1.0 + feas_tol + LP_SLACK:
            # the LP is a relaxation: its optimum bounds the true one from below
            return None, obj - 1.0
        poly = _full_poly(free, s, p)
        vals = eval_psi(poly, nu * all_points)
        mods = np.abs(vals)
        margin = float(mods.max()) - 1.0
        if margin <= feas_tol:
            return poly, margin
        bad = np.flatnonzero(mods > 1.0 + feas_tol)
        bad = bad[np.argsort(-mods[bad], kind="stable")]
        extra = bad[MAX_NEW_POINTS:]
        picked = set(bad[:MAX_NEW_POINTS].tolist()) | set(extra[:: max(1, extra.size // MAX_NEW_POINTS)].tolist())
        for k in bad.tolist():
            if k in cuts:
                cuts[k].append(float(np.angle(vals[k])))
            elif k in picked:
                cuts[k] = [float(np.angle(vals[k]))]
                active.add(k)
    log.info("cutting planes exhausted at nu=%.9g (margin %.3e), treated as infeasible", nu, margin)
    return None, margin


def optimize_stability_polynomial(spec, s, p, tol=BISECTION_TOL, feas_tol=FEAS_TOL, reduce=True):
    """Maximize the stable CFL number over the free coefficients beta_{p+1..s}."""
    if p < 1 or s < p:
        raise InvalidArgumentsError(f"need s >= p >= 1, got s={s}, p={p}")
    points = spec.points if isinstance(spec, Spectrum) else np.asarray(spec, dtype=complex)
    if points.size == 0:
        raise DomainError("empty spectrum")
    # real coefficients give |psi(conj z)| = |psi(z)|: fold onto Im >= 0
    folded = np.where(points.imag < 0, np.conj(points), points)
    all_points = np.unique(np.round(folded, 14))
    if reduce and all_points.size > DIRECT_LIMIT:
        base = reduce_spectrum(Spectrum(all_points)).points
    else:
        base = all_points

    pos = {complex(z): k for k, z in enumerate(all_points)}
    active = {pos[complex(z)] for z in base}
    failures = []
    lo, hi = 0.0, search_upper_bound(s)
    best = _full_poly(np.zeros(s - p), s, p)
    best_margin = float(np.max(np.abs(eval_psi(best, 0 * all_points)))) - 1.0
    while hi - lo > tol:
        nu = 0.5 * (lo + hi)
        try:
            poly, margin = _feasible_poly(all_points, active, nu, s, p, feas_tol)
        except SolverFailureError as exc:
            failures.append(float(exc.nu))
            log.info("inner solver failed at nu=%.9g, treated as infeasible", nu)
            poly = None
        if poly is not None:
            lo, best, best_margin = nu, poly, margin
        else:
            hi = nu
    prov = dict(spec.provenance) if isinstance(spec, Spectrum) else {}
    prov.update({"feasibility_tolerance": feas_tol, "solver": "cutting-plane LP (HiGHS)",
                 "n_constraints": int(all_points.size), "n_hull": int(base.size),
                 "solver_failures_at_nu": failures})
    return PolyOptResult(nu_star=lo, poly=best, bisection_width=hi - lo,
                         feasibility_margin=best_margin, provenance=prov)


# ---------------------------------------------------------------------------
# spectrum files


def write_spectrum_csv(path, spec):
    pts = spec.points
    order = np.lexsort((pts.imag, pts.real))
    rows = [(float(pts[k].real), float(pts[k].imag)) for k in order]
    _io.atomic_write_text(path, _io.csv_text(["re", "im"], rows))


def read_spectrum_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if [h.strip() for h in header] != ["re", "im"]:
            raise ValueError(f"{path}: expected header 're,im', got {header}")
        vals = [complex(float(r[0]), float(r[1])) for r in reader if r]
    return Spectrum(np.array(vals, dtype=complex), {"source": str(path)})
