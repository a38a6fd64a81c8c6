"""Runge-Kutta methods in Butcher and 3S* low-storage form.

Covers order-condition residuals, stability polynomials, the 3S* time
stepper, a dense Butcher stepper, reference methods and efficiency ratios.
"""

from dataclasses import dataclass, field
from math import factorial

import numpy as np

from . import _io
from .errors import (
    DomainError,
    InconsistentSchemeError,
    NonFiniteStateError,
    NotOrderError,
    UnknownMethodError,
    UnsupportedOrderError,
)
from .trees import MAX_ORDER, TREE_TABLE

ORDER_TOL = 1e-10
CONSISTENCY_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class ButcherTableau:
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    p: int
    name: str = ""

    def __post_init__(self):
        a = np.array(self.a, dtype=float)
        b = np.array(self.b, dtype=float)
        c = np.array(self.c, dtype=float)
        s = b.shape[0]
        if a.shape != (s, s) or c.shape != (s,):
            raise ValueError("inconsistent tableau dimensions")
        for arr in (a, b, c):
            arr.setflags(write=False)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)

    @property
    def s(self):
        return self.b.shape[0]

    @classmethod
    def from_ab(cls, a, b, p, name=""):
        a = np.array(a, dtype=float)
        return cls(a=a, b=b, c=a.sum(axis=1), p=p, name=name)

    def check_invariants(self, tol=CONSISTENCY_TOL):
        """Return a list of violated structural invariants (empty if fine)."""
        problems = []
        if np.any(np.triu(self.a) != 0.0):
            problems.append("a is not strictly lower triangular")
        if np.max(np.abs(self.c - self.a.sum(axis=1)), initial=0.0) > tol:
            problems.append("c differs from the row sums of a")
        if self.p >= 1 and abs(self.b.sum() - 1.0) > tol:
            problems.append("weights do not sum to one")
        return problems


@dataclass(frozen=True, eq=False)
class LowStorage3SStar:
    delta: np.ndarray
    gamma1: np.ndarray
    gamma2: np.ndarray
    gamma3: np.ndarray
    beta: np.ndarray
    c: np.ndarray
    p: int
    name: str = ""

    def __post_init__(self):
        lengths = set()
        for key in ("delta", "gamma1", "gamma2", "gamma3", "beta", "c"):
            arr = np.array(getattr(self, key), dtype=float).reshape(-1)
            arr.setflags(write=False)
            object.__setattr__(self, key, arr)
            lengths.add(arr.shape[0])
        if len(lengths) != 1:
            raise ValueError("3S* coefficient sequences must have equal length")

    @property
    def s(self):
        return self.beta.shape[0]

    def to_dict(self):
        return {
            "name": self.name,
            "class": "3S*",
            "s": self.s,
            "p": self.p,
            "delta": self.delta.tolist(),
            "gamma1": self.gamma1.tolist(),
            "gamma2": self.gamma2.tolist(),
            "gamma3": self.gamma3.tolist(),
            "beta": self.beta.tolist(),
            "c": self.c.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        if d.get("class", "3S*") != "3S*":
            raise ValueError(f"unsupported scheme class {d.get('class')!r}")
        ls = cls(delta=d["delta"], gamma1=d["gamma1"], gamma2=d["gamma2"],
                 gamma3=d["gamma3"], beta=d["beta"], c=d["c"], p=int(d["p"]),
                 name=d.get("name", ""))
        if "s" in d and int(d["s"]) != ls.s:
            raise ValueError("declared stage count does not match coefficients")
        return ls


@dataclass(frozen=True)
class ErrorReport:
    residuals_by_order: dict
    principal_error_norm: float
    beta_mismatch: tuple = field(default=())

    @property
    def max_residual(self):
        """Largest |tau| over all orders strictly below the top one."""
        top = max(self.residuals_by_order)
        vals = [abs(r) for j, res in self.residuals_by_order.items() if j < top for r in res]
        return max(vals, default=0.0)


@dataclass(frozen=True)
class EfficiencyPair:
    chi_stab: float
    chi_acc: float


# ---------------------------------------------------------------------------
# order conditions


def _stage_weight_cache(A, max_order):
    cache = {(): np.ones(A.shape[0])}

    def g(tree):
        if tree not in cache:
            v = np.ones(A.shape[0])
            for child in tree:
                v = v * (A @ g(child))
            cache[tree] = v
        return cache[tree]

    for n in range(1, max_order + 1):
        for tree, _ in TREE_TABLE[n]:
            g(tree)
    return cache


def residuals_ab(A, b, max_order):
    """tau_i^(j) = Phi(t) - 1/gamma(t) for every tree of order j <= max_order."""
    cache = _stage_weight_cache(A, max_order)
    return {n: np.array([b @ cache[t] - 1.0 / gam for t, gam in TREE_TABLE[n]])
            for n in range(1, max_order + 1)}


def order_condition_residuals(t, max_order):
    if not 1 <= max_order <= MAX_ORDER:
        raise UnsupportedOrderError(f"order conditions supported up to {MAX_ORDER}, got {max_order}")
    res = residuals_ab(t.a, t.b, max_order)
    top = res[max_order]
    return ErrorReport(
        residuals_by_order={j: tuple(float(x) for x in r) for j, r in res.items()},
        principal_error_norm=float(np.sqrt(np.sum(top * top))),
    )


def principal_error_norm(t, tol=ORDER_TOL):
    """Euclidean norm of the order-(p+1) truncation error coefficients."""
    report = order_condition_residuals(t, t.p + 1)
    if report.max_residual > tol:
        raise NotOrderError(
            f"tableau {t.name or '?'} violates order {t.p} conditions "
            f"(max residual {report.max_residual:.3e})")
    return report.principal_error_norm


def stability_coefficients(A, b):
    s = b.shape[0]
    beta = np.empty(s + 1)
    beta[0] = 1.0
    v = np.ones(s)
    for j in range(1, s + 1):
        beta[j] = b @ v
        v = A @ v
    return beta


def stability_polynomial(t):
    from .stabpoly import StabilityPolynomial

    return StabilityPolynomial(coeffs=stability_coefficients(t.a, t.b), p=t.p)


# ---------------------------------------------------------------------------
# 3S* <-> Butcher


def _propagate_3sstar(delta, gamma1, gamma2, gamma3, beta):
    """Run Algorithm 3S* on affine combinations of [u^n, k_1, ..., k_s].

    Returns the stage-input rows (s, s+1) and the output row (s+1,).
    """
    s = beta.shape[0]
    S1 = np.zeros(s + 1)
    S2 = np.zeros(s + 1)
    S1[0] = 1.0
    S3 = S1.copy()
    stages = np.empty((s, s + 1))
    for i in range(s):
        stages[i] = S1
        S2 = S2 + delta[i] * S1
        S1 = gamma1[i] * S1 + gamma2[i] * S2 + gamma3[i] * S3
        S1[i + 1] += beta[i]
    return stages, S1


def butcher_ab_from_3sstar(delta, gamma1, gamma2, gamma3, beta):
    stages, out = _propagate_3sstar(delta, gamma1, gamma2, gamma3, beta)
    return stages[:, 1:], out[1:], stages[:, 0], out[0]


def butcher_from_3sstar(ls, tol=CONSISTENCY_TOL):
    A, b, u_stage, u_out = butcher_ab_from_3sstar(ls.delta, ls.gamma1, ls.gamma2,
                                                   ls.gamma3, ls.beta)
    dev = max(np.max(np.abs(u_stage - 1.0)), abs(u_out - 1.0))
    if dev > tol:
        raise InconsistentSchemeError(f"u^n coefficient deviates from 1 by {dev:.3e}")
    return ButcherTableau.from_ab(A, b, ls.p, name=ls.name)


def consistent_gamma3(delta, gamma1, gamma2):
    """gamma3 making every stage input carry u^n with unit weight."""
    return 1.0 - gamma1 - gamma2 * np.cumsum(delta)


# ---------------------------------------------------------------------------
# steppers


def step_3sstar(ls, rhs, u, t, dt):
    """One 3S* step. ``rhs(state, time)`` returns the residual F."""
    S3 = np.array(u, dtype=np.result_type(u, float), copy=True)
    S2 = np.zeros_like(S3)
    S1 = S3.copy()
    for i in range(ls.s):
        F = rhs(S1, t + ls.c[i] * dt)
        if not np.all(np.isfinite(F)):
            raise NonFiniteStateError(f"non-finite residual at stage {i + 1}")
        S2 += ls.delta[i] * S1
        S1 = ls.gamma1[i] * S1 + ls.gamma2[i] * S2 + ls.gamma3[i] * S3 + (ls.beta[i] * dt) * F
    return S1


def step_butcher(t_, rhs, u, t, dt):
    """Dense explicit RK step storing every stage derivative."""
    u = np.asarray(u, dtype=np.result_type(u, float))
    ks = []
    for i in range(t_.s):
        y = u.copy()
        for j in range(i):
            if t_.a[i, j] != 0.0:
                y = y + (dt * t_.a[i, j]) * ks[j]
        F = rhs(y, t + t_.c[i] * dt)
        if not np.all(np.isfinite(F)):
            raise NonFiniteStateError(f"non-finite residual at stage {i + 1}")
        ks.append(F)
    out = u.copy()
    for j in range(t_.s):
        if t_.b[j] != 0.0:
            out = out + (dt * t_.b[j]) * ks[j]
    return out


def stepper_for(scheme):
    if isinstance(scheme, LowStorage3SStar):
        return lambda rhs, u, t, dt: step_3sstar(scheme, rhs, u, t, dt)
    return lambda rhs, u, t, dt: step_butcher(scheme, rhs, u, t, dt)


def integrate(scheme, rhs, u0, t0, te, dt):
    """Fixed-step integration on [t0, te]; the final step is shortened to land on te."""
    n = max(1, int(np.ceil((te - t0) / dt - 1e-12)))
    step = stepper_for(scheme)
    u = np.array(u0, dtype=float, copy=True)
    t = t0
    for k in range(n):
        h = min(dt, te - t) if k == n - 1 else dt
        u = step(rhs, u, t, h)
        t = t0 + (k + 1) * dt if k < n - 1 else te
    return u


def as_butcher(scheme):
    return butcher_from_3sstar(scheme) if isinstance(scheme, LowStorage3SStar) else scheme


# ---------------------------------------------------------------------------
# reference methods

_REFERENCE = {
    "ERK(2,2)": ([[0, 0], [0.5, 0]], [0, 1], 2),
    "ERK(3,3)": ([[0, 0, 0], [1 / 3, 0, 0], [0, 2 / 3, 0]], [0.25, 0, 0.75], 3),
    "ERK(4,4)": ([[0, 0, 0, 0], [0.5, 0, 0, 0], [0, 0.5, 0, 0], [0, 0, 1, 0]],
                 [1 / 6, 1 / 3, 1 / 3, 1 / 6], 4),
    "ERKF(6,5)": (
        [[0, 0, 0, 0, 0, 0],
         [1 / 4, 0, 0, 0, 0, 0],
         [3 / 32, 9 / 32, 0, 0, 0, 0],
         [1932 / 2197, -7200 / 2197, 7296 / 2197, 0, 0, 0],
         [439 / 216, -8, 3680 / 513, -845 / 4104, 0, 0],
         [-8 / 27, 2, -3544 / 2565, 1859 / 4104, -11 / 40, 0]],
        [16 / 135, 0, 6656 / 12825, 28561 / 56430, -9 / 50, 2 / 55], 5),
}

REFERENCE_NAMES = tuple(_REFERENCE)


def reference_tableau(name):
    try:
        a, b, p = _REFERENCE[name]
    except KeyError:
        raise UnknownMethodError(f"unknown method {name!r}; known: {', '.join(_REFERENCE)}") from None
    return ButcherTableau.from_ab(a, b, p, name=name)


def reference_for_order(p):
    for name in _REFERENCE:
        if _REFERENCE[name][2] == p:
            return reference_tableau(name)
    raise UnknownMethodError(f"no reference method of order {p}")


# ---------------------------------------------------------------------------
# efficiency


def efficiency(nu1, s1, C1, nu2, s2, C2, p):
    for label, v in (("nu1", nu1), ("s1", s1), ("C1", C1), ("nu2", nu2),
                     ("s2", s2), ("C2", C2), ("p", p)):
        if not v > 0:
            raise DomainError(f"{label} must be positive, got {v}")
    chi_stab = (nu1 / s1) / (nu2 / s2)
    chi_acc = (C2 / C1) ** (1.0 / p) * (s2 / s1)
    return EfficiencyPair(chi_stab=chi_stab, chi_acc=chi_acc)


# ---------------------------------------------------------------------------
# scheme files


def save_scheme(path, ls):
    _io.write_json(path, ls.to_dict())


def load_scheme(path):
    import json

    with open(path, encoding="utf-8") as fh:
        return LowStorage3SStar.from_dict(json.load(fh))


def taylor_coefficients(p):
    return np.array([1.0 / factorial(j) for j in range(p + 1)])

