import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sdrk.errors import (
    DomainError,
    InconsistentSchemeError,
    NonFiniteStateError,
    NotOrderError,
    UnknownMethodError,
    UnsupportedOrderError,
)
from sdrk.tableau import (
    ButcherTableau,
    LowStorage3SStar,
    butcher_from_3sstar,
    consistent_gamma3,
    efficiency,
    integrate,
    load_scheme,
    order_condition_residuals,
    principal_error_norm,
    reference_tableau,
    save_scheme,
    stability_polynomial,
    step_3sstar,
    step_butcher,
)
from sdrk.trees import TREE_TABLE, trees_of_order

REFS = ["ERK(2,2)", "ERK(3,3)", "ERK(4,4)", "ERKF(6,5)"]


def hand_conditions(A, b):
    """Order conditions up to order 5 written out longhand (independent of the tree table)."""
    e = np.ones(len(b))
    c = A @ e
    Ac, Ac2, Ac3 = A @ c, A @ c**2, A @ c**3
    AAc, AAc2, AcAc = A @ Ac, A @ Ac2, A @ (c * Ac)
    AAAc = A @ AAc
    return {
        1: [b @ e - 1],
        2: [b @ c - 1 / 2],
        3: [b @ c**2 - 1 / 3, b @ Ac - 1 / 6],
        4: [b @ c**3 - 1 / 4, b @ (c * Ac) - 1 / 8, b @ Ac2 - 1 / 12, b @ AAc - 1 / 24],
        5: [b @ c**4 - 1 / 5, b @ (c**2 * Ac) - 1 / 10, b @ (c * Ac2) - 1 / 15,
            b @ (c * AAc) - 1 / 30, b @ (Ac * Ac) - 1 / 20, b @ Ac3 - 1 / 20,
            b @ AcAc - 1 / 40, b @ AAc2 - 1 / 60, b @ AAAc - 1 / 120],
    }


def random_tableau(rng, s):
    A = np.tril(rng.uniform(-1, 1, (s, s)), -1)
    b = rng.uniform(-1, 1, s)
    return ButcherTableau.from_ab(A, b, p=0)


def random_3sstar(rng, s, p=1):
    delta, g1, g2 = rng.uniform(-1, 1, (3, s))
    beta = rng.uniform(-1, 1, s)
    g3 = consistent_gamma3(delta, g1, g2)
    ls = LowStorage3SStar(delta=delta, gamma1=g1, gamma2=g2, gamma3=g3, beta=beta,
                          c=np.zeros(s), p=p)
    t = butcher_from_3sstar(ls)
    return LowStorage3SStar(delta=delta, gamma1=g1, gamma2=g2, gamma3=g3, beta=beta, c=t.c, p=p)


# --- trees ------------------------------------------------------------------


def test_tree_counts():
    assert [len(trees_of_order(n)) for n in range(1, 7)] == [1, 1, 2, 4, 9, 20]
    assert [len(TREE_TABLE[n]) for n in range(1, 7)] == [1, 1, 2, 4, 9, 20]


def test_residuals_match_longhand_conditions():
    rng = np.random.default_rng(3)
    for _ in range(5):
        t = random_tableau(rng, 6)
        rep = order_condition_residuals(t, 5)
        hand = hand_conditions(t.a, t.b)
        for n in range(1, 6):
            assert sorted(rep.residuals_by_order[n]) == pytest.approx(sorted(hand[n]), abs=1e-13)


# --- order conditions -------------------------------------------------------


@pytest.mark.parametrize("name", REFS)
def test_reference_methods_have_nominal_order(name):
    t = reference_tableau(name)
    rep = order_condition_residuals(t, t.p)
    worst = max(abs(v) for res in rep.residuals_by_order.values() for v in res)
    assert worst <= 1e-14
    assert t.check_invariants() == []


def test_midpoint_order3_residuals():
    t = reference_tableau("ERK(2,2)")
    assert np.allclose(t.c, [0, 0.5]) and np.allclose(t.b, [0, 1])
    rep = order_condition_residuals(t, 3)
    assert sorted(rep.residuals_by_order[3]) == pytest.approx(sorted([-1 / 12, -1 / 6]), abs=1e-15)
    assert principal_error_norm(t) == pytest.approx(np.sqrt(1 / 144 + 1 / 36), abs=1e-15)
    assert principal_error_norm(t) == pytest.approx(0.1863, abs=1e-4)


def test_forward_euler_order2_residual():
    t = ButcherTableau.from_ab([[0.0]], [1.0], p=1)
    rep = order_condition_residuals(t, 2)
    assert rep.residuals_by_order[2] == pytest.approx([-0.5])


def test_erk44_principal_error_matches_longhand():
    t = reference_tableau("ERK(4,4)")
    assert principal_error_norm(t) == pytest.approx(np.linalg.norm(hand_conditions(t.a, t.b)[5]), abs=1e-15)


def test_principal_error_is_norm_of_top_residuals():
    t = reference_tableau("ERKF(6,5)")
    rep = order_condition_residuals(t, 6)
    assert principal_error_norm(t) == pytest.approx(np.linalg.norm(rep.residuals_by_order[6]), abs=1e-14)


def test_max_order_above_six_rejected():
    with pytest.raises(UnsupportedOrderError):
        order_condition_residuals(reference_tableau("ERK(4,4)"), 7)


def test_not_order_p_rejected():
    t = ButcherTableau.from_ab([[0, 0], [0.5, 0]], [0.5, 0.5], p=2)
    with pytest.raises(NotOrderError):
        principal_error_norm(t)


def test_unknown_method():
    with pytest.raises(UnknownMethodError):
        reference_tableau("ERK(7,7)")


# --- stability polynomial ---------------------------------------------------


def resolvent_psi(t, z):
    """psi(z) = 1 + z b^T (I - z A)^-1 e, evaluated directly."""
    s = t.s
    return 1 + z * t.b @ np.linalg.solve(np.eye(s) - z * t.a, np.ones(s))


def test_erk44_stability_coefficients():
    beta = stability_polynomial(reference_tableau("ERK(4,4)")).coeffs
    assert beta == pytest.approx([1, 1, 1 / 2, 1 / 6, 1 / 24], abs=1e-15)


def test_forward_euler_stability():
    t = ButcherTableau.from_ab([[0.0]], [1.0], p=1)
    assert stability_polynomial(t).coeffs.tolist() == [1.0, 1.0]


def test_fehlberg_last_coefficient():
    t = reference_tableau("ERKF(6,5)")
    v = np.ones(6)
    for _ in range(5):
        v = t.a @ v
    assert stability_polynomial(t).coeffs[6] == pytest.approx(t.b @ v, rel=1e-13)
    assert stability_polynomial(t).coeffs[6] == pytest.approx(1 / 2080, rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 12), st.integers(0, 10**6))
def test_stability_polynomial_matches_resolvent(s, seed):
    rng = np.random.default_rng(seed)
    t = random_tableau(rng, s)
    beta = stability_polynomial(t).coeffs
    assert beta.shape == (s + 1,)
    for z in (0.3, -0.7 + 0.2j, 0.5j):
        assert np.polyval(beta[::-1], z) == pytest.approx(resolvent_psi(t, z), abs=1e-12)


@pytest.mark.parametrize("name", REFS)
def test_leading_coefficients_are_taylor(name):
    from math import factorial

    t = reference_tableau(name)
    beta = stability_polynomial(t).coeffs
    assert beta[: t.p + 1] == pytest.approx([1 / factorial(j) for j in range(t.p + 1)], abs=1e-12)


# --- 3S* --------------------------------------------------------------------


def test_3sstar_forward_euler():
    z = np.zeros(1)
    ls = LowStorage3SStar(delta=z, gamma1=[1.0], gamma2=z, gamma3=z, beta=[1.0], c=z, p=1)
    t = butcher_from_3sstar(ls)
    assert t.a.tolist() == [[0.0]] and t.b.tolist() == [1.0]


def test_3sstar_inconsistent_gamma3():
    z = np.zeros(2)
    ls = LowStorage3SStar(delta=z, gamma1=[1.0, 0.5], gamma2=z, gamma3=z, beta=[1.0, 1.0], c=z, p=1)
    with pytest.raises(InconsistentSchemeError):
        butcher_from_3sstar(ls)


def test_dead_registers():
    """delta = gamma3 = 0: S1 <- S1 + beta F, a plain two-register recurrence."""
    s = 4
    beta = np.array([0.5, 0.25, 0.125, 1.0])
    z = np.zeros(s)
    ls = LowStorage3SStar(delta=z, gamma1=np.ones(s), gamma2=np.ones(s), gamma3=z, beta=beta, c=z, p=1)
    t = butcher_from_3sstar(ls)
    A = np.tril(np.tile(beta, (s, 1)), -1)
    assert np.allclose(t.a, A) and np.allclose(t.b, beta)


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 20), st.integers(1, 8), st.integers(0, 10**6))
def test_3sstar_step_matches_butcher_step(s, n, seed):
    rng = np.random.default_rng(seed)
    ls = random_3sstar(rng, s)
    t = butcher_from_3sstar(ls)
    M = rng.normal(size=(n, n)) / np.sqrt(n)
    g = rng.normal(size=n)
    rhs = lambda u, time: M @ u + g * np.cos(time)  # noqa: E731
    u = rng.normal(size=n)
    dt = 0.1
    a = step_3sstar(ls, rhs, u, 0.3, dt)
    b = step_butcher(t, rhs, u, 0.3, dt)
    assert np.max(np.abs(a - b)) <= 1e-12 * max(1.0, np.max(np.abs(b)))


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 12), st.integers(0, 10**6))
def test_3sstar_scalar_step_is_stability_polynomial(s, seed):
    rng = np.random.default_rng(seed)
    ls = random_3sstar(rng, s)
    beta = stability_polynomial(butcher_from_3sstar(ls)).coeffs
    lam = -0.8 + 0.6j
    for dt in (0.1, 0.37):
        out = step_3sstar(ls, lambda u, t: lam * u, np.array([1.0 + 0j]), 0.0, dt)[0]
        assert out == pytest.approx(np.polyval(beta[::-1], dt * lam), abs=1e-12)


def test_step_identities():
    ls = random_3sstar(np.random.default_rng(0), 5)
    u = np.array([1.0, -2.0, 3.0])
    assert step_3sstar(ls, lambda q, t: np.zeros_like(q), u, 0.0, 0.1) == pytest.approx(u, abs=1e-13)
    ls1 = random_3sstar(np.random.default_rng(1), 5)
    t = butcher_from_3sstar(ls1)
    scale = 1.0 / t.b.sum()
    ls1 = LowStorage3SStar(ls1.delta, ls1.gamma1, ls1.gamma2, ls1.gamma3, ls1.beta * scale, ls1.c * scale, 1)
    out = step_3sstar(ls1, lambda q, t: np.ones_like(q), u, 0.0, 0.25)
    assert out == pytest.approx(u + 0.25, abs=1e-12)


def test_step_non_finite_residual():
    t = reference_tableau("ERK(4,4)")
    with pytest.raises(NonFiniteStateError):
        step_butcher(t, lambda u, s: u * np.inf, np.ones(2), 0.0, 0.1)
    ls = random_3sstar(np.random.default_rng(2), 3)
    with pytest.raises(NonFiniteStateError):
        step_3sstar(ls, lambda u, s: u * np.nan, np.ones(2), 0.0, 0.1)


def test_integrate_lands_on_end_time():
    t = reference_tableau("ERK(4,4)")
    out = integrate(t, lambda u, s: np.array([1.0]), np.array([0.0]), 0.0, 1.0, 0.3)
    assert out[0] == pytest.approx(1.0, abs=1e-14)


def test_scheme_roundtrip(tmp_path):
    ls = random_3sstar(np.random.default_rng(4), 6)
    ls = LowStorage3SStar(ls.delta, ls.gamma1, ls.gamma2, ls.gamma3, ls.beta, ls.c, 1, name="rt")
    save_scheme(tmp_path / "s.json", ls)
    back = load_scheme(tmp_path / "s.json")
    for key in ("delta", "gamma1", "gamma2", "gamma3", "beta", "c"):
        assert np.array_equal(getattr(back, key), getattr(ls, key))
    assert back.name == "rt" and back.p == 1


# --- efficiency -------------------------------------------------------------


def test_efficiency_examples():
    e = efficiency(1.0, 4, 0.1, 1.0, 4, 0.1, 4)
    assert (e.chi_stab, e.chi_acc) == (1.0, 1.0)
    assert efficiency(2.0, 4, 0.1, 1.0, 4, 0.2, 4).chi_stab == 2.0
    assert efficiency(1.0, 8, 0.1, 1.0, 4, 0.1, 4).chi_acc == pytest.approx(0.5)
    with pytest.raises(DomainError):
        efficiency(0.0, 4, 0.1, 1.0, 4, 0.1, 4)
