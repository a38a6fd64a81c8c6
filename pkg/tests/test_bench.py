import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sdrk.bench import (
    BenchmarkProblem,
    acoustic_pressure,
    acoustic_problem,
    annulus_problem,
    cfl_to_timestep,
    max_norm_error,
    ode_test_problem,
    periodic_images,
    run_convergence,
)
from sdrk.errors import InstabilityError, InvalidArgumentsError, QuadratureError, UndefinedTimestepError
from sdrk.tableau import reference_tableau

DTS = [0.4 / 2**k for k in range(5, 9)]


# --- ODE problem --------------------------------------------------------------


def test_ode_exact_values():
    prob = ode_test_problem()
    assert prob.exact(1.4)[0] == pytest.approx(1 / 1.4, abs=1e-15)
    assert np.array_equal(prob.initial(), [1.0, np.exp(-1.0)])
    assert (prob.t0, prob.te) == (1.0, 1.4)


def test_ode_rhs_reproduces_derivative():
    prob = ode_test_problem()
    for t in np.linspace(1.0, 1.4, 100):
        q = prob.exact(t)
        # derivatives of 1/t and exp(-t^2), written out by hand
        dq = np.array([-1.0 / t**2, -2.0 * t * np.exp(-t * t)])
        assert np.max(np.abs(prob.rhs(q, t) - dq)) <= 1e-12


def test_problem_rejects_empty_window():
    with pytest.raises(ValueError):
        BenchmarkProblem("ode_order_test", {}, 1.0, 1.0, None, None)


# --- annulus ------------------------------------------------------------------


def test_annulus_examples():
    prob = annulus_problem()
    assert prob.initial(0.0, 7.5) == 1.0
    assert prob.exact(7.5, 0.0, prob.te) == pytest.approx(1.0, abs=1e-14)
    assert prob.exact(0.0, 7.5, prob.te) < 1e-60
    assert prob.params == {"omega": 2 * np.pi, "b": 0.6, "r_inner": 5.0, "r_outer": 10.0}


@settings(max_examples=30, deadline=None)
@given(st.floats(0.1, 1.5), st.floats(5, 10), st.floats(0, np.pi / 2))
def test_annulus_exact_is_clockwise_rotation(t, r, th):
    prob = annulus_problem()
    x, y = r * np.cos(th), r * np.sin(th)
    # a point carried clockwise keeps its value
    a = -prob.params["omega"] * t
    xr, yr = np.cos(a) * x - np.sin(a) * y, np.sin(a) * x + np.cos(a) * y
    assert prob.exact(xr, yr, t) == pytest.approx(prob.initial(x, y), abs=1e-13)


def test_periodic_images_are_quarter_turn_invariant():
    prob = annulus_problem()
    f = lambda x, y: periodic_images(prob.initial, x, y)  # noqa: E731
    assert f(6.0, 1.0) == pytest.approx(f(-1.0, 6.0), abs=1e-15)


# --- acoustic pulse -------------------------------------------------------------


def test_pulse_integral_closed_form():
    c0 = np.sqrt(1.4)
    assert acoustic_pressure(0.0, 0.0, c0=c0) == pytest.approx(c0**2, abs=1e-10)


def test_pulse_initial_and_far_field():
    prob = acoustic_problem()
    q = prob.initial(np.array(0.0), np.array(0.0))
    assert q[4] == pytest.approx(1.4e-3, rel=1e-14)
    assert q[0] == 1e-3 and q[1] == q[2] == q[3] == 0.0
    assert abs(prob.exact(10.0, 0.0, 0.2)) <= 1e-12
    # at t = 0 the quadrature reproduces the Gaussian initial pressure
    r = np.linspace(0, 0.2, 9)
    assert prob.exact(r, 0 * r, 0.0) == pytest.approx(1.4e-3 * np.exp(-(r / 0.05) ** 2), abs=1e-12)


def test_pulse_peak_decays():
    # the centre pressure falls as the ring spreads outward
    prob = acoustic_problem()
    assert 0 < prob.exact(0.0, 0.0, 0.02) < prob.exact(0.0, 0.0, 0.0)


def test_pulse_quadrature_error():
    with pytest.raises(QuadratureError):
        acoustic_pressure(0.3, 0.1, tol=0.0, max_panels=64)


# --- norms and steps ----------------------------------------------------------


def test_max_norm_examples():
    ex = np.linspace(0, 1, 24).reshape(6, 2, 2, 1)
    assert max_norm_error(ex.copy(), ex).linf == 0.0
    q = ex.copy()
    q[3, 1, 0, 0] += 0.3
    m = max_norm_error(q, ex)
    assert m.linf == pytest.approx(0.3) and m.n_dof == 24
    assert max_norm_error(2 * ex - q, ex).linf == pytest.approx(0.3)


def test_max_norm_picks_variable():
    q = np.zeros((2, 2, 2, 5))
    q[..., 4] = 1.0
    assert max_norm_error(q, np.zeros((2, 2, 2)), variable=4).linf == 1.0
    assert max_norm_error(q, np.zeros((2, 2, 2)), variable=0).linf == 0.0


def test_cfl_examples():
    assert cfl_to_timestep(0.5, 1, 0, 0.1, 0.1) == pytest.approx(0.05)
    assert cfl_to_timestep(0.5, 1, 1, 0.1, 0.1) == pytest.approx(0.025)
    with pytest.raises(UndefinedTimestepError):
        cfl_to_timestep(0.5, 0, 0, 0.1, 0.1)
    with pytest.raises(InvalidArgumentsError):
        cfl_to_timestep(0.5, 1, 0, 0.0, 0.1)


def test_cfl_takes_global_minimum():
    u = np.array([1.0, 2.0])
    assert cfl_to_timestep(1.0, u, 0 * u, np.array([0.1, 0.1]), np.array([1.0, 1.0])) == pytest.approx(0.05)


# --- convergence --------------------------------------------------------------


def test_erk44_convergence_slope():
    res = run_convergence(reference_tableau("ERK(4,4)"), ode_test_problem(), DTS)
    assert res.slope == pytest.approx(4.0, abs=0.2)
    # halving the step cuts the error by 2^4 within 20%
    ratios = np.array(res.errors[:-1]) / np.array(res.errors[1:])
    assert np.all(np.abs(ratios / 16 - 1) <= 0.2)


@pytest.mark.parametrize("name,p", [("ERK(2,2)", 2), ("ERK(3,3)", 3), ("ERKF(6,5)", 5)])
def test_reference_slopes(name, p):
    assert run_convergence(reference_tableau(name), ode_test_problem(), DTS).slope == pytest.approx(p, abs=0.2)


def test_convergence_input_checks():
    t = reference_tableau("ERK(2,2)")
    with pytest.raises(InvalidArgumentsError):
        run_convergence(t, ode_test_problem(), [0.01])
    with pytest.raises(InvalidArgumentsError):
        run_convergence(t, ode_test_problem(), [0.01, 0.02, 0.005])


@pytest.mark.filterwarnings("ignore:overflow:RuntimeWarning")
def test_instability_names_the_step():
    # midpoint far outside its stability region on a stiff scalar decay
    prob = BenchmarkProblem("ode_order_test", {}, 0.0, 200.0, lambda: np.array([1.0]),
                            lambda t: np.exp(-50 * t), rhs=lambda q, t: -50.0 * q)
    with pytest.raises(InstabilityError) as err:
        run_convergence(reference_tableau("ERK(2,2)"), prob, [1.0, 0.5, 0.25])
    assert err.value.dt == 1.0
