import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from swarmgrid.benchfns import make_function
from swarmgrid.core import EvalBudget, Evaluator, IncumbentChannel, function
from swarmgrid.errors import BudgetExhausted
from swarmgrid.exec_local import BatchExecutor
from swarmgrid.gradient import (
    AVDObserver,
    Discrete,
    Interval,
    LineSearchParams,
    armijo_step,
    asd_run,
    avd_run,
    cg_run,
    conjugate_gradient,
    fr_beta,
    numerical_gradient,
    pr_beta,
    steepest_descent,
)
from swarmgrid.gradient.descent import _Tracker
from swarmgrid.harness.runner import build_optimizer


def sphere(x):
    return float(np.sum(np.asarray(x) ** 2))


def test_gradient_of_constant_is_zero():
    assert np.array_equal(numerical_gradient(lambda x: 3.0, np.array([1.0, 2.0, 3.0])), np.zeros(3))


def test_gradient_exact_on_quadratic():
    g = numerical_gradient(sphere, np.array([1.0, -2.0]), h=1e-3)
    assert g == pytest.approx([2.0, -4.0], rel=1e-10)


@given(st.lists(st.floats(-3, 3), min_size=1, max_size=6), st.floats(1e-3, 1e-1))
def test_gradient_exact_on_quartics(xs, h):
    c = np.arange(1, len(xs) + 1, dtype=float)
    f = lambda x: float(np.sum(c * x**4 - x**3 + 2 * x**2))
    x = np.array(xs)
    exact = 4 * c * x**3 - 3 * x**2 + 4 * x
    g = numerical_gradient(f, x, h=h)
    assert np.allclose(g, exact, rtol=1e-8, atol=1e-8 * (1 + np.max(np.abs(exact))))


def quintic_error(h):
    g = numerical_gradient(lambda x: float(x[0] ** 5), np.array([1.0]), h=h)[0]
    return abs(g - 5.0)


def test_fourth_order_on_quintic():
    ratio = quintic_error(2e-2) / quintic_error(1e-2)
    assert 12 <= ratio <= 20
    assert quintic_error(1e-2) / quintic_error(2e-2) == pytest.approx(2**-4, rel=0.05)


def test_gradient_charges_four_per_component():
    b = EvalBudget(100)
    ev = Evaluator(make_function("sphere", 5), budget=b)
    numerical_gradient(ev, np.ones(5))
    assert b.used == 20


def test_gradient_budget_exhaustion():
    ev = Evaluator(make_function("sphere", 5), budget=EvalBudget(10))
    with pytest.raises(BudgetExhausted):
        numerical_gradient(ev, np.ones(5))


def test_gradient_parallel_components_match():
    f = make_function("rosenbrock", 9)
    x = np.linspace(-1, 1, 9)
    with BatchExecutor(3) as ex:
        assert np.array_equal(numerical_gradient(f, x, executor=ex), numerical_gradient(f, x))


def test_armijo_hand_trace():
    t, ft = armijo_step(lambda x: float(x[0] ** 2), np.array([1.0]), np.array([-2.0]), np.array([2.0]), 0.1, 0.8, 1.0)
    assert t == pytest.approx(0.8) and ft == pytest.approx(0.36)


def test_armijo_linear_takes_full_step():
    t, _ = armijo_step(lambda x: float(3 * x[0]), np.array([0.0]), np.array([-1.0]), np.array([3.0]), gamma=2.0)
    assert t == 2.0


def test_armijo_rejects_ascent():
    with pytest.raises(ValueError):
        armijo_step(sphere, np.array([1.0]), np.array([1.0]), np.array([2.0]))


def test_line_search_params_consistency():
    with pytest.raises(ValueError):
        LineSearchParams(rho=0.5, sigma=0.4)


def test_asd_sphere():
    x, f = asd_run(sphere, [np.full(10, 5.0)])
    assert f <= 1e-10 and np.max(np.abs(x)) <= 1e-5


def test_asd_converged_start_returns_immediately():
    calls = []

    def fn(x):
        calls.append(1)
        return sphere(x)

    tr = _Tracker()
    steepest_descent(fn, np.zeros(3), LineSearchParams(), tracker=tr)
    assert tr.iterations == 0 and len(calls) == 1 + 12


def double_well(x):
    # tilted: global minimum near x = -1, local minimum near x = +1
    v = x[0]
    return float((v * v - 1) ** 2 + 0.3 * v)


def test_asd_multistart_picks_global():
    starts = [np.array([2.0]), np.array([1.5]), np.array([0.9]), np.array([-1.2])]
    singles = [steepest_descent(double_well, s, LineSearchParams()) for s in starts]
    x, f = asd_run(double_well, starts)
    assert f == min(r[1] for r in singles)
    assert x[0] < 0
    with BatchExecutor(4) as ex:
        assert asd_run(double_well, starts, executor=ex)[1] == f


def test_cg_quadratic_finite_termination():
    A = np.diag([1.0, 2.0, 3.0])
    f = lambda x: float(0.5 * x @ A @ x)
    for update in ("fr", "pr"):
        tr = _Tracker()
        # finite termination needs a near-exact line search, hence the tight sigma
        p = LineSearchParams(rho=1e-7, sigma=1e-6)
        x, fx = conjugate_gradient(f, np.array([1.0, -1.0, 2.0]), p, update, gtol=1e-6, tracker=tr)
        g = A @ x
        assert np.max(np.abs(g)) <= 1e-6
        assert tr.iterations <= 4


def test_cg_rosenbrock():
    f = make_function("rosenbrock", 4)
    x, fx = cg_run(f, [np.full(4, -1.2)], update="pr")
    assert fx < 1e-8


def test_beta_updates():
    g = np.array([1.0, 2.0])
    assert fr_beta(g, g) == 1.0
    assert pr_beta(g, g) == 0.0
    assert pr_beta(np.array([0.1, 0.0]), np.array([1.0, 0.0])) == 0.0  # clamped


def test_avd_discrete_integer_domain():
    f = lambda x: float((x[0] - 2.3) ** 2)
    x, fx, _ = avd_run(f, np.array([7.0]), [Discrete(range(-10, 11))])
    assert x[0] == 2.0 and fx == pytest.approx(0.09)


def test_avd_coupled_quadratic():
    f = lambda x: float((x[0] + x[1]) ** 2 + (x[0] - x[1]) ** 2)
    x, fx, _ = avd_run(f, np.array([1.0, 1.0]), [Interval(-5, 5), Interval(-5, 5)])
    assert np.allclose(x, 0, atol=1e-6)


def test_avd_separable_one_effective_sweep():
    trace = []

    def f(x):
        return sphere(x - np.array([1.0, -2.0, 0.5]))

    x, fx, sweeps = avd_run(f, np.zeros(3), [Interval(-5, 5)] * 3)
    assert fx < 1e-16
    assert sweeps == 2  # the second sweep only confirms convergence


def test_avd_monotone_updates():
    vals = []
    f = make_function("rosenbrock", 3)

    class Rec:
        def __init__(self):
            self.x, self.f, self.iterations = None, np.inf, 0

        def offer(self, x, v):
            if v < self.f:
                vals.append(v)
                self.x, self.f = x, v

    avd_run(f, np.array([2.0, 2.0, 2.0]), [Interval(-5, 5)] * 3, max_sweeps=20, tracker=Rec())
    assert all(b < a for a, b in zip(vals, vals[1:]))


def test_avd_observer_republishes_improvements():
    ch = IncumbentChannel()
    obs = AVDObserver(sphere, [Interval(-5, 5)] * 2, max_sweeps=5)
    ch.attach(obs)
    ch.publish(np.array([3.0, 4.0]), 25.0)
    assert obs.runs >= 1
    assert ch.best_value < 1e-12


@pytest.mark.parametrize("method", ["asd", "fcg", "avd"])
def test_local_methods_respect_budget(method):
    f = make_function("rastrigin", 6)
    res = build_optimizer(method, {"budget": 3000, "seed": 1}).minimize(f)
    assert res.evals_used <= 3000
    assert res.value == pytest.approx(f(res.arg))


def test_every_line_search_step_decreases():
    steps = []
    f = make_function("rosenbrock", 3)

    class Rec(_Tracker):
        def offer(self, x, v):
            steps.append(v)
            super().offer(x, v)

    steepest_descent(f, np.array([-1.0, 2.0, 0.5]), LineSearchParams(), max_iter=200, tracker=Rec())
    assert all(b < a + 1e-15 for a, b in zip(steps, steps[1:]))
