import numpy as np
import pytest
import sympy as sp

from mptp.action import el_residual, fw_action_paper_discrete
from mptp.approx import free_bridge_drift
from mptp.lineardyn import ou_analytic_path, ou_bridge_field
from mptp.model import make_potential
from mptp.solvers import (DriftField, IntegrationError, NonconvergenceError, gauss_legendre,
                          gauss_legendre_nodes, integrate_ivp, shoot_el)

DW = make_potential("double_well")
SWAP = make_potential("linear", {"G": [[0, 1], [1, 0]]})


def test_zero_drift_is_constant():
    f = DriftField(lambda t, x: np.zeros_like(x), 2)
    path = integrate_ivp(f, [0.5, -2.0], 1.0, 0.01)
    assert np.all(path.values == [0.5, -2.0])
    assert path.n_steps == 100


def test_free_bridge_is_straight_line():
    path = integrate_ivp(free_bridge_drift([3.0, -1.0], 2.0), [1.0, 1.0], 2.0, 1e-3)
    t = path.times[:, None]
    line = np.array([1.0, 1.0]) + t / 2.0 * np.array([2.0, -2.0])
    assert np.max(np.abs(path.values - line)) <= 1e-12
    assert np.array_equal(path.values[-1], [3.0, -1.0])


def test_grid_adjustment():
    f = DriftField(lambda t, x: np.ones_like(x), 1)
    path = integrate_ivp(f, [0.0], 1.0, 0.3)
    assert path.n_steps == 3 and path.final_time == pytest.approx(1.0)
    with pytest.raises(ValueError):
        integrate_ivp(f, [0.0], 1.0, 1.0)
    with pytest.raises(ValueError):
        integrate_ivp(f, [0.0], 1.0, 0.1, scheme="midpoint")


def test_rk4_order():
    f = DriftField(lambda t, x: -x, 1)
    errs = [abs(integrate_ivp(f, [1.0], 1.0, h, scheme="rk4").values[-1, 0] - np.exp(-1.0))
            for h in (0.1, 0.05)]
    assert errs[0] / errs[1] == pytest.approx(16.0, rel=0.1)


def test_blow_up_raises():
    f = DriftField(lambda t, x: x * x, 1)
    with pytest.raises(IntegrationError) as exc:
        integrate_ivp(f, [1.0], 2.0, 1e-3)
    assert 0.9 < exc.value.t < 2.0


def test_ou_bridge_endpoint_and_euler_order():
    ref = ou_analytic_path(2.0, 1.0, 1.0, 0.0, 2.0, 2.0, 1e-3)
    errs = []
    for dt in (1e-2, 5e-3):
        path = integrate_ivp(ou_bridge_field(2.0, 1.0, 2.0, 2.0), [0.0], 2.0, dt)
        assert path.values[-1, 0] == 2.0
        step = int(round(dt / 1e-3))
        # compare on interior nodes away from the pinned end
        errs.append(np.max(np.abs(path.values[:-2, 0] - ref.values[::step][:-2, 0])))
    assert errs[0] / errs[1] == pytest.approx(2.0, abs=0.2)


def test_shoot_double_well():
    res = shoot_el(DW, -1.0, 1.0, 4.0, 1e-4)
    assert res.converged and res.endpoint_error < 1e-4
    assert fw_action_paper_discrete(res.path, DW) == pytest.approx(1.2939, abs=0.02)
    assert el_residual(res.path, DW) <= 1e-3
    again = shoot_el(DW, -1.0, 1.0, 4.0, 1e-4)
    assert np.array_equal(res.path.values, again.path.values)


def test_shoot_at_equilibrium_needs_no_iterations():
    res = shoot_el(DW, 1.0, 1.0, 3.0, 1e-3)
    assert res.iterations == 0 and res.converged
    assert np.all(res.path.values == 1.0)


@pytest.mark.parametrize("x0, xl", [((1, -1), (-1, 1)), ((1, -1), (1, 1))])
def test_shoot_linear_2d(x0, xl):
    x0, xl, l = np.array(x0, float), np.array(xl, float), 2.0
    res = shoot_el(SWAP, x0, xl, l, 1e-4)
    t = res.path.times[:, None]
    exact = (xl * np.sinh(t) + x0 * np.sinh(l - t)) / np.sinh(l)
    assert np.max(np.abs(res.path.values - exact)) <= 1e-3


def test_nonconvergence_keeps_best_iterate():
    with pytest.raises(NonconvergenceError) as exc:
        shoot_el(DW, -1.0, 1.0, 4.0, 1e-3, tol=1e-14, max_iter=1)
    r = exc.value.result
    assert not r.converged and r.iterations == 1
    assert np.isfinite(r.endpoint_error)
    assert np.all(np.isfinite(r.path.values))
    assert exc.value.reason == "max_iter exceeded"
    with pytest.raises(ValueError):
        shoot_el(DW, -1.0, 1.0, 4.0, 1e-3, tol=0.0)


@pytest.mark.parametrize("order", [4, 8, 16])
def test_gauss_legendre_exact_for_polynomials(order):
    u = sp.symbols("u")
    rng = np.random.default_rng(order)
    for deg in range(2 * order):
        coef = rng.integers(-5, 6, size=deg + 1)
        poly = sum(int(c) * u**j for j, c in enumerate(coef))
        exact = float(sp.integrate(poly, (u, 0, 1)))
        got = gauss_legendre(lambda x: np.polyval(coef[::-1], x), order)
        assert abs(got - exact) <= 1e-12 * max(1.0, abs(exact))


def test_gauss_legendre_nodes():
    u, w = gauss_legendre_nodes(8)
    assert np.all((u > 0) & (u < 1)) and w.sum() == pytest.approx(1.0, abs=1e-15)
    with pytest.raises(ValueError):
        gauss_legendre_nodes(5)
    assert gauss_legendre(np.exp, 16) == pytest.approx(np.e - 1, rel=1e-15)
