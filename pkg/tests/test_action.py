import numpy as np
import pytest
import sympy as sp

from mptp.action import (action_report, el_residual, fw_action, fw_action_paper_discrete,
                         om_action)
from mptp.model import Path, make_potential

OU = make_potential("ou", {"theta": 2.0, "mu": 1.0})
DW = make_potential("double_well")
FREE = make_potential("free", dim=2)
SWAP = make_potential("linear", {"G": [[0, 1], [1, 0]], "a": [0.3, -0.1]})


def grid_path(f, l, n, t0=0.0):
    t = t0 + np.linspace(0.0, l, n + 1)
    return Path(t0, l / n, f(t))


def test_constant_free_path_has_zero_action():
    path = Path(0.0, 0.01, np.tile([0.4, -1.0], (101, 1)))
    assert om_action(path, FREE, 0.7) == 0.0
    assert fw_action(path, FREE) == 0.0


def test_free_straight_line():
    path = grid_path(lambda t: t, 2.0, 200)
    assert fw_action(path, make_potential("free", dim=1)) == pytest.approx(1.0, rel=1e-12)
    assert fw_action_paper_discrete(path, make_potential("free", dim=1)) == pytest.approx(2.0)


def test_fw_half_relation():
    rng = np.random.default_rng(4)
    for p in (OU, DW, SWAP):
        path = Path(0.0, 0.05, rng.normal(size=(41, p.dim)))
        assert fw_action(path, p) == 0.5 * fw_action_paper_discrete(path, p)
        rep = action_report(path, p, 0.5)
        assert rep.fw_half == fw_action(path, p)
        assert rep.om == om_action(path, p, 0.5)
        assert rep.n_steps == 40
    assert action_report(path, SWAP).om is None


def test_euler_orbit_has_zero_fw_action():
    # a forward Euler trajectory of the gradient flow has zero discrete residual
    dt, x = 1e-3, np.array([0.2])
    vals = [x]
    for _ in range(2000):
        x = x + dt * DW.grad(x)
        vals.append(x)
    path = Path(0.0, dt, np.array(vals))
    assert fw_action(path, DW) <= 1e-20


def test_linear_om_is_affine_in_fw():
    # Laplacian of a quadratic potential is the constant trace of G
    rng = np.random.default_rng(9)
    sigma, l = 0.8, 1.5
    for _ in range(20):
        path = Path(0.0, l / 30, rng.normal(size=(31, 2)))
        om = om_action(path, SWAP, sigma)
        assert om == pytest.approx(fw_action(path, SWAP) / sigma**2, rel=1e-12)
    G = make_potential("linear", {"G": [[-2.0, 0.5], [0.5, 1.0]]})
    path = Path(0.0, l / 30, rng.normal(size=(31, 2)))
    assert om_action(path, G, sigma) == pytest.approx(
        fw_action(path, G) / sigma**2 + 0.5 * (-1.0) * l, rel=1e-12)


def test_argmin_invariance_for_linear_drift():
    # OM and FW rank paths identically when the Laplacian is constant
    rng = np.random.default_rng(10)
    paths = [Path(0.0, 0.1, rng.normal(size=(21, 1))) for _ in range(30)]
    om = [om_action(q, OU, 0.6) for q in paths]
    fw = [fw_action(q, OU) for q in paths]
    assert np.argmin(om) == np.argmin(fw)
    assert np.array_equal(np.argsort(om), np.argsort(fw))


def _ou_parabola_exact():
    # exact OM action of psi(t) = t^2 on [0, 1] for theta = 2, mu = 1, sigma = 1
    t = sp.symbols("t")
    resid = 2 * t - 2 * (1 - t**2)
    return float(sp.Rational(1, 2) * sp.integrate(resid**2 - 2, (t, 0, 1)))


def test_om_action_grid_convergence():
    exact = _ou_parabola_exact()
    sq = lambda t: t * t
    errs = {rule: [abs(om_action(grid_path(sq, 1.0, n), OU, 1.0, rule=rule) - exact)
                   for n in (100, 200, 400)] for rule in ("left", "trapezoid")}
    left, trap = errs["left"], errs["trapezoid"]
    assert left[0] / left[1] == pytest.approx(2.0, abs=0.1)
    assert trap[0] / trap[1] == pytest.approx(4.0, abs=0.2)
    # Richardson extrapolation of the left rule recovers the exact value
    a1 = om_action(grid_path(sq, 1.0, 200), OU, 1.0)
    a2 = om_action(grid_path(sq, 1.0, 400), OU, 1.0)
    assert abs(2 * a2 - a1 - exact) < 0.01 * left[2]


def test_om_action_rejects_bad_input():
    path = grid_path(lambda t: t, 1.0, 10)
    with pytest.raises(ValueError):
        om_action(path, OU, 0.0)
    with pytest.raises(ValueError):
        om_action(path, OU, 1.0, rule="simpson")
    with pytest.raises(ValueError):
        fw_action(Path(0.0, 0.1, [[0.0]]), OU)
    with pytest.raises(ValueError):
        el_residual(Path(0.0, 0.1, [[0.0], [1.0]]), OU)


def test_additivity_over_grid_split():
    rng = np.random.default_rng(12)
    vals = np.cumsum(rng.normal(size=(61, 1)) * 0.1, axis=0)
    dt = 0.05
    whole = Path(0.0, dt, vals)
    left, right = Path(0.0, dt, vals[:26]), Path(25 * dt, dt, vals[25:])
    for f in (lambda q: om_action(q, DW, 0.4), lambda q: fw_action(q, DW)):
        assert f(whole) == pytest.approx(f(left) + f(right), rel=1e-12)


def test_fw_nonnegative():
    rng = np.random.default_rng(13)
    for p in (OU, DW, SWAP, FREE):
        for _ in range(20):
            path = Path(0.0, 0.1, 3 * rng.normal(size=(11, p.dim)))
            assert fw_action(path, p) >= 0.0


def _ou_bridge_mean(t, l=2.0):
    return 1 + (-np.sinh(2 * (l - t)) + np.sinh(2 * t)) / np.sinh(2 * l)


def test_el_residual_second_order():
    # the OU bridge mean solves the Euler-Lagrange equation exactly
    r = [el_residual(grid_path(lambda t: _ou_bridge_mean(t)[:, None], 2.0, n), OU)
         for n in (100, 200, 400)]
    assert r[0] / r[1] == pytest.approx(4.0, abs=0.1)
    assert r[1] / r[2] == pytest.approx(4.0, abs=0.1)
    # a path that is not a critical point has an O(1) residual
    assert el_residual(grid_path(lambda t: t[:, None], 2.0, 200), OU) > 1.0


def test_fw_converges_on_smooth_path():
    # exact FW action of the OU bridge mean from a symbolic integral
    t = sp.symbols("t")
    l = 2
    psi = 1 + (-sp.sinh(2 * (l - t)) + sp.sinh(2 * t)) / sp.sinh(2 * l)
    exact = float(sp.Rational(1, 2) * sp.integrate((sp.diff(psi, t) - 2 * (1 - psi)) ** 2, (t, 0, l)))
    errs = [abs(fw_action(grid_path(lambda s: _ou_bridge_mean(s)[:, None], 2.0, n), OU) - exact)
            for n in (400, 800, 1600)]
    assert errs[0] / errs[1] == pytest.approx(2.0, abs=0.15)
    assert errs[2] < 1e-2
