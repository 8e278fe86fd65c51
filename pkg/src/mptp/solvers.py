"""
Deterministic engines: forward Euler for (possibly endpoint-singular) drift
fields, Newton shooting for the Euler-Lagrange boundary value problem, and
fixed-order Gauss-Legendre quadrature on [0, 1].
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

from .model import Path, Potential


class IntegrationError(RuntimeError):
    def __init__(self, t: float, message: str = "non-finite drift or state"):
        self.t = t
        super().__init__(f"{message} at t={t:.6g}")


class NonconvergenceError(RuntimeError):
    """Shooting failed; ``result`` holds the best finite iterate."""

    def __init__(self, reason: str, result: "ShootingResult"):
        self.reason = reason
        self.result = result
        super().__init__(f"shooting did not converge ({reason}); "
                         f"iterations={result.iterations}, "
                         f"endpoint_error={result.endpoint_error:.3g}")


@dataclass(frozen=True)
class DriftField:
    """Time-dependent drift (t, x) -> dx/dt.

    ``singular_at`` marks a terminal time where the drift blows up; when
    ``pin_to`` is given the integrator sets the node at that time to it.
    """

    eval: Callable[[float, np.ndarray], np.ndarray]
    dim: int
    singular_at: float | None = None
    pin_to: np.ndarray | None = None


@dataclass(frozen=True)
class ShootingResult:
    path: Path
    iterations: int
    endpoint_error: float
    converged: bool
    initial_velocity: np.ndarray


SUPPORTED_ORDERS = (4, 8, 16)


@lru_cache(maxsize=None)
def _nodes(order: int):
    x, w = np.polynomial.legendre.leggauss(order)
    u, w = 0.5 * (x + 1.0), 0.5 * w
    u.setflags(write=False)
    w.setflags(write=False)
    return u, w


def gauss_legendre_nodes(order: int):
    """Nodes and weights of the order-point rule mapped to [0, 1]."""
    if order not in SUPPORTED_ORDERS:
        raise ValueError(f"unsupported quadrature order {order}; use one of {SUPPORTED_ORDERS}")
    return _nodes(order)


def gauss_legendre(f: Callable, order: int = 16) -> float:
    """int_0^1 f(u) du. ``f`` is called once with the array of nodes."""
    u, w = gauss_legendre_nodes(order)
    return float(np.dot(w, np.asarray(f(u), dtype=float)))


def _grid(l: float, dt: float):
    if not (dt > 0 and l > 0):
        raise ValueError("l and dt must be positive")
    if dt >= l:
        raise ValueError("dt must be smaller than l")
    n = max(1, int(round(l / dt)))
    return n, l / n


def integrate_ivp(f: DriftField, x0, l: float, dt: float, scheme: str = "euler") -> Path:
    """Integrate x' = f(t, x) from x(0) = x0 on the grid i*dt up to t = l.

    ``dt`` is adjusted to l/round(l/dt) so the grid ends exactly at l.
    For drifts singular at l the last step is not taken: the terminal node is
    ``f.pin_to`` if given, otherwise the previous Euler increment is repeated.
    """
    if scheme not in ("euler", "rk4"):
        raise ValueError(f"unknown scheme {scheme!r}")
    n, dt = _grid(l, dt)
    x = np.asarray(x0, dtype=float).reshape(f.dim).copy()
    out = np.empty((n + 1, f.dim))
    out[0] = x
    singular = f.singular_at is not None and f.singular_at <= l + 0.5 * dt
    last = n - 1 if singular else n
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(last):
            t = i * dt
            if scheme == "euler":
                k1 = f.eval(t, x)
                x = x + dt * k1
            else:
                k1 = f.eval(t, x)
                k2 = f.eval(t + 0.5 * dt, x + 0.5 * dt * k1)
                k3 = f.eval(t + 0.5 * dt, x + 0.5 * dt * k2)
                k4 = f.eval(t + dt, x + dt * k3)
                x = x + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
            if not np.all(np.isfinite(x)):
                raise IntegrationError(t)
            out[i + 1] = x
    if singular:
        if f.pin_to is not None:
            out[n] = np.asarray(f.pin_to, dtype=float).reshape(f.dim)
        elif n >= 2:
            out[n] = 2 * out[n - 1] - out[n - 2]
        else:
            out[n] = out[n - 1]
    return Path(0.0, dt, out)


# ---------------------------------------------------------------------------
# Euler-Lagrange shooting
# ---------------------------------------------------------------------------

_BLOWUP = 1e12
FD_STEP = 1e-6


def _el_flow(p: Potential, x0, V0, n: int, dt: float, record: bool = False):
    """Forward Euler for psi' = v, v' = grad|grad U|^2 / 2, batched over the
    rows of V0. Returns terminal states (rows set to nan once they blow up)
    and, if ``record``, the trajectory of row 0.
    """
    V = np.array(V0, dtype=float)
    X = np.broadcast_to(np.asarray(x0, dtype=float), V.shape).copy()
    traj = np.empty((n + 1, V.shape[1])) if record else None
    if record:
        traj[0] = X[0]
    alive = np.ones(V.shape[0], dtype=bool)
    gsq = p.kernel("grad_sq_gradient")
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(n):
            acc = 0.5 * gsq(X)
            X = X + dt * V
            V = V + dt * acc
            if record:
                traj[i + 1] = X[0]
            if i % 64 == 63 or i == n - 1:
                bad = ~np.all(np.isfinite(X) & (np.abs(X) < _BLOWUP), axis=1)
                if bad.any():
                    alive &= ~bad
                    X[bad] = 0.0
                    V[bad] = 0.0
                    if not alive.any():
                        break
    X[~alive] = np.nan
    return X, traj


def shoot_el(p: Potential, x0, xl, l: float, dt: float, tol: float = 1e-4,
             max_iter: int = 100, v0=None) -> ShootingResult:
    """Solve psi'' = grad|grad U|^2(psi) / 2, psi(0) = x0, psi(l) = xl by Newton
    iteration on the initial velocity.

    The Jacobian of v0 -> psi(l) comes from forward differences (step 1e-6
    per component); steps are globalised by halving (at most 20 times).
    The default seed is (xl - x0)/l; if that trajectory blows up, the seed is
    halved until it stays finite.

    Raises NonconvergenceError when the iteration budget is exhausted or the
    line search stalls.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    n, dt = _grid(l, dt)
    k = p.dim
    x0 = np.asarray(x0, dtype=float).reshape(k)
    xl = np.asarray(xl, dtype=float).reshape(k)

    def residual(V):
        X, _ = _el_flow(p, x0, np.atleast_2d(V), n, dt)
        return X - xl

    def result(v, F, it, ok):
        _, traj = _el_flow(p, x0, v[None, :], n, dt, record=True)
        err = float(np.max(np.abs(F))) if np.all(np.isfinite(F)) else np.inf
        return ShootingResult(Path(0.0, dt, traj), it, err, ok, v.copy())

    v = (xl - x0) / l if v0 is None else np.asarray(v0, dtype=float).reshape(k)
    F = residual(v)[0]
    halvings = 0
    while not np.all(np.isfinite(F)):
        if halvings >= 60:
            # nothing finite to report; fall back to the straight line
            line = x0 + np.outer(np.linspace(0.0, 1.0, n + 1), xl - x0)
            bad = ShootingResult(Path(0.0, dt, line), 0, np.inf, False, v.copy())
            raise NonconvergenceError("no finite trajectory from the seed", bad)
        v = 0.5 * v
        halvings += 1
        F = residual(v)[0]

    it = 0
    while True:
        if np.max(np.abs(F)) < tol:
            return result(v, F, it, True)
        if it >= max_iter:
            raise NonconvergenceError("max_iter exceeded", result(v, F, it, False))
        it += 1
        # base and perturbed trajectories in one batched pass
        batch = np.vstack([v, v + FD_STEP * np.eye(k)])
        R = residual(batch)
        if not np.all(np.isfinite(R)):
            raise NonconvergenceError("non-finite finite-difference Jacobian",
                                      result(v, F, it, False))
        J = (R[1:] - R[0]).T / FD_STEP
        try:
            step = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(J, -F, rcond=None)[0]
        norm = np.linalg.norm(F)
        lam = 1.0
        for _ in range(21):
            Fn = residual(v + lam * step)[0]
            if np.all(np.isfinite(Fn)) and np.linalg.norm(Fn) < norm:
                break
            lam *= 0.5
        else:
            raise NonconvergenceError("line search stalled", result(v, F, it, False))
        v = v + lam * step
        F = Fn
