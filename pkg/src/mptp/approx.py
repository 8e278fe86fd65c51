"""
Small-noise bridge drifts.

All three drifts share the Brownian-bridge pull (xl - x)/(l - t) and differ in
the correction that accounts for the potential:

* ``free_bridge``: no correction (exact for U = 0).
* ``appr1``: -(l - t)/4 * grad|grad U|^2(x), a short-time expansion.
* ``appr2``: -(l - t)/2 * int_0^1 (1 - u) (|U'|^2)'(xl u + x (1 - u)) du,
  one-dimensional only.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lineardyn import BridgeSingularityError
from .model import Path, Potential
from .solvers import DriftField, gauss_legendre_nodes, integrate_ivp

SCHEMES = ("free_bridge", "appr1", "appr2")


@dataclass(frozen=True, eq=False)
class ApproxSpec:
    scheme: str
    potential: Potential
    xl: np.ndarray
    l: float
    quad_order: int = 16

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        xl = np.atleast_1d(np.asarray(self.xl, dtype=float))
        if xl.shape != (self.potential.dim,):
            raise ValueError("xl does not match the potential dimension")
        if self.scheme == "appr2" and self.potential.dim != 1:
            raise ValueError("appr2 is only defined in one dimension")
        if not self.l > 0:
            raise ValueError("l must be positive")
        gauss_legendre_nodes(self.quad_order)
        object.__setattr__(self, "xl", xl)


def _check(t, l):
    if not t < l:
        raise BridgeSingularityError(f"bridge drift is singular at t={t} >= l={l}")


def free_bridge_drift(xl, l: float) -> DriftField:
    if not l > 0:
        raise ValueError("l must be positive")
    xl = np.atleast_1d(np.asarray(xl, dtype=float))

    def f(t, x):
        _check(t, l)
        return (xl - x) / (l - t)

    return DriftField(f, xl.size, singular_at=l, pin_to=xl)


def appr1_drift(spec: ApproxSpec) -> DriftField:
    if spec.scheme != "appr1":
        raise ValueError("appr1_drift needs scheme='appr1'")
    p, xl, l = spec.potential, spec.xl, spec.l
    gsq = p.kernel("grad_sq_gradient")

    def f(t, x):
        _check(t, l)
        return (xl - x) / (l - t) - 0.25 * (l - t) * gsq(x)

    return DriftField(f, p.dim, singular_at=l, pin_to=xl)


def appr2_drift(spec: ApproxSpec) -> DriftField:
    if spec.scheme != "appr2":
        raise ValueError("appr2_drift needs scheme='appr2'")
    p, xl, l = spec.potential, spec.xl, spec.l
    if p.dim != 1:
        raise ValueError("appr2 is only defined in one dimension")
    gsq = p.kernel("grad_sq_gradient")
    u, w = gauss_legendre_nodes(spec.quad_order)
    u = u[:, None]
    wu = w * (1.0 - u[:, 0])

    def f(t, x):
        _check(t, l)
        z = xl * u + x * (1.0 - u)          # (order, 1)
        corr = wu @ gsq(z)
        return (xl - x) / (l - t) - 0.5 * (l - t) * corr

    return DriftField(f, 1, singular_at=l, pin_to=xl)


def drift_field(spec: ApproxSpec) -> DriftField:
    if spec.scheme == "free_bridge":
        return free_bridge_drift(spec.xl, spec.l)
    if spec.scheme == "appr1":
        return appr1_drift(spec)
    return appr2_drift(spec)


def approx_path(spec: ApproxSpec, x0, dt: float, scheme: str = "euler") -> Path:
    """Integrate the chosen drift from x0 with the endpoint pinned to xl."""
    return integrate_ivp(drift_field(spec), x0, spec.l, dt, scheme=scheme)
