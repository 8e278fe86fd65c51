"""
Closed-form Gaussian machinery for linear drifts G x + a with symmetric G.

With Phi(t) = exp(G t) the process is Gaussian with

    mean(t) = Phi(t) [x0 + int_0^t Phi(-s) a ds]
    cov(t)  = sigma^2 Phi(t) [int_0^t Phi(-s) Phi(-s)^T ds] Phi(t)^T

Everything is evaluated in the eigenbasis of G, where the integrals reduce to
scalar expressions of the form (exp(z) - 1) / z.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import Path, Potential
from .solvers import DriftField, gauss_legendre_nodes


class BridgeSingularityError(ValueError):
    """Bridge drift requested at or too close to the terminal time."""


_GRAMIAN_FLOOR = 1e-14


def _expm1_over(z):
    """(exp(z) - 1) / z, with a 4-term Taylor series for |z| < 1e-6."""
    z = np.asarray(z, dtype=float)
    small = np.abs(z) < 1e-6
    zs = np.where(small, 1.0, z)
    out = np.expm1(zs) / zs
    series = 1.0 + z / 2.0 + z * z / 6.0 + z**3 / 24.0
    return np.where(small, series, out)


@dataclass(frozen=True, eq=False)
class LinearModel:
    G: np.ndarray
    a: np.ndarray
    sigma: float

    def __post_init__(self):
        G = np.atleast_2d(np.array(self.G, dtype=float))
        k = G.shape[0]
        if G.shape != (k, k):
            raise ValueError("G must be square")
        if np.max(np.abs(G - G.T)) > 1e-12:
            raise ValueError("G must be symmetric")
        a = np.array(self.a, dtype=float).reshape(-1)
        if a.shape != (k,):
            raise ValueError(f"a must have length {k}")
        if not (self.sigma > 0):
            raise ValueError("sigma must be positive")
        lam, V = np.linalg.eigh(0.5 * (G + G.T))
        if np.min(np.abs(lam)) <= 1e-12:
            raise ValueError("G must be nondegenerate")
        for arr in (G, a, lam, V):
            arr.setflags(write=False)
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "sigma", float(self.sigma))
        object.__setattr__(self, "_lam", lam)
        object.__setattr__(self, "_V", V)

    @property
    def dim(self) -> int:
        return self.G.shape[0]

    def _spectral(self, d):
        return (self._V * d) @ self._V.T

    @classmethod
    def from_ou(cls, theta: float, mu: float, sigma: float) -> "LinearModel":
        """OU drift theta (mu - x) is the linear template with G = -theta, a = theta mu."""
        return cls(np.array([[-theta]]), np.array([theta * mu]), sigma)

    @classmethod
    def from_potential(cls, p: Potential, sigma: float) -> "LinearModel":
        if p.id == "ou":
            m = cls.from_ou(p.params["theta"], p.params["mu"], sigma)
        elif p.id == "linear":
            m = cls(p.params["G"], p.params["a"], sigma)
        else:
            raise ValueError(f"potential {p.id!r} has no linear model")
        # the two representations must describe the same drift
        probe = np.linspace(-2.0, 2.0, 5)[:, None] * np.ones(m.dim)
        if not np.allclose(p.grad(probe), probe @ m.G.T + m.a, rtol=1e-12, atol=1e-12):
            raise AssertionError("potential and linear model disagree")
        return m


@dataclass(frozen=True)
class GaussianMoments:
    mean: np.ndarray
    cov: np.ndarray
    t: float


def state_transition(m: LinearModel, t: float) -> np.ndarray:
    """exp(G t)."""
    if t == 0:
        return np.eye(m.dim)
    return m._spectral(np.exp(m._lam * t))


def gramian(m: LinearModel, t: float) -> np.ndarray:
    """int_0^t Phi(-s) Phi(-s)^T ds."""
    lam = m._lam
    return m._spectral(t * _expm1_over(-2.0 * lam * t))


def offset_integral(m: LinearModel, t: float) -> np.ndarray:
    """int_0^t Phi(-s) a ds."""
    return m._spectral(t * _expm1_over(-m._lam * t)) @ m.a


def moments(m: LinearModel, x0, t: float) -> GaussianMoments:
    if t < 0:
        raise ValueError("moments need t >= 0")
    lam = m._lam
    x0 = np.asarray(x0, dtype=float).reshape(m.dim)
    # Phi(t) int_0^t Phi(-s) ds = int_0^t Phi(s) ds, same for the covariance
    mean = state_transition(m, t) @ x0 + m._spectral(t * _expm1_over(lam * t)) @ m.a
    cov = m.sigma**2 * m._spectral(t * _expm1_over(2.0 * lam * t))
    return GaussianMoments(mean, 0.5 * (cov + cov.T), float(t))


def _gauss_pdf(x, mean, cov):
    k = mean.shape[0]
    d = np.asarray(x, dtype=float)
    if d.ndim == 0:
        d = d[None]
    d = d - mean
    L = np.linalg.cholesky(cov)
    z = np.linalg.solve(L, d.reshape(-1, k).T).T.reshape(d.shape)
    logdet = 2.0 * np.sum(np.log(np.diag(L)))
    return np.exp(-0.5 * np.sum(z * z, axis=-1) - 0.5 * (k * np.log(2 * np.pi) + logdet))


def gaussian_density(m: LinearModel, x, t: float, x0) -> np.ndarray | float:
    """Transition density p(x, t | x0, 0); ``x`` may carry leading batch axes."""
    if not t > 0:
        raise ValueError("transition density needs t > 0")
    mo = moments(m, x0, t)
    out = _gauss_pdf(x, mo.mean, mo.cov)
    return float(out) if np.ndim(out) == 0 else out


def bridge_moments(m: LinearModel, x0, xl, l: float, t: float) -> GaussianMoments:
    """Law of X_t conditioned on X_0 = x0 and X_l = xl (Gaussian conditioning)."""
    if not 0 < t < l:
        raise ValueError("bridge moments need 0 < t < l")
    fwd = moments(m, x0, t)
    Phi = state_transition(m, l - t)
    rest = moments(m, np.zeros(m.dim), l - t)   # mean here is the offset part only
    S = Phi @ fwd.cov @ Phi.T + rest.cov
    K = np.linalg.solve(S, Phi @ fwd.cov).T
    resid = np.asarray(xl, dtype=float) - Phi @ fwd.mean - rest.mean
    mean = fwd.mean + K @ resid
    cov = fwd.cov - K @ Phi @ fwd.cov
    return GaussianMoments(mean, 0.5 * (cov + cov.T), float(t))


def bridge_density(m: LinearModel, y, t: float, x0, xl, l: float):
    """p(y, t | x0, 0) p(xl, l | y, t) / p(xl, l | x0, 0), evaluated pointwise."""
    y = np.asarray(y, dtype=float)
    if y.ndim == 0:
        y = y[None]
    fwd = gaussian_density(m, y, t, x0)
    # p(xl, l | y, t) as a function of y: mean depends on y linearly
    Phi = state_transition(m, l - t)
    rest = moments(m, np.zeros(m.dim), l - t)
    resid = np.asarray(xl, dtype=float) - (y @ Phi.T + rest.mean)
    back = _gauss_pdf(resid, np.zeros(m.dim), rest.cov)
    return fwd * back / gaussian_density(m, xl, l, x0)


def linear_bridge_drift(m: LinearModel, xl, l: float, t: float, x) -> np.ndarray:
    """Most-probable-path drift of the linear bridge:

        G x + a + W(l-t)^{-1} (Phi(-(l-t)) xl - x - int_0^{l-t} Phi(-s) a ds)

    where W is the gramian. ``x`` may be batched along leading axes.
    """
    tau = l - t
    if not tau > 0:
        raise BridgeSingularityError(f"bridge drift is singular at t={t} >= l={l}")
    lam, V = m._lam, m._V
    w = tau * _expm1_over(-2.0 * lam * tau)       # gramian eigenvalues
    if np.min(w) < _GRAMIAN_FLOOR:
        raise BridgeSingularityError(f"gramian degenerate at l - t = {tau:g}")
    x = np.asarray(x, dtype=float)
    target = m._spectral(np.exp(-lam * tau)) @ np.asarray(xl, dtype=float).reshape(m.dim)
    target = target - offset_integral(m, tau)
    corr = (target - x) @ m._spectral(1.0 / w)
    return x @ m.G.T + m.a + corr


def ou_bridge_drift(theta: float, mu: float, sigma: float, xl: float, l: float,
                    t: float, x):
    """OU specialisation of the bridge drift, written out explicitly.

    ``sigma`` does not enter: the noise cancels between the density gradient
    and the sigma^2 prefactor.
    """
    tau = l - t
    if not tau > 0:
        raise BridgeSingularityError(f"bridge drift is singular at t={t} >= l={l}")
    e = np.exp(-theta * tau)
    denom = -np.expm1(-2.0 * theta * tau)
    if denom < _GRAMIAN_FLOOR:
        raise BridgeSingularityError(f"bridge drift degenerate at l - t = {tau:g}")
    return theta * (mu - x) + 2.0 * theta * e * (xl - (e * x + mu - mu * e)) / denom


def linear_bridge_field(m: LinearModel, xl, l: float) -> DriftField:
    xl = np.asarray(xl, dtype=float).reshape(m.dim)
    return DriftField(lambda t, x: linear_bridge_drift(m, xl, l, t, x), m.dim,
                      singular_at=l, pin_to=xl)


def ou_bridge_field(theta: float, mu: float, xl: float, l: float) -> DriftField:
    return DriftField(lambda t, x: ou_bridge_drift(theta, mu, 1.0, xl, l, t, x), 1,
                      singular_at=l, pin_to=np.array([float(xl)]))


def _cumulative_gl(f, t, order):
    """int_{t[0]}^{t[i]} f for every grid node, Gauss-Legendre inside each cell."""
    u, w = gauss_legendre_nodes(order)
    a = t[:-1]
    h = np.diff(t)
    s = a[:, None] + h[:, None] * u[None, :]
    cells = (f(s) * w).sum(axis=1) * h
    return np.concatenate([[0.0], np.cumsum(cells)]), s


def ou_analytic_path(theta: float, mu: float, sigma: float, x0: float, xl: float,
                     l: float, dt: float, order: int = 8) -> Path:
    """OU most probable path from the integrating-factor solution of the
    linear bridge ODE  psi' = P(t) psi + Q(t):

        psi(t) = E(t) [x0 + int_0^t Q(s) / E(s) ds],   E(t) = exp(int_0^t P)

    The integrals are accumulated cell by cell with Gauss-Legendre of the
    given order on [0, l - dt]; the node at l is set to xl.
    """
    n = max(1, int(round(l / dt)))
    dt = l / n
    t = dt * np.arange(n)             # 0 .. l - dt

    def P(s):
        tau = l - s
        return -theta - 2.0 * theta * np.exp(-2.0 * theta * tau) / -np.expm1(-2.0 * theta * tau)

    def Q(s):
        tau = l - s
        e = np.exp(-theta * tau)
        return theta * mu + 2.0 * theta * e * (xl - mu + mu * e) / -np.expm1(-2.0 * theta * tau)

    if n == 1:
        return Path(0.0, dt, np.array([x0, xl], dtype=float))

    IP, s = _cumulative_gl(P, t, order)
    # E at the interior quadrature nodes: E(a) * exp(int_a^s P)
    u, w = gauss_legendre_nodes(order)
    a = t[:-1]
    span = s - a[:, None]
    inner = np.empty_like(s)
    for j in range(s.shape[1]):
        nodes = a[:, None] + span[:, j:j + 1] * u[None, :]
        inner[:, j] = (P(nodes) * w).sum(axis=1) * span[:, j]
    # weight Q/E relative to E(t_i) to keep magnitudes bounded
    cells = (Q(s) * np.exp(-inner) * w).sum(axis=1) * np.diff(t) * np.exp(-IP[:-1])
    J = np.concatenate([[0.0], np.cumsum(cells)])
    psi = np.exp(IP) * (x0 + J)
    return Path(0.0, dt, np.append(psi, xl))
