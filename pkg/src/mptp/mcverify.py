"""
Monte-Carlo checks of tube-probability statements.

Sample paths come from Euler-Maruyama with Gaussian increments drawn from a
counter-based generator (Philox-4x32-10): the normal used for path ``j`` at
fine step ``i`` depends only on (seed, stream, i, j), so an ensemble is
reproducible bit for bit however the paths are batched.

Tubes are checked on the nodes of the stored grid only, i.e. the event
max_i |X(t_i) - ref(t_i)| <= delta.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .action import om_action
from .approx import free_bridge_drift
from .lineardyn import LinearModel, linear_bridge_drift, ou_bridge_drift
from .model import Path, Potential, make_potential


class StatisticalPowerError(RuntimeError):
    """Too few tube hits to form a log-ratio."""


class DivergenceError(RuntimeError):
    """More than 1% of the sample paths became non-finite."""


# ---------------------------------------------------------------------------
# Philox-4x32-10
# ---------------------------------------------------------------------------

_M0, _M1 = np.uint64(0xD2511F53), np.uint64(0xCD9E8D57)
_W0, _W1 = 0x9E3779B9, 0xBB67AE85
_MASK = np.uint64(0xFFFFFFFF)
_S32 = np.uint64(32)


def philox4x32(counter, key, rounds: int = 10):
    """Vectorised Philox-4x32 block function.

    ``counter`` is a sequence of four uint32 arrays (broadcastable), ``key``
    a pair of ints. Returns four uint32 words as uint64 arrays.
    """
    c0, c1, c2, c3 = (np.asarray(c, dtype=np.uint64) & _MASK for c in counter)
    c0, c1, c2, c3 = np.broadcast_arrays(c0, c1, c2, c3)
    k0, k1 = int(key[0]) & 0xFFFFFFFF, int(key[1]) & 0xFFFFFFFF
    for _ in range(rounds):
        p0 = _M0 * c0
        p1 = _M1 * c2
        hi0, lo0 = p0 >> _S32, p0 & _MASK
        hi1, lo1 = p1 >> _S32, p1 & _MASK
        c0, c1, c2, c3 = (hi1 ^ c1 ^ np.uint64(k0), lo1,
                          hi0 ^ c3 ^ np.uint64(k1), lo0)
        k0 = (k0 + _W0) & 0xFFFFFFFF
        k1 = (k1 + _W1) & 0xFFFFFFFF
    return c0, c1, c2, c3


def _doubles(a, b):
    # 53-bit uniform in [0, 1)
    return ((a >> np.uint64(5)).astype(np.float64) * 67108864.0
            + (b >> np.uint64(6)).astype(np.float64)) / 9007199254740992.0


def normals(seed: int, stream: int, step: int, paths: np.ndarray, dim: int) -> np.ndarray:
    """Standard normals of shape (len(paths), dim) for one time step."""
    paths = np.asarray(paths, dtype=np.uint64)
    out = np.empty((paths.size, dim))
    key = (seed & 0xFFFFFFFF, (seed >> 32) & 0xFFFFFFFF)
    for pair in range((dim + 1) // 2):
        w = philox4x32((np.uint64(step), paths, np.uint64(pair), np.uint64(stream)), key)
        u1 = _doubles(w[0], w[1])
        u2 = _doubles(w[2], w[3])
        r = np.sqrt(-2.0 * np.log1p(-u1))
        out[:, 2 * pair] = r * np.cos(2 * np.pi * u2)
        if 2 * pair + 1 < dim:
            out[:, 2 * pair + 1] = r * np.sin(2 * np.pi * u2)
    return out


# ---------------------------------------------------------------------------
# ensembles
# ---------------------------------------------------------------------------

STREAM_SDE = 0
STREAM_BRIDGE = 1


@dataclass(frozen=True, eq=False)
class Ensemble:
    """Sample paths on a common grid; ``values`` has shape (n_kept, steps+1, k)."""

    values: np.ndarray
    dt: float
    seed: int
    n: int
    n_diverged: int = 0
    t0: float = 0.0

    @property
    def n_kept(self) -> int:
        return self.values.shape[0]

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.values.shape[1])

    @property
    def paths(self) -> list[Path]:
        return [Path(self.t0, self.dt, v) for v in self.values]


def _grid(l, dt, substeps):
    if substeps < 1:
        raise ValueError("substeps must be >= 1")
    n_out = max(1, int(round(l / dt)))
    return n_out, l / n_out, n_out * substeps, l / (n_out * substeps)


def _simulate(drift, sigma, x0, l, dt, n, seed, stream, substeps, pin_to=None,
              batch=50_000):
    if n < 1:
        raise ValueError("n must be >= 1")
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    k = x0.size
    n_out, dt, n_fine, h = _grid(l, dt, substeps)
    sq = sigma * np.sqrt(h)
    out = np.empty((n, n_out + 1, k))
    ok = np.ones(n, dtype=bool)
    with np.errstate(over="ignore", invalid="ignore"):
        for start in range(0, n, batch):
            idx = np.arange(start, min(n, start + batch))
            X = np.tile(x0, (idx.size, 1))
            out[idx, 0] = X
            for i in range(n_fine):
                if pin_to is not None and i == n_fine - 1:
                    X = np.tile(pin_to, (idx.size, 1))
                else:
                    X = X + drift(i * h, X) * h + sq * normals(seed, stream, i, idx, k)
                if (i + 1) % substeps == 0:
                    out[idx, (i + 1) // substeps] = X
            ok[idx] = np.all(np.isfinite(out[idx]), axis=(1, 2))
    n_div = int(n - ok.sum())
    if n_div > 0.01 * n:
        raise DivergenceError(f"{n_div} of {n} sample paths diverged")
    return Ensemble(out[ok], dt, seed, n, n_div)


def sample_sde(p: Potential, sigma: float, x0, l: float, dt: float, n: int, seed: int,
               substeps: int = 1) -> Ensemble:
    """Euler-Maruyama paths of dX = grad U(X) dt + sigma dW.

    Each stored interval of length ``dt`` is covered by ``substeps`` Euler
    steps; only the coarse nodes are kept.
    """
    return _simulate(lambda t, X: p.grad(X), sigma, x0, l, dt, n, seed, STREAM_SDE, substeps)


def _bridge_drift(p: Potential, xl, l):
    if p.id == "ou":
        th, mu = p.params["theta"], p.params["mu"]
        return lambda t, X: ou_bridge_drift(th, mu, 1.0, float(xl[0]), l, t, X)
    if p.id == "linear":
        m = LinearModel.from_potential(p, 1.0)
        return lambda t, X: linear_bridge_drift(m, xl, l, t, X)
    if p.id == "free":
        return free_bridge_drift(xl, l).eval
    raise ValueError(f"no closed-form bridge for potential {p.id!r}")


def sample_bridge(p: Potential, sigma: float, x0, xl, l: float, dt: float, n: int,
                  seed: int, substeps: int = 1) -> Ensemble:
    """Paths of the conditioned process (drift grad U + sigma^2 grad log p).

    Integration stops one fine step before l; the terminal node is xl.
    """
    xl = np.atleast_1d(np.asarray(xl, dtype=float))
    return _simulate(_bridge_drift(p, xl, l), sigma, x0, l, dt, n, seed, STREAM_BRIDGE,
                     substeps, pin_to=xl)


def sample_ou_bridge(theta, mu, sigma, x0, xl, l, dt, n, seed, substeps: int = 1) -> Ensemble:
    p = make_potential("ou", {"theta": theta, "mu": mu})
    return sample_bridge(p, sigma, x0, xl, l, dt, n, seed, substeps)


# ---------------------------------------------------------------------------
# tube probabilities
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TubeEstimate:
    delta: float
    hits: int
    n: int
    p_hat: float
    ci95: float


def _inside(e: Ensemble, ref: Path) -> np.ndarray:
    if (ref.values.shape[0] != e.values.shape[1] or ref.dim != e.values.shape[2]
            or not np.isclose(ref.dt, e.dt, rtol=1e-9) or not np.isclose(ref.t0, e.t0)):
        raise ValueError("reference path and ensemble grids differ")
    return np.max(np.abs(e.values - ref.values[None]), axis=(1, 2))


def tube_probability(e: Ensemble, ref: Path, delta: float) -> TubeEstimate:
    """Fraction of paths staying within ``delta`` (sup-norm over nodes) of ``ref``."""
    dist = _inside(e, ref)
    n = e.n_kept
    hits = int(np.count_nonzero(dist <= delta))
    p = hits / n if n else 0.0
    return TubeEstimate(float(delta), hits, n, p, 1.96 * float(np.sqrt(p * (1 - p) / n)) if n else 1.0)


def _on_grid(path: Path, e: Ensemble) -> Path:
    n_out = e.values.shape[1] - 1
    if path.n_steps == n_out:
        return path
    if path.n_steps % n_out:
        raise ValueError("reference path grid is not a refinement of the ensemble grid")
    return path.subsample(path.n_steps // n_out)


@dataclass(frozen=True)
class LogRatio:
    ensemble: str
    tube1: TubeEstimate
    tube2: TubeEstimate
    log_ratio: float
    se: float
    diff: float
    slack: float
    within: bool


@dataclass
class OMRatioReport:
    delta: float
    delta_requested: float
    action_1: float
    action_2: float
    delta_action: float
    checks: list[LogRatio] = field(default_factory=list)
    ensembles_agree: bool | None = None
    params: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        ok = all(c.within for c in self.checks)
        return ok and self.ensembles_agree is not False

    def to_dict(self) -> dict:
        d = asdict(self)
        d["passed"] = self.passed
        return d


MIN_HITS = 100


def _log_ratio(name, e, r1, r2, delta, dS) -> LogRatio:
    t1, t2 = tube_probability(e, r1, delta), tube_probability(e, r2, delta)
    lr = float(np.log(t1.p_hat / t2.p_hat))
    se = float(np.sqrt((1 - t1.p_hat) / t1.hits + (1 - t2.p_hat) / t2.hits))
    slack = max(0.5, 3.0 * se)
    return LogRatio(name, t1, t2, lr, se, lr - dS, slack, abs(lr - dS) <= slack)


def om_ratio_check(p: Potential, sigma: float, x0, xl, l: float, dt: float,
                   psi1: Path, psi2: Path, delta: float, n: int, seed: int,
                   substeps: int = 1, bridge: bool = True) -> OMRatioReport:
    """Compare log(P(tube psi1) / P(tube psi2)) with S_OM(psi2) - S_OM(psi1).

    The actions are evaluated on the paths as given (use a fine grid); the
    tubes on the ensemble grid of spacing ``dt``. If either tube has fewer
    than 100 hits, delta is widened by 1.5x, at most three times.
    """
    dS = om_action(psi2, p, sigma) - om_action(psi1, p, sigma)
    ensembles = [("unconditioned", sample_sde(p, sigma, x0, l, dt, n, seed, substeps))]
    if bridge:
        ensembles.append(("bridge", sample_bridge(p, sigma, x0, xl, l, dt, n, seed, substeps)))
    r1 = _on_grid(psi1, ensembles[0][1])
    r2 = _on_grid(psi2, ensembles[0][1])

    d = float(delta)
    for attempt in range(4):
        counts = [min(tube_probability(e, r1, d).hits, tube_probability(e, r2, d).hits)
                  for _, e in ensembles]
        if min(counts) >= MIN_HITS:
            break
        if attempt == 3:
            raise StatisticalPowerError(
                f"fewer than {MIN_HITS} tube hits at delta={d:g} (n={n}); "
                "increase n or delta")
        d *= 1.5

    report = OMRatioReport(d, float(delta), om_action(psi1, p, sigma),
                           om_action(psi2, p, sigma), dS,
                           params={"sigma": sigma, "x0": np.atleast_1d(x0).tolist(),
                                   "xl": np.atleast_1d(xl).tolist(), "l": l, "dt": dt,
                                   "n": n, "seed": seed, "substeps": substeps,
                                   "potential": {"id": p.id, "params": p.plain_params()}})
    for name, e in ensembles:
        report.checks.append(_log_ratio(name, e, r1, r2, d, dS))
    if len(report.checks) == 2:
        a, b = report.checks
        report.ensembles_agree = bool(
            abs(a.log_ratio - b.log_ratio) <= 1.96 * np.hypot(a.se, b.se))
    return report
