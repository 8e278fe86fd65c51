"""
Potentials, paths and problem configuration.

The diffusions handled here have the form

    dX_t = grad U(X_t) dt + sigma dW_t

so the drift is the *gradient* of U (not minus the gradient). Every builtin
potential is stored so that grad U reproduces its drift, e.g. the double well
U(x) = x^2/2 - x^4/4 has drift x - x^3.

All derivatives are analytic. Callbacks accept arrays of shape (..., k) and
broadcast over the leading axes.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Any, Callable, Mapping

import numpy as np


class RegistryError(KeyError):
    """Unknown potential id."""


class ConfigError(ValueError):
    """Invalid problem configuration; ``field`` names the offending key."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


METHODS = ("linear_bridge", "ou_analytic", "el_shooting", "appr1", "appr2")
DEFAULT_DT = 1e-4


# ---------------------------------------------------------------------------
# builtin potentials
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _Builtin:
    value: Callable
    grad: Callable
    laplacian: Callable
    grad_sq_gradient: Callable
    required: tuple[str, ...]


def _free_value(prm, x):
    return np.zeros(x.shape[:-1])


def _free_grad(prm, x):
    return np.zeros_like(x)


def _linear_value(prm, x):
    G, a = prm["G"], prm["a"]
    return 0.5 * np.einsum("...i,ij,...j->...", x, G, x) + x @ a


def _linear_grad(prm, x):
    return x @ prm["G"].T + prm["a"]


def _linear_laplacian(prm, x):
    return np.full(x.shape[:-1], float(np.trace(prm["G"])))


def _linear_grad_sq(prm, x):
    # grad |Gx + a|^2 = 2 G^T (Gx + a)
    return 2.0 * _linear_grad(prm, x) @ prm["G"]


def _ou_value(prm, x):
    th, mu = prm["theta"], prm["mu"]
    return th * mu * x[..., 0] - 0.5 * th * x[..., 0] ** 2


def _ou_grad(prm, x):
    return prm["theta"] * (prm["mu"] - x)


def _ou_laplacian(prm, x):
    return np.full(x.shape[:-1], -float(prm["theta"]))


def _ou_grad_sq(prm, x):
    th = prm["theta"]
    return -2.0 * th * th * (prm["mu"] - x)


def _dw_value(prm, x):
    y = x[..., 0]
    return 0.5 * y**2 - 0.25 * y**4


def _dw_grad(prm, x):
    return x - x * x * x


def _dw_laplacian(prm, x):
    return 1.0 - 3.0 * x[..., 0] ** 2


def _dw_grad_sq(prm, x):
    q = x * x
    return 2.0 * (x - x * q) * (1.0 - 3.0 * q)


_REGISTRY: dict[str, _Builtin] = {
    "free": _Builtin(_free_value, _free_grad,
                     lambda prm, x: np.zeros(x.shape[:-1]), _free_grad, ()),
    "linear": _Builtin(_linear_value, _linear_grad, _linear_laplacian,
                       _linear_grad_sq, ("G",)),
    "ou": _Builtin(_ou_value, _ou_grad, _ou_laplacian, _ou_grad_sq,
                   ("theta", "mu")),
    "double_well": _Builtin(_dw_value, _dw_grad, _dw_laplacian, _dw_grad_sq, ()),
}

BUILTIN_POTENTIALS = tuple(_REGISTRY)


def _lookup(pid: str) -> _Builtin:
    try:
        return _REGISTRY[pid]
    except KeyError:
        raise RegistryError(f"unknown potential {pid!r}; "
                            f"known: {', '.join(BUILTIN_POTENTIALS)}") from None


@dataclass(frozen=True, eq=False)
class Potential:
    """A registered scalar field U on R^dim.

    ``params`` holds the scalar/array parameters. Use :func:`make_potential`
    to build one from plain (JSON-like) parameters.
    """

    id: str
    params: Mapping[str, Any] = field(default_factory=dict)
    dim: int = 1

    def __post_init__(self):
        _lookup(self.id)
        if self.dim < 1:
            raise ValueError("dim must be a positive integer")
        object.__setattr__(self, "params", MappingProxyType(dict(self.params)))

    def _arg(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 0:
            x = x[None]
        if x.shape[-1] != self.dim:
            raise ValueError(f"expected trailing dimension {self.dim}, got shape {x.shape}")
        return x

    def value(self, x):
        return _lookup(self.id).value(self.params, self._arg(x))

    def grad(self, x):
        return _lookup(self.id).grad(self.params, self._arg(x))

    def laplacian(self, x):
        return _lookup(self.id).laplacian(self.params, self._arg(x))

    def grad_sq_gradient(self, x):
        return _lookup(self.id).grad_sq_gradient(self.params, self._arg(x))

    def kernel(self, name: str) -> Callable:
        """Unchecked callback ``x -> value`` for hot loops; ``x`` must be (..., dim)."""
        fn = getattr(_lookup(self.id), name)
        prm = self.params
        return lambda x: fn(prm, x)

    def plain_params(self) -> dict:
        """Parameters as JSON-serialisable values."""
        out = {}
        for k, v in self.params.items():
            out[k] = v.tolist() if isinstance(v, np.ndarray) else v
        return out

    def __eq__(self, other):
        if not isinstance(other, Potential):
            return NotImplemented
        return (self.id == other.id and self.dim == other.dim
                and self.plain_params() == other.plain_params())

    __hash__ = None

    def __repr__(self):
        return f"Potential(id={self.id!r}, params={self.plain_params()!r}, dim={self.dim})"


def make_potential(pid: str, params: Mapping[str, Any] | None = None,
                   dim: int | None = None) -> Potential:
    """Build and validate a builtin potential.

    ``free`` takes its dimension from ``dim`` (default 1); ``linear`` from the
    shape of ``G``; ``ou`` and ``double_well`` are scalar.
    """
    spec = _lookup(pid)
    params = dict(params or {})
    for key in spec.required:
        if key not in params:
            raise ConfigError(f"potential.params.{key}", "required parameter missing")

    if pid == "free":
        extra = set(params) - {"dim"}
        if extra:
            raise ConfigError("potential.params", f"unknown parameters {sorted(extra)}")
        k = int(params.pop("dim", dim if dim is not None else 1))
        if k < 1:
            raise ConfigError("potential.params.dim", "must be a positive integer")
        return Potential("free", {}, k)

    if pid == "linear":
        extra = set(params) - {"G", "a"}
        if extra:
            raise ConfigError("potential.params", f"unknown parameters {sorted(extra)}")
        G = np.atleast_2d(np.asarray(params["G"], dtype=float))
        if G.ndim != 2 or G.shape[0] != G.shape[1]:
            raise ConfigError("potential.params.G", "must be a square matrix")
        k = G.shape[0]
        a = np.asarray(params.get("a", np.zeros(k)), dtype=float).reshape(-1)
        if a.shape != (k,):
            raise ConfigError("potential.params.a", f"must have length {k}")
        if np.max(np.abs(G - G.T)) > 1e-12:
            raise ConfigError("potential.params.G", "must be symmetric")
        if np.min(np.abs(np.linalg.eigvalsh(G))) <= 1e-12:
            raise ConfigError("potential.params.G", "must be nondegenerate")
        if not (np.all(np.isfinite(G)) and np.all(np.isfinite(a))):
            raise ConfigError("potential.params", "entries must be finite")
        G.setflags(write=False)
        a.setflags(write=False)
        return Potential("linear", {"G": G, "a": a}, k)

    if pid == "ou":
        extra = set(params) - {"theta", "mu"}
        if extra:
            raise ConfigError("potential.params", f"unknown parameters {sorted(extra)}")
        th, mu = float(params["theta"]), float(params["mu"])
        if not (np.isfinite(th) and th > 0):
            raise ConfigError("potential.params.theta", "must be a positive finite number")
        if not np.isfinite(mu):
            raise ConfigError("potential.params.mu", "must be finite")
        return Potential("ou", {"theta": th, "mu": mu}, 1)

    # double_well
    if params:
        raise ConfigError("potential.params", "double_well takes no parameters")
    return Potential("double_well", {}, 1)


def grad_potential(p: Potential, x) -> np.ndarray:
    return p.grad(x)


def laplacian_potential(p: Potential, x):
    return p.laplacian(x)


def grad_sq_gradient(p: Potential, x) -> np.ndarray:
    """Gradient of |grad U|^2."""
    return p.grad_sq_gradient(x)


# ---------------------------------------------------------------------------
# paths
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Path:
    """Values of a k-dimensional path on the uniform grid t0 + i*dt."""

    t0: float
    dt: float
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if v.ndim != 2 or v.shape[0] == 0:
            raise ValueError("path values must be a nonempty (n+1, k) array")
        if not np.all(np.isfinite(v)):
            raise ValueError("path values must be finite")
        if not (self.dt > 0 and np.isfinite(self.dt)):
            raise ValueError("dt must be positive")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "t0", float(self.t0))
        object.__setattr__(self, "dt", float(self.dt))

    @property
    def n_steps(self) -> int:
        return self.values.shape[0] - 1

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.values.shape[0])

    @property
    def final_time(self) -> float:
        return self.t0 + self.n_steps * self.dt

    def subsample(self, every: int) -> "Path":
        """Keep every ``every``-th node; the step count must be divisible."""
        if every < 1 or self.n_steps % every:
            raise ValueError(f"cannot subsample {self.n_steps} steps by {every}")
        return Path(self.t0, self.dt * every, self.values[::every])

    def __len__(self):
        return self.values.shape[0]


# ---------------------------------------------------------------------------
# problem configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ProblemSpec:
    potential: Potential
    sigma: float
    x0: np.ndarray
    xl: np.ndarray
    l: float
    dt: float = DEFAULT_DT
    method: str = "el_shooting"

    def __post_init__(self):
        k = self.potential.dim
        for name in ("x0", "xl"):
            v = np.atleast_1d(np.asarray(getattr(self, name), dtype=float)).copy()
            if v.shape != (k,):
                raise ConfigError(name, f"dimension {v.size} does not match potential dimension {k}")
            if not np.all(np.isfinite(v)):
                raise ConfigError(name, "entries must be finite")
            v.setflags(write=False)
            object.__setattr__(self, name, v)
        for name in ("sigma", "l", "dt"):
            val = getattr(self, name)
            try:
                val = float(val)
            except (TypeError, ValueError):
                raise ConfigError(name, "must be a number") from None
            if not (np.isfinite(val) and val > 0):
                raise ConfigError(name, "must be positive and finite")
            object.__setattr__(self, name, val)
        if self.dt >= self.l:
            raise ConfigError("dt", f"must be smaller than l={self.l}")
        if self.method not in METHODS:
            raise ConfigError("method", f"unknown method {self.method!r}; known: {', '.join(METHODS)}")
        pid = self.potential.id
        if self.method == "linear_bridge" and pid not in ("linear", "ou"):
            raise ConfigError("method", "linear_bridge needs a linear or ou potential")
        if self.method == "ou_analytic" and pid != "ou":
            raise ConfigError("method", "ou_analytic needs the ou potential")
        if self.method == "appr2" and k != 1:
            raise ConfigError("method", "appr2 is only defined in one dimension")

    def __eq__(self, other):
        if not isinstance(other, ProblemSpec):
            return NotImplemented
        return to_document(self) == to_document(other)

    __hash__ = None


_CONFIG_KEYS = {"potential", "x0", "xl", "l", "dt", "sigma", "method"}
_REQUIRED_KEYS = ("potential", "x0", "xl", "l")


def default_method(pid: str) -> str:
    return "linear_bridge" if pid in ("linear", "ou") else "el_shooting"


def build_problem(config: str | Mapping[str, Any]) -> ProblemSpec:
    """Validate a JSON problem document (text or already-parsed mapping).

    Missing ``dt`` defaults to 1e-4, ``sigma`` to 1 and ``method`` to
    ``linear_bridge`` for linear/ou potentials, ``el_shooting`` otherwise.
    """
    if isinstance(config, (str, bytes)):
        try:
            doc = json.loads(config)
        except json.JSONDecodeError as exc:
            raise ConfigError("<document>", f"parse error: {exc}") from None
    else:
        doc = dict(config)
    if not isinstance(doc, dict):
        raise ConfigError("<document>", "top level must be an object")
    unknown = set(doc) - _CONFIG_KEYS
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown key")
    for key in _REQUIRED_KEYS:
        if key not in doc:
            raise ConfigError(key, "required key missing")

    pot = doc["potential"]
    if isinstance(pot, str):
        pot = {"id": pot}
    if not isinstance(pot, dict) or "id" not in pot:
        raise ConfigError("potential", "must be an object with an 'id'")
    if set(pot) - {"id", "params"}:
        raise ConfigError("potential", f"unknown keys {sorted(set(pot) - {'id', 'params'})}")
    params = pot.get("params") or {}
    if not isinstance(params, dict):
        raise ConfigError("potential.params", "must be an object")
    x0 = np.atleast_1d(np.asarray(doc["x0"], dtype=float))
    try:
        potential = make_potential(pot["id"], params, dim=x0.size)
    except RegistryError as exc:
        raise ConfigError("potential.id", str(exc.args[0])) from None

    return ProblemSpec(
        potential=potential,
        sigma=doc.get("sigma", 1.0),
        x0=x0,
        xl=doc["xl"],
        l=doc["l"],
        dt=doc.get("dt", DEFAULT_DT),
        method=doc.get("method", default_method(potential.id)),
    )


def to_document(spec: ProblemSpec) -> dict:
    params = spec.potential.plain_params()
    if spec.potential.id == "free":
        params = {"dim": spec.potential.dim}
    return {
        "potential": {"id": spec.potential.id, "params": params},
        "x0": spec.x0.tolist(),
        "xl": spec.xl.tolist(),
        "l": spec.l,
        "dt": spec.dt,
        "sigma": spec.sigma,
        "method": spec.method,
    }


def serialize(spec: ProblemSpec) -> str:
    """JSON text that :func:`build_problem` maps back to an equal spec."""
    return json.dumps(to_document(spec), indent=2, sort_keys=True)


def override(doc: Mapping[str, Any], key: str, value: str) -> dict:
    """Apply a ``key=value`` override; dotted keys reach into ``potential``."""
    out = json.loads(json.dumps(doc))
    try:
        parsed = json.loads(value)
    except json.JSONDecodeError:
        parsed = value
    parts = key.split(".")
    node = out
    for part in parts[:-1]:
        node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise ConfigError(key, "cannot override inside a non-object")
    node[parts[-1]] = parsed
    return out
