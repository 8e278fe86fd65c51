"""
Discrete action functionals on uniform-grid paths.

Conventions
-----------
``fw_action``               1/2 sum |dpsi/dt - grad U(psi_{i-1})|^2 dt
``fw_action_paper_discrete`` the same sum without the 1/2 (the convention
                             used for the published double-well table)
``om_action``               1/2 sum [|dpsi/dt - grad U|^2 / sigma^2 + lap U] dt

All sums use the left endpoint of each cell for the drift, so actions are
additive over grid-aligned splits.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .model import Path, Potential


@dataclass(frozen=True)
class ActionReport:
    om: float | None
    fw_half: float
    fw_paper_discrete: float
    n_steps: int
    dt: float

    def to_dict(self) -> dict:
        return asdict(self)


def _need(path: Path, points: int):
    if len(path) < points:
        raise ValueError(f"path needs at least {points} points, has {len(path)}")


def _residuals(path: Path, p: Potential) -> np.ndarray:
    v = path.values
    return np.diff(v, axis=0) / path.dt - p.grad(v[:-1])


def om_action(path: Path, p: Potential, sigma: float, rule: str = "left") -> float:
    """Onsager-Machlup action; ``rule='trapezoid'`` averages the drift and
    Laplacian terms over both cell ends (for convergence studies)."""
    _need(path, 2)
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    v, dt = path.values, path.dt
    vel = np.diff(v, axis=0) / dt
    if rule == "left":
        r = vel - p.grad(v[:-1])
        lap = p.laplacian(v[:-1])
        dens = np.sum(r * r, axis=1) / sigma**2 + lap
    elif rule == "trapezoid":
        r0 = vel - p.grad(v[:-1])
        r1 = vel - p.grad(v[1:])
        lap = 0.5 * (p.laplacian(v[:-1]) + p.laplacian(v[1:]))
        dens = 0.5 * (np.sum(r0 * r0, axis=1) + np.sum(r1 * r1, axis=1)) / sigma**2 + lap
    else:
        raise ValueError(f"unknown rule {rule!r}")
    return float(0.5 * np.sum(dens) * dt)


def fw_action_paper_discrete(path: Path, p: Potential) -> float:
    # for k > 1 the square is the Euclidean norm squared
    _need(path, 2)
    r = _residuals(path, p)
    return float(np.sum(r * r) * path.dt)


def fw_action(path: Path, p: Potential) -> float:
    return 0.5 * fw_action_paper_discrete(path, p)


def el_residual(path: Path, p: Potential) -> float:
    """max_i |second difference / dt^2 - grad|grad U|^2(psi_i) / 2| over interior nodes."""
    _need(path, 3)
    v, dt = path.values, path.dt
    acc = (v[2:] - 2.0 * v[1:-1] + v[:-2]) / dt**2
    return float(np.max(np.abs(acc - 0.5 * p.grad_sq_gradient(v[1:-1]))))


def action_report(path: Path, p: Potential, sigma: float | None = None) -> ActionReport:
    fw = fw_action_paper_discrete(path, p)
    om = om_action(path, p, sigma) if sigma is not None else None
    return ActionReport(om, 0.5 * fw, fw, path.n_steps, path.dt)
