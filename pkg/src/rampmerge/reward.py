"""Reward shaping for the merge planner.

Every factor lies in [0, 1].  Functions accept scalars or arrays; numpy's
``exp`` is used throughout so scalar and batched evaluation round identically.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Grid, PhysicalState
from .scene import Scene, VehicleTrack, corridor, is_prohibited, speed_limit


@dataclass(frozen=True)
class RewardParams:
    """Normalizers for the smoothness terms, the discount, and the rear-branch variant.

    ``printed_rear_branch`` switches the rear caution ramp to the
    ``(l - l_cr) / (l_pr - l_cr)`` form, which is discontinuous at ``l_cr``.
    """

    max_jerk: float
    max_accel: float
    gamma: float = 0.95
    printed_rear_branch: bool = False

    def __post_init__(self):
        if not (self.max_jerk > 0 and self.max_accel > 0):
            raise ValueError("max_jerk and max_accel must be positive")
        if not 0 < self.gamma < 1:
            raise ValueError(f"gamma must lie in (0, 1), got {self.gamma}")

    @classmethod
    def for_grid(cls, grid: Grid, gamma: float = 0.95, **kw) -> "RewardParams":
        return cls(max_jerk=grid.n_j * grid.dj, max_accel=grid.n_g * grid.accel_unit, gamma=gamma, **kw)

    @property
    def value_cap(self) -> float:
        return 1 / (1 - self.gamma)


def action_reward(jerk, rp: RewardParams):
    x = jerk / rp.max_jerk
    return np.exp(-(x * x))


def state_reward(p: PhysicalState, scene: Scene, rp: RewardParams):
    v_max = speed_limit(scene.limit, p.pos)
    a = p.accel / rp.max_accel
    d = (p.vel - v_max) / v_max
    return np.exp(-(a * a)) * np.exp(-(d * d))


def attenuation(p: PhysicalState, v: VehicleTrack, scene: Scene, printed_rear_branch: bool = False):
    """Linear ramp from 1 at the caution edge to 0 at the hard edge; 0 inside the hard band."""
    b = corridor(v, p.t, scene.margins)
    pos = p.pos
    if printed_rear_branch:
        rear = (pos - b.l_cr) / (b.l_pr - b.l_cr)
    else:
        rear = (b.l_pr - pos) / (b.l_pr - b.l_cr)
    front = (pos - b.l_pf) / (b.l_cf - b.l_pf)
    out = np.select(
        [pos < b.l_cr, pos < b.l_pr, pos <= b.l_pf, pos <= b.l_cf],
        [1.0, rear, 0.0, front],
        default=1.0,
    )
    return out if isinstance(pos, np.ndarray) else float(out)


def min_attenuation(p: PhysicalState, scene: Scene, printed_rear_branch: bool = False):
    out = 1.0
    for v in scene.vehicles:
        out = np.minimum(out, attenuation(p, v, scene, printed_rear_branch))
    return out


def successor_factor(p_next: PhysicalState, scene: Scene, rp: RewardParams):
    """The part of the transition reward that depends on the successor only."""
    return min_attenuation(p_next, scene, rp.printed_rear_branch) * state_reward(p_next, scene, rp)


def transition_reward(
    s: PhysicalState,
    jerk,
    s_next: PhysicalState,
    v_next,
    scene: Scene,
    rp: RewardParams,
):
    """Reward for moving ``s -> s_next`` under ``jerk``, zero when ``s_next`` is dead."""
    r = action_reward(jerk, rp) * successor_factor(s_next, scene, rp)
    return np.where(v_next == 0, 0.0, r) if isinstance(v_next, np.ndarray) else (0.0 if v_next == 0 else float(r))


def terminal_value(p: PhysicalState, scene: Scene, rp: RewardParams):
    """Value of an end-of-horizon or prohibited state."""
    v = state_reward(p, scene, rp) / (1 - rp.gamma)
    dead = is_prohibited(p, scene)
    if isinstance(v, np.ndarray):
        return np.where(dead, 0.0, v)
    return 0.0 if dead else float(v)
