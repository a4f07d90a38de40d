"""Intelligent Driver Model car-following baseline.

Treiber, Hennecke and Helbing, "Congested traffic states in empirical
observations and microscopic simulations", Phys. Rev. E 62 (2000).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from .grid import PhysicalState
from .scene import VehicleTrack


class NonPositiveGap(ValueError):
    pass


@dataclass(frozen=True)
class IdmParams:
    v0: float
    T_hw: float = 1.5
    a_max: float = 1.5
    b_comf: float = 2.0
    s0: float = 2.0
    delta: float = 4.0

    def __post_init__(self):
        for name in ("v0", "T_hw", "a_max", "b_comf", "s0"):
            if getattr(self, name) <= 0:
                raise ValueError(f"IDM parameter {name} must be positive")
        if self.delta < 1:
            raise ValueError("IDM delta must be >= 1")


def idm_accel(v: float, dv: float, gap: float, p: IdmParams) -> float:
    """IDM acceleration for speed ``v``, approach rate ``dv`` (v - v_leader) and ``gap``.

    Pass ``gap=math.inf`` (and ``dv=0``) when there is no leader.
    """
    if gap <= 0:
        raise NonPositiveGap(f"gap to leader is {gap} m")
    free = (v / p.v0) ** p.delta
    if math.isinf(gap):
        return p.a_max * (1 - free)
    s_star = p.s0 + max(0.0, v * p.T_hw + v * dv / (2 * math.sqrt(p.a_max * p.b_comf)))
    return p.a_max * (1 - free - (s_star / gap) ** 2)


def idm_plan_step(
    ego: PhysicalState,
    leader: Optional[VehicleTrack],
    p: IdmParams,
    dt: float,
) -> PhysicalState:
    """Advance the ego by ``dt`` under constant IDM acceleration.

    ``leader.pos0``/``leader.speed`` are the leader's current position and
    speed in the ego's coordinate.  Speed is floored at zero; when the floor
    engages the ego stops where the deceleration brings it to rest.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if leader is None:
        a = idm_accel(ego.vel, 0.0, math.inf, p)
    else:
        a = idm_accel(ego.vel, ego.vel - leader.speed, leader.pos0 - ego.pos, p)
    v = ego.vel + a * dt
    if v < 0:
        return PhysicalState(ego.t + dt, a, 0.0, ego.pos + ego.vel**2 / (-2 * a))
    return PhysicalState(ego.t + dt, a, v, ego.pos + ego.vel * dt + a * dt * dt / 2)


def nearest_leader(ego_pos: float, vehicles: list[VehicleTrack]) -> Optional[VehicleTrack]:
    """Closest vehicle strictly ahead of the ego, if any."""
    ahead = [v for v in vehicles if v.pos0 > ego_pos]
    return min(ahead, key=lambda v: v.pos0, default=None)
