"""Merge environment: predicted vehicles, their corridors and the speed limit.

All functions accept plain floats or numpy arrays for time/position/velocity so
the solver can evaluate whole lattice layers through the same code path as
scalar callers.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from .grid import PhysicalState


@dataclass(frozen=True)
class VehicleTrack:
    """Another vehicle projected onto the ego trajectory coordinate."""

    id: str
    pos0: float
    speed: float
    accel: float = 0.0

    def __post_init__(self):
        if self.speed < 0:
            raise ValueError(f"vehicle {self.id}: negative speed {self.speed}")


@dataclass(frozen=True)
class CorridorMargins:
    rear_hard: float
    rear_caution: float
    front_hard: float
    front_caution: float
    headway: float = 0.0

    def __post_init__(self):
        if not (self.rear_hard > 0 and self.front_hard > 0):
            raise ValueError("hard margins must be positive")
        if not (self.rear_caution > self.rear_hard and self.front_caution > self.front_hard):
            raise ValueError("caution margins must exceed the hard margins")
        if self.headway < 0:
            raise ValueError("headway must be non-negative")

    def inflated(self, distance: float) -> "CorridorMargins":
        """Margins widened by ``distance`` on every edge."""
        return replace(
            self,
            rear_hard=self.rear_hard + distance,
            rear_caution=self.rear_caution + distance,
            front_hard=self.front_hard + distance,
            front_caution=self.front_caution + distance,
        )


class CorridorBounds(NamedTuple):
    l_cr: float
    l_pr: float
    l_pf: float
    l_cf: float


@dataclass(frozen=True)
class SpeedLimitProfile:
    """Speed limit as a function of position: ``step`` or ``linear`` between breakpoints."""

    positions: tuple[float, ...]
    limits: tuple[float, ...]
    mode: str = "step"

    def __post_init__(self):
        object.__setattr__(self, "positions", tuple(float(p) for p in self.positions))
        object.__setattr__(self, "limits", tuple(float(v) for v in self.limits))
        if not self.positions or len(self.positions) != len(self.limits):
            raise ValueError("speed limit needs matching, non-empty breakpoints")
        if any(b <= a for a, b in zip(self.positions, self.positions[1:])):
            raise ValueError("speed limit breakpoints must be strictly increasing")
        if min(self.limits) <= 0:
            raise ValueError("speed limits must be positive")
        if self.mode not in ("step", "linear"):
            raise ValueError(f"unknown interpolation mode {self.mode!r}")

    @classmethod
    def flat(cls, v_max: float) -> "SpeedLimitProfile":
        return cls((0.0,), (v_max,))

    def shifted(self, offset: float) -> "SpeedLimitProfile":
        """Same profile expressed in a frame whose origin sits at ``offset``."""
        return replace(self, positions=tuple(p - offset for p in self.positions))

    def __call__(self, pos):
        return speed_limit(self, pos)


@dataclass(frozen=True)
class Scene:
    """Everything the planner knows about the environment for one cycle.

    The discount factor lives in :class:`rampmerge.reward.RewardParams`.
    """

    vehicles: tuple[VehicleTrack, ...]
    margins: CorridorMargins
    limit: SpeedLimitProfile

    def __post_init__(self):
        object.__setattr__(self, "vehicles", tuple(self.vehicles))

    @property
    def n_o(self) -> int:
        return len(self.vehicles)


def predict_position(v: VehicleTrack, t):
    """Constant-velocity (or constant-acceleration) extrapolation.

    A decelerating vehicle stops at its standstill time instead of reversing.
    """
    te = t
    if v.accel < 0:
        te = np.minimum(t, v.speed / -v.accel)
    return v.pos0 + v.speed * te + v.accel * te * te / 2


def predicted_speed(v: VehicleTrack, t):
    return np.maximum(v.speed + v.accel * t, 0.0)


def corridor(v: VehicleTrack, t, m: CorridorMargins) -> CorridorBounds:
    x = predict_position(v, t)
    h = m.headway * predicted_speed(v, t)
    return CorridorBounds(
        l_cr=x - (m.rear_caution + h),
        l_pr=x - (m.rear_hard + h),
        l_pf=x + (m.front_hard + h),
        l_cf=x + (m.front_caution + h),
    )


def speed_limit(p: SpeedLimitProfile, pos):
    if len(p.positions) == 1:
        return np.full_like(pos, p.limits[0], dtype=float) if isinstance(pos, np.ndarray) else p.limits[0]
    xs = np.asarray(p.positions)
    vs = np.asarray(p.limits)
    if p.mode == "linear":
        out = np.interp(pos, xs, vs)
    else:
        idx = np.clip(np.searchsorted(xs, pos, side="right") - 1, 0, len(xs) - 1)
        out = vs[idx]
    return out if isinstance(pos, np.ndarray) else float(out)


def in_hard_band(pos, t, v: VehicleTrack, m: CorridorMargins):
    b = corridor(v, t, m)
    return (b.l_pr <= pos) & (pos <= b.l_pf)


def is_prohibited(p: PhysicalState, scene: Scene):
    """True inside any vehicle's hard band or above the local speed limit."""
    out = p.vel > speed_limit(scene.limit, p.pos)
    for v in scene.vehicles:
        out = out | in_hard_band(p.pos, p.t, v, scene.margins)
    return out


def segment_clear(a: PhysicalState, b: PhysicalState, scene: Scene):
    """True when the straight (t, pos) segment from ``a`` to ``b`` avoids every hard band.

    Both endpoints must lie strictly outside each band and on the same side of
    it.  This is exact for constant-speed predictions, where band edges move
    linearly in time.
    """
    ok = True
    for v in scene.vehicles:
        ba = corridor(v, a.t, scene.margins)
        bb = corridor(v, b.t, scene.margins)
        behind = (a.pos < ba.l_pr) & (b.pos < bb.l_pr)
        ahead = (a.pos > ba.l_pf) & (b.pos > bb.l_pf)
        ok = ok & (behind | ahead)
    return ok

