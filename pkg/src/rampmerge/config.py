"""Scenario configuration files (YAML).

Speeds may be written as bare numbers (m/s) or as tagged strings such as
``"80 kph"`` or ``"22.2 m/s"``; everything is converted to SI on load.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Optional, Union

import numpy as np
import yaml

from .grid import Grid, GridSpec, PhysicalState
from .idm import IdmParams
from .reward import RewardParams
from .scene import CorridorMargins, SpeedLimitProfile

_UNITS = {
    "": 1.0,
    "m": 1.0,
    "s": 1.0,
    "m/s": 1.0,
    "mps": 1.0,
    "m/s2": 1.0,
    "m/s^2": 1.0,
    "m/s3": 1.0,
    "m/s^3": 1.0,
    "kph": 1 / 3.6,
    "km/h": 1 / 3.6,
}
_QUANTITY = re.compile(r"^\s*([-+]?[0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?)\s*([a-zA-Z/^0-9]*)\s*$")


def parse_quantity(value: Union[int, float, str]) -> float:
    """Convert ``22.2``, ``"22.2 m/s"`` or ``"80 kph"`` to an SI float."""
    if isinstance(value, bool):
        raise ValueError(f"not a quantity: {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    m = _QUANTITY.match(str(value))
    if not m or m.group(2).lower() not in _UNITS:
        raise ValueError(f"cannot parse quantity {value!r}")
    return float(m.group(1)) * _UNITS[m.group(2).lower()]


@dataclass(frozen=True)
class VehicleSpec:
    """A target-lane vehicle whose speed follows piecewise-linear ramps.

    ``schedule`` lists ``(time, speed)`` knots; the speed ramps linearly from
    the initial speed at t=0 through each knot and holds after the last one.
    """

    id: str
    pos0: float
    speed: float
    schedule: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        times = [t for t, _ in self.schedule]
        if any(t <= 0 for t in times) or any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError(f"vehicle {self.id}: schedule times must be positive and increasing")

    def _knots(self) -> tuple[np.ndarray, np.ndarray]:
        ts = np.array([0.0] + [t for t, _ in self.schedule])
        vs = np.array([self.speed] + [v for _, v in self.schedule])
        return ts, vs

    def speed_at(self, t: float) -> float:
        ts, vs = self._knots()
        return float(np.interp(t, ts, vs))

    def accel_at(self, t: float) -> float:
        ts, vs = self._knots()
        k = int(np.searchsorted(ts, t, side="right")) - 1
        if k >= len(ts) - 1:
            return 0.0
        return float((vs[k + 1] - vs[k]) / (ts[k + 1] - ts[k]))

    def position(self, t: float) -> float:
        """Exact integral of the piecewise-linear speed profile."""
        ts, vs = self._knots()
        x = self.pos0
        for k in range(len(ts)):
            t0 = ts[k]
            if t <= t0:
                break
            t1 = min(t, ts[k + 1]) if k + 1 < len(ts) else t
            v0 = vs[k]
            v1 = self.speed_at(t1)
            x += (v0 + v1) / 2 * (t1 - t0)
        return float(x)


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    grid: GridSpec
    margins: CorridorMargins
    limit: SpeedLimitProfile
    ego0: PhysicalState
    vehicles: tuple[VehicleSpec, ...]
    merge_end_pos: float
    sim_duration: float
    idm: IdmParams
    gamma: float = 0.95
    cycle_dt: float = 0.1
    # planning-only tightening against quantization error in closed loop
    buffer_speed: float = 0.0
    buffer_distance: float = 0.0
    threads: int = 1
    extra: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        self.grid.validate()
        if self.cycle_dt <= 0:
            raise ValueError("cycle_dt must be positive")
        if self.sim_duration < self.cycle_dt:
            raise ValueError("sim_duration must cover at least one cycle")
        if self.buffer_speed < 0 or self.buffer_distance < 0:
            raise ValueError("safety buffers must be non-negative")
        span = self.grid.n_l * self.grid.dj * self.grid.dt**3 / 6
        if not 0 < self.merge_end_pos - self.ego0.pos <= span:
            raise ValueError(
                f"merge_end_pos {self.merge_end_pos} m must lie ahead of the ego within "
                f"the grid's {span:.1f} m position range"
            )
        if self.threads < 1:
            raise ValueError("threads must be >= 1")

    @property
    def n_cycles(self) -> int:
        return int(np.floor(self.sim_duration / self.cycle_dt + 1e-9))

    def build_grid(self) -> Grid:
        return Grid(self.grid)

    def reward_params(self, grid: Optional[Grid] = None) -> RewardParams:
        return RewardParams.for_grid(grid or self.build_grid(), gamma=self.gamma)


def _speed_pairs(items) -> tuple[tuple[float, float], ...]:
    return tuple((parse_quantity(a), parse_quantity(b)) for a, b in items)


def config_from_dict(raw: dict[str, Any], name: str = "scenario") -> ScenarioConfig:
    q = parse_quantity
    g = raw["grid"]
    grid = GridSpec(
        dt=q(g["dt"]),
        dj=q(g["dj"]),
        n_t=int(g["n_t"]),
        n_j=int(g["n_j"]),
        n_g=int(g["n_g"]),
        n_v=int(g["n_v"]),
        n_l=int(g["n_l"]),
        thin_k=int(g.get("thin_k", 1)),
    )
    m = raw["margins"]
    margins = CorridorMargins(
        rear_hard=q(m["rear_hard"]),
        rear_caution=q(m["rear_caution"]),
        front_hard=q(m["front_hard"]),
        front_caution=q(m["front_caution"]),
        headway=q(m.get("headway", 0.0)),
    )
    lim = raw["limit"]
    bps = _speed_pairs(lim["breakpoints"])
    limit = SpeedLimitProfile(
        tuple(p for p, _ in bps), tuple(v for _, v in bps), lim.get("mode", "step")
    )
    e = raw["ego0"]
    ego0 = PhysicalState(0.0, q(e.get("accel", 0.0)), q(e["vel"]), q(e.get("pos", 0.0)))
    vehicles = tuple(
        VehicleSpec(
            id=str(v.get("id", i + 1)),
            pos0=q(v["pos0"]),
            speed=q(v["speed"]),
            schedule=_speed_pairs(v.get("schedule", ())),
        )
        for i, v in enumerate(raw.get("vehicles") or ())
    )
    idm_kw = {k: q(v) for k, v in (raw.get("idm") or {}).items()}
    idm_kw.setdefault("v0", max(limit.limits))
    idm = IdmParams(**idm_kw)
    reward = raw.get("reward") or {}
    buf = raw.get("buffer") or {}
    known = {"name", "grid", "margins", "limit", "ego0", "vehicles", "merge_end_pos",
             "sim_duration", "cycle_dt", "idm", "reward", "buffer", "threads"}
    return ScenarioConfig(
        name=str(raw.get("name", name)),
        grid=grid,
        margins=margins,
        limit=limit,
        ego0=ego0,
        vehicles=vehicles,
        merge_end_pos=q(raw["merge_end_pos"]),
        sim_duration=q(raw["sim_duration"]),
        idm=idm,
        gamma=float(reward.get("gamma", 0.95)),
        cycle_dt=q(raw.get("cycle_dt", 0.1)),
        buffer_speed=q(buf.get("speed", 0.0)),
        buffer_distance=q(buf.get("distance", 0.0)),
        threads=int(raw.get("threads", 1)),
        extra={k: v for k, v in raw.items() if k not in known},
    )


def load_config(path: Union[str, Path]) -> ScenarioConfig:
    """Load a scenario file, or a bundled scenario by name (``scenario1``)."""
    p = Path(path)
    if not p.exists():
        p = bundled_path(str(path))
    with open(p) as f:
        raw = yaml.safe_load(f)
    return config_from_dict(raw, name=p.stem)


def bundled_path(name: str) -> Path:
    stem = name[:-5] if name.endswith(".yaml") else name
    p = Path(str(resources.files("rampmerge") / "scenarios" / f"{stem}.yaml"))
    if not p.exists():
        raise FileNotFoundError(f"no scenario file or bundled scenario named {name!r}")
    return p
