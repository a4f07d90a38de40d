"""Closed-loop merge simulation, planner comparison, benchmark and CSV export."""

from __future__ import annotations

import csv
import logging
import math
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .config import ScenarioConfig
from .grid import PhysicalState
from .idm import idm_plan_step, nearest_leader
from .reward import RewardParams, min_attenuation
from .scene import Scene, SpeedLimitProfile, VehicleTrack, speed_limit
from .solver import Infeasible, Plan, ProhibitedInitialState, plan_cycle, solve

log = logging.getLogger(__name__)

PLANNERS = ("mdp", "idm")
BASE_COLUMNS = (
    "t_s", "ego_pos_m", "ego_vel_mps", "ego_accel_mps2", "ego_jerk_mps3",
    "v_max_mps", "min_att", "feasible", "solve_ms",
)


@dataclass(frozen=True)
class CycleRecord:
    t: float
    pos: float
    vel: float
    accel: float
    jerk: float
    v_max: float
    min_att: float
    feasible: bool
    solve_ms: float
    vehicles: tuple[tuple[float, float, float], ...] = ()  # (pos, vel, gap) per vehicle


@dataclass
class SimulationLog:
    records: list[CycleRecord]
    n_vehicles: int
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.records)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=float)

    def gaps(self) -> np.ndarray:
        """Signed gaps (vehicle minus ego), shape (cycles, vehicles)."""
        return np.array([[g for _, _, g in r.vehicles] for r in self.records]).reshape(
            len(self.records), self.n_vehicles
        )


@dataclass(frozen=True)
class BenchReport:
    case: str
    repetitions: int
    threads: int
    min_ms: float
    max_ms: float
    avg_ms: float
    cells: int = 0


@dataclass
class Comparison:
    mdp: SimulationLog
    idm: SimulationLog
    metrics: dict[str, dict[str, float]]


# -- scenes -------------------------------------------------------------------


def vehicle_tracks(cfg: ScenarioConfig, t: float) -> list[VehicleTrack]:
    """Absolute vehicle states at time ``t`` (constant-velocity predictions)."""
    return [VehicleTrack(v.id, v.position(t), v.speed_at(t)) for v in cfg.vehicles]


def local_scene(cfg: ScenarioConfig, tracks: Sequence[VehicleTrack], ego_pos: float, buffered: bool) -> Scene:
    """Scene in the planning frame whose origin is the ego position."""
    margins, limit = cfg.margins, cfg.limit
    if buffered:
        margins = margins.inflated(cfg.buffer_distance)
        limit = replace(limit, limits=tuple(v - cfg.buffer_speed for v in limit.limits))
    return Scene(
        tuple(replace(v, pos0=v.pos0 - ego_pos) for v in tracks),
        margins,
        limit.shifted(ego_pos),
    )


def _mdp_plan(cfg, grid, rp, tracks, ego: PhysicalState, threads: int) -> Plan:
    local = PhysicalState(0.0, ego.accel, ego.vel, 0.0)
    if cfg.buffer_speed > 0 or cfg.buffer_distance > 0:
        try:
            plan = plan_cycle(grid, local_scene(cfg, tracks, ego.pos, True), rp, local, threads=threads)
            if plan.feasible:
                return plan
        except ProhibitedInitialState:
            pass
        log.debug("t=%.2f: buffered scene infeasible, replanning against the nominal scene", ego.t)
    try:
        plan = plan_cycle(grid, local_scene(cfg, tracks, ego.pos, False), rp, local, threads=threads)
    except ProhibitedInitialState as e:
        raise Infeasible(f"t={ego.t:.2f}s: {e}") from e
    if not plan.feasible:
        raise Infeasible(f"t={ego.t:.2f}s: no safe plan from {ego}")
    return plan


def tracking_jerk(plan: Plan, ego: PhysicalState, max_jerk: float, dt: float) -> float:
    """Jerk applied for the next ``dt`` of closed-loop motion.

    A nonzero planned jerk is applied as is.  A zero jerk means "hold the
    lattice acceleration"; since the plan starts from the snapped
    acceleration, the ego is steered onto that value (within the jerk bound)
    so that a sub-cell acceleration offset, invisible to the planner, cannot
    persist and drift the speed.
    """
    j = plan.first_jerk
    if j != 0:
        return j
    cmd = (plan.steps[0].state.accel - ego.accel) / dt
    return float(min(max(cmd, -max_jerk), max_jerk))


def advance(ego: PhysicalState, jerk: float, dt: float) -> PhysicalState:
    """Exact triple-integrator step under constant jerk."""
    return PhysicalState(
        ego.t + dt,
        ego.accel + jerk * dt,
        ego.vel + ego.accel * dt + jerk * dt * dt / 2,
        ego.pos + ego.vel * dt + ego.accel * dt * dt / 2 + jerk * dt**3 / 6,
    )


# -- simulation -----------------------------------------------------------------


def run_scenario(cfg: ScenarioConfig, planner: str = "mdp", threads: Optional[int] = None) -> SimulationLog:
    """Closed-loop run: replan every ``cycle_dt``, apply the first step, log, repeat.

    Stops after ``sim_duration`` or on the first cycle at or beyond
    ``merge_end_pos`` (that cycle is logged and marks merge completion).
    """
    if planner not in PLANNERS:
        raise ValueError(f"planner must be one of {PLANNERS}, got {planner!r}")
    threads = threads or cfg.threads
    grid = cfg.build_grid()
    rp = cfg.reward_params(grid)
    dt = cfg.cycle_dt
    ego = cfg.ego0
    records = []
    merged = False
    for k in range(cfg.n_cycles):
        t = k * dt
        ego = replace(ego, t=t)
        tracks = vehicle_tracks(cfg, t)
        nominal = Scene(tuple(tracks), cfg.margins, cfg.limit)
        start = time.perf_counter()
        if planner == "mdp":
            plan = _mdp_plan(cfg, grid, rp, tracks, ego, threads)
            solve_ms = plan.solve_ms
            jerk = tracking_jerk(plan, ego, rp.max_jerk, dt)
            nxt = advance(ego, jerk, dt)
        else:
            v_lim = float(speed_limit(cfg.limit, ego.pos))
            idm = replace(cfg.idm, v0=min(cfg.idm.v0, v_lim))
            nxt = idm_plan_step(ego, nearest_leader(ego.pos, tracks), idm, dt)
            solve_ms = (time.perf_counter() - start) * 1e3
            jerk = (nxt.accel - ego.accel) / dt
        records.append(
            CycleRecord(
                t=t,
                pos=ego.pos,
                vel=ego.vel,
                accel=ego.accel,
                jerk=jerk,
                v_max=float(speed_limit(cfg.limit, ego.pos)),
                min_att=float(min_attenuation(replace(ego, t=0.0), nominal, rp.printed_rear_branch)),
                feasible=True,
                solve_ms=solve_ms,
                vehicles=tuple((v.pos0, v.speed, v.pos0 - ego.pos) for v in tracks),
            )
        )
        if ego.pos >= cfg.merge_end_pos:
            merged = True
            break
        ego = nxt
    return SimulationLog(
        records,
        len(cfg.vehicles),
        meta={"scenario": cfg.name, "planner": planner, "merged": merged, "merge_end_pos": cfg.merge_end_pos},
    )


def compute_metrics(sim: SimulationLog) -> dict[str, float]:
    """Gap/comfort metrics; uses only fields that are also present in the CSV."""
    jerk = sim.column("jerk")
    accel = sim.column("accel")
    out = {
        "cycles": float(len(sim)),
        "max_abs_jerk": float(np.max(np.abs(jerk))),
        "max_abs_accel": float(np.max(np.abs(accel))),
        "min_gap": math.nan,
        "front_gap_at_merge": math.nan,
        "rear_gap_at_merge": math.nan,
        "min_att_at_merge": sim.records[-1].min_att,
    }
    if sim.n_vehicles:
        gaps = sim.gaps()
        out["min_gap"] = float(np.min(np.abs(gaps)))
        last = gaps[-1]
        ahead, behind = last[last > 0], last[last < 0]
        if ahead.size:
            out["front_gap_at_merge"] = float(ahead.min())
        if behind.size:
            out["rear_gap_at_merge"] = float(-behind.max())
    return out


def compare(cfg: ScenarioConfig, threads: Optional[int] = None) -> Comparison:
    mdp = run_scenario(cfg, "mdp", threads)
    idm = run_scenario(cfg, "idm")
    return Comparison(mdp, idm, {"mdp": compute_metrics(mdp), "idm": compute_metrics(idm)})


# -- benchmark -------------------------------------------------------------------


def bench(cfg: ScenarioConfig, repetitions: int, threads: int = 1) -> list[BenchReport]:
    """Time the initial solve of ``cfg`` and of its empty-road, high-limit variant.

    One untimed warm-up solve precedes the timed repetitions of each case.
    """
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    grid = cfg.build_grid()
    rp = cfg.reward_params(grid)
    ego = cfg.ego0
    initial = grid.quantize(PhysicalState(0.0, ego.accel, ego.vel, 0.0))
    cases = {
        "scenario": local_scene(cfg, vehicle_tracks(cfg, 0.0), ego.pos, False),
        "free": Scene((), cfg.margins, SpeedLimitProfile.flat(grid.max_vel)),
    }
    reports = []
    for case, scene in cases.items():
        values, _ = solve(grid, scene, rp, initial, threads=threads)
        samples = []
        for _ in range(repetitions):
            start = time.perf_counter()
            solve(grid, scene, rp, initial, threads=threads)
            samples.append((time.perf_counter() - start) * 1e3)
        reports.append(
            BenchReport(case, repetitions, threads, min(samples), max(samples), sum(samples) / len(samples), len(values))
        )
    return reports


# -- CSV ---------------------------------------------------------------------------


def csv_header(n_vehicles: int) -> list[str]:
    cols = list(BASE_COLUMNS)
    for i in range(1, n_vehicles + 1):
        cols += [f"veh{i}_pos_m", f"veh{i}_vel_mps", f"gap{i}_m"]
    return cols


def export_csv(sim: SimulationLog, path: Union[str, Path], timing: bool = True) -> Path:
    """Write one row per cycle at full (round-trip) precision.

    With ``timing=False`` the ``solve_ms`` column is written as 0 so the file
    is reproducible byte for byte.
    """
    if not sim.records:
        raise ValueError("refusing to export an empty log")
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(csv_header(sim.n_vehicles))
            for r in sim.records:
                row = [r.t, r.pos, r.vel, r.accel, r.jerk, r.v_max, r.min_att, int(r.feasible),
                       r.solve_ms if timing else 0.0]
                for veh in r.vehicles:
                    row.extend(veh)
                w.writerow([repr(float(x)) if not isinstance(x, int) else x for x in row])
    except OSError as e:
        raise OSError(f"cannot write trajectory CSV {path}: {e}") from e
    return path


def read_csv(path: Union[str, Path]) -> SimulationLog:
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    header, body = rows[0], rows[1:]
    n_veh = (len(header) - len(BASE_COLUMNS)) // 3
    records = []
    for row in body:
        x = [float(v) for v in row]
        vehicles = tuple(tuple(x[9 + 3 * i: 12 + 3 * i]) for i in range(n_veh))
        records.append(CycleRecord(*x[:7], bool(int(x[7])), x[8], vehicles))
    return SimulationLog(records, n_veh, meta={"source": str(path)})


def plan_log(plan: Plan, cfg: ScenarioConfig, rp: Optional[RewardParams] = None) -> SimulationLog:
    """Express a single plan (planning frame at t=0) as a log in absolute coordinates."""
    rp = rp or cfg.reward_params()
    records = []
    origin = cfg.ego0.pos
    for step in plan.steps:
        s = step.state
        tracks = vehicle_tracks(cfg, s.t)
        ego = PhysicalState(0.0, s.accel, s.vel, s.pos + origin)  # tracks are anchored at s.t
        nominal = Scene(tuple(tracks), cfg.margins, cfg.limit)
        records.append(
            CycleRecord(
                t=s.t, pos=ego.pos, vel=s.vel, accel=s.accel,
                jerk=step.jerk if step.jerk is not None else 0.0,
                v_max=float(speed_limit(cfg.limit, ego.pos)),
                min_att=float(min_attenuation(ego, nominal, rp.printed_rear_branch)),
                feasible=plan.feasible,
                solve_ms=plan.solve_ms,
                vehicles=tuple((v.pos0, v.speed, v.pos0 - ego.pos) for v in tracks),
            )
        )
    return SimulationLog(records, len(cfg.vehicles), meta={"scenario": cfg.name, "planner": "plan"})


def export_bench_csv(reports: Sequence[BenchReport], path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["case", "repetitions", "threads", "min_ms", "max_ms", "avg_ms"])
        for r in reports:
            w.writerow([r.case, r.repetitions, r.threads, f"{r.min_ms:.3f}", f"{r.max_ms:.3f}", f"{r.avg_ms:.3f}"])
    return path
