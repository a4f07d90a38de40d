"""Independent reference implementations used by the tests.

These walk the lattice one scalar state at a time through ``Grid.transition``
and never touch the vectorized sweep in ``rampmerge.solver``.
"""

from __future__ import annotations

import itertools
from functools import lru_cache

import numpy as np

from rampmerge.grid import Grid, GridSpec, HorizonExit, OutOfGrid, PhysicalState, StateIndex
from rampmerge.reward import RewardParams, terminal_value, transition_reward
from rampmerge.scene import (
    CorridorMargins,
    Scene,
    SpeedLimitProfile,
    VehicleTrack,
    is_prohibited,
    segment_clear,
)


def kinematic_step(p: PhysicalState, jerk: float, dt: float) -> PhysicalState:
    return PhysicalState(
        p.t + dt,
        p.accel + jerk * dt,
        p.vel + p.accel * dt + jerk * dt**2 / 2,
        p.pos + p.vel * dt + p.accel * dt**2 / 2 + jerk * dt**3 / 6,
    )


def recursive_value(grid: Grid, scene: Scene, rp: RewardParams):
    """Memoized V(s) = max_a [r(s, a, f(s, a)) + gamma V(f(s, a))]."""

    @lru_cache(maxsize=None)
    def V(s: StateIndex) -> float:
        p = grid.dequantize(s)
        if s.i_t == grid.n_t or is_prohibited(p, scene):
            return terminal_value(p, scene, rp)
        best = None
        for j in grid.actions:
            try:
                s2 = grid.transition(s, j)
            except OutOfGrid:
                continue
            except HorizonExit as e:
                p2 = grid.dequantize(e.state)
                v2 = terminal_value(p2, scene, rp) if segment_clear(p, p2, scene) else 0.0
            else:
                p2 = grid.dequantize(s2)
                v2 = V(s2)
            q = transition_reward(p, j * grid.dj, p2, v2, scene, rp) + rp.gamma * v2
            best = q if best is None else max(best, q)
        return 0.0 if best is None or best <= 0 else best

    return V


def safe_chain_exists(grid: Grid, scene: Scene):
    """Does some action chain from s reach the last layer (or exit cleanly) avoiding prohibited cells?"""

    @lru_cache(maxsize=None)
    def ok(s: StateIndex) -> bool:
        p = grid.dequantize(s)
        if is_prohibited(p, scene):
            return False
        if s.i_t == grid.n_t:
            return True
        for j in grid.actions:
            try:
                s2 = grid.transition(s, j)
            except OutOfGrid:
                continue
            except HorizonExit as e:
                p2 = grid.dequantize(e.state)
                if not is_prohibited(p2, scene) and segment_clear(p, p2, scene):
                    return True
                continue
            if ok(s2):
                return True
        return False

    return ok


def forward_enumerate(grid: Grid, initial: StateIndex) -> list[set[tuple[int, int, int]]]:
    """Every in-grid (g, v, l) visited per layer by brute force over action sequences."""
    layers = [set() for _ in range(grid.n_t + 1)]

    def walk(s: StateIndex):
        layers[s.i_t].add((s.i_g, s.i_v, s.i_l))
        if s.i_t == grid.n_t:
            return
        for j in grid.actions:
            try:
                walk(grid.transition(s, j))
            except (OutOfGrid, HorizonExit):
                pass

    walk(initial)
    return layers


def best_action_by_enumeration(grid, scene, rp, V, s: StateIndex):
    """All actions attaining max Q at s, using the oracle's V."""
    p = grid.dequantize(s)
    qs = {}
    for j in grid.actions:
        try:
            s2 = grid.transition(s, j)
        except OutOfGrid:
            continue
        except HorizonExit as e:
            p2 = grid.dequantize(e.state)
            v2 = terminal_value(p2, scene, rp) if segment_clear(p, p2, scene) else 0.0
        else:
            p2, v2 = grid.dequantize(s2), V(s2)
        qs[j] = transition_reward(p, j * grid.dj, p2, v2, scene, rp) + rp.gamma * v2
    top = max(qs.values())
    return [j for j, q in qs.items() if q == top], top


def random_instance(rng: np.random.Generator, max_cells: int = 100_000, n_vehicles=None, thin_k: int = 1):
    """A small random grid/scene/initial-state triple with a non-prohibited start."""
    while True:
        spec = GridSpec(
            dt=float(rng.choice([0.5, 1.0])),
            dj=float(rng.choice([0.5, 1.0, 2.0])),
            n_t=int(rng.integers(3, 6)),
            n_j=int(rng.integers(1, 3)),
            n_g=int(rng.integers(1, 4)),
            n_v=int(rng.integers(4, 24)),
            n_l=int(rng.integers(30, 240)),
            thin_k=thin_k,
        )
        grid = Grid(spec)
        if grid.n_cells <= max_cells:
            break
    span = grid.max_pos
    v_top = grid.max_vel
    k = int(rng.integers(0, 3)) if n_vehicles is None else n_vehicles
    margins = CorridorMargins(
        rear_hard=span * rng.uniform(0.03, 0.1),
        rear_caution=span * rng.uniform(0.12, 0.25),
        front_hard=span * rng.uniform(0.03, 0.1),
        front_caution=span * rng.uniform(0.12, 0.25),
        headway=float(rng.choice([0.0, 0.1])),
    )
    vehicles = tuple(
        VehicleTrack(str(i + 1), float(rng.uniform(-0.3, 1.0) * span), float(rng.uniform(0, 0.8) * v_top))
        for i in range(k)
    )
    n_bp = int(rng.integers(1, 4))
    positions = np.concatenate([[0.0], np.sort(rng.uniform(0.05, 1.0, n_bp - 1)) * span])
    limits = rng.uniform(0.3, 1.1, size=n_bp) * v_top
    limit = SpeedLimitProfile(tuple(positions), tuple(limits), str(rng.choice(["step", "linear"])))
    scene = Scene(vehicles, margins, limit)
    rp = RewardParams.for_grid(grid, gamma=float(rng.uniform(0.5, 0.99)))
    candidates = [
        StateIndex(0, g, v, l)
        for g, v, l in itertools.product(
            range(-grid.n_g, grid.n_g + 1), range(grid.n_v + 1), grid.kept_positions[:4].tolist()
        )
        if not is_prohibited(grid.dequantize(StateIndex(0, g, v, l)), scene)
    ]
    if not candidates:
        return random_instance(rng, max_cells, n_vehicles, thin_k)
    initial = candidates[int(rng.integers(len(candidates)))]
    return grid, scene, rp, initial


def safe_chains(grid: Grid, scene: Scene, initial: StateIndex) -> list[tuple[int, ...]]:
    """Every jerk-index sequence from ``initial`` that never enters a prohibited cell.

    A sequence ends at the last layer, or early when it cleanly leaves the
    far end of the position axis.
    """
    out = []

    def walk(s: StateIndex, chain: list[int]):
        p = grid.dequantize(s)
        if is_prohibited(p, scene):
            return
        if s.i_t == grid.n_t:
            out.append(tuple(chain))
            return
        for j in grid.actions:
            try:
                s2 = grid.transition(s, j)
            except OutOfGrid:
                continue
            except HorizonExit as e:
                p2 = grid.dequantize(e.state)
                if not is_prohibited(p2, scene) and segment_clear(p, p2, scene):
                    out.append(tuple(chain + [j]))
                continue
            walk(s2, chain + [j])

    walk(initial, [])
    return out
