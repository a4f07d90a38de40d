"""Backward value sweep over the lattice and greedy plan extraction.

Every transition advances time by exactly one layer, so values can be filled
from the last layer back to the initial one without recursion.  Only cells
reachable from the initial state are visited (prohibited cells absorb, so
nothing behind them is expanded).  Within a layer every cell depends only on
the finished layer after it, which makes the per-layer work embarrassingly
parallel and independent of how it is partitioned.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Iterator, Optional

import numpy as np

from .grid import Grid, HorizonExit, PhysicalState, StateIndex
from .reward import RewardParams, action_reward, successor_factor, terminal_value
from .scene import Scene, is_prohibited, segment_clear

NO_ACTION = np.iinfo(np.int16).min


class ProhibitedInitialState(ValueError):
    pass


class Infeasible(RuntimeError):
    """No safe continuation exists from the planning state."""


@dataclass
class _Layer:
    keys: np.ndarray  # sorted cell keys
    values: np.ndarray
    policy: np.ndarray  # int16, NO_ACTION where undefined
    prohibited: np.ndarray


class _LayeredTable:
    def __init__(self, grid: Grid, first_layer: int, layers: list[_Layer]):
        self.grid = grid
        self.first_layer = first_layer
        self._layers = layers

    def layer(self, i_t: int) -> _Layer:
        return self._layers[i_t - self.first_layer]

    def _find(self, s: StateIndex) -> tuple[_Layer, int]:
        if not self.first_layer <= s.i_t <= self.grid.n_t:
            raise KeyError(s)
        layer = self.layer(s.i_t)
        key = self.grid.encode(s.i_g, s.i_v, s.i_l)
        pos = int(np.searchsorted(layer.keys, key))
        if pos == layer.keys.size or layer.keys[pos] != key:
            raise KeyError(s)
        return layer, pos

    def __contains__(self, s: StateIndex) -> bool:
        try:
            self._find(s)
        except KeyError:
            return False
        return True

    def __len__(self) -> int:
        return sum(layer.keys.size for layer in self._layers)

    def indices(self) -> Iterator[StateIndex]:
        for offset, layer in enumerate(self._layers):
            g, v, l = self.grid.decode(layer.keys)
            for a, b, c in zip(g.tolist(), v.tolist(), l.tolist()):
                yield StateIndex(self.first_layer + offset, a, b, c)


class ValueTable(_LayeredTable):
    """State values of every visited cell."""

    def __getitem__(self, s: StateIndex) -> float:
        layer, pos = self._find(s)
        return float(layer.values[pos])

    def items(self) -> Iterator[tuple[StateIndex, float]]:
        flat = np.concatenate([layer.values for layer in self._layers])
        return zip(self.indices(), flat.tolist())

    def is_prohibited(self, s: StateIndex) -> bool:
        layer, pos = self._find(s)
        return bool(layer.prohibited[pos])


class PolicyTable(_LayeredTable):
    """Greedy jerk index per cell, ``None`` for terminal or dead cells."""

    def __getitem__(self, s: StateIndex) -> Optional[int]:
        layer, pos = self._find(s)
        a = int(layer.policy[pos])
        return None if a == NO_ACTION else a


@dataclass(frozen=True)
class PlanStep:
    index: StateIndex
    state: PhysicalState
    i_j: Optional[int]  # action taken from this state; None on the last step
    jerk: Optional[float]


@dataclass(frozen=True)
class Plan:
    steps: tuple[PlanStep, ...]
    feasible: bool
    value: float = 0.0
    exited: bool = False
    solve_ms: float = 0.0

    @property
    def first_jerk(self) -> float:
        if not self.feasible:
            raise Infeasible("plan is infeasible")
        return self.steps[0].jerk if self.steps[0].jerk is not None else 0.0


def action_order(n_j: int) -> list[int]:
    """Tie-break order: smallest |i_j| first, then the negative one."""
    return sorted(range(-n_j, n_j + 1), key=lambda j: (abs(j), j))


def exit_value(s: PhysicalState, s_exit: PhysicalState, scene: Scene, rp: RewardParams):
    """Value credited when a transition leaves the far end of the position axis."""
    v = terminal_value(s_exit, scene, rp)
    clear = segment_clear(s, s_exit, scene)
    if isinstance(v, np.ndarray):
        return np.where(clear, v, 0.0)
    return v if clear else 0.0


def solve(
    grid: Grid,
    scene: Scene,
    rp: RewardParams,
    initial: StateIndex,
    *,
    threads: int = 1,
    prune: bool = True,
) -> tuple[ValueTable, PolicyTable]:
    """Fill state values backward in time and record the greedy action per cell.

    With ``prune=False`` every lattice cell from the initial layer onward is
    evaluated instead of only the reachable ones.
    """
    if not grid.in_bounds(initial) or initial.i_t >= grid.n_t:
        raise ValueError(f"initial state {initial} is not a non-final in-grid cell")
    if is_prohibited(grid.dequantize(initial), scene):
        raise ProhibitedInitialState(f"initial state {initial} is prohibited")
    if threads < 1:
        raise ValueError("threads must be >= 1")

    if prune:
        def stop(i_t, g, v, l):
            return is_prohibited(grid.dequantize_arrays(i_t, g, v, l), scene)

        keys_by_layer = list(grid.expand(initial, stop))
    else:
        full = grid.layer_keys()
        keys_by_layer = [full] * (grid.n_t + 1 - initial.i_t)

    order = [(j, action_reward(j * grid.dj, rp)) for j in action_order(grid.n_j)]
    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    layers: list[_Layer] = [None] * len(keys_by_layer)  # type: ignore[list-item]
    nxt = None  # (keys, values, successor factors) of layer i_t + 1
    try:
        for i_t in range(grid.n_t, initial.i_t - 1, -1):
            keys = keys_by_layer[i_t - initial.i_t]
            g, v, l = grid.decode(keys)
            p = grid.dequantize_arrays(i_t, g, v, l)
            dead = np.asarray(is_prohibited(p, scene), dtype=bool)
            policy = np.full(keys.size, NO_ACTION, dtype=np.int16)
            if i_t == grid.n_t:
                values = np.asarray(terminal_value(p, scene, rp), dtype=float)
            else:
                values = np.zeros(keys.size)
                live = np.flatnonzero(~dead)
                chunks = [c for c in np.array_split(live, threads) if c.size] if pool else [live]
                args = (grid, scene, rp, i_t, g, v, l, nxt, order)
                if pool:
                    results = list(pool.map(lambda c: _evaluate(c, *args), chunks))
                else:
                    results = [_evaluate(live, *args)]
                for idx, (best, arg) in zip(chunks, results):
                    ok = best > 0
                    values[idx] = np.where(ok, best, 0.0)
                    policy[idx] = np.where(ok, arg, NO_ACTION)
            layers[i_t - initial.i_t] = _Layer(keys, values, policy, dead)
            nxt = (keys, values, successor_factor(p, scene, rp))
    finally:
        if pool:
            pool.shutdown()
    return (
        ValueTable(grid, initial.i_t, layers),
        PolicyTable(grid, initial.i_t, layers),
    )


def _evaluate(idx, grid, scene, rp, i_t, g, v, l, nxt, order):
    """Best action value and argmax for the cells ``idx`` of layer ``i_t``."""
    nkeys, nvals, nfac = nxt
    g, v, l = g[idx], v[idx], l[idx]
    best = np.full(idx.size, -np.inf)
    arg = np.full(idx.size, NO_ACTION, dtype=np.int16)
    for j, ra in order:
        g2, v2, l2, valid, exited = grid.step_arrays(g, v, l, j)
        q = np.full(idx.size, -np.inf)
        inside = valid & ~exited
        if inside.any():
            pos = np.searchsorted(nkeys, grid.encode(g2[inside], v2[inside], l2[inside]))
            vn = nvals[pos]
            r = np.where(vn == 0, 0.0, ra * nfac[pos])
            q[inside] = r + rp.gamma * vn
        if exited.any():
            s = grid.dequantize_arrays(i_t, g[exited], v[exited], l[exited])
            se = grid.dequantize_arrays(i_t + 1, g2[exited], v2[exited], l2[exited])
            ve = exit_value(s, se, scene, rp)
            r = np.where(ve == 0, 0.0, ra * successor_factor(se, scene, rp))
            q[exited] = r + rp.gamma * ve
        better = q > best
        best[better] = q[better]
        arg[better] = j
    return best, arg


def extract_plan(
    tables: tuple[ValueTable, PolicyTable],
    grid: Grid,
    scene: Scene,
    initial: StateIndex,
) -> Plan:
    """Follow the greedy policy from ``initial`` to the last layer (or off the grid)."""
    values, policy = tables
    value = values[initial]
    if value <= 0:
        return Plan(steps=(), feasible=False, value=value)
    steps = []
    s = initial
    exited = False
    while True:
        j = policy[s]
        if j is None:
            steps.append(PlanStep(s, grid.dequantize(s), None, None))
            break
        steps.append(PlanStep(s, grid.dequantize(s), j, j * grid.dj))
        try:
            s = grid.transition(s, j)
        except HorizonExit as e:
            steps.append(PlanStep(e.state, grid.dequantize(e.state), None, None))
            exited = True
            break
    return Plan(steps=tuple(steps), feasible=True, value=value, exited=exited)


def plan_cycle(
    grid: Grid,
    scene: Scene,
    rp: RewardParams,
    ego: PhysicalState,
    *,
    threads: int = 1,
) -> Plan:
    """One replanning step: snap ``ego`` to the lattice, solve, extract the plan."""
    start = time.perf_counter()
    initial = grid.quantize(ego)
    tables = solve(grid, scene, rp, initial, threads=threads)
    plan = extract_plan(tables, grid, scene, initial)
    return replace(plan, solve_ms=(time.perf_counter() - start) * 1e3)
