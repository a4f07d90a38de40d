"""Quantized (time, acceleration, velocity, position) lattice driven by jerk.

Every axis is an integer multiple of a unit step derived from the jerk step
``dj`` and the time step ``dt``:

    accel unit    = dj * dt
    velocity unit = dj * dt**2 / 2
    position unit = dj * dt**3 / 6

With those units one step of constant jerk ``i_j * dj`` maps an index state
``(i_t, i_g, i_v, i_l)`` to

    (i_t + 1, i_g + i_j, i_v + 2*i_g + i_j, i_l + 3*i_v + 3*i_g + i_j)

which is the exact triple-integrator update, so no rounding is involved
unless the position axis is thinned.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterator, Optional

import numpy as np


class OutOfGrid(ValueError):
    """Raised when an action leaves the acceleration/velocity/position bounds."""

    def __init__(self, axis: str, message: str = ""):
        self.axis = axis
        super().__init__(message or f"transition leaves the grid on the {axis} axis")


class HorizonExit(Exception):
    """Raised when a transition overruns the far end of the position axis.

    This is not a failure: the ego leaves the planned segment before the last
    time layer.  ``state`` carries the overflowed (out-of-bounds) index.
    """

    def __init__(self, state: "StateIndex"):
        self.state = state
        super().__init__(f"position index {state.i_l} beyond the grid")


@dataclass(frozen=True)
class GridSpec:
    dt: float
    dj: float
    n_t: int
    n_j: int
    n_g: int
    n_v: int
    n_l: int
    thin_k: int = 1

    def validate(self) -> None:
        if not (self.dt > 0 and self.dj > 0):
            raise ValueError(f"dt and dj must be positive, got dt={self.dt}, dj={self.dj}")
        for name in ("n_t", "n_j", "n_g", "n_v", "n_l", "thin_k"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value!r}")
        if self.thin_k > self.n_l:
            raise ValueError(f"thin_k={self.thin_k} exceeds n_l={self.n_l}")


@dataclass(frozen=True, order=True)
class StateIndex:
    i_t: int
    i_g: int
    i_v: int
    i_l: int

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.i_t, self.i_g, self.i_v, self.i_l)


@dataclass(frozen=True)
class PhysicalState:
    """SI state. Fields may also hold equally shaped arrays for batch evaluation."""

    t: float
    accel: float
    vel: float
    pos: float


@dataclass(frozen=True)
class LayerBounds:
    g: tuple[int, int]
    v: tuple[int, int]
    l: tuple[int, int]

    def contains(self, i_g: int, i_v: int, i_l: int) -> bool:
        return (
            self.g[0] <= i_g <= self.g[1]
            and self.v[0] <= i_v <= self.v[1]
            and self.l[0] <= i_l <= self.l[1]
        )


@dataclass(frozen=True)
class ReachabilityBounds:
    """Inclusive index intervals per time layer; ``None`` marks an empty layer."""

    layers: tuple[Optional[LayerBounds], ...]

    def __getitem__(self, i_t: int) -> Optional[LayerBounds]:
        return self.layers[i_t]

    def __len__(self) -> int:
        return len(self.layers)

    def contains(self, s: StateIndex) -> bool:
        if not 0 <= s.i_t < len(self.layers):
            return False
        layer = self.layers[s.i_t]
        return layer is not None and layer.contains(s.i_g, s.i_v, s.i_l)


class Grid:
    """Immutable lattice built from a :class:`GridSpec`."""

    def __init__(self, spec: GridSpec):
        spec.validate()
        self.spec = spec
        self.dt = float(spec.dt)
        self.dj = float(spec.dj)
        self.n_t, self.n_j, self.n_g = int(spec.n_t), int(spec.n_j), int(spec.n_g)
        self.n_v, self.n_l, self.thin_k = int(spec.n_v), int(spec.n_l), int(spec.thin_k)

        self.accel_unit = self.dj * self.dt
        self.vel_unit = self.dj * self.dt**2 / 2
        self.pos_unit = self.dj * self.dt**3 / 6

        self.kept_positions = np.arange(0, self.n_l + 1, self.thin_k, dtype=np.int64)
        # cells per layer, used for key encoding
        self._nl1 = self.n_l + 1
        self._nv1 = self.n_v + 1

    def __repr__(self) -> str:
        return f"Grid({self.spec})"

    # -- sizes -------------------------------------------------------------

    @property
    def actions(self) -> range:
        return range(-self.n_j, self.n_j + 1)

    @property
    def cells_per_layer(self) -> int:
        return (2 * self.n_g + 1) * self._nv1 * len(self.kept_positions)

    @property
    def n_cells(self) -> int:
        return (self.n_t + 1) * self.cells_per_layer

    @property
    def max_vel(self) -> float:
        return self.n_v * self.vel_unit

    @property
    def max_pos(self) -> float:
        return self.n_l * self.pos_unit

    # -- index arithmetic --------------------------------------------------

    def in_bounds(self, s: StateIndex) -> bool:
        return (
            0 <= s.i_t <= self.n_t
            and -self.n_g <= s.i_g <= self.n_g
            and 0 <= s.i_v <= self.n_v
            and 0 <= s.i_l <= self.n_l
            and s.i_l % self.thin_k == 0
        )

    def thin(self, i_l):
        """Round position indices (scalar or array, all ``<= n_l``) to kept ones.

        Ties go to the smaller index.
        """
        k = self.thin_k
        if k == 1:
            return i_l
        lo = (i_l // k) * k
        hi = lo + k
        return np.where((2 * (i_l - lo) > k) & (hi <= self.n_l), hi, lo)

    def step_arrays(self, g, v, l, j: int):
        """Vectorized transition.

        Returns ``(g', v', l', valid, exited)``.  ``valid`` is False for any
        acceleration/velocity/negative-position violation; ``exited`` marks
        valid transitions whose position overruns ``n_l``.  Position is thinned
        only where the successor stays on the grid.
        """
        g2 = g + j
        v2 = v + 2 * g + j
        l2 = l + 3 * v + 3 * g + j
        valid = (np.abs(g2) <= self.n_g) & (v2 >= 0) & (v2 <= self.n_v) & (l2 >= 0)
        exited = valid & (l2 > self.n_l)
        if self.thin_k > 1:
            inside = np.minimum(l2, self.n_l)
            l2 = np.where(exited, l2, self.thin(inside))
        return g2, v2, l2, valid, exited

    def transition(self, s: StateIndex, i_j: int) -> StateIndex:
        """Apply jerk index ``i_j`` for one time step.

        Raises :class:`OutOfGrid` for invalid actions and :class:`HorizonExit`
        when the ego overruns the end of the position axis.
        """
        if s.i_t >= self.n_t:
            raise ValueError(f"no transition out of the final layer (i_t={s.i_t})")
        if abs(i_j) > self.n_j:
            raise ValueError(f"|i_j|={abs(i_j)} exceeds n_j={self.n_j}")
        g2 = s.i_g + i_j
        v2 = s.i_v + 2 * s.i_g + i_j
        l2 = s.i_l + 3 * s.i_v + 3 * s.i_g + i_j
        if abs(g2) > self.n_g:
            raise OutOfGrid("accel")
        if v2 < 0 or v2 > self.n_v:
            raise OutOfGrid("velocity")
        if l2 < 0:
            raise OutOfGrid("position")
        if l2 > self.n_l:
            raise HorizonExit(StateIndex(s.i_t + 1, g2, v2, l2))
        return StateIndex(s.i_t + 1, g2, v2, int(self.thin(l2)))

    # -- physical conversion -----------------------------------------------

    def dequantize(self, s: StateIndex) -> PhysicalState:
        return self.dequantize_arrays(s.i_t, s.i_g, s.i_v, s.i_l)

    def dequantize_arrays(self, i_t, i_g, i_v, i_l) -> PhysicalState:
        # the solver and scalar callers must share this exact expression
        return PhysicalState(
            t=i_t * self.dt,
            accel=i_g * self.accel_unit,
            vel=i_v * self.vel_unit,
            pos=i_l * self.pos_unit,
        )

    def quantize(self, p: PhysicalState) -> StateIndex:
        """Nearest lattice cell, ties toward the smaller index on every axis."""
        i_t = _nearest(p.t / self.dt, 0, self.n_t, "time")
        i_g = _nearest(p.accel / self.accel_unit, -self.n_g, self.n_g, "accel")
        i_v = _nearest(p.vel / self.vel_unit, 0, self.n_v, "velocity")
        i_l = _nearest(p.pos / self.pos_unit, 0, self.n_l, "position")
        return StateIndex(i_t, i_g, i_v, int(self.thin(i_l)))

    # -- keys and reachability -----------------------------------------------

    def encode(self, g, v, l):
        """Pack (i_g, i_v, i_l) into one integer key, ordered lexicographically."""
        return ((g + self.n_g) * self._nv1 + v) * self._nl1 + l

    def decode(self, key):
        l = key % self._nl1
        rest = key // self._nl1
        return rest // self._nv1 - self.n_g, rest % self._nv1, l

    def layer_keys(self) -> np.ndarray:
        """Sorted keys of every cell in one (unpruned) time layer."""
        g = np.arange(-self.n_g, self.n_g + 1, dtype=np.int64)
        v = np.arange(0, self.n_v + 1, dtype=np.int64)
        gg, vv, ll = np.meshgrid(g, v, self.kept_positions, indexing="ij")
        return self.encode(gg, vv, ll).ravel()

    def expand(
        self,
        initial: StateIndex,
        stop: Optional[Callable[[int, np.ndarray, np.ndarray, np.ndarray], np.ndarray]] = None,
    ) -> Iterator[np.ndarray]:
        """Yield sorted keys of the cells reachable at each layer from ``initial``.

        ``stop(i_t, g, v, l)`` may return a boolean mask of cells that are
        absorbing (not expanded further).
        """
        if not self.in_bounds(initial):
            raise ValueError(f"{initial} outside the grid")
        keys = np.array([self.encode(initial.i_g, initial.i_v, initial.i_l)], dtype=np.int64)
        for i_t in range(initial.i_t, self.n_t + 1):
            yield keys
            if i_t == self.n_t:
                break
            g, v, l = self.decode(keys)
            if stop is not None:
                live = ~stop(i_t, g, v, l)
                g, v, l = g[live], v[live], l[live]
            nxt = []
            for j in self.actions:
                g2, v2, l2, valid, exited = self.step_arrays(g, v, l, j)
                ok = valid & ~exited
                nxt.append(self.encode(g2[ok], v2[ok], l2[ok]))
            keys = np.unique(np.concatenate(nxt))

    def reachable_bounds(self, initial: StateIndex) -> ReachabilityBounds:
        """Tightest per-layer index intervals over every reachable cell."""
        layers: list[Optional[LayerBounds]] = [None] * (self.n_t + 1)
        for offset, keys in enumerate(self.expand(initial)):
            if keys.size == 0:
                continue
            g, v, l = self.decode(keys)
            layers[initial.i_t + offset] = LayerBounds(
                (int(g.min()), int(g.max())),
                (int(v.min()), int(v.max())),
                (int(l.min()), int(l.max())),
            )
        return ReachabilityBounds(tuple(layers))


def build_grid(spec: GridSpec) -> Grid:
    return Grid(spec)


def _nearest(x: float, lo: int, hi: int, axis: str) -> int:
    eps = 1e-9
    if not (lo - eps <= x <= hi + eps):
        raise ValueError(f"{axis} index {x:.6g} outside [{lo}, {hi}]")
    return min(max(math.ceil(x - 0.5), lo), hi)
