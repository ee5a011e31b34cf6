"""Core domain model: spaces, contact events/traces, and mobility traces.

All positions are 2-D and carried as float arrays of shape (..., 2).
Every type here is immutable after construction and safe to share
across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class TraceError(ValueError):
    """Invalid trace data: violated invariants or malformed input."""


# ---------------------------------------------------------------------------
# Spaces


class Space:
    """Geometry and boundary policy for node positions.

    Subclasses define how displacement vectors and distances are
    measured and how raw coordinates are normalized. All methods
    broadcast over leading axes.
    """

    def wrap(self, pts: np.ndarray) -> np.ndarray:
        """Normalize coordinates into the space's canonical domain."""
        return np.asarray(pts, dtype=float)

    def delta(self, p: np.ndarray, q: np.ndarray) -> np.ndarray:
        """Displacement vector from p to q (minimal image on a torus)."""
        return np.asarray(q, dtype=float) - np.asarray(p, dtype=float)

    def distance(self, p: np.ndarray, q: np.ndarray):
        d = self.delta(p, q)
        return np.hypot(d[..., 0], d[..., 1])

    def header_fields(self) -> list[str]:
        raise NotImplementedError


@dataclass(frozen=True)
class Plane(Space):
    """Unbounded Euclidean plane."""

    def header_fields(self) -> list[str]:
        return ["plane"]


@dataclass(frozen=True)
class Torus(Space):
    """Rectangular area with wrap-around edges (no border effects)."""

    width: float
    height: float

    def __post_init__(self):
        if not (self.width > 0 and self.height > 0):
            raise ValueError("torus dimensions must be positive")

    @property
    def dims(self) -> np.ndarray:
        return np.array([self.width, self.height])

    def wrap(self, pts: np.ndarray) -> np.ndarray:
        dims = self.dims
        out = np.mod(np.asarray(pts, dtype=float), dims)
        # float mod of a tiny negative number can land exactly on the bound
        return np.where(out == dims, 0.0, out)

    def delta(self, p: np.ndarray, q: np.ndarray) -> np.ndarray:
        dims = self.dims
        raw = np.asarray(q, dtype=float) - np.asarray(p, dtype=float)
        d = np.mod(raw + dims / 2, dims) - dims / 2
        # exact half-spans are ambiguous; break ties toward the positive axis
        return np.where(d == -dims / 2, dims / 2, d)

    def max_distance(self) -> float:
        return math.hypot(self.width, self.height) / 2

    def header_fields(self) -> list[str]:
        from .traceio import fmt_num

        return ["torus", fmt_num(self.width), fmt_num(self.height)]


@dataclass(frozen=True)
class Corridor(Space):
    """Strip bounded by soft walls at y = +/-half_width.

    Two designated nodes lead and trail the group along the x axis;
    the walls exert a restoring spring force on anything outside.
    """

    half_width: float
    head: int
    tail: int
    wall_stiffness: float = 100.0

    def __post_init__(self):
        if not self.half_width > 0:
            raise ValueError("corridor half_width must be positive")
        if self.head == self.tail:
            raise ValueError("corridor head and tail must differ")
        if self.head < 0 or self.tail < 0:
            raise ValueError("corridor anchor ids must be non-negative")
        if not self.wall_stiffness > 0:
            raise ValueError("wall_stiffness must be positive")

    def header_fields(self) -> list[str]:
        from .traceio import fmt_num

        return ["corridor", fmt_num(self.half_width), str(self.head), str(self.tail)]


def distance(space: Space, p: np.ndarray, q: np.ndarray):
    """Space-aware distance between two points (or arrays of points)."""
    return space.distance(p, q)


# ---------------------------------------------------------------------------
# Contact traces


@dataclass(frozen=True, order=True)
class ContactEvent:
    """One contact: nodes a < b were linked over [t_up, t_down)."""

    a: int
    b: int
    t_up: float
    t_down: float

    def __post_init__(self):
        if self.a < 0 or self.b < 0:
            raise TraceError("node ids must be non-negative")
        if self.a >= self.b:
            raise TraceError(f"event pair must be canonical a < b, got ({self.a}, {self.b})")
        if self.t_up < 0:
            raise TraceError("event times must be non-negative")
        if not self.t_up < self.t_down:
            raise TraceError(
                f"contact ends before it starts: [{self.t_up}, {self.t_down}]"
            )

    @property
    def pair(self) -> tuple[int, int]:
        return (self.a, self.b)


def canonical_events(
    raw: list[tuple[int, int, float, float]],
) -> tuple[tuple[ContactEvent, ...], int, int]:
    """Canonicalize raw (a, b, up, down) quadruplets.

    Orders each pair as a < b, sorts, merges same-pair intervals that
    touch or overlap, and drops empty (up >= down) intervals. Returns
    (events, merged_count, dropped_count).
    """
    items = []
    dropped = 0
    for a, b, up, down in raw:
        if a > b:
            a, b = b, a
        up = max(0.0, up)
        if up >= down:
            dropped += 1
            continue
        items.append((a, b, up, down))
    items.sort()
    merged = 0
    out: list[list] = []
    for a, b, up, down in items:
        if out and out[-1][0] == a and out[-1][1] == b and up <= out[-1][3]:
            out[-1][3] = max(out[-1][3], down)
            merged += 1
        else:
            out.append([a, b, up, down])
    return tuple(ContactEvent(*e) for e in out), merged, dropped


@dataclass(frozen=True)
class ContactTrace:
    """A chronological list of contact events between N nodes.

    Events are canonical: pairs ordered a < b, sorted by (a, b, t_up),
    and per-pair intervals strictly disjoint. ``labels`` maps dense ids
    back to the original labels when ingestion had to renumber.
    """

    events: tuple[ContactEvent, ...]
    n_nodes: int
    duration: float
    sampling_period: float = 0.0
    labels: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.n_nodes < 0:
            raise TraceError("n_nodes must be non-negative")
        if self.duration < 0 or self.sampling_period < 0:
            raise TraceError("duration and sampling_period must be non-negative")
        if self.labels is not None and len(self.labels) != self.n_nodes:
            raise TraceError("label table size must match n_nodes")
        prev = None
        for e in self.events:
            if e.b >= self.n_nodes:
                raise TraceError(f"event node {e.b} outside 0..{self.n_nodes - 1}")
            if e.t_down > self.duration + 1e-9:
                raise TraceError(f"event past trace duration: {e}")
            if prev is not None:
                if (e.a, e.b, e.t_up) < (prev.a, prev.b, prev.t_up):
                    raise TraceError("events not in canonical order")
                if (e.a, e.b) == (prev.a, prev.b) and e.t_up <= prev.t_down:
                    raise TraceError(f"overlapping intervals for pair {e.pair}")
            prev = e

    @classmethod
    def from_events(
        cls,
        raw: list[tuple[int, int, float, float]],
        n_nodes: int,
        duration: float,
        sampling_period: float = 0.0,
        labels: tuple[int, ...] | None = None,
    ) -> "ContactTrace":
        events, _, _ = canonical_events(raw)
        return cls(events, n_nodes, duration, sampling_period, labels)

    def by_pair(self) -> dict[tuple[int, int], list[ContactEvent]]:
        out: dict[tuple[int, int], list[ContactEvent]] = {}
        for e in self.events:
            out.setdefault(e.pair, []).append(e)
        return out


# ---------------------------------------------------------------------------
# Mobility traces


@dataclass(frozen=True, eq=False)
class MobilityTrace:
    """Uniformly sampled 2-D positions for all nodes.

    ``positions`` has shape (n_samples, n_nodes, 2); sample k is at
    time k * timestep. Torus positions are wrapped into the canonical
    domain at construction and the array is frozen read-only.
    """

    space: Space
    timestep: float
    positions: np.ndarray
    config: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if not self.timestep > 0:
            raise TraceError("timestep must be positive")
        pos = np.array(self.positions, dtype=float)
        if pos.ndim != 3 or pos.shape[2] != 2 or pos.shape[0] < 1:
            raise TraceError(f"positions must have shape (times, nodes, 2), got {pos.shape}")
        if not np.isfinite(pos).all():
            raise TraceError("positions must be finite")
        pos = self.space.wrap(pos)
        pos.flags.writeable = False
        object.__setattr__(self, "positions", pos)

    @property
    def n_samples(self) -> int:
        return self.positions.shape[0]

    @property
    def n_nodes(self) -> int:
        return self.positions.shape[1]

    @property
    def duration(self) -> float:
        return (self.n_samples - 1) * self.timestep

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_samples) * self.timestep

    def sample_index(self, t: float) -> int:
        """Map a time to its sample index; t must lie on the grid."""
        k = int(round(t / self.timestep))
        if k < 0 or k >= self.n_samples or abs(t - k * self.timestep) > 1e-6:
            raise TraceError(f"time {t} is not a sample of this trace")
        return k

    def positions_at(self, t: float) -> np.ndarray:
        return self.positions[self.sample_index(t)]
