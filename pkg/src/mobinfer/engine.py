"""Online force-based layout of a contact trace into plausible mobility.

The engine integrates, over the whole trace duration, the pair forces
of :mod:`mobinfer.forces` applied to point nodes of unit mass, using
semi-implicit Euler at a fixed step: velocities absorb the force, get
clamped to the maximum speed (after an optional warm-up during which
the clamp is lifted), and then move the positions. Reference nodes are
pinned to their ground-truth trajectories and only act on the others;
corridor head/tail anchors are kept on their axis and ahead/behind the
pack.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .forces import ForceParams, attractive_magnitude, boundary_force, repulsive_magnitude
from .model import ContactTrace, Corridor, MobilityTrace, Plane, Space, Torus
from .rwp import ConfigError
from .timeline import LinkTimeline, TimelineGrid, pair_arrays
from .traceio import fmt_num


class EngineError(RuntimeError):
    """Numerical failure during inference (non-finite force)."""


# Speed cap multiplier while the clamp is relaxed. A warm-up with no cap
# at all diverges at practical integration steps (the contact spring is
# stiff); ten times the speed limit moves nodes to their region an order
# of magnitude faster while keeping the integration bounded.
RELAX_SPEED_FACTOR = 10.0


@dataclass(frozen=True)
class InferenceConfig:
    """Everything the inference engine needs besides the trace itself.

    Exactly one of ``initial_positions`` (known starting layout, shape
    (n_nodes, 2)) or ``init_seed`` (random placement) must be given.
    ``reference`` supplies ground-truth trajectories for the nodes in
    ``reference_ids`` and must cover the whole trace duration.
    ``speed_relax_until`` relaxes the speed clamp before that time (to
    RELAX_SPEED_FACTOR times v_max) so randomly placed nodes can find
    their region quickly.
    """

    space: Space
    params: ForceParams
    dt: float = 1.0
    reference_ids: frozenset[int] = frozenset()
    reference: MobilityTrace | None = None
    initial_positions: np.ndarray | None = None
    init_seed: int | None = None
    speed_relax_until: float = 0.0
    anchor_head_tail: bool = False

    def __post_init__(self):
        if not self.dt > 0:
            raise ConfigError("integration step dt must be positive")
        if self.speed_relax_until < 0:
            raise ConfigError("speed_relax_until must be non-negative")
        if (self.initial_positions is None) == (self.init_seed is None):
            raise ConfigError("give exactly one of initial_positions or init_seed")
        if self.reference_ids and self.reference is None:
            raise ConfigError("reference_ids given without reference trajectories")
        if self.anchor_head_tail and not isinstance(self.space, Corridor):
            raise ConfigError("head/tail anchoring requires a corridor space")


@dataclass(frozen=True)
class EngineState:
    """Layout state at one instant: positions and velocities per node."""

    t: float
    positions: np.ndarray
    velocities: np.ndarray


def default_step(trace: ContactTrace) -> float:
    """1 s, or the trace's sampling period when that is finer."""
    if 0 < trace.sampling_period < 1.0:
        return trace.sampling_period
    return 1.0


def _resample_reference(
    ref: MobilityTrace, ids: np.ndarray, times: np.ndarray, space: Space
) -> np.ndarray:
    """Reference positions at arbitrary grid times, shortest-path interpolated."""
    pos = ref.positions[:, ids, :]
    k = times / ref.timestep
    k0 = np.clip(np.floor(k).astype(int), 0, ref.n_samples - 1)
    k1 = np.minimum(k0 + 1, ref.n_samples - 1)
    frac = (k - k0)[:, None, None]
    base = pos[k0]
    return space.wrap(base + frac * space.delta(base, pos[k1]))


class _Engine:
    """Precomputed force plumbing shared by step() and infer()."""

    def __init__(self, n_nodes: int, cfg: InferenceConfig):
        self.cfg = cfg
        self.n = n_nodes
        self.pair_i, self.pair_j = pair_arrays(n_nodes)
        self.ref_idx = np.array(sorted(cfg.reference_ids), dtype=int)
        if len(self.ref_idx) and (self.ref_idx[0] < 0 or self.ref_idx[-1] >= n_nodes):
            raise ConfigError(f"reference node ids outside 0..{n_nodes - 1}")
        if cfg.reference is not None:
            if cfg.reference.n_nodes < n_nodes:
                raise ConfigError("reference trace does not cover the trace's node set")
            if cfg.reference.space != cfg.space:
                raise ConfigError("reference trace space differs from inference space")

    def reference_positions(self, times: np.ndarray) -> np.ndarray | None:
        if not len(self.ref_idx):
            return None
        assert self.cfg.reference is not None
        if self.cfg.reference.duration + 1e-9 < times[-1]:
            raise ConfigError("reference trajectories do not span the trace duration")
        return _resample_reference(self.cfg.reference, self.ref_idx, times, self.cfg.space)

    def advance(
        self,
        positions: np.ndarray,
        velocities: np.ndarray,
        t: float,
        connected: np.ndarray,
        gap_to_contact: np.ndarray,
        gap_in_contact: np.ndarray,
        ref_next: np.ndarray | None,
    ) -> tuple[np.ndarray, np.ndarray]:
        cfg = self.cfg
        p = cfg.params
        diff = cfg.space.delta(positions[self.pair_i], positions[self.pair_j])
        dist = np.hypot(diff[:, 0], diff[:, 1])
        safe = np.maximum(dist, 1e-12)
        ux = np.where(dist > 1e-12, diff[:, 0] / safe, 0.0)
        uy = np.where(dist > 1e-12, diff[:, 1] / safe, 0.0)

        pull = attractive_magnitude(dist, connected, gap_to_contact, p)
        push = repulsive_magnitude(dist, connected, gap_in_contact, p)
        f = pull - push
        fx = f * ux
        fy = f * uy
        force = np.empty_like(positions)
        force[:, 0] = np.bincount(self.pair_i, fx, self.n) - np.bincount(self.pair_j, fx, self.n)
        force[:, 1] = np.bincount(self.pair_i, fy, self.n) - np.bincount(self.pair_j, fy, self.n)
        if p.D:
            force -= p.D * velocities
        force += boundary_force(positions, cfg.space)
        if not np.isfinite(force).all():
            bad = int(np.flatnonzero(~np.isfinite(force).all(axis=1))[0])
            raise EngineError(f"non-finite force on node {bad} at t={t}")

        vel = velocities + force * cfg.dt  # unit mass
        cap = p.v_max if t >= cfg.speed_relax_until else RELAX_SPEED_FACTOR * p.v_max
        speed = np.hypot(vel[:, 0], vel[:, 1])
        over = speed > cap
        if over.any():
            vel[over] *= (cap / speed[over])[:, None]
        if cfg.anchor_head_tail:
            assert isinstance(cfg.space, Corridor)
            vel[[cfg.space.head, cfg.space.tail], 1] = 0.0
        pos = cfg.space.wrap(positions + vel * cfg.dt)

        if ref_next is not None:
            vel[self.ref_idx] = cfg.space.delta(positions[self.ref_idx], ref_next) / cfg.dt
            pos[self.ref_idx] = ref_next
        if cfg.anchor_head_tail:
            assert isinstance(cfg.space, Corridor)
            head, tail = cfg.space.head, cfg.space.tail
            others = np.ones(self.n, dtype=bool)
            others[[head, tail]] = False
            if others.any():
                xs = pos[others, 0]
                if xs.max() >= pos[head, 0]:
                    pos[head, 0] = xs.max() + 1.0
                if xs.min() <= pos[tail, 0]:
                    pos[tail, 0] = xs.min() - 1.0
        return pos, vel


def initial_layout(n_nodes: int, cfg: InferenceConfig) -> np.ndarray:
    """Starting positions: the known layout, or a seeded uniform draw.

    Random placement is uniform over the torus, over a square of side
    10r centered at the origin on the plane, and over that same span
    clipped to the walls inside a corridor. Reference nodes always
    start at their ground-truth positions.
    """
    if cfg.initial_positions is not None:
        pos = np.array(cfg.initial_positions, dtype=float)
        if pos.shape != (n_nodes, 2):
            raise ConfigError(f"initial positions must have shape ({n_nodes}, 2)")
        if not np.isfinite(pos).all():
            raise ConfigError("initial positions must be finite")
        return cfg.space.wrap(pos)
    rng = np.random.Generator(np.random.PCG64(cfg.init_seed))
    u = rng.random((n_nodes, 2))
    if isinstance(cfg.space, Torus):
        return u * cfg.space.dims
    side = 10 * cfg.params.r
    pos = (u - 0.5) * side
    if isinstance(cfg.space, Corridor):
        pos[:, 1] = (u[:, 1] - 0.5) * 2 * cfg.space.half_width
    return pos


def step(state: EngineState, timeline: LinkTimeline, cfg: InferenceConfig) -> EngineState:
    """Advance the layout by one integration step of cfg.dt."""
    n = state.positions.shape[0]
    engine = _Engine(n, cfg)
    times = np.array([state.t])
    grid = timeline.grid(times)
    ref = engine.reference_positions(np.array([state.t + cfg.dt]))
    pos, vel = engine.advance(
        state.positions.copy(),
        state.velocities.copy(),
        state.t,
        grid.connected[0],
        grid.gap_to_contact[0],
        grid.gap_in_contact[0],
        None if ref is None else ref[0],
    )
    return EngineState(state.t + cfg.dt, pos, vel)


def _config_echo(cfg: InferenceConfig) -> dict[str, str]:
    p = cfg.params
    echo = {
        "K": fmt_num(p.K),
        "G": fmt_num(p.G),
        "alpha": fmt_num(p.alpha),
        "eps0": fmt_num(p.eps0),
        "tau": fmt_num(p.tau),
        "d_max": fmt_num(p.d_max),
        "D": fmt_num(p.D),
        "r": fmt_num(p.r),
        "v_max": fmt_num(p.v_max),
        "dt": fmt_num(cfg.dt),
        "speed_relax_until": fmt_num(cfg.speed_relax_until),
        "init": "known" if cfg.initial_positions is not None else f"random:{cfg.init_seed}",
        "reference_nodes": ",".join(str(i) for i in sorted(cfg.reference_ids)) or "none",
        "anchors": "head_tail" if cfg.anchor_head_tail else "none",
    }
    return echo


def infer(trace: ContactTrace, cfg: InferenceConfig) -> MobilityTrace:
    """Infer a plausible mobility trace for every node of a contact trace.

    Runs the force layout over [0, trace.duration] with stride cfg.dt
    and returns the sampled positions. Deterministic: identical trace,
    configuration and seeds give bit-identical output.
    """
    if trace.duration <= 0:
        raise ConfigError("contact trace duration must be positive")
    n = trace.n_nodes
    n_steps = int(math.floor(trace.duration / cfg.dt + 1e-9))
    times = np.arange(n_steps + 1) * cfg.dt
    engine = _Engine(n, cfg)
    ref_grid = engine.reference_positions(times)

    positions = initial_layout(n, cfg)
    if ref_grid is not None:
        positions[engine.ref_idx] = ref_grid[0]
    velocities = np.zeros_like(positions)

    grid = LinkTimeline(trace).grid(times[:-1])
    out = np.empty((n_steps + 1, n, 2))
    out[0] = positions
    for k in range(n_steps):
        positions, velocities = engine.advance(
            positions,
            velocities,
            float(times[k]),
            grid.connected[k],
            grid.gap_to_contact[k],
            grid.gap_in_contact[k],
            None if ref_grid is None else ref_grid[k + 1],
        )
        out[k + 1] = positions
    return MobilityTrace(cfg.space, cfg.dt, out, _config_echo(cfg))
