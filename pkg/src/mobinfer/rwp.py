"""Random Waypoint mobility on a torus, initialized in the stationary regime.

Ordinary RWP runs suffer a long warm-up during which the speed and
position distributions drift toward their steady state. Here the
initial state is drawn from the stationary distribution directly:
positions uniform on the torus, speeds from the 1/v-weighted density,
and the residual leg length-biased with uniform progress, so the very
first sample is already representative.

Randomness comes from NumPy's PCG64 generator; identical seeds yield
bit-identical traces on every platform.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import MobilityTrace, Torus


class ConfigError(ValueError):
    """Invalid generator or inference configuration."""


@dataclass(frozen=True)
class RwpConfig:
    """Parameters of one random-waypoint run."""

    n_nodes: int
    space: Torus
    v_min: float
    v_max: float
    duration: float
    timestep: float
    seed: int
    pause: float = 0.0

    def __post_init__(self):
        if self.n_nodes < 1:
            raise ConfigError("n_nodes must be >= 1")
        if not isinstance(self.space, Torus):
            raise ConfigError("random waypoint generation requires a torus space")
        if not self.v_min > 0:
            raise ConfigError(
                "v_min must be positive (the stationary speed density is not "
                "normalizable at v=0)"
            )
        if self.v_min > self.v_max:
            raise ConfigError("v_min must not exceed v_max")
        if not (self.duration > 0 and self.timestep > 0):
            raise ConfigError("duration and timestep must be positive")
        if self.pause < 0:
            raise ConfigError("pause must be non-negative")


def _axis_delta(d: float, size: float) -> float:
    """Minimal wrapped offset; exact half-spans resolve positive."""
    d = (d + size / 2) % size - size / 2
    return size / 2 if d == -size / 2 else d


class _NodeState:
    """Mutable kinematic state of one node during generation."""

    __slots__ = ("x", "y", "wx", "wy", "moving", "speed", "pause_left")

    def __init__(self, x, y, waypoint, speed, pause_left=0.0):
        self.x = float(x)
        self.y = float(y)
        self.moving = waypoint is not None
        self.wx, self.wy = waypoint if self.moving else (0.0, 0.0)
        self.speed = float(speed)
        self.pause_left = float(pause_left)


def stationary_speed(cfg: RwpConfig, rng: np.random.Generator) -> float:
    """Draw from the steady-state speed density, proportional to 1/v."""
    if cfg.v_min == cfg.v_max:
        return cfg.v_min
    return cfg.v_min * (cfg.v_max / cfg.v_min) ** rng.random()


def mean_speed_stationary(v_min: float, v_max: float) -> float:
    """Analytic mean of the 1/v-weighted speed density on [v_min, v_max]."""
    if v_min == v_max:
        return v_min
    return (v_max - v_min) / math.log(v_max / v_min)


def mean_leg_length(space: Torus, order: int = 128) -> float:
    """Mean geodesic distance between two uniform points on the torus.

    Gauss-Legendre product quadrature of the wrap-distance integral,
    plenty accurate for the pause-state weight.
    """
    nodes, weights = np.polynomial.legendre.leggauss(order)
    # per-axis wrapped offset is uniform on [0, dim/2] with density 2/dim
    ax = (nodes + 1) * (space.width / 4)
    ay = (nodes + 1) * (space.height / 4)
    wx = weights * 0.5
    wy = weights * 0.5
    gx, gy = np.meshgrid(ax, ay, indexing="ij")
    gw = np.outer(wx, wy)
    return float(np.sum(gw * np.hypot(gx, gy)))


def _sample_leg(cfg: RwpConfig, rng: np.random.Generator):
    """Length-biased leg: two uniform endpoints accepted w.p. length/diameter."""
    diameter = cfg.space.max_distance()
    w, h = cfg.space.width, cfg.space.height
    while True:
        x0, y0 = rng.random() * w, rng.random() * h
        x1, y1 = rng.random() * w, rng.random() * h
        length = math.hypot(_axis_delta(x1 - x0, w), _axis_delta(y1 - y0, h))
        if rng.random() * diameter < length:
            return (x0, y0), (x1, y1)


def rwp_initial_state(cfg: RwpConfig, rng: np.random.Generator) -> list[_NodeState]:
    """Sample per-node (position, waypoint, speed) from the stationary regime."""
    w, h = cfg.space.width, cfg.space.height
    if cfg.pause > 0:
        mean_inv_speed = (
            1 / cfg.v_min
            if cfg.v_min == cfg.v_max
            else math.log(cfg.v_max / cfg.v_min) / (cfg.v_max - cfg.v_min)
        )
        mean_travel = mean_leg_length(cfg.space) * mean_inv_speed
        p_paused = cfg.pause / (cfg.pause + mean_travel)
    else:
        p_paused = 0.0
    states = []
    for _ in range(cfg.n_nodes):
        if p_paused > 0 and rng.random() < p_paused:
            # pausing at a waypoint; residual of a fixed pause is uniform
            states.append(
                _NodeState(rng.random() * w, rng.random() * h, None, 0.0,
                           pause_left=rng.random() * cfg.pause)
            )
            continue
        (x0, y0), (x1, y1) = _sample_leg(cfg, rng)
        progress = rng.random()
        x = (x0 + progress * _axis_delta(x1 - x0, w)) % w
        y = (y0 + progress * _axis_delta(y1 - y0, h)) % h
        states.append(_NodeState(x, y, (x1, y1), stationary_speed(cfg, rng)))
    return states


def _advance(state: _NodeState, dt: float, cfg: RwpConfig, rng: np.random.Generator) -> None:
    """Move one node for dt seconds, landing exactly on waypoints."""
    w, h = cfg.space.width, cfg.space.height
    remaining = dt
    while remaining > 1e-12:
        if state.pause_left > 0:
            wait = min(state.pause_left, remaining)
            state.pause_left -= wait
            remaining -= wait
            continue
        if not state.moving:
            state.speed = cfg.v_min + rng.random() * (cfg.v_max - cfg.v_min)
            state.wx, state.wy = rng.random() * w, rng.random() * h
            state.moving = True
        dx = _axis_delta(state.wx - state.x, w)
        dy = _axis_delta(state.wy - state.y, h)
        dist = math.hypot(dx, dy)
        travel_time = dist / state.speed
        if travel_time <= remaining + 1e-12:
            state.x, state.y = state.wx % w, state.wy % h
            state.moving = False
            state.pause_left = cfg.pause
            remaining -= travel_time
        else:
            frac = state.speed * remaining / dist
            state.x = (state.x + dx * frac) % w
            state.y = (state.y + dy * frac) % h
            remaining = 0.0


def rwp_generate(cfg: RwpConfig) -> MobilityTrace:
    """Generate a full mobility trace; deterministic in cfg.seed."""
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    states = rwp_initial_state(cfg, rng)
    n_steps = int(math.floor(cfg.duration / cfg.timestep + 1e-9))
    positions = np.empty((n_steps + 1, cfg.n_nodes, 2))
    for idx, s in enumerate(states):
        positions[0, idx] = (s.x, s.y)
    for k in range(1, n_steps + 1):
        for idx, s in enumerate(states):
            _advance(s, cfg.timestep, cfg, rng)
            positions[k, idx] = (s.x, s.y)
    return MobilityTrace(cfg.space, cfg.timestep, positions)
