"""Pair forces driving the mobility inference layout.

Every pair of nodes exchanges an attractive spring force and a
Coulomb-like repulsive force whose intensities depend not only on the
current distance but on the time to the nearest contact events, so
that pairs start converging *before* a recorded contact comes up and
keep some cohesion just after one ends. An optional linear drag damps
isolated nodes, and corridor walls push back anything outside the
strip.

All magnitude functions accept scalars or arrays and broadcast.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .model import Corridor, Space
from .rwp import ConfigError


def calibrate_repulsion(K: float, r: float, eps0: float, alpha: float) -> float:
    """Repulsion intensity making the fresh-contact equilibrium 3/4 of range.

    Returns the unique G with K * (3r/4) == G / (eps0 + 3/4)^alpha, so
    a pair that has just come into contact settles at distance 0.75 r
    when no other forces act on it.
    """
    if min(K, r, eps0, alpha) <= 0:
        raise ConfigError("calibration needs positive K, r, eps0, alpha")
    return K * 0.75 * r * (eps0 + 0.75) ** alpha


@dataclass(frozen=True)
class ForceParams:
    """All knobs of the force model.

    K: spring rigidity (per meter of stretch).
    G: repulsion intensity; calibrate_repulsion gives the default.
    alpha: repulsion decay exponent.
    eps0: repulsion offset keeping the force bounded by G / eps0^alpha.
    tau: anticipation scale (meters); a contact v_max*dt/tau away in
        time attenuates the anticipated attraction by e^-(v_max dt/tau).
    d_max: cutoff beyond which repulsion vanishes.
    D: linear drag coefficient, 0 disables drag.
    r: transmission range.
    v_max: maximum node speed.
    """

    K: float = 100.0
    G: float = calibrate_repulsion(100.0, 100.0, 1.0, 1.5)
    alpha: float = 1.5
    eps0: float = 1.0
    tau: float = 50.0
    d_max: float = 200.0
    D: float = 0.0
    r: float = 100.0
    v_max: float = 10.0

    def __post_init__(self):
        for name in ("K", "G", "alpha", "eps0", "tau", "d_max", "r", "v_max"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"force parameter {name} must be positive")
        if self.D < 0:
            raise ConfigError("drag coefficient D must be non-negative")
        if self.d_max < self.r:
            raise ConfigError("cutoff d_max must be at least the transmission range")

    @classmethod
    def defaults(cls, r: float = 100.0, v_max: float = 10.0, **overrides) -> "ForceParams":
        """Standard parameters for a given range and speed.

        d_max defaults to 2r and G is calibrated from K, r, eps0 and
        alpha unless given explicitly.
        """
        params = dict(r=r, v_max=v_max)
        params.update(overrides)
        params.setdefault("d_max", 2 * r)
        if "G" not in params:
            base = cls(r=r, v_max=v_max, d_max=params["d_max"])
            k = params.get("K", base.K)
            eps0 = params.get("eps0", base.eps0)
            alpha = params.get("alpha", base.alpha)
            params["G"] = calibrate_repulsion(k, r, eps0, alpha)
        return cls(**params)

    def with_drag(self, D: float) -> "ForceParams":
        return replace(self, D=D)


def attractive_magnitude(d, connected, gap_to_contact, p: ForceParams):
    """Spring pull toward the peer, gated by anticipation when apart.

    Connected pairs feel the plain spring K*d. Disconnected pairs feel
    it attenuated by exp(-v_max * gap / tau), where gap is the time to
    the nearest link-up event (past or future); a pair that never
    meets (gap = +inf) feels nothing. No distance cutoff: pairs pushed
    beyond the repulsion cutoff stay held at that boundary while their
    next contact approaches, instead of escaping for good. The
    magnitude is continuous across link-up and link-down instants,
    where the gap vanishes.
    """
    d = np.asarray(d, dtype=float)
    gap = np.asarray(gap_to_contact, dtype=float)
    gated = p.K * np.exp(-p.v_max * gap / p.tau) * d
    return np.where(np.asarray(connected), p.K * d, gated)


def repulsive_magnitude(d, connected, gap_in_contact, p: ForceParams):
    """Coulomb-like push away from the peer, softened inside contacts.

    While connected, the distance is inflated by v_max times the time
    from the nearest contact edge (link-up behind, link-down ahead), so
    repulsion is full strength at the instants a contact starts or
    ends and weakest in the middle. Cut off at d_max, bounded by
    G / eps0^alpha everywhere.
    """
    d = np.asarray(d, dtype=float)
    gap = np.where(np.asarray(connected), np.asarray(gap_in_contact, dtype=float), 0.0)
    mag = p.G / (p.eps0 + (d + p.v_max * gap) / p.r) ** p.alpha
    return np.where(d >= p.d_max, 0.0, mag)


def attractive_force(d: float, connected: bool, dt_event: float, p: ForceParams) -> float:
    """Scalar attractive magnitude along the unit vector toward the peer."""
    if d < 0:
        raise ValueError("distance must be non-negative")
    return float(attractive_magnitude(d, connected, dt_event, p))


def repulsive_force(d: float, connected: bool, dt_event: float, p: ForceParams) -> float:
    """Scalar repulsive magnitude along the unit vector away from the peer."""
    if d < 0:
        raise ValueError("distance must be non-negative")
    return float(repulsive_magnitude(d, connected, dt_event, p))


def drag_force(v: np.ndarray, D: float) -> np.ndarray:
    """Linear drag -D*v; zero when D is 0."""
    return -D * np.asarray(v, dtype=float)


def boundary_force(pos: np.ndarray, space: Space) -> np.ndarray:
    """Wall reaction for corridor spaces; zero elsewhere.

    Inside |y| <= half_width there is no force; outside, a spring
    proportional to the penetration pushes straight back toward the
    strip.
    """
    pos = np.asarray(pos, dtype=float)
    out = np.zeros_like(pos)
    if isinstance(space, Corridor):
        y = pos[..., 1]
        pen = np.abs(y) - space.half_width
        out[..., 1] = np.where(pen > 0, -space.wall_stiffness * pen * np.sign(y), 0.0)
    return out
