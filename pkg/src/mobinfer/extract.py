"""Contact trace extraction from mobility, and event-time randomization.

Two measurement models are supported. Synchronous extraction takes
global snapshots of the connectivity graph every T seconds.
Asynchronous extraction gives every node its own periodic scan with a
random phase, the way real beaconing experiments collect contacts: a
link comes up at the first scan (by either node) that detects the
peer, and goes down at the first scan that fails to.

Randomization shifts every recorded event endpoint back by an
independent uniform draw from [0, 0.8T], modeling the fact that an
event recorded at time t really happened somewhere in (t - T, t].
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .model import ContactTrace, MobilityTrace, Space, TraceError, canonical_events
from .rwp import ConfigError
from .timeline import pair_arrays


class Mode(enum.Enum):
    SYNCHRONOUS = "sync"
    ASYNCHRONOUS = "async"


@dataclass(frozen=True)
class SamplingConfig:
    """How contacts are measured from a mobility trace."""

    mode: Mode
    period: float
    range: float
    seed: int = 0

    def __post_init__(self):
        if not self.period > 0:
            raise ConfigError("sampling period must be positive")
        if not self.range > 0:
            raise ConfigError("transmission range must be positive")


def snapshot_contacts(positions: np.ndarray, r: float, space: Space) -> set[tuple[int, int]]:
    """Canonical pairs within transmission range (inclusive) of each other."""
    positions = np.asarray(positions, dtype=float)
    i_idx, j_idx = pair_arrays(positions.shape[0])
    d = space.distance(positions[i_idx], positions[j_idx])
    hit = d <= r
    return {(int(i), int(j)) for i, j in zip(i_idx[hit], j_idx[hit])}


def _stride(m: MobilityTrace, period: float) -> int:
    k = int(round(period / m.timestep))
    if k < 1 or abs(period - k * m.timestep) > 1e-9:
        raise ConfigError(
            f"sampling period {period} must be a multiple of the mobility timestep {m.timestep}"
        )
    return k


def _in_range_matrix(m: MobilityTrace, sample_idx: np.ndarray, r: float) -> np.ndarray:
    """Boolean (len(sample_idx), n_pairs) in-range matrix, chunked over time."""
    i_idx, j_idx = pair_arrays(m.n_nodes)
    out = np.empty((len(sample_idx), len(i_idx)), dtype=bool)
    chunk = max(1, int(2e6 // max(1, len(i_idx))))
    for s in range(0, len(sample_idx), chunk):
        block = m.positions[sample_idx[s : s + chunk]]
        d = m.space.distance(block[:, i_idx], block[:, j_idx])
        out[s : s + chunk] = d <= r
    return out


def _events_from_scans(
    scan_times: np.ndarray, in_range: np.ndarray, a: int, b: int
) -> list[tuple[int, int, float, float]]:
    """Turn one pair's scan-time detection sequence into contact events.

    A contact opens at the first detecting scan after an absence and
    closes at the first failing scan; contacts still open at the last
    scan close there (zero-length results are discarded upstream).
    """
    padded = np.concatenate(([False], in_range, [False]))
    flips = np.flatnonzero(padded[1:] != padded[:-1])
    events = []
    last = len(scan_times) - 1
    for k in range(0, len(flips), 2):
        up = scan_times[flips[k]]
        down = scan_times[min(flips[k + 1], last)]
        events.append((a, b, float(up), float(down)))
    return events


def extract_synchronous(m: MobilityTrace, cfg: SamplingConfig) -> ContactTrace:
    """Contacts from global connectivity snapshots every cfg.period seconds."""
    if cfg.mode is not Mode.SYNCHRONOUS:
        raise ConfigError("extract_synchronous needs a synchronous sampling config")
    stride = _stride(m, cfg.period)
    sample_idx = np.arange(0, m.n_samples, stride)
    snap_times = sample_idx * m.timestep
    in_range = _in_range_matrix(m, sample_idx, cfg.range)
    i_idx, j_idx = pair_arrays(m.n_nodes)
    raw = []
    for p in range(len(i_idx)):
        col = in_range[:, p]
        if col.any():
            raw.extend(_events_from_scans(snap_times, col, int(i_idx[p]), int(j_idx[p])))
    return ContactTrace.from_events(raw, m.n_nodes, m.duration, cfg.period)


def extract_asynchronous(m: MobilityTrace, cfg: SamplingConfig) -> ContactTrace:
    """Contacts from per-node periodic scans with random phases.

    Phases are drawn uniformly in [0, T) from cfg.seed and snapped down
    to the mobility grid; the pair's event times then follow from the
    merged scan sequence of both nodes.
    """
    if cfg.mode is not Mode.ASYNCHRONOUS:
        raise ConfigError("extract_asynchronous needs an asynchronous sampling config")
    stride = _stride(m, cfg.period)
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    phase_idx = np.floor(rng.random(m.n_nodes) * cfg.period / m.timestep).astype(int)
    phase_idx = np.minimum(phase_idx, stride - 1)

    scan_indices = [np.arange(phase_idx[n], m.n_samples, stride) for n in range(m.n_nodes)]
    scan_mask = np.zeros((m.n_nodes, m.n_samples), dtype=bool)
    for n, idx in enumerate(scan_indices):
        scan_mask[n, idx] = True
    union_idx = np.flatnonzero(scan_mask.any(axis=0))
    pos_in_union = np.full(m.n_samples, -1)
    pos_in_union[union_idx] = np.arange(len(union_idx))

    in_range = _in_range_matrix(m, union_idx, cfg.range)
    union_times = union_idx * m.timestep
    i_idx, j_idx = pair_arrays(m.n_nodes)
    raw = []
    for p in range(len(i_idx)):
        a, b = int(i_idx[p]), int(j_idx[p])
        pair_scans = np.flatnonzero(scan_mask[a] | scan_mask[b])
        rows = pos_in_union[pair_scans]
        col = in_range[rows, p]
        if col.any():
            raw.extend(_events_from_scans(union_times[rows], col, a, b))
    return ContactTrace.from_events(raw, m.n_nodes, m.duration, cfg.period)


def extract_contacts(m: MobilityTrace, cfg: SamplingConfig) -> ContactTrace:
    if cfg.mode is Mode.SYNCHRONOUS:
        return extract_synchronous(m, cfg)
    return extract_asynchronous(m, cfg)


def randomize_trace(trace: ContactTrace, seed: int) -> ContactTrace:
    """Shift every event endpoint back by an independent U[0, 0.8T] draw.

    Shifted times are clamped at 0; intervals that end up inverted are
    dropped and ones that touch or overlap are merged, so the result
    still satisfies all contact-trace invariants.
    """
    period = trace.sampling_period
    if period <= 0:
        raise TraceError("randomization is undefined for exact traces (period=0)")
    rng = np.random.Generator(np.random.PCG64(seed))
    raw = []
    for e in trace.events:
        u_up, u_down = rng.random(2) * 0.8 * period
        raw.append((e.a, e.b, e.t_up - u_up, e.t_down - u_down))
    events, _, _ = canonical_events(raw)
    return ContactTrace(events, trace.n_nodes, trace.duration, period, trace.labels)
