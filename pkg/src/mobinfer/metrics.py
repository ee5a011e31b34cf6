"""Evaluation metrics: mobility accuracy, contact fidelity, inter-contact
statistics, and the kinematic/contact constraint checker.

Mobility-vs-mobility metrics (pairwise distance correlation, mean
distance error) need the ground truth and therefore only apply to
synthetic scenarios; contacts-vs-contacts metrics work for any trace.
Per-time correlation values can be undefined (fewer than two samples
or zero variance); they are reported as NaN, never as 0.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
import scipy.stats

from .model import ContactTrace, MobilityTrace, Space, TraceError
from .timeline import LinkTimeline, pair_arrays


@dataclass(frozen=True, eq=False)
class AccuracySeries:
    """Per-time accuracy of an inferred mobility against the original."""

    times: np.ndarray
    correlation: np.ndarray  # Pearson r over non-reference pairwise distances
    mde: np.ndarray  # mean distance error over non-reference nodes
    aggregate_correlation: float  # pooled over all (time, pair) samples


@dataclass(frozen=True, eq=False)
class ContactDiffSeries:
    """Added/missed contacts of an inferred mobility vs a contact trace.

    Percentages are relative to the number of contacts the trace holds
    at each time (NaN when there are none; added may exceed 100).
    """

    times: np.ndarray
    added_pct: np.ndarray
    missed_pct: np.ndarray
    added_avg: float
    missed_avg: float


class ViolationKind(enum.Enum):
    SPEED = "speed"
    IN_CONTACT = "in_contact"
    NOT_IN_CONTACT = "not_in_contact"


@dataclass(frozen=True)
class Violation:
    kind: ViolationKind
    subject: tuple[int, ...]  # (node,) for speed, (i, j) otherwise
    time: float
    magnitude: float  # meters beyond the unslackened bound


@dataclass(frozen=True)
class ConstraintReport:
    violations: tuple[Violation, ...]
    slack: float

    @property
    def empty(self) -> bool:
        return not self.violations

    def count(self, kind: ViolationKind) -> int:
        return sum(1 for v in self.violations if v.kind is kind)


@dataclass(frozen=True, eq=False)
class IctDistribution:
    """Inter-contact gaps: one sample per pause between same-pair contacts."""

    samples: tuple[tuple[float, float], ...]  # (time of link-down, gap length)
    durations: np.ndarray  # sorted gap lengths
    cdf: np.ndarray  # empirical CDF value at each sorted gap


# ---------------------------------------------------------------------------
# Mobility vs mobility


def _check_aligned(orig: MobilityTrace, inf: MobilityTrace) -> None:
    if orig.n_nodes != inf.n_nodes:
        raise TraceError("traces have different node counts")
    if orig.n_samples != inf.n_samples or abs(orig.timestep - inf.timestep) > 1e-9:
        raise TraceError("traces are not sampled on the same time grid")
    if orig.space != inf.space:
        raise TraceError("traces live in different spaces")


def _window(times: np.ndarray, t_min: float, t_max: float | None) -> np.ndarray:
    hi = times[-1] if t_max is None else t_max
    return np.flatnonzero((times >= t_min - 1e-9) & (times <= hi + 1e-9))


def _pair_distances(m: MobilityTrace, idx: np.ndarray, pair_i, pair_j) -> np.ndarray:
    out = np.empty((len(idx), len(pair_i)))
    chunk = max(1, int(2e6 // max(1, len(pair_i))))
    for s in range(0, len(idx), chunk):
        block = m.positions[idx[s : s + chunk]]
        out[s : s + chunk] = m.space.distance(block[:, pair_i], block[:, pair_j])
    return out


def _rowwise_pearson(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    xc = x - x.mean(axis=1, keepdims=True)
    yc = y - y.mean(axis=1, keepdims=True)
    num = (xc * yc).sum(axis=1)
    den = np.sqrt((xc**2).sum(axis=1) * (yc**2).sum(axis=1))
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(den > 0, num / den, np.nan)


def pairwise_correlation(
    orig: MobilityTrace,
    inf: MobilityTrace,
    refs: frozenset[int] | set[int] = frozenset(),
    t_min: float = 0.0,
    t_max: float | None = None,
) -> tuple[np.ndarray, np.ndarray, float]:
    """Pearson correlation of pairwise distances, original vs inferred.

    Only pairs whose two nodes are both non-reference count. Returns
    (times, per-time correlation, pooled aggregate correlation); the
    aggregate pools every (time, pair) distance sample in the window.
    """
    _check_aligned(orig, inf)
    pair_i, pair_j = pair_arrays(orig.n_nodes)
    keep = np.array([i not in refs and j not in refs for i, j in zip(pair_i, pair_j)])
    if keep.sum() < 2:
        raise TraceError("need at least two non-reference pairs for correlation")
    idx = _window(orig.times, t_min, t_max)
    d_orig = _pair_distances(orig, idx, pair_i[keep], pair_j[keep])
    d_inf = _pair_distances(inf, idx, pair_i[keep], pair_j[keep])
    per_time = _rowwise_pearson(d_orig, d_inf)
    flat = _rowwise_pearson(d_orig.reshape(1, -1), d_inf.reshape(1, -1))
    return orig.times[idx], per_time, float(flat[0])


def mean_distance_error(
    orig: MobilityTrace,
    inf: MobilityTrace,
    refs: frozenset[int] | set[int] = frozenset(),
    t_min: float = 0.0,
    t_max: float | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Mean distance between true and inferred positions of non-reference nodes."""
    _check_aligned(orig, inf)
    nodes = np.array([i for i in range(orig.n_nodes) if i not in refs], dtype=int)
    if not len(nodes):
        raise TraceError("mean distance error undefined: every node is a reference")
    idx = _window(orig.times, t_min, t_max)
    d = orig.space.distance(orig.positions[idx][:, nodes], inf.positions[idx][:, nodes])
    return orig.times[idx], d.mean(axis=1)


def evaluate_accuracy(
    orig: MobilityTrace,
    inf: MobilityTrace,
    refs: frozenset[int] | set[int] = frozenset(),
    t_min: float = 0.0,
    t_max: float | None = None,
) -> AccuracySeries:
    times, corr, aggregate = pairwise_correlation(orig, inf, refs, t_min, t_max)
    _, mde = mean_distance_error(orig, inf, refs, t_min, t_max)
    return AccuracySeries(times, corr, mde, aggregate)


def pooled_pair_distances(
    orig: MobilityTrace,
    inf: MobilityTrace,
    refs: frozenset[int] | set[int] = frozenset(),
    t_min: float = 0.0,
    t_max: float | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Raw (original, inferred) distance samples over all times and pairs.

    The material behind the aggregate correlation; emitted unbinned so
    external tools can render the scatter however they like.
    """
    _check_aligned(orig, inf)
    pair_i, pair_j = pair_arrays(orig.n_nodes)
    keep = np.array([i not in refs and j not in refs for i, j in zip(pair_i, pair_j)])
    idx = _window(orig.times, t_min, t_max)
    d_orig = _pair_distances(orig, idx, pair_i[keep], pair_j[keep])
    d_inf = _pair_distances(inf, idx, pair_i[keep], pair_j[keep])
    return d_orig.ravel(), d_inf.ravel()


# ---------------------------------------------------------------------------
# Contacts vs contacts


def contact_diff(
    orig_trace: ContactTrace,
    inf_mobility: MobilityTrace,
    r: float,
    t_min: float = 0.0,
    t_max: float | None = None,
) -> ContactDiffSeries:
    """Added and missed contacts of an inferred mobility against a trace.

    At each inferred sample time, a pair in contact per the trace but
    beyond range r in the mobility counts as missed; a pair within
    range but not in contact counts as added. Both are percentages of
    the pairs in contact at that time.
    """
    if orig_trace.n_nodes != inf_mobility.n_nodes:
        raise TraceError("trace and mobility have different node counts")
    times_all = inf_mobility.times
    hi = min(orig_trace.duration, times_all[-1] if t_max is None else t_max)
    idx = _window(times_all, t_min, hi)
    times = times_all[idx]
    pair_i, pair_j = pair_arrays(inf_mobility.n_nodes)
    grid = LinkTimeline(orig_trace).grid(times)
    d = _pair_distances(inf_mobility, idx, pair_i, pair_j)
    in_range = d <= r
    base = grid.connected.sum(axis=1).astype(float)
    missed = (grid.connected & ~in_range).sum(axis=1)
    added = (~grid.connected & in_range).sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        missed_pct = np.where(base > 0, 100.0 * missed / base, np.nan)
        added_pct = np.where(base > 0, 100.0 * added / base, np.nan)
    added_avg = float(np.nanmean(added_pct)) if np.isfinite(added_pct).any() else math.nan
    missed_avg = float(np.nanmean(missed_pct)) if np.isfinite(missed_pct).any() else math.nan
    return ContactDiffSeries(times, added_pct, missed_pct, added_avg, missed_avg)


def ict_distribution(trace: ContactTrace) -> IctDistribution:
    """Empirical distribution of gaps between consecutive same-pair contacts."""
    samples = []
    for _, events in trace.by_pair().items():
        for prev, nxt in zip(events, events[1:]):
            samples.append((prev.t_down, nxt.t_up - prev.t_down))
    samples.sort()
    durations = np.sort(np.array([g for _, g in samples]))
    cdf = np.arange(1, len(durations) + 1) / len(durations) if len(durations) else np.empty(0)
    return IctDistribution(tuple(samples), durations, cdf)


def ks_statistic(a: np.ndarray, b: np.ndarray) -> float:
    """Two-sample Kolmogorov-Smirnov statistic between sample sets."""
    if not (len(a) and len(b)):
        raise TraceError("KS statistic needs non-empty samples on both sides")
    return float(scipy.stats.ks_2samp(a, b).statistic)


# ---------------------------------------------------------------------------
# Constraint checking


def check_constraints(
    m: MobilityTrace,
    trace: ContactTrace,
    r: float,
    v_max: float,
    slack: float = 0.0,
) -> ConstraintReport:
    """Check a mobility trace against a contact trace's kinematic bounds.

    Three violation kinds are flagged, each within ``slack`` meters:
    per-step displacements beyond v_max * dt; in-contact pairs outside
    [r - 2 v_max * gap, r] where gap is the time from the nearest edge
    of the running contact; and out-of-contact pairs outside
    [r, r + 2 v_max * gap] where gap is the time to the nearest contact
    (that upper bound relaxes to infinity for pairs that never meet).
    """
    if m.n_nodes != trace.n_nodes:
        raise TraceError("mobility and trace have different node counts")
    idx = _window(m.times, 0.0, min(trace.duration, m.duration))
    times = m.times[idx]
    violations: list[Violation] = []

    # speed bound on consecutive samples
    steps = m.space.distance(m.positions[idx[:-1]], m.positions[idx[1:]])
    allowed = v_max * m.timestep
    for k, node in np.argwhere(steps > allowed + slack):
        violations.append(
            Violation(ViolationKind.SPEED, (int(node),), float(times[k + 1]),
                      float(steps[k, node] - allowed))
        )

    pair_i, pair_j = pair_arrays(m.n_nodes)
    grid = LinkTimeline(trace).grid(times)
    d = _pair_distances(m, idx, pair_i, pair_j)

    low_in = r - 2 * v_max * grid.gap_in_contact
    bad = grid.connected & ((d < low_in - slack) | (d > r + slack))
    for k, p in np.argwhere(bad):
        mag = max(low_in[k, p] - d[k, p], d[k, p] - r)
        violations.append(
            Violation(ViolationKind.IN_CONTACT, (int(pair_i[p]), int(pair_j[p])),
                      float(times[k]), float(mag))
        )

    with np.errstate(invalid="ignore"):
        high_out = r + 2 * v_max * grid.gap_to_contact  # inf when never in contact
        bad = ~grid.connected & ((d < r - slack) | (d > high_out + slack))
    for k, p in np.argwhere(bad):
        mag = max(r - d[k, p], d[k, p] - high_out[k, p])
        violations.append(
            Violation(ViolationKind.NOT_IN_CONTACT, (int(pair_i[p]), int(pair_j[p])),
                      float(times[k]), float(mag))
        )

    violations.sort(key=lambda v: (v.time, v.kind.value, v.subject))
    return ConstraintReport(tuple(violations), slack)
