"""Per-pair link timeline answering past/future contact queries.

For every canonical node pair the timeline stores the sorted link-up
and link-down instants and answers, for any time t, whether the pair
is connected plus the four boundary queries: previous/next link-up and
previous/next link-down. Contacts are half-open [t_up, t_down): a link
is up at its up-instant and already down at its down-instant.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ContactTrace


def pair_arrays(n_nodes: int) -> tuple[np.ndarray, np.ndarray]:
    """Index arrays (i, j) enumerating all canonical pairs, i < j."""
    return np.triu_indices(n_nodes, k=1)


def pair_index(i: int, j: int, n_nodes: int) -> int:
    """Position of pair (i, j), i < j, in the canonical enumeration."""
    if not 0 <= i < j < n_nodes:
        raise ValueError(f"invalid pair ({i}, {j}) for {n_nodes} nodes")
    return i * (2 * n_nodes - i - 1) // 2 + (j - i - 1)


@dataclass(frozen=True)
class LinkState:
    """Snapshot of one pair's link at a query time.

    Boundary fields are None when the trace holds no such event;
    p_* <= t <= n_* whenever present.
    """

    connected: bool
    p_up: float | None
    n_up: float | None
    p_down: float | None
    n_down: float | None


@dataclass(frozen=True, eq=False)
class TimelineGrid:
    """Timeline queries evaluated on a fixed time grid, for all pairs.

    gap_to_contact[k, p] = min(next link-up - t, t - previous link-down)
    at t = times[k]; +inf when the pair has no such events (only
    meaningful while not connected). gap_in_contact[k, p] =
    min(t - current link-up, current link-down - t) while connected,
    else 0.
    """

    times: np.ndarray
    pair_i: np.ndarray
    pair_j: np.ndarray
    connected: np.ndarray
    gap_to_contact: np.ndarray
    gap_in_contact: np.ndarray


class LinkTimeline:
    """Binary-searchable per-pair contact intervals of a ContactTrace."""

    def __init__(self, trace: ContactTrace):
        self.n_nodes = trace.n_nodes
        self.duration = trace.duration
        self._events: dict[tuple[int, int], tuple[np.ndarray, np.ndarray]] = {}
        for pair, events in trace.by_pair().items():
            ups = np.array([e.t_up for e in events])
            downs = np.array([e.t_down for e in events])
            self._events[pair] = (ups, downs)

    def pairs_with_events(self) -> list[tuple[int, int]]:
        return sorted(self._events)

    def intervals(self, i: int, j: int) -> list[tuple[float, float]]:
        ups, downs = self._pair(i, j)
        return list(zip(ups.tolist(), downs.tolist()))

    def _pair(self, i: int, j: int) -> tuple[np.ndarray, np.ndarray]:
        if i == j:
            raise ValueError(f"link queries need two distinct nodes, got ({i}, {j})")
        if i > j:
            i, j = j, i
        if not (0 <= i and j < self.n_nodes):
            raise ValueError(f"pair ({i}, {j}) outside 0..{self.n_nodes - 1}")
        empty = np.empty(0)
        return self._events.get((i, j), (empty, empty))

    def connected(self, i: int, j: int, t: float) -> bool:
        ups, downs = self._pair(i, j)
        k = int(np.searchsorted(ups, t, side="right")) - 1
        return k >= 0 and t < downs[k]

    def queries(self, i: int, j: int, t: float) -> LinkState:
        """The four boundary queries plus connectivity at time t."""
        ups, downs = self._pair(i, j)
        ku = int(np.searchsorted(ups, t, side="right"))
        kd = int(np.searchsorted(downs, t, side="right"))
        p_up = float(ups[ku - 1]) if ku > 0 else None
        n_up = float(ups[ku]) if ku < len(ups) else None
        p_down = float(downs[kd - 1]) if kd > 0 else None
        n_down = float(downs[kd]) if kd < len(downs) else None
        connected = ku > 0 and t < downs[ku - 1]
        return LinkState(bool(connected), p_up, n_up, p_down, n_down)

    def grid(self, times: np.ndarray) -> TimelineGrid:
        """Evaluate connectivity and event gaps on a time grid for all pairs."""
        times = np.asarray(times, dtype=float)
        n = self.n_nodes
        pair_i, pair_j = pair_arrays(n)
        n_pairs = len(pair_i)
        k_times = len(times)
        connected = np.zeros((k_times, n_pairs), dtype=bool)
        gap_to_contact = np.full((k_times, n_pairs), np.inf)
        gap_in_contact = np.zeros((k_times, n_pairs))
        for (i, j), (ups, downs) in self._events.items():
            p = pair_index(i, j, n)
            ku = np.searchsorted(ups, times, side="right")
            kd = np.searchsorted(downs, times, side="right")
            prev_up = np.where(ku > 0, ups[np.maximum(ku - 1, 0)], -np.inf)
            next_up = np.where(ku < len(ups), ups[np.minimum(ku, len(ups) - 1)], np.inf)
            prev_down = np.where(kd > 0, downs[np.maximum(kd - 1, 0)], -np.inf)
            next_down = np.where(kd < len(downs), downs[np.minimum(kd, len(downs) - 1)], np.inf)
            conn = (ku > 0) & (times < np.where(ku > 0, downs[np.maximum(ku - 1, 0)], -np.inf))
            connected[:, p] = conn
            gap_to_contact[:, p] = np.where(
                conn, 0.0, np.minimum(next_up - times, times - prev_down)
            )
            gap_in_contact[:, p] = np.where(
                conn, np.minimum(times - prev_up, next_down - times), 0.0
            )
        return TimelineGrid(times, pair_i, pair_j, connected, gap_to_contact, gap_in_contact)


def build_link_timeline(trace: ContactTrace) -> LinkTimeline:
    return LinkTimeline(trace)


def link_queries(tl: LinkTimeline, i: int, j: int, t: float) -> LinkState:
    return tl.queries(i, j, t)
