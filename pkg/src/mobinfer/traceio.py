"""Text file formats for contact traces, mobility traces, and frames.

Contact trace files are UTF-8 lines. `#`-prefixed lines are comments,
except headers of the form `#key=value` with keys `nodes`, `duration`
and `period`. Data lines are `<a> <b> <t_up> <t_down>`.

Mobility trace files use `#space ...`, `#dt <s>` and `#nodes <N>`
headers plus optional `#config key=value` lines, followed by
`<t> <id> <x> <y>` rows grouped by ascending time.

Numbers are written in the canonical format: decimal, at most six
fractional digits, no exponent. Files written this way round-trip
bit-identically through parse/serialize.
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import IO, Iterable, Iterator

import numpy as np

from .model import (
    ContactTrace,
    Corridor,
    MobilityTrace,
    Plane,
    Space,
    Torus,
    TraceError,
    canonical_events,
)

_TIME_TOL = 1e-6


def fmt_num(x: float) -> str:
    """Canonical number format: up to 6 fractional digits, no trailing zeros."""
    if not math.isfinite(x):
        raise ValueError(f"cannot serialize non-finite value {x!r}")
    s = format(float(x), ".6f").rstrip("0").rstrip(".")
    return "0" if s in ("", "-0") else s


def _lines(source: Iterable[str] | IO[str]) -> Iterator[tuple[int, str]]:
    for lineno, line in enumerate(source, start=1):
        yield lineno, line.rstrip("\n")


# ---------------------------------------------------------------------------
# Contact traces


def parse_contact_trace(source: Iterable[str] | IO[str]) -> tuple[ContactTrace, int]:
    """Parse a contact trace stream.

    Returns (trace, merged_count) where merged_count says how many
    same-pair intervals had to be merged because they touched or
    overlapped.
    """
    declared_nodes = None
    declared_duration = None
    period = 0.0
    raw: list[tuple[int, int, float, float]] = []
    for lineno, line in _lines(source):
        text = line.strip()
        if not text:
            continue
        if text.startswith("#"):
            body = text[1:].strip()
            if "=" in body:
                key, _, value = body.partition("=")
                key = key.strip()
                try:
                    if key == "nodes":
                        declared_nodes = int(value)
                    elif key == "duration":
                        declared_duration = float(value)
                    elif key == "period":
                        period = float(value)
                except ValueError:
                    raise TraceError(f"line {lineno}: bad header value {body!r}") from None
            continue
        tokens = text.split()
        if len(tokens) != 4:
            raise TraceError(f"line {lineno}: expected '<a> <b> <t_up> <t_down>', got {text!r}")
        try:
            a, b = int(tokens[0]), int(tokens[1])
            t_up, t_down = float(tokens[2]), float(tokens[3])
        except ValueError:
            raise TraceError(f"line {lineno}: malformed numbers in {text!r}") from None
        if a < 0 or b < 0:
            raise TraceError(f"line {lineno}: negative node id")
        if a == b:
            raise TraceError(f"line {lineno}: self-contact for node {a}")
        if not (math.isfinite(t_up) and math.isfinite(t_down)):
            raise TraceError(f"line {lineno}: non-finite event time")
        if t_up < 0:
            raise TraceError(f"line {lineno}: negative event time")
        if t_up >= t_down:
            raise TraceError(f"line {lineno}: rejected negative-duration event [{tokens[2]}, {tokens[3]}]")
        raw.append((a, b, t_up, t_down))

    labels: tuple[int, ...] | None = None
    if declared_nodes is not None:
        n_nodes = declared_nodes
        for a, b, _, _ in raw:
            if max(a, b) >= n_nodes:
                raise TraceError(f"node id {max(a, b)} outside declared nodes={n_nodes}")
    else:
        ids = sorted({i for a, b, _, _ in raw for i in (a, b)})
        remap = {orig: new for new, orig in enumerate(ids)}
        raw = [(remap[a], remap[b], up, down) for a, b, up, down in raw]
        n_nodes = len(ids)
        if remap != {i: i for i in ids}:
            labels = tuple(ids)

    events, merged, _ = canonical_events(raw)
    max_down = max((e.t_down for e in events), default=0.0)
    if declared_duration is not None:
        if declared_duration + 1e-9 < max_down:
            raise TraceError(
                f"declared duration {declared_duration} shorter than last event at {max_down}"
            )
        duration = declared_duration
    else:
        duration = max_down
    trace = ContactTrace(events, n_nodes, duration, period, labels)
    return trace, merged


def write_contact_trace(trace: ContactTrace, stream: IO[str]) -> None:
    stream.write(f"#nodes={trace.n_nodes}\n")
    stream.write(f"#duration={fmt_num(trace.duration)}\n")
    stream.write(f"#period={fmt_num(trace.sampling_period)}\n")
    for e in trace.events:
        stream.write(f"{e.a} {e.b} {fmt_num(e.t_up)} {fmt_num(e.t_down)}\n")


def read_contact_trace(path: str | Path) -> ContactTrace:
    with open(path, encoding="utf-8") as fh:
        trace, _ = parse_contact_trace(fh)
    return trace


def save_contact_trace(trace: ContactTrace, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        write_contact_trace(trace, fh)


# ---------------------------------------------------------------------------
# Mobility traces


def _parse_space(fields: list[str], lineno: int) -> Space:
    kind = fields[0] if fields else ""
    try:
        if kind == "plane" and len(fields) == 1:
            return Plane()
        if kind == "torus" and len(fields) == 3:
            return Torus(float(fields[1]), float(fields[2]))
        if kind == "corridor" and len(fields) == 4:
            return Corridor(float(fields[1]), int(fields[2]), int(fields[3]))
    except ValueError as exc:
        raise TraceError(f"line {lineno}: bad space header: {exc}") from None
    raise TraceError(f"line {lineno}: unrecognized space header {' '.join(fields)!r}")


def parse_mobility_trace(source: Iterable[str] | IO[str]) -> MobilityTrace:
    space: Space | None = None
    dt = None
    n_nodes = None
    config: dict[str, str] = {}
    rows: list[tuple[int, int, int, float, float]] = []  # (lineno, k, id, x, y)

    for lineno, line in _lines(source):
        text = line.strip()
        if not text:
            continue
        if text.startswith("#"):
            fields = text[1:].split()
            if not fields:
                continue
            if fields[0] == "space":
                space = _parse_space(fields[1:], lineno)
            elif fields[0] == "dt" and len(fields) == 2:
                dt = float(fields[1])
                if not dt > 0:
                    raise TraceError(f"line {lineno}: timestep must be positive")
            elif fields[0] == "nodes" and len(fields) == 2:
                n_nodes = int(fields[1])
            elif fields[0] == "config" and len(fields) >= 2:
                key, _, value = " ".join(fields[1:]).partition("=")
                config[key.strip()] = value.strip()
            continue
        if space is None or dt is None or n_nodes is None:
            raise TraceError(f"line {lineno}: data before #space/#dt/#nodes headers")
        tokens = text.split()
        if len(tokens) != 4:
            raise TraceError(f"line {lineno}: expected '<t> <id> <x> <y>', got {text!r}")
        try:
            t = float(tokens[0])
            node = int(tokens[1])
            x, y = float(tokens[2]), float(tokens[3])
        except ValueError:
            raise TraceError(f"line {lineno}: malformed numbers in {text!r}") from None
        if not (math.isfinite(x) and math.isfinite(y)):
            raise TraceError(f"line {lineno}: non-finite coordinate")
        k = int(round(t / dt))
        if abs(t - k * dt) > _TIME_TOL or k < 0:
            raise TraceError(f"line {lineno}: time {tokens[0]} is not a multiple of dt={dt}")
        if node < 0 or node >= n_nodes:
            raise TraceError(f"line {lineno}: node id {node} outside 0..{n_nodes - 1}")
        rows.append((lineno, k, node, x, y))

    if space is None or dt is None or n_nodes is None:
        raise TraceError("missing #space, #dt or #nodes header")
    if not rows:
        raise TraceError("mobility trace has no samples")

    n_samples = max(k for _, k, _, _, _ in rows) + 1
    positions = np.full((n_samples, n_nodes, 2), np.nan)
    for lineno, k, node, x, y in rows:
        if not np.isnan(positions[k, node, 0]):
            raise TraceError(f"line {lineno}: duplicate row for t={k * dt}, node {node}")
        positions[k, node] = (x, y)
    missing = np.argwhere(np.isnan(positions[:, :, 0]))
    if missing.size:
        k, node = missing[0]
        raise TraceError(f"missing node {node} at sample time {k * dt} (non-uniform trace)")
    return MobilityTrace(space, dt, positions, config)


def write_mobility_trace(m: MobilityTrace, stream: IO[str]) -> None:
    stream.write("#space " + " ".join(m.space.header_fields()) + "\n")
    stream.write(f"#dt {fmt_num(m.timestep)}\n")
    stream.write(f"#nodes {m.n_nodes}\n")
    for key, value in m.config.items():
        stream.write(f"#config {key}={value}\n")
    for k in range(m.n_samples):
        t = fmt_num(k * m.timestep)
        for node in range(m.n_nodes):
            x, y = m.positions[k, node]
            stream.write(f"{t} {node} {fmt_num(x)} {fmt_num(y)}\n")


def read_mobility_trace(path: str | Path) -> MobilityTrace:
    with open(path, encoding="utf-8") as fh:
        return parse_mobility_trace(fh)


def save_mobility_trace(m: MobilityTrace, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        write_mobility_trace(m, fh)


# ---------------------------------------------------------------------------
# Frames


def write_frames(
    m: MobilityTrace,
    stride: float,
    out_dir: str | Path,
    timeline=None,
    r: float | None = None,
) -> list[Path]:
    """Write one text frame per stride: positions plus active contact pairs.

    Contacts come from ``timeline`` (a LinkTimeline) when given,
    otherwise from proximity at range ``r``, otherwise omitted.
    """
    step = int(round(stride / m.timestep))
    if step < 1 or abs(stride - step * m.timestep) > _TIME_TOL:
        raise TraceError(f"stride {stride} is not a multiple of timestep {m.timestep}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for frame, k in enumerate(range(0, m.n_samples, step)):
        t = k * m.timestep
        pairs: list[tuple[int, int]] = []
        if timeline is not None:
            pairs = [p for p in timeline.pairs_with_events() if timeline.connected(*p, t)]
        elif r is not None:
            from .extract import snapshot_contacts

            pairs = sorted(snapshot_contacts(m.positions[k], r, m.space))
        path = out / f"frame_{frame:05d}.txt"
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"#t {fmt_num(t)}\n")
            for node in range(m.n_nodes):
                x, y = m.positions[k, node]
                fh.write(f"{node} {fmt_num(x)} {fmt_num(y)}\n")
            for a, b in pairs:
                fh.write(f"#contact {a} {b}\n")
        paths.append(path)
    return paths


def parse_frame(source: Iterable[str] | IO[str]) -> tuple[float, dict[int, tuple[float, float]], list[tuple[int, int]]]:
    """Read one frame file back: (time, id -> position, contact pairs)."""
    t = None
    positions: dict[int, tuple[float, float]] = {}
    contacts: list[tuple[int, int]] = []
    for lineno, line in _lines(source):
        text = line.strip()
        if not text:
            continue
        fields = text.split()
        if fields[0] == "#t":
            t = float(fields[1])
        elif fields[0] == "#contact":
            contacts.append((int(fields[1]), int(fields[2])))
        elif text.startswith("#"):
            continue
        else:
            if len(fields) != 3:
                raise TraceError(f"line {lineno}: expected '<id> <x> <y>'")
            positions[int(fields[0])] = (float(fields[1]), float(fields[2]))
    if t is None:
        raise TraceError("frame missing #t header")
    return t, positions, contacts
