"""Command-line pipeline: generate, extract, randomize, infer, evaluate.

Every subcommand reads and writes the text formats of
:mod:`mobinfer.traceio`. Outputs are pure functions of inputs, flags
and seeds, so re-running a command reproduces its files bit for bit.
Exit codes: 0 success, 1 usage error, 2 data error.

The default output directory is the MOBINFER_OUT environment variable
(falling back to the working directory) whenever an --out/--out-dir
flag is omitted.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from pathlib import Path

import numpy as np

from .engine import EngineError, InferenceConfig, default_step, infer
from .experiment import ExperimentSpec, Scenario, run_experiment
from .extract import Mode, SamplingConfig, extract_contacts, randomize_trace
from .forces import ForceParams
from .metrics import (
    ViolationKind,
    check_constraints,
    contact_diff,
    evaluate_accuracy,
    ict_distribution,
    ks_statistic,
    pooled_pair_distances,
)
from .model import Corridor, Plane, Space, Torus, TraceError
from .rwp import ConfigError, RwpConfig, rwp_generate
from .timeline import LinkTimeline
from .traceio import (
    fmt_num,
    read_contact_trace,
    read_mobility_trace,
    save_contact_trace,
    save_mobility_trace,
    write_frames,
)


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


# ---------------------------------------------------------------------------
# small helpers


def _fmt_val(v: float) -> str:
    return fmt_num(v) if math.isfinite(v) else "nan"


def _out_path(value: str | None, default_name: str) -> Path:
    if value:
        return Path(value)
    return Path(os.environ.get("MOBINFER_OUT", ".")) / default_name


def _out_dir(value: str | None, default_name: str) -> Path:
    path = _out_path(value, default_name)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _parse_ids(text: str) -> frozenset[int]:
    """Node id list like '0-9,12,40'."""
    ids: set[int] = set()
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part:
            lo, _, hi = part.partition("-")
            ids.update(range(int(lo), int(hi) + 1))
        else:
            ids.add(int(part))
    return frozenset(ids)


def _parse_dims(text: str) -> tuple[float, float]:
    w, _, h = text.lower().partition("x")
    return float(w), float(h)


def _parse_space_flag(text: str) -> Space:
    kind, _, rest = text.partition(":")
    if kind == "plane":
        return Plane()
    if kind == "torus":
        w, h = _parse_dims(rest)
        return Torus(w, h)
    if kind == "corridor":
        hw, head, tail = rest.split(":")
        return Corridor(float(hw), int(head), int(tail))
    raise _UsageError(f"unknown space {text!r} (use plane, torus:WxH or corridor:HW:HEAD:TAIL)")


def _read_config_file(path: str | None) -> dict[str, str]:
    if not path:
        return {}
    values = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise TraceError(f"config line is not key=value: {line!r}")
            values[key.strip()] = value.strip()
    return values


def _resolve(flag_value, config: dict[str, str], key: str, default, cast=float):
    """Precedence: explicit flag > config file entry > built-in default."""
    if flag_value is not None:
        return flag_value
    if key in config:
        return cast(config[key])
    return default


def _write_series(path: Path, comments: list[str], times, values) -> Path:
    with open(path, "w", encoding="utf-8") as fh:
        for c in comments:
            fh.write(f"#{c}\n")
        for t, v in zip(np.asarray(times), np.asarray(values)):
            if np.isfinite(v):
                fh.write(f"{fmt_num(float(t))} {fmt_num(float(v))}\n")
    return path


def _emit_summary(path: Path, items: dict[str, float]) -> None:
    lines = [f"{key}={_fmt_val(value)}" for key, value in items.items()]
    for line in lines:
        print(line)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# subcommands


def _cmd_generate(args) -> None:
    w, h = _parse_dims(args.torus)
    cfg = RwpConfig(
        n_nodes=args.nodes,
        space=Torus(w, h),
        v_min=args.vmin,
        v_max=args.vmax,
        duration=args.duration,
        timestep=args.dt,
        seed=args.seed,
        pause=args.pause,
    )
    m = rwp_generate(cfg)
    out = _out_path(args.out, "mobility.dat")
    save_mobility_trace(m, out)
    print(f"wrote {out}: {m.n_nodes} nodes, {m.n_samples} sample times")


def _cmd_extract(args) -> None:
    m = read_mobility_trace(args.mobility)
    cfg = SamplingConfig(Mode(args.mode), args.period, args.range, seed=args.seed)
    trace = extract_contacts(m, cfg)
    out = _out_path(args.out, "contacts.dat")
    save_contact_trace(trace, out)
    print(f"wrote {out}: {len(trace.events)} events over {fmt_num(trace.duration)} s")


def _cmd_randomize(args) -> None:
    trace = read_contact_trace(args.trace)
    shifted = randomize_trace(trace, args.seed)
    out = _out_path(args.out, "contacts_randomized.dat")
    save_contact_trace(shifted, out)
    print(f"wrote {out}: {len(shifted.events)} events")


def _infer_config(args, trace) -> InferenceConfig:
    config = _read_config_file(args.config)
    ref_ids = _parse_ids(args.refs) if args.refs else frozenset()
    reference = read_mobility_trace(args.ref_mobility) if args.ref_mobility else None
    if ref_ids and reference is None:
        raise _UsageError("--refs needs --ref-mobility for the ground-truth trajectories")

    init_from = read_mobility_trace(args.init_from) if args.init_from else None
    if args.space is not None:
        space = _parse_space_flag(args.space)
    elif "space" in config:
        space = _parse_space_flag(config["space"])
    elif reference is not None:
        space = reference.space
    elif init_from is not None:
        space = init_from.space
    else:
        space = Torus(1000.0, 1000.0)

    r = _resolve(args.range, config, "r", 100.0)
    v_max = _resolve(args.vmax, config, "v_max", 10.0)
    overrides = {}
    for flag, key in (
        (args.K, "K"),
        (args.G, "G"),
        (args.alpha, "alpha"),
        (args.eps0, "eps0"),
        (args.tau, "tau"),
        (args.dmax, "d_max"),
    ):
        value = _resolve(flag, config, key, None)
        if value is not None:
            overrides[key] = value
    params = ForceParams.defaults(r=r, v_max=v_max, **overrides)
    drag_default = 1.0 if isinstance(space, Plane) else 0.0
    params = params.with_drag(_resolve(args.drag, config, "D", drag_default))
    if isinstance(space, Corridor) and args.wall_stiffness is not None:
        space = Corridor(space.half_width, space.head, space.tail, args.wall_stiffness)

    if args.init_random and init_from is not None:
        raise _UsageError("give either --init-from or --init-random, not both")
    if not args.init_random and init_from is None:
        raise _UsageError("initial positions needed: --init-from FILE or --init-random")
    return InferenceConfig(
        space=space,
        params=params,
        dt=_resolve(args.dt, config, "dt", default_step(trace)),
        reference_ids=ref_ids,
        reference=reference,
        initial_positions=None if args.init_random else init_from.positions[0],
        init_seed=args.seed if args.init_random else None,
        speed_relax_until=_resolve(args.relax_until, config, "speed_relax_until", 0.0),
        anchor_head_tail=args.anchor_head_tail,
    )


def _cmd_infer(args) -> None:
    trace = read_contact_trace(args.trace)
    cfg = _infer_config(args, trace)
    inferred = infer(trace, cfg)
    out = _out_path(args.out, "inferred.dat")
    save_mobility_trace(inferred, out)
    print(f"wrote {out}: {inferred.n_nodes} nodes, {inferred.n_samples} sample times")


def _eval_window(args, duration: float) -> float | None:
    return None if args.full_window else 0.9 * duration


def _cmd_eval_mobility(args) -> None:
    orig = read_mobility_trace(args.orig)
    inferred = read_mobility_trace(args.inferred)
    refs = _parse_ids(args.refs) if args.refs else frozenset()
    t_max = _eval_window(args, orig.duration)
    acc = evaluate_accuracy(orig, inferred, refs, 0.0, t_max)
    out = _out_dir(args.out_dir, "eval-mobility")
    _write_series(out / "correlation.dat", ["t correlation"], acc.times, acc.correlation)
    _write_series(out / "mde.dat", ["t mean_distance_error"], acc.times, acc.mde)
    if args.scatter or args.plot:
        d_orig, d_inf = pooled_pair_distances(orig, inferred, refs, 0.0, t_max)
        if args.scatter:
            with open(out / "scatter.dat", "w", encoding="utf-8") as fh:
                fh.write("#original_distance inferred_distance\n")
                for a, b in zip(d_orig, d_inf):
                    fh.write(f"{fmt_num(float(a))} {fmt_num(float(b))}\n")
        if args.plot:
            from . import plotting

            plotting.plot_scatter(
                out / "scatter.png", d_orig, d_inf, "original distance (m)", "inferred distance (m)"
            )
    if args.plot:
        from . import plotting

        plotting.plot_series(out / "correlation.png", acc.times,
                             [(acc.correlation, "correlation")], ylabel="pairwise correlation")
        plotting.plot_series(out / "mde.png", acc.times,
                             [(acc.mde, "mde")], ylabel="mean distance error (m)")
    _emit_summary(
        out / "summary.dat",
        {
            "aggregate_correlation": acc.aggregate_correlation,
            "correlation_time_avg": float(np.nanmean(acc.correlation)),
            "mde_time_avg": float(acc.mde.mean()),
            "mde_final": float(acc.mde[-1]),
        },
    )


def _cmd_eval_contacts(args) -> None:
    trace = read_contact_trace(args.trace)
    m = read_mobility_trace(args.mobility)
    t_max = _eval_window(args, min(trace.duration, m.duration))
    diff = contact_diff(trace, m, args.range, 0.0, t_max)
    out = _out_dir(args.out_dir, "eval-contacts")
    _write_series(out / "added.dat", ["t added_pct"], diff.times, diff.added_pct)
    _write_series(out / "missed.dat", ["t missed_pct"], diff.times, diff.missed_pct)
    if args.plot:
        from . import plotting

        plotting.plot_series(
            out / "contact_diff.png",
            diff.times,
            [(diff.added_pct, "added"), (diff.missed_pct, "missed")],
            ylabel="% of current contacts",
        )
    _emit_summary(
        out / "summary.dat", {"added_avg": diff.added_avg, "missed_avg": diff.missed_avg}
    )


def _cmd_ict(args) -> None:
    trace = read_contact_trace(args.trace)
    dist = ict_distribution(trace)
    out = _out_dir(args.out_dir, "ict")
    with open(out / "ict_samples.dat", "w", encoding="utf-8") as fh:
        fh.write("#t gap\n")
        for t, gap in dist.samples:
            fh.write(f"{fmt_num(t)} {fmt_num(gap)}\n")
    _write_series(out / "ict_cdf.dat", ["gap cdf"], dist.durations, dist.cdf)
    summary: dict[str, float] = {"samples": float(len(dist.durations))}
    curves = [(dist.durations, dist.cdf, "trace")]
    if args.compare:
        other = ict_distribution(read_contact_trace(args.compare))
        _write_series(out / "ict_cdf_compare.dat", ["gap cdf"], other.durations, other.cdf)
        summary["ks"] = ks_statistic(dist.durations, other.durations)
        curves.append((other.durations, other.cdf, "compare"))
    if args.plot:
        from . import plotting

        plotting.plot_cdfs(out / "ict_cdf.png", curves)
    _emit_summary(out / "summary.dat", summary)


def _cmd_check(args) -> None:
    m = read_mobility_trace(args.mobility)
    trace = read_contact_trace(args.trace)
    slack = args.slack
    if slack is None:
        # event times are only known to the sampling period
        slack = 2 * args.vmax * trace.sampling_period
    report = check_constraints(m, trace, args.range, args.vmax, slack)
    out = _out_path(args.out, "violations.dat")
    with open(out, "w", encoding="utf-8") as fh:
        fh.write("#kind time subject magnitude\n")
        for v in report.violations:
            subject = ",".join(str(s) for s in v.subject)
            fh.write(f"{v.kind.value} {fmt_num(v.time)} {subject} {fmt_num(v.magnitude)}\n")
    _emit_summary(
        out.with_name("check_summary.dat"),
        {
            "slack": slack,
            "violations": float(len(report.violations)),
            "speed": float(report.count(ViolationKind.SPEED)),
            "in_contact": float(report.count(ViolationKind.IN_CONTACT)),
            "not_in_contact": float(report.count(ViolationKind.NOT_IN_CONTACT)),
        },
    )


def _cmd_experiment(args) -> None:
    w, h = _parse_dims(args.torus)
    config = _read_config_file(args.config)
    overrides = []
    for flag, key in (
        (args.K, "K"),
        (args.G, "G"),
        (args.alpha, "alpha"),
        (args.eps0, "eps0"),
        (args.tau, "tau"),
        (args.dmax, "d_max"),
        (args.drag, "D"),
    ):
        value = _resolve(flag, config, key, None)
        if value is not None:
            overrides.append((key, value))
    ref_count = args.refs
    if args.ref_fraction is not None:
        ref_count = int(round(args.ref_fraction * args.nodes))
    scenario = Scenario(
        n_nodes=args.nodes,
        ref_count=ref_count,
        duration=args.duration,
        timestep=args.dt,
        width=w,
        height=h,
        v_min=args.vmin,
        v_max=args.vmax,
        pause=args.pause,
        r=args.range,
        mode=Mode(args.mode),
        period=args.period,
        randomize=args.randomize,
        random_init=args.init_random,
        speed_relax_until=args.relax_until if args.relax_until is not None else 0.0,
        infer_dt=args.infer_dt if args.infer_dt is not None else 1.0,
        eval_fraction=1.0 if args.full_window else 0.9,
        force_overrides=tuple(overrides),
    )
    result = run_experiment(ExperimentSpec(scenario, args.runs, args.seed))
    out = _out_dir(args.out_dir, "experiment")
    file_metrics = ["aggregate_correlation", "mde_avg", "mde_final", "added_avg", "missed_avg"]
    with open(out / "runs.dat", "w", encoding="utf-8") as fh:
        fh.write("#run seed " + " ".join(file_metrics) + "\n")
        for i, run in enumerate(result.runs):
            values = " ".join(_fmt_val(run.metrics()[k]) for k in file_metrics)
            fh.write(f"{i} {run.seed} {values}\n")
    summary_lines = []
    for key in file_metrics:
        mean, ci = result.summary[key]
        summary_lines.append(f"{key}_mean={_fmt_val(mean)}")
        summary_lines.append(f"{key}_ci90={_fmt_val(ci)}")
    (out / "summary.dat").write_text("\n".join(summary_lines) + "\n", encoding="utf-8")
    for line in summary_lines:
        print(line)
    elapsed_mean, _ = result.summary["elapsed_s"]
    print(f"elapsed_per_run={elapsed_mean:.2f}s", file=sys.stderr)
    _write_series(out / "correlation_curve.dat", ["t mean_correlation"],
                  result.times, result.correlation_mean)
    _write_series(out / "mde_curve.dat", ["t mean_mde"], result.times, result.mde_mean)
    if args.plot:
        from . import plotting

        plotting.plot_series(out / "correlation_curve.png", result.times,
                             [(result.correlation_mean, "correlation")],
                             ylabel="pairwise correlation")
        plotting.plot_series(out / "mde_curve.png", result.times,
                             [(result.mde_mean, "mde")], ylabel="mean distance error (m)")


def _cmd_frames(args) -> None:
    m = read_mobility_trace(args.mobility)
    timeline = LinkTimeline(read_contact_trace(args.trace)) if args.trace else None
    out = _out_dir(args.out_dir, "frames")
    paths = write_frames(m, args.stride, out, timeline=timeline, r=args.range)
    if args.png:
        from . import plotting
        from .traceio import parse_frame

        for path in paths:
            with open(path, encoding="utf-8") as fh:
                t, _, contacts = parse_frame(fh)
            plotting.plot_frame(path.with_suffix(".png"), m, m.sample_index(t), contacts)
    print(f"wrote {len(paths)} frames to {out}")


# ---------------------------------------------------------------------------
# parser


def build_parser() -> _Parser:
    parser = _Parser(prog="mobinfer", description=__doc__)
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    p = sub.add_parser("generate", help="generate random-waypoint mobility on a torus")
    p.add_argument("--nodes", type=int, required=True)
    p.add_argument("--torus", default="1000x1000", metavar="WxH")
    p.add_argument("--vmin", type=float, default=1.0)
    p.add_argument("--vmax", type=float, default=10.0)
    p.add_argument("--pause", type=float, default=0.0)
    p.add_argument("--duration", type=float, default=1000.0)
    p.add_argument("--dt", type=float, default=1.0)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("extract", help="extract a contact trace from mobility")
    p.add_argument("--mobility", required=True)
    p.add_argument("--mode", choices=[m.value for m in Mode], default="sync")
    p.add_argument("--period", type=float, default=1.0)
    p.add_argument("--range", type=float, default=100.0)
    p.add_argument("--seed", type=int, default=0, help="scan phases (async mode)")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_extract)

    p = sub.add_parser("randomize", help="shift event times back by U[0, 0.8T]")
    p.add_argument("--trace", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_randomize)

    p = sub.add_parser("infer", help="infer plausible mobility from a contact trace")
    p.add_argument("--trace", required=True)
    p.add_argument("--out")
    p.add_argument("--config", help="key=value defaults file (flags win)")
    p.add_argument("--space", help="plane | torus:WxH | corridor:HW:HEAD:TAIL")
    p.add_argument("--refs", help="reference node ids, e.g. 0-9")
    p.add_argument("--ref-mobility", help="mobility file with reference trajectories")
    p.add_argument("--init-from", help="mobility file providing initial positions")
    p.add_argument("--init-random", action="store_true")
    p.add_argument("--seed", type=int, default=0, help="random initial placement seed")
    p.add_argument("--dt", type=float)
    p.add_argument("--relax-until", type=float, dest="relax_until",
                   help="lift the speed clamp before this time")
    p.add_argument("--range", type=float)
    p.add_argument("--vmax", type=float)
    p.add_argument("--K", type=float)
    p.add_argument("--G", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--eps0", type=float)
    p.add_argument("--tau", type=float)
    p.add_argument("--dmax", type=float)
    p.add_argument("--drag", type=float)
    p.add_argument("--wall-stiffness", type=float, dest="wall_stiffness")
    p.add_argument("--anchor-head-tail", action="store_true", dest="anchor_head_tail")
    p.set_defaults(func=_cmd_infer)

    p = sub.add_parser("eval-mobility", help="accuracy of inferred vs original mobility")
    p.add_argument("--orig", required=True)
    p.add_argument("--inferred", required=True)
    p.add_argument("--refs")
    p.add_argument("--out-dir", dest="out_dir")
    p.add_argument("--full-window", action="store_true", dest="full_window")
    p.add_argument("--plot", action="store_true")
    p.add_argument("--scatter", action="store_true", help="emit raw distance pairs")
    p.set_defaults(func=_cmd_eval_mobility)

    p = sub.add_parser("eval-contacts", help="added/missed contacts of a mobility vs a trace")
    p.add_argument("--trace", required=True)
    p.add_argument("--mobility", required=True)
    p.add_argument("--range", type=float, default=100.0)
    p.add_argument("--out-dir", dest="out_dir")
    p.add_argument("--full-window", action="store_true", dest="full_window")
    p.add_argument("--plot", action="store_true")
    p.set_defaults(func=_cmd_eval_contacts)

    p = sub.add_parser("ict", help="inter-contact time distribution")
    p.add_argument("--trace", required=True)
    p.add_argument("--compare", help="second trace for a KS comparison")
    p.add_argument("--out-dir", dest="out_dir")
    p.add_argument("--plot", action="store_true")
    p.set_defaults(func=_cmd_ict)

    p = sub.add_parser("check", help="kinematic/contact constraint checker")
    p.add_argument("--mobility", required=True)
    p.add_argument("--trace", required=True)
    p.add_argument("--range", type=float, default=100.0)
    p.add_argument("--vmax", type=float, default=10.0)
    p.add_argument("--slack", type=float, help="default: 2*vmax*period")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_check)

    p = sub.add_parser("experiment", help="seeded multi-run pipeline with confidence intervals")
    p.add_argument("--runs", type=int, default=20)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--nodes", type=int, default=50)
    p.add_argument("--refs", type=int, default=0, help="reference node count (ids 0..k-1)")
    p.add_argument("--ref-fraction", type=float, dest="ref_fraction")
    p.add_argument("--torus", default="1000x1000", metavar="WxH")
    p.add_argument("--vmin", type=float, default=1.0)
    p.add_argument("--vmax", type=float, default=10.0)
    p.add_argument("--pause", type=float, default=0.0)
    p.add_argument("--duration", type=float, default=1000.0)
    p.add_argument("--dt", type=float, default=1.0)
    p.add_argument("--range", type=float, default=100.0)
    p.add_argument("--mode", choices=[m.value for m in Mode], default="sync")
    p.add_argument("--period", type=float, default=1.0)
    p.add_argument("--randomize", action="store_true")
    p.add_argument("--init-random", action="store_true", dest="init_random")
    p.add_argument("--relax-until", type=float, dest="relax_until")
    p.add_argument("--infer-dt", type=float, dest="infer_dt")
    p.add_argument("--full-window", action="store_true", dest="full_window")
    p.add_argument("--config", help="key=value defaults file (flags win)")
    p.add_argument("--K", type=float)
    p.add_argument("--G", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--eps0", type=float)
    p.add_argument("--tau", type=float)
    p.add_argument("--dmax", type=float)
    p.add_argument("--drag", type=float)
    p.add_argument("--out-dir", dest="out_dir")
    p.add_argument("--plot", action="store_true")
    p.set_defaults(func=_cmd_experiment)

    p = sub.add_parser("frames", help="export per-time position frames")
    p.add_argument("--mobility", required=True)
    p.add_argument("--stride", type=float, required=True)
    p.add_argument("--trace", help="contact trace for the contact pair lines")
    p.add_argument("--range", type=float, help="proximity contacts when no trace given")
    p.add_argument("--out-dir", dest="out_dir")
    p.add_argument("--png", action="store_true")
    p.set_defaults(func=_cmd_frames)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not getattr(args, "func", None):
            parser.error("a subcommand is required (see --help)")
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    try:
        args.func(args)
    except (_UsageError,) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (TraceError, ConfigError, EngineError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


def entry() -> None:
    sys.exit(main())
