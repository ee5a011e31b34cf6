"""Seeded end-to-end pipelines and multi-run experiments.

One pipeline run is: generate ground-truth mobility, extract a contact
trace, optionally randomize it, infer mobility back from the contacts,
and score the result. A run is a pure function of (scenario, seed);
sub-seeds for the generator, the scan phases, the randomization and
the initial placement are derived from the run seed through NumPy
SeedSequence spawn keys, so every stage is independently reproducible.

Experiments repeat the pipeline over seeds base_seed + run_index and
summarize each metric with its mean and 90% Student-t confidence
interval.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.stats

from .engine import InferenceConfig, infer
from .extract import Mode, SamplingConfig, extract_contacts, randomize_trace
from .forces import ForceParams
from .metrics import contact_diff, evaluate_accuracy
from .model import ContactTrace, MobilityTrace, Torus
from .rwp import RwpConfig, rwp_generate

_COMPONENTS = {"generate": 0, "extract": 1, "randomize": 2, "init": 3}


def derive_seed(base_seed: int, component: str) -> int:
    """Deterministic per-component sub-seed of a run seed."""
    ss = np.random.SeedSequence(base_seed, spawn_key=(_COMPONENTS[component],))
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class Scenario:
    """Parameters of one synthetic pipeline run (seed excluded)."""

    n_nodes: int = 50
    ref_count: int = 0
    duration: float = 1000.0
    timestep: float = 1.0
    width: float = 1000.0
    height: float = 1000.0
    v_min: float = 1.0
    v_max: float = 10.0
    pause: float = 0.0
    r: float = 100.0
    mode: Mode = Mode.SYNCHRONOUS
    period: float = 1.0
    randomize: bool = False
    random_init: bool = False
    speed_relax_until: float = 0.0
    infer_dt: float = 1.0
    eval_fraction: float = 0.9
    force_overrides: tuple[tuple[str, float], ...] = ()

    @property
    def space(self) -> Torus:
        return Torus(self.width, self.height)

    @property
    def reference_ids(self) -> frozenset[int]:
        return frozenset(range(self.ref_count))

    def params(self) -> ForceParams:
        return ForceParams.defaults(r=self.r, v_max=self.v_max, **dict(self.force_overrides))


@dataclass(frozen=True, eq=False)
class RunResult:
    """Metrics of one pipeline run, evaluated over the scenario window."""

    seed: int
    times: np.ndarray
    correlation: np.ndarray
    mde: np.ndarray
    aggregate_correlation: float
    mde_avg: float
    mde_final: float
    added_avg: float
    missed_avg: float
    elapsed_s: float
    generated: MobilityTrace | None = None
    trace: ContactTrace | None = None
    inferred: MobilityTrace | None = None

    def metrics(self) -> dict[str, float]:
        return {
            "aggregate_correlation": self.aggregate_correlation,
            "mde_avg": self.mde_avg,
            "mde_final": self.mde_final,
            "added_avg": self.added_avg,
            "missed_avg": self.missed_avg,
            "elapsed_s": self.elapsed_s,
        }


def run_pipeline(sc: Scenario, seed: int, keep_traces: bool = False) -> RunResult:
    """Run generate -> extract -> (randomize) -> infer -> evaluate once."""
    start = time.perf_counter()
    gen = rwp_generate(
        RwpConfig(
            n_nodes=sc.n_nodes,
            space=sc.space,
            v_min=sc.v_min,
            v_max=sc.v_max,
            duration=sc.duration,
            timestep=sc.timestep,
            seed=derive_seed(seed, "generate"),
            pause=sc.pause,
        )
    )
    sampling = SamplingConfig(sc.mode, sc.period, sc.r, seed=derive_seed(seed, "extract"))
    measured = extract_contacts(gen, sampling)
    trace_in = (
        randomize_trace(measured, derive_seed(seed, "randomize")) if sc.randomize else measured
    )
    cfg = InferenceConfig(
        space=sc.space,
        params=sc.params(),
        dt=sc.infer_dt,
        reference_ids=sc.reference_ids,
        reference=gen if sc.ref_count else None,
        initial_positions=None if sc.random_init else gen.positions[0],
        init_seed=derive_seed(seed, "init") if sc.random_init else None,
        speed_relax_until=sc.speed_relax_until,
    )
    inferred = infer(trace_in, cfg)

    t_max = sc.eval_fraction * sc.duration
    acc = evaluate_accuracy(gen, inferred, sc.reference_ids, 0.0, t_max)
    diff = contact_diff(measured, inferred, sc.r, 0.0, t_max)
    elapsed = time.perf_counter() - start
    return RunResult(
        seed=seed,
        times=acc.times,
        correlation=acc.correlation,
        mde=acc.mde,
        aggregate_correlation=acc.aggregate_correlation,
        mde_avg=float(acc.mde.mean()),
        mde_final=float(acc.mde[-1]),
        added_avg=diff.added_avg,
        missed_avg=diff.missed_avg,
        elapsed_s=elapsed,
        generated=gen if keep_traces else None,
        trace=measured if keep_traces else None,
        inferred=inferred if keep_traces else None,
    )


@dataclass(frozen=True)
class ExperimentSpec:
    """A batch of seeded pipeline runs over one scenario."""

    scenario: Scenario
    runs: int = 20
    base_seed: int = 1

    def __post_init__(self):
        if self.runs < 1:
            raise ValueError("experiment needs at least one run")


@dataclass(frozen=True, eq=False)
class ExperimentResult:
    spec: ExperimentSpec
    runs: tuple[RunResult, ...]
    summary: dict[str, tuple[float, float]]  # metric -> (mean, ci90 half-width)
    times: np.ndarray
    correlation_mean: np.ndarray
    mde_mean: np.ndarray


def mean_ci90(values: np.ndarray) -> tuple[float, float]:
    """Mean and 90% Student-t confidence half-width."""
    values = np.asarray(values, dtype=float)
    n = len(values)
    mean = float(values.mean())
    if n < 2:
        return mean, float("nan")
    half = float(scipy.stats.t.ppf(0.95, n - 1) * values.std(ddof=1) / np.sqrt(n))
    return mean, half


def run_experiment(spec: ExperimentSpec, keep_traces: bool = False) -> ExperimentResult:
    results = [
        run_pipeline(spec.scenario, spec.base_seed + i, keep_traces) for i in range(spec.runs)
    ]
    summary = {
        key: mean_ci90(np.array([r.metrics()[key] for r in results]))
        for key in results[0].metrics()
    }
    times = results[0].times
    corr = np.nanmean(np.vstack([r.correlation for r in results]), axis=0)
    mde = np.vstack([r.mde for r in results]).mean(axis=0)
    return ExperimentResult(spec, tuple(results), summary, times, corr, mde)
