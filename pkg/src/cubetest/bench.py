"""Experiment harness: seeded tester trials over generated instances,
acceptance-rate summaries, and distance certification.

A plan names a class, cube size, tester parameters and an instance mode
(in_class lifts a random enumerated core per trial; far_mode_a lifts a
core certified far from the enumerated class cores; far_mode_b uses the
full-parity blend, certified 1/2 from every k-junta).  Per-trial seeds
are seed_base + trial index, so runs reproduce exactly.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .cores import cached_cores, core_of_junta, dist_core_to_set, lift_core
from .influence import closest_junta, junta_projection
from .tables import FunctionTable, make_counting_oracle
from .tester import TesterConfig, TesterReport, desk_config, report_to_lines, run_tester
from .valuations import make_far_instance

PLAN_SCHEMA = "cubetest-plan-1"
SUMMARY_SCHEMA = "cubetest-summary-1"
CERTIFY_SCHEMA = "cubetest-certify-1"

PLAN_MODES = ("in_class", "far_mode_a", "far_mode_b")

_PLAN_OVERRIDE_KEYS = (
    "q",
    "m",
    "num_parts",
    "gamma",
    "refine_rounds",
    "inf_threshold",
    "accept_threshold",
    "sqrt_statistic",
    "subset_budget",
)


@dataclass(frozen=True)
class ExperimentPlan:
    class_tag: str
    n: int
    k: int
    eps: float
    p: float = 2.0
    trial_count: int = 200
    seed_base: int = 0
    mode: str = "in_class"
    overrides: dict = field(default_factory=dict)
    core_values: Optional[tuple[float, ...]] = None

    def __post_init__(self):
        if self.trial_count < 1:
            raise ValueError("trial_count must be >= 1")
        if self.mode not in PLAN_MODES:
            raise ValueError(f"unknown instance mode {self.mode!r}")
        for key in self.overrides:
            if key not in _PLAN_OVERRIDE_KEYS:
                raise ValueError(f"unknown plan override {key!r}")

    def tester_config(self, seed: int = 0) -> TesterConfig:
        kwargs = dict(self.overrides)
        if "gamma" in kwargs:
            kwargs["core_grid"] = kwargs.pop("gamma")
        if "sqrt_statistic" in kwargs:
            kwargs["sqrt_statistic"] = bool(int(kwargs["sqrt_statistic"]))
        return desk_config(eps=self.eps, k=self.k, p=self.p, seed=seed, **kwargs)


@dataclass(frozen=True)
class TrialRecord:
    index: int
    seed: int
    report: TesterReport


@dataclass(frozen=True)
class ExperimentSummary:
    plan: ExperimentPlan
    accept_rate: float
    mean_queries: float
    p50_queries: int
    p90_queries: int
    reject_influence_check: int
    reject_core_search: int
    certified_distance: Optional[float]
    wall_time_s: float
    trial_count: int


def wilson_halfwidth(p: float, n: int, z: float = 1.96) -> float:
    """Half-width of the Wilson score interval around rate p at n trials;
    the CI acceptance thresholds are 2/3 minus this slack."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return (z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n))) / (1 + z * z / n)


def _in_class_instance(plan: ExperimentPlan, config: TesterConfig, trial_seed: int) -> FunctionTable:
    cores = cached_cores(plan.class_tag, plan.k, config.core_grid)
    rng = np.random.default_rng((trial_seed, 0xC0FE))
    core = cores.member(int(rng.integers(len(cores))))
    coords = tuple(int(c) + 1 for c in rng.choice(plan.n, size=plan.k, replace=False))
    return lift_core(core, coords, plan.n)


def run_plan(plan: ExperimentPlan, threads: int = 1) -> tuple[ExperimentSummary, list[TrialRecord]]:
    start = time.perf_counter()
    config0 = plan.tester_config()
    cores = cached_cores(plan.class_tag, plan.k, config0.core_grid)

    certified: Optional[float] = None
    shared_table: Optional[FunctionTable] = None
    far_core_values: Optional[tuple[float, ...]] = None
    if plan.mode == "far_mode_b":
        instance = make_far_instance("b", plan.class_tag, plan.n, plan.k, plan.eps)
        shared_table = instance.table
        certified = instance.certified_distance
    elif plan.mode == "far_mode_a":
        probe = make_far_instance(
            "a",
            plan.class_tag,
            plan.n,
            plan.k,
            plan.eps,
            gamma=config0.core_grid,
            core_values=plan.core_values,
        )
        certified = probe.certified_distance
        far_core_values = probe.core_values

    def one_trial(t: int) -> TrialRecord:
        seed = plan.seed_base + t
        config = replace(config0, seed=seed)
        if plan.mode == "in_class":
            table = _in_class_instance(plan, config, seed)
        elif plan.mode == "far_mode_a":
            rng = np.random.default_rng((seed, 0xC0FE))
            instance = make_far_instance(
                "a",
                plan.class_tag,
                plan.n,
                plan.k,
                plan.eps,
                gamma=config.core_grid,
                rng=rng,
                core_values=far_core_values,
            )
            table = instance.table
        else:
            table = shared_table
        oracle = make_counting_oracle(table)
        report = run_tester(oracle, plan.class_tag, config, cores=cores)
        return TrialRecord(index=t, seed=seed, report=report)

    indices = range(plan.trial_count)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(one_trial, indices))
    else:
        records = [one_trial(t) for t in indices]
    records.sort(key=lambda r: r.index)

    accepts = sum(1 for r in records if r.report.verdict == "accept")
    queries = sorted(r.report.queries_used for r in records)
    summary = ExperimentSummary(
        plan=plan,
        accept_rate=accepts / plan.trial_count,
        mean_queries=sum(queries) / plan.trial_count,
        p50_queries=queries[(len(queries) - 1) // 2],
        p90_queries=queries[int(0.9 * (len(queries) - 1))],
        reject_influence_check=sum(
            1 for r in records if r.report.reject_stage == "influence_check"
        ),
        reject_core_search=sum(1 for r in records if r.report.reject_stage == "core_search"),
        certified_distance=certified,
        wall_time_s=time.perf_counter() - start,
        trial_count=plan.trial_count,
    )
    return summary, records


# ---------------------------------------------------------------------------
# Distance certification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Certificate:
    """Exact junta distance plus a certified lower bound on the distance
    to class members that are k-juntas.

    junta_distance is exact (complement-influence form); core_distance
    is the exact l2 distance from the core of the best junta projection
    to the enumerated grid cores; the class bound subtracts the gamma/2
    discretization slack and takes the worst junta support into account.
    """

    class_tag: str
    k: int
    gamma: float
    junta_distance: float
    junta_coords: tuple[int, ...]
    core_distance: float
    discretization_slack: float
    class_junta_lower_bound: float


def certify(f: FunctionTable, class_tag: str, k: int, gamma: float) -> Certificate:
    from itertools import combinations

    cores = cached_cores(class_tag, k, gamma)
    best_J, junta_dist = closest_junta(f, k)
    coords_sorted = tuple(sorted(best_J))
    proj = junta_projection(f, coords_sorted)
    core_dist = dist_core_to_set(core_of_junta(proj, coords_sorted), cores)
    slack = gamma / 2
    # any class member living on coordinates K is at distance at least
    # max(d1_K, d2_K - slack - d1_K) from f; minimize over K
    bound = math.inf
    for K in combinations(range(1, f.n + 1), k):
        pK = junta_projection(f, K)
        d1 = _l2(f, pK)
        d2 = dist_core_to_set(core_of_junta(pK, K), cores)
        bound = min(bound, max(d1, d2 - slack - d1))
    return Certificate(
        class_tag=class_tag,
        k=k,
        gamma=gamma,
        junta_distance=junta_dist,
        junta_coords=coords_sorted,
        core_distance=core_dist,
        discretization_slack=slack,
        class_junta_lower_bound=max(0.0, bound),
    )


def _l2(f: FunctionTable, g: FunctionTable) -> float:
    return float(np.sqrt(np.mean((f.values - g.values) ** 2)))


def certificate_lines(cert: Certificate) -> list[str]:
    return [
        f"schema: {CERTIFY_SCHEMA}",
        f"class: {cert.class_tag}",
        f"k: {cert.k}",
        f"gamma: {cert.gamma!r}",
        f"junta_distance: {cert.junta_distance!r}",
        "junta_coords: " + " ".join(str(c) for c in cert.junta_coords),
        f"core_distance: {cert.core_distance!r}",
        f"discretization_slack: {cert.discretization_slack!r}",
        f"class_junta_lower_bound: {cert.class_junta_lower_bound!r}",
    ]


# ---------------------------------------------------------------------------
# Plan / summary / trial-record files
# ---------------------------------------------------------------------------


def plan_to_lines(plan: ExperimentPlan) -> list[str]:
    lines = [
        f"schema: {PLAN_SCHEMA}",
        f"class: {plan.class_tag}",
        f"n: {plan.n}",
        f"k: {plan.k}",
        f"eps: {plan.eps!r}",
        f"p: {plan.p!r}",
        f"trials: {plan.trial_count}",
        f"seed_base: {plan.seed_base}",
        f"mode: {plan.mode}",
    ]
    for key in _PLAN_OVERRIDE_KEYS:
        if key in plan.overrides:
            lines.append(f"{key}: {plan.overrides[key]!r}")
    if plan.core_values is not None:
        lines.append("core_values: " + " ".join(repr(v) for v in plan.core_values))
    return lines


def write_plan(plan: ExperimentPlan, path) -> None:
    with open(path, "w") as fh:
        fh.write("\n".join(plan_to_lines(plan)) + "\n")


def parse_plan_text(text: str) -> ExperimentPlan:
    entries: dict[str, str] = {}
    for ln in text.splitlines():
        ln = ln.strip()
        if not ln or ln.startswith("#"):
            continue
        if ":" not in ln:
            raise ValueError(f"malformed plan line: {ln!r}")
        key, _, rest = ln.partition(":")
        entries[key.strip()] = rest.strip()
    if entries.get("schema") != PLAN_SCHEMA:
        raise ValueError(f"unknown plan schema {entries.get('schema')!r}")
    for required in ("class", "n", "k", "eps", "trials", "seed_base", "mode"):
        if required not in entries:
            raise ValueError(f"plan missing {required!r} field")
    overrides = {}
    for key in _PLAN_OVERRIDE_KEYS:
        if key in entries:
            raw = entries[key]
            overrides[key] = int(raw) if key in (
                "q",
                "m",
                "num_parts",
                "refine_rounds",
                "sqrt_statistic",
                "subset_budget",
            ) else float(raw)
    core_values = None
    if "core_values" in entries:
        core_values = tuple(float(tok) for tok in entries["core_values"].split())
    return ExperimentPlan(
        class_tag=entries["class"],
        n=int(entries["n"]),
        k=int(entries["k"]),
        eps=float(entries["eps"]),
        p=float(entries.get("p", 2.0)),
        trial_count=int(entries["trials"]),
        seed_base=int(entries["seed_base"]),
        mode=entries["mode"],
        overrides=overrides,
        core_values=core_values,
    )


def read_plan(path) -> ExperimentPlan:
    with open(path) as fh:
        return parse_plan_text(fh.read())


def summary_to_lines(summary: ExperimentSummary) -> list[str]:
    cert = repr(summary.certified_distance) if summary.certified_distance is not None else "-"
    return [
        f"schema: {SUMMARY_SCHEMA}",
        f"class: {summary.plan.class_tag}",
        f"n: {summary.plan.n}",
        f"k: {summary.plan.k}",
        f"eps: {summary.plan.eps!r}",
        f"p: {summary.plan.p!r}",
        f"mode: {summary.plan.mode}",
        f"trials: {summary.trial_count}",
        f"seed_base: {summary.plan.seed_base}",
        f"accept_rate: {summary.accept_rate!r}",
        f"mean_queries: {summary.mean_queries!r}",
        f"p50_queries: {summary.p50_queries}",
        f"p90_queries: {summary.p90_queries}",
        f"reject_influence_check: {summary.reject_influence_check}",
        f"reject_core_search: {summary.reject_core_search}",
        f"certified_distance: {cert}",
        f"wall_time_s: {summary.wall_time_s!r}",
    ]


def write_summary(summary: ExperimentSummary, path) -> None:
    with open(path, "w") as fh:
        fh.write("\n".join(summary_to_lines(summary)) + "\n")


def write_trial_records(records: Sequence[TrialRecord], path) -> None:
    blocks = []
    for rec in records:
        blocks.append(
            "\n".join([f"trial: {rec.index}", f"seed: {rec.seed}"] + report_to_lines(rec.report))
        )
    with open(path, "w") as fh:
        fh.write("\n\n".join(blocks) + "\n")
