"""End-to-end implicit-learning tester and the lp -> l2 parameter map.

The tester draws q uniform sample points, buckets the n coordinates by
their value pattern across those samples, and hunts for k parts of a
random equi-partition of pattern space whose union captures all the
influence.  Each selected part is then halved for `refine_rounds`
rounds, keeping the half-choice with the smallest estimated complement
influence, until each part is a single pattern.  A final influence gate
rejects if the complement of the surviving buckets still carries more
than `inf_threshold` influence; otherwise the core learned from the
original samples is compared against every enumerated grid core, and
the first one whose mean squared deviation is at most
`accept_threshold` is returned.

Pattern space has 2^q elements and is never materialized: a part stores
only the occupied patterns (those actually realized by some coordinate)
plus a virtual size.  Splits assign the occupied patterns by sequential
without-replacement draws against big-integer half capacities, which
reproduces exactly the distribution a full shuffle-and-split would
induce on them.

Total query cost is exactly q + 2m * (C(num_parts, k) + 2^k * refine_rounds + 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from itertools import combinations
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from .cores import CoreSet, CoreTable, cached_cores
from .influence import SubsetBudgetError, estimate_inf_mask
from .tables import CubePoint, QueryOracle

# estimator signature: (oracle, complement_mask, m, rng) -> influence estimate
InfluenceEstimator = Callable[[QueryOracle, int, int, np.random.Generator], float]

CONFIG_SCHEMA = "cubetest-config-1"
REPORT_SCHEMA = "cubetest-report-1"


def lp_epsilon_map(p: float, eps: float) -> float:
    """Distance parameter for the underlying l2 tester.

    For p > 2 an l2 tester at eps^(p/2) suffices; for 1 <= p <= 2 the l2
    tester at eps itself does, since l2 testing is at least as hard at
    the same eps.
    """
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    if not 0 < eps < 1:
        raise ValueError(f"eps must be in (0,1), got {eps}")
    if p > 2:
        return eps ** (p / 2)
    return eps


def default_refine_rounds(q: int, num_parts: int) -> int:
    """Rounds of halving needed to take a part of pattern space down to a
    single pattern: ceil(log2(ceil(2^q / num_parts)))."""
    per_part = -((-(1 << q)) // num_parts)
    return max(1, (per_part - 1).bit_length())


@dataclass(frozen=True)
class TesterConfig:
    """All tester constants.  Omitted thresholds are derived from eps
    after the lp -> l2 map; omitted refine_rounds from (q, num_parts)."""

    eps: float
    k: int
    p: float = 2.0
    q: int = 64
    m: int = 1000
    num_parts: int = 12
    refine_rounds: Optional[int] = None
    inf_threshold: Optional[float] = None
    accept_threshold: Optional[float] = None
    core_grid: Optional[float] = None
    seed: int = 0
    scale_profile: str = "desk"
    sqrt_statistic: bool = False
    subset_budget: int = 200_000

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.q < 1 or self.m < 1 or self.num_parts < 1:
            raise ValueError("q, m and num_parts must be >= 1")
        if self.num_parts < self.k:
            raise ValueError("num_parts must be >= k")
        if self.scale_profile not in ("paper", "desk"):
            raise ValueError(f"unknown scale profile {self.scale_profile!r}")
        eps2 = lp_epsilon_map(self.p, self.eps)
        if self.refine_rounds is None:
            object.__setattr__(self, "refine_rounds", default_refine_rounds(self.q, self.num_parts))
        if self.inf_threshold is None:
            object.__setattr__(self, "inf_threshold", eps2 ** 2 / 1000.0)
        if self.accept_threshold is None:
            object.__setattr__(self, "accept_threshold", 0.35 * eps2)
        if self.core_grid is None:
            default_grid = 0.25 if self.scale_profile == "desk" else eps2 / 1000.0
            object.__setattr__(self, "core_grid", default_grid)
        if self.refine_rounds < 1:
            raise ValueError("refine_rounds must be >= 1")
        if self.inf_threshold <= 0 or self.accept_threshold <= 0:
            raise ValueError("thresholds must be positive")

    @property
    def eps2(self) -> float:
        return lp_epsilon_map(self.p, self.eps)

    def query_budget(self) -> int:
        """Exact total oracle queries of one run."""
        return self.q + 2 * self.m * (
            math.comb(self.num_parts, self.k) + (1 << self.k) * self.refine_rounds + 1
        )


def desk_config(eps: float, k: int, **overrides) -> TesterConfig:
    """Desk-scale profile: num_parts = max(4k, 12), q in [64, 1024],
    m in [1e3, 1e4], core grid 1/4.  These replace the theoretical
    constants of the "paper" profile, whose guarantees are only
    asymptotic; seeded 2/3-rate experiments stand in for them."""
    defaults = dict(eps=eps, k=k, q=64, m=1000, num_parts=max(4 * k, 12), scale_profile="desk")
    defaults.update(overrides)
    return TesterConfig(**defaults)


def paper_config(eps: float, k: int, **overrides) -> TesterConfig:
    """Theoretical-scale constants (q = 2^k/eps2^5, m = k^6/eps2^5,
    num_parts = 100k^4, grid eps2/1000) with their unspecified leading
    factors set to 1; generally too expensive to run."""
    eps2 = lp_epsilon_map(float(overrides.get("p", 2.0)), eps)
    defaults = dict(
        eps=eps,
        k=k,
        q=math.ceil(2 ** k / eps2 ** 5),
        m=math.ceil(k ** 6 / eps2 ** 5),
        num_parts=100 * k ** 4,
        core_grid=eps2 / 1000.0,
        scale_profile="paper",
    )
    defaults.update(overrides)
    return TesterConfig(**defaults)


def profile_deviations(config: TesterConfig) -> list[str]:
    """Differences between this config and the "paper" profile constants."""
    if config.scale_profile == "paper":
        return []
    ref = paper_config(config.eps, config.k, p=config.p, seed=config.seed)
    notes = []
    for name in ("q", "m", "num_parts", "core_grid"):
        ours, theirs = getattr(config, name), getattr(ref, name)
        if ours != theirs:
            notes.append(f"{name}: {ours} (paper profile value {theirs})")
    return notes


@dataclass(frozen=True)
class PatternBuckets:
    """Coordinates grouped by their value pattern across the q samples.

    `buckets` maps each realized pattern (an integer whose bit t-1 is the
    coordinate's value on sample t) to its sorted coordinates.  The
    remaining 2^q - len(buckets) patterns are empty and implicit.
    """

    q: int
    n: int
    buckets: Mapping[int, tuple[int, ...]]

    def __post_init__(self):
        seen: set[int] = set()
        for coords in self.buckets.values():
            for c in coords:
                if c in seen:
                    raise ValueError("buckets overlap")
                seen.add(c)
        if seen != set(range(1, self.n + 1)):
            raise ValueError("buckets do not partition the coordinates")

    def coords_for(self, pattern: int) -> tuple[int, ...]:
        return self.buckets.get(pattern, ())

    def coord_mask(self, pattern: int) -> int:
        m = 0
        for c in self.coords_for(pattern):
            m |= 1 << (c - 1)
        return m


def _buckets_from_masks(sample_masks: Sequence[int], n: int) -> PatternBuckets:
    q = len(sample_masks)
    grouped: dict[int, list[int]] = {}
    for i in range(1, n + 1):
        pattern = 0
        for t, msk in enumerate(sample_masks):
            pattern |= ((msk >> (i - 1)) & 1) << t
        grouped.setdefault(pattern, []).append(i)
    return PatternBuckets(q=q, n=n, buckets={p: tuple(cs) for p, cs in grouped.items()})


def bucket_coordinates(samples: Sequence[CubePoint]) -> PatternBuckets:
    """Group coordinates of [n] by their column pattern across the samples."""
    if not samples:
        raise ValueError("at least one sample required")
    n = samples[0].n
    if any(s.n != n for s in samples):
        raise ValueError("samples have mixed dimensions")
    return _buckets_from_masks([s.mask for s in samples], n)


def _randint_below(rng: np.random.Generator, bound: int) -> int:
    """Uniform integer in [0, bound) for arbitrary-precision bounds."""
    if bound < 1:
        raise ValueError("bound must be >= 1")
    if bound == 1:
        return 0
    bits = bound.bit_length()
    nbytes = (bits + 7) // 8
    shift = nbytes * 8 - bits
    while True:
        val = int.from_bytes(rng.bytes(nbytes), "big") >> shift
        if val < bound:
            return val


def _deal_without_replacement(
    rng: np.random.Generator, items: Sequence[int], capacities: Sequence[int]
) -> list[list[int]]:
    """Deal items into slots with the given (big-integer) capacities,
    matching the law of a uniform shuffle of capacity-many cells."""
    remaining = list(capacities)
    out: list[list[int]] = [[] for _ in capacities]
    for item in items:
        total = sum(remaining)
        u = _randint_below(rng, total)
        acc = 0
        for j, cap in enumerate(remaining):
            acc += cap
            if u < acc:
                out[j].append(item)
                remaining[j] -= 1
                break
    return out


@dataclass(frozen=True)
class VirtualPart:
    """One part of the (virtual) equi-partition of pattern space."""

    patterns: tuple[int, ...]  # occupied patterns, ascending
    size: int  # total patterns in the part, occupied or not
    coord_mask: int


def _make_part(patterns: Sequence[int], size: int, buckets: PatternBuckets) -> VirtualPart:
    mask = 0
    for p in patterns:
        mask |= buckets.coord_mask(p)
    return VirtualPart(patterns=tuple(sorted(patterns)), size=size, coord_mask=mask)


def _initial_parts(
    buckets: PatternBuckets, num_parts: int, rng: np.random.Generator
) -> list[VirtualPart]:
    total = 1 << buckets.q
    sizes = [total // num_parts + (1 if j < total % num_parts else 0) for j in range(num_parts)]
    occupied = sorted(buckets.buckets)
    dealt = _deal_without_replacement(rng, occupied, sizes)
    return [_make_part(dealt[j], sizes[j], buckets) for j in range(num_parts)]


def _split_part(
    part: VirtualPart, buckets: PatternBuckets, rng: np.random.Generator
) -> tuple[VirtualPart, VirtualPart]:
    c0 = (part.size + 1) // 2  # first half takes the extra element
    c1 = part.size - c0
    if part.size == 0:
        return part, part
    dealt = _deal_without_replacement(rng, part.patterns, [c0, c1])
    return (
        _make_part(dealt[0], c0, buckets),
        _make_part(dealt[1], c1, buckets),
    )


def select_initial_parts(
    oracle: QueryOracle,
    buckets: PatternBuckets,
    config: TesterConfig,
    rng: np.random.Generator,
    estimator: InfluenceEstimator = estimate_inf_mask,
    parts: Optional[Sequence[VirtualPart]] = None,
) -> tuple[list[VirtualPart], dict[tuple[int, ...], float]]:
    """Sweep every size-k subset of the equi-partition and keep the one
    whose complement has the smallest estimated influence.

    Costs exactly 2m * C(num_parts, k) queries; ties break to the
    lexicographically first subset.  `parts` lets a caller supply the
    partition (built with `_initial_parts`) to observe it directly.
    """
    n_subsets = math.comb(config.num_parts, config.k)
    if n_subsets > config.subset_budget:
        raise SubsetBudgetError(
            f"subset sweep needs {n_subsets} influence estimates, budget is "
            f"{config.subset_budget}; reduce num_parts (desk profile) or raise the budget"
        )
    if parts is None:
        parts = _initial_parts(buckets, config.num_parts, rng)
    full = (1 << buckets.n) - 1
    etas: dict[tuple[int, ...], float] = {}
    best_key: tuple[int, ...] | None = None
    best_eta = math.inf
    for J in combinations(range(config.num_parts), config.k):
        s_mask = 0
        for j in J:
            s_mask |= parts[j].coord_mask
        eta = estimator(oracle, full & ~s_mask, config.m, rng)
        etas[J] = eta
        if eta < best_eta:
            best_eta = eta
            best_key = J
    assert best_key is not None
    return [parts[j] for j in best_key], etas


@dataclass(frozen=True)
class RefinementResult:
    final_patterns: tuple[Optional[int], ...]  # None = unoccupied or dead part
    part_went_empty: tuple[bool, ...]
    last_round_eta: float


def refine_parts(
    oracle: QueryOracle,
    selected: Sequence[VirtualPart],
    buckets: PatternBuckets,
    config: TesterConfig,
    rng: np.random.Generator,
    estimator: InfluenceEstimator = estimate_inf_mask,
) -> RefinementResult:
    """Halve every selected part for refine_rounds rounds, each round
    keeping the keep-choice z (one half per part) with the smallest
    estimated complement influence.

    Costs exactly 2m * 2^k * refine_rounds queries.  A part that loses
    all its patterns is carried along as empty and flagged.
    """
    k = len(selected)
    parts = list(selected)
    full = (1 << buckets.n) - 1
    went_empty = [False] * k
    last_eta = math.inf
    for _ in range(config.refine_rounds):
        halves = [_split_part(p, buckets, rng) for p in parts]
        best_z = 0
        best_eta = math.inf
        for z in range(1 << k):
            s_mask = 0
            for i in range(k):
                s_mask |= halves[i][(z >> i) & 1].coord_mask
            eta = estimator(oracle, full & ~s_mask, config.m, rng)
            if eta < best_eta:
                best_eta = eta
                best_z = z
        parts = [halves[i][(best_z >> i) & 1] for i in range(k)]
        for i in range(k):
            if parts[i].size == 0:
                went_empty[i] = True
        last_eta = best_eta
    finals: list[Optional[int]] = []
    for p in parts:
        finals.append(p.patterns[0] if p.patterns else None)
    return RefinementResult(
        final_patterns=tuple(finals),
        part_went_empty=tuple(went_empty),
        last_round_eta=last_eta,
    )


@dataclass(frozen=True)
class TesterReport:
    """Verdict plus diagnostics for one tester run."""

    verdict: str  # accept | reject
    reject_stage: str  # influence_check | core_search | none
    queries_used: int
    selected_buckets: tuple[tuple[int, ...], ...]
    learned_core: Optional[CoreTable]
    empirical_distance: Optional[float]
    eta: Mapping[str, float]
    phi: tuple[Optional[int], ...] = ()
    empty_buckets: tuple[bool, ...] = ()

    def __post_init__(self):
        if (self.verdict == "accept") != (self.learned_core is not None):
            raise ValueError("learned_core must be present exactly when accepting")


def final_check_and_learn(
    oracle: QueryOracle,
    sample_masks: Sequence[int],
    sample_values: np.ndarray,
    refinement: RefinementResult,
    buckets: PatternBuckets,
    cores: CoreSet,
    config: TesterConfig,
    rng: np.random.Generator,
    estimator: InfluenceEstimator = estimate_inf_mask,
    eta_extra: Optional[dict[str, float]] = None,
    queries_used: int = 0,
) -> TesterReport:
    """Influence gate, then implicit learning against the core set.

    The projection reads, for each final bucket, the lowest-index
    coordinate it contains; an empty bucket feeds the constant 0 to the
    corresponding core input.  The acceptance statistic is the mean of
    squared deviations between the sampled values and the candidate
    core's values on the projected samples, compared directly against
    accept_threshold (square-rooted first when sqrt_statistic is set);
    the report's empirical_distance is the statistic as compared.
    """
    k = len(refinement.final_patterns)
    full = (1 << buckets.n) - 1
    sb_mask = 0
    bucket_coords: list[tuple[int, ...]] = []
    for pattern in refinement.final_patterns:
        coords = buckets.coords_for(pattern) if pattern is not None else ()
        bucket_coords.append(coords)
        for c in coords:
            sb_mask |= 1 << (c - 1)
    eta = dict(eta_extra or {})
    eta["gate"] = estimator(oracle, full & ~sb_mask, config.m, rng)
    phi = tuple(min(coords) if coords else None for coords in bucket_coords)
    if eta["gate"] > config.inf_threshold:
        return TesterReport(
            verdict="reject",
            reject_stage="influence_check",
            queries_used=queries_used,
            selected_buckets=tuple(bucket_coords),
            learned_core=None,
            empirical_distance=None,
            eta=eta,
            phi=phi,
            empty_buckets=refinement.part_went_empty,
        )
    # core input of sample t is the pattern bit t-1 of each kept bucket
    q = len(sample_masks)
    u = np.zeros(q, dtype=np.int64)
    for j, pattern in enumerate(refinement.final_patterns):
        if pattern is None:
            continue  # hardwired 0
        bits = np.array([(pattern >> t) & 1 for t in range(q)], dtype=np.int64)
        u |= bits << j
    fvals = np.asarray(sample_values, dtype=np.float64)
    if len(cores) > 0:
        stats = np.mean((fvals[None, :] - cores.tables[:, u]) ** 2, axis=1)
        compared = np.sqrt(stats) if config.sqrt_statistic else stats
        passing = np.flatnonzero(compared <= config.accept_threshold)
    else:
        passing = np.array([], dtype=np.int64)
    if passing.size:
        first = int(passing[0])
        return TesterReport(
            verdict="accept",
            reject_stage="none",
            queries_used=queries_used,
            selected_buckets=tuple(bucket_coords),
            learned_core=cores.member(first),
            empirical_distance=float(compared[first]),
            eta=eta,
            phi=phi,
            empty_buckets=refinement.part_went_empty,
        )
    return TesterReport(
        verdict="reject",
        reject_stage="core_search",
        queries_used=queries_used,
        selected_buckets=tuple(bucket_coords),
        learned_core=None,
        empirical_distance=None,
        eta=eta,
        phi=phi,
        empty_buckets=refinement.part_went_empty,
    )


def run_tester(
    oracle: QueryOracle,
    class_tag: str,
    config: TesterConfig,
    rng: Optional[np.random.Generator] = None,
    estimator: InfluenceEstimator = estimate_inf_mask,
    cores: Optional[CoreSet] = None,
) -> TesterReport:
    """All four stages in order over a single oracle and RNG stream."""
    if rng is None:
        rng = np.random.default_rng(config.seed)
    if cores is None:
        cores = cached_cores(class_tag, config.k, config.core_grid)
    start = oracle.query_count
    n = oracle.n
    sample_masks_arr = rng.integers(0, 1 << n, size=config.q, dtype=np.int64)
    sample_values = oracle.query_masks(sample_masks_arr)
    sample_masks = [int(x) for x in sample_masks_arr]
    buckets = _buckets_from_masks(sample_masks, n)
    selected, etas = select_initial_parts(oracle, buckets, config, rng, estimator)
    refinement = refine_parts(oracle, selected, buckets, config, rng, estimator)
    eta_extra = {"initial_min": min(etas.values()), "refine_last": refinement.last_round_eta}
    report = final_check_and_learn(
        oracle,
        sample_masks,
        sample_values,
        refinement,
        buckets,
        cores,
        config,
        rng,
        estimator,
        eta_extra=eta_extra,
        queries_used=0,
    )
    return replace(report, queries_used=oracle.query_count - start)


# ---------------------------------------------------------------------------
# Config and report serialization ("key: value" lines).
# ---------------------------------------------------------------------------


def config_to_lines(config: TesterConfig) -> list[str]:
    lines = [
        f"schema: {CONFIG_SCHEMA}",
        f"profile: {config.scale_profile}",
        f"eps: {config.eps!r}",
        f"k: {config.k}",
        f"p: {config.p!r}",
        f"q: {config.q}",
        f"m: {config.m}",
        f"num_parts: {config.num_parts}",
        f"refine_rounds: {config.refine_rounds}",
        f"inf_threshold: {config.inf_threshold!r}",
        f"accept_threshold: {config.accept_threshold!r}",
        f"core_grid: {config.core_grid!r}",
        f"seed: {config.seed}",
        f"sqrt_statistic: {int(config.sqrt_statistic)}",
        f"subset_budget: {config.subset_budget}",
    ]
    for note in profile_deviations(config):
        lines.append(f"# deviation {note}")
    return lines


def save_config(config: TesterConfig, path) -> None:
    with open(path, "w") as fh:
        fh.write("\n".join(config_to_lines(config)) + "\n")


def _parse_kv(text: str) -> dict[str, str]:
    entries: dict[str, str] = {}
    for ln in text.splitlines():
        ln = ln.strip()
        if not ln or ln.startswith("#"):
            continue
        if ":" not in ln:
            raise ValueError(f"malformed line: {ln!r}")
        key, _, rest = ln.partition(":")
        entries[key.strip()] = rest.strip()
    return entries


def load_config(path) -> TesterConfig:
    with open(path) as fh:
        entries = _parse_kv(fh.read())
    if entries.get("schema") != CONFIG_SCHEMA:
        raise ValueError(f"unknown config schema {entries.get('schema')!r}")
    return TesterConfig(
        eps=float(entries["eps"]),
        k=int(entries["k"]),
        p=float(entries.get("p", 2.0)),
        q=int(entries["q"]),
        m=int(entries["m"]),
        num_parts=int(entries["num_parts"]),
        refine_rounds=int(entries["refine_rounds"]),
        inf_threshold=float(entries["inf_threshold"]),
        accept_threshold=float(entries["accept_threshold"]),
        core_grid=float(entries["core_grid"]),
        seed=int(entries.get("seed", 0)),
        scale_profile=entries.get("profile", "desk"),
        sqrt_statistic=bool(int(entries.get("sqrt_statistic", "0"))),
        subset_budget=int(entries.get("subset_budget", 200_000)),
    )


def report_to_lines(report: TesterReport) -> list[str]:
    buckets = " ; ".join(
        " ".join(str(c) for c in coords) if coords else "-" for coords in report.selected_buckets
    )
    core = (
        " ".join(repr(v) for v in report.learned_core.values)
        if report.learned_core is not None
        else "-"
    )
    dist = repr(report.empirical_distance) if report.empirical_distance is not None else "-"
    eta = " ".join(f"{k}={v!r}" for k, v in sorted(report.eta.items()))
    phi = " ".join(str(c) if c is not None else "-" for c in report.phi)
    empty = " ".join(str(int(b)) for b in report.empty_buckets)
    return [
        f"schema: {REPORT_SCHEMA}",
        f"verdict: {report.verdict}",
        f"reject_stage: {report.reject_stage}",
        f"queries_used: {report.queries_used}",
        f"selected_buckets: {buckets}",
        f"learned_core: {core}",
        f"empirical_distance: {dist}",
        f"eta: {eta}",
        f"phi: {phi}",
        f"empty_buckets: {empty}",
    ]


def report_from_lines(text: str) -> TesterReport:
    entries = _parse_kv(text)
    if entries.get("schema") != REPORT_SCHEMA:
        raise ValueError(f"unknown report schema {entries.get('schema')!r}")
    buckets = tuple(
        tuple(int(tok) for tok in chunk.split()) if chunk.strip() != "-" else ()
        for chunk in entries["selected_buckets"].split(";")
    )
    core = None
    if entries["learned_core"] != "-":
        vals = tuple(float(tok) for tok in entries["learned_core"].split())
        core = CoreTable(int(math.log2(len(vals))), vals)
    dist = None if entries["empirical_distance"] == "-" else float(entries["empirical_distance"])
    eta = {}
    for tok in entries["eta"].split():
        key, _, val = tok.partition("=")
        eta[key] = float(val)
    phi = tuple(None if tok == "-" else int(tok) for tok in entries["phi"].split())
    empty = tuple(bool(int(tok)) for tok in entries["empty_buckets"].split())
    return TesterReport(
        verdict=entries["verdict"],
        reject_stage=entries["reject_stage"],
        queries_used=int(entries["queries_used"]),
        selected_buckets=buckets,
        learned_core=core,
        empirical_distance=dist,
        eta=eta,
        phi=phi,
        empty_buckets=empty,
    )
