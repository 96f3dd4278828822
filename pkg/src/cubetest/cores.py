"""Enumeration of discretized junta cores for a valuation class, and
distance computations against the enumerated set.

The enumerated set contains every grid function on {0,1}^k (values a
multiple of gamma in [0,1]) that passes the class's definitional
checker.  This is a superset of the pointwise-rounded class: rounding a
class member can break its defining inequalities, and membership in the
rounded image has no local test, so the grid-feasible set is the usable
stand-in.  It can only enlarge the accept set by gamma/2 in l-infinity,
which distance certificates account for explicitly.

Enumeration assigns table values point by point and prunes a partial
assignment as soon as any fully-assigned defining constraint fails, so
restrictive classes never touch most of the (1/gamma + 1)^(2^k) grid.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator, Sequence

import numpy as np

from .tables import FunctionTable
from .valuations import CHECKER_CLASSES

DEFAULT_MAX_K = 3
DEFAULT_GRID_BUDGET = 2_000_000
CACHE_SCHEMA = "cubetest-coreset-1"


class EnumerationBudgetError(ValueError):
    """The requested grid is larger than the configured budget."""


@dataclass(frozen=True)
class CoreTable:
    """A function on {0,1}^k, indexed like FunctionTable but with arity k."""

    k: int
    values: tuple[float, ...]

    def __post_init__(self):
        if len(self.values) != 1 << self.k:
            raise ValueError(f"expected {1 << self.k} values for k={self.k}")

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=np.float64)


class CoreSet:
    """Immutable enumerated collection of grid cores for one class."""

    __slots__ = ("class_tag", "k", "gamma", "checker_tol", "tables")

    def __init__(self, class_tag: str, k: int, gamma: float, checker_tol: float, tables):
        arr = np.asarray(tables, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[1] != 1 << k:
            arr = arr.reshape(-1, 1 << k)
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "class_tag", class_tag)
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "checker_tol", checker_tol)
        object.__setattr__(self, "tables", arr)

    def __setattr__(self, name, value):
        raise AttributeError("CoreSet is immutable")

    def __len__(self) -> int:
        return self.tables.shape[0]

    def member(self, i: int) -> CoreTable:
        return CoreTable(self.k, tuple(float(v) for v in self.tables[i]))

    def __iter__(self) -> Iterator[CoreTable]:
        return (self.member(i) for i in range(len(self)))

    def contains(self, core: CoreTable, tol: float = 1e-12) -> bool:
        if core.k != self.k:
            return False
        if len(self) == 0:
            return False
        return bool(np.any(np.all(np.abs(self.tables - core.as_array()) <= tol, axis=1)))


def grid_levels(gamma: float) -> np.ndarray:
    """Multiples of gamma in [0,1]; gamma must divide 1 exactly."""
    if not 0 < gamma <= 1:
        raise ValueError(f"gamma must be in (0,1], got {gamma}")
    steps = round(1.0 / gamma)
    if abs(steps * gamma - 1.0) > 1e-9:
        raise ValueError(f"gamma={gamma} does not divide 1; use 1/integer")
    return np.array([j * gamma for j in range(steps + 1)])


# --- constraint schedules: for each table index t, the defining-inequality
# instances whose last-assigned point is t -------------------------------


def _submodular_schedule(k: int):
    schedule: list[list[tuple[int, int, int, int]]] = [[] for _ in range(1 << k)]
    for x in range(1 << k):
        for i in range(k):
            bi = 1 << i
            if x & bi:
                continue
            for j in range(i + 1, k):
                bj = 1 << j
                if x & bj:
                    continue
                schedule[x | bi | bj].append((x, x | bi, x | bj, x | bi | bj))
    return schedule


def _subadditive_schedule(k: int):
    schedule: list[list[tuple[int, int, int]]] = [[] for _ in range(1 << k)]
    for x in range(1 << k):
        for y in range(x, 1 << k):
            schedule[x | y].append((x, y, x | y))
    return schedule


def _self_bounding_schedule(k: int):
    schedule: list[list[int]] = [[] for _ in range(1 << k)]
    for x in range(1 << k):
        fire_at = max([x] + [x ^ (1 << i) for i in range(k)])
        schedule[fire_at].append(x)
    return schedule


def _make_partial_check(class_tag: str, k: int, tol: float):
    if class_tag == "submodular":
        schedule = _submodular_schedule(k)

        def check(t: int, v: list[float]) -> bool:
            for (a, b, c, d) in schedule[t]:
                if v[b] + v[c] < v[a] + v[d] - tol:
                    return False
            return True

        return check
    if class_tag == "subadditive":
        schedule = _subadditive_schedule(k)

        def check(t: int, v: list[float]) -> bool:
            for (x, y, u) in schedule[t]:
                if v[u] > v[x] + v[y] + tol:
                    return False
            return True

        return check
    if class_tag == "self_bounding":
        schedule = _self_bounding_schedule(k)

        def check(t: int, v: list[float]) -> bool:
            for x in schedule[t]:
                drop = 0.0
                for i in range(k):
                    drop += max(0.0, v[x] - v[x ^ (1 << i)])
                if v[x] < drop - tol:
                    return False
            return True

        return check
    if class_tag == "additive":

        def check(t: int, v: list[float]) -> bool:
            if t == 0:
                return abs(v[0]) <= tol
            if t & (t - 1) == 0:
                return True
            total = sum(v[1 << i] for i in range(k) if t & (1 << i))
            return abs(v[t] - total) <= tol

        return check
    if class_tag == "unit_demand":

        def check(t: int, v: list[float]) -> bool:
            if t == 0:
                return abs(v[0]) <= tol
            if t & (t - 1) == 0:
                return True
            top = max(v[1 << i] for i in range(k) if t & (1 << i))
            return abs(v[t] - top) <= tol

        return check
    raise ValueError(f"no membership checker for class {class_tag!r}")


def enumerate_cores(
    class_tag: str,
    k: int,
    gamma: float,
    budget: int = DEFAULT_GRID_BUDGET,
    allow_large_k: bool = False,
) -> CoreSet:
    """All grid functions on {0,1}^k passing the class checker.

    k is capped at 3 unless `allow_large_k` (the grid is doubly
    exponential in k); the full grid size must fit `budget`.
    """
    if class_tag not in CHECKER_CLASSES:
        raise ValueError(f"no membership checker for class {class_tag!r}")
    if k > DEFAULT_MAX_K and not allow_large_k:
        raise ValueError(f"k={k} exceeds the default cap {DEFAULT_MAX_K}")
    levels = grid_levels(gamma)
    required = len(levels) ** (1 << k)
    if required > budget:
        raise EnumerationBudgetError(
            f"enumeration would visit {required} grid functions, budget is {budget}"
        )
    tol = gamma * 1e-6
    partial_ok = _make_partial_check(class_tag, k, tol)
    size = 1 << k
    out: list[tuple[float, ...]] = []
    v: list[float] = [0.0] * size

    def assign(t: int) -> None:
        if t == size:
            out.append(tuple(v))
            return
        for level in levels:
            v[t] = float(level)
            if partial_ok(t, v):
                assign(t + 1)

    assign(0)
    return CoreSet(class_tag, k, gamma, tol, np.array(out).reshape(len(out), size))


@lru_cache(maxsize=32)
def cached_cores(class_tag: str, k: int, gamma: float) -> CoreSet:
    return enumerate_cores(class_tag, k, gamma)


def dist_core_to_set(g: CoreTable, cores: CoreSet) -> float:
    """Minimum exact l2 distance from g to any member of the set."""
    if g.k != cores.k:
        raise ValueError(f"arities differ: {g.k} vs {cores.k}")
    if len(cores) == 0:
        raise ValueError("core set is empty")
    d2 = np.mean((cores.tables - g.as_array()) ** 2, axis=1)
    return float(np.sqrt(d2.min()))


def lift_core(h: CoreTable, coords: Sequence[int], n: int) -> FunctionTable:
    """The n-variable junta reading core input j from ambient coordinate
    coords[j]; coords must be distinct and within [1..n]."""
    if len(coords) != h.k:
        raise ValueError(f"need {h.k} coordinates, got {len(coords)}")
    if len(set(coords)) != len(coords):
        raise ValueError("duplicate coordinates")
    if any(not 1 <= c <= n for c in coords):
        raise ValueError(f"coordinates outside [1..{n}]")
    idx = np.arange(1 << n)
    core_idx = np.zeros(1 << n, dtype=np.int64)
    for j, c in enumerate(coords):
        core_idx |= ((idx >> (c - 1)) & 1) << j
    return FunctionTable(n, h.as_array()[core_idx])


def core_of_junta(f: FunctionTable, coords: Sequence[int]) -> CoreTable:
    """Restrict a junta on `coords` to its core (reads f with the other
    coordinates at 0; exact when f is genuinely a junta on coords)."""
    k = len(coords)
    vals = []
    for u in range(1 << k):
        mask = 0
        for j, c in enumerate(coords):
            if (u >> j) & 1:
                mask |= 1 << (c - 1)
        vals.append(float(f.values[mask]))
    return CoreTable(k, tuple(vals))


# ---------------------------------------------------------------------------
# Cache file, keyed by (class, k, gamma) and the checker tolerance.
# ---------------------------------------------------------------------------


class CacheMismatchError(ValueError):
    """Cache file does not match the requested key or schema."""


def save_core_set(cores: CoreSet, path) -> None:
    lines = [
        f"schema: {CACHE_SCHEMA}",
        f"class: {cores.class_tag}",
        f"k: {cores.k}",
        f"gamma: {cores.gamma!r}",
        f"checker_tol: {cores.checker_tol!r}",
        f"count: {len(cores)}",
    ]
    for row in cores.tables:
        lines.append("values: " + " ".join(repr(float(x)) for x in row))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_core_set(path, class_tag: str, k: int, gamma: float) -> CoreSet:
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    header: dict[str, str] = {}
    rows: list[list[float]] = []
    for ln in lines:
        key, _, rest = ln.partition(":")
        key, rest = key.strip(), rest.strip()
        if key == "values":
            rows.append([float(tok) for tok in rest.split()])
        else:
            header[key] = rest
    if header.get("schema") != CACHE_SCHEMA:
        raise CacheMismatchError(f"unknown cache schema {header.get('schema')!r}")
    expected_tol = gamma * 1e-6
    if (
        header.get("class") != class_tag
        or int(header.get("k", -1)) != k
        or abs(float(header.get("gamma", "nan")) - gamma) > 1e-15
        or abs(float(header.get("checker_tol", "nan")) - expected_tol) > 1e-20
    ):
        raise CacheMismatchError("cache key does not match request")
    if int(header.get("count", -1)) != len(rows):
        raise CacheMismatchError("cache row count mismatch")
    return CoreSet(class_tag, k, gamma, expected_tol, np.array(rows).reshape(len(rows), 1 << k))
