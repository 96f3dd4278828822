"""Influence of coordinate sets: exact, spectral and sampled estimators,
plus junta projections, closest-junta search and random partitions.

Inf_f(S) is the expected variance of f when the coordinates in S are
re-randomized.  The exact routine enumerates the full table; the
spectral routine sums squared Fourier weight on sets meeting S; the
sampled estimator is the 2m-query Monte Carlo scheme whose deviation
obeys the Hoeffding bound  Pr[|est - Inf| >= t] <= 2 exp(-2 m t^2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Hashable, Iterable

import numpy as np

from .tables import (
    FourierSpectrum,
    FunctionTable,
    QueryOracle,
    coords_of,
    mask_of,
    walsh_hadamard,
)

DEFAULT_SUBSET_BUDGET = 2_000_000


class SubsetBudgetError(ValueError):
    """A combinatorial sweep would exceed its configured budget."""


def _axes_for(coord_mask: int, n: int) -> tuple[int, ...]:
    # table.reshape((2,)*n) puts coordinate i on axis (n - i)
    return tuple(n - i for i in range(1, n + 1) if coord_mask & (1 << (i - 1)))


def influence_exact(f: FunctionTable, S: Iterable[int]) -> float:
    """E over assignments outside S of the population variance over S."""
    s_mask = mask_of(S, f.n)
    if s_mask == 0:
        return 0.0
    grid = f.values.reshape((2,) * f.n)
    var = np.var(grid, axis=_axes_for(s_mask, f.n))
    return float(np.mean(var))


def influence_fourier(spectrum: FourierSpectrum, S: Iterable[int]) -> float:
    """Sum of squared coefficients over sets T with T intersecting S."""
    s_mask = mask_of(S, spectrum.n)
    if s_mask == 0:
        return 0.0
    masks = np.arange(1 << spectrum.n)
    meets = (masks & s_mask) != 0
    return float(np.sum(spectrum.coefficients[meets] ** 2))


def estimate_inf_mask(oracle: QueryOracle, s_mask: int, m: int, rng: np.random.Generator) -> float:
    """Monte Carlo influence estimate using exactly 2m oracle queries.

    Each of the m samples fixes the coordinates outside S and compares f
    at two independent completions of S; the average squared difference,
    halved, is an unbiased estimate of Inf_f(S).
    """
    if m < 1:
        raise ValueError("sample count must be >= 1")
    size = 1 << oracle.n
    base = rng.integers(0, size, size=m, dtype=np.int64)
    fresh = rng.integers(0, size, size=m, dtype=np.int64)
    resampled = (base & ~s_mask) | (fresh & s_mask)
    v1 = oracle.query_masks(base)
    v2 = oracle.query_masks(resampled)
    return float(np.sum((v1 - v2) ** 2) / (2 * m))


def estimate_inf(oracle: QueryOracle, S: Iterable[int], m: int, rng: np.random.Generator) -> float:
    return estimate_inf_mask(oracle, mask_of(S, oracle.n), m, rng)


def junta_projection(f: FunctionTable, J: Iterable[int]) -> FunctionTable:
    """Average f over the coordinates outside J.

    The result is a J-junta on the full n variables, constant on each
    J-equivalence class and equal to the conditional mean there; it is
    the closest J-junta to f in l2.
    """
    j_mask = mask_of(J, f.n)
    outside = ((1 << f.n) - 1) & ~j_mask
    if outside == 0:
        return FunctionTable(f.n, f.values)
    grid = f.values.reshape((2,) * f.n)
    proj = grid.mean(axis=_axes_for(outside, f.n), keepdims=True)
    return FunctionTable(f.n, np.broadcast_to(proj, grid.shape).reshape(-1))


def closest_junta(
    f: FunctionTable, k: int, subset_budget: int = DEFAULT_SUBSET_BUDGET
) -> tuple[frozenset[int], float]:
    """Best size-k coordinate set J and the l2 distance from f to f_J.

    Minimizes the influence of the complement over all size-k sets;
    the distance is the square root of that influence.  Ties go to the
    lexicographically first J.
    """
    if k > f.n:
        raise ValueError(f"k={k} exceeds dimension {f.n}")
    if math.comb(f.n, k) > subset_budget:
        raise SubsetBudgetError(
            f"closest_junta needs {math.comb(f.n, k)} subsets, budget is {subset_budget}"
        )
    sq = walsh_hadamard(f).coefficients ** 2
    total = float(sq.sum())
    best_J: tuple[int, ...] | None = None
    best_inf = math.inf
    for J in combinations(range(1, f.n + 1), k):
        j_mask = mask_of(J, f.n)
        # Inf_f(complement J) = total weight minus weight on subsets of J
        sub = j_mask
        inside = sq[j_mask]
        while sub:
            sub = (sub - 1) & j_mask
            inside += sq[sub]
        inf = total - float(inside)
        if inf < best_inf:
            best_inf = inf
            best_J = J
    assert best_J is not None
    return frozenset(best_J), math.sqrt(max(best_inf, 0.0))


@dataclass(frozen=True)
class CoordPartition:
    """Disjoint labeled parts covering a ground set."""

    ground: tuple[Hashable, ...]
    parts: tuple[frozenset, ...]
    mode: str
    has_empty_parts: bool = field(default=False)

    def __post_init__(self):
        union: set = set()
        for p in self.parts:
            if union & p:
                raise ValueError("parts are not disjoint")
            union |= p
        if union != set(self.ground):
            raise ValueError("parts do not cover the ground set")


def random_partition(
    ground: Iterable[Hashable], r: int, rng: np.random.Generator, mode: str = "uniform"
) -> CoordPartition:
    """Partition a ground set into r labeled parts.

    uniform mode assigns every element an independent uniform part label;
    equi mode shuffles and splits into parts of near-equal size, the
    first (N mod r) parts getting the extra element.  Empty parts are
    possible (r > N) and are surfaced via `has_empty_parts`.
    """
    if r < 1:
        raise ValueError("part count must be >= 1")
    elements = sorted(ground)
    n_el = len(elements)
    buckets: list[set] = [set() for _ in range(r)]
    if mode == "uniform":
        labels = rng.integers(0, r, size=n_el)
        for el, lab in zip(elements, labels):
            buckets[int(lab)].add(el)
    elif mode == "equi":
        order = rng.permutation(n_el)
        sizes = [n_el // r + (1 if j < n_el % r else 0) for j in range(r)]
        pos = 0
        for j, size in enumerate(sizes):
            for t in range(pos, pos + size):
                buckets[j].add(elements[int(order[t])])
            pos += size
    else:
        raise ValueError(f"unknown partition mode {mode!r}")
    parts = tuple(frozenset(b) for b in buckets)
    return CoordPartition(
        ground=tuple(elements),
        parts=parts,
        mode=mode,
        has_empty_parts=any(not p for p in parts),
    )


def complement(S: Iterable[int], n: int) -> frozenset[int]:
    """[n] minus S."""
    s_mask = mask_of(S, n)
    return coords_of(((1 << n) - 1) & ~s_mask)
