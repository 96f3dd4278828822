"""Generators and definitional checkers for valuation classes on the cube,
plus construction of certified-far instances for soundness experiments.

Generators build tables by the literal class definitions (additive sums,
coverage unions, unit-demand maxima, OXS assignments, XOS clause maxima,
budget-additive caps) and normalize into [0,1] by dividing by the max
value when it exceeds 1; affine scaling preserves membership in every
class handled here.  Checkers verify the defining inequalities over the
whole table and report the first violating point(s).

Membership checking exists only where the definition yields a finite
procedure: additive, unit_demand, submodular, subadditive, self_bounding.
Coverage, XOS and gross-substitutes have generators but no checker.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional

import numpy as np
from scipy.optimize import linear_sum_assignment

from .tables import CubePoint, FunctionTable

DEFAULT_CHECK_TOL = 1e-9

GENERATOR_CLASSES = (
    "additive",
    "coverage",
    "unit_demand",
    "oxs",
    "gross_substitutes",
    "submodular",
    "xos",
)

CHECKER_CLASSES = ("additive", "unit_demand", "submodular", "subadditive", "self_bounding")

# Checkers every generated instance of a class must pass, following the
# inclusion hierarchy of the monotone normalized valuation classes.
APPLICABLE_CHECKERS: dict[str, tuple[str, ...]] = {
    "additive": ("additive", "submodular", "subadditive", "self_bounding"),
    "coverage": ("submodular", "subadditive", "self_bounding"),
    "unit_demand": ("unit_demand", "submodular", "subadditive", "self_bounding"),
    "oxs": ("submodular", "subadditive", "self_bounding"),
    "gross_substitutes": ("submodular", "subadditive", "self_bounding"),
    "submodular": ("submodular", "subadditive", "self_bounding"),
    "xos": ("subadditive", "self_bounding"),
}


@dataclass(frozen=True)
class ValuationSpec:
    """Concrete parameters for one generated valuation instance.

    `params` maps parameter names to tuples (weight vectors, cover index
    lists, clause rows) or scalars (the budget of the budget-additive
    construction)."""

    class_tag: str
    n: int
    params: Mapping[str, object]
    seed: int = 0

    def canonical_lines(self) -> list[str]:
        lines = [f"class: {self.class_tag}", f"n: {self.n}", f"seed: {self.seed}"]
        for key in sorted(self.params):
            val = self.params[key]
            if isinstance(val, tuple):
                lines.append(f"{key}: " + " ".join(repr(v) for v in val))
            else:
                lines.append(f"{key}: {val!r}")
        return lines

    def digest(self) -> str:
        h = hashlib.sha256("\n".join(self.canonical_lines()).encode())
        return h.hexdigest()[:16]


@dataclass(frozen=True)
class ViolationWitness:
    """One or two points where a class inequality fails, with the two
    sides of the inequality (lhs < rhs strictly, beyond tolerance)."""

    points: tuple[CubePoint, ...]
    lhs: float
    rhs: float
    condition: str

    def __str__(self) -> str:
        pts = ", ".join(p.to_string() for p in self.points)
        return f"{self.condition} violated at {pts}: {self.lhs!r} < {self.rhs!r}"


def _require_weights(w, name: str) -> np.ndarray:
    arr = np.asarray(w, dtype=np.float64)
    if arr.size == 0:
        raise ValueError(f"{name} must be non-empty")
    if np.any(arr < 0):
        raise ValueError(f"{name} must be non-negative")
    return arr


def _bits_matrix(n: int) -> np.ndarray:
    idx = np.arange(1 << n)
    return ((idx[:, None] >> np.arange(n)[None, :]) & 1).astype(bool)


def _normalize(raw: np.ndarray) -> tuple[np.ndarray, float]:
    top = float(raw.max())
    if top > 1.0:
        return raw / top, top
    return raw, 1.0


def _raw_table(spec: ValuationSpec) -> np.ndarray:
    n = spec.n
    tag = spec.class_tag
    bits = _bits_matrix(n)
    if tag == "additive":
        w = _require_weights(spec.params["weights"], "weights")
        if w.size != n:
            raise ValueError(f"need {n} weights, got {w.size}")
        return bits @ w
    if tag == "unit_demand":
        w = _require_weights(spec.params["weights"], "weights")
        if w.size != n:
            raise ValueError(f"need {n} weights, got {w.size}")
        vals = np.where(bits, w[None, :], -np.inf).max(axis=1)
        vals[0] = 0.0
        return vals
    if tag == "coverage":
        wu = _require_weights(spec.params["universe_weights"], "universe_weights")
        covers = []
        for i in range(1, n + 1):
            cov = spec.params.get(f"cover_{i}", ())
            cov_idx = sorted(set(int(u) for u in cov))
            if any(not 1 <= u <= wu.size for u in cov_idx):
                raise ValueError(f"cover_{i} references universe elements outside [1..{wu.size}]")
            covers.append(cov_idx)
        vals = np.zeros(1 << n)
        for mask in range(1, 1 << n):
            covered: set[int] = set()
            for i in range(n):
                if mask & (1 << i):
                    covered.update(covers[i])
            vals[mask] = sum(wu[u - 1] for u in covered)
        return vals
    if tag == "xos":
        rows = _clause_rows(spec, n, "clause")
        return np.max(bits @ rows.T, axis=1)
    if tag in ("oxs", "gross_substitutes"):
        rows = _clause_rows(spec, n, "demand")
        vals = np.zeros(1 << n)
        for mask in range(1, 1 << n):
            goods = [i for i in range(n) if mask & (1 << i)]
            sub = rows[:, goods]
            r, c = linear_sum_assignment(-sub)
            vals[mask] = float(sub[r, c].sum())
        return vals
    if tag == "submodular":
        # budget-additive construction: min(w . x, budget)
        w = _require_weights(spec.params["weights"], "weights")
        if w.size != n:
            raise ValueError(f"need {n} weights, got {w.size}")
        budget = float(spec.params["budget"])
        if budget < 0:
            raise ValueError("budget must be non-negative")
        return np.minimum(bits @ w, budget)
    raise ValueError(f"no generator for class {tag!r}")


def _clause_rows(spec: ValuationSpec, n: int, prefix: str) -> np.ndarray:
    rows = []
    i = 1
    while f"{prefix}_{i}" in spec.params:
        row = _require_weights(spec.params[f"{prefix}_{i}"], f"{prefix}_{i}")
        if row.size != n:
            raise ValueError(f"{prefix}_{i} needs {n} weights, got {row.size}")
        rows.append(row)
        i += 1
    if not rows:
        raise ValueError(f"at least one {prefix} row required")
    return np.vstack(rows)


def gen(spec: ValuationSpec) -> FunctionTable:
    """Generate the table for a valuation spec (normalized into [0,1])."""
    return gen_detailed(spec)[0]


def gen_detailed(spec: ValuationSpec) -> tuple[FunctionTable, float]:
    """Generate a table and report the normalization divisor (1.0 if none)."""
    if spec.class_tag not in GENERATOR_CLASSES:
        raise ValueError(f"no generator for class {spec.class_tag!r}")
    raw = _raw_table(spec)
    vals, norm = _normalize(raw)
    return FunctionTable(spec.n, vals), norm


def random_spec(class_tag: str, n: int, seed: int) -> ValuationSpec:
    """Draw random non-negative parameters for a class; deterministic in seed."""
    rng = np.random.default_rng((seed, 0xC0DE))

    def draw(count: int) -> tuple[float, ...]:
        return tuple(float(x) for x in rng.uniform(0.0, 1.0, count))

    if class_tag in ("additive", "unit_demand"):
        params = {"weights": draw(n)}
    elif class_tag == "submodular":
        params = {
            "weights": draw(n),
            "budget": float(rng.uniform(0.3, 1.0) * n / 2),
        }
    elif class_tag == "coverage":
        u_size = int(rng.integers(max(2, n // 2), 2 * n + 1))
        params = {"universe_weights": draw(u_size)}
        for i in range(1, n + 1):
            cover_size = int(rng.integers(0, u_size + 1))
            chosen = rng.choice(u_size, size=cover_size, replace=False)
            params[f"cover_{i}"] = tuple(int(u) + 1 for u in sorted(chosen))
    elif class_tag == "xos":
        clauses = int(rng.integers(1, n + 2))
        params = {f"clause_{j}": draw(n) for j in range(1, clauses + 1)}
    elif class_tag in ("oxs", "gross_substitutes"):
        comps = int(rng.integers(1, max(2, n // 2) + 1))
        params = {f"demand_{j}": draw(n) for j in range(1, comps + 1)}
    else:
        raise ValueError(f"no generator for class {class_tag!r}")
    return ValuationSpec(class_tag=class_tag, n=n, params=params, seed=seed)


# ---------------------------------------------------------------------------
# Checkers
# ---------------------------------------------------------------------------


def check_submodular(f: FunctionTable, tol: float = DEFAULT_CHECK_TOL) -> Optional[ViolationWitness]:
    """Local square condition, equivalent to the pairwise definition:
    f(x|e_i) + f(x|e_j) >= f(x) + f(x|e_i|e_j) for all x with x_i = x_j = 0.
    """
    v = f.values
    n = f.n
    idx = np.arange(1 << n)
    for i in range(n):
        bi = 1 << i
        for j in range(i + 1, n):
            bj = 1 << j
            base = idx[(idx & bi == 0) & (idx & bj == 0)]
            lhs = v[base | bi] + v[base | bj]
            rhs = v[base] + v[base | bi | bj]
            bad = np.flatnonzero(lhs < rhs - tol)
            if bad.size:
                b = int(base[bad[0]])
                return ViolationWitness(
                    points=(CubePoint(n, b | bi), CubePoint(n, b | bj)),
                    lhs=float(lhs[bad[0]]),
                    rhs=float(rhs[bad[0]]),
                    condition="submodularity",
                )
    return None


def check_subadditive(f: FunctionTable, tol: float = DEFAULT_CHECK_TOL) -> Optional[ViolationWitness]:
    """All pairs: f(x OR y) <= f(x) + f(y)."""
    v = f.values
    n = f.n
    idx = np.arange(1 << n)
    for x in range(1 << n):
        union = x | idx
        slack = v[x] + v - v[union]
        bad = np.flatnonzero(slack < -tol)
        if bad.size:
            y = int(bad[0])
            return ViolationWitness(
                points=(CubePoint(n, x), CubePoint(n, y)),
                lhs=float(v[x] + v[y]),
                rhs=float(v[x | y]),
                condition="subadditivity",
            )
    return None


def check_self_bounding(f: FunctionTable, tol: float = DEFAULT_CHECK_TOL) -> Optional[ViolationWitness]:
    """f(x) >= sum_i (f(x) - min(f(x), f(x xor e_i))) at every point."""
    v = f.values
    n = f.n
    idx = np.arange(1 << n)
    drop = np.zeros(1 << n)
    for i in range(n):
        drop += np.maximum(0.0, v - v[idx ^ (1 << i)])
    bad = np.flatnonzero(v < drop - tol)
    if bad.size:
        x = int(bad[0])
        return ViolationWitness(
            points=(CubePoint(n, x),),
            lhs=float(v[x]),
            rhs=float(drop[x]),
            condition="self-bounding",
        )
    return None


def _check_pointwise(
    f: FunctionTable, predicted: np.ndarray, tol: float, condition: str
) -> Optional[ViolationWitness]:
    bad = np.flatnonzero(np.abs(f.values - predicted) > tol)
    if bad.size:
        x = int(bad[0])
        a, b = float(f.values[x]), float(predicted[x])
        return ViolationWitness(
            points=(CubePoint(f.n, x),),
            lhs=min(a, b),
            rhs=max(a, b),
            condition=condition,
        )
    return None


def check_additive(f: FunctionTable, tol: float = DEFAULT_CHECK_TOL) -> Optional[ViolationWitness]:
    """Recover w_i = f(e_i) and verify f(x) = sum of present weights."""
    w = np.array([f.values[1 << i] for i in range(f.n)])
    predicted = _bits_matrix(f.n) @ w
    return _check_pointwise(f, predicted, tol, "additivity")


def check_unit_demand(f: FunctionTable, tol: float = DEFAULT_CHECK_TOL) -> Optional[ViolationWitness]:
    """Recover w_i = f(e_i) and verify f(x) = max of present weights."""
    w = np.array([f.values[1 << i] for i in range(f.n)])
    predicted = np.where(_bits_matrix(f.n), w[None, :], -np.inf).max(axis=1)
    predicted[0] = 0.0
    return _check_pointwise(f, predicted, tol, "unit demand")


CHECKERS = {
    "additive": check_additive,
    "unit_demand": check_unit_demand,
    "submodular": check_submodular,
    "subadditive": check_subadditive,
    "self_bounding": check_self_bounding,
}


# ---------------------------------------------------------------------------
# Certified-far instances
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FarInstance:
    """A function with a certified distance bound used in soundness runs.

    mode "b": the full-parity blend (1 + chi_[n])/2, at l2 distance
    exactly 1/2 from every k-junta with k < n.  mode "a": a k-junta
    whose core is far from every enumerated grid core of a class;
    `certified_distance` is the exact minimum l2 distance from the core
    to that enumerated set, and `class_distance_lower_bound` subtracts
    the gamma/2 discretization slack to bound the distance to the
    un-discretized class.
    """

    table: FunctionTable
    certified_distance: float
    mode: str
    core_values: tuple = ()
    coords: tuple = ()
    class_distance_lower_bound: float = 0.0


def parity_blend_table(n: int) -> FunctionTable:
    """(1 + chi_[n])/2: indicator of even parity."""
    idx = np.arange(1 << n)
    popcount = np.zeros(1 << n, dtype=np.int64)
    for i in range(n):
        popcount += (idx >> i) & 1
    return FunctionTable(n, ((popcount % 2) == 0).astype(np.float64))


def make_far_instance(
    mode: str,
    target_class: str,
    n: int,
    k: int,
    eps: float,
    gamma: float | None = None,
    rng: np.random.Generator | None = None,
    core_values: Iterable[float] | None = None,
) -> FarInstance:
    """Build a soundness instance with a certified distance.

    Raises if eps exceeds the achievable certified distance.
    """
    if mode == "b":
        if not k < n:
            raise ValueError("mode b requires k < n")
        if eps > 0.5:
            raise ValueError(f"eps={eps} exceeds the certified junta distance 0.5")
        return FarInstance(table=parity_blend_table(n), certified_distance=0.5, mode="b")
    if mode != "a":
        raise ValueError(f"unknown far-instance mode {mode!r}")
    from .cores import CoreTable, cached_cores, dist_core_to_set, grid_levels, lift_core

    if gamma is None:
        raise ValueError("mode a requires gamma")
    cores = cached_cores(target_class, k, gamma)
    if core_values is not None:
        core = CoreTable(k, tuple(core_values))
        best_dist = dist_core_to_set(core, cores)
    else:
        levels = grid_levels(gamma)
        best_dist = -1.0
        core = None
        for flat in np.ndindex(*([len(levels)] * (1 << k))):
            candidate = CoreTable(k, tuple(levels[j] for j in flat))
            d = dist_core_to_set(candidate, cores)
            if d > best_dist:
                best_dist = d
                core = candidate
        assert core is not None
        core = CoreTable(k, tuple(core.values))
    if eps > best_dist:
        raise ValueError(
            f"eps={eps} exceeds the best achievable certified distance {best_dist:.6f}"
        )
    if rng is None:
        coords = tuple(range(1, k + 1))
    else:
        coords = tuple(int(c) + 1 for c in rng.choice(n, size=k, replace=False))
    table = lift_core(core, coords, n)
    return FarInstance(
        table=table,
        certified_distance=best_dist,
        mode="a",
        core_values=tuple(float(v) for v in np.asarray(core.values)),
        coords=coords,
        class_distance_lower_bound=max(0.0, best_dist - gamma / 2),
    )


# ---------------------------------------------------------------------------
# Spec file format: "key: values" lines, "#" comments.
# ---------------------------------------------------------------------------


def write_spec(spec: ValuationSpec, path) -> None:
    with open(path, "w") as fh:
        fh.write("\n".join(spec.canonical_lines()) + "\n")


def parse_spec_text(text: str) -> ValuationSpec:
    entries: dict[str, str] = {}
    for ln in text.splitlines():
        ln = ln.strip()
        if not ln or ln.startswith("#"):
            continue
        if ":" not in ln:
            raise ValueError(f"malformed spec line: {ln!r}")
        key, _, rest = ln.partition(":")
        entries[key.strip()] = rest.strip()
    for required in ("class", "n"):
        if required not in entries:
            raise ValueError(f"spec missing {required!r} field")
    class_tag = entries.pop("class")
    n = int(entries.pop("n"))
    seed = int(entries.pop("seed", "0"))
    params: dict[str, object] = {}
    for key, rest in entries.items():
        if key == "budget":
            params[key] = float(rest)
        elif key.startswith("cover_"):
            params[key] = tuple(int(tok) for tok in rest.split())
        else:
            params[key] = tuple(float(tok) for tok in rest.split())
    return ValuationSpec(class_tag=class_tag, n=n, params=params, seed=seed)


def read_spec(path) -> ValuationSpec:
    with open(path) as fh:
        return parse_spec_text(fh.read())
