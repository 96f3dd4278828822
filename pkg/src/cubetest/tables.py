"""Points, function tables and exact Fourier analysis on the Boolean cube.

Functions live on {0,1}^n with values in [0,1] and are stored as dense
tables of length 2^n.  Coordinates are 1-indexed in every public
interface; internally a point is an integer mask whose bit (i-1) holds
coordinate i.  The Fourier character convention is fixed once here:

    chi_T(x) = (-1)^{sum of x_i over i in T}

so that hat_f(T) = E_x[f(x) * chi_T(x)].
"""

from __future__ import annotations

import hashlib
import threading
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

MAX_DIMENSION = 24  # dense tables only; larger cubes are out of scope

# Tolerance for snapping float noise at the [0,1] boundary.  Values
# further outside the range than this are construction errors.
_BOUNDARY_SNAP = 1e-9


class DimensionMismatchError(ValueError):
    """Operands live on cubes of different dimension."""


def mask_of(coords: Iterable[int], n: int) -> int:
    """Integer mask for a set of 1-indexed coordinates."""
    m = 0
    for i in coords:
        if not 1 <= i <= n:
            raise ValueError(f"coordinate {i} outside [1..{n}]")
        m |= 1 << (i - 1)
    return m


def coords_of(mask: int) -> frozenset[int]:
    """1-indexed coordinate set of an integer mask."""
    out = set()
    i = 1
    while mask:
        if mask & 1:
            out.add(i)
        mask >>= 1
        i += 1
    return frozenset(out)


@dataclass(frozen=True)
class CubePoint:
    """A point of {0,1}^n.

    `mask` holds coordinate i in bit (i-1); `point[i]` reads a single
    coordinate (1-indexed).
    """

    n: int
    mask: int

    def __post_init__(self):
        if not 0 < self.n <= MAX_DIMENSION:
            raise ValueError(f"dimension must be in [1..{MAX_DIMENSION}]")
        if not 0 <= self.mask < (1 << self.n):
            raise ValueError("mask has bits outside the cube")

    @classmethod
    def from_bits(cls, bits: Sequence[int]) -> "CubePoint":
        mask = 0
        for i, b in enumerate(bits):
            if b not in (0, 1):
                raise ValueError("bits must be 0 or 1")
            mask |= b << i
        return cls(len(bits), mask)

    @classmethod
    def from_string(cls, s: str) -> "CubePoint":
        """Parse a bitstring with coordinate 1 leftmost."""
        return cls.from_bits([int(c) for c in s])

    @classmethod
    def zero(cls, n: int) -> "CubePoint":
        return cls(n, 0)

    def __getitem__(self, i: int) -> int:
        if not 1 <= i <= self.n:
            raise IndexError(f"coordinate {i} outside [1..{self.n}]")
        return (self.mask >> (i - 1)) & 1

    def to_string(self) -> str:
        return "".join(str(self[i]) for i in range(1, self.n + 1))

    def _check_dim(self, other: "CubePoint") -> None:
        if self.n != other.n:
            raise DimensionMismatchError(f"dimensions differ: {self.n} vs {other.n}")

    def __and__(self, other: "CubePoint") -> "CubePoint":
        self._check_dim(other)
        return CubePoint(self.n, self.mask & other.mask)

    def __or__(self, other: "CubePoint") -> "CubePoint":
        self._check_dim(other)
        return CubePoint(self.n, self.mask | other.mask)

    def __xor__(self, other: "CubePoint") -> "CubePoint":
        self._check_dim(other)
        return CubePoint(self.n, self.mask ^ other.mask)

    def __repr__(self) -> str:
        return f"CubePoint({self.to_string()!r})"


def meet_join_xor(x: CubePoint, y: CubePoint) -> tuple[CubePoint, CubePoint, CubePoint]:
    """Bitwise (x AND y, x OR y, x XOR y); dimensions must match."""
    return (x & y, x | y, x ^ y)


def combine(on_s: Mapping[int, int], on_complement: Mapping[int, int]) -> CubePoint:
    """Splice two partial assignments into one point.

    The two index sets must be disjoint and their union must be exactly
    {1..n} where n is the total number of assigned coordinates.
    """
    overlap = set(on_s) & set(on_complement)
    if overlap:
        raise ValueError(f"overlapping assignment to coordinates {sorted(overlap)}")
    merged = dict(on_s)
    merged.update(on_complement)
    n = len(merged)
    if n == 0:
        raise ValueError("empty assignment")
    if set(merged) != set(range(1, n + 1)):
        raise ValueError("assignments do not cover a full coordinate range")
    mask = 0
    for i, b in merged.items():
        if b not in (0, 1):
            raise ValueError("assignment values must be 0 or 1")
        mask |= b << (i - 1)
    return CubePoint(n, mask)


class FunctionTable:
    """Dense table of a function {0,1}^n -> [0,1].

    Values are validated on construction: anything outside [0,1] by more
    than a float-noise margin is an error, values within the margin are
    snapped to the boundary.  Instances are immutable.
    """

    __slots__ = ("n", "values")

    def __init__(self, n: int, values):
        if not 0 < n <= MAX_DIMENSION:
            raise ValueError(f"dimension must be in [1..{MAX_DIMENSION}]")
        arr = np.asarray(values, dtype=np.float64)
        if arr.shape != (1 << n,):
            raise ValueError(f"expected {1 << n} values for n={n}, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("table values must be finite")
        if arr.min() < -_BOUNDARY_SNAP or arr.max() > 1.0 + _BOUNDARY_SNAP:
            bad = arr[(arr < -_BOUNDARY_SNAP) | (arr > 1.0 + _BOUNDARY_SNAP)][0]
            raise ValueError(f"table value {bad} outside [0,1]")
        arr = np.clip(arr, 0.0, 1.0)
        arr.flags.writeable = False
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "values", arr)

    def __setattr__(self, name, value):
        raise AttributeError("FunctionTable is immutable")

    @classmethod
    def from_callable(cls, n: int, fn: Callable[[CubePoint], float]) -> "FunctionTable":
        return cls(n, [fn(CubePoint(n, m)) for m in range(1 << n)])

    def value_at(self, point: CubePoint) -> float:
        if point.n != self.n:
            raise DimensionMismatchError(f"dimensions differ: {point.n} vs {self.n}")
        return float(self.values[point.mask])

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, FunctionTable)
            and self.n == other.n
            and np.array_equal(self.values, other.values)
        )

    def __hash__(self):
        return hash((self.n, self.values.tobytes()))

    def __repr__(self) -> str:
        return f"FunctionTable(n={self.n})"


class FourierSpectrum:
    """Fourier coefficients hat_f(T), indexed by the mask of T."""

    __slots__ = ("n", "coefficients")

    def __init__(self, n: int, coefficients):
        arr = np.asarray(coefficients, dtype=np.float64)
        if arr.shape != (1 << n,):
            raise ValueError(f"expected {1 << n} coefficients for n={n}")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "coefficients", arr)

    def __setattr__(self, name, value):
        raise AttributeError("FourierSpectrum is immutable")

    def coefficient(self, T: Iterable[int]) -> float:
        return float(self.coefficients[mask_of(T, self.n)])


def _fwht_inplace(a: np.ndarray) -> None:
    """Unnormalized fast Walsh-Hadamard butterfly, in place."""
    size = a.shape[0]
    h = 1
    while h < size:
        v = a.reshape(-1, 2 * h)
        x = v[:, :h].copy()
        y = v[:, h:].copy()
        v[:, :h] = x + y
        v[:, h:] = x - y
        h *= 2


def walsh_hadamard(f: FunctionTable) -> FourierSpectrum:
    """Exact transform: hat_f(T) = E_x[f(x) * chi_T(x)], O(n 2^n).

    Raises if the result fails Parseval against the input table, which
    would indicate numerical breakage rather than a user error.
    """
    a = f.values.astype(np.float64).copy()
    _fwht_inplace(a)
    a /= a.shape[0]
    energy_time = float(np.mean(f.values ** 2))
    energy_freq = float(np.sum(a ** 2))
    if abs(energy_time - energy_freq) > 1e-9:
        raise ArithmeticError("Parseval check failed in walsh_hadamard")
    return FourierSpectrum(f.n, a)


def inverse_walsh_hadamard(spectrum: FourierSpectrum) -> FunctionTable:
    """Reconstruct the table: f(x) = sum_T hat_f(T) * chi_T(x)."""
    a = spectrum.coefficients.astype(np.float64).copy()
    _fwht_inplace(a)
    return FunctionTable(spectrum.n, a)


def lp_distance(f: FunctionTable, g: FunctionTable, p: float) -> float:
    """Normalized distance (E_x |f-g|^p)^(1/p), exact over the table."""
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    if f.n != g.n:
        raise DimensionMismatchError(f"dimensions differ: {f.n} vs {g.n}")
    diff = np.abs(f.values - g.values)
    return float(np.mean(diff ** p) ** (1.0 / p))


def hamming_distance(f: FunctionTable, g: FunctionTable) -> float:
    """Fraction of points where the tables disagree (exact comparison)."""
    if f.n != g.n:
        raise DimensionMismatchError(f"dimensions differ: {f.n} vs {g.n}")
    return float(np.mean(f.values != g.values))


def discretize(f: FunctionTable, gamma: float) -> FunctionTable:
    """Round every value to the nearest multiple of gamma.

    Exact half-ties round toward +inf and the result is clamped to [0,1].
    A relative nudge of 1e-12 treats values within float noise of a tie
    as ties, so e.g. 0.25 with gamma=0.1 rounds up to 0.3.
    """
    if not 0 < gamma <= 1:
        raise ValueError(f"gamma must be in (0,1], got {gamma}")
    q = f.values / gamma
    k = np.floor(q + 0.5 + 1e-12 * np.maximum(1.0, q))
    return FunctionTable(f.n, np.clip(k * gamma, 0.0, 1.0))


class QueryOracle:
    """Black-box access to a function with an atomic query counter.

    Every evaluated point increments the counter by exactly one; batch
    queries increment by the batch size.  The counter is lock-protected
    so concurrent runs sharing an oracle still count correctly, though a
    single tester run treats its oracle as exclusively owned.
    """

    def __init__(self, n: int, evaluate_batch: Callable[[np.ndarray], np.ndarray]):
        self.n = n
        self._evaluate_batch = evaluate_batch
        self._count = 0
        self._lock = threading.Lock()

    @property
    def query_count(self) -> int:
        with self._lock:
            return self._count

    def query(self, point: CubePoint) -> float:
        if point.n != self.n:
            raise DimensionMismatchError(f"dimensions differ: {point.n} vs {self.n}")
        return float(self.query_masks(np.asarray([point.mask], dtype=np.int64))[0])

    def query_masks(self, masks: np.ndarray) -> np.ndarray:
        """Evaluate a batch of integer-mask points; counts len(masks) queries."""
        masks = np.asarray(masks, dtype=np.int64)
        with self._lock:
            self._count += int(masks.size)
        return self._evaluate_batch(masks)


def make_counting_oracle(f: FunctionTable) -> QueryOracle:
    """Oracle answering table lookups, counter starting at zero."""
    values = f.values

    def evaluate(masks: np.ndarray) -> np.ndarray:
        return values[masks]

    return QueryOracle(f.n, evaluate)


# ---------------------------------------------------------------------------
# Table file format: header line "dim n", then one "bitstring value" line per
# point (bitstring coordinate order, index 1 leftmost).  Lines starting with
# "#" are metadata comments and are ignored by the parser.
# ---------------------------------------------------------------------------


def write_table(f: FunctionTable, path, metadata: Sequence[str] = ()) -> None:
    lines = [f"# {m}" for m in metadata]
    lines.append(f"dim {f.n}")
    for mask in range(1 << f.n):
        point = CubePoint(f.n, mask)
        lines.append(f"{point.to_string()} {float(f.values[mask])!r}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_table(path) -> FunctionTable:
    with open(path) as fh:
        raw = [ln.strip() for ln in fh]
    lines = [ln for ln in raw if ln and not ln.startswith("#")]
    if not lines or not lines[0].startswith("dim "):
        raise ValueError("table file must start with a 'dim n' header")
    try:
        n = int(lines[0].split()[1])
    except (IndexError, ValueError) as exc:
        raise ValueError("malformed 'dim' header") from exc
    if not 0 < n <= MAX_DIMENSION:
        raise ValueError(f"dimension {n} outside [1..{MAX_DIMENSION}]")
    values = np.full(1 << n, np.nan)
    for ln in lines[1:]:
        parts = ln.split()
        if len(parts) != 2:
            raise ValueError(f"malformed table line: {ln!r}")
        bits, val = parts
        if len(bits) != n or any(c not in "01" for c in bits):
            raise ValueError(f"bad bitstring {bits!r} for dimension {n}")
        mask = CubePoint.from_string(bits).mask
        if not np.isnan(values[mask]):
            raise ValueError(f"duplicate point {bits}")
        values[mask] = float(val)
    if np.any(np.isnan(values)):
        missing = int(np.flatnonzero(np.isnan(values))[0])
        raise ValueError(f"missing point {CubePoint(n, missing).to_string()}")
    return FunctionTable(n, values)


def table_digest(f: FunctionTable) -> str:
    """Short stable digest of a table, used in file metadata."""
    h = hashlib.sha256()
    h.update(str(f.n).encode())
    h.update(f.values.tobytes())
    return h.hexdigest()[:16]
