import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cubetest.tables import (
    CubePoint,
    DimensionMismatchError,
    FunctionTable,
    combine,
    discretize,
    hamming_distance,
    inverse_walsh_hadamard,
    lp_distance,
    make_counting_oracle,
    meet_join_xor,
    read_table,
    walsh_hadamard,
    write_table,
)
from oracles import naive_fourier_coefficient, naive_lp_distance


def random_table(n, rng):
    return FunctionTable(n, rng.uniform(0.0, 1.0, 1 << n))


class TestPoints:
    def test_meet_join_xor_basic(self):
        x = CubePoint.from_string("10")
        y = CubePoint.from_string("01")
        meet, join, xor = meet_join_xor(x, y)
        assert meet.to_string() == "00"
        assert join.to_string() == "11"
        assert xor.to_string() == "11"

    def test_meet_join_xor_idempotent(self):
        x = CubePoint.from_string("11")
        meet, join, xor = meet_join_xor(x, x)
        assert (meet.to_string(), join.to_string(), xor.to_string()) == ("11", "11", "00")

    def test_meet_join_xor_zero_identity(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            n = int(rng.integers(1, 10))
            x = CubePoint(n, int(rng.integers(0, 1 << n)))
            zero = CubePoint.zero(n)
            meet, join, xor = meet_join_xor(x, zero)
            assert meet == zero and join == x and xor == x

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            meet_join_xor(CubePoint.from_string("10"), CubePoint.from_string("101"))

    def test_indexing_is_one_based(self):
        p = CubePoint.from_string("100")
        assert (p[1], p[2], p[3]) == (1, 0, 0)
        with pytest.raises(IndexError):
            p[0]


class TestCombine:
    def test_splice(self):
        assert combine({1: 1}, {2: 0, 3: 0}).to_string() == "100"

    def test_empty_s_is_identity(self):
        z = combine({}, {1: 0, 2: 1, 3: 1})
        assert z.to_string() == "011"

    def test_full_s_is_identity(self):
        z = combine({1: 0, 2: 1, 3: 1}, {})
        assert z.to_string() == "011"

    def test_overlap_rejected(self):
        with pytest.raises(ValueError):
            combine({1: 0}, {1: 1, 2: 0})

    def test_incomplete_rejected(self):
        with pytest.raises(ValueError):
            combine({1: 0}, {3: 1})


class TestFunctionTable:
    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            FunctionTable(1, [0.0, 1.001])
        with pytest.raises(ValueError):
            FunctionTable(1, [-0.5, 0.5])

    def test_boundary_noise_snapped(self):
        t = FunctionTable(1, [0.0, 1.0 + 1e-15])
        assert t.values[1] == 1.0

    def test_wrong_length(self):
        with pytest.raises(ValueError):
            FunctionTable(2, [0.0, 1.0])

    def test_immutable(self):
        t = FunctionTable(1, [0.0, 1.0])
        with pytest.raises(AttributeError):
            t.n = 3
        with pytest.raises(ValueError):
            t.values[0] = 0.5


class TestWalshHadamard:
    def test_constant(self):
        for c in (0.0, 0.3, 1.0):
            sp = walsh_hadamard(FunctionTable(3, [c] * 8))
            assert sp.coefficient([]) == pytest.approx(c, abs=1e-15)
            assert np.all(np.abs(sp.coefficients[1:]) < 1e-15)

    def test_dictator_frozen(self):
        # two-point defining expectation: hat(empty) = (0+1)/2,
        # hat({1}) = (0*1 + 1*(-1))/2
        f = FunctionTable(1, [0.0, 1.0])
        assert naive_fourier_coefficient(f.values, 1, 0) == 0.5
        assert naive_fourier_coefficient(f.values, 1, 1) == -0.5
        sp = walsh_hadamard(f)
        assert sp.coefficient([]) == 0.5
        assert sp.coefficient([1]) == -0.5

    def test_matches_defining_expectation(self):
        rng = np.random.default_rng(5)
        f = random_table(5, rng)
        sp = walsh_hadamard(f)
        for t_mask in range(32):
            assert sp.coefficients[t_mask] == pytest.approx(
                naive_fourier_coefficient(f.values, 5, t_mask), abs=1e-12
            )

    def test_round_trip(self):
        rng = np.random.default_rng(8)
        f = random_table(8, rng)
        back = inverse_walsh_hadamard(walsh_hadamard(f))
        assert np.max(np.abs(back.values - f.values)) < 1e-12

    def test_parseval_up_to_n12(self):
        rng = np.random.default_rng(12)
        for n in (2, 5, 9, 12):
            f = random_table(n, rng)
            sp = walsh_hadamard(f)
            assert abs(np.sum(sp.coefficients ** 2) - np.mean(f.values ** 2)) < 1e-9


class TestDistances:
    def test_constant_gap(self):
        f = FunctionTable(3, [0.0] * 8)
        g = FunctionTable(3, [1.0] * 8)
        for p in (1.0, 2.0, 3.5):
            assert lp_distance(f, g, p) == 1.0
        assert hamming_distance(f, g) == 1.0

    def test_identity(self):
        rng = np.random.default_rng(1)
        f = random_table(4, rng)
        assert lp_distance(f, f, 2.0) == 0.0
        assert hamming_distance(f, f) == 0.0

    def test_dictator_values(self):
        f = FunctionTable(2, [0.0, 1.0, 0.0, 1.0])  # x_1
        zero = FunctionTable(2, [0.0] * 4)
        assert lp_distance(f, zero, 2.0) == pytest.approx(1 / np.sqrt(2), abs=1e-15)
        assert hamming_distance(f, zero) == 0.5

    def test_p_below_one_rejected(self):
        f = FunctionTable(1, [0.0, 1.0])
        with pytest.raises(ValueError):
            lp_distance(f, f, 0.5)

    def test_matches_naive(self):
        rng = np.random.default_rng(3)
        f, g = random_table(5, rng), random_table(5, rng)
        for p in (1.0, 2.0, 4.0):
            assert lp_distance(f, g, p) == pytest.approx(
                naive_lp_distance(f.values, g.values, 5, p), abs=1e-12
            )

    def test_metric_axioms(self):
        rng = np.random.default_rng(17)
        for _ in range(25):
            f, g, h = (random_table(4, rng) for _ in range(3))
            for p in (1.0, 2.0, 3.0):
                assert lp_distance(f, g, p) == pytest.approx(lp_distance(g, f, p), abs=1e-12)
                assert lp_distance(f, g, p) <= (
                    lp_distance(f, h, p) + lp_distance(h, g, p) + 1e-12
                )

    def test_l1_below_l2(self):
        rng = np.random.default_rng(23)
        for _ in range(50):
            f, g = random_table(5, rng), random_table(5, rng)
            assert lp_distance(f, g, 1.0) <= lp_distance(f, g, 2.0) + 1e-12


class TestDiscretize:
    def test_nearest_multiple(self):
        f = FunctionTable(1, [0.26, 0.26])
        assert np.allclose(discretize(f, 0.1).values, 0.3)

    def test_fixed_points(self):
        f = FunctionTable(2, [0.0, 0.25, 0.5, 1.0])
        out = discretize(f, 0.25)
        assert np.array_equal(out.values, f.values)

    def test_half_rounds_up(self):
        f = FunctionTable(1, [0.25, 0.25])
        assert np.allclose(discretize(f, 0.1).values, 0.3)
        f2 = FunctionTable(1, [0.875, 0.875])
        assert np.allclose(discretize(f2, 0.25).values, 1.0)

    @settings(max_examples=200, deadline=None)
    @given(
        st.floats(min_value=0.0, max_value=1.0, allow_nan=False),
        st.integers(min_value=1, max_value=50),
    )
    def test_rounding_bound_and_range(self, value, denom):
        gamma = 1.0 / denom
        out = discretize(FunctionTable(1, [value, value]), gamma)
        assert abs(out.values[0] - value) <= gamma / 2 + 1e-9
        assert 0.0 <= out.values[0] <= 1.0


class TestQueryOracle:
    def test_counts(self):
        f = FunctionTable(2, [0.0, 0.5, 0.5, 1.0])
        oracle = make_counting_oracle(f)
        assert oracle.query_count == 0
        assert oracle.query(CubePoint.from_string("10")) == 0.5
        assert oracle.query_count == 1
        oracle.query_masks(np.array([0, 1, 2, 3]))
        assert oracle.query_count == 5

    def test_deterministic(self):
        rng = np.random.default_rng(2)
        f = random_table(4, rng)
        oracle = make_counting_oracle(f)
        masks = np.arange(16)
        assert np.array_equal(oracle.query_masks(masks), oracle.query_masks(masks))

    def test_counter_safe_under_concurrency(self):
        from concurrent.futures import ThreadPoolExecutor

        rng = np.random.default_rng(3)
        oracle = make_counting_oracle(random_table(6, rng))
        masks = np.arange(64)
        with ThreadPoolExecutor(max_workers=8) as pool:
            list(pool.map(lambda _: oracle.query_masks(masks), range(100)))
        assert oracle.query_count == 6400


class TestTableFiles:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(9)
        f = random_table(4, rng)
        path = tmp_path / "t.tbl"
        write_table(f, path, metadata=("spec abc", "normalization 1.0"))
        g = read_table(path)
        assert g == f
        text = path.read_text()
        assert text.startswith("# spec abc")
        assert "dim 4" in text

    def test_duplicate_rejected(self, tmp_path):
        path = tmp_path / "t.tbl"
        path.write_text("dim 1\n0 0.0\n0 0.5\n")
        with pytest.raises(ValueError, match="duplicate"):
            read_table(path)

    def test_missing_rejected(self, tmp_path):
        path = tmp_path / "t.tbl"
        path.write_text("dim 2\n00 0.0\n10 0.5\n01 0.5\n")
        with pytest.raises(ValueError, match="missing"):
            read_table(path)

    def test_bad_header_rejected(self, tmp_path):
        path = tmp_path / "t.tbl"
        path.write_text("00 0.0\n")
        with pytest.raises(ValueError, match="header"):
            read_table(path)

    def test_value_range_enforced(self, tmp_path):
        path = tmp_path / "t.tbl"
        path.write_text("dim 1\n0 0.0\n1 1.5\n")
        with pytest.raises(ValueError):
            read_table(path)
