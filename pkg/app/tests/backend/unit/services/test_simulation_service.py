# tests/test_simulation_service.py
import numpy as np
import pandas as pd
import pytest
from pydantic import ValidationError

from app.backend.core.exceptions import GroupError, InvalidInput
from app.backend.models.permutation import BlockGroup, ExplicitGroup
from app.backend.schemas.simulation import CSV_COLUMNS, SimulationSpec
from app.backend.services.permutations import full_cycle_group
from app.backend.services.simulation_service import (
    build_group,
    extended_specs,
    generate_dataset,
    leverage_density,
    run_type1,
    run_type2,
    sample_dist,
)
from app.backend.utils.io import write_group, write_report
from app.backend.utils.rng import stream


class TestSimulationService:
    """Test cases for the Monte Carlo harness"""

    @pytest.fixture
    def spec(self):
        """Small left-shift PALMRT cell"""
        return SimulationSpec(n=40, p=3, reps=20, k_plus_1=5, seed=17)


class TestSampleDist(TestSimulationService):
    """Test cases for sample_dist"""

    def test_cauchy_median(self):
        draws = sample_dist("t1", 100_000, np.random.default_rng(0))

        assert abs(np.median(draws)) < 0.02

    def test_t2_interquartile_range(self):
        """t with two degrees of freedom has IQR 2 * sqrt(2/3) = 1.633"""
        draws = sample_dist("t2", 100_000, np.random.default_rng(1))

        q1, q3 = np.quantile(draws, [0.25, 0.75])

        assert q3 - q1 == pytest.approx(1.633, rel=0.05)

    def test_unknown_distribution(self):
        with pytest.raises(InvalidInput):
            sample_dist("laplace", 10, np.random.default_rng(0))


class TestGenerateDataset(TestSimulationService):
    """Test cases for generate_dataset"""

    def test_same_stream_same_data(self, spec):
        first = generate_dataset(spec, 0.5, stream(spec.seed, "simulation", 3))
        second = generate_dataset(spec, 0.5, stream(spec.seed, "simulation", 3))

        assert np.array_equal(first.y, second.y)
        assert np.array_equal(first.z, second.z)

    def test_null_response_is_noise(self, spec):
        ds = generate_dataset(spec, 0.0, stream(spec.seed, "simulation", 0))

        assert np.array_equal(ds.y, ds.epsilon)
        assert np.all(ds.beta == 0.0)

    def test_b_only_moves_the_signal(self, spec):
        """Datasets for different b share Z, X and eps"""
        null = generate_dataset(spec, 0.0, stream(spec.seed, "simulation", 4))
        alt = generate_dataset(spec, 2.0, stream(spec.seed, "simulation", 4))

        assert np.array_equal(null.x, alt.x)
        assert np.allclose(alt.y - null.y, 2.0 * null.x)

    def test_fuzzed_beta(self, spec):
        ds = generate_dataset(spec, 1.0, stream(spec.seed, "simulation", 0), stream(spec.seed, "beta", 0))

        assert np.any(ds.beta != 0.0)
        assert np.allclose(ds.y - ds.z @ ds.beta - ds.x, ds.epsilon)


class TestSimulationSpec(TestSimulationService):
    """Test cases for SimulationSpec validation"""

    @pytest.mark.parametrize(
        "update",
        [
            {"p": 40},
            {"alpha_list": [0.0]},
            {"alpha_list": []},
            {"method": "weighted-cpt"},
            {"reps": 0},
        ],
    )
    def test_invalid(self, update):
        data = {"n": 40, "p": 3, "reps": 10, "seed": 1} | update

        with pytest.raises(ValidationError):
            SimulationSpec(**data)

    def test_extended_grid(self, spec):
        specs = extended_specs(spec)

        assert len(specs) == 9
        assert {(s.dist_data, s.dist_noise) for s in specs} == {
            (d, e) for d in ("gaussian", "t1", "t2") for e in ("gaussian", "t1", "t2")
        }
        assert all(s.n == 300 and s.p == 100 and s.reps == 50000 for s in specs)


class TestBuildGroup(TestSimulationService):
    """Test cases for group resolution"""

    def test_named_groups(self, spec):
        assert isinstance(build_group(spec), ExplicitGroup)
        assert build_group(spec).k_plus_1 == 5
        assert build_group(spec.model_copy(update={"group": "cyclic"})).k_plus_1 == 40
        assert build_group(spec.model_copy(update={"group": "random-iid"})).blocks == (tuple(range(40)),)

    def test_optimized_needs_design(self, spec):
        with pytest.raises(InvalidInput):
            build_group(spec.model_copy(update={"group": "optimized"}))

    def test_group_file(self, spec, tmp_path):
        path = tmp_path / "g.json"
        write_group(full_cycle_group(40), path)

        assert build_group(spec.model_copy(update={"group": str(path)})).k_plus_1 == 40

    def test_group_file_size_mismatch(self, spec, tmp_path):
        """A group file on the wrong number of points is a group error, not a usage error"""
        path = tmp_path / "g.json"
        write_group(full_cycle_group(12), path)

        with pytest.raises(GroupError) as exc_info:
            build_group(spec.model_copy(update={"group": str(path)}))

        assert exc_info.value.exit_code == 3
        assert exc_info.value.detail == {"group_n": 12, "n": 40}


class TestRunType1(TestSimulationService):
    """Test cases for run_type1"""

    def test_trivial_group_never_rejects(self, spec):
        """K = 0: phi = 1 so no alpha below one rejects"""
        report = run_type1(spec.model_copy(update={"k_plus_1": 1}))

        assert [cell.reject_rate for cell in report.cells] == [0.0, 0.0, 0.0]

    def test_cells(self, spec):
        report = run_type1(spec)

        assert report.kind == "type1"
        assert [cell.alpha for cell in report.cells] == [0.05, 0.1, 0.2]
        for cell in report.cells:
            assert cell.b == 0.0
            assert 0.0 <= cell.reject_rate <= 1.0
            assert cell.stderr == pytest.approx(np.sqrt(cell.reject_rate * (1 - cell.reject_rate) / 20))

    def test_rates_are_monotone_in_alpha(self, spec):
        rates = [cell.reject_rate for cell in run_type1(spec).cells]

        assert rates == sorted(rates)

    def test_worker_count_does_not_change_results(self, spec):
        """Same seed, one or two processes: identical counts"""
        serial = run_type1(spec, threads=1, chunk_size=5)
        parallel = run_type1(spec, threads=2, chunk_size=5)

        assert [c.reject_rate for c in serial.cells] == [c.reject_rate for c in parallel.cells]

    def test_chunk_size_does_not_change_results(self, spec):
        one = run_type1(spec, chunk_size=1)
        many = run_type1(spec, chunk_size=7)

        assert [c.reject_rate for c in one.cells] == [c.reject_rate for c in many.cells]

    def test_nonzero_b_rejected(self, spec):
        with pytest.raises(InvalidInput):
            run_type1(spec.model_copy(update={"b_grid": [0.0, 1.0]}))

    def test_bad_threads(self, spec):
        with pytest.raises(InvalidInput):
            run_type1(spec, threads=0)

    @pytest.mark.parametrize(
        "update",
        [
            {"method": "cpt", "k_plus_1": 4},
            {"method": "cpt", "k_plus_1": 4, "eta_mode": "power"},
            {"method": "weighted-cpt", "k_plus_1": 4, "w0": 0.4},
            {"method": "weighted-palmrt", "w0": 0.3},
            {"method": "palmrt", "group": "random-iid", "m_samples": 50},
            {"method": "palmrt", "group": "optimized", "m_samples": 50, "p": 2},
            {"method": "palmrt", "beta_fuzz": True, "dist_data": "t2", "dist_noise": "t1"},
        ],
    )
    def test_method_and_group_variants(self, spec, update):
        report = run_type1(spec.model_copy(update=update | {"reps": 4}))

        assert len(report.cells) == 3
        assert all(0.0 <= cell.reject_rate <= 1.0 for cell in report.cells)

    @pytest.mark.parametrize("method", ["palmrt", "cpt"])
    def test_random_beta_changes_no_decision(self, spec, method):
        """A fuzzed nuisance coefficient leaves every rejection count unchanged"""
        cfg = spec.model_copy(update={"method": method, "k_plus_1": 4})

        plain = run_type1(cfg)
        fuzzed = run_type1(cfg.model_copy(update={"beta_fuzz": True}))

        assert [c.reject_rate for c in plain.cells] == [c.reject_rate for c in fuzzed.cells]

    def test_sampled_group_for_palmrt(self, spec):
        """random-iid keeps its block form for PALMRT"""
        assert isinstance(build_group(spec.model_copy(update={"group": "random-iid"})), BlockGroup)


class TestRunType2(TestSimulationService):
    """Test cases for run_type2"""

    def test_zero_effect_matches_type1(self, spec):
        """At b = 0 the two-sided Type-II accept rate is the complement of the Type-I rate"""
        # Arrange
        two_sided = spec.model_copy(update={"method": "palmrt-two-sided"})

        # Act
        t1 = run_type1(two_sided)
        t2 = run_type2(two_sided.model_copy(update={"b_grid": [0.0]}))

        # Assert
        for a, b in zip(t1.cells, t2.cells):
            assert b.accept_rate == pytest.approx(1.0 - a.reject_rate)

    def test_strong_signal_is_detected(self, spec):
        cfg = spec.model_copy(update={"group": "cyclic", "b_grid": [0.0, 5.0]})

        report = run_type2(cfg)

        strong = [c for c in report.cells if c.b == 5.0 and c.alpha == 0.1]
        assert strong[0].reject_rate >= 0.9

    def test_empty_grid(self, spec):
        with pytest.raises(InvalidInput):
            run_type2(spec)

    def test_csv_columns(self, spec, tmp_path):
        """The CSV carries the fixed column set, one row per (b, alpha)"""
        # Arrange
        report = run_type2(spec.model_copy(update={"b_grid": [0.0, 1.0], "reps": 5}))
        path = tmp_path / "t2.csv"

        # Act
        write_report(report, path)
        frame = pd.read_csv(path)

        # Assert
        assert list(frame.columns) == CSV_COLUMNS
        assert len(frame) == 6
        assert set(frame["b"]) == {0.0, 1.0}


class TestLeverageDensity(TestSimulationService):
    """Test cases for leverage_density"""

    def test_coordinate_design(self):
        """Z = (e1, e2) in R^5: three leverages at 0 and two at 1"""
        z = np.eye(5)[:, :2]

        hist = leverage_density(z, 4)

        assert hist.n == 5
        assert hist.counts == [3, 0, 0, 2]
        assert hist.edges == pytest.approx([0.0, 0.25, 0.5, 0.75, 1.0])

    def test_heavy_tails_spread_leverages(self):
        """t2 designs have a larger leverage variance than Gaussian ones at n=200, p=40"""
        rng = np.random.default_rng(55)
        spread = {}
        for dist in ("gaussian", "t2"):
            variances = []
            for _ in range(20):
                hist = leverage_density(sample_dist(dist, 200 * 40, rng).reshape(200, 40), 50)
                mids = 0.5 * (np.array(hist.edges[:-1]) + np.array(hist.edges[1:]))
                mean = np.average(mids, weights=hist.counts)
                variances.append(np.average((mids - mean) ** 2, weights=hist.counts))
            spread[dist] = np.mean(variances)

        assert spread["t2"] > spread["gaussian"]

    def test_counts_sum_to_n(self):
        hist = leverage_density(np.random.default_rng(0).standard_normal((60, 7)), 13)

        assert sum(hist.counts) == 60

    def test_bins_must_be_positive(self):
        with pytest.raises(InvalidInput):
            leverage_density(np.eye(3)[:, :1], 0)
