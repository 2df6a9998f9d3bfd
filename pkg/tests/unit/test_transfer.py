"""Unit tests for negative-transfer reports and their aggregation."""

import json
import math

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from src.errors import ContractError
from src.evaluation.transfer import NTReport, aggregate_runs, negative_transfer

metric = st.floats(min_value=0.0, max_value=10.0, allow_nan=False)
paired = st.integers(1, 8).flatmap(
    lambda n: st.tuples(st.lists(metric, min_size=n, max_size=n), st.lists(metric, min_size=n, max_size=n))
)


class TestNegativeTransfer:
    """Test suite for negative_transfer."""

    def test_single_loss_flagged(self):
        """Test that one worse task out of two is counted."""
        report = negative_transfer([1.0, 1.0], [0.9, 1.1])
        assert report.flags == (False, True)
        assert report.nt_count == 1
        assert report.delta == pytest.approx((-0.1, 0.1))

    def test_epsilon_tolerates_small_losses(self):
        """Test that deltas up to epsilon are not flagged."""
        assert negative_transfer([1.0, 1.0], [0.9, 1.1], epsilon=0.2).nt_count == 0

    def test_tie_is_not_negative_transfer(self):
        """Test that delta == epsilon is not flagged."""
        assert negative_transfer([0.5], [0.5]).nt_count == 0

    def test_absent_task_never_flagged(self):
        """Test that a NaN metric yields a NaN delta and no flag."""
        report = negative_transfer([1.0, float("nan")], [2.0, 0.5])
        assert math.isnan(report.delta[1])
        assert report.flags == (True, False)
        assert json.loads(report.to_json())["delta"] == [1.0, None]

    def test_length_mismatch(self):
        """Test that both vectors must cover the same tasks."""
        with pytest.raises(ContractError, match="length"):
            negative_transfer([1.0, 2.0], [1.0])

    def test_negative_epsilon(self):
        """Test that epsilon must be non-negative."""
        with pytest.raises(ContractError):
            negative_transfer([1.0], [1.0], epsilon=-0.1)

    @settings(max_examples=200, deadline=None)
    @given(paired)
    def test_delta_is_antisymmetric(self, vectors):
        """Test that swapping the roles negates every delta."""
        a, b = vectors
        forward = negative_transfer(a, b).delta
        backward = negative_transfer(b, a).delta
        assert forward == tuple(-d for d in backward)

    @settings(max_examples=200, deadline=None)
    @given(paired, metric, metric)
    def test_count_monotone_in_epsilon(self, vectors, e1, e2):
        """Test that a larger epsilon never flags more tasks."""
        a, b = vectors
        low, high = sorted((e1, e2))
        assert negative_transfer(a, b, low).nt_count >= negative_transfer(a, b, high).nt_count

    @settings(max_examples=200, deadline=None)
    @given(paired, metric)
    def test_json_round_trip(self, vectors, epsilon):
        """Test that a report survives JSON serialization unchanged."""
        a, b = vectors
        report = negative_transfer(a, b, epsilon, variant="AMTFL", config_digest="abc")
        assert NTReport.from_json(report.to_json()) == report

    def test_frame_and_csv(self, tmp_path):
        """Test the tabular form of a report."""
        report = negative_transfer([1.0, 2.0], [1.5, 1.0], task_names=("a", "b"))
        frame = report.to_frame()
        assert list(frame.columns) == ["task_id", "task_name", "stl", "mtl", "delta", "nt_flag"]
        assert frame["nt_flag"].tolist() == [True, False]
        path = report.to_csv(tmp_path / "nt.csv")
        assert pd.read_csv(path)["task_name"].tolist() == ["a", "b"]


class TestAggregateRuns:
    """Test suite for aggregate_runs."""

    def test_mean_of_two_runs(self):
        """Test that runs m and 3m average to 2m with std m."""
        m = np.array([0.5, 1.25])
        reports = [negative_transfer([1.0, 1.0], m), negative_transfer([1.0, 1.0], 3 * m)]
        merged = aggregate_runs(reports)
        assert merged.mtl == pytest.approx(tuple(2 * m))
        assert merged.mtl_std == pytest.approx(tuple(m))
        assert merged.stl_std == (0.0, 0.0)
        assert merged.runs == 2
        assert merged.nt_count == 1

    def test_identical_runs_unchanged(self):
        """Test that aggregating identical reports changes no value."""
        report = negative_transfer([0.1, 0.7, 0.3], [0.2, 0.6, 0.3])
        merged = aggregate_runs([report, report, report])
        assert merged.mtl == report.mtl
        assert merged.stl == report.stl
        assert merged.mtl_std == (0.0, 0.0, 0.0)
        assert merged.nt_count == report.nt_count

    def test_flags_recomputed_from_means(self):
        """Test that flags come from averaged metrics, not from per-run votes."""
        first = negative_transfer([1.0], [1.1])
        second = negative_transfer([1.0], [0.7])
        assert (first.nt_count, second.nt_count) == (1, 0)
        assert aggregate_runs([first, second]).nt_count == 0

    def test_missing_run_value_ignored(self):
        """Test that a NaN metric in one run does not poison the mean."""
        merged = aggregate_runs(
            [negative_transfer([1.0], [float("nan")]), negative_transfer([1.0], [0.5])]
        )
        assert merged.mtl == (0.5,)

    def test_single_report_keeps_std(self):
        """Test that one report aggregates to itself."""
        report = negative_transfer([1.0], [2.0])
        assert aggregate_runs([report]) == report

    def test_empty(self):
        """Test that there must be something to aggregate."""
        with pytest.raises(ContractError):
            aggregate_runs([])

    @pytest.mark.parametrize(
        "other",
        [
            negative_transfer([1.0, 1.0, 1.0], [1.0, 1.0, 1.0]),
            negative_transfer([1.0, 1.0], [1.0, 1.0], epsilon=0.5),
            negative_transfer([1.0, 1.0], [1.0, 1.0], variant="AMTFL"),
            negative_transfer([1.0, 1.0], [1.0, 1.0], config_digest="other"),
        ],
    )
    def test_incompatible_reports(self, other):
        """Test that reports must agree on tasks, epsilon, variant and config."""
        with pytest.raises(ContractError):
            aggregate_runs([negative_transfer([1.0, 1.0], [1.0, 1.0]), other])
