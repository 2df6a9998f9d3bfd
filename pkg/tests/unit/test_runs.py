"""Unit tests for seeded run sets."""

import numpy as np
import pytest

from src.errors import ConfigError, TrainingError
from src.pipeline.dataset import train_test_split
from src.training import runs
from src.training.runs import run_set


@pytest.fixture
def split(synthetic_small):
    """Train/test partition of the reduced synthetic problem."""
    return train_test_split(synthetic_small, 0.25, seed=0)


class TestRunSet:
    """Test suite for run_set."""

    def test_one_result_per_seed_in_order(self, split, spec_factory, fast_train_config):
        """Test that every seed yields metrics for every task."""
        spec = spec_factory(split.train, "MTL")
        results = run_set(spec, split.train, split.test, fast_train_config, workers=1)
        assert [r.seed for r in results] == [0, 1]
        assert all(r.ok for r in results)
        assert all(r.metrics.shape == (split.train.n_tasks,) for r in results)

    def test_pool_matches_in_process(self, split, spec_factory, fast_train_config):
        """Test that the worker count does not change any result."""
        spec = spec_factory(split.train, "UAMTFL")
        serial = run_set(spec, split.train, split.test, fast_train_config, workers=1)
        pooled = run_set(spec, split.train, split.test, fast_train_config, workers=2)
        for a, b in zip(serial, pooled):
            np.testing.assert_array_equal(a.metrics, b.metrics)

    def test_ridge_fitter(self, split, spec_factory, fast_train_config):
        """Test that ridge STL runs have zero-epoch histories."""
        spec = spec_factory(split.train, "STL")
        results = run_set(spec, split.train, split.test, fast_train_config, workers=1, fitter="ridge")
        assert all(r.ok and r.history.epochs == 0 for r in results)
        np.testing.assert_array_equal(results[0].metrics, results[1].metrics)

    def test_ridge_only_for_stl(self, split, spec_factory, fast_train_config):
        """Test that ridge cannot stand in for a multi-task variant."""
        spec = spec_factory(split.train, "MTL")
        with pytest.raises(ConfigError) as exc:
            run_set(spec, split.train, split.test, fast_train_config, fitter="ridge")
        assert exc.value.field == "stl_baseline"

    def test_invalid_worker_count(self, split, spec_factory, fast_train_config):
        """Test that zero workers is rejected."""
        spec = spec_factory(split.train, "MTL")
        with pytest.raises(ConfigError):
            run_set(spec, split.train, split.test, fast_train_config, workers=0)

    def test_failed_run_does_not_stop_the_set(
        self, split, spec_factory, fast_train_config, monkeypatch
    ):
        """Test that one failing seed is recorded and the others still run."""
        real_train = runs.train

        def flaky(spec, data, cfg, seed, checkpoint_dir=None):
            if seed == 0:
                raise TrainingError("non-finite loss", 0, 1)
            return real_train(spec, data, cfg, seed, checkpoint_dir)

        monkeypatch.setattr(runs, "train", flaky)
        spec = spec_factory(split.train, "MTL")
        results = run_set(spec, split.train, split.test, fast_train_config, workers=1)
        assert not results[0].ok
        assert "non-finite loss" in results[0].error
        assert results[0].metrics is None
        assert results[1].ok
