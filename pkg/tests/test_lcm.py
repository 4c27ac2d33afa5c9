import math

import numpy as np
import pytest

from mixclust.core import ColumnSchema, ConfigError, MixedDataset
from mixclust.lcm import LcmParams, lcm_fit, lcm_loglik
from mixclust.metrics import ari

from oracles import lcm_loglik_direct


def binary_dataset(values):
    schema = [ColumnSchema("c", "nominal", ("level1", "level2"))]
    return MixedDataset(schema, [(v,) for v in values])


class TestLoglik:
    def test_k1_collapses_to_product(self):
        schema = [ColumnSchema("x", "continuous"), ColumnSchema("c", "nominal", ("A", "B"))]
        ds = MixedDataset(schema, [(0.5, "A"), (-1.0, "B")])
        params = LcmParams(mixing=[1.0], means=[[0.0]], variances=[[1.0]],
                           thetas=[np.array([[0.25, 0.75]])])
        expected = sum(
            -0.5 * math.log(2 * math.pi) - 0.5 * x ** 2 + math.log(p)
            for x, p in [(0.5, 0.25), (-1.0, 0.75)])
        assert lcm_loglik(ds, params) == pytest.approx(expected, abs=1e-12)

    def test_single_bernoulli_row(self):
        ds = binary_dataset(["level1"])
        params = LcmParams(mixing=[1.0], means=np.empty((1, 0)),
                           variances=np.empty((1, 0)), thetas=[np.array([[0.9, 0.1]])])
        assert lcm_loglik(ds, params) == pytest.approx(math.log(0.9), abs=1e-12)

    def test_three_row_oracle(self):
        schema = [
            ColumnSchema("x", "continuous"),
            ColumnSchema("c", "nominal", ("A", "B", "C")),
        ]
        rows = [(0.3, "A"), (-1.2, "C"), (2.0, "B")]
        ds = MixedDataset(schema, rows)
        params = LcmParams(
            mixing=[0.4, 0.6],
            means=[[0.0], [1.5]],
            variances=[[1.0], [0.5]],
            thetas=[np.array([[0.6, 0.3, 0.1], [0.2, 0.2, 0.6]])],
        )
        oracle = lcm_loglik_direct(
            [(0.3, 0), (-1.2, 2), (2.0, 1)], ["c", "n"],
            {"mixing": [0.4, 0.6], "means": [[0.0], [1.5]], "variances": [[1.0], [0.5]],
             "thetas": [[[0.6, 0.3, 0.1], [0.2, 0.2, 0.6]]]})
        assert lcm_loglik(ds, params) == pytest.approx(oracle, abs=1e-12)

    def test_schema_mismatch_rejected(self):
        ds = binary_dataset(["level1", "level2"])
        params = LcmParams(mixing=[1.0], means=np.empty((1, 0)),
                           variances=np.empty((1, 0)), thetas=[np.array([[0.5, 0.25, 0.25]])])
        with pytest.raises(Exception):
            lcm_loglik(ds, params)


class TestFit:
    def test_bernoulli_two_groups(self):
        rng = np.random.default_rng(0)
        n = 400
        truth = np.repeat([1, 2], n // 2)
        values = np.where(
            (truth == 1) == (rng.random(n) < 0.95), "level1", "level2")
        ds = binary_dataset(values)
        fit = lcm_fit(ds, K=2, seed=0)
        assert ari(truth, fit.partition) >= 0.7

    def test_loglik_trace_non_decreasing(self):
        rng = np.random.default_rng(1)
        for seed in range(10):
            n = 120
            x = np.concatenate([rng.normal(0, 1, n // 2), rng.normal(4, 1, n // 2)])
            c = rng.choice(["A", "B"], size=n)
            schema = [ColumnSchema("x", "continuous"), ColumnSchema("c", "nominal", ("A", "B"))]
            ds = MixedDataset.from_columns(schema, {"x": x, "c": c})
            fit = lcm_fit(ds, K=2, n_init=3, seed=seed)
            trace = fit.details["loglik_trace"]
            assert all(b >= a - 1e-8 for a, b in zip(trace, trace[1:]))

    def test_responsibilities_row_stochastic_and_mixing_simplex(self):
        rng = np.random.default_rng(2)
        schema = [ColumnSchema("x", "continuous"), ColumnSchema("c", "nominal", ("A", "B"))]
        ds = MixedDataset.from_columns(
            schema, {"x": rng.normal(0, 1, 60), "c": rng.choice(["A", "B"], 60)})
        fit = lcm_fit(ds, K=3, n_init=2, seed=3)
        np.testing.assert_allclose(fit.partition.soft.sum(axis=1), 1.0, atol=1e-9)
        assert sum(fit.details["mixing"]) == pytest.approx(1.0, abs=1e-9)

    def test_row_permutation_invariance(self):
        rng = np.random.default_rng(4)
        n = 200
        x = np.concatenate([rng.normal(0, 1, n // 2), rng.normal(5, 1, n // 2)])
        c = np.where(np.arange(n) < n // 2, "A", "B").astype(object)
        truth = np.repeat([1, 2], n // 2)
        schema = [ColumnSchema("x", "continuous"), ColumnSchema("c", "nominal", ("A", "B"))]
        ds = MixedDataset.from_columns(schema, {"x": x, "c": c})
        perm = rng.permutation(n)
        ds_perm = ds.subset(perm)
        f1 = lcm_fit(ds, K=2, n_init=3, seed=7)
        f2 = lcm_fit(ds_perm, K=2, n_init=3, seed=7)
        assert ari(truth, f1.partition) == pytest.approx(
            ari(truth[perm], f2.partition), abs=1e-12)
        # identical fits up to the row permutation
        np.testing.assert_array_equal(f1.partition.labels[perm], f2.partition.labels)

    def test_k_greater_than_n_rejected(self):
        ds = binary_dataset(["level1", "level2"])
        with pytest.raises(ConfigError):
            lcm_fit(ds, K=3)

    def test_variances_floored(self):
        # a column with a duplicated spike must not collapse the variance
        schema = [ColumnSchema("x", "continuous"), ColumnSchema("c", "nominal", ("A", "B"))]
        x = np.array([1.0] * 30 + [5.0, 5.0, 5.0])
        c = np.array(["A"] * 30 + ["B"] * 3, dtype=object)
        ds = MixedDataset.from_columns(schema, {"x": x, "c": c})
        fit = lcm_fit(ds, K=2, n_init=4, seed=0)
        assert np.isfinite(fit.objective)
