import numpy as np
import pytest

from mixclust.core import (
    ColumnSchema,
    ConfigError,
    DegenerateDataError,
    MixedDataset,
)
from mixclust.distance_methods import (
    ConvexKmConfig,
    KProtoConfig,
    PdqConfig,
    convex_kmeans_fit,
    estimate_gamma,
    kprototypes_fit,
    pdq_fit,
    pdq_memberships,
)
from mixclust.metrics import ari
from mixclust.simgen import M1Config, gen_m1


def mixed_dataset(x, cats, levels=("A", "B")):
    schema = [ColumnSchema("x", "continuous"), ColumnSchema("c", "nominal", tuple(levels))]
    return MixedDataset(schema, list(zip(x, cats)))


def two_blob_dataset(seed=0, n=80, gap=8.0, flip=0.1):
    rng = np.random.default_rng(seed)
    x = np.concatenate([rng.normal(0, 1, n), rng.normal(gap, 1, n)])
    c = np.array(["A"] * n + ["B"] * n, dtype=object)
    c[rng.random(2 * n) < flip] = "A"
    schema = [ColumnSchema("x", "continuous"), ColumnSchema("c", "nominal", ("A", "B"))]
    ds = MixedDataset.from_columns(schema, {"x": x, "c": c})
    return ds, [1] * n + [2] * n


class TestEstimateGamma:
    def test_hand_computed_ratio(self):
        # variance (0,0,0,4) = 4; balanced binary Gini = 0.5 -> gamma 8
        ds = mixed_dataset([0.0, 0.0, 0.0, 4.0], ["A", "B", "A", "B"])
        assert estimate_gamma(ds) == pytest.approx(8.0)

    def test_equal_dispersion_gives_one(self):
        # variance 0.5 against Gini 0.5
        values = [0.0, 1.0, 0.0, 1.0]
        ds = mixed_dataset(values, ["A", "B", "A", "B"])
        var = np.var(values, ddof=1)
        assert estimate_gamma(ds) == pytest.approx(var / 0.5)

    def test_constant_categorical_errors(self):
        ds = mixed_dataset([0.0, 1.0], ["A", "A"])
        with pytest.raises(DegenerateDataError):
            estimate_gamma(ds)

    def test_needs_both_kinds(self):
        schema = [ColumnSchema("x", "continuous")]
        ds = MixedDataset(schema, [(0.0,), (1.0,)])
        with pytest.raises(ConfigError):
            estimate_gamma(ds)


class TestKPrototypes:
    def test_two_pairs_objective(self):
        # clusters {0, 0.1} and {10, 10.1}: within-cluster SS = 0.005 + 0.005
        ds = mixed_dataset([0.0, 0.1, 10.0, 10.1], ["A", "A", "A", "A"])
        fit = kprototypes_fit(ds, KProtoConfig(K=2, gamma=3.0, n_init=5, seed=0))
        assert fit.objective == pytest.approx(0.01)
        assert ari([1, 1, 2, 2], fit.partition) == 1.0

    def test_gamma_zero_matches_continuous_only_kmeans(self):
        # with gamma=0 the categorical block is inert: shuffling it changes nothing
        rng = np.random.default_rng(3)
        x = np.concatenate([rng.normal(0, 1, 40), rng.normal(6, 1, 40)])
        cats = rng.choice(["A", "B"], size=80)
        ds1 = mixed_dataset(x, cats)
        ds2 = mixed_dataset(x, cats[rng.permutation(80)])
        f1 = kprototypes_fit(ds1, KProtoConfig(K=2, gamma=0.0, seed=9))
        f2 = kprototypes_fit(ds2, KProtoConfig(K=2, gamma=0.0, seed=9))
        np.testing.assert_array_equal(f1.partition.labels, f2.partition.labels)
        # objective equals the pure within-cluster SS of the continuous block
        labels = f1.partition.labels
        ss = sum(((x[labels == k] - x[labels == k].mean()) ** 2).sum() for k in (1, 2))
        assert f1.objective == pytest.approx(ss)

    def test_objective_trace_non_increasing(self):
        for seed in range(10):
            ds, _ = two_blob_dataset(seed=seed, gap=3.0, flip=0.3)
            fit = kprototypes_fit(ds, KProtoConfig(K=3, n_init=2, seed=seed))
            trace = fit.details["objective_trace"]
            assert all(b <= a + 1e-9 for a, b in zip(trace, trace[1:]))

    def test_k_exceeding_n_errors(self):
        ds = mixed_dataset([0.0, 1.0], ["A", "B"])
        with pytest.raises(ConfigError):
            kprototypes_fit(ds, KProtoConfig(K=3, gamma=1.0))

    def test_bit_reproducible(self):
        ds, _ = two_blob_dataset(seed=1)
        f1 = kprototypes_fit(ds, KProtoConfig(K=2, seed=42))
        f2 = kprototypes_fit(ds, KProtoConfig(K=2, seed=42))
        np.testing.assert_array_equal(f1.partition.labels, f2.partition.labels)
        assert f1.objective == f2.objective

    def test_recovers_m1_clusters(self):
        d, t = gen_m1(M1Config(K=2, overlap=0.3, cluster_size=120, dimension=6,
                               continuous_proportion=0.5, seed=0))
        fit = kprototypes_fit(d, KProtoConfig(K=2, seed=0))
        assert ari(t, fit.partition) >= 0.9


class TestPdq:
    def test_membership_closed_form(self):
        p = pdq_memberships(np.array([[1.0, 3.0]]), np.array([1.0, 1.0]))
        np.testing.assert_allclose(p, [[0.75, 0.25]])

    def test_equal_distances_give_uniform(self):
        p = pdq_memberships(np.full((3, 4), 2.0), np.full(4, 5.0))
        np.testing.assert_allclose(p, 0.25)

    def test_zero_distance_takes_full_membership(self):
        p = pdq_memberships(np.array([[0.0, 2.0], [2.0, 0.0]]), np.array([1.0, 1.0]))
        np.testing.assert_allclose(p, [[1.0, 0.0], [0.0, 1.0]])

    def test_alpha_weights_exact(self):
        schema = [
            ColumnSchema("x", "continuous"),
            ColumnSchema("o", "ordinal", ("1", "2", "3")),
            ColumnSchema("n", "nominal", ("A", "B")),
            ColumnSchema("n2", "nominal", ("A", "B")),
        ]
        rows = [(0.0, "1", "A", "B"), (1.0, "2", "B", "A"), (2.0, "3", "A", "A")]
        fit = pdq_fit(MixedDataset(schema, rows), PdqConfig(K=2, seed=0))
        assert fit.details["alpha_weights"] == (1 / 4, 1 / 4, 2 / 4)

    def test_soft_rows_sum_to_one(self):
        ds, _ = two_blob_dataset(seed=2)
        fit = pdq_fit(ds, PdqConfig(K=3))
        np.testing.assert_allclose(fit.partition.soft.sum(axis=1), 1.0, atol=1e-9)

    def test_jdf_non_increasing(self):
        for seed in range(10):
            ds, _ = two_blob_dataset(seed=seed, gap=4.0, flip=0.25)
            fit = pdq_fit(ds, PdqConfig(K=2, seed=seed))
            trace = fit.details["jdf_trace"]
            assert all(b <= a + 1e-9 for a, b in zip(trace, trace[1:]))

    def test_single_type_reduces_to_remaining_components(self):
        # continuous-only dataset: nominal/ordinal weights are zero
        schema = [ColumnSchema("x", "continuous"), ColumnSchema("y", "continuous")]
        rng = np.random.default_rng(0)
        rows = [(float(a), float(b)) for a, b in rng.normal(0, 1, (30, 2))]
        fit = pdq_fit(MixedDataset(schema, rows), PdqConfig(K=2))
        assert fit.details["alpha_weights"] == (1.0, 0.0, 0.0)

    def test_separable_data_recovered(self):
        ds, truth = two_blob_dataset(seed=4, gap=9.0, flip=0.05)
        fit = pdq_fit(ds, PdqConfig(K=2))
        assert ari(truth, fit.partition) >= 0.9

    def test_deterministic(self):
        ds, _ = two_blob_dataset(seed=5)
        f1 = pdq_fit(ds, PdqConfig(K=2, seed=0))
        f2 = pdq_fit(ds, PdqConfig(K=2, seed=0))
        np.testing.assert_array_equal(f1.partition.labels, f2.partition.labels)
        assert f1.objective == f2.objective


class TestConvexKmeans:
    def test_grid_values(self):
        ds, _ = two_blob_dataset(seed=0, n=30)
        fit = convex_kmeans_fit(ds, ConvexKmConfig(K=2, grid_size=20, n_init=1, seed=0))
        grid = sorted(fit.details["q_by_alpha"])
        np.testing.assert_allclose(grid, [(i + 1) / 21 for i in range(20)])

    def test_pure_categorical_partition_excluded(self):
        # two binary columns whose 2x2 level combinations are the four
        # clusters: every alpha separates the combinations perfectly,
        # zeroing the categorical dispersion, so every alpha is excluded
        rng = np.random.default_rng(1)
        schema = [
            ColumnSchema("x", "continuous"),
            ColumnSchema("a", "nominal", ("0", "1")),
            ColumnSchema("b", "nominal", ("0", "1")),
        ]
        rows = []
        for g, (a, b) in enumerate([("0", "0"), ("0", "1"), ("1", "0"), ("1", "1")]):
            rows += [(float(8 * g + rng.normal(0, 0.3)), a, b) for _ in range(15)]
        with pytest.raises(DegenerateDataError):
            convex_kmeans_fit(MixedDataset(schema, rows),
                              ConvexKmConfig(K=4, n_init=20, seed=0))

    def test_distortion_trace_non_increasing(self):
        for seed in range(5):
            ds, _ = two_blob_dataset(seed=seed, gap=4.0, flip=0.25)
            fit = convex_kmeans_fit(ds, ConvexKmConfig(K=2, grid_size=4, n_init=2, seed=seed))
            trace = fit.details["distortion_trace"]
            assert all(b <= a + 1e-9 for a, b in zip(trace, trace[1:]))

    def test_needs_both_kinds(self):
        schema = [ColumnSchema("x", "continuous")]
        ds = MixedDataset(schema, [(0.0,), (1.0,), (2.0,)])
        with pytest.raises(ConfigError):
            convex_kmeans_fit(ds, ConvexKmConfig(K=2))

    def test_recovers_m1_clusters(self):
        d, t = gen_m1(M1Config(K=2, overlap=0.3, cluster_size=120, dimension=6,
                               continuous_proportion=0.5, seed=3))
        fit = convex_kmeans_fit(d, ConvexKmConfig(K=2, grid_size=10, n_init=2, seed=0))
        assert ari(t, fit.partition) >= 0.9

    def test_bit_reproducible(self):
        ds, _ = two_blob_dataset(seed=6)
        f1 = convex_kmeans_fit(ds, ConvexKmConfig(K=2, grid_size=5, n_init=2, seed=7))
        f2 = convex_kmeans_fit(ds, ConvexKmConfig(K=2, grid_size=5, n_init=2, seed=7))
        np.testing.assert_array_equal(f1.partition.labels, f2.partition.labels)
        assert f1.details["alpha_star"] == f2.details["alpha_star"]
