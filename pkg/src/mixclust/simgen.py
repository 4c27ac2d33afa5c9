"""Synthetic mixed-type benchmark generators (models M1-M4).

* M1: multivariate Gaussian clusters with a single overlap knob controlling
  both the continuous mean shifts and the latent-Gaussian categorical
  separation.
* M2: exponential-difference continuous columns with Bernoulli and 14-level
  nominal columns, parameterized per cluster.
* M3: one conditional linear Gaussian network whose discrete root is the
  cluster label (strong variable interactions, explicit label dependence).
* M4: a mixture of K equal-weight networks sharing one structure but with
  different parameters.

All generators are bit-reproducible functions of (config, seed) and return
a schema-valid dataset together with the true partition.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import permutations
from typing import Optional

import numpy as np

from .core import (
    CONTINUOUS,
    ColumnSchema,
    ConfigError,
    DegenerateDataError,
    MixedDataset,
    NOMINAL,
    Partition,
)
from .mbn import ClgNetwork, ClgNode, DiscreteParams, GaussianParams, schema_from_nodes

_SD_CHOICES = np.arange(5, 16) / 10.0  # 0.5, 0.6, ..., 1.5


def _as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _column_counts(dimension: int, continuous_proportion: float) -> tuple[int, int]:
    R = round(dimension * continuous_proportion)
    return R, dimension - R


# ---------------------------------------------------------------------------
# M1: multivariate Gaussian model


@dataclass(frozen=True)
class M1Config:
    K: int
    overlap: float = 0.3
    cluster_size: int = 700
    dimension: int = 12
    continuous_proportion: float = 0.5
    m: int = 3
    seed: int = 0

    def __post_init__(self):
        if self.K < 1 or self.cluster_size < 1:
            raise ConfigError("K and cluster_size must be >= 1")
        if not 0.0 <= self.overlap <= 1.0:
            raise ConfigError("overlap must lie in [0, 1]")
        if self.m < 2:
            raise ConfigError("categorical level count m must be >= 2")
        R, S = _column_counts(self.dimension, self.continuous_proportion)
        if R < 2:
            raise ConfigError("M1 needs at least 2 continuous columns (mean sequence)")
        if S < 0:
            raise ConfigError("continuous proportion exceeds the dimension")


def m1_continuous_means(config: M1Config) -> np.ndarray:
    """(K, R) matrix of cluster means: cluster 1 runs 0..10 in R steps, each
    further cluster shifts every coordinate by 5 * (1 - overlap)."""
    R, _ = _column_counts(config.dimension, config.continuous_proportion)
    base = np.linspace(0.0, 10.0, R)
    shift = 5.0 - config.overlap * 5.0
    return base[None, :] + shift * np.arange(config.K)[:, None]


def m1_categorical_readout(latent: np.ndarray) -> int:
    """Observed level (1-based) from one latent (m-1)-vector: 1 when every
    element is negative, otherwise the index of the maximum plus one."""
    latent = np.asarray(latent)
    if latent.max() < 0:
        return 1
    return int(np.argmax(latent)) + 2


def _m1_latent_mean(k: int, m: int, overlap: float) -> np.ndarray:
    # cluster k prefers level 1 + (k-1) mod m; level 1 pushes every latent
    # coordinate negative, level l >= 2 spikes coordinate l-1. The latent
    # separation is (1 - overlap) on the unit-variance latent scale, so the
    # preferred level stays modal while overlap still degrades accuracy.
    delta = 1.0 - overlap
    preferred = 1 + (k - 1) % m
    if preferred == 1:
        return np.full(m - 1, -delta)
    mean = np.zeros(m - 1)
    mean[preferred - 2] = delta
    return mean


def gen_m1(config: M1Config) -> tuple[MixedDataset, Partition]:
    rng = _as_rng(config.seed)
    R, S = _column_counts(config.dimension, config.continuous_proportion)
    K, size, m = config.K, config.cluster_size, config.m
    n = K * size
    means = m1_continuous_means(config)

    labels = np.repeat(np.arange(1, K + 1), size)
    cont = np.empty((n, R))
    for k in range(K):
        block = slice(k * size, (k + 1) * size)
        cont[block] = means[k][None, :] + rng.standard_normal((size, R))

    levels = tuple(str(i + 1) for i in range(m))
    cat_codes = np.empty((n, S), dtype=np.int64)
    for j in range(S):
        for k in range(K):
            block = slice(k * size, (k + 1) * size)
            latent = rng.standard_normal((size, m - 1)) + _m1_latent_mean(k + 1, m, config.overlap)
            below = latent.max(axis=1) < 0
            code = np.where(below, 0, np.argmax(latent, axis=1) + 1)
            cat_codes[block, j] = code

    schema = [ColumnSchema(f"x{j + 1}", CONTINUOUS) for j in range(R)]
    schema += [ColumnSchema(f"c{j + 1}", NOMINAL, levels) for j in range(S)]
    columns = {f"x{j + 1}": cont[:, j] for j in range(R)}
    for j in range(S):
        columns[f"c{j + 1}"] = np.asarray(levels, dtype=object)[cat_codes[:, j]]
    dataset = MixedDataset.from_columns(schema, columns)
    return dataset, Partition.from_labels(labels, K=K)


# ---------------------------------------------------------------------------
# M2: exponential-discrete model


def _default_cluster_params(K: int) -> dict:
    if K == 2:
        return {
            "pi_star": (0.5, 0.5),
            "lambdas": ((1.3, 0.05, 20.0, 1.0), (1.1, 0.05, 20.0, 1.0)),
            "nominal_probs": (
                (0.5, 0.02, 0.013, 0.03, 0.02, 0.02, 0.017, 0.01, 0.01, 0.06,
                 0.1, 0.08, 0.05, 0.07),
                (0.08, 0.02, 0.08, 0.13, 0.05, 0.03, 0.12, 0.05, 0.01, 0.15,
                 0.01, 0.2, 0.03, 0.04),
            ),
            "bernoulli_p": (0.64, 0.3),
        }
    if K == 3:
        return {
            "pi_star": (1 / 3, 1 / 3, 1 / 3),
            "lambdas": ((3.5, 0.05, 20.0, 1.0), (1.3, 0.05, 20.0, 1.0),
                        (1.1, 0.05, 20.0, 1.0)),
            "nominal_probs": (
                (0.25, 0.2, 0.15, 0.1, 0.1, 0.05, 0.03, 0.02, 0.02, 0.02,
                 0.02, 0.02, 0.01, 0.01),
                # this row circulates with 15 entries summing to 1.02; one
                # duplicate 0.02 is dropped, which restores an exact unit sum
                (0.01, 0.01, 0.02, 0.02, 0.02, 0.02, 0.02, 0.03, 0.05, 0.1,
                 0.1, 0.15, 0.2, 0.25),
                (0.01, 0.02, 0.02, 0.05, 0.1, 0.15, 0.25, 0.15, 0.1, 0.1,
                 0.02, 0.01, 0.01, 0.01),
            ),
            "bernoulli_p": (0.8, 0.5, 0.2),
        }
    raise ConfigError(f"no reference parameters for K={K}; pass them explicitly")


@dataclass(frozen=True)
class M2Config:
    K: int
    N: int
    dimension: int = 12
    continuous_proportion: float = 1 / 3
    pi_star: Optional[tuple] = None
    lambdas: Optional[tuple] = None
    nominal_probs: Optional[tuple] = None
    bernoulli_p: Optional[tuple] = None
    m: int = 14
    seed: int = 0

    def __post_init__(self):
        if self.K < 1 or self.N < 1:
            raise ConfigError("K and N must be >= 1")
        defaults = _default_cluster_params(self.K) if None in (
            self.pi_star, self.lambdas, self.nominal_probs, self.bernoulli_p) else {}
        for name in ("pi_star", "lambdas", "nominal_probs", "bernoulli_p"):
            value = getattr(self, name)
            if value is None:
                value = defaults[name]
            object.__setattr__(self, name, tuple(
                tuple(v) if isinstance(v, (tuple, list)) else float(v) for v in value))
        if len(self.pi_star) != self.K or not np.isclose(sum(self.pi_star), 1.0, atol=1e-9):
            raise ConfigError("pi_star must be a length-K simplex vector")
        if len(self.lambdas) != self.K or any(len(l) != 4 for l in self.lambdas):
            raise ConfigError("lambdas must be K tuples of 4 positive reals")
        if any(x <= 0 for l in self.lambdas for x in l):
            raise ConfigError("lambda entries must be positive")
        if len(self.nominal_probs) != self.K:
            raise ConfigError("one nominal probability vector per cluster required")
        for p in self.nominal_probs:
            if len(p) != self.m:
                raise ConfigError(
                    f"nominal probability vector has {len(p)} entries, expected m={self.m}")
            if not np.isclose(sum(p), 1.0, atol=1e-6):
                raise ConfigError("nominal probability vectors must sum to 1")
        if len(self.bernoulli_p) != self.K or any(not 0 <= p <= 1 for p in self.bernoulli_p):
            raise ConfigError("bernoulli_p must be K probabilities")
        R, S = _column_counts(self.dimension, self.continuous_proportion)
        if R < 1 or S < 1:
            raise ConfigError("M2 needs both continuous and categorical columns")


def expdiff_density(x, lam):
    """Unnormalized density lambda1 e^(-lambda2 x) - lambda3 e^(-lambda4 x),
    clipped at zero, and zero for x < 0."""
    l1, l2, l3, l4 = lam
    x = np.asarray(x, dtype=np.float64)
    g = l1 * np.exp(-l2 * x) - l3 * np.exp(-l4 * x)
    return np.where(x < 0, 0.0, np.maximum(g, 0.0))


def sample_expdiff(lam, size: int, seed=0, return_rate: bool = False):
    """Rejection-sample the normalized max(g, 0) density of
    :func:`expdiff_density` under the envelope lambda1 e^(-lambda2 x)."""
    l1, l2, l3, l4 = (float(v) for v in lam)
    if l1 <= 0 or l2 <= 0 or l3 < 0 or l4 <= 0:
        raise ConfigError("need lambda1, lambda2, lambda4 > 0 and lambda3 >= 0")
    positive_somewhere = l1 > l3 or (l3 > 0 and l2 < l4)
    if not positive_somewhere:
        raise DegenerateDataError("degenerate density: g(x) <= 0 for all x >= 0")
    rng = _as_rng(seed)
    out = np.empty(size)
    filled = 0
    proposed = 0
    accepted = 0
    while filled < size:
        batch = max(1024, 2 * (size - filled))
        x = rng.exponential(1.0 / l2, batch)
        envelope = l1 * np.exp(-l2 * x)
        g = envelope - l3 * np.exp(-l4 * x)
        keep = x[rng.random(batch) * envelope < np.maximum(g, 0.0)]
        take = min(keep.size, size - filled)
        out[filled:filled + take] = keep[:take]
        proposed += batch
        accepted += keep.size
        filled += take
    if return_rate:
        return out, accepted / proposed
    return out


def _largest_remainder_sizes(pi_star, N: int) -> np.ndarray:
    exact = np.asarray(pi_star) * N
    sizes = np.floor(exact).astype(np.int64)
    remainder = exact - sizes
    short = N - sizes.sum()
    order = np.argsort(-remainder, kind="stable")
    sizes[order[:short]] += 1
    return sizes


def gen_m2(config: M2Config) -> tuple[MixedDataset, Partition]:
    rng = _as_rng(config.seed)
    R, S = _column_counts(config.dimension, config.continuous_proportion)
    n_binary = S // 2
    n_nominal = S - n_binary
    sizes = _largest_remainder_sizes(config.pi_star, config.N)
    labels = np.repeat(np.arange(1, config.K + 1), sizes)
    n = config.N

    cont = np.empty((n, R))
    binary = np.empty((n, n_binary), dtype=np.int64)
    nominal = np.empty((n, n_nominal), dtype=np.int64)
    start = 0
    for k in range(config.K):
        stop = start + sizes[k]
        for j in range(R):
            cont[start:stop, j] = sample_expdiff(config.lambdas[k], sizes[k], rng)
        for j in range(n_binary):
            binary[start:stop, j] = rng.random(sizes[k]) < config.bernoulli_p[k]
        probs = np.asarray(config.nominal_probs[k], dtype=np.float64)
        probs = probs / probs.sum()
        for j in range(n_nominal):
            nominal[start:stop, j] = rng.choice(config.m, size=sizes[k], p=probs)
        start = stop

    nominal_levels = tuple(str(i + 1) for i in range(config.m))
    schema = [ColumnSchema(f"x{j + 1}", CONTINUOUS) for j in range(R)]
    schema += [ColumnSchema(f"b{j + 1}", NOMINAL, ("0", "1")) for j in range(n_binary)]
    schema += [ColumnSchema(f"c{j + 1}", NOMINAL, nominal_levels) for j in range(n_nominal)]
    columns = {f"x{j + 1}": cont[:, j] for j in range(R)}
    for j in range(n_binary):
        columns[f"b{j + 1}"] = np.asarray(("0", "1"), dtype=object)[binary[:, j]]
    for j in range(n_nominal):
        columns[f"c{j + 1}"] = np.asarray(nominal_levels, dtype=object)[nominal[:, j]]
    dataset = MixedDataset.from_columns(schema, columns)
    return dataset, Partition.from_labels(labels, K=config.K)


# ---------------------------------------------------------------------------
# M3 and M4: Bayesian-network models


@dataclass(frozen=True)
class MbnSimConfig:
    K: int
    N: int
    seed: int = 0

    def __post_init__(self):
        if self.K < 2:
            raise ConfigError("K must be >= 2")
        if self.N < 1:
            raise ConfigError("N must be >= 1")


def _permutation_rows(values, K: int, rng) -> np.ndarray:
    """K probability rows, each a permutation of ``values``; distinct across
    clusters whenever K does not exceed the number of permutations. Rows are
    normalized: the probability set {0.64, 0.33, 0.04} sums to 1.01, not 1."""
    pool = list(permutations(values))
    order = rng.permutation(len(pool))
    rows = np.array([pool[order[k % len(pool)]] for k in range(K)], dtype=np.float64)
    return rows / rows.sum(axis=1, keepdims=True)


def _draw_sds(count: int, rng) -> np.ndarray:
    return rng.choice(_SD_CHOICES, size=count)


def m3_network(K: int, rng) -> ClgNetwork:
    """The single M3 network: cluster root C feeding three discrete and
    three conditional Gaussian children, with X1 -> X3 and X2 -> X4."""
    levels3 = ("1", "2", "3")
    nodes = (
        ClgNode("C", True, tuple(str(k + 1) for k in range(K))),
        ClgNode("X1", True, levels3),
        ClgNode("X2", True, levels3),
        ClgNode("X3", False),
        ClgNode("X4", False),
        ClgNode("X5", True, ("1", "2")),
        ClgNode("X6", False),
    )
    edges = [("C", "X1"), ("C", "X2"), ("C", "X3"), ("C", "X4"), ("C", "X5"),
             ("C", "X6"), ("X1", "X3"), ("X2", "X4")]
    x3_means = 0.5 * np.arange(1, 3 * K + 1)          # 0.5 .. 1.5K
    x4_means = np.arange(2 * K, 5 * K)                # 2K .. 5K-1
    x6_means = np.arange(5 * K - 1, 6 * K - 1)        # 5K-1 .. 6K-2
    params = {
        "C": DiscreteParams(np.full((1, K), 1.0 / K)),
        "X1": DiscreteParams(_permutation_rows((0.64, 0.33, 0.04), K, rng)),
        "X2": DiscreteParams(_permutation_rows((0.64, 0.33, 0.04), K, rng)),
        "X5": DiscreteParams(_permutation_rows((0.1, 0.9), K, rng)),
        "X3": GaussianParams(x3_means[:, None], _draw_sds(3 * K, rng) ** 2),
        "X4": GaussianParams(x4_means[:, None].astype(float), _draw_sds(3 * K, rng) ** 2),
        "X6": GaussianParams(x6_means[:, None].astype(float), _draw_sds(K, rng) ** 2),
    }
    return ClgNetwork(nodes, edges, params)


def _strip_label_column(sampled: MixedDataset, label_col: str, K: int):
    labels = sampled.codes(label_col) + 1
    schema = [c for c in sampled.schema if c.name != label_col]
    columns = {c.name: sampled.column(c.name) for c in schema}
    return MixedDataset.from_columns(schema, columns), Partition.from_labels(labels, K=K)


def gen_m3(config: MbnSimConfig) -> tuple[MixedDataset, Partition]:
    rng = _as_rng(config.seed)
    network = m3_network(config.K, rng)
    sampled = network.sample(config.N, rng)
    return _strip_label_column(sampled, "C", config.K)


def m4_components(K: int, rng) -> list[ClgNetwork]:
    """The K mixture components of M4: one shared structure (X1 -> X3,
    X2 -> X4; X5 and X6 isolated) with per-component parameters. Component
    k (1-based) shifts X3 to means 2k..2k+2, X4 to 5+2k..7+2k and X6 to
    2k+9; the discrete roots carry per-component probability permutations.
    """
    levels3 = ("1", "2", "3")
    nodes = (
        ClgNode("X1", True, levels3),
        ClgNode("X2", True, levels3),
        ClgNode("X3", False),
        ClgNode("X4", False),
        ClgNode("X5", True, ("1", "2")),
        ClgNode("X6", False),
    )
    edges = [("X1", "X3"), ("X2", "X4")]
    x1_rows = _permutation_rows((0.64, 0.33, 0.04), K, rng)
    x2_rows = _permutation_rows((0.64, 0.33, 0.04), K, rng)
    x5_rows = _permutation_rows((0.1, 0.9), K, rng)
    components = []
    for k in range(1, K + 1):
        x3_means = np.arange(2 * k, 2 * k + 3, dtype=float)        # c=0
        x4_means = np.arange(5 + 2 * k, 8 + 2 * k, dtype=float)    # c=5
        params = {
            "X1": DiscreteParams(x1_rows[k - 1][None, :]),
            "X2": DiscreteParams(x2_rows[k - 1][None, :]),
            "X5": DiscreteParams(x5_rows[k - 1][None, :]),
            "X3": GaussianParams(x3_means[:, None], _draw_sds(3, rng) ** 2),
            "X4": GaussianParams(x4_means[:, None], _draw_sds(3, rng) ** 2),
            "X6": GaussianParams(np.array([[2.0 * k + 9.0]]), _draw_sds(1, rng) ** 2),
        }
        components.append(ClgNetwork(nodes, edges, params))
    return components


def gen_m4(config: MbnSimConfig) -> tuple[MixedDataset, Partition]:
    rng = _as_rng(config.seed)
    components = m4_components(config.K, rng)
    labels = rng.integers(1, config.K + 1, size=config.N)
    schema = schema_from_nodes(components[0].nodes)
    columns = {c.name: np.empty(config.N, dtype=object if c.is_categorical else np.float64)
               for c in schema}
    for k in range(config.K):
        rows = labels == k + 1
        count = int(rows.sum())
        if count == 0:
            continue
        part = components[k].sample(count, rng)
        for c in schema:
            columns[c.name][rows] = part.column(c.name)
    dataset = MixedDataset.from_columns(schema, columns)
    return dataset, Partition.from_labels(labels, K=config.K)


GENERATORS = {"m1": (M1Config, gen_m1), "m2": (M2Config, gen_m2),
              "m3": (MbnSimConfig, gen_m3), "m4": (MbnSimConfig, gen_m4)}


def generate(model: str, factors: dict, seed: int) -> tuple[MixedDataset, Partition]:
    """Dispatch to one of the four generators by model id."""
    if model not in GENERATORS:
        raise ConfigError(f"unknown model {model!r}; expected one of {sorted(GENERATORS)}")
    config_cls, gen = GENERATORS[model]
    return gen(config_cls(**factors, seed=seed))
