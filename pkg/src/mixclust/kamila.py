"""Semiparametric clustering with a radial kernel density and multinomials.

The continuous block is scored through a univariate kernel density over
distances to the cluster centers (valid for spherical distributions up to a
constant shared by all clusters), the categorical block through independent
within-cluster multinomials. No weight balancing the two blocks is needed:
both enter one log-likelihood-style objective.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .core import (
    ConfigError,
    FitResult,
    ClusterPrototype,
    InsufficientDataError,
    MixedDataset,
    Partition,
    require_valid,
)

_MIN_BANDWIDTH = 1e-6
_LOG_DISTANCE_FLOOR = 1e-10
_KDE_CHUNK = 4_000_000  # cap on kernel-matrix cells evaluated at once


@dataclass(frozen=True)
class KamilaConfig:
    K: int
    n_init: int = 20
    max_iter: int = 100
    smoothing: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.K < 1:
            raise ConfigError("K must be >= 1")
        if self.smoothing < 0:
            raise ConfigError("smoothing must be >= 0")
        if self.n_init < 1 or self.max_iter < 1:
            raise ConfigError("n_init and max_iter must be >= 1")


@dataclass(frozen=True)
class RadialDensity:
    """Gaussian-kernel density over observed center distances.

    ``log_radial`` evaluates the kernel estimate itself; ``log_spherical``
    subtracts (R-1) * log d, turning the density of the distance into the
    spherical density of the point (up to an additive constant that is the
    same for every cluster and therefore irrelevant to assignments).
    """

    sample: np.ndarray
    bandwidth: float
    dimension: int

    def __post_init__(self):
        sample = np.asarray(self.sample, dtype=np.float64)
        sample.setflags(write=False)
        object.__setattr__(self, "sample", sample)
        if self.bandwidth <= 0:
            raise ConfigError("bandwidth must be positive")
        if sample.size == 0:
            raise InsufficientDataError("empty distance sample")

    def log_radial(self, d) -> np.ndarray:
        d = np.atleast_1d(np.asarray(d, dtype=np.float64))
        n, h = self.sample.size, self.bandwidth
        out = np.empty(d.shape, dtype=np.float64)
        step = max(1, _KDE_CHUNK // n)
        flat = d.reshape(-1)
        res = np.empty(flat.size)
        for start in range(0, flat.size, step):
            block = flat[start:start + step]
            z = (block[:, None] - self.sample[None, :]) / h
            res[start:start + len(block)] = logsumexp(-0.5 * z * z, axis=1)
        out = res.reshape(d.shape)
        return out - np.log(n * h * np.sqrt(2.0 * np.pi))

    def log_spherical(self, d) -> np.ndarray:
        d = np.asarray(d, dtype=np.float64)
        return self.log_radial(d) - (self.dimension - 1) * np.log(np.maximum(d, _LOG_DISTANCE_FLOOR))


def silverman_bandwidth(values: np.ndarray) -> float:
    """0.9 * min(sd, IQR/1.34) * n^(-1/5), floored for degenerate samples."""
    values = np.asarray(values, dtype=np.float64)
    sd = values.std(ddof=1)
    q75, q25 = np.percentile(values, [75, 25])
    spread = min(sd, (q75 - q25) / 1.34)
    h = 0.9 * spread * values.size ** (-0.2)
    return max(h, _MIN_BANDWIDTH)


def radial_kde(distances, dimension: int) -> RadialDensity:
    """Kernel density over minimum center distances for ``dimension``-variate
    spherical data."""
    distances = np.asarray(distances, dtype=np.float64)
    if distances.size < 2:
        raise InsufficientDataError("radial KDE needs at least 2 distances")
    if (distances < 0).any():
        raise ConfigError("distances must be non-negative")
    return RadialDensity(
        sample=distances,
        bandwidth=silverman_bandwidth(distances),
        dimension=int(dimension),
    )


def _smoothed_frequencies(codes, members, n_levels, smoothing):
    counts = np.bincount(codes[members], minlength=n_levels).astype(np.float64)
    total = counts.sum() + smoothing * n_levels
    if total == 0:
        return np.full(n_levels, 1.0 / n_levels)
    return (counts + smoothing) / total


def _kamila_single(V, cat_codes, n_levels, K, max_iter, smoothing, rng):
    n, R = V.shape
    centers = V[rng.choice(n, size=K, replace=False)].astype(float).copy()
    # flat Dirichlet draw per (cluster, variable)
    thetas = [rng.dirichlet(np.ones(m), size=K) for m in n_levels]
    labels = None
    converged = False
    for it in range(1, max_iter + 1):
        dists = np.sqrt(((V[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2))
        density = radial_kde(dists.min(axis=1), R)
        scores = density.log_spherical(dists)
        with np.errstate(divide="ignore"):
            for j, theta in enumerate(thetas):
                scores += np.log(theta[:, cat_codes[:, j]]).T
        new_labels = np.argmax(scores, axis=1) + 1
        row_best = scores[np.arange(n), new_labels - 1]
        counts = np.bincount(new_labels - 1, minlength=K)
        for k in np.flatnonzero(counts == 0):
            # reseed an empty cluster at the worst-explained row
            order = np.argsort(row_best, kind="stable")
            for i in order:
                if counts[new_labels[i] - 1] > 1:
                    counts[new_labels[i] - 1] -= 1
                    new_labels[i] = k + 1
                    counts[k] += 1
                    centers[k] = V[i]
                    row_best[i] = scores[i, k]
                    break
        objective = float(row_best.sum())
        if labels is not None and np.array_equal(new_labels, labels):
            converged = True
            break
        labels = new_labels
        for k in range(K):
            members = labels == k + 1
            centers[k] = V[members].mean(axis=0)
            for j, m in enumerate(n_levels):
                thetas[j][k] = _smoothed_frequencies(cat_codes[:, j], members, m, smoothing)
    return labels, thetas, centers, objective, it, converged


def kamila_fit(dataset: MixedDataset, config: KamilaConfig) -> FitResult:
    """Alternate radial-density + multinomial scoring with center updates.

    Continuous columns enter on their original scale; the kernel density
    over center distances adapts to it. Each of ``n_init`` runs starts from
    K distinct rows and flat-simplex multinomial draws, stops when labels no
    longer change, and the run with the highest final objective (sum of
    winning per-row scores) is kept.
    """
    require_valid(dataset)
    if not dataset.continuous_columns:
        raise ConfigError(
            "KAMILA needs at least one continuous column; use lcm or mbn for "
            "purely categorical data")
    if config.K > dataset.n:
        raise ConfigError(f"K={config.K} exceeds the number of rows n={dataset.n}")
    V = dataset.continuous_matrix()
    cat_cols = dataset.categorical_columns
    cat_codes = dataset.codes_matrix()
    n_levels = [c.n_levels for c in cat_cols]
    best = None
    for child in np.random.SeedSequence(config.seed).spawn(config.n_init):
        rng = np.random.default_rng(child)
        run = _kamila_single(V, cat_codes, n_levels, config.K, config.max_iter,
                             config.smoothing, rng)
        if best is None or run[3] > best[3]:
            best = run
    labels, thetas, centers, objective, iterations, converged = best

    protos = []
    for k in range(config.K):
        cont = {c.name: float(centers[k, j]) for j, c in enumerate(dataset.continuous_columns)}
        cat = {}
        freqs = {}
        for j, col in enumerate(cat_cols):
            freqs[col.name] = thetas[j][k]
            cat[col.name] = col.levels[int(np.argmax(thetas[j][k]))]
        protos.append(ClusterPrototype(continuous_center=cont, categorical_center=cat,
                                       level_freqs=freqs or None))
    return FitResult(
        partition=Partition.from_labels(labels, K=config.K),
        prototypes=protos,
        objective=objective,
        iterations=iterations,
        converged=converged,
        seed=config.seed,
    )
