"""Latent class model: local-independence mixture fit by EM with fixed K.

Within a cluster every variable is independent; continuous columns get a
univariate Gaussian per cluster, categorical columns a multinomial. Variable
selection is deliberately not part of this implementation: all columns are
treated as relevant.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp, xlogy

from .core import (
    ConfigError,
    ClusterPrototype,
    FitResult,
    MixedDataset,
    Partition,
    SchemaError,
    require_valid,
)

_LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass
class LcmParams:
    """Mixture parameters aligned with a dataset schema.

    ``means``/``variances`` are (K, R) over the continuous columns in schema
    order; ``thetas`` has one (K, m_j) row-stochastic matrix per categorical
    column in schema order.
    """

    mixing: np.ndarray
    means: np.ndarray
    variances: np.ndarray
    thetas: list

    def __post_init__(self):
        self.mixing = np.asarray(self.mixing, dtype=np.float64)
        self.means = np.asarray(self.means, dtype=np.float64)
        self.variances = np.asarray(self.variances, dtype=np.float64)
        self.thetas = [np.asarray(t, dtype=np.float64) for t in self.thetas]
        if not np.isclose(self.mixing.sum(), 1.0, atol=1e-9):
            raise SchemaError("mixing proportions must sum to 1")
        if (self.variances <= 0).any():
            raise SchemaError("variances must be positive")
        for t in self.thetas:
            if not np.allclose(t.sum(axis=1), 1.0, atol=1e-9):
                raise SchemaError("theta rows must sum to 1")

    @property
    def K(self) -> int:
        return self.mixing.size


def _check_shapes(dataset: MixedDataset, params: LcmParams):
    R = len(dataset.continuous_columns)
    cats = dataset.categorical_columns
    if params.means.shape != (params.K, R) or params.variances.shape != (params.K, R):
        raise SchemaError("Gaussian parameter shapes do not match the schema")
    if len(params.thetas) != len(cats):
        raise SchemaError("one theta matrix per categorical column required")
    for t, col in zip(params.thetas, cats):
        if t.shape != (params.K, col.n_levels):
            raise SchemaError(f"theta shape mismatch for column {col.name!r}")


def _log_components(V, cat_codes, params: LcmParams) -> np.ndarray:
    """(n, K) matrix of log alpha_k + log density of row i under cluster k."""
    n = V.shape[0]
    log_p = np.broadcast_to(np.log(params.mixing), (n, params.K)).copy()
    if V.shape[1]:
        diff = V[:, None, :] - params.means[None, :, :]
        log_p += (-0.5 * (_LOG_2PI + np.log(params.variances))[None, :, :]
                  - 0.5 * diff ** 2 / params.variances[None, :, :]).sum(axis=2)
    with np.errstate(divide="ignore"):
        for j, theta in enumerate(params.thetas):
            log_p += np.log(theta[:, cat_codes[:, j]]).T
    return log_p


def lcm_loglik(dataset: MixedDataset, params: LcmParams) -> float:
    """Observed-data log-likelihood, stabilized with per-row log-sum-exp."""
    require_valid(dataset)
    _check_shapes(dataset, params)
    log_p = _log_components(dataset.continuous_matrix(), dataset.codes_matrix(), params)
    return float(logsumexp(log_p, axis=1).sum())


def _init_params(dataset: MixedDataset, K: int, rng) -> LcmParams:
    # Draws depend only on the seed stream, K and the schema (plus
    # permutation-invariant column statistics), so fits are row-order
    # invariant up to label permutation.
    cont = dataset.continuous_matrix()
    col_mean = cont.mean(axis=0) if cont.shape[1] else np.empty(0)
    col_sd = cont.std(axis=0, ddof=1) if cont.shape[1] else np.empty(0)
    col_sd = np.where(col_sd > 0, col_sd, 1.0)
    means = col_mean[None, :] + col_sd[None, :] * rng.standard_normal((K, cont.shape[1]))
    variances = np.tile(np.maximum(col_sd ** 2, 1e-12), (K, 1))
    thetas = [rng.dirichlet(np.ones(c.n_levels), size=K) for c in dataset.categorical_columns]
    return LcmParams(
        mixing=np.full(K, 1.0 / K),
        means=means,
        variances=variances,
        thetas=thetas,
    )


def _q_term(eff: np.ndarray, theta: np.ndarray) -> float:
    """Categorical part of EM's expected complete log-likelihood."""
    return float(xlogy(eff, theta).sum())


def _lcm_em(dataset, K, max_iter, tol, smoothing, rng):
    V = dataset.continuous_matrix()
    cat_codes = dataset.codes_matrix()
    cat_cols = dataset.categorical_columns
    n = dataset.n
    var_floor = None
    if V.shape[1]:
        var_floor = np.maximum(1e-6 * V.var(axis=0), 1e-12)
    params = _init_params(dataset, K, rng)
    loglik = -np.inf
    trace = []
    converged = False
    resp = None
    for it in range(1, max_iter + 1):
        log_p = _log_components(V, cat_codes, params)
        row_tot = logsumexp(log_p, axis=1)
        new_loglik = float(row_tot.sum())
        trace.append(new_loglik)
        resp = np.exp(log_p - row_tot[:, None])
        if np.isfinite(loglik) and new_loglik - loglik <= tol * max(abs(loglik), 1e-12):
            loglik = new_loglik
            converged = True
            break
        loglik = new_loglik

        weight = resp.sum(axis=0)
        dead = np.flatnonzero(weight <= 0.0)
        for k in dead:
            # component lost all responsibility: restart it at a random row
            i = int(rng.integers(n))
            resp[:, k] = 0.0
            resp[i, :] = 0.0
            resp[i, k] = 1.0
            weight = resp.sum(axis=0)
        params.mixing = weight / weight.sum()
        if V.shape[1]:
            params.means = (resp.T @ V) / weight[:, None]
            sq = (resp.T @ (V ** 2)) / weight[:, None]
            params.variances = np.maximum(sq - params.means ** 2, var_floor[None, :])
        for j, col in enumerate(cat_cols):
            eff = np.zeros((K, col.n_levels))
            np.add.at(eff.T, cat_codes[:, j], resp)
            smoothed = (eff + smoothing) / (eff + smoothing).sum(axis=1, keepdims=True)
            # generalized-EM guard: the smoothed update may lower the
            # Q-function (and with it the observed log-likelihood); when it
            # would, use the floored maximum-likelihood frequencies, which
            # never can
            if _q_term(eff, smoothed) >= _q_term(eff, params.thetas[j]):
                params.thetas[j] = smoothed
            else:
                mle = np.maximum(eff, 1e-12)
                params.thetas[j] = mle / mle.sum(axis=1, keepdims=True)
    labels = np.argmax(resp, axis=1) + 1
    return params, resp, labels, loglik, it, converged, trace


def lcm_fit(dataset: MixedDataset, K: int, n_init: int = 10, max_iter: int = 500,
            tol: float = 1e-6, smoothing: float = 1.0, seed: int = 0) -> FitResult:
    """Fit the latent class model by EM, best of ``n_init`` starts.

    E-step: responsibilities proportional to mixing times the product of the
    per-column densities. M-step: mean responsibilities, weighted means and
    floored weighted variances, add-``smoothing`` level frequencies. Stops
    when the relative log-likelihood improvement drops below ``tol``. Soft
    memberships are the final responsibilities, hard labels their argmax.
    """
    require_valid(dataset)
    if K < 1:
        raise ConfigError("K must be >= 1")
    if K > dataset.n:
        raise ConfigError(f"K={K} exceeds the number of rows n={dataset.n}")
    if dataset.n < 2:
        raise ConfigError("LCM needs at least 2 rows")
    best = None
    for child in np.random.SeedSequence(seed).spawn(n_init):
        rng = np.random.default_rng(child)
        run = _lcm_em(dataset, K, max_iter, tol, smoothing, rng)
        if best is None or run[3] > best[3]:
            best = run
    params, resp, labels, loglik, iterations, converged, trace = best

    protos = []
    cont_cols = dataset.continuous_columns
    cat_cols = dataset.categorical_columns
    for k in range(K):
        cont = {c.name: float(params.means[k, j]) for j, c in enumerate(cont_cols)}
        cat = {}
        freqs = {}
        for j, col in enumerate(cat_cols):
            freqs[col.name] = params.thetas[j][k]
            cat[col.name] = col.levels[int(np.argmax(params.thetas[j][k]))]
        protos.append(ClusterPrototype(continuous_center=cont, categorical_center=cat,
                                       level_freqs=freqs or None))
    return FitResult(
        partition=Partition.from_labels(labels, K=K, soft=resp / resp.sum(axis=1, keepdims=True)),
        prototypes=protos,
        objective=loglik,
        iterations=iterations,
        converged=converged,
        seed=seed,
        details={"mixing": params.mixing.tolist(), "loglik_trace": trace},
    )
