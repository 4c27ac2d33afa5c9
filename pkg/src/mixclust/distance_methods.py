"""Distance-based clustering for mixed data: k-prototypes, PDQ, convex k-means.

All three follow the k-means template (initialize centers, alternate
assignment and center updates) and differ in the dissimilarity combining the
continuous and categorical blocks. Fits are pure functions of
(dataset, config); restarts draw from independent seed-sequence children, so
results are bit-reproducible given the config seed. Ties in cluster
assignment always resolve toward the lowest cluster index.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import (
    CONTINUOUS,
    NOMINAL,
    ORDINAL,
    ClusterPrototype,
    ConfigError,
    DegenerateDataError,
    FitResult,
    InsufficientDataError,
    MixedDataset,
    Partition,
    column_stats,
    one_hot,
    prototypes_from_labels,
    require_valid,
)

_EPS = 1e-12


@dataclass(frozen=True)
class KProtoConfig:
    K: int
    gamma: float | str = "auto"
    n_init: int = 10
    max_iter: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.K < 1:
            raise ConfigError("K must be >= 1")
        if self.gamma != "auto" and float(self.gamma) < 0:
            raise ConfigError("gamma must be >= 0")
        if self.n_init < 1 or self.max_iter < 1:
            raise ConfigError("n_init and max_iter must be >= 1")


@dataclass(frozen=True)
class PdqConfig:
    K: int
    max_iter: int = 100
    tol: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if self.K < 1:
            raise ConfigError("K must be >= 1")


@dataclass(frozen=True)
class ConvexKmConfig:
    K: int
    grid_size: int = 20
    n_init: int = 5
    max_iter: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.K < 1:
            raise ConfigError("K must be >= 1")
        if self.grid_size < 2:
            raise ConfigError("grid_size must be >= 2")


def estimate_gamma(dataset: MixedDataset) -> float:
    """Data-driven weight for the categorical block of k-prototypes.

    Ratio of the average sample variance over the continuous columns to the
    average Gini dispersion (1 - sum of squared level frequencies) over the
    categorical columns.
    """
    if not dataset.continuous_columns or not dataset.categorical_columns:
        raise ConfigError("gamma estimation needs both continuous and categorical columns")
    stats = column_stats(dataset)
    variances = [stats[c.name].variance for c in dataset.continuous_columns]
    ginis = [1.0 - float((stats[c.name].level_freqs ** 2).sum())
             for c in dataset.categorical_columns]
    mean_gini = float(np.mean(ginis))
    if mean_gini <= 0.0:
        raise DegenerateDataError("degenerate categorical data: zero Gini dispersion")
    return float(np.mean(variances)) / mean_gini


def _check_k(K: int, n: int):
    if n < 1:
        raise InsufficientDataError("empty dataset")
    if K > n:
        raise ConfigError(f"K={K} exceeds the number of rows n={n}")


# ---------------------------------------------------------------------------
# k-prototypes


def _kproto_distances(V, W, centers_c, centers_d, gamma):
    d = np.zeros((V.shape[0], centers_c.shape[0]))
    if V.shape[1]:
        d += ((V[:, None, :] - centers_c[None, :, :]) ** 2).sum(axis=2)
    if W.shape[1]:
        d += gamma * (W[:, None, :] != centers_d[None, :, :]).sum(axis=2)
    return d


def _kproto_objective(V, W, centers_c, centers_d, labels, gamma):
    idx = labels - 1
    obj = 0.0
    if V.shape[1]:
        obj += float(((V - centers_c[idx]) ** 2).sum())
    if W.shape[1]:
        obj += gamma * float((W != centers_d[idx]).sum())
    return obj


def _repair_empty(labels, dist_to_own, K):
    """Move the farthest-from-center row into each empty cluster.

    Returns the indices of moved rows; callers must reset those clusters'
    centers to the moved rows to keep the objective non-increasing.
    """
    moved = {}
    counts = np.bincount(labels - 1, minlength=K)
    for k in np.flatnonzero(counts == 0):
        order = np.argsort(-dist_to_own, kind="stable")
        for i in order:
            src = labels[i] - 1
            if counts[src] > 1 and i not in moved:
                counts[src] -= 1
                counts[k] += 1
                labels[i] = k + 1
                dist_to_own[i] = 0.0
                moved[i] = k
                break
    return moved


def _kproto_single(V, W, K, gamma, max_iter, rng):
    n = V.shape[0]
    idx = rng.choice(n, size=K, replace=False)
    centers_c = V[idx].astype(float).copy()
    centers_d = W[idx].copy()
    labels = None
    trace = []
    converged = False
    for it in range(1, max_iter + 1):
        dist = _kproto_distances(V, W, centers_c, centers_d, gamma)
        new_labels = np.argmin(dist, axis=1) + 1
        dist_to_own = dist[np.arange(n), new_labels - 1]
        moved = _repair_empty(new_labels, dist_to_own, K)
        for i, k in moved.items():
            centers_c[k] = V[i]
            centers_d[k] = W[i]
        # evaluate through the same code path as the update-step entry so
        # plateau values compare bitwise equal
        trace.append(_kproto_objective(V, W, centers_c, centers_d, new_labels, gamma))
        if labels is not None and np.array_equal(new_labels, labels):
            converged = True
            break
        labels = new_labels
        for k in range(K):
            members = labels == k + 1
            if V.shape[1]:
                centers_c[k] = V[members].mean(axis=0)
            for j in range(W.shape[1]):
                counts = np.bincount(W[members, j], minlength=int(W[:, j].max()) + 1)
                centers_d[k, j] = int(np.argmax(counts))
        trace.append(_kproto_objective(V, W, centers_c, centers_d, labels, gamma))
    objective = _kproto_objective(V, W, centers_c, centers_d, labels, gamma)
    return labels, objective, it, converged, trace


def kprototypes_fit(dataset: MixedDataset, config: KProtoConfig) -> FitResult:
    """Minimize squared Euclidean + gamma * Hamming cost around K prototypes.

    Continuous columns enter on their original scale (no standardization);
    ``gamma="auto"`` balances the blocks via :func:`estimate_gamma`. Runs
    ``n_init`` random restarts (initial prototypes drawn as distinct rows)
    and keeps the run with the lowest final objective. The per-run objective
    trace (one entry after each assignment and each center update) is
    returned in ``details["objective_trace"]`` for the winning run.
    """
    require_valid(dataset)
    _check_k(config.K, dataset.n)
    gamma = estimate_gamma(dataset) if config.gamma == "auto" else float(config.gamma)
    V = dataset.continuous_matrix()
    W = dataset.codes_matrix()
    best = None
    for child in np.random.SeedSequence(config.seed).spawn(config.n_init):
        rng = np.random.default_rng(child)
        labels, obj, iters, conv, trace = _kproto_single(
            V, W, config.K, gamma, config.max_iter, rng)
        if best is None or obj < best[1]:
            best = (labels, obj, iters, conv, trace)
    labels, obj, iters, conv, trace = best
    partition = Partition.from_labels(labels, K=config.K)
    return FitResult(
        partition=partition,
        prototypes=prototypes_from_labels(dataset, labels, config.K),
        objective=obj,
        iterations=iters,
        converged=conv,
        seed=config.seed,
        details={"gamma": gamma, "objective_trace": trace},
    )


# ---------------------------------------------------------------------------
# PDQ (probabilistic distance clustering adjusted for cluster size)


def pdq_memberships(distances: np.ndarray, sizes: np.ndarray) -> np.ndarray:
    """Row-stochastic memberships p_ik proportional to s_k / d_ik.

    This is the stationary point of the size-adjusted joint distance
    function under the constraint that each row's memberships sum to one:
    minimizing sum_k p_ik^2 d_ik / s_k with a Lagrange multiplier gives
    p_ik d_ik / s_k constant over k. Rows at zero distance from some center
    get full membership in the first such cluster (limit case).
    """
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = sizes[None, :] / distances
        p = ratios / ratios.sum(axis=1, keepdims=True)
    zero_rows = np.flatnonzero((distances <= 0.0).any(axis=1))
    for i in zero_rows:
        p[i] = 0.0
        p[i, int(np.argmin(distances[i]))] = 1.0
    return p


def _weighted_median(values: np.ndarray, weights: np.ndarray) -> float:
    order = np.argsort(values, kind="stable")
    v, w = values[order], weights[order]
    total = w.sum()
    if total <= 0:
        return float(v[0])
    cum = np.cumsum(w)
    return float(v[np.searchsorted(cum, 0.5 * total)])


def _gower_rowwise(V, O, N, center_c, center_o, center_n, scales, ranges, weights):
    aC, aO, aN = weights
    d = np.zeros(V.shape[0])
    if V.shape[1]:
        d += aC * np.sqrt((((V - center_c[None, :]) / scales) ** 2).sum(axis=1))
    if O.shape[1]:
        d += aO * (np.abs(O - center_o[None, :]) / ranges).sum(axis=1)
    if N.shape[1]:
        d += aN * (N != center_n[None, :]).sum(axis=1)
    return d


def _pdq_init_medoids(V, O, N, scales, ranges, weights, K):
    """Greedy farthest-point medoids on the Gower distance: start at the row
    nearest the columnwise Gower median, then repeatedly take the row with
    the largest minimum distance to the chosen medoids."""
    center_c = np.median(V, axis=0) if V.shape[1] else np.empty(0)
    center_o = np.median(O, axis=0) if O.shape[1] else np.empty(0)
    if N.shape[1]:
        center_n = np.array([
            np.argmax(np.bincount(N[:, j])) for j in range(N.shape[1])
        ])
    else:
        center_n = np.empty(0, dtype=np.int64)
    d0 = _gower_rowwise(V, O, N, center_c, center_o, center_n, scales, ranges, weights)
    medoids = [int(np.argmin(d0))]
    min_dist = _gower_rowwise(V, O, N, V[medoids[0]], O[medoids[0]], N[medoids[0]],
                              scales, ranges, weights)
    while len(medoids) < K:
        nxt = int(np.argmax(min_dist))
        medoids.append(nxt)
        d_new = _gower_rowwise(V, O, N, V[nxt], O[nxt], N[nxt], scales, ranges, weights)
        min_dist = np.minimum(min_dist, d_new)
    return medoids


def pdq_fit(dataset: MixedDataset, config: PdqConfig) -> FitResult:
    """Probabilistic distance clustering with Gower-combined dissimilarities.

    Component distances: scaled Euclidean on continuous columns, normalized
    rank differences on ordinal columns, Hamming on nominal columns, blended
    with weights R/p, S_O/p, S_N/p. Iterates memberships, cluster sizes
    (both closed forms from stationarity of the joint distance function,
    keeping it non-increasing) and centers until the relative JDF change
    drops below ``tol``. Returns soft memberships alongside the hard labels.
    """
    require_valid(dataset)
    _check_k(config.K, dataset.n)
    stats = column_stats(dataset)
    cont_cols = dataset.continuous_columns
    ord_cols = dataset.columns_of_kind(ORDINAL)
    nom_cols = dataset.columns_of_kind(NOMINAL)
    V = dataset.continuous_matrix()
    O = (dataset.codes_matrix(ORDINAL) + 1).astype(float)
    N = dataset.codes_matrix(NOMINAL)
    R, S_O, S_N = len(cont_cols), len(ord_cols), len(nom_cols)
    p_total = R + S_O + S_N
    weights = (R / p_total, S_O / p_total, S_N / p_total)
    scales = np.array([stats[c.name].pdq_scale for c in cont_cols]) if R else np.empty(0)
    # Constant ordinal columns have zero rank range; their distances are zero
    # regardless, so the unit floor only avoids 0/0.
    ranges = np.array([max(stats[c.name].rank_range, 1.0) for c in ord_cols]) if S_O else np.empty(0)

    n, K = dataset.n, config.K
    medoids = _pdq_init_medoids(V, O, N, scales, ranges, weights, K)
    mu_c = V[medoids].astype(float).copy()
    mu_o = O[medoids].astype(float).copy()
    mu_n = N[medoids].copy()
    sizes = np.full(K, n / K)
    jdf_prev = None
    trace = []
    converged = False
    for it in range(1, config.max_iter + 1):
        d = np.zeros((n, K))
        dC = np.zeros((n, K))
        for k in range(K):
            if R:
                dC[:, k] = np.sqrt((((V - mu_c[k]) / scales) ** 2).sum(axis=1))
            d[:, k] = weights[0] * dC[:, k]
            if S_O:
                d[:, k] += weights[1] * (np.abs(O - mu_o[k]) / ranges).sum(axis=1)
            if S_N:
                d[:, k] += weights[2] * (N != mu_n[k]).sum(axis=1)
        p = pdq_memberships(d, sizes)
        # size update from Lagrange stationarity of the JDF under
        # sum(sizes) = n: s_k proportional to sqrt(sum_i p_ik^2 d_ik).
        # (The naive running total sum_i p_ik increases the JDF.)
        cost = ((p ** 2) * d).sum(axis=0)
        for k in np.flatnonzero(cost <= _EPS ** 2):
            hard = np.argmax(p, axis=1)
            worst = int(np.argmax(d[np.arange(n), hard]))
            p[worst] = 0.0
            p[worst, k] = 1.0
            cost = ((p ** 2) * d).sum(axis=0)
        root = np.sqrt(np.maximum(cost, _EPS ** 2))
        sizes = n * root / root.sum()
        jdf = float(((p ** 2 / sizes[None, :]) * d).sum())
        trace.append(jdf)
        if jdf_prev is not None and abs(jdf_prev - jdf) <= config.tol * max(abs(jdf_prev), _EPS):
            converged = True
            break
        jdf_prev = jdf
        w2 = p ** 2
        for k in range(K):
            if R:
                wk = w2[:, k] / np.maximum(dC[:, k], _EPS)
                mu_c[k] = (wk[:, None] * V).sum(axis=0) / wk.sum()
            for j in range(S_O):
                mu_o[k, j] = _weighted_median(O[:, j], w2[:, k])
            for j in range(S_N):
                counts = np.bincount(N[:, j], weights=w2[:, k])
                mu_n[k, j] = int(np.argmax(counts))

    labels = np.argmax(p, axis=1) + 1
    partition = Partition.from_labels(labels, K=K, soft=p)
    protos = []
    for k in range(K):
        cont = {c.name: float(mu_c[k, j]) for j, c in enumerate(cont_cols)}
        cat = {c.name: c.levels[int(mu_o[k, j]) - 1] for j, c in enumerate(ord_cols)}
        cat.update({c.name: c.levels[int(mu_n[k, j])] for j, c in enumerate(nom_cols)})
        protos.append(ClusterPrototype(continuous_center=cont, categorical_center=cat))
    return FitResult(
        partition=partition,
        prototypes=protos,
        objective=trace[-1],
        iterations=it,
        converged=converged,
        seed=config.seed,
        details={"alpha_weights": weights, "jdf_trace": trace, "cluster_sizes": sizes.tolist()},
    )


# ---------------------------------------------------------------------------
# convex k-means


def _cosine_distances(W, centers, row_norms):
    center_norms = np.sqrt((centers ** 2).sum(axis=1))
    sims = W @ centers.T
    with np.errstate(divide="ignore", invalid="ignore"):
        sims = sims / (row_norms[:, None] * center_norms[None, :])
    dist = 1.0 - sims
    dist[:, center_norms == 0.0] = 1.0  # zero centroid: maximal distance
    return dist


def _convex_distances(V, W, row_norms, centers_c, centers_w, alpha):
    d = alpha * ((V[:, None, :] - centers_c[None, :, :]) ** 2).sum(axis=2)
    d += (1.0 - alpha) * _cosine_distances(W, centers_w, row_norms)
    return d


def _convex_single(V, W, row_norms, K, alpha, max_iter, rng):
    n = V.shape[0]
    idx = rng.choice(n, size=K, replace=False)
    centers_c = V[idx].copy()
    centers_w = W[idx].copy()
    labels = None
    trace = []
    converged = False
    for it in range(1, max_iter + 1):
        dist = _convex_distances(V, W, row_norms, centers_c, centers_w, alpha)
        new_labels = np.argmin(dist, axis=1) + 1
        dist_to_own = dist[np.arange(n), new_labels - 1]
        moved = _repair_empty(new_labels, dist_to_own, K)
        for i, k in moved.items():
            centers_c[k] = V[i]
            centers_w[k] = W[i]
        trace.append(float(dist_to_own.sum()))
        if labels is not None and np.array_equal(new_labels, labels):
            converged = True
            break
        labels = new_labels
        for k in range(K):
            members = labels == k + 1
            centers_c[k] = V[members].mean(axis=0)
            centers_w[k] = W[members].mean(axis=0)
        dist = _convex_distances(V, W, row_norms, centers_c, centers_w, alpha)
        trace.append(float(dist[np.arange(n), labels - 1].sum()))
    objective = trace[-1]
    return labels, centers_c, centers_w, objective, it, trace, converged


def convex_kmeans_fit(dataset: MixedDataset, config: ConvexKmConfig) -> FitResult:
    """k-means under a convex blend of squared Euclidean and cosine distance.

    The continuous block is z-scored, the categorical block dummy coded.
    For every weight alpha on the grid {i/(grid_size+1)} the data are
    clustered by best-of-``n_init`` alternation, then the weight minimizing
    Q(alpha) = (W_con/B_con) * (W_cat/B_cat) is selected. Grid points whose
    within-cluster dispersion vanishes for either block are excluded; if all
    are excluded the categorical structure is degenerate and an error is
    raised.
    """
    require_valid(dataset)
    _check_k(config.K, dataset.n)
    if not dataset.continuous_columns or not dataset.categorical_columns:
        raise ConfigError("convex k-means needs both continuous and categorical columns")
    V = dataset.continuous_matrix()
    sd = V.std(axis=0)
    sd[sd == 0.0] = 1.0
    V = (V - V.mean(axis=0)) / sd
    full, colmap = one_hot(dataset)
    cat_cols = np.array([lv is not None for _, lv in colmap])
    W = full[:, cat_cols]
    row_norms = np.sqrt((W ** 2).sum(axis=1))
    n = dataset.n

    vbar = V.mean(axis=0)
    wbar = W.mean(axis=0)
    total_con = float(((V - vbar) ** 2).sum())
    total_cat = float(_cosine_distances(W, wbar[None, :], row_norms)[:, 0].sum())

    grid = [(i + 1) / (config.grid_size + 1) for i in range(config.grid_size)]
    children = np.random.SeedSequence(config.seed).spawn(len(grid))
    zero_tol = 1e-9 * max(n, 1)
    candidates = []
    q_by_alpha = {}
    for alpha, child in zip(grid, children):
        best = None
        for sub in child.spawn(config.n_init):
            rng = np.random.default_rng(sub)
            run = _convex_single(V, W, row_norms, config.K, alpha, config.max_iter, rng)
            if best is None or run[3] < best[3]:
                best = run
        labels, centers_c, centers_w, distortion, iters, trace, run_conv = best
        idx = labels - 1
        w_con = float(((V - centers_c[idx]) ** 2).sum())
        cos_d = _cosine_distances(W, centers_w, row_norms)
        w_cat = float(cos_d[np.arange(n), idx].sum())
        q_by_alpha[alpha] = None
        if w_con <= zero_tol or w_cat <= zero_tol:
            continue  # pure-block partition; Q would be degenerate
        b_con = total_con - w_con
        b_cat = total_cat - w_cat
        if b_con <= 0.0 or b_cat <= 0.0:
            continue
        q = (w_con / b_con) * (w_cat / b_cat)
        q_by_alpha[alpha] = q
        candidates.append((q, alpha, labels, distortion, iters, trace, run_conv))
    if not candidates:
        raise DegenerateDataError(
            "degenerate categorical structure: every alpha yields zero within-cluster dispersion")
    q_star, alpha_star, labels, distortion, iters, trace, run_conv = min(
        candidates, key=lambda c: (c[0], c[1]))
    partition = Partition.from_labels(labels, K=config.K)
    return FitResult(
        partition=partition,
        prototypes=prototypes_from_labels(dataset, labels, config.K),
        objective=distortion,
        iterations=iters,
        converged=run_conv,
        seed=config.seed,
        details={
            "alpha_star": alpha_star,
            "q_star": q_star,
            "q_by_alpha": q_by_alpha,
            "distortion_trace": trace,
        },
    )
