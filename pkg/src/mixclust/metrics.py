"""External cluster-validation indices: ARI and AMI.

Both indices compare a predicted partition against ground truth through the
contingency table, are symmetric in their arguments and invariant under
relabeling. Identical partitions score 1; the chance-corrected denominators
degenerate only when both partitions are trivial, in which case 0 is
returned (after the identity check).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .core import InsufficientDataError, MixclustError, Partition

AMI_NORMALIZERS = ("arithmetic", "max", "min", "sqrt")


@dataclass(frozen=True)
class ContingencyTable:
    """Cross-tabulation of two partitions over the same rows."""

    counts: np.ndarray
    row_sums: np.ndarray
    col_sums: np.ndarray
    n: int


def _as_labels(p) -> np.ndarray:
    if isinstance(p, Partition):
        return p.labels
    return np.asarray(p, dtype=np.int64)


def contingency(a, b) -> ContingencyTable:
    """Count matrix n_ij = #{rows labeled i in ``a`` and j in ``b``}."""
    la, lb = _as_labels(a), _as_labels(b)
    if la.size != lb.size:
        raise MixclustError(f"partition length mismatch: {la.size} vs {lb.size}")
    ka = int(la.max()) if la.size else 1
    kb = int(lb.max()) if lb.size else 1
    counts = np.zeros((ka, kb), dtype=np.int64)
    np.add.at(counts, (la - 1, lb - 1), 1)
    return ContingencyTable(
        counts=counts,
        row_sums=counts.sum(axis=1),
        col_sums=counts.sum(axis=0),
        n=int(la.size),
    )


def _comb2(x):
    return x * (x - 1) / 2.0


def _same_partition(table: ContingencyTable) -> bool:
    # Identical co-membership: every row cluster maps into exactly one
    # column cluster and vice versa.
    nonzero_per_row = (table.counts > 0).sum(axis=1)
    nonzero_per_col = (table.counts > 0).sum(axis=0)
    occupied_rows = table.row_sums > 0
    occupied_cols = table.col_sums > 0
    return bool(
        np.all(nonzero_per_row[occupied_rows] == 1)
        and np.all(nonzero_per_col[occupied_cols] == 1)
    )


def ari(a, b) -> float:
    """Adjusted Rand index (pair counting, corrected for chance) in [-1, 1]."""
    table = contingency(a, b)
    if table.n < 2:
        raise InsufficientDataError("ARI needs at least 2 rows")
    if _same_partition(table):
        return 1.0
    sum_cells = _comb2(table.counts).sum()
    sum_rows = _comb2(table.row_sums).sum()
    sum_cols = _comb2(table.col_sums).sum()
    expected = sum_rows * sum_cols / _comb2(table.n)
    max_index = 0.5 * (sum_rows + sum_cols)
    if max_index == expected:
        return 0.0
    return float((sum_cells - expected) / (max_index - expected))


def _entropy(counts: np.ndarray, n: int) -> float:
    p = counts[counts > 0] / n
    return float(-(p * np.log(p)).sum())


def _mutual_information(table: ContingencyTable) -> float:
    nz = table.counts > 0
    nij = table.counts[nz].astype(np.float64)
    ai = np.broadcast_to(table.row_sums[:, None], table.counts.shape)[nz]
    bj = np.broadcast_to(table.col_sums[None, :], table.counts.shape)[nz]
    return float((nij / table.n * (np.log(nij * table.n) - np.log(ai * bj))).sum())


def expected_mutual_information(table: ContingencyTable) -> float:
    """Exact E[MI] under the hypergeometric model with fixed marginals."""
    n = table.n
    ai = table.row_sums[table.row_sums > 0].astype(np.int64)
    bj = table.col_sums[table.col_sums > 0].astype(np.int64)
    log_fact = gammaln(np.arange(2 * n + 2) + 1.0)  # log(x!) lookup
    emi = 0.0
    for a_i in ai:
        for b_j in bj:
            lo = max(1, a_i + b_j - n)
            hi = min(a_i, b_j)
            if hi < lo:
                continue
            nij = np.arange(lo, hi + 1)
            term = nij / n * (np.log(nij * n) - np.log(float(a_i) * b_j))
            log_prob = (
                log_fact[a_i]
                + log_fact[b_j]
                + log_fact[n - a_i]
                + log_fact[n - b_j]
                - log_fact[n]
                - log_fact[nij]
                - log_fact[a_i - nij]
                - log_fact[b_j - nij]
                - log_fact[n - a_i - b_j + nij]
            )
            emi += float((term * np.exp(log_prob)).sum())
    return emi


def ami(a, b, normalizer: str = "arithmetic") -> float:
    """Adjusted mutual information, (MI - E[MI]) / (norm - E[MI]).

    ``normalizer`` picks the denominator's entropy combination: the
    arithmetic mean (default), max, min or sqrt of the two entropies.
    """
    if normalizer not in AMI_NORMALIZERS:
        raise MixclustError(f"unknown AMI normalizer {normalizer!r}; use one of {AMI_NORMALIZERS}")
    table = contingency(a, b)
    if table.n < 2:
        raise InsufficientDataError("AMI needs at least 2 rows")
    if _same_partition(table):
        return 1.0
    mi = _mutual_information(table)
    emi = expected_mutual_information(table)
    ha = _entropy(table.row_sums, table.n)
    hb = _entropy(table.col_sums, table.n)
    if normalizer == "arithmetic":
        norm = 0.5 * (ha + hb)
    elif normalizer == "max":
        norm = max(ha, hb)
    elif normalizer == "min":
        norm = min(ha, hb)
    else:
        norm = np.sqrt(ha * hb)
    denom = norm - emi
    if denom == 0.0:
        return 0.0
    return float((mi - emi) / denom)
