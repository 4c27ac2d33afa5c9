"""Mixtures of conditional linear Gaussian (CLG) Bayesian networks.

A CLG network puts a conditional probability table on every discrete node
(over the joint configurations of its discrete parents) and, on every
continuous node, one linear regression on its continuous parents per
discrete-parent configuration. Discrete nodes never have continuous parents.

Structures are learned per cluster by greedy add/delete/reverse search with
a short tabu memory, scored by BIC; clustering alternates that M-step with
posterior (E) and hard-assignment (C) steps on the classification
likelihood. The M-step keeps the previous cluster model whenever the freshly
learned one explains the cluster worse, so the classification likelihood
never decreases between iterations (cluster reseeding excepted).
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import (
    ConfigError,
    FitResult,
    InsufficientDataError,
    MixedDataset,
    NOMINAL,
    Partition,
    ColumnSchema,
    SchemaError,
    prototypes_from_labels,
    require_valid,
)

_LOG_2PI = float(np.log(2.0 * np.pi))
_VAR_FLOOR_REL = 1e-6


@dataclass(frozen=True)
class ClgNode:
    name: str
    discrete: bool
    levels: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(str(v) for v in self.levels))
        if self.discrete and len(self.levels) < 2:
            raise SchemaError(f"discrete node {self.name!r} needs >= 2 levels")
        if not self.discrete and self.levels:
            raise SchemaError(f"continuous node {self.name!r} declares levels")


@dataclass(frozen=True)
class DiscreteParams:
    """CPT rows indexed by the mixed-radix configuration of the discrete
    parents (parents ordered by node position, first parent fastest)."""

    cpt: np.ndarray

    def __post_init__(self):
        cpt = np.asarray(self.cpt, dtype=np.float64)
        cpt.setflags(write=False)
        object.__setattr__(self, "cpt", cpt)
        if not np.allclose(cpt.sum(axis=1), 1.0, atol=1e-9):
            raise SchemaError("CPT rows must sum to 1")
        if (cpt < 0).any():
            raise SchemaError("CPT entries must be non-negative")


@dataclass(frozen=True)
class GaussianParams:
    """Per configuration: intercept + coefficients on the continuous parents
    (node-position order) and a positive residual variance."""

    beta: np.ndarray
    variance: np.ndarray

    def __post_init__(self):
        beta = np.asarray(self.beta, dtype=np.float64)
        variance = np.asarray(self.variance, dtype=np.float64)
        beta.setflags(write=False)
        variance.setflags(write=False)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "variance", variance)
        if (variance <= 0).any():
            raise SchemaError("variances must be positive")
        if beta.shape[0] != variance.shape[0]:
            raise SchemaError("beta and variance disagree on configuration count")


def nodes_from_schema(schema: Sequence[ColumnSchema]) -> tuple[ClgNode, ...]:
    return tuple(
        ClgNode(c.name, c.is_categorical, c.levels if c.is_categorical else ())
        for c in schema
    )


def schema_from_nodes(nodes: Sequence[ClgNode]) -> tuple[ColumnSchema, ...]:
    return tuple(
        ColumnSchema(v.name, NOMINAL, v.levels) if v.discrete
        else ColumnSchema(v.name, "continuous")
        for v in nodes
    )


class ClgNetwork:
    """Directed acyclic CLG network over a fixed set of typed nodes."""

    def __init__(self, nodes: Sequence[ClgNode], edges, parameters: dict):
        self.nodes = tuple(nodes)
        names = [v.name for v in self.nodes]
        if len(set(names)) != len(names):
            raise SchemaError("duplicate node names")
        self._index = {name: i for i, name in enumerate(names)}
        self._node_by_name = {v.name: v for v in self.nodes}
        edges = tuple(sorted((str(u), str(v)) for u, v in edges))
        for u, v in edges:
            if u not in self._index or v not in self._index:
                raise SchemaError(f"edge ({u}, {v}) references unknown node")
            if not self._node_by_name[u].discrete and self._node_by_name[v].discrete:
                raise SchemaError(f"edge ({u}, {v}) puts a continuous parent on a discrete node")
        if len(set(edges)) != len(edges):
            raise SchemaError("duplicate edges")
        self.edges = edges
        self._parents = {name: [] for name in names}
        for u, v in edges:
            self._parents[v].append(u)
        for name in names:
            self._parents[name].sort(key=self._index.__getitem__)
        self.topo_order = self._toposort()
        self.parameters = dict(parameters)
        self._validate_parameters()

    def _toposort(self) -> list[str]:
        indeg = {v.name: len(self._parents[v.name]) for v in self.nodes}
        children: dict[str, list[str]] = {v.name: [] for v in self.nodes}
        for u, v in self.edges:
            children[u].append(v)
        ready = sorted((n for n, d in indeg.items() if d == 0), key=self._index.__getitem__)
        order = []
        while ready:
            u = ready.pop(0)
            order.append(u)
            for w in sorted(children[u], key=self._index.__getitem__):
                indeg[w] -= 1
                if indeg[w] == 0:
                    ready.append(w)
            ready.sort(key=self._index.__getitem__)
        if len(order) != len(self.nodes):
            raise SchemaError("edge set contains a cycle")
        return order

    def node(self, name: str) -> ClgNode:
        return self._node_by_name[name]

    def parents(self, name: str) -> list[str]:
        return list(self._parents[name])

    def discrete_parents(self, name: str) -> list[str]:
        return [p for p in self._parents[name] if self._node_by_name[p].discrete]

    def continuous_parents(self, name: str) -> list[str]:
        return [p for p in self._parents[name] if not self._node_by_name[p].discrete]

    def n_configs(self, name: str) -> int:
        out = 1
        for p in self.discrete_parents(name):
            out *= len(self._node_by_name[p].levels)
        return out

    def _validate_parameters(self):
        for v in self.nodes:
            params = self.parameters.get(v.name)
            if params is None:
                raise SchemaError(f"missing parameters for node {v.name!r}")
            n_cfg = self.n_configs(v.name)
            if v.discrete:
                if not isinstance(params, DiscreteParams):
                    raise SchemaError(f"node {v.name!r} needs DiscreteParams")
                if params.cpt.shape != (n_cfg, len(v.levels)):
                    raise SchemaError(
                        f"node {v.name!r}: CPT shape {params.cpt.shape} != "
                        f"({n_cfg}, {len(v.levels)})")
            else:
                if not isinstance(params, GaussianParams):
                    raise SchemaError(f"node {v.name!r} needs GaussianParams")
                expected = (n_cfg, 1 + len(self.continuous_parents(v.name)))
                if params.beta.shape != expected:
                    raise SchemaError(
                        f"node {v.name!r}: beta shape {params.beta.shape} != {expected}")

    # -- serialization ----------------------------------------------------

    def to_dict(self) -> dict:
        out = {"nodes": [], "edges": [list(e) for e in self.edges], "parameters": {}}
        for v in self.nodes:
            entry = {"name": v.name, "type": "discrete" if v.discrete else "continuous"}
            if v.discrete:
                entry["levels"] = list(v.levels)
            out["nodes"].append(entry)
        for name, params in self.parameters.items():
            if isinstance(params, DiscreteParams):
                out["parameters"][name] = {"cpt": params.cpt.tolist()}
            else:
                out["parameters"][name] = {
                    "beta": params.beta.tolist(),
                    "variance": params.variance.tolist(),
                }
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ClgNetwork":
        nodes = tuple(
            ClgNode(e["name"], e["type"] == "discrete", tuple(e.get("levels", ())))
            for e in data["nodes"]
        )
        params = {}
        for name, entry in data["parameters"].items():
            if "cpt" in entry:
                params[name] = DiscreteParams(np.asarray(entry["cpt"]))
            else:
                params[name] = GaussianParams(
                    np.asarray(entry["beta"]), np.asarray(entry["variance"]))
        return cls(nodes, [tuple(e) for e in data["edges"]], params)

    # -- evaluation and sampling ------------------------------------------

    def loglik_rows(self, dataset: MixedDataset) -> np.ndarray:
        """Per-row log density; raises on levels not declared for a node."""
        table = _Table.from_dataset(dataset)
        return _network_loglik_table(self, table)

    def sample(self, n: int, rng) -> MixedDataset:
        """Draw ``n`` rows in topological order."""
        columns: dict[str, np.ndarray] = {}
        codes: dict[str, np.ndarray] = {}
        for name in self.topo_order:
            v = self._node_by_name[name]
            cfg = _config_from_codes(
                [codes[p] for p in self.discrete_parents(name)],
                [len(self._node_by_name[p].levels) for p in self.discrete_parents(name)],
                n,
            )
            params = self.parameters[name]
            if v.discrete:
                cum = np.cumsum(params.cpt, axis=1)
                u = rng.random(n)
                code = (u[:, None] > cum[cfg]).sum(axis=1)
                codes[name] = code
                columns[name] = np.asarray(v.levels, dtype=object)[code]
            else:
                pred = params.beta[cfg, 0]
                for j, p in enumerate(self.continuous_parents(name)):
                    pred = pred + params.beta[cfg, 1 + j] * columns[p]
                columns[name] = pred + np.sqrt(params.variance[cfg]) * rng.standard_normal(n)
        return MixedDataset.from_columns(schema_from_nodes(self.nodes), columns)


@dataclass(frozen=True)
class MbnModel:
    """K CLG networks over a shared node set plus mixing proportions."""

    components: tuple
    mixing: np.ndarray

    def __post_init__(self):
        mixing = np.asarray(self.mixing, dtype=np.float64)
        mixing.setflags(write=False)
        object.__setattr__(self, "mixing", mixing)
        object.__setattr__(self, "components", tuple(self.components))
        if len(self.components) != mixing.size:
            raise SchemaError("one mixing weight per component required")
        if not np.isclose(mixing.sum(), 1.0, atol=1e-9):
            raise SchemaError("mixing weights must sum to 1")
        first = [v.name for v in self.components[0].nodes]
        for net in self.components[1:]:
            if [v.name for v in net.nodes] != first:
                raise SchemaError("components must share the same node set")


# ---------------------------------------------------------------------------
# internal tabular view


class _Table:
    """Columns of a dataset pre-coded for repeated family fits."""

    __slots__ = ("n", "names", "discrete", "n_levels", "data", "position")

    @classmethod
    def from_dataset(cls, dataset: MixedDataset) -> "_Table":
        t = cls()
        t.n = dataset.n
        t.names = [c.name for c in dataset.schema]
        t.position = {name: i for i, name in enumerate(t.names)}
        t.discrete = {c.name: c.is_categorical for c in dataset.schema}
        t.n_levels = {c.name: c.n_levels for c in dataset.schema if c.is_categorical}
        t.data = {}
        for c in dataset.schema:
            if c.is_categorical:
                codes = dataset.codes(c.name)
                if (codes < 0).any():
                    bad = dataset.column(c.name)[codes < 0][0]
                    raise SchemaError(f"column {c.name!r}: level {bad!r} not declared")
                t.data[c.name] = codes
            else:
                t.data[c.name] = dataset.column(c.name)
        return t

    def take(self, indices) -> "_Table":
        t = _Table()
        t.n = len(indices)
        t.names = self.names
        t.position = self.position
        t.discrete = self.discrete
        t.n_levels = self.n_levels
        t.data = {name: arr[indices] for name, arr in self.data.items()}
        return t


def _config_from_codes(parent_codes, parent_sizes, n):
    if not parent_codes:
        return np.zeros(n, dtype=np.int64)
    return np.ravel_multi_index(tuple(parent_codes), dims=tuple(parent_sizes)).astype(np.int64)


def _split_parents(table: _Table, parents) -> tuple[list, list]:
    ordered = sorted(parents, key=table.position.__getitem__)
    disc = [p for p in ordered if table.discrete[p]]
    cont = [p for p in ordered if not table.discrete[p]]
    return disc, cont


def _config_index(table: _Table, disc_parents) -> tuple[np.ndarray, int]:
    sizes = [table.n_levels[p] for p in disc_parents]
    idx = _config_from_codes([table.data[p] for p in disc_parents], sizes, table.n)
    return idx, int(np.prod(sizes)) if sizes else 1


def _fit_discrete_family(table: _Table, node: str, disc_parents, smoothing: float) -> DiscreteParams:
    idx, n_cfg = _config_index(table, disc_parents)
    m = table.n_levels[node]
    counts = np.bincount(idx * m + table.data[node], minlength=n_cfg * m)
    counts = counts.reshape(n_cfg, m).astype(np.float64)
    counts += smoothing
    totals = counts.sum(axis=1, keepdims=True)
    empty = totals[:, 0] == 0.0
    counts[empty] = 1.0
    totals = counts.sum(axis=1, keepdims=True)
    return DiscreteParams(cpt=counts / totals)


def _fit_gaussian_family(table: _Table, node: str, disc_parents, cont_parents) -> GaussianParams:
    idx, n_cfg = _config_index(table, disc_parents)
    y = table.data[node]
    marg_mean = float(y.mean())
    marg_var = float(y.var())
    floor = max(_VAR_FLOOR_REL * marg_var, 1e-12)
    marg_var = max(marg_var, floor)
    X = (np.column_stack([table.data[p] for p in cont_parents])
         if cont_parents else np.empty((table.n, 0)))
    beta = np.zeros((n_cfg, 1 + X.shape[1]))
    beta[:, 0] = marg_mean
    var = np.full(n_cfg, marg_var)
    for c in range(n_cfg):
        rows = idx == c
        cnt = int(rows.sum())
        if cnt < 2:
            continue  # thin configuration: marginal Gaussian fallback
        A = np.column_stack([np.ones(cnt), X[rows]])
        coef, *_ = np.linalg.lstsq(A, y[rows], rcond=None)
        resid = y[rows] - A @ coef
        beta[c] = coef
        var[c] = max(float(resid @ resid) / cnt, floor)
    return GaussianParams(beta=beta, variance=var)


def _discrete_loglik_rows(params: DiscreteParams, table: _Table, node, disc_parents) -> np.ndarray:
    idx, _ = _config_index(table, disc_parents)
    with np.errstate(divide="ignore"):
        return np.log(params.cpt[idx, table.data[node]])


def _gaussian_loglik_rows(params: GaussianParams, table: _Table, node,
                          disc_parents, cont_parents) -> np.ndarray:
    idx, _ = _config_index(table, disc_parents)
    pred = params.beta[idx, 0]
    for j, p in enumerate(cont_parents):
        pred = pred + params.beta[idx, 1 + j] * table.data[p]
    v = params.variance[idx]
    resid = table.data[node] - pred
    return -0.5 * (_LOG_2PI + np.log(v) + resid * resid / v)


def _family_loglik_rows(table: _Table, node: str, parents, params) -> np.ndarray:
    disc, cont = _split_parents(table, parents)
    if table.discrete[node]:
        return _discrete_loglik_rows(params, table, node, disc)
    return _gaussian_loglik_rows(params, table, node, disc, cont)


def _fit_family(table: _Table, node: str, parents, smoothing: float):
    disc, cont = _split_parents(table, parents)
    if table.discrete[node]:
        return _fit_discrete_family(table, node, disc, smoothing)
    return _fit_gaussian_family(table, node, disc, cont)


def _family_df(table: _Table, node: str, parents) -> int:
    disc, cont = _split_parents(table, parents)
    n_cfg = 1
    for p in disc:
        n_cfg *= table.n_levels[p]
    if table.discrete[node]:
        return n_cfg * (table.n_levels[node] - 1)
    return n_cfg * (len(cont) + 2)


def _family_bic(table: _Table, node: str, parents, smoothing: float) -> float:
    params = _fit_family(table, node, parents, smoothing)
    ll = float(_family_loglik_rows(table, node, parents, params).sum())
    return ll - 0.5 * _family_df(table, node, parents) * math.log(table.n)


def _fit_parameters(table: _Table, parent_sets: dict, smoothing: float) -> dict:
    return {node: _fit_family(table, node, parents, smoothing)
            for node, parents in parent_sets.items()}


def _network_loglik_table(network: ClgNetwork, table: _Table) -> np.ndarray:
    total = np.zeros(table.n)
    for v in network.nodes:
        total += _family_loglik_rows(
            table, v.name, network.parents(v.name), network.parameters[v.name])
    return total


# ---------------------------------------------------------------------------
# public scoring / fitting operations


def network_loglik(network: ClgNetwork, row) -> float:
    """Log density of one row: sum over nodes of the log of the local
    conditional given the row's parent values."""
    if isinstance(row, dict):
        cells = [row[v.name] for v in network.nodes]
    else:
        cells = list(row)
    dataset = MixedDataset(schema_from_nodes(network.nodes), [cells])
    return float(network.loglik_rows(dataset)[0])


def fit_parameters(dataset: MixedDataset, edges, smoothing: float = 1.0) -> ClgNetwork:
    """Maximum-likelihood CLG parameters for a fixed structure (CPTs with
    add-``smoothing`` counts, per-configuration least squares otherwise)."""
    require_valid(dataset)
    table = _Table.from_dataset(dataset)
    parent_sets = {name: [] for name in table.names}
    for u, v in edges:
        parent_sets[v].append(u)
    params = _fit_parameters(table, parent_sets, smoothing)
    return ClgNetwork(nodes_from_schema(dataset.schema), list(edges), params)


def bic_score(structure, dataset: MixedDataset, smoothing: float = 1.0) -> float:
    """BIC of a structure: fitted log-likelihood minus (df/2) log n, summed
    over node families (the score decomposes exactly)."""
    require_valid(dataset)
    if dataset.n < 2:
        raise InsufficientDataError("BIC needs n >= 2")
    edges = structure.edges if isinstance(structure, ClgNetwork) else tuple(structure)
    table = _Table.from_dataset(dataset)
    parent_sets = {name: [] for name in table.names}
    for u, v in edges:
        parent_sets[v].append(u)
    return sum(_family_bic(table, node, parents, smoothing)
               for node, parents in parent_sets.items())


def _has_path(children: dict, src: str, dst: str, skip=None) -> bool:
    stack = [src]
    seen = set()
    while stack:
        u = stack.pop()
        if u == dst:
            return True
        if u in seen:
            continue
        seen.add(u)
        for w in children[u]:
            if skip is not None and (u, w) == skip:
                continue
            stack.append(w)
    return False


def _tabu_search(table: _Table, tabu_size: int, max_moves: int, smoothing: float):
    names = sorted(table.names)
    parent_sets: dict[str, tuple] = {name: () for name in table.names}
    cache: dict[tuple, float] = {}

    def family(node, parents) -> float:
        key = (node, tuple(sorted(parents)))
        if key not in cache:
            cache[key] = _family_bic(table, node, key[1], smoothing)
        return cache[key]

    score = sum(family(v, ()) for v in table.names)
    edges: set[tuple] = set()
    children: dict[str, set] = {name: set() for name in table.names}
    fingerprint = frozenset()
    tabu: deque = deque([fingerprint], maxlen=max(tabu_size, 1))
    best_sets = {k: v for k, v in parent_sets.items()}
    best_score = score
    visited = [fingerprint]
    stall = 0

    def clg_ok(u, v) -> bool:
        return table.discrete[u] or not table.discrete[v]

    for _ in range(max_moves):
        chosen = None
        for u in names:
            for v in names:
                if u == v or not clg_ok(u, v):
                    continue
                if (u, v) in edges or (v, u) in edges:
                    continue
                if _has_path(children, v, u):
                    continue
                fp = frozenset(edges | {(u, v)})
                if fp in tabu:
                    continue
                delta = family(v, parent_sets[v] + (u,)) - family(v, parent_sets[v])
                if chosen is None or delta > chosen[0]:
                    chosen = (delta, "add", u, v, fp)
        for u, v in sorted(edges):
            fp = frozenset(edges - {(u, v)})
            if fp not in tabu:
                reduced = tuple(p for p in parent_sets[v] if p != u)
                delta = family(v, reduced) - family(v, parent_sets[v])
                if chosen is None or delta > chosen[0]:
                    chosen = (delta, "delete", u, v, fp)
            if clg_ok(v, u) and not _has_path(children, u, v, skip=(u, v)):
                fp = frozenset((edges - {(u, v)}) | {(v, u)})
                if fp not in tabu:
                    reduced = tuple(p for p in parent_sets[v] if p != u)
                    delta = (family(v, reduced) - family(v, parent_sets[v])
                             + family(u, parent_sets[u] + (v,)) - family(u, parent_sets[u]))
                    if chosen is None or delta > chosen[0]:
                        chosen = (delta, "reverse", u, v, fp)
        if chosen is None:
            break
        delta, kind, u, v, fingerprint = chosen
        if kind == "add":
            edges.add((u, v))
            children[u].add(v)
            parent_sets[v] = parent_sets[v] + (u,)
        elif kind == "delete":
            edges.discard((u, v))
            children[u].discard(v)
            parent_sets[v] = tuple(p for p in parent_sets[v] if p != u)
        else:
            edges.discard((u, v))
            children[u].discard(v)
            parent_sets[v] = tuple(p for p in parent_sets[v] if p != u)
            edges.add((v, u))
            children[v].add(u)
            parent_sets[u] = parent_sets[u] + (v,)
        score += delta
        tabu.append(fingerprint)
        visited.append(fingerprint)
        if score > best_score + 1e-12:
            best_score = score
            best_sets = {k: v for k, v in parent_sets.items()}
            stall = 0
        else:
            stall += 1
            if stall >= max(tabu_size, 1):
                break
    best_sets = {node: tuple(sorted(ps, key=table.position.__getitem__))
                 for node, ps in best_sets.items()}
    return best_sets, best_score, visited


def learn_structure(dataset: MixedDataset, tabu_size: int = 10, max_moves: int = 500,
                    seed: int = 0, smoothing: float = 1.0) -> ClgNetwork:
    """BIC-scored structure search over add/delete/reverse moves.

    Moves creating cycles or putting a continuous parent on a discrete node
    are rejected; a tabu list of the last ``tabu_size`` visited structures
    blocks immediate revisits, and the search may take worsening steps until
    it stalls. The best structure visited is returned with fitted
    parameters. The search itself is deterministic; ``seed`` is accepted for
    interface symmetry with the fit functions.
    """
    require_valid(dataset)
    if dataset.n < 2:
        raise InsufficientDataError("structure learning needs n >= 2")
    table = _Table.from_dataset(dataset)
    parent_sets, _, _ = _tabu_search(table, tabu_size, max_moves, smoothing)
    params = _fit_parameters(table, parent_sets, smoothing)
    return ClgNetwork(nodes_from_schema(dataset.schema),
                      [(u, v) for v, ps in parent_sets.items() for u in ps], params)


def _gower_to_rows(table: _Table, rows) -> np.ndarray:
    """(n, len(rows)) Gower dissimilarities to the given anchor rows."""
    out = np.zeros((table.n, len(rows)))
    for name in table.names:
        col = table.data[name]
        anchors = col[rows]
        if table.discrete[name]:
            out += col[:, None] != anchors[None, :]
        else:
            spread = float(col.max() - col.min()) or 1.0
            out += np.abs(col[:, None] - anchors[None, :]) / spread
    return out / len(table.names)


def _random_partition(table: _Table, K, min_size, rng):
    """Random partition seeded by K random rows: every row joins its nearest
    seed (Gower), short clusters then pull their closest rows from larger
    ones. Uniform random labels make each initial cluster a near copy of the
    whole mixture, which strands CEM in weak optima."""
    n = table.n
    seeds = rng.choice(n, size=K, replace=False)
    dist = _gower_to_rows(table, seeds)
    labels = np.argmin(dist, axis=1) + 1
    counts = np.bincount(labels - 1, minlength=K)
    for k in np.argsort(counts):
        if counts[k] >= min_size:
            continue
        for i in np.argsort(dist[:, k], kind="stable"):
            if counts[k] >= min_size:
                break
            src = labels[i] - 1
            if src != k and counts[src] > min_size:
                counts[src] -= 1
                counts[k] += 1
                labels[i] = k + 1
    return labels


class _ClusterModel:
    """One component during CEM: parent sets plus fitted parameters."""

    __slots__ = ("parent_sets", "params")

    def __init__(self, parent_sets, params):
        self.parent_sets = parent_sets
        self.params = params

    def loglik(self, table: _Table) -> np.ndarray:
        total = np.zeros(table.n)
        for node, parents in self.parent_sets.items():
            total += _family_loglik_rows(table, node, parents, self.params[node])
        return total


def _mstep_cluster(table: _Table, sub: _Table, incumbent: Optional[_ClusterModel],
                   relearn: bool, tabu_size: int, max_moves: int, smoothing: float) -> _ClusterModel:
    candidates = []
    if relearn or incumbent is None:
        parent_sets, _, _ = _tabu_search(sub, tabu_size, max_moves, smoothing)
        candidates.append(_ClusterModel(parent_sets, _fit_parameters(sub, parent_sets, smoothing)))
    if incumbent is not None:
        candidates.append(_ClusterModel(
            incumbent.parent_sets, _fit_parameters(sub, incumbent.parent_sets, smoothing)))
        candidates.append(incumbent)
    best = None
    best_ll = -np.inf
    for cand in candidates:
        ll = float(cand.loglik(sub).sum())
        if best is None or ll > best_ll:
            best, best_ll = cand, ll
    return best


def _cem_single(table: _Table, K, min_size, max_cem_iter, relearn, tabu_size,
                max_moves, smoothing, rng):
    n = table.n
    labels = _random_partition(table, K, min_size, rng)
    models: list[Optional[_ClusterModel]] = [None] * K
    trace = []
    reseeds = []
    converged = False
    for it in range(1, max_cem_iter + 1):
        counts = np.bincount(labels - 1, minlength=K)
        log_post = np.empty((n, K))
        for k in range(K):
            rows = np.flatnonzero(labels == k + 1)
            models[k] = _mstep_cluster(table, table.take(rows), models[k], relearn,
                                       tabu_size, max_moves, smoothing)
            log_post[:, k] = math.log(counts[k] / n) + models[k].loglik(table)
        new_labels = np.argmax(log_post, axis=1) + 1
        new_counts = np.bincount(new_labels - 1, minlength=K)
        if new_counts.min() < min_size:
            # refill starving clusters with the worst-explained rows
            reseeds.append(it)
            row_best = log_post[np.arange(n), new_labels - 1]
            order = np.argsort(row_best, kind="stable")
            for k in np.flatnonzero(new_counts < min_size):
                need = min_size - new_counts[k]
                for i in order:
                    if need == 0:
                        break
                    src = new_labels[i] - 1
                    if src != k and new_counts[src] > min_size:
                        new_counts[src] -= 1
                        new_counts[k] += 1
                        new_labels[i] = k + 1
                        need -= 1
        cml = float(log_post[np.arange(n), new_labels - 1].sum())
        trace.append(cml)
        if np.array_equal(new_labels, labels):
            converged = True
            break
        labels = new_labels
    return labels, models, trace, it, converged, reseeds


def mbn_cem_fit(dataset: MixedDataset, K: int, n_init: int = 10, max_cem_iter: int = 200,
                seed: int = 0, relearn_structure: bool = True, tabu_size: int = 10,
                max_moves: int = 500, smoothing: float = 1.0) -> FitResult:
    """Cluster by a mixture of CLG networks via classification EM.

    Each restart starts from a random partition whose clusters all hold at
    least max(10, 2 * #columns) rows. The M-step learns one structure and
    parameter set per cluster (keeping the previous model when it explains
    the cluster better), the E-step computes component posteriors and the
    C-step reassigns rows to the best component. The best restart by final
    classification likelihood wins. Set ``relearn_structure=False`` to
    freeze structures after the first iteration (faster, less faithful).
    """
    require_valid(dataset)
    if K < 1:
        raise ConfigError("K must be >= 1")
    if K > dataset.n:
        raise ConfigError(f"K={K} exceeds the number of rows n={dataset.n}")
    min_size = max(10, 2 * len(dataset.schema))
    if dataset.n < K * min_size:
        raise ConfigError(
            f"need at least K * max(10, 2p) = {K * min_size} rows for K={K}, got {dataset.n}")
    table = _Table.from_dataset(dataset)
    best = None
    for child in np.random.SeedSequence(seed).spawn(n_init):
        rng = np.random.default_rng(child)
        run = _cem_single(table, K, min_size, max_cem_iter, relearn_structure,
                          tabu_size, max_moves, smoothing, rng)
        if best is None or run[2][-1] > best[2][-1]:
            best = run
    labels, models, trace, iterations, converged, reseeds = best

    counts = np.bincount(labels - 1, minlength=K)
    mixing = counts / counts.sum()
    components = []
    for k in range(K):
        edges = [(u, v) for v, ps in models[k].parent_sets.items() for u in ps]
        components.append(
            ClgNetwork(nodes_from_schema(dataset.schema), edges, models[k].params))
    model = MbnModel(components=tuple(components), mixing=mixing)
    return FitResult(
        partition=Partition.from_labels(labels, K=K),
        prototypes=prototypes_from_labels(dataset, labels, K),
        objective=trace[-1],
        iterations=iterations,
        converged=converged,
        seed=seed,
        details={
            "model": model,
            "cml_trace": trace,
            "reseed_iterations": reseeds,
            "edges": [sorted(net.edges) for net in components],
        },
    )
