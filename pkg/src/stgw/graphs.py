"""Route graphs, case signals, and the strong-product spatio-temporal graph.

Everything downstream (attention training, wavelet transforms, torque
classification) runs on the structures built here.  Product-graph vertices are
indexed slice-major: vertex ``v = t * N + i`` is base node ``i`` in time slice
``t`` (both 0-based internally).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import NumericError, ValidationError

LAMBDA_SAFETY = 1.01  # inflation applied to the power-iteration estimate
EIGEN_FLOOR = -1e-9   # numerical zero floor for Laplacian spectra


@dataclass(frozen=True)
class NodeRecord:
    """One city/town: identifier, label, coordinates, population."""

    node_id: int
    name: str
    lat: float
    lon: float
    population: int


@dataclass(frozen=True, eq=False)
class RouteGraph:
    """Undirected, self-loop-free spatial graph over a fixed node order.

    `adjacency` is a binary CSR matrix; `edges` holds each undirected edge once
    as an index pair (i, j) with i < j.  Isolated nodes are retained and listed
    in `isolated_ids` so the caller can decide whether to drop them.
    """

    nodes: tuple[NodeRecord, ...]
    adjacency: sp.csr_matrix
    edges: tuple[tuple[int, int], ...]
    isolated_ids: tuple[int, ...]
    _id_to_index: dict = field(repr=False, default=None)

    @property
    def n(self) -> int:
        return len(self.nodes)

    @property
    def node_ids(self) -> list[int]:
        return [rec.node_id for rec in self.nodes]

    @property
    def populations(self) -> np.ndarray:
        return np.array([rec.population for rec in self.nodes], dtype=float)

    def index_of(self, node_id: int) -> int:
        return self._id_to_index[node_id]

    def dense_adjacency(self) -> np.ndarray:
        return self.adjacency.toarray().astype(float)

    def neighbor_lists(self, include_self: bool) -> list[np.ndarray]:
        """Per-node neighbor index arrays; optionally with the node itself."""
        adj = self.adjacency.tolil()
        out = []
        for i in range(self.n):
            nbr = list(adj.rows[i])
            if include_self:
                nbr.append(i)
            out.append(np.array(sorted(nbr), dtype=int))
        return out


@dataclass(frozen=True, eq=False)
class CaseMatrix:
    """N x T signal matrix; row order matches the RouteGraph node order."""

    values: np.ndarray
    weeks: int

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 2:
            raise ValidationError("case matrix must be 2-dimensional (nodes x weeks)")
        if vals.shape[1] != self.weeks:
            raise ValidationError(
                f"case matrix has {vals.shape[1]} columns, expected T={self.weeks}"
            )
        if np.any(vals < 0):
            raise ValidationError("case matrix entries must be non-negative")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    def vertex_signal(self) -> np.ndarray:
        """Flatten to the product-graph vertex order (v = t*N + i)."""
        return np.ascontiguousarray(self.values.T).reshape(-1)


@dataclass(frozen=True, eq=False)
class TransitionMatrix:
    """Row-stochastic attention matrix P with strictly positive diagonal."""

    P: np.ndarray

    def __post_init__(self):
        P = np.asarray(self.P, dtype=float)
        if P.ndim != 2 or P.shape[0] != P.shape[1]:
            raise ValidationError("transition matrix must be square")
        if np.any(P < 0):
            raise ValidationError("transition matrix entries must be non-negative")
        rows = P.sum(axis=1)
        if np.max(np.abs(rows - 1.0)) > 1e-9:
            raise ValidationError("transition matrix rows must sum to 1 within 1e-9")
        if np.any(np.diag(P) <= 0):
            raise ValidationError("transition matrix diagonal must be strictly positive")
        P.flags.writeable = False
        object.__setattr__(self, "P", P)

    @property
    def n(self) -> int:
        return self.P.shape[0]

    def check_support(self, graph: RouteGraph) -> None:
        """Off-diagonal support must sit exactly inside the graph adjacency."""
        adj = graph.dense_adjacency() > 0
        off = self.P.copy()
        np.fill_diagonal(off, 0.0)
        bad = np.argwhere((off > 0) & ~adj)
        if bad.size:
            i, j = bad[0]
            raise ValidationError(
                f"transition weight on non-edge pair (index {i}, {j}): "
                "support mismatch between P and adjacency"
            )


@dataclass(frozen=True, eq=False)
class SpatioTemporalGraph:
    """Directed weighted product graph; `weights[u, v]` is the arc u -> v."""

    weights: sp.csr_matrix
    base_node_count: int
    slice_count: int

    @property
    def node_count(self) -> int:
        return self.base_node_count * self.slice_count

    @property
    def arc_count(self) -> int:
        return self.weights.nnz

    def vertex(self, i: int, t: int) -> int:
        return t * self.base_node_count + i


@dataclass(frozen=True, eq=False)
class SymmetricLaplacian:
    """Laplacian of the symmetrized weights of a directed graph (PSD)."""

    matrix: sp.csr_matrix
    lambda_max_estimate: float
    converged: bool = True

    @property
    def n(self) -> int:
        return self.matrix.shape[0]


def normalize_cases(raw: CaseMatrix, populations: np.ndarray,
                    node_ids: list[int] | None = None) -> CaseMatrix:
    """Scale raw counts to per-thousand-population rates.

    out[i, t] = 1000 * raw[i, t] / population_i
    """
    pops = np.asarray(populations, dtype=float)
    if pops.shape[0] != raw.values.shape[0]:
        raise ValidationError("population vector length does not match case matrix")
    bad = np.flatnonzero(~(pops > 0))
    if bad.size:
        which = node_ids[bad[0]] if node_ids is not None else bad[0]
        raise ValidationError(f"node {which} has zero or missing population")
    return CaseMatrix(values=1000.0 * raw.values / pops[:, None], weeks=raw.weeks)


def build_route_graph(nodes: list[NodeRecord], edges: list[tuple[int, int]]) -> RouteGraph:
    """Assemble a validated RouteGraph from node records and undirected id pairs.

    Duplicate and reversed-duplicate edges collapse to one; isolated nodes are
    kept but reported through `isolated_ids`.
    """
    ids = [rec.node_id for rec in nodes]
    seen: set[int] = set()
    for nid in ids:
        if nid in seen:
            raise ValidationError(f"duplicate node_id {nid}")
        seen.add(nid)
    for rec in nodes:
        if rec.population < 1:
            raise ValidationError(f"node {rec.node_id} has population < 1")
    id_to_index = {nid: k for k, nid in enumerate(ids)}

    n = len(nodes)
    pair_set = set()
    for src, dst in edges:
        if src not in id_to_index or dst not in id_to_index:
            missing = src if src not in id_to_index else dst
            raise ValidationError(f"edge references unknown node_id {missing}")
        if src == dst:
            raise ValidationError(f"self-loop edge on node_id {src}")
        i, j = sorted((id_to_index[src], id_to_index[dst]))
        pair_set.add((i, j))
    pairs = tuple(sorted(pair_set))

    if pairs:
        rows = np.array([p[0] for p in pairs] + [p[1] for p in pairs])
        cols = np.array([p[1] for p in pairs] + [p[0] for p in pairs])
        data = np.ones(rows.size, dtype=np.int8)
        adjacency = sp.csr_matrix((data, (rows, cols)), shape=(n, n))
    else:
        adjacency = sp.csr_matrix((n, n), dtype=np.int8)

    degree = np.asarray(adjacency.sum(axis=1)).ravel()
    isolated = tuple(ids[i] for i in range(n) if degree[i] == 0)

    return RouteGraph(
        nodes=tuple(nodes),
        adjacency=adjacency,
        edges=pairs,
        isolated_ids=isolated,
        _id_to_index=id_to_index,
    )


def strong_product(base: RouteGraph, transition: TransitionMatrix, slices: int) -> SpatioTemporalGraph:
    """Build the directed spatio-temporal graph of `slices` copies of `base`.

    Spatial arcs (i,t) -> (j,t) carry P with the diagonal removed.  Temporal
    arcs run strictly forward: (i,t) -> (i,t+1) carries p_ii and, for every
    neighbor j of i, (i,t) -> (j,t+1) carries p_ji (the transposed-orientation
    convention; the Laplacian symmetrization downstream absorbs the choice).
    """
    if slices < 2:
        raise ValidationError("strong product needs at least 2 time slices")
    if transition.n != base.n:
        raise ValidationError("transition matrix size does not match graph")
    transition.check_support(base)

    n = base.n
    P = transition.P
    rows, cols, data = [], [], []

    spatial_i = np.array([e[0] for e in base.edges] + [e[1] for e in base.edges], dtype=int)
    spatial_j = np.array([e[1] for e in base.edges] + [e[0] for e in base.edges], dtype=int)
    spatial_w = P[spatial_i, spatial_j]

    diag = np.arange(n)
    diag_w = P[diag, diag]

    for t in range(slices):
        base_off = t * n
        rows.append(spatial_i + base_off)
        cols.append(spatial_j + base_off)
        data.append(spatial_w)
        if t + 1 < slices:
            nxt = base_off + n
            # self arcs forward in time
            rows.append(diag + base_off)
            cols.append(diag + nxt)
            data.append(diag_w)
            # neighbor arcs forward in time, weight p_ji
            rows.append(spatial_i + base_off)
            cols.append(spatial_j + nxt)
            data.append(P[spatial_j, spatial_i])

    nt = n * slices
    if rows:
        weights = sp.csr_matrix(
            (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
            shape=(nt, nt),
        )
    else:
        weights = sp.csr_matrix((nt, nt))
    return SpatioTemporalGraph(weights=weights, base_node_count=n, slice_count=slices)


def laplacian(g: SpatioTemporalGraph) -> SymmetricLaplacian:
    """Symmetrized Laplacian of the directed weights.

    Each arc is averaged with its reverse, W_s = (W + W^T)/2, and the returned
    matrix is the standard Laplacian diag(W_s 1) - W_s of those symmetric
    weights.  Taking degrees from the symmetrized weights (rather than the raw
    out-weights) keeps the spectrum non-negative with smallest eigenvalue 0;
    the first and last time slices of a product graph are not flow-balanced,
    so the raw-out-degree variant would be indefinite and the spectral kernels
    (defined on [0, lambda_max]) could not be applied.
    """
    W = g.weights.tocsr()
    W_s = ((W + W.T) * 0.5).tocsr()
    deg = np.asarray(W_s.sum(axis=1)).ravel()
    L = (sp.diags(deg) - W_s).tocsr()
    est, converged = _power_iteration_radius(L)
    return SymmetricLaplacian(matrix=L, lambda_max_estimate=est, converged=converged)


def _power_iteration_radius(matrix: sp.spmatrix, tol: float = 1e-6,
                            max_iter: int = 1000) -> tuple[float, bool]:
    """Spectral-radius estimate by power iteration, inflated to an upper bound.

    Falls back to the Gershgorin bound (max absolute row sum) with a warning
    when the iteration fails to converge.
    """
    n = matrix.shape[0]
    rng = np.random.default_rng(0)
    x = rng.standard_normal(n)
    nrm = np.linalg.norm(x)
    if nrm == 0 or n == 0:
        return _gershgorin(matrix), False
    x /= nrm

    val = 0.0
    for _ in range(max_iter):
        y = matrix @ x
        new_val = float(np.linalg.norm(y))
        if new_val == 0.0:
            # annihilated start vector: spectrum is (numerically) zero
            warnings.warn("power iteration degenerated; using Gershgorin bound")
            return _gershgorin(matrix), False
        x = y / new_val
        if abs(new_val - val) <= tol * new_val:
            return new_val * LAMBDA_SAFETY, True
        val = new_val
    warnings.warn("power iteration did not converge; using Gershgorin bound")
    return _gershgorin(matrix), False


def _gershgorin(matrix: sp.spmatrix) -> float:
    if matrix.shape[0] == 0:
        return 0.0
    return float(np.max(np.abs(matrix).sum(axis=1)))


def estimate_lambda_max(L, tol: float = 1e-6, max_iter: int = 1000) -> float:
    """Upper bound for the largest eigenvalue of a SymmetricLaplacian or matrix."""
    matrix = L.matrix if isinstance(L, SymmetricLaplacian) else sp.csr_matrix(L)
    est, _ = _power_iteration_radius(matrix, tol=tol, max_iter=max_iter)
    return est


def base_laplacian(base: RouteGraph) -> SymmetricLaplacian:
    """Unweighted Laplacian of the route graph itself (degenerate single slice)."""
    single = SpatioTemporalGraph(
        weights=base.adjacency.astype(float).tocsr(),
        base_node_count=base.n,
        slice_count=1,
    )
    return laplacian(single)


def canonical_sign(vec: np.ndarray) -> np.ndarray:
    """Flip the vector if needed so its largest-magnitude entry is positive."""
    anchor = np.argmax(np.abs(vec))
    return -vec if vec[anchor] < 0 else vec.copy()


def downsample_mask(base: RouteGraph) -> set[int]:
    """Node ids to hide for display: negative entries of the top Laplacian eigenvector.

    The eigenvector sign is canonicalized with `canonical_sign`, making the
    mask invariant to the eigensolver's sign choice.
    """
    if base.n == 0:
        return set()
    L = base_laplacian(base).matrix.toarray()
    try:
        _, eigvecs = np.linalg.eigh(L)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise NumericError(f"eigensolver failure on route graph Laplacian: {exc}")
    vec = canonical_sign(eigvecs[:, -1])
    hidden = np.flatnonzero(vec < 0)
    ids = base.node_ids
    return {ids[i] for i in hidden}
