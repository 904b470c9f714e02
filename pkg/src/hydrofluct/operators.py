"""Discrete differential operators on nodal grids.

Two families are provided, both second order in the bulk:

* node-centered central differences (skew-adjoint on fields that vanish on
  the boundary) used for advective fluxes and generic diagnostics;
* compact staggered-edge differences whose divergence is exactly the
  negative transpose of the gradient, used for dissipative fluxes and for
  the noise quadrature.

All operators are dense ``numpy`` matrices acting on flattened scalar
fields; the problem sizes targeted here make sparsity unnecessary.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Grid


def central_diff_matrix(grid: Grid, axis: int) -> np.ndarray:
    """Nodal first-derivative matrix: central interior, one-sided boundary rows."""
    n = grid.n_nodes
    h = grid.dx[axis]
    s = grid.strides[axis]
    na = grid.shape[axis]
    ia = grid.multi_index[:, axis]
    C = np.zeros((n, n))
    for node in range(n):
        i = ia[node]
        if 1 <= i <= na - 2:
            C[node, node + s] += 0.5 / h
            C[node, node - s] -= 0.5 / h
        elif i == 0:
            C[node, node] -= 1.5 / h
            C[node, node + s] += 2.0 / h
            C[node, node + 2 * s] -= 0.5 / h
        else:
            C[node, node] += 1.5 / h
            C[node, node - s] -= 2.0 / h
            C[node, node - 2 * s] += 0.5 / h
    return C


def laplacian_matrix(grid: Grid) -> np.ndarray:
    """Compact Laplacian, exact on quadratics (one-sided rows on the boundary)."""
    n = grid.n_nodes
    L = np.zeros((n, n))
    for axis in range(grid.d):
        h2 = grid.dx[axis] ** 2
        s = grid.strides[axis]
        na = grid.shape[axis]
        ia = grid.multi_index[:, axis]
        for node in range(n):
            i = ia[node]
            if 1 <= i <= na - 2:
                L[node, node - s] += 1.0 / h2
                L[node, node] += -2.0 / h2
                L[node, node + s] += 1.0 / h2
            elif i == 0:
                L[node, node] += 2.0 / h2
                L[node, node + s] += -5.0 / h2
                L[node, node + 2 * s] += 4.0 / h2
                L[node, node + 3 * s] += -1.0 / h2
            else:
                L[node, node] += 2.0 / h2
                L[node, node - s] += -5.0 / h2
                L[node, node - 2 * s] += 4.0 / h2
                L[node, node - 3 * s] += -1.0 / h2
    return L


@dataclass(frozen=True)
class EdgeSet:
    """Staggered edges along one axis, keyed by their lower node."""

    axis: int
    lower: np.ndarray  # flat node ids, lower end of each edge
    upper: np.ndarray  # lower + stride
    h: float

    @property
    def n_edges(self) -> int:
        return int(self.lower.size)


def edge_set(grid: Grid, axis: int) -> EdgeSet:
    ia = grid.multi_index[:, axis]
    lower = np.nonzero(ia <= grid.shape[axis] - 2)[0]
    return EdgeSet(axis=axis, lower=lower, upper=lower + grid.strides[axis], h=grid.dx[axis])


def edge_grad_matrix(grid: Grid, es: EdgeSet) -> np.ndarray:
    """(n_edges, n_nodes) forward difference onto edges."""
    G = np.zeros((es.n_edges, grid.n_nodes))
    r = np.arange(es.n_edges)
    G[r, es.upper] += 1.0 / es.h
    G[r, es.lower] -= 1.0 / es.h
    return G


def edge_avg_matrix(grid: Grid, es: EdgeSet) -> np.ndarray:
    """(n_edges, n_nodes) arithmetic mean of the two edge endpoints."""
    A = np.zeros((es.n_edges, grid.n_nodes))
    r = np.arange(es.n_edges)
    A[r, es.upper] += 0.5
    A[r, es.lower] += 0.5
    return A


def fv_divergence_matrix(grid: Grid, es: EdgeSet) -> np.ndarray:
    """(n_interior, n_edges) staggered divergence; equals -edge_grad^T on interior columns."""
    edge_of_lower = np.full(grid.n_nodes, -1, dtype=int)
    edge_of_lower[es.lower] = np.arange(es.n_edges)
    D = np.zeros((grid.n_interior, es.n_edges))
    s = grid.strides[es.axis]
    for rank, node in enumerate(grid.interior_ids):
        D[rank, edge_of_lower[node]] += 1.0 / es.h
        D[rank, edge_of_lower[node - s]] -= 1.0 / es.h
    return D


@dataclass(frozen=True)
class CornerSet:
    """Base nodes for one-sided tensor-gradient samples (all axes shifted the same way)."""

    sign: int  # +1 forward, -1 backward
    base: np.ndarray  # flat node ids
    neighbors: np.ndarray  # (n_samples, d): base shifted by sign*stride per axis


def corner_sets(grid: Grid) -> tuple[CornerSet, CornerSet]:
    mi = grid.multi_index
    plus = np.ones(grid.n_nodes, dtype=bool)
    minus = np.ones(grid.n_nodes, dtype=bool)
    for a in range(grid.d):
        plus &= mi[:, a] <= grid.shape[a] - 2
        minus &= mi[:, a] >= 1
    base_p = np.nonzero(plus)[0]
    base_m = np.nonzero(minus)[0]
    nb_p = np.stack([base_p + grid.strides[a] for a in range(grid.d)], axis=1)
    nb_m = np.stack([base_m - grid.strides[a] for a in range(grid.d)], axis=1)
    return (
        CornerSet(sign=+1, base=base_p, neighbors=nb_p),
        CornerSet(sign=-1, base=base_m, neighbors=nb_m),
    )


def sample_tensor_gradient(grid: Grid, cs: CornerSet, vec: np.ndarray) -> np.ndarray:
    """One-sided gradient samples of a nodal vector field.

    ``vec`` has shape (n_nodes, d); the result c has shape (n_samples, d, d)
    with c[:, k, l] approximating d(vec_k)/dx_l at the base nodes.
    """
    n_s = cs.base.size
    c = np.empty((n_s, grid.d, grid.d))
    for l in range(grid.d):
        dv = (vec[cs.neighbors[:, l]] - vec[cs.base]) * (cs.sign / grid.dx[l])
        c[:, :, l] = dv
    return c


@dataclass(frozen=True)
class Operators:
    """Bundle of the discrete operators for one grid."""

    grid: Grid
    central: tuple[np.ndarray, ...]
    laplacian: np.ndarray
    edges: tuple[EdgeSet, ...]
    edge_grad: tuple[np.ndarray, ...]
    edge_avg: tuple[np.ndarray, ...]
    fv_div: tuple[np.ndarray, ...]
    corners: tuple[CornerSet, CornerSet]

    @property
    def central_interior(self) -> tuple[np.ndarray, ...]:
        ids = self.grid.interior_ids
        return tuple(C[ids] for C in self.central)


def build_ops(grid: Grid) -> Operators:
    central = tuple(central_diff_matrix(grid, a) for a in range(grid.d))
    edges = tuple(edge_set(grid, a) for a in range(grid.d))
    return Operators(
        grid=grid,
        central=central,
        laplacian=laplacian_matrix(grid),
        edges=edges,
        edge_grad=tuple(edge_grad_matrix(grid, es) for es in edges),
        edge_avg=tuple(edge_avg_matrix(grid, es) for es in edges),
        fv_div=tuple(fv_divergence_matrix(grid, es) for es in edges),
        corners=corner_sets(grid),
    )
