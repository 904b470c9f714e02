"""Uniform node-centered grids on the unit box.

The computational domain is [0, 1]^d (total volume 1) sampled on a tensor
grid of nodes, including the boundary.  Nodes are addressed by a flat index
in C order over the per-axis multi-index.  Vector-valued states carry
nu = d + 2 components per node in the fixed order (e, rho, j_1..j_d);
flattened state vectors are node-major: entry = node * nu + component.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np


@dataclass(frozen=True)
class Grid:
    """Tensor-product node grid with interior/boundary bookkeeping.

    ``shape`` gives the number of nodes per axis (>= 4 each, d = 1 or 2).
    The spacing per axis is 1/(n-1) so the node hull is the unit box.
    """

    shape: tuple[int, ...]

    def __post_init__(self):
        shape = tuple(int(n) for n in self.shape)
        object.__setattr__(self, "shape", shape)
        if len(shape) not in (1, 2):
            raise ValueError(f"only d=1 and d=2 grids are supported, got shape {shape}")
        if any(n < 4 for n in shape):
            raise ValueError(f"need at least 4 nodes per axis, got {shape}")

    @property
    def d(self) -> int:
        return len(self.shape)

    @property
    def nu(self) -> int:
        return self.d + 2

    @property
    def n_nodes(self) -> int:
        return int(np.prod(self.shape))

    @property
    def dx(self) -> tuple[float, ...]:
        return tuple(1.0 / (n - 1) for n in self.shape)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.dx))

    @cached_property
    def strides(self) -> tuple[int, ...]:
        # flat-index stride per axis, C order
        s = []
        for a in range(self.d):
            s.append(int(np.prod(self.shape[a + 1 :])))
        return tuple(s)

    @cached_property
    def multi_index(self) -> np.ndarray:
        """(n_nodes, d) integer multi-index of every node."""
        idx = np.indices(self.shape).reshape(self.d, -1).T
        return np.ascontiguousarray(idx)

    @cached_property
    def coords(self) -> np.ndarray:
        """(n_nodes, d) physical coordinates."""
        return self.multi_index * np.asarray(self.dx)

    @cached_property
    def interior_mask(self) -> np.ndarray:
        m = np.ones(self.n_nodes, dtype=bool)
        for a in range(self.d):
            ia = self.multi_index[:, a]
            m &= (ia >= 1) & (ia <= self.shape[a] - 2)
        return m

    @cached_property
    def boundary_mask(self) -> np.ndarray:
        return ~self.interior_mask

    @cached_property
    def interior_ids(self) -> np.ndarray:
        return np.nonzero(self.interior_mask)[0]

    @cached_property
    def boundary_ids(self) -> np.ndarray:
        return np.nonzero(self.boundary_mask)[0]

    @property
    def n_interior(self) -> int:
        return int(self.interior_ids.size)

    @cached_property
    def interior_rank(self) -> np.ndarray:
        """full node id -> rank among interior nodes, -1 for boundary nodes."""
        r = np.full(self.n_nodes, -1, dtype=int)
        r[self.interior_ids] = np.arange(self.n_interior)
        return r

    # -- flattened state helpers ------------------------------------------

    def pack_interior(self, field: np.ndarray) -> np.ndarray:
        """(n_nodes, k) nodal field -> flat node-major vector on interior nodes."""
        return np.ascontiguousarray(field[self.interior_ids]).reshape(-1)

    def unpack_interior(self, x: np.ndarray, k: int, fill: float = 0.0) -> np.ndarray:
        """Flat interior vector -> (n_nodes, k) field, boundary set to ``fill``."""
        out = np.full((self.n_nodes, k), fill, dtype=float)
        out[self.interior_ids] = np.asarray(x, dtype=float).reshape(self.n_interior, k)
        return out

    def quad(self, nodal: np.ndarray) -> float:
        """Cell-volume-weighted sum of a nodal scalar array."""
        return float(self.cell_volume * np.sum(nodal))

    # -- boundary geometry -------------------------------------------------

    def boundary_sides(self, node: int) -> list[tuple[int, int]]:
        """Sides a boundary node lies on, as (axis, 0|1) for lower/upper."""
        out = []
        mi = self.multi_index[node]
        for a in range(self.d):
            if mi[a] == 0:
                out.append((a, 0))
            elif mi[a] == self.shape[a] - 1:
                out.append((a, 1))
        return out

    def inward_neighbors(self, node: int, axis: int, side: int, depth: int) -> list[int]:
        """Flat ids of the first ``depth`` nodes inward from a boundary node."""
        step = self.strides[axis] if side == 0 else -self.strides[axis]
        return [node + step * (k + 1) for k in range(depth)]
