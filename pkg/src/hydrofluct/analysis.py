"""Fluctuation-dissipation diagnostics and the long-range correlation probe.

At equilibrium the stationary covariance is purely local: pairings against
test vectors with disjoint supports vanish and coincident pairings reduce
to the pointwise thermodynamic covariance.  Away from equilibrium the
covariance generically develops correlations at macroscopic separation;
these are detected with a dictionary of compactly supported polynomial
bump test vectors, normalized by the geometric mean of the coincident
variances.  Two closed-form sufficient conditions for the effect are also
evaluated directly on the steady fields: a nonzero drift velocity, or a
nonzero divergence of (mu kappa_mu / beta - kappa_beta) grad beta.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .generator import local_covariance_blocks
from .grid import Grid
from .model import HydroModel, SteadyState
from .process import CovarianceMatrix

COMPONENT_NAMES = {"e": 0, "rho": 1, "j1": 2, "j2": 3}


def component_index(grid: Grid, name: str) -> int:
    idx = COMPONENT_NAMES.get(name)
    if idx is None or idx >= grid.nu:
        raise ValueError(f"unknown component {name!r} for d={grid.d}")
    return idx


def bump_profile(grid: Grid, center: np.ndarray, width: float) -> np.ndarray:
    """Smooth compact bump prod_a max(0, 1 - ((x_a - c_a)/w)^2)^3 at all nodes."""
    x = grid.coords
    prof = np.ones(grid.n_nodes)
    for a in range(grid.d):
        r = (x[:, a] - center[a]) / width
        prof *= np.clip(1.0 - r * r, 0.0, None) ** 3
    return prof


def bump_test_vector(grid: Grid, center, width: float, comp: int) -> np.ndarray:
    """Interior-flattened test vector carrying one bump in one component."""
    center = np.atleast_1d(np.asarray(center, dtype=float))
    prof = bump_profile(grid, center, width)
    if np.any(prof[grid.boundary_ids] != 0.0):
        raise ValueError("bump support touches the boundary; shrink width or move center")
    F = np.zeros((grid.n_nodes, grid.nu))
    F[:, comp] = prof
    return grid.pack_interior(F)


def local_form(
    blocks: np.ndarray, grid: Grid, F_int: np.ndarray, Fp_int: np.ndarray
) -> float:
    """<F, Pi(.) F'> with the pointwise covariance blocks at interior nodes."""
    nu = grid.nu
    a = np.asarray(F_int).reshape(grid.n_interior, nu)
    b = np.asarray(Fp_int).reshape(grid.n_interior, nu)
    return float(grid.cell_volume * np.einsum("ni,nij,nj->", a, blocks, b))


def _bump_centers(grid: Grid, width: float, spacing_cells: int) -> np.ndarray:
    """Bump centers kept clear of the boundary by the support width."""
    margins = []
    for a in range(grid.d):
        h = grid.dx[a]
        lo = int(np.ceil(width / h)) + 1
        hi = grid.shape[a] - 1 - lo
        if hi < lo:
            raise ValueError("grid too small for the requested bump width")
        margins.append(np.arange(lo, hi + 1, spacing_cells))
    mesh = np.meshgrid(*margins, indexing="ij")
    idx = np.stack([m.reshape(-1) for m in mesh], axis=1)
    return idx * np.asarray(grid.dx)


@dataclass
class FdtResidualMap:
    centers: np.ndarray  # (n_centers, d)
    width: float
    residual: np.ndarray  # (n_centers, n_centers, nu, nu) normalized
    norm_scale: float
    max_separated: float
    min_separation: float


def fdt_residual(
    W: CovarianceMatrix,
    model: HydroModel,
    steady: SteadyState,
    bump_width: float | None = None,
    spacing_cells: int = 2,
    min_separation_cells: float = 4.0,
) -> FdtResidualMap:
    """Deviation of W from the pointwise thermodynamic covariance.

    Evaluates W(F, F') - <F, Pi(.) F'> on bump test vectors over a grid of
    centers and all component pairs, normalized by the largest coincident
    local form; reports the maximum over pairs separated by more than
    ``min_separation_cells`` grid cells.
    """
    grid = model.grid
    width = bump_width if bump_width is not None else 3.0 * max(grid.dx)
    blocks = local_covariance_blocks(model, steady)
    centers = _bump_centers(grid, width, spacing_cells)
    nc = len(centers)
    nu = grid.nu
    vecs = np.empty((nc, nu, grid.n_interior * nu))
    for i, c in enumerate(centers):
        for comp in range(nu):
            vecs[i, comp] = bump_test_vector(grid, c, width, comp)
    scale = max(
        abs(local_form(blocks, grid, vecs[i, comp], vecs[i, comp]))
        for i in range(nc)
        for comp in range(nu)
    )
    res = np.empty((nc, nc, nu, nu))
    for i in range(nc):
        for j in range(nc):
            for ci in range(nu):
                for cj in range(nu):
                    wij = W.bilinear(vecs[i, ci], vecs[j, cj])
                    lij = local_form(blocks, grid, vecs[i, ci], vecs[j, cj])
                    res[i, j, ci, cj] = (wij - lij) / scale
    sep = np.linalg.norm(centers[:, None, :] - centers[None, :, :], axis=2)
    min_sep = min_separation_cells * max(grid.dx)
    mask = sep > min_sep
    max_sep = float(np.max(np.abs(res[mask]))) if np.any(mask) else 0.0
    return FdtResidualMap(
        centers=centers,
        width=width,
        residual=res,
        norm_scale=scale,
        max_separated=max_sep,
        min_separation=min_sep,
    )


@dataclass
class CorrelationProfile:
    """Normalized two-point correlation versus bump separation."""

    separations: np.ndarray
    values: np.ndarray
    reference: np.ndarray
    component_pair: tuple[str, str]
    bump_width: float
    long_range_score: float
    score_min_separation: float

    def rows(self):
        for r, v, ref in zip(self.separations, self.values, self.reference):
            yield float(r), float(v), float(ref)


def long_range_profile(
    W: CovarianceMatrix,
    model: HydroModel,
    steady: SteadyState,
    component_pair: tuple[str, str] = ("e", "e"),
    bump_width: float | None = None,
    min_separation_widths: float = 4.0,
) -> CorrelationProfile:
    """Correlation of two bumps as a function of separation along the first axis.

    The reference curve is the purely local prediction (zero once the bump
    supports separate).  The long-range score is the maximum normalized
    excess at separations beyond ``min_separation_widths`` bump widths.
    """
    grid = model.grid
    width = bump_width if bump_width is not None else 3.0 * max(grid.dx)
    blocks = local_covariance_blocks(model, steady)
    ci = component_index(grid, component_pair[0])
    cj = component_index(grid, component_pair[1])
    h0 = grid.dx[0]
    lo = int(np.ceil(width / h0)) + 1
    hi = grid.shape[0] - 1 - lo
    if hi <= lo:
        raise ValueError("grid too small for the requested bump width")
    mid = np.zeros(grid.d)
    for a in range(1, grid.d):
        mid[a] = 0.5
    c0 = mid.copy()
    c0[0] = lo * h0
    F0 = bump_test_vector(grid, c0, width, ci)
    w00 = W.bilinear(F0, F0)
    seps, vals, refs = [], [], []
    for k in range(lo, hi + 1):
        c1 = mid.copy()
        c1[0] = k * h0
        F1 = bump_test_vector(grid, c1, width, cj)
        w11 = W.bilinear(F1, F1)
        norm = np.sqrt(abs(w00 * w11)) + 1e-300
        seps.append(c1[0] - c0[0])
        vals.append(W.bilinear(F0, F1) / norm)
        refs.append(local_form(blocks, grid, F0, F1) / norm)
    seps = np.asarray(seps)
    vals = np.asarray(vals)
    refs = np.asarray(refs)
    cut = min_separation_widths * width
    mask = seps > cut
    score = float(np.max(np.abs(vals - refs)[mask])) if np.any(mask) else 0.0
    return CorrelationProfile(
        separations=seps,
        values=vals,
        reference=refs,
        component_pair=component_pair,
        bump_width=width,
        long_range_score=score,
        score_min_separation=cut,
    )


@dataclass
class LongRangeConditionReport:
    """Closed-form sufficient conditions for long-range correlations."""

    u_max: float
    kappa_drive_residual: float
    tol: float
    flagged: bool
    long_range_score: float | None = None

    def as_dict(self) -> dict:
        return {
            "u_max": self.u_max,
            "kappa_drive_residual": self.kappa_drive_residual,
            "tol": self.tol,
            "flagged": bool(self.flagged),
            "long_range_score": self.long_range_score,
        }


def long_range_conditions(
    model: HydroModel, steady: SteadyState, tol: float = 1e-8
) -> LongRangeConditionReport:
    """Evaluate the drift condition and div((mu kappa_mu/beta - kappa_beta) grad beta)."""
    grid = model.grid
    beta, mu = steady.beta, steady.mu
    k_b, k_m = (fn(beta, mu) for fn in model.tc.d_kappa())
    gfield = mu * np.asarray(k_m) / beta - np.asarray(k_b)
    resid = np.zeros(grid.n_interior)
    for a in range(grid.d):
        es = model.ops.edges[a]
        g_e = 0.5 * (gfield[es.lower] + gfield[es.upper])
        gb = model.ops.edge_grad[a] @ beta
        resid += model.ops.fv_div[a] @ (g_e * gb)
    u_max = float(np.max(np.abs(steady.u)))
    drive = float(np.max(np.abs(resid)))
    return LongRangeConditionReport(
        u_max=u_max,
        kappa_drive_residual=drive,
        tol=tol,
        flagged=bool(u_max > tol or drive > tol),
    )
