"""Local noise bilinear form and the state-space noise covariance.

The stochastic part of the integrated flux is white in space and time; its
intensity on flux-space test triples G = (a, b, c) is

    Gamma(G, G') = 2 <a, kappa a'> + <c1, gamma1/beta c1'>
                   + 2 <c2, (gamma2 - 2 gamma1/d)/beta c2'>

with c1 = c + c^T and c2 = tr c; the mass channel b carries no noise.  The
same form in diagonalized shape is 4/beta [gamma1 <dev c_s, dev c_s'>
+ gamma2/2 (tr c)(tr c')] plus the conductivity term, which is how the
quadratures below evaluate it (the kernel-contraction route in
``gamma_from_pointwise`` serves as the independent oracle).

The state-space matrix Sigma realizes Gamma(grad F, grad F') through the
same staggered samples used by the dissipative terms of the flow model, so
the equilibrium fluctuation-dissipation identity holds exactly at the
matrix level.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Grid
from .model import HydroModel, SteadyState, sampled_gradient_hessian
from .operators import sample_tensor_gradient


@dataclass(frozen=True)
class CoefficientFields:
    """Nodal coefficient fields entering the noise form."""

    beta: np.ndarray
    kappa: np.ndarray
    gamma1: np.ndarray
    gamma2: np.ndarray

    @staticmethod
    def from_steady(model: HydroModel, steady: SteadyState) -> "CoefficientFields":
        kap, g1, g2 = model.transport_fields(steady.m)
        return CoefficientFields(beta=steady.beta.copy(), kappa=kap, gamma1=g1, gamma2=g2)

    @staticmethod
    def uniform(grid: Grid, beta: float, kappa: float, gamma1: float, gamma2: float):
        n = grid.n_nodes
        return CoefficientFields(
            beta=np.full(n, beta),
            kappa=np.full(n, kappa),
            gamma1=np.full(n, gamma1),
            gamma2=np.full(n, gamma2),
        )


@dataclass(frozen=True)
class NodeFluxField:
    """Flux-space test triple sampled at nodes: a, b are (n, d); c is (n, d, d)."""

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray


@dataclass(frozen=True)
class StaggeredFluxField:
    """Flux-space triple in the staggered sampling of the flow discretization.

    a and b carry one array per axis (values on that axis's edges); the
    tensor channel carries forward/backward corner samples, weighted half
    each in quadratures.
    """

    a: tuple[np.ndarray, ...]
    b: tuple[np.ndarray, ...]
    c_plus: np.ndarray
    c_minus: np.ndarray


def flux_gradient_samples(model: HydroModel, F: np.ndarray) -> StaggeredFluxField:
    """Sample grad F = (grad f, grad g, grad h) for a test triple F (n, nu)."""
    grid = model.grid
    f, g, h = F[:, 0], F[:, 1], F[:, 2:]
    a = tuple(model.ops.edge_grad[ax] @ f for ax in range(grid.d))
    b = tuple(model.ops.edge_grad[ax] @ g for ax in range(grid.d))
    cp, cm = model.ops.corners
    return StaggeredFluxField(
        a=a,
        b=b,
        c_plus=sample_tensor_gradient(grid, cp, h),
        c_minus=sample_tensor_gradient(grid, cm, h),
    )


def _c_pair_density(c, cprime, beta, gamma1, gamma2, d: int):
    """4/beta [gamma1 <dev c_s, dev c'_s> + gamma2/2 (tr c)(tr c')] per sample."""
    cs = 0.5 * (c + np.swapaxes(c, -1, -2))
    cps = 0.5 * (cprime + np.swapaxes(cprime, -1, -2))
    trc = np.trace(c, axis1=-2, axis2=-1)
    trcp = np.trace(cprime, axis1=-2, axis2=-1)
    dev = cs - trc[..., None, None] * np.eye(d) / d
    devp = cps - trcp[..., None, None] * np.eye(d) / d
    return (4.0 / beta) * (
        gamma1 * np.einsum("...kl,...kl->...", dev, devp) + 0.5 * gamma2 * trc * trcp
    )


def gamma_form(
    G,
    Gprime,
    coeff: CoefficientFields,
    model: HydroModel,
) -> float:
    """Quadrature of the noise bilinear form on two flux-space test triples."""
    grid = model.grid
    hvol = grid.cell_volume
    if isinstance(G, NodeFluxField) and isinstance(Gprime, NodeFluxField):
        val = 2.0 * np.sum(coeff.kappa[:, None] * G.a * Gprime.a)
        val += np.sum(
            _c_pair_density(G.c, Gprime.c, coeff.beta, coeff.gamma1, coeff.gamma2, grid.d)
        )
        return hvol * float(val)
    if isinstance(G, StaggeredFluxField) and isinstance(Gprime, StaggeredFluxField):
        val = 0.0
        for ax in range(grid.d):
            es = model.ops.edges[ax]
            kap_e = 0.5 * (coeff.kappa[es.lower] + coeff.kappa[es.upper])
            val += 2.0 * np.sum(kap_e * G.a[ax] * Gprime.a[ax])
        for cpair, cs in ((G.c_plus, 0), (G.c_minus, 1)):
            corner = model.ops.corners[cs]
            other = (Gprime.c_plus, Gprime.c_minus)[cs]
            val += 0.5 * np.sum(
                _c_pair_density(
                    cpair,
                    other,
                    coeff.beta[corner.base],
                    coeff.gamma1[corner.base],
                    coeff.gamma2[corner.base],
                    grid.d,
                )
            )
        return hvol * float(val)
    raise TypeError("both arguments must share the same sampling kind")


def _pointwise_kernel(beta, gamma1, gamma2, d: int) -> np.ndarray:
    """Delta-correlation kernel of the stress channel, shape (..., d, d, d, d).

    K[i, l, j, m] couples c_il with c'_jm:
    (2/beta) [gamma1 (d_ij d_lm + d_im d_jl - (2/d) d_il d_jm) + gamma2 d_il d_jm].
    """
    eye = np.eye(d)
    iso = np.einsum("ij,lm->iljm", eye, eye)
    swap = np.einsum("im,jl->iljm", eye, eye)
    trace = np.einsum("il,jm->iljm", eye, eye)
    g1 = np.asarray(gamma1)[..., None, None, None, None]
    g2 = np.asarray(gamma2)[..., None, None, None, None]
    b = np.asarray(beta)[..., None, None, None, None]
    return (2.0 / b) * (g1 * (iso + swap - (2.0 / d) * trace) + g2 * trace)


def gamma_from_pointwise(
    G,
    Gprime,
    coeff: CoefficientFields,
    model: HydroModel,
) -> float:
    """Independent assembly of the same form by contracting the local kernels."""
    grid = model.grid
    hvol = grid.cell_volume
    d = grid.d
    if isinstance(G, NodeFluxField) and isinstance(Gprime, NodeFluxField):
        val = 2.0 * np.einsum("n,nk,nk->", coeff.kappa, G.a, Gprime.a)
        K = _pointwise_kernel(coeff.beta, coeff.gamma1, coeff.gamma2, d)
        val += np.einsum("nil,niljm,njm->", G.c, K, Gprime.c)
        return hvol * float(val)
    if isinstance(G, StaggeredFluxField) and isinstance(Gprime, StaggeredFluxField):
        val = 0.0
        for ax in range(d):
            es = model.ops.edges[ax]
            kap_e = 0.5 * (coeff.kappa[es.lower] + coeff.kappa[es.upper])
            val += 2.0 * np.einsum("n,n,n->", kap_e, G.a[ax], Gprime.a[ax])
        for cpair, cs in ((G.c_plus, 0), (G.c_minus, 1)):
            corner = model.ops.corners[cs]
            other = (Gprime.c_plus, Gprime.c_minus)[cs]
            K = _pointwise_kernel(
                coeff.beta[corner.base],
                coeff.gamma1[corner.base],
                coeff.gamma2[corner.base],
                d,
            )
            val += 0.5 * np.einsum("nil,niljm,njm->", cpair, K, other)
        return hvol * float(val)
    raise TypeError("both arguments must share the same sampling kind")


# ---------------------------------------------------------------------------
# state-space noise covariance


class PsdViolation(RuntimeError):
    pass


@dataclass
class NoiseCovariance:
    """Noise intensity Sigma of the fluctuation SDE on interior unknowns.

    The pairing of a state vector with a test vector carries one factor of
    the cell volume each, so the bilinear form reproducing the flux-space
    quadrature is h^(2d) F^T Sigma F'.  B satisfies B B^T = Sigma.
    """

    grid: Grid
    Sigma: np.ndarray
    B: np.ndarray

    @property
    def n(self) -> int:
        return self.Sigma.shape[0]

    def bilinear(self, F_int: np.ndarray, Fp_int: np.ndarray) -> float:
        w = self.grid.cell_volume ** 2
        return float(w * (np.asarray(F_int) @ self.Sigma @ np.asarray(Fp_int)))


def noise_matrix(
    model: HydroModel,
    steady: SteadyState,
    psd_tol: float = 1e-12,
) -> NoiseCovariance:
    """Assemble Sigma so that its bilinear form equals Gamma(grad F, grad F')."""
    grid = model.grid
    d, nu, NI = grid.d, grid.nu, grid.n_interior
    ids = grid.interior_ids
    coeff = CoefficientFields.from_steady(model, steady)
    hvol = grid.cell_volume

    M = np.zeros((NI, nu, NI, nu))
    for ax in range(d):
        es = model.ops.edges[ax]
        kap_e = 0.5 * (coeff.kappa[es.lower] + coeff.kappa[es.upper])
        Gax = model.ops.edge_grad[ax][:, ids]
        M[:, 0, :, 0] += 2.0 * hvol * (Gax.T @ (kap_e[:, None] * Gax))
    Hg = sampled_gradient_hessian(
        grid,
        model.ops.corners,
        2.0 * coeff.gamma1 / coeff.beta,
        2.0 * coeff.gamma2 / coeff.beta,
    ).reshape(grid.n_nodes, d, grid.n_nodes, d)
    M[:, 2:, :, 2:] += Hg[np.ix_(ids, range(d), ids, range(d))]
    M = M.reshape(NI * nu, NI * nu)

    Sigma = M / hvol**2
    Sigma = 0.5 * (Sigma + Sigma.T)
    evals, evecs = np.linalg.eigh(Sigma)
    scale = max(float(evals[-1]), 1.0)
    if evals[0] < -psd_tol * scale:
        raise PsdViolation(
            f"noise covariance has eigenvalue {evals[0]:.3e} below -{psd_tol:.0e} x scale"
        )
    pos = evals > psd_tol * scale
    B = evecs[:, pos] * np.sqrt(evals[pos])
    return NoiseCovariance(grid=grid, Sigma=Sigma, B=B)


def sample_increment(B: np.ndarray, dt: float, rng: np.random.Generator) -> np.ndarray:
    """One Gaussian noise increment sqrt(dt) B z with z standard normal."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    z = rng.standard_normal(B.shape[1])
    return np.sqrt(dt) * (B @ z)
