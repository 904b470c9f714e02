"""Linearized evolution generator about a steady state, and its spectral gates.

The generator L acts on interior perturbations of the conserved fields
(flattened node-major); perturbations obey homogeneous boundary conditions:
zero beta/mu at reservoir nodes, zero velocity on the whole boundary, and
zero normal derivative of the scalars at insulated nodes.  The dual under
the cell-volume inner product is the plain transpose because the quadrature
weights are uniform.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg

from .eos import entropy_hessian_fields
from .grid import Grid
from .model import HydroModel, SteadyState


@dataclass
class GeneratorMatrix:
    """Dense generator on interior unknowns together with grid metadata."""

    grid: Grid
    L: np.ndarray

    @property
    def n(self) -> int:
        return self.L.shape[0]

    @property
    def Lstar(self) -> np.ndarray:
        """Dual generator under the uniform-weight grid inner product."""
        return self.L.T

    @cached_property
    def eig(self):
        return scipy.linalg.eig(self.L)

    @cached_property
    def spectral_abscissa(self) -> float:
        return float(np.max(self.eig[0].real))


def interior_block_transform(J: np.ndarray, blocks: np.ndarray) -> np.ndarray:
    """Right-multiply J by a block-diagonal matrix of per-node nu x nu blocks."""
    n_nodes, nu, _ = blocks.shape
    out = np.empty_like(J)
    for r in range(n_nodes):
        cols = slice(r * nu, (r + 1) * nu)
        out[:, cols] = J[:, cols] @ blocks[r]
    return out


def state_jacobian_blocks(model: HydroModel, steady: SteadyState) -> np.ndarray:
    """d(phi)/d(m) per interior node, shape (n_int, nu, nu)."""
    grid = model.grid
    ids = grid.interior_ids
    tab = model.tables(steady.m)
    u = steady.u
    u2 = np.sum(u * u, axis=1)
    d = grid.d
    T = np.zeros((grid.n_nodes, grid.nu, grid.nu))
    T[:, 0, 0] = tab.e0_beta + 0.5 * u2 * tab.rho0_beta
    T[:, 0, 1] = tab.e0_mu + 0.5 * u2 * tab.rho0_mu
    T[:, 1, 0] = tab.rho0_beta
    T[:, 1, 1] = tab.rho0_mu
    for k in range(d):
        T[:, 0, 2 + k] = tab.rho0 * u[:, k]
        T[:, 2 + k, 0] = u[:, k] * tab.rho0_beta
        T[:, 2 + k, 1] = u[:, k] * tab.rho0_mu
        T[:, 2 + k, 2 + k] = tab.rho0
    return T[ids]


def conjugate_jacobian_blocks(model: HydroModel, steady: SteadyState) -> np.ndarray:
    """d(theta)/d(m) per interior node, shape (n_int, nu, nu)."""
    grid = model.grid
    ids = grid.interior_ids
    beta, mu, u = steady.beta, steady.mu, steady.u
    u2 = np.sum(u * u, axis=1)
    d = grid.d
    S = np.zeros((grid.n_nodes, grid.nu, grid.nu))
    S[:, 0, 0] = 1.0
    S[:, 1, 0] = -mu + 0.5 * u2
    S[:, 1, 1] = -beta
    for k in range(d):
        S[:, 1, 2 + k] = beta * u[:, k]
        S[:, 2 + k, 0] = -u[:, k]
        S[:, 2 + k, 2 + k] = -beta
    return S[ids]


def local_covariance_blocks(model: HydroModel, steady: SteadyState) -> np.ndarray:
    """Pointwise thermodynamic covariance -s''(phi)^(-1) at interior nodes."""
    grid = model.grid
    ids = grid.interior_ids
    phi = model.phi_of_m(steady.m)
    H = entropy_hessian_fields(model.eos, phi[:, 0], phi[:, 1], phi[:, 2:])[ids]
    P = -np.linalg.inv(H)
    return 0.5 * (P + np.swapaxes(P, 1, 2))


def linearize(model: HydroModel, steady: SteadyState) -> GeneratorMatrix:
    """Assemble L = d(rhs)/d(phi_interior) analytically at the steady state."""
    J = model.jacobian_m(steady.m)
    T = state_jacobian_blocks(model, steady)
    L = interior_block_transform(J, np.linalg.inv(T))
    return GeneratorMatrix(grid=model.grid, L=L)


def theta_generator(model: HydroModel, steady: SteadyState) -> np.ndarray:
    """Generator acting on conjugate-variable perturbations: d(rhs)/d(theta)."""
    J = model.jacobian_m(steady.m)
    S = conjugate_jacobian_blocks(model, steady)
    return interior_block_transform(J, np.linalg.inv(S))


@dataclass(frozen=True)
class DissipativityReport:
    n: int
    spectral_abscissa: float
    ok: bool
    tol: float

    def as_dict(self) -> dict:
        return {
            "n": self.n,
            "spectral_abscissa": self.spectral_abscissa,
            "ok": bool(self.ok),
            "tol": self.tol,
        }


def dissipativity_check(gen: GeneratorMatrix | np.ndarray, tol: float = 1e-10) -> DissipativityReport:
    """PASS iff every eigenvalue of L has real part below -tol."""
    L = gen.L if isinstance(gen, GeneratorMatrix) else np.asarray(gen)
    eigvals = scipy.linalg.eigvals(L)
    abscissa = float(np.max(eigvals.real))
    return DissipativityReport(
        n=L.shape[0], spectral_abscissa=abscissa, ok=abscissa < -tol, tol=tol
    )


def semigroup_apply(L: np.ndarray, t: float, v: np.ndarray) -> np.ndarray:
    """exp(t L) v by scaling-and-squaring."""
    if t < 0:
        raise ValueError("the semigroup is defined for t >= 0 only")
    if t == 0:
        return np.array(v, dtype=float)
    return scipy.linalg.expm(t * L) @ np.asarray(v, dtype=float)
