"""Compressible viscous flow on the grid: fluxes, right-hand side, steady states.

The conserved fields phi = (e, rho, j) evolve by conservation laws
d(phi)/dt = -div(flux) with the classical constitutive closure: energy flux
(eps + rho u^2/2) u - sigma.u + kappa grad(beta), mass flux j, and stress
p I + rho u u - sigma, where sigma is the Newtonian viscous stress.  The
working variables on the grid are m = (beta, mu, u) per node, which make
the reservoir boundary conditions linear.

Discretely, advective (gradient-free) fluxes are evaluated at nodes and
differenced with skew-adjoint central stencils, while dissipative fluxes
use compact staggered forms: the heat flux lives on edges (finite-volume
style) and the viscous force is the exact gradient of a sampled dissipation
functional.  This pairing makes the linearized dynamics exactly compatible
with the noise quadrature at equilibrium, which downstream covariance
identities rely on.

Collocated central differences decouple odd and even sublattices, which
would leave grid-scale pressure modes almost undamped.  The advective
divergence therefore carries a fourth-difference stabilization, and the
pressure gradient carries its exact negative transpose: the pair stays
mutually adjoint (so the equilibrium covariance identities are untouched),
the added truncation error is O(dx^3), and no neutral mode survives.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Union

import numpy as np

from .eos import (
    ConvergenceError,
    DomainError,
    EquationOfState,
    ThermoTables,
    conjugate_fields,
    thermo_tables,
)
from .grid import Grid
from .operators import CornerSet, Operators, build_ops, sample_tensor_gradient
from .transport import TransportCoeffs

BETA, MU = 0, 1  # m-component indices; velocity components follow


# ---------------------------------------------------------------------------
# boundary conditions


@dataclass(frozen=True)
class Reservoir:
    beta: float
    mu: float

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("reservoir beta must be positive")


@dataclass(frozen=True)
class Insulated:
    pass


Side = tuple[int, int]  # (axis, 0 for lower / 1 for upper)
BoundaryCondition = Union[Reservoir, Insulated]


@dataclass(frozen=True)
class BoundarySpec:
    """One condition per face of the box; u = 0 on the whole boundary."""

    sides: Mapping[Side, BoundaryCondition]

    def validate(self, grid: Grid):
        expected = {(a, s) for a in range(grid.d) for s in (0, 1)}
        if set(self.sides.keys()) != expected:
            raise ValueError(f"boundary spec must cover exactly the sides {sorted(expected)}")
        if not any(isinstance(bc, Reservoir) for bc in self.sides.values()):
            raise ValueError("at least one side must be a reservoir")
        if grid.d == 2:
            for sx in (0, 1):
                for sy in (0, 1):
                    if isinstance(self.sides[(0, sx)], Insulated) and isinstance(
                        self.sides[(1, sy)], Insulated
                    ):
                        raise ValueError(
                            "corners joining two insulated sides are not supported"
                        )

    @staticmethod
    def uniform_reservoir(grid: Grid, beta: float, mu: float) -> "BoundarySpec":
        bc = Reservoir(beta=beta, mu=mu)
        return BoundarySpec({(a, s): bc for a in range(grid.d) for s in (0, 1)})


# ---------------------------------------------------------------------------
# pointwise constitutive closure


@dataclass(frozen=True)
class FluxTriple:
    """Pointwise flux (q, j, tau); tau is symmetric by construction."""

    q: np.ndarray
    j: np.ndarray
    tau: np.ndarray


def viscous_stress(u, grad_u, gamma1, gamma2, d: int):
    """sigma = gamma1 (Du - (2/d) div(u) I) + gamma2 div(u) I with Du the symmetrized gradient."""
    grad_u = np.asarray(grad_u, dtype=float)
    Du = grad_u + np.swapaxes(grad_u, -1, -2)
    divu = np.trace(grad_u, axis1=-2, axis2=-1)
    eye = np.eye(d)
    return (
        gamma1[..., None, None] * (Du - (2.0 / d) * divu[..., None, None] * eye)
        + gamma2[..., None, None] * divu[..., None, None] * eye
    )


def constitutive_flux(
    beta,
    mu,
    u,
    grad_beta,
    grad_u,
    tc: TransportCoeffs,
    eos: EquationOfState,
) -> FluxTriple:
    """Evaluate the flux triple at points with given fields and gradients.

    Shapes: scalars (...,), u and grad_beta (..., d), grad_u (..., d, d)
    with grad_u[..., k, l] = d(u_k)/dx_l.
    """
    beta = np.asarray(beta, dtype=float)
    mu = np.asarray(mu, dtype=float)
    u = np.asarray(u, dtype=float)
    d = u.shape[-1]
    tab = thermo_tables(eos, beta, mu)
    g1 = np.asarray(tc.gamma1(beta, mu), dtype=float)
    g2 = np.asarray(tc.gamma2(beta, mu), dtype=float)
    kap = np.asarray(tc.kappa(beta, mu), dtype=float)
    sigma = viscous_stress(u, grad_u, g1, g2, d)
    u2 = np.sum(u * u, axis=-1)
    rho = tab.rho0
    q = (
        (tab.eps + 0.5 * rho * u2)[..., None] * u
        - np.einsum("...kl,...l->...k", sigma, u)
        + kap[..., None] * np.asarray(grad_beta, dtype=float)
    )
    jf = rho[..., None] * u
    tau = (
        tab.p[..., None, None] * np.eye(d)
        + rho[..., None, None] * np.einsum("...k,...l->...kl", u, u)
        - sigma
    )
    return FluxTriple(q=q, j=jf, tau=tau)


# ---------------------------------------------------------------------------
# viscous dissipation kernels (shared with the noise assembly)


def _dev_projector(d: int) -> tuple[np.ndarray, np.ndarray]:
    """Constant d^2 x d^2 kernels: symmetric-traceless projector and trace outer product."""
    eye = np.eye(d)
    P_sym = np.zeros((d, d, d, d))
    T = np.zeros((d, d, d, d))
    for k in range(d):
        for l in range(d):
            for i in range(d):
                for j in range(d):
                    P_sym[k, l, i, j] = 0.5 * (eye[k, i] * eye[l, j] + eye[k, j] * eye[l, i])
                    T[k, l, i, j] = eye[k, l] * eye[i, j]
    P_dev = P_sym - T / d
    return P_dev.reshape(d * d, d * d), T.reshape(d * d, d * d)


def sampled_gradient_hessian(
    grid: Grid,
    corners: tuple[CornerSet, CornerSet],
    g1_nodal: np.ndarray,
    g2_nodal: np.ndarray,
) -> np.ndarray:
    """Hessian of Q(u) = (1/2) sum_pm sum_samples h^d [2 g1 |dev c_s|^2 + g2 (tr c)^2]

    where c are the one-sided tensor-gradient samples of u (averaged over the
    forward and backward families).  Returns a (d n) x (d n) matrix acting on
    flattened velocity fields; it is symmetric positive semidefinite for
    nonnegative coefficient fields.
    """
    d = grid.d
    n = grid.n_nodes
    hvol = grid.cell_volume
    P_dev, T = _dev_projector(d)
    H = np.zeros((d * n, d * n))
    for cs in corners:
        base = cs.base
        for k in range(d):
            for l in range(d):
                for i in range(d):
                    for j in range(d):
                        kern = (
                            2.0 * g1_nodal[base] * P_dev[k * d + l, i * d + j]
                            + g2_nodal[base] * T[k * d + l, i * d + j]
                        )
                        if not np.any(kern):
                            continue
                        w = 0.5 * hvol * kern / (grid.dx[l] * grid.dx[j])
                        rows_hi = cs.neighbors[:, l] * d + k
                        rows_lo = base * d + k
                        cols_hi = cs.neighbors[:, j] * d + i
                        cols_lo = base * d + i
                        np.add.at(H, (rows_hi, cols_hi), w)
                        np.add.at(H, (rows_hi, cols_lo), -w)
                        np.add.at(H, (rows_lo, cols_hi), -w)
                        np.add.at(H, (rows_lo, cols_lo), w)
    return H


# ---------------------------------------------------------------------------
# the discrete model


@dataclass
class SteadyState:
    """Converged stationary fields on the full node set."""

    grid: Grid
    m: np.ndarray  # (n, nu): beta, mu, u
    residual: float
    history: list[float]
    warnings: list[str] = field(default_factory=list)

    @property
    def beta(self) -> np.ndarray:
        return self.m[:, BETA]

    @property
    def mu(self) -> np.ndarray:
        return self.m[:, MU]

    @property
    def u(self) -> np.ndarray:
        return self.m[:, 2:]


class HydroModel:
    """Grid + EOS + transport + boundary conditions, with the discrete dynamics."""

    def __init__(
        self,
        grid: Grid,
        eos: EquationOfState,
        tc: TransportCoeffs,
        bc: BoundarySpec,
        stabilization: float = 1.0,
    ):
        bc.validate(grid)
        self.grid = grid
        self.eos = eos
        self.tc = tc
        self.bc = bc
        self.stabilization = float(stabilization)
        self.ops: Operators = build_ops(grid)
        self._classify_boundary()
        self._build_advective_ops()

    def _build_advective_ops(self):
        """Per-axis advective divergence and the adjoint pressure gradient.

        div_a  = central + c h^3 K^T K   (interior rows, full columns)
        grad_a = central - c h^3 K^T K
        with K the compact second difference on interior rows.  On interior
        columns grad_a = -div_a^T exactly.
        """
        grid = self.grid
        ids = grid.interior_ids
        self.adv_div = []
        self.adv_grad = []
        for a in range(grid.d):
            h = grid.dx[a]
            s = grid.strides[a]
            K = np.zeros((grid.n_interior, grid.n_nodes))
            r = np.arange(grid.n_interior)
            K[r, ids - s] += 1.0 / h**2
            K[r, ids] += -2.0 / h**2
            K[r, ids + s] += 1.0 / h**2
            D = self.stabilization * h**3 * (K[:, ids].T @ K)
            C = self.ops.central[a][ids]
            self.adv_div.append(C + D)
            self.adv_grad.append(C - D)

    # -- boundary bookkeeping ------------------------------------------------

    def _classify_boundary(self):
        grid = self.grid
        res_ids, res_beta, res_mu = [], [], []
        ins_ids, ins_in1, ins_in2 = [], [], []
        for node in grid.boundary_ids:
            sides = grid.boundary_sides(int(node))
            res_sides = [s for s in sides if isinstance(self.bc.sides[s], Reservoir)]
            if res_sides:
                b = np.mean([self.bc.sides[s].beta for s in res_sides])
                m = np.mean([self.bc.sides[s].mu for s in res_sides])
                res_ids.append(int(node))
                res_beta.append(float(b))
                res_mu.append(float(m))
            else:
                (axis, side) = sides[0]
                n1, n2 = grid.inward_neighbors(int(node), axis, side, 2)
                ins_ids.append(int(node))
                ins_in1.append(n1)
                ins_in2.append(n2)
        self.res_ids = np.array(res_ids, dtype=int)
        self.res_beta = np.array(res_beta)
        self.res_mu = np.array(res_mu)
        self.ins_ids = np.array(ins_ids, dtype=int)
        self.ins_in1 = np.array(ins_in1, dtype=int)
        self.ins_in2 = np.array(ins_in2, dtype=int)

    def extend(self, m_int: np.ndarray) -> np.ndarray:
        """Interior m-values -> full-node field with boundary conditions applied.

        Insulated nodes get second-order zero-normal-derivative closures for
        beta and mu; u vanishes on the whole boundary.
        """
        grid = self.grid
        m_all = np.zeros((grid.n_nodes, grid.nu))
        m_all[grid.interior_ids] = np.asarray(m_int, dtype=float).reshape(
            grid.n_interior, grid.nu
        )
        m_all[self.res_ids, BETA] = self.res_beta
        m_all[self.res_ids, MU] = self.res_mu
        if self.ins_ids.size:
            for c in (BETA, MU):
                m_all[self.ins_ids, c] = (
                    4.0 * m_all[self.ins_in1, c] - m_all[self.ins_in2, c]
                ) / 3.0
        return m_all

    # -- pointwise fields ------------------------------------------------------

    def tables(self, m_all: np.ndarray) -> ThermoTables:
        return thermo_tables(self.eos, m_all[:, BETA], m_all[:, MU])

    def transport_fields(self, m_all: np.ndarray):
        beta, mu = m_all[:, BETA], m_all[:, MU]
        kap = np.asarray(self.tc.kappa(beta, mu), dtype=float)
        g1 = np.asarray(self.tc.gamma1(beta, mu), dtype=float)
        g2 = np.asarray(self.tc.gamma2(beta, mu), dtype=float)
        return kap, g1, g2

    def phi_of_m(self, m_all: np.ndarray) -> np.ndarray:
        tab = self.tables(m_all)
        u = m_all[:, 2:]
        u2 = np.sum(u * u, axis=1)
        phi = np.empty_like(m_all)
        phi[:, 0] = tab.e0 + 0.5 * tab.rho0 * u2
        phi[:, 1] = tab.rho0
        phi[:, 2:] = tab.rho0[:, None] * u
        return phi

    def theta_of_m(self, m_all: np.ndarray) -> np.ndarray:
        beta, mu, u = m_all[:, BETA], m_all[:, MU], m_all[:, 2:]
        u2 = np.sum(u * u, axis=1)
        th = np.empty_like(m_all)
        th[:, 0] = beta
        th[:, 1] = beta * (-mu + 0.5 * u2)
        th[:, 2:] = -beta[:, None] * u
        return th

    def m_of_phi(self, phi: np.ndarray) -> np.ndarray:
        beta, mu, u = conjugate_fields(self.eos, phi[:, 0], phi[:, 1], phi[:, 2:])
        return np.column_stack([beta, mu, u])

    def _nodal_sigma(self, m_all: np.ndarray, g1, g2) -> np.ndarray:
        """Viscous stress at nodes from central-difference velocity gradients."""
        grid = self.grid
        u = m_all[:, 2:]
        grad_u = np.empty((grid.n_nodes, grid.d, grid.d))
        for l in range(grid.d):
            grad_u[:, :, l] = self.ops.central[l] @ u
        return viscous_stress(u, grad_u, g1, g2, grid.d)

    # -- right-hand side -------------------------------------------------------

    def rhs(self, m_all: np.ndarray) -> np.ndarray:
        """Time derivative of (e, rho, j) at interior nodes, shape (n_int, nu)."""
        grid = self.grid
        d = grid.d
        tab = self.tables(m_all)
        kap, g1, g2 = self.transport_fields(m_all)
        u = m_all[:, 2:]
        u2 = np.sum(u * u, axis=1)
        rho = tab.rho0

        q_adv = (tab.eps + 0.5 * rho * u2)[:, None] * u
        jf = rho[:, None] * u
        ram = rho[:, None, None] * np.einsum("nk,nl->nkl", u, u)
        flow = bool(np.any(u))
        if flow:
            sigma = self._nodal_sigma(m_all, g1, g2)
            q_heat = -np.einsum("nkl,nl->nk", sigma, u)

        out = np.zeros((grid.n_interior, grid.nu))
        Cint = self.ops.central_interior
        for a in range(d):
            out[:, 0] -= self.adv_div[a] @ q_adv[:, a]
            out[:, 1] -= self.adv_div[a] @ jf[:, a]
            if flow:
                out[:, 0] -= Cint[a] @ q_heat[:, a]
                for k in range(d):
                    out[:, 2 + k] -= Cint[a] @ ram[:, k, a]
        for k in range(d):
            out[:, 2 + k] -= self.adv_grad[k] @ tab.p

        # staggered heat conduction
        beta = m_all[:, BETA]
        for a in range(d):
            es = self.ops.edges[a]
            kap_e = 0.5 * (kap[es.lower] + kap[es.upper])
            gb = self.ops.edge_grad[a] @ beta
            out[:, 0] -= self.ops.fv_div[a] @ (kap_e * gb)

        # variational viscous force
        H = sampled_gradient_hessian(grid, self.ops.corners, g1, g2)
        force = -(H @ u.reshape(-1)).reshape(grid.n_nodes, d) / grid.cell_volume
        out[:, 2:] += force[grid.interior_ids]
        return out

    def rhs_from_phi(self, phi_int: np.ndarray) -> np.ndarray:
        """rhs as a function of the interior conserved fields (flattened or (n_int, nu))."""
        grid = self.grid
        phi_int = np.asarray(phi_int, dtype=float).reshape(grid.n_interior, grid.nu)
        m_int = self.m_of_phi(phi_int)
        return self.rhs(self.extend(m_int))

    # -- Jacobian in the m variables -------------------------------------------

    def _fold_extension(self, B: np.ndarray, comp: int) -> np.ndarray:
        """(n_int, n_nodes) block over full-node columns of one m component ->
        (n_int, n_int) block over interior unknowns, boundary closures folded in."""
        grid = self.grid
        out = B[:, grid.interior_ids].copy()
        if comp in (BETA, MU) and self.ins_ids.size:
            r1 = grid.interior_rank[self.ins_in1]
            r2 = grid.interior_rank[self.ins_in2]
            for b, q1, q2 in zip(self.ins_ids, r1, r2):
                out[:, q1] += (4.0 / 3.0) * B[:, b]
                out[:, q2] -= (1.0 / 3.0) * B[:, b]
        return out

    def jacobian_m(self, m_all: np.ndarray) -> np.ndarray:
        """Exact Jacobian of rhs with respect to the interior m unknowns."""
        grid = self.grid
        d, nu, NI, N = grid.d, grid.nu, grid.n_interior, grid.n_nodes
        tab = self.tables(m_all)
        kap, g1, g2 = self.transport_fields(m_all)
        u = m_all[:, 2:]
        u2 = np.sum(u * u, axis=1)
        rho = tab.rho0
        Cint = self.ops.central_interior

        # pointwise derivatives of the advective fluxes w.r.t. (beta, mu, u)
        Hent = tab.eps + 0.5 * rho * u2
        dH = [tab.eps_beta + 0.5 * u2 * tab.rho0_beta, tab.eps_mu + 0.5 * u2 * tab.rho0_mu]
        drho = [tab.rho0_beta, tab.rho0_mu]
        dp = [tab.p_beta, tab.p_mu]

        flow = bool(np.any(u))
        if flow:
            sigma = self._nodal_sigma(m_all, g1, g2)
            g1_b, g1_m = (fn(tab.beta, tab.mu) for fn in self.tc.d_gamma1())
            g2_b, g2_m = (fn(tab.beta, tab.mu) for fn in self.tc.d_gamma2())
            grad_u = np.empty((N, d, d))
            for l in range(d):
                grad_u[:, :, l] = self.ops.central[l] @ u
            Du = grad_u + np.swapaxes(grad_u, 1, 2)
            tr = np.trace(grad_u, axis1=1, axis2=2)

        J = np.zeros((NI, nu, NI, nu))

        def add_block(row: int, col: int, block: np.ndarray):
            J[:, row, :, col] += self._fold_extension(block, col)

        # advective divergences (stabilized) and the adjoint pressure gradient
        for a in range(d):
            Ba = self.adv_div[a]
            Ca = Cint[a]
            for ic in (0, 1):  # beta, mu columns
                add_block(0, ic, -Ba * (dH[ic] * u[:, a])[None, :])
                add_block(1, ic, -Ba * (drho[ic] * u[:, a])[None, :])
                if flow:
                    for k in range(d):
                        add_block(2 + k, ic, -Ca * (drho[ic] * u[:, k] * u[:, a])[None, :])
            for l in range(d):
                coef_q = Hent * (1.0 if l == a else 0.0) + rho * u[:, a] * u[:, l]
                add_block(0, 2 + l, -Ba * coef_q[None, :])
                add_block(1, 2 + l, -Ba * (rho * (1.0 if l == a else 0.0))[None, :])
                if flow:
                    for k in range(d):
                        coef_t = rho * (
                            u[:, a] * (1.0 if k == l else 0.0)
                            + u[:, k] * (1.0 if a == l else 0.0)
                        )
                        add_block(2 + k, 2 + l, -Ca * coef_t[None, :])
        for k in range(d):
            for ic in (0, 1):
                add_block(2 + k, ic, -self.adv_grad[k] * dp[ic][None, :])

        # viscous heating -(sigma.u): only present on flowing backgrounds
        if flow:
            g2eff = g2 - (2.0 / d) * g1
            for a in range(d):
                Ca = Cint[a]
                # through the pointwise u factor and the nodal sigma operator
                for l in range(d):
                    add_block(0, 2 + l, Ca * sigma[:, a, l][None, :])
                for k in range(d):
                    Mk = np.zeros((N, N))
                    for l in range(d):
                        block = np.zeros((N, N))
                        if a == k:
                            block += g1[:, None] * self.ops.central[l]
                        if l == k:
                            block += g1[:, None] * self.ops.central[a]
                        if a == l:
                            block += g2eff[:, None] * self.ops.central[k]
                        Mk += u[:, l][:, None] * block
                    add_block(0, 2 + k, Ca @ Mk)
                # through the coefficient fields
                base = Du[:, a, :] - (2.0 / d) * tr[:, None] * np.eye(d)[a]
                sig_b = g1_b[:, None] * base + g2_b[:, None] * tr[:, None] * np.eye(d)[a]
                sig_m = g1_m[:, None] * base + g2_m[:, None] * tr[:, None] * np.eye(d)[a]
                add_block(0, BETA, Ca * np.einsum("nl,nl->n", u, sig_b)[None, :])
                add_block(0, MU, Ca * np.einsum("nl,nl->n", u, sig_m)[None, :])

        # staggered heat conduction
        beta = m_all[:, BETA]
        k_b, k_m = (fn(tab.beta, tab.mu) for fn in self.tc.d_kappa())
        for a in range(d):
            es = self.ops.edges[a]
            Ga = self.ops.edge_grad[a]
            Aa = self.ops.edge_avg[a]
            Da = self.ops.fv_div[a]
            kap_e = 0.5 * (kap[es.lower] + kap[es.upper])
            gb = Ga @ beta
            add_block(0, BETA, -(Da @ (kap_e[:, None] * Ga)) - (Da @ (gb[:, None] * (Aa * k_b[None, :]))))
            add_block(0, MU, -(Da @ (gb[:, None] * (Aa * k_m[None, :]))))

        # variational viscous force
        Hvisc = sampled_gradient_hessian(grid, self.ops.corners, g1, g2)
        Hvisc = Hvisc.reshape(N, d, N, d)
        ids = grid.interior_ids
        for k in range(d):
            for l in range(d):
                add_block(2 + k, 2 + l, -Hvisc[ids, k, :, l] / grid.cell_volume)
        if flow:
            dF_b, dF_m = self._viscous_coefficient_jacobian(u, g1_b, g1_m, g2_b, g2_m)
            for k in range(d):
                add_block(2 + k, BETA, dF_b[ids, k, :])
                add_block(2 + k, MU, dF_m[ids, k, :])

        return J.reshape(NI * nu, NI * nu)

    def _viscous_coefficient_jacobian(self, u, g1_b, g1_m, g2_b, g2_m):
        """d(viscous force)/d(beta, mu) through the coefficient fields (flowing states only)."""
        grid = self.grid
        d, N = grid.d, grid.n_nodes
        out_b = np.zeros((N, d, N))
        out_m = np.zeros((N, d, N))
        for cs in self.ops.corners:
            c = sample_tensor_gradient(grid, cs, u)
            c_s = 0.5 * (c + np.swapaxes(c, 1, 2))
            trc = np.trace(c, axis1=1, axis2=2)
            dev = c_s - trc[:, None, None] * np.eye(d) / d
            base = cs.base
            for k in range(d):
                for l in range(d):
                    for coeff_b, coeff_m, tens in (
                        (g1_b[base], g1_m[base], 2.0 * dev[:, k, l]),
                        (g2_b[base], g2_m[base], trc * (1.0 if k == l else 0.0)),
                    ):
                        wb = 0.5 * coeff_b * tens / grid.dx[l]
                        wm = 0.5 * coeff_m * tens / grid.dx[l]
                        hi = cs.neighbors[:, l]
                        np.add.at(out_b, (hi, k, base), -wb * cs.sign)
                        np.add.at(out_b, (base, k, base), wb * cs.sign)
                        np.add.at(out_m, (hi, k, base), -wm * cs.sign)
                        np.add.at(out_m, (base, k, base), wm * cs.sign)
        return out_b, out_m

    # -- steady states ----------------------------------------------------------

    def harmonic_guess(self) -> np.ndarray:
        """Initial scalar profiles: discrete-harmonic interpolation of reservoir data."""
        grid = self.grid
        N = grid.n_nodes
        lap = self.ops.laplacian
        m0 = np.zeros((N, grid.nu))
        for c, vals in ((BETA, self.res_beta), (MU, self.res_mu)):
            A = np.zeros((N, N))
            b = np.zeros(N)
            A[grid.interior_ids] = lap[grid.interior_ids]
            for node, v in zip(self.res_ids, vals):
                A[node, node] = 1.0
                b[node] = v
            for node, n1, n2 in zip(self.ins_ids, self.ins_in1, self.ins_in2):
                A[node, node] = 3.0
                A[node, n1] = -4.0
                A[node, n2] = 1.0
            m0[:, c] = np.linalg.solve(A, b)
        return m0

    def reservoir_pressure_spread(self) -> float:
        tabs = thermo_tables(self.eos, self.res_beta, self.res_mu)
        p = np.atleast_1d(tabs.p)
        return float(np.max(p) - np.min(p))

    def steady_solve(
        self,
        tol: float = 1e-10,
        max_iter: int = 50,
        initial: np.ndarray | None = None,
    ) -> SteadyState:
        """Damped Newton iteration for rhs(m) = 0 in max norm."""
        grid = self.grid
        self.tc.validate_on(self.res_beta, self.res_mu, grid.d)
        warnings: list[str] = []
        spread = self.reservoir_pressure_spread()
        if spread > 1e-8:
            warnings.append(
                f"reservoir pressures differ by {spread:.3e}; no smooth zero-velocity "
                "steady state exists for mismatched pressures"
            )
        m_all = self.harmonic_guess() if initial is None else np.array(initial, dtype=float)
        m_int = m_all[grid.interior_ids].reshape(-1)
        history: list[float] = []
        res_vec = self.rhs(self.extend(m_int.reshape(grid.n_interior, grid.nu)))
        res = float(np.max(np.abs(res_vec)))
        history.append(res)
        for _ in range(max_iter):
            if res <= tol:
                break
            J = self.jacobian_m(self.extend(m_int.reshape(grid.n_interior, grid.nu)))
            step = np.linalg.solve(J, res_vec.reshape(-1))
            lam = 1.0
            while lam >= 1e-8:
                cand = m_int - lam * step
                try:
                    cand_res_vec = self.rhs(self.extend(cand.reshape(grid.n_interior, grid.nu)))
                except (DomainError, ConvergenceError):
                    lam *= 0.5
                    continue
                cand_res = float(np.max(np.abs(cand_res_vec)))
                if cand_res < res or cand_res <= tol:
                    break
                lam *= 0.5
            else:
                raise ConvergenceError(
                    f"steady Newton stalled at residual {res:.3e}; history {history}"
                )
            m_int, res_vec, res = cand, cand_res_vec, cand_res
            history.append(res)
        if res > tol:
            raise ConvergenceError(
                f"steady Newton did not reach tol {tol:.1e}: residual {res:.3e}, history {history}"
            )
        m_all = self.extend(m_int.reshape(grid.n_interior, grid.nu))
        self.tc.validate_on(m_all[:, BETA], m_all[:, MU], grid.d)
        return SteadyState(grid=grid, m=m_all, residual=res, history=history, warnings=warnings)


# ---------------------------------------------------------------------------
# analytic equilibrium operators (central-stencil realization)
#
# About a uniform rest state, the adjoint of the linearized dynamics acting
# on test triples F = (f, g, h) is
#
#   (-kappa Lap f - eps/beta div h,
#    -rho/beta div h,
#    -eps/beta grad f - rho/beta grad g
#      - gamma1/beta div(Dh - (2/d) div(h) I) - gamma2/beta grad div h)
#
# and the companion operator on conjugate-variable perturbations
# t = (t1, t2, t3) is
#
#   (eps/beta div t3 - kappa Lap t1,
#    rho/beta div t3,
#    eps/beta grad t1 + rho/beta grad t2
#      - gamma1/beta div(D t3 - (2/d) div(t3) I) - gamma2/beta grad div t3).
#
# Both are realized here purely by composing the nodal central-difference
# matrices, zeroing boundary values between compositions; that keeps the two
# operators exactly dual to each other on fields vanishing at the boundary
# and independent of the staggered discretization used by the flow pipeline
# (the two routes agree to second order in the spacing).


@dataclass(frozen=True)
class EquilibriumParams:
    beta: float
    mu: float
    rho: float
    eps: float
    kappa: float
    gamma1: float
    gamma2: float

    @staticmethod
    def from_state(eos: EquationOfState, tc: TransportCoeffs, beta: float, mu: float):
        tab = thermo_tables(eos, np.asarray([beta]), np.asarray([mu]))
        return EquilibriumParams(
            beta=beta,
            mu=mu,
            rho=float(tab.rho0[0]),
            eps=float(tab.eps[0]),
            kappa=float(tc.kappa(np.asarray([beta]), np.asarray([mu]))[0]),
            gamma1=float(tc.gamma1(np.asarray([beta]), np.asarray([mu]))[0]),
            gamma2=float(tc.gamma2(np.asarray([beta]), np.asarray([mu]))[0]),
        )


def _interior_projected(ops: Operators, w: np.ndarray) -> np.ndarray:
    out = w.copy()
    out[ops.grid.boundary_ids] = 0.0
    return out


def _central_viscous(ops: Operators, pars: EquilibriumParams, v: np.ndarray) -> np.ndarray:
    """div(D v - (2/d) div(v) I) scaled by gamma1 plus gamma2 grad div v, central stencils."""
    d = v.shape[1]
    C = ops.central
    P = lambda w: _interior_projected(ops, w)
    divv = P(sum(C[l] @ v[:, l] for l in range(d)))
    out = np.zeros_like(v)
    for k in range(d):
        acc = np.zeros(v.shape[0])
        for l in range(d):
            acc += C[l] @ P(C[l] @ v[:, k] + C[k] @ v[:, l])
        out[:, k] = pars.gamma1 * (acc - (2.0 / d) * (C[k] @ divv)) + pars.gamma2 * (C[k] @ divv)
    return out


def adjoint_generator_equilibrium(
    ops: Operators, pars: EquilibriumParams, F: np.ndarray
) -> np.ndarray:
    """Analytic equilibrium adjoint applied to a test triple F = (f, g, h), (n, nu)."""
    grid = ops.grid
    d = grid.d
    C = ops.central
    f, g, h = F[:, 0], F[:, 1], F[:, 2:]
    binv = 1.0 / pars.beta
    divh = sum(C[l] @ h[:, l] for l in range(d))
    lap_f = sum(C[l] @ _interior_projected(ops, C[l] @ f) for l in range(d))
    out = np.zeros_like(F)
    out[:, 0] = -pars.kappa * lap_f - binv * pars.eps * divh
    out[:, 1] = -binv * pars.rho * divh
    visc = _central_viscous(ops, pars, h)
    for k in range(d):
        out[:, 2 + k] = -binv * (pars.eps * (C[k] @ f) + pars.rho * (C[k] @ g) + visc[:, k])
    return out


def theta_generator_equilibrium(
    ops: Operators, pars: EquilibriumParams, t: np.ndarray
) -> np.ndarray:
    """Analytic equilibrium generator on conjugate-variable perturbations, (n, nu)."""
    grid = ops.grid
    d = grid.d
    C = ops.central
    t1, t2, t3 = t[:, 0], t[:, 1], t[:, 2:]
    binv = 1.0 / pars.beta
    divt3 = sum(C[l] @ t3[:, l] for l in range(d))
    lap_t1 = sum(C[l] @ _interior_projected(ops, C[l] @ t1) for l in range(d))
    out = np.zeros_like(t)
    out[:, 0] = binv * pars.eps * divt3 - pars.kappa * lap_t1
    out[:, 1] = binv * pars.rho * divt3
    visc = _central_viscous(ops, pars, t3)
    for k in range(d):
        out[:, 2 + k] = binv * (pars.eps * (C[k] @ t1) + pars.rho * (C[k] @ t2) - visc[:, k])
    return out
