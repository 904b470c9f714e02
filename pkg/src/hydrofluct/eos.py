"""Equation of state, entropy functions and their Legendre-dual structure.

The conserved state per point is phi = (e, rho, j_1..j_d): energy density,
mass density and momentum density in the lab frame.  The rest-frame entropy
density s0(e0, rho0) generates everything else:

* s(phi) = s0(e - j^2/(2 rho), rho)   (Galilei-invariant lab entropy),
* theta = s'(phi) = beta (1, -mu + u^2/2, -u) with u = j/rho,
* the dual potential pi(theta) = sup_phi [s(phi) - theta.phi] = beta p.

All quantities are in macroscopic O(1) units; Boltzmann's constant never
appears.  Equations of state are pluggable through ``EquationOfState``; the
shipped default is a smooth, strictly concave single-phase ideal-gas form.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np


class DomainError(ValueError):
    """State outside the admissible thermodynamic domain."""


class ConvergenceError(RuntimeError):
    """An iterative inversion failed to reach its residual target."""


class EquationOfState(ABC):
    """Rest-frame entropy density s0(e0, rho0) and its derivatives.

    Implementations must be smooth and strictly concave on e0 > 0, rho0 > 0.
    All methods accept and return numpy-broadcastable arrays.
    """

    @abstractmethod
    def entropy(self, e0, rho0):
        ...

    @abstractmethod
    def entropy_grad(self, e0, rho0):
        """Returns (ds0/de0, ds0/drho0)."""

    @abstractmethod
    def entropy_hess(self, e0, rho0):
        """Returns the second derivatives (s_ee, s_er, s_rr)."""

    def rest_from_conjugate(self, beta, mu):
        """Invert (beta, mu) -> (e0, rho0) by 2-d Newton.

        Subclasses with a closed-form inverse should override this.
        """
        beta = np.asarray(beta, dtype=float)
        mu = np.asarray(mu, dtype=float)
        e0 = np.ones_like(beta * mu)
        r0 = np.ones_like(e0)
        target_e = beta
        target_r = -beta * mu
        for _ in range(60):
            se, sr = self.entropy_grad(e0, r0)
            fe = se - target_e
            fr = sr - target_r
            if max(np.max(np.abs(fe)), np.max(np.abs(fr))) < 1e-13:
                break
            a, b, c = self.entropy_hess(e0, r0)
            det = a * c - b * b
            de = (c * fe - b * fr) / det
            dr = (-b * fe + a * fr) / det
            step = 1.0
            while np.any(e0 - step * de <= 0) or np.any(r0 - step * dr <= 0):
                step *= 0.5
                if step < 1e-12:
                    raise ConvergenceError("rest-state inversion stalled at the domain boundary")
            e0 = e0 - step * de
            r0 = r0 - step * dr
        else:
            raise ConvergenceError("rest-state inversion did not converge")
        return e0, r0

    def check_domain(self, e0, rho0):
        if np.any(np.asarray(e0) <= 0) or np.any(np.asarray(rho0) <= 0):
            raise DomainError("need e0 > 0 and rho0 > 0")


@dataclass(frozen=True)
class IdealGasEos(EquationOfState):
    """Default EOS: s0 = rho0 (cv ln(e0/rho0) - ln rho0) + s_ref rho0.

    Strictly concave for cv > 0 and single-phase everywhere, with the
    closed forms beta = cv rho0 / e0 and p = rho0 / beta.
    """

    cv: float = 1.5
    s_ref: float = 0.0

    def __post_init__(self):
        if self.cv <= 0:
            raise DomainError("cv must be positive")

    def entropy(self, e0, rho0):
        self.check_domain(e0, rho0)
        return rho0 * (self.cv * np.log(e0 / rho0) - np.log(rho0)) + self.s_ref * rho0

    def entropy_grad(self, e0, rho0):
        self.check_domain(e0, rho0)
        se = self.cv * rho0 / e0
        sr = self.cv * np.log(e0 / rho0) - self.cv - np.log(rho0) - 1.0 + self.s_ref
        return se, sr

    def entropy_hess(self, e0, rho0):
        self.check_domain(e0, rho0)
        a = -self.cv * rho0 / e0**2
        b = self.cv / e0 * np.ones_like(rho0 * e0)
        c = -(self.cv + 1.0) / rho0 * np.ones_like(rho0 * e0)
        return a, b, c

    def rest_from_conjugate(self, beta, mu):
        beta = np.asarray(beta, dtype=float)
        if np.any(beta <= 0):
            raise DomainError("beta must be positive")
        ln_r0 = self.cv * np.log(self.cv / beta) - self.cv - 1.0 + self.s_ref + beta * mu
        r0 = np.exp(ln_r0)
        e0 = self.cv * r0 / beta
        return e0, r0


# ---------------------------------------------------------------------------
# typed point states


@dataclass(frozen=True)
class RestState:
    e0: float
    rho0: float

    def __post_init__(self):
        if not (self.e0 > 0 and self.rho0 > 0):
            raise DomainError(f"invalid rest state (e0={self.e0}, rho0={self.rho0})")


@dataclass(frozen=True)
class LocalState:
    """Lab-frame conserved state (e, rho, j)."""

    e: float
    rho: float
    j: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "j", np.atleast_1d(np.asarray(self.j, dtype=float)))
        if not self.rho > 0:
            raise DomainError(f"rho must be positive, got {self.rho}")
        if not self.rest_energy > 0:
            raise DomainError("rest-frame energy e - j^2/(2 rho) must be positive")

    @property
    def d(self) -> int:
        return self.j.size

    @property
    def u(self) -> np.ndarray:
        return self.j / self.rho

    @property
    def rest_energy(self) -> float:
        return self.e - 0.5 * float(self.j @ self.j) / self.rho

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate(([self.e, self.rho], self.j))

    @staticmethod
    def from_vector(phi: np.ndarray) -> "LocalState":
        phi = np.asarray(phi, dtype=float)
        return LocalState(e=float(phi[0]), rho=float(phi[1]), j=phi[2:].copy())


@dataclass(frozen=True)
class ConjugatePoint:
    """Entropy gradient theta = beta (1, -mu + u^2/2, -u)."""

    theta: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "theta", np.asarray(self.theta, dtype=float))
        if not self.theta[0] > 0:
            raise DomainError("first component (beta) must be positive")

    @property
    def beta(self) -> float:
        return float(self.theta[0])

    @property
    def u(self) -> np.ndarray:
        return -self.theta[2:] / self.beta

    @property
    def mu(self) -> float:
        u2 = float(self.u @ self.u)
        return 0.5 * u2 - float(self.theta[1]) / self.beta


# ---------------------------------------------------------------------------
# entropy-side operations


def entropy_rest(rs: RestState, eos: EquationOfState) -> float:
    return float(eos.entropy(rs.e0, rs.rho0))


def entropy_lab(phi: LocalState, eos: EquationOfState) -> float:
    return float(eos.entropy(phi.rest_energy, phi.rho))


def conjugate(phi: LocalState, eos: EquationOfState) -> ConjugatePoint:
    """theta = s'(phi), evaluated through the rest-frame gradient."""
    e0 = phi.rest_energy
    se, sr = eos.entropy_grad(e0, phi.rho)
    beta = float(se)
    u = phi.u
    theta = np.concatenate(([beta, float(sr) + 0.5 * beta * float(u @ u)], -beta * u))
    return ConjugatePoint(theta=theta)


def entropy_hessian(phi: LocalState, eos: EquationOfState) -> np.ndarray:
    """Full nu x nu Hessian of the lab entropy s(e, rho, j)."""
    e0 = phi.rest_energy
    rho = phi.rho
    u = phi.u
    u2 = float(u @ u)
    a, b, c = (float(v) for v in eos.entropy_hess(e0, rho))
    beta = float(eos.entropy_grad(e0, rho)[0])
    d = phi.d
    H = np.empty((d + 2, d + 2))
    H[0, 0] = a
    H[0, 1] = H[1, 0] = a * u2 / 2 + b
    H[1, 1] = a * u2**2 / 4 + b * u2 + c - beta * u2 / rho
    for k in range(d):
        H[0, 2 + k] = H[2 + k, 0] = -a * u[k]
        H[1, 2 + k] = H[2 + k, 1] = -u[k] * (a * u2 / 2 + b) + beta * u[k] / rho
        for l in range(d):
            H[2 + k, 2 + l] = a * u[k] * u[l] - (beta / rho) * (1.0 if k == l else 0.0)
    return H


# ---------------------------------------------------------------------------
# dual-side operations


def state_from_conjugate(
    theta: ConjugatePoint,
    eos: EquationOfState,
    tol: float = 1e-13,
    max_iter: int = 50,
) -> LocalState:
    """Invert s'(phi) = theta by damped Newton iteration.

    The velocity part of the map is inverted exactly to build the initial
    guess; for the default EOS the guess is already the solution and the
    loop terminates immediately, which keeps the output bitwise
    reproducible.
    """
    th = theta.theta
    beta = theta.beta
    u = theta.u
    e0, r0 = eos.rest_from_conjugate(beta, theta.mu)
    phi = np.concatenate(
        ([float(e0) + 0.5 * float(r0) * float(u @ u), float(r0)], float(r0) * u)
    )
    scale = max(1.0, float(np.max(np.abs(th))))
    last_res = np.inf
    for _ in range(max_iter):
        state = LocalState.from_vector(phi)
        res = conjugate(state, eos).theta - th
        last_res = float(np.max(np.abs(res)))
        if last_res <= tol * scale:
            return state
        H = entropy_hessian(state, eos)
        step = np.linalg.solve(H, res)
        lam = 1.0
        while lam > 1e-12:
            cand = phi - lam * step
            rho_c = cand[1]
            e0_c = cand[0] - 0.5 * float(cand[2:] @ cand[2:]) / rho_c if rho_c > 0 else -1.0
            if rho_c > 0 and e0_c > 0:
                break
            lam *= 0.5
        phi = phi - lam * step
    raise ConvergenceError(
        f"conjugate inversion did not converge (residual {last_res:.3e}, target {tol * scale:.3e})"
    )


def pressure(theta: ConjugatePoint, eos: EquationOfState) -> float:
    """p = s0/beta - e0 + mu rho0 at the rest state recovered from theta."""
    beta, mu = theta.beta, theta.mu
    e0, r0 = eos.rest_from_conjugate(beta, mu)
    s0 = eos.entropy(e0, r0)
    return float(s0 / beta - e0 + mu * r0)


def enthalpy(theta: ConjugatePoint, eos: EquationOfState) -> float:
    """Heat function eps = e0 + p."""
    beta, mu = theta.beta, theta.mu
    e0, _ = eos.rest_from_conjugate(beta, mu)
    return float(e0) + pressure(theta, eos)


def pressure_potential(theta: ConjugatePoint, eos: EquationOfState) -> float:
    """Legendre dual of the entropy: pi(theta) = s(phi*) - theta.phi*."""
    phi = state_from_conjugate(theta, eos)
    return entropy_lab(phi, eos) - float(theta.theta @ phi.vector)


def pressure_potential_hessian(theta: ConjugatePoint, eos: EquationOfState) -> np.ndarray:
    """pi''(theta) = -s''(phi*)^{-1}, symmetrized after inversion."""
    phi = state_from_conjugate(theta, eos)
    H = entropy_hessian(phi, eos)
    P = -np.linalg.inv(H)
    return 0.5 * (P + P.T)


# ---------------------------------------------------------------------------
# vectorized field kernels used by the grid pipeline


@dataclass(frozen=True)
class ThermoTables:
    """Pointwise thermodynamic state and (beta, mu)-derivatives on a set of nodes."""

    beta: np.ndarray
    mu: np.ndarray
    e0: np.ndarray
    rho0: np.ndarray
    p: np.ndarray
    eps: np.ndarray
    e0_beta: np.ndarray
    e0_mu: np.ndarray
    rho0_beta: np.ndarray
    rho0_mu: np.ndarray
    p_beta: np.ndarray
    p_mu: np.ndarray
    eps_beta: np.ndarray
    eps_mu: np.ndarray


def thermo_tables(eos: EquationOfState, beta: np.ndarray, mu: np.ndarray) -> ThermoTables:
    beta = np.asarray(beta, dtype=float)
    mu = np.asarray(mu, dtype=float)
    if np.any(beta <= 0):
        raise DomainError("beta must be positive everywhere")
    e0, r0 = eos.rest_from_conjugate(beta, mu)
    s0 = eos.entropy(e0, r0)
    p = s0 / beta - e0 + mu * r0
    eps = e0 + p
    a, b, c = eos.entropy_hess(e0, r0)
    det = a * c - b * b
    e0_beta = (c + b * mu) / det
    e0_mu = b * beta / det
    rho0_beta = -(b + a * mu) / det
    rho0_mu = -a * beta / det
    p_beta = -(eps - r0 * mu) / beta
    p_mu = r0.copy() if isinstance(r0, np.ndarray) else r0
    return ThermoTables(
        beta=beta,
        mu=mu,
        e0=e0,
        rho0=r0,
        p=p,
        eps=eps,
        e0_beta=e0_beta,
        e0_mu=e0_mu,
        rho0_beta=rho0_beta,
        rho0_mu=rho0_mu,
        p_beta=p_beta,
        p_mu=p_mu,
        eps_beta=e0_beta + p_beta,
        eps_mu=e0_mu + p_mu,
    )


def conjugate_fields(eos: EquationOfState, e, rho, j):
    """Vectorized phi -> (beta, mu, u) on nodal arrays; j has shape (n, d)."""
    e = np.asarray(e, dtype=float)
    rho = np.asarray(rho, dtype=float)
    j = np.asarray(j, dtype=float)
    if np.any(rho <= 0):
        raise DomainError("rho must be positive everywhere")
    u = j / rho[:, None]
    e0 = e - 0.5 * np.sum(j * j, axis=1) / rho
    if np.any(e0 <= 0):
        bad = int(np.argmin(e0))
        raise DomainError(f"nonpositive rest energy at node {bad}")
    se, sr = eos.entropy_grad(e0, rho)
    beta = se
    mu = -sr / beta
    return beta, mu, u


def entropy_hessian_fields(eos: EquationOfState, e, rho, j) -> np.ndarray:
    """Vectorized lab-entropy Hessians, shape (n, nu, nu)."""
    e = np.asarray(e, dtype=float)
    rho = np.asarray(rho, dtype=float)
    j = np.asarray(j, dtype=float)
    n, d = j.shape
    u = j / rho[:, None]
    u2 = np.sum(u * u, axis=1)
    e0 = e - 0.5 * np.sum(j * j, axis=1) / rho
    a, b, c = eos.entropy_hess(e0, rho)
    beta = eos.entropy_grad(e0, rho)[0]
    H = np.zeros((n, d + 2, d + 2))
    H[:, 0, 0] = a
    H[:, 0, 1] = H[:, 1, 0] = a * u2 / 2 + b
    H[:, 1, 1] = a * u2**2 / 4 + b * u2 + c - beta * u2 / rho
    for k in range(d):
        H[:, 0, 2 + k] = H[:, 2 + k, 0] = -a * u[:, k]
        H[:, 1, 2 + k] = H[:, 2 + k, 1] = -u[:, k] * (a * u2 / 2 + b) + beta * u[:, k] / rho
        for l in range(d):
            H[:, 2 + k, 2 + l] += a * u[:, k] * u[:, l]
        H[:, 2 + k, 2 + k] += -beta / rho
    return H
