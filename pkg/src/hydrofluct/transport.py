"""Transport coefficients as functions of (beta, mu).

kappa is the thermal conductivity (multiplying grad beta in the heat flux),
gamma1 the shear viscosity (traceless rate-of-strain channel) and gamma2
the bulk viscosity (dilatation channel).  Coefficients are user-supplied
callables; the power-law factory covers the shipped defaults.  Derivative
callables may be given in closed form, otherwise central differences with
step 1e-6 are used.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

CoeffFn = Callable[[np.ndarray, np.ndarray], np.ndarray]

_FD_STEP = 1e-6


def _fd(fn: CoeffFn, arg: int) -> CoeffFn:
    def deriv(beta, mu):
        beta = np.asarray(beta, dtype=float)
        mu = np.asarray(mu, dtype=float)
        if arg == 0:
            return (fn(beta + _FD_STEP, mu) - fn(beta - _FD_STEP, mu)) / (2 * _FD_STEP)
        return (fn(beta, mu + _FD_STEP) - fn(beta, mu - _FD_STEP)) / (2 * _FD_STEP)

    return deriv


@dataclass(frozen=True)
class TransportCoeffs:
    kappa: CoeffFn
    gamma1: CoeffFn
    gamma2: CoeffFn
    kappa_beta: CoeffFn | None = None
    kappa_mu: CoeffFn | None = None
    gamma1_beta: CoeffFn | None = None
    gamma1_mu: CoeffFn | None = None
    gamma2_beta: CoeffFn | None = None
    gamma2_mu: CoeffFn | None = None

    def d_kappa(self):
        return (
            self.kappa_beta or _fd(self.kappa, 0),
            self.kappa_mu or _fd(self.kappa, 1),
        )

    def d_gamma1(self):
        return (
            self.gamma1_beta or _fd(self.gamma1, 0),
            self.gamma1_mu or _fd(self.gamma1, 1),
        )

    def d_gamma2(self):
        return (
            self.gamma2_beta or _fd(self.gamma2, 0),
            self.gamma2_mu or _fd(self.gamma2, 1),
        )

    def validate_on(self, beta, mu, d: int):
        """Positivity of the coefficients on the states actually visited.

        gamma1 never enters the d=1 equations (the traceless channel is
        empty there), so it may be zero in one dimension.
        """
        k = np.asarray(self.kappa(beta, mu))
        g1 = np.asarray(self.gamma1(beta, mu))
        g2 = np.asarray(self.gamma2(beta, mu))
        if np.any(k <= 0):
            raise ValueError("kappa must be positive on the visited states")
        if np.any(g2 <= 0):
            raise ValueError("gamma2 must be positive on the visited states")
        if d >= 2 and np.any(g1 <= 0):
            raise ValueError("gamma1 must be positive on the visited states for d >= 2")
        if d == 1 and np.any(g1 < 0):
            raise ValueError("gamma1 must be nonnegative")


def power_law_transport(
    kappa0: float = 0.5,
    kappa_exponent: float = 1.0,
    gamma1: float = 0.0,
    gamma2: float = 0.5,
) -> TransportCoeffs:
    """kappa = kappa0 * beta**a with constant viscosities; closed-form derivatives."""
    if kappa0 <= 0:
        raise ValueError("kappa0 must be positive")
    a = float(kappa_exponent)

    def k(beta, mu):
        return kappa0 * np.asarray(beta, dtype=float) ** a

    def k_b(beta, mu):
        beta = np.asarray(beta, dtype=float)
        return np.zeros_like(beta) if a == 0.0 else kappa0 * a * beta ** (a - 1.0)

    def const(value):
        def fn(beta, mu):
            return np.full_like(np.asarray(beta, dtype=float), value)

        return fn

    zero = const(0.0)
    return TransportCoeffs(
        kappa=k,
        gamma1=const(gamma1),
        gamma2=const(gamma2),
        kappa_beta=k_b,
        kappa_mu=zero,
        gamma1_beta=zero,
        gamma1_mu=zero,
        gamma2_beta=zero,
        gamma2_mu=zero,
    )
