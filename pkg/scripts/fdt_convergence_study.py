#!/usr/bin/env python3
"""Grid-refinement study of the discrete fluctuation-dissipation structure.

Reports, for a sequence of 1-d grids at equilibrium:
  * the exact matrix identity defect of the noise covariance against the
    symmetrized conjugate-variable generator (should sit at rounding level),
  * the gap between the assembled adjoint and its analytic central-stencil
    form on smooth test triples (second order in the spacing),
  * the separated-pair locality residual of the stationary covariance.

Usage: python scripts/fdt_convergence_study.py [--grids 16 32 64 128]
"""

import argparse
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from hydrofluct.analysis import fdt_residual
from hydrofluct.config import mu_for_pressure
from hydrofluct.eos import IdealGasEos
from hydrofluct.generator import linearize, local_covariance_blocks, theta_generator
from hydrofluct.grid import Grid
from hydrofluct.model import (
    BoundarySpec,
    EquilibriumParams,
    HydroModel,
    adjoint_generator_equilibrium,
)
from hydrofluct.noise import noise_matrix
from hydrofluct.process import OuSystem, stationary_covariance_lyapunov
from hydrofluct.transport import power_law_transport


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--grids", type=int, nargs="+", default=[16, 32, 64, 128])
    args = ap.parse_args()

    eos = IdealGasEos(1.5, 0.0)
    tc = power_law_transport(kappa0=0.5, kappa_exponent=1.0, gamma1=0.0, gamma2=0.2)
    mu = mu_for_pressure(eos, 1.0, 1.0)
    print(f"{'N':>5} {'matrix identity':>16} {'adjoint gap':>12} {'separated pairs':>16}")
    prev = None
    for n in args.grids:
        grid = Grid((n,))
        model = HydroModel(grid, eos, tc, BoundarySpec.uniform_reservoir(grid, 1.0, mu))
        steady = model.steady_solve()
        nc = noise_matrix(model, steady)
        lam = theta_generator(model, steady)
        hvol = grid.cell_volume
        ident = np.max(np.abs(lam + lam.T - hvol * nc.Sigma)) / np.max(np.abs(hvol * nc.Sigma))
        gen = linearize(model, steady)
        Pi = local_covariance_blocks(model, steady)
        PiB = np.zeros((gen.n, gen.n))
        nu = grid.nu
        for r in range(grid.n_interior):
            PiB[r * nu : (r + 1) * nu, r * nu : (r + 1) * nu] = Pi[r]
        adj_disc = -PiB @ gen.L.T
        pars = EquilibriumParams.from_state(eos, tc, 1.0, mu)
        x = grid.coords[:, 0]
        env = (x * (1 - x)) ** 4 * 256.0
        F = np.zeros((grid.n_nodes, grid.nu))
        for c in range(grid.nu):
            F[:, c] = env * np.sin((c + 1) * np.pi * x)
        out_a = adjoint_generator_equilibrium(model.ops, pars, F)
        out_d = grid.unpack_interior(adj_disc @ grid.pack_interior(F), grid.nu)
        bulk = (x > 0.1) & (x < 0.9)
        gap = np.linalg.norm((out_d - out_a)[bulk]) / np.linalg.norm(out_a[bulk])
        sys_ = OuSystem.build(grid, gen, nc)
        W = stationary_covariance_lyapunov(sys_)
        sep = fdt_residual(W, model, steady).max_separated
        note = "" if prev is None else f"  (gap ratio {prev / gap:.2f})"
        print(f"{n:>5} {ident:>16.2e} {gap:>12.3e} {sep:>16.2e}{note}")
        prev = gap


if __name__ == "__main__":
    main()
