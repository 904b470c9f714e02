"""Configuration-driven pipeline: steady -> covariance -> simulate -> analyze.

Stages communicate only through files in the output directory, so each verb
is independently rerunnable.  Exit codes: 0 success, 2 validation error,
3 solver failure, 4 gate failure.  Failures emit a single JSON line on
standard error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import fdt_residual, long_range_conditions, long_range_profile
from .config import ConfigError, RunConfig
from .eos import ConvergenceError
from .generator import dissipativity_check, linearize
from .io import (
    config_hash,
    dump_json,
    load_matrix_bin,
    save_matrix_bin,
    save_matrix_csv,
    save_table_csv,
    update_manifest,
)
from .model import HydroModel, SteadyState
from .noise import PsdViolation, noise_matrix
from .process import (
    CovarianceMatrix,
    GateError,
    OuSystem,
    SolverError,
    conditional_mean_regression,
    markov_gaussian_checks,
    simulate,
    stationary_covariance_integral,
    stationary_covariance_lyapunov,
)

EXIT_VALIDATION = 2
EXIT_SOLVER = 3
EXIT_GATE = 4

_CSV_MATRIX_LIMIT = 600  # write .csv twins only below this size


class MissingArtifact(RuntimeError):
    pass


def _matrix_exports(out: Path, stem: str, M: np.ndarray, name: str):
    save_matrix_bin(out / f"{stem}.bin", M)
    if M.shape[0] <= _CSV_MATRIX_LIMIT:
        save_matrix_csv(out / f"{stem}.csv", M, name)


def _field_columns(model: HydroModel, steady: SteadyState) -> dict:
    grid = model.grid
    cols = {"node": np.arange(grid.n_nodes).astype(float)}
    for a in range(grid.d):
        cols["xy"[a]] = grid.coords[:, a]
    phi = model.phi_of_m(steady.m)
    theta = model.theta_of_m(steady.m)
    names = ["e", "rho"] + [f"j{k+1}" for k in range(grid.d)]
    cols["beta"] = steady.beta
    cols["mu"] = steady.mu
    for k in range(grid.d):
        cols[f"u{k+1}"] = steady.u[:, k]
    for c, nm in enumerate(names):
        cols[nm] = phi[:, c]
    for c in range(grid.nu):
        cols[f"theta{c+1}"] = theta[:, c]
    return cols


class Pipeline:
    def __init__(self, cfg: RunConfig, out: Path, seed: int | None, route: str, inline: bool):
        self.cfg = cfg
        self.out = out
        self.route = route
        self.inline = inline
        resolved = {k: v for k, v in cfg.resolved.items()}
        if seed is not None:
            proc = dict(resolved["process"])
            proc["seed"] = int(seed)
            resolved["process"] = proc
        self.resolved = resolved
        self.seed = int(resolved["process"]["seed"])
        self.base = {
            "config_sha256": config_hash(resolved),
            "package_version": __version__,
            "seed": self.seed,
        }
        self.model: HydroModel | None = None
        self.steady: SteadyState | None = None
        self.W: CovarianceMatrix | None = None

    # -- steady ---------------------------------------------------------------

    def run_steady(self):
        out = self.out
        out.mkdir(parents=True, exist_ok=True)
        model = self.cfg.model()
        opts = self.cfg.steady_opts
        steady = model.steady_solve(tol=opts["tol"], max_iter=opts["max_iter"])
        gen = linearize(model, steady)
        gate = dissipativity_check(gen)
        save_matrix_bin(out / "steady_m.bin", steady.m)
        save_table_csv(out / "steady_fields.csv", _field_columns(model, steady))
        dump_json(
            out / "steady_solve.json",
            {
                "residual": steady.residual,
                "history": steady.history,
                "warnings": steady.warnings,
            },
        )
        dump_json(out / "dissipativity.json", gate.as_dict())
        _matrix_exports(out, "generator", gen.L, "linearized generator")
        update_manifest(
            out,
            self.base,
            "steady",
            {
                "residual": steady.residual,
                "iterations": len(steady.history) - 1,
                "dissipativity": gate.as_dict(),
            },
        )
        print(
            f"steady: residual {steady.residual:.3e} "
            f"({len(steady.history) - 1} Newton steps), "
            f"dissipativity {'PASS' if gate.ok else 'FAIL'} "
            f"(abscissa {gate.spectral_abscissa:.3e})"
        )
        self.model, self.steady = model, steady
        if not gate.ok:
            raise GateError(
                f"dissipativity gate failed: spectral abscissa {gate.spectral_abscissa:.3e}"
            )

    def need_steady(self):
        if self.steady is not None:
            return
        path = self.out / "steady_m.bin"
        if not path.exists():
            if self.inline:
                self.run_steady()
                return
            raise MissingArtifact(
                f"steady artifact {path} not found; run the steady stage first or pass --inline"
            )
        self.model = self.cfg.model()
        m = load_matrix_bin(path)
        grid = self.model.grid
        if m.shape != (grid.n_nodes, grid.nu):
            raise ConfigError(
                f"steady artifact shape {m.shape} does not match the configured grid"
            )
        self.steady = SteadyState(grid=grid, m=m, residual=float("nan"), history=[])

    # -- covariance -------------------------------------------------------------

    def run_covariance(self):
        self.need_steady()
        out = self.out
        model, steady = self.model, self.steady
        gen = linearize(model, steady)
        noise = noise_matrix(model, steady)
        sys_ = OuSystem.build(model.grid, gen, noise)
        report: dict = {"route": self.route, "gate": sys_.gate.as_dict()}
        W = None
        if self.route in ("lyapunov", "both"):
            W = stationary_covariance_lyapunov(sys_)
            report["lyapunov_residual"] = W.lyapunov_residual
            _matrix_exports(out, "W_lyapunov", W.W, "stationary covariance (algebraic route)")
        if self.route in ("integral", "both"):
            Wi, irep = stationary_covariance_integral(sys_)
            report["integral"] = {
                "horizon": irep.horizon,
                "quadrature_error": irep.quadrature_error,
                "tail_bound": irep.tail_bound,
                "doublings": irep.doublings,
            }
            _matrix_exports(out, "W_integral", Wi.W, "stationary covariance (semigroup route)")
            if W is not None:
                report["route_difference"] = float(
                    np.linalg.norm(Wi.W - W.W) / np.linalg.norm(W.W)
                )
            else:
                W = Wi
        _matrix_exports(out, "sigma", noise.Sigma, "noise covariance")
        _matrix_exports(out, "noise_factor", noise.B, "noise covariance factor")
        fdt = fdt_residual(W, model, steady)
        report["fdt_separated_residual"] = fdt.max_separated
        dump_json(out / "covariance_report.json", report)
        update_manifest(out, self.base, "covariance", report)
        msg = f"covariance: separated-pair fdt residual {fdt.max_separated:.3e}"
        if "route_difference" in report:
            msg += f", route difference {report['route_difference']:.3e}"
        print(msg)
        self.W = W

    def need_covariance(self):
        if self.W is not None:
            return
        path = self.out / "W_lyapunov.bin"
        if not path.exists():
            path = self.out / "W_integral.bin"
        if not path.exists():
            if self.inline:
                self.run_covariance()
                return
            raise MissingArtifact(
                "no covariance artifact found; run the covariance stage first or pass --inline"
            )
        self.need_steady()
        self.W = CovarianceMatrix(grid=self.model.grid, W=load_matrix_bin(path))

    # -- simulate ---------------------------------------------------------------

    def run_simulate(self, save_trajectories: bool = False):
        self.need_steady()
        self.need_covariance()
        out = self.out
        model, steady = self.model, self.steady
        gen = linearize(model, steady)
        noise = noise_matrix(model, steady)
        sys_ = OuSystem.build(model.grid, gen, noise)
        opts = dict(self.resolved["process"])
        burn_in = opts["burn_in_steps"]
        if opts["init"] == "zero" and burn_in == 0:
            # default burn-in: five relaxation times of the slowest mode
            burn_in = int(np.ceil(5.0 / (abs(sys_.gate.spectral_abscissa) * opts["dt"])))
        ens = simulate(
            sys_,
            dt=opts["dt"],
            n_steps=opts["n_steps"],
            n_traj=opts["n_traj"],
            seed=self.seed,
            init=opts["init"],
            W=self.W,
            burn_in_steps=burn_in,
            sample_stride=opts["sample_stride"],
        )
        C = ens.sample_covariance()
        cov_err = float(np.linalg.norm(C - self.W.W) / np.linalg.norm(self.W.W))
        lag = 20 * opts["dt"] * opts["sample_stride"]
        checks = markov_gaussian_checks(sys_, ens, self.W, lag=lag)
        rep = {
            "n_traj": ens.n_traj,
            "n_steps": opts["n_steps"],
            "dt": opts["dt"],
            "covariance_rel_error": cov_err,
            "markov_gaussian_ok": checks.ok,
            "normality_z": [c.z for c in checks.normality],
            "autocorrelation_z": [c.z for c in checks.autocorrelation],
            "innovation_z": [c.z for c in checks.innovation_orthogonality],
        }
        dump_json(out / "simulate_report.json", rep)
        save_table_csv(
            out / "ensemble_summary.csv",
            {
                "dof": np.arange(sys_.n).astype(float),
                "mean": ens.pooled().mean(axis=1),
                "variance": np.diag(C),
                "variance_model": np.diag(self.W.W),
            },
        )
        if save_trajectories:
            save_matrix_bin(out / "trajectories.bin", ens.pooled())
        update_manifest(out, self.base, "simulate", rep)
        print(
            f"simulate: sampled covariance within {cov_err:.1%} of the model, "
            f"markov/gaussian checks {'PASS' if checks.ok else 'FAIL'}"
        )

    # -- analyze ----------------------------------------------------------------

    def run_analyze(self):
        self.need_steady()
        self.need_covariance()
        out = self.out
        model, steady = self.model, self.steady
        aopts = self.cfg.analysis_opts
        profile = long_range_profile(
            self.W,
            model,
            steady,
            component_pair=tuple(aopts["component_pair"]),
            bump_width=aopts["bump_width"],
            min_separation_widths=aopts["min_separation_widths"],
        )
        conditions = long_range_conditions(model, steady, tol=aopts["condition_tol"])
        conditions.long_range_score = profile.long_range_score
        fdt = fdt_residual(self.W, model, steady, bump_width=aopts["bump_width"])
        save_table_csv(
            out / "correlation_profile.csv",
            {
                "separation": profile.separations,
                "correlation": profile.values,
                "local_reference": profile.reference,
            },
        )
        save_table_csv(
            out / "profile_excess.csv",
            {
                "separation": profile.separations,
                "excess": profile.values - profile.reference,
            },
        )
        dump_json(
            out / "correlation_profile.json",
            {
                "component_pair": list(profile.component_pair),
                "bump_width": profile.bump_width,
                "long_range_score": profile.long_range_score,
                "score_min_separation": profile.score_min_separation,
                "separations": [float(v) for v in profile.separations],
                "values": [float(v) for v in profile.values],
                "reference": [float(v) for v in profile.reference],
            },
        )
        dump_json(out / "long_range_conditions.json", conditions.as_dict())
        save_table_csv(
            out / "long_range_conditions.csv",
            {
                "u_max": np.array([conditions.u_max]),
                "kappa_drive_residual": np.array([conditions.kappa_drive_residual]),
                "flagged": np.array([1.0 if conditions.flagged else 0.0]),
                "long_range_score": np.array([profile.long_range_score]),
            },
        )
        rep = conditions.as_dict()
        rep["fdt_separated_residual"] = fdt.max_separated
        update_manifest(out, self.base, "analyze", rep)
        print(
            f"analyze: long-range score {profile.long_range_score:.3e}, "
            f"conditions flagged={conditions.flagged} "
            f"(u_max {conditions.u_max:.2e}, drive {conditions.kappa_drive_residual:.2e})"
        )


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="hydrofluct",
        description="fluctuating hydrodynamics around reservoir-driven steady states",
    )
    p.add_argument("verb", choices=["steady", "covariance", "simulate", "analyze", "all"])
    p.add_argument("--config", required=True, help="path to the JSON run configuration")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None, help="override the configured RNG seed")
    p.add_argument(
        "--route",
        choices=["lyapunov", "integral", "both"],
        default="lyapunov",
        help="stationary covariance route(s)",
    )
    p.add_argument(
        "--inline",
        action="store_true",
        help="compute missing prerequisite artifacts instead of failing",
    )
    p.add_argument("--save-trajectories", action="store_true")
    return p


def _emit_error(stage: str, exc: BaseException, code: int) -> int:
    sys.stderr.write(
        json.dumps({"error": str(exc), "stage": stage, "exit_code": code}) + "\n"
    )
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    stage = "validate"
    try:
        cfg = RunConfig.from_file(args.config)
        pipe = Pipeline(cfg, Path(args.out), args.seed, args.route, args.inline)
        if args.verb in ("steady", "all"):
            stage = "steady"
            pipe.run_steady()
        if args.verb in ("covariance", "all"):
            stage = "covariance"
            pipe.run_covariance()
        if args.verb in ("simulate", "all"):
            stage = "simulate"
            pipe.run_simulate(save_trajectories=args.save_trajectories)
        if args.verb in ("analyze", "all"):
            stage = "analyze"
            pipe.run_analyze()
        return 0
    except (ConfigError, MissingArtifact, FileNotFoundError, ValueError) as exc:
        return _emit_error(stage, exc, EXIT_VALIDATION)
    except (ConvergenceError, SolverError) as exc:
        return _emit_error(stage, exc, EXIT_SOLVER)
    except (GateError, PsdViolation) as exc:
        return _emit_error(stage, exc, EXIT_GATE)


if __name__ == "__main__":
    sys.exit(main())
