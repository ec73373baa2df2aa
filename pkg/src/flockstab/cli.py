"""Command-line front end: configuration handling, subcommands, persistence.

Configs are JSON with nested sections; command-line flags override file
values. Every run echoes its effective config into the output directory so
results are reproducible from the echo alone.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import experiments, hypotheses
from .dynamics import ModelParams
from .errors import (ConfigError, DivergenceError, FlockstabError,
                     NonConvergenceError)
from .jacobians import (StationaryConfig, assemble_FBB, assemble_G,
                        flock_member, load_stationary, save_stationary)
from .linalg import general_eigenvalues, symmetric_eigen
from .potentials import PotentialSpec

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NONCONVERGENCE = 3
EXIT_HYPOTHESIS = 4

OUTPUT_ENV_VAR = "FLOCKSTAB_OUT"

DEFAULT_CONFIG = {
    "potential": {"family": "morse", "C": 10.0 / 9.0, "ell": 0.75, "D": 0.5},
    "N": 25,
    "model": {"alpha": 1.0, "beta": 5.0},
    "integrator": {"dt": 0.01, "T": 100.0},
    "seeds": {"base_seed": 0},
    "tolerances": {"h1_tol": 1e-8, "kernel_tol": 1e-6, "h5_tol": 1e-8},
    "m0_angle": 0.3,
    "threads": 1,
    "sweep": {"n_sims": 500, "a_max": 2.0, "n_bins": 10},
    "table1": {
        "refine_D": 500.0,
        "refine_T": 500.0,
        "refine_dt": 1e-3,
        "normalize": True,
        "families": ["morse", "quasi_morse", "generalized_morse", "log_newtonian"],
        # the strongly confining log-Newtonian potential needs a gentler
        # refinement amplitude to stay inside the RK4 stability region, and
        # the Bessel-valued quasi-Morse forces are soft enough for a larger step
        "refine_D_overrides": {"log_newtonian": 10.0},
        "refine_dt_overrides": {"quasi_morse": 4e-3},
    },
}

STANDARD_FAMILY_SPECS = {
    "morse": {"family": "morse", "C": 10.0 / 9.0, "ell": 0.75},
    "quasi_morse": {"family": "quasi_morse", "C": 10.0 / 9.0, "ell": 0.75, "k": 0.5},
    "generalized_morse": {"family": "generalized_morse", "C": 10.0 / 9.0,
                          "ell": 0.75, "p": 1.25},
    "log_newtonian": {"family": "log_newtonian"},
}


@dataclass
class RunConfig:
    raw: dict
    potential: PotentialSpec
    N: int
    model: ModelParams
    dt: float
    T: float
    base_seed: int
    h1_tol: float
    kernel_tol: float
    h5_tol: float
    m0_angle: float
    threads: int
    sweep_n_sims: int
    sweep_a_max: float
    sweep_n_bins: int
    table1_refine_D: float
    table1_refine_T: float
    table1_refine_dt: float
    table1_normalize: bool
    table1_families: list
    table1_refine_D_overrides: dict
    table1_refine_dt_overrides: dict


def _deep_merge(base: dict, override: dict, path: str = "") -> dict:
    merged = dict(base)
    for key, value in override.items():
        where = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigError(f"unknown config key: {where}")
        if isinstance(base[key], dict) and isinstance(value, dict):
            if key in ("potential", "refine_D_overrides", "refine_dt_overrides"):
                merged[key] = dict(value)
            else:
                merged[key] = _deep_merge(base[key], value, where)
        else:
            merged[key] = value
    return merged


def load_config_file(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"config parse error in {path} at line {exc.lineno}, "
            f"column {exc.colno}: {exc.msg}") from exc
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


def build_run_config(file_data: dict | None, args) -> RunConfig:
    merged = json.loads(json.dumps(DEFAULT_CONFIG))
    if file_data is not None:
        if not isinstance(file_data, dict):
            raise ConfigError("config root must be a JSON object")
        merged = _deep_merge(merged, file_data)
    if getattr(args, "potential", None):
        name = args.potential.strip().lower().replace("-", "_")
        if name not in STANDARD_FAMILY_SPECS:
            raise ConfigError(f"unknown potential {args.potential!r}")
        keep_D = merged["potential"].get("D", 1.0)
        merged["potential"] = dict(STANDARD_FAMILY_SPECS[name], D=keep_D)
    if getattr(args, "N", None) is not None:
        merged["N"] = args.N
    if getattr(args, "seed", None) is not None:
        merged["seeds"]["base_seed"] = args.seed
    if getattr(args, "threads", None) is not None:
        merged["threads"] = args.threads
    if getattr(args, "m0_angle", None) is not None:
        merged["m0_angle"] = args.m0_angle
    return _validate(merged)


def _validate(cfg: dict) -> RunConfig:
    try:
        potential = PotentialSpec.from_dict(cfg["potential"])
        N = int(cfg["N"])
        model = ModelParams(float(cfg["model"]["alpha"]), float(cfg["model"]["beta"]))
        dt = float(cfg["integrator"]["dt"])
        T = float(cfg["integrator"]["T"])
        base_seed = int(cfg["seeds"]["base_seed"])
        tols = {k: float(v) for k, v in cfg["tolerances"].items()}
        m0_angle = float(cfg["m0_angle"])
        threads = int(cfg["threads"])
        sweep = cfg["sweep"]
        table1 = cfg["table1"]
        run = RunConfig(
            raw=cfg,
            potential=potential,
            N=N,
            model=model,
            dt=dt,
            T=T,
            base_seed=base_seed,
            h1_tol=tols["h1_tol"],
            kernel_tol=tols["kernel_tol"],
            h5_tol=tols["h5_tol"],
            m0_angle=m0_angle,
            threads=threads,
            sweep_n_sims=int(sweep["n_sims"]),
            sweep_a_max=float(sweep["a_max"]),
            sweep_n_bins=int(sweep["n_bins"]),
            table1_refine_D=float(table1["refine_D"]),
            table1_refine_T=float(table1["refine_T"]),
            table1_refine_dt=float(table1["refine_dt"]),
            table1_normalize=bool(table1["normalize"]),
            table1_families=list(table1["families"]),
            table1_refine_D_overrides=dict(table1.get("refine_D_overrides", {})),
            table1_refine_dt_overrides=dict(table1.get("refine_dt_overrides", {})),
        )
    except FlockstabError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid config: {exc}") from exc
    if N < 1:
        raise ConfigError("N must be at least 1")
    if dt <= 0 or T < 0:
        raise ConfigError("integrator requires dt > 0 and T >= 0")
    for name, value in tols.items():
        if value <= 0:
            raise ConfigError(f"tolerance {name} must be positive")
    if run.sweep_a_max <= 0:
        raise ConfigError("sweep.a_max must be positive (empty perturbation range)")
    if run.sweep_n_sims < 1 or run.sweep_n_bins < 1:
        raise ConfigError("sweep.n_sims and sweep.n_bins must be at least 1")
    if run.threads < 1:
        raise ConfigError("threads must be at least 1")
    return run


def _out_dir(args) -> Path:
    out = getattr(args, "out", None) or os.environ.get(OUTPUT_ENV_VAR) \
        or "./flockstab_out"
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _echo_config(out: Path, run: RunConfig) -> None:
    with open(out / "config.json", "w") as fh:
        json.dump(run.raw, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _refine_settings(run: RunConfig, family: str | None = None):
    spec_dict = dict(STANDARD_FAMILY_SPECS[family]) if family else None
    spec = PotentialSpec.from_dict(spec_dict) if spec_dict else run.potential
    refine_D = run.table1_refine_D_overrides.get(spec.family.value,
                                                 run.table1_refine_D)
    refine_dt = run.table1_refine_dt_overrides.get(spec.family.value,
                                                   run.table1_refine_dt)
    return spec, float(refine_D), float(refine_dt)


def _compute_steady(run: RunConfig):
    """Normalized stationary state per the table pipeline (N=1 is trivial)."""
    if run.N == 1:
        rng = np.random.default_rng(run.base_seed)
        x0 = experiments.initial_positions_disc(1, rng)
        return None, StationaryConfig(x0, 0.0, run.potential), None
    spec, refine_D, refine_dt = _refine_settings(run)
    return experiments.table1_pipeline(
        spec, run.N, refine_D=refine_D, refine_T=run.table1_refine_T,
        dt=refine_dt, seed=run.base_seed,
        normalize=run.table1_normalize, h1_tol=run.h1_tol,
        kernel_tol=run.kernel_tol)


def cmd_find_steady(run: RunConfig, args) -> int:
    out = _out_dir(args)
    _echo_config(out, run)
    _, config, _ = _compute_steady(run)
    save_stationary(out / "steady.json", config)
    print(f"steady state written: N={config.N} residual={config.residual:.3e} "
          f"D={config.spec.D!r}")
    return EXIT_OK


def _load_member(run: RunConfig, args):
    steady_path = getattr(args, "steady", None)
    if steady_path:
        config = load_stationary(steady_path)
        if config.spec.family is not run.potential.family:
            raise ConfigError(
                f"stationary state is for {config.spec.family.value}, config "
                f"says {run.potential.family.value}")
    else:
        _, config, _ = _compute_steady(run)
    return config


def cmd_spectrum(run: RunConfig, args) -> int:
    out = _out_dir(args)
    _echo_config(out, run)
    config = _load_member(run, args)
    G = assemble_G(config)
    spec_G = symmetric_eigen(G, kernel_tol=run.kernel_tol)
    with open(out / "spectrum_G.json", "w") as fh:
        json.dump(spec_G.to_dict(), fh, indent=1)
        fh.write("\n")
    member = flock_member(config, run.model, run.m0_angle)
    FBB = assemble_FBB(member, run.model)
    spec_FBB = general_eigenvalues(FBB, kernel_tol=run.kernel_tol)
    with open(out / "spectrum_FBB.json", "w") as fh:
        json.dump(spec_FBB.to_dict(), fh, indent=1)
        fh.write("\n")
    print(f"G spectrum: kernel_dim={spec_G.kernel_dim}; "
          f"FBB spectrum: kernel_dim={spec_FBB.kernel_dim}")
    return EXIT_OK


def cmd_check_hypotheses(run: RunConfig, args) -> int:
    out = _out_dir(args)
    _echo_config(out, run)
    config = _load_member(run, args)
    report = hypotheses.evaluate_hypotheses(
        config, run.model, angle=run.m0_angle, h1_tol=run.h1_tol,
        kernel_tol=run.kernel_tol, h5_tol=run.h5_tol)
    with open(out / "hypotheses.json", "w") as fh:
        json.dump(report.to_dict(), fh, indent=1)
        fh.write("\n")
    values = {
        "H1": f"residual={report.h1_residual:.3e}",
        "H2_H3": f"kernel_dim={report.h2_kernel_dim} span={report.h2_span_check:.2e} "
                 f"mu4={report.h3_mu4:.4e}",
        "H4": f"line_deviation={report.h4_line_deviation:.3e}",
        "H5": f"min_overlap={report.h5_min_overlap:.3e}",
        "lemma3": f"no_generalized_eigenvector={report.lemma3_no_genvec}",
        "lemma4": f"kernel_dim={report.lemma4_kernel_dim} "
                  f"max_re={report.lemma4_max_nonzero_re:.3e}",
    }
    print(f"{'check':<10}{'pass':<7}diagnostics")
    for name, passed in report.passes.items():
        print(f"{name:<10}{'yes' if passed else 'NO':<7}{values[name]}")
    return EXIT_OK if report.all_pass else EXIT_HYPOTHESIS


def cmd_perturb_sweep(run: RunConfig, args) -> int:
    out = _out_dir(args)
    _echo_config(out, run)
    config = _load_member(run, args)
    config = config.with_scaling(run.potential.D)
    member = flock_member(config, run.model, run.m0_angle)
    records = experiments.monte_carlo_sweep(
        member, run.model, run.sweep_n_sims, run.sweep_a_max, run.T, run.dt,
        run.base_seed, n_workers=run.threads)
    experiments.write_records_csv(out / "records.csv", records)
    stats = experiments.sweep_statistics(records, run.sweep_n_bins)
    experiments.write_stats_csv(out / "stats.csv", stats)
    n_div = sum(r.diverged for r in records)
    print(f"sweep complete: {len(records)} runs, {n_div} diverged")
    return EXIT_OK


def cmd_table1(run: RunConfig, args) -> int:
    out = _out_dir(args)
    _echo_config(out, run)
    families = run.table1_families
    if getattr(args, "potential", None):
        families = [args.potential.strip().lower().replace("-", "_")]
    rows = []
    for family in families:
        if family not in STANDARD_FAMILY_SPECS:
            raise ConfigError(f"unknown table potential {family!r}")
        spec, refine_D, refine_dt = _refine_settings(run, family)
        row, _, _ = experiments.table1_pipeline(
            spec, run.N, refine_D=refine_D, refine_T=run.table1_refine_T,
            dt=refine_dt, seed=run.base_seed,
            normalize=run.table1_normalize, h1_tol=run.h1_tol,
            kernel_tol=run.kernel_tol)
        rows.append(row)
        print(f"{row.family:<18} N={row.N:<4} mu4={row.mu4: .4e} "
              f"|mu3|={row.abs_mu3:.2e} D={row.D_report:.4f}")
    experiments.write_table_csv(out / "table1.csv", rows)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="flockstab",
        description="Flock stationary states, stability hypotheses, and sweeps")
    sub = parser.add_subparsers(dest="command", required=True)
    commands = {
        "find-steady": cmd_find_steady,
        "spectrum": cmd_spectrum,
        "check-hypotheses": cmd_check_hypotheses,
        "perturb-sweep": cmd_perturb_sweep,
        "reproduce-table1": cmd_table1,
    }
    for name, handler in commands.items():
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--out", help="output directory "
                       f"(default ${OUTPUT_ENV_VAR} or ./flockstab_out)")
        p.add_argument("--seed", type=int, help="override seeds.base_seed")
        p.add_argument("--threads", type=int, help="worker processes for sweeps")
        p.add_argument("--potential", help="standard potential name")
        p.add_argument("--N", type=int, help="particle count")
        p.add_argument("--m0-angle", dest="m0_angle", type=float,
                       help="flock orientation angle in radians")
        if name in ("spectrum", "check-hypotheses", "perturb-sweep"):
            p.add_argument("--steady", help="stationary-state JSON from find-steady")
        p.set_defaults(handler=handler)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        file_data = load_config_file(args.config) if args.config else None
        run = build_run_config(file_data, args)
        return args.handler(run, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NonConvergenceError, DivergenceError) as exc:
        print(f"non-convergence: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except FlockstabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
