"""Batch command-line front end.

Subcommands::

    misoid simulate     <config>   write a synthetic dataset + ground truth
    misoid identify     <config>   run Gibbs chain(s) on a dataset
    misoid oracle-check [<config>] fixed-hyperparameter equivalence suite
    misoid diagnose     <run-dir>  recompute diagnostics for a stored chain

Configs are INI-style key/value files (see README for the grammar); command
line flags override config keys.  Exit codes: 0 success, 1 numerical abort,
2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .blocks import (compute_block_probabilities, compute_correlations,
                     export_correlations_csv, export_probabilities_csv)
from .diagnostics import build_report, run_oracle_checks
from .errors import FactorizationError, SizeGuardError
from .regression import load_dataset_csv, save_dataset_csv
from .sampler import (SamplerConfig, VARIANTS, build_problem, config_as_dict,
                      derive_seed, load_record, run, save_record, summarize)
from .simgen import (CollinearInputSpec, RandomSystemSpec, gamma_for_target_c,
                     generate_inputs, generate_system, load_truth_json,
                     synthesize_dataset, write_truth_json)

__version__ = "0.1.0"


class ConfigError(Exception):
    pass


def _read_config(path) -> configparser.ConfigParser:
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return parser


def _get(section, key, cast, default=None, required=False):
    if section is None or key not in section or section[key].strip() == "":
        if required:
            raise ConfigError(f"missing required config key '{key}'")
        return default
    raw = section[key].strip()
    try:
        if cast is bool:
            return raw.lower() in ("1", "true", "yes", "on")
        return cast(raw)
    except ValueError:
        raise ConfigError(f"config key '{key}': cannot parse {raw!r}") from None


def _section(cfg, name):
    return cfg[name] if cfg.has_section(name) else None


def _sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


# --------------------------------------------------------------------------
# simulate
# --------------------------------------------------------------------------

def cmd_simulate(args) -> int:
    cfg = _read_config(args.config)
    gen = _section(cfg, "generator")
    if gen is None:
        raise ConfigError("simulate needs a [generator] section")
    runsec = _section(cfg, "run")

    m = _get(gen, "channels", int, required=True)
    n = _get(gen, "samples", int, required=True)
    mode = _get(gen, "mode", str, default="independent")
    if mode not in ("duplicate", "chain", "independent"):
        raise ConfigError(f"unknown generator mode {mode!r}")
    prefix = _get(gen, "correlated_prefix", int, default=0)
    target_c = _get(gen, "target_c", float, default=0.99)
    ma = _get(gen, "ma_coefficient", float, default=0.8)
    noise_var = _get(gen, "noise_variance", float, required=True)
    degree = _get(gen, "denominator_degree", int, default=5)
    rmin = _get(gen, "pole_radius_min", float, default=0.4)
    rmax = _get(gen, "pole_radius_max", float, default=0.9)
    p = _get(gen, "fir_order", int, required=True)
    seed = _get(gen, "seed", int, default=0)

    outdir = args.output or _get(runsec, "output", str, required=True)
    emit = (args.emit_figures
            or _get(runsec, "emit_figures", bool, default=False))
    os.makedirs(outdir, exist_ok=True)

    rng = np.random.default_rng(seed)
    system = generate_system(
        RandomSystemSpec(m=m, fir_order=p, denominator_degree=degree,
                         pole_radius_max=rmax, pole_radius_min=rmin), rng)
    inp_spec = CollinearInputSpec(
        m=m, n=n,
        correlated_prefix=prefix if mode == "chain" else 0,
        target_c=target_c, ma_coefficient=ma,
        duplicate=(mode == "duplicate"),
    )
    inputs = generate_inputs(inp_spec, rng)
    data = synthesize_dataset(system, inputs, noise_var, rng)
    cmat = compute_correlations(data)

    save_dataset_csv(data, os.path.join(outdir, "dataset.csv"))
    gamma = (gamma_for_target_c(target_c, ma, 1.0)
             if mode == "chain" and prefix > 1 else None)
    write_truth_json(os.path.join(outdir, "truth.json"), system, noise_var,
                     gamma=gamma, achieved_correlations=cmat)
    if emit:
        export_correlations_csv(cmat, os.path.join(outdir, "cmatrix.csv"))

    print(f"wrote {outdir}/dataset.csv ({n} samples, {m} channels) "
          f"and truth.json")
    if mode == "duplicate":
        print(f"achieved c(0,1) = {cmat[0, 1]:.6f}")
    elif mode == "chain" and prefix > 1:
        adjacent = [cmat[i, i + 1] for i in range(prefix - 1)]
        print(f"achieved adjacent correlations: min {min(adjacent):.4f} "
              f"max {max(adjacent):.4f}; c(0,{prefix - 1}) = "
              f"{cmat[0, prefix - 1]:.4f}")
    return 0


# --------------------------------------------------------------------------
# identify
# --------------------------------------------------------------------------

def _sampler_config(cfg, args, variant: str, seed: int) -> SamplerConfig:
    sec = _section(cfg, "sampler")
    return SamplerConfig(
        variant=variant,
        n_mc=args.iterations or _get(sec, "iterations", int, required=True),
        alpha=args.alpha or _get(sec, "alpha", float, required=True),
        p=args.fir_order or _get(sec, "fir_order", int, required=True),
        beta=args.beta or _get(sec, "beta", float),
        n_ob=args.n_ob or _get(sec, "overlapping_blocks", int, default=1),
        burn_in=(args.burn_in if args.burn_in is not None
                 else _get(sec, "burn_in", int)),
        seed=seed,
        literal_paper_shape=(args.literal_paper_shape
                             or _get(sec, "literal_paper_shape", bool,
                                     default=False)),
        thin=args.thin or _get(sec, "thin", int, default=1),
    )


def _run_one(problem, config, outdir, truth, data_hash, emit_figures) -> None:
    os.makedirs(outdir, exist_ok=True)
    started = time.perf_counter()
    aborted = False
    try:
        record, summary = run(problem, config)
    except FactorizationError as exc:
        aborted = True
        partial = getattr(exc, "partial_record", None)
        if partial is not None:
            save_record(partial, None, outdir, aborted=True)
            _write_manifest(outdir, config, data_hash,
                            time.perf_counter() - started, aborted=True,
                            error=str(exc))
        raise
    save_record(record, summary, outdir)
    truth_resp = truth["responses"] if truth is not None else None
    report = build_report(record, summary, truth_resp)
    report.to_json(os.path.join(outdir, "diagnostics.json"))
    _write_manifest(outdir, config, data_hash,
                    time.perf_counter() - started, aborted=aborted)
    if emit_figures and config.uses_blocks:
        schedule = compute_block_probabilities(
            compute_correlations(problem.data), config.beta)
        export_probabilities_csv(schedule,
                                 os.path.join(outdir, "pmatrix.csv"))


def _write_manifest(outdir, config, data_hash, seconds, aborted=False,
                    error=None) -> None:
    doc = {
        "config": config_as_dict(config),
        "seed": config.seed,
        "data_sha256": data_hash,
        "version": __version__,
        "seconds": round(seconds, 3),
        "aborted": aborted,
    }
    if error:
        doc["error"] = error
    with open(os.path.join(outdir, "manifest.json"), "w") as fh:
        json.dump(doc, fh, sort_keys=True, indent=1)
        fh.write("\n")


def cmd_identify(args) -> int:
    cfg = _read_config(args.config)
    datasec = _section(cfg, "data")
    runsec = _section(cfg, "run")

    data_path = args.data or _get(datasec, "path", str)
    if not data_path:
        raise ConfigError("no dataset path given ([data] path or --data)")
    if not os.path.exists(data_path):
        raise ConfigError(f"dataset not found: {data_path}")
    truth_path = args.truth or _get(datasec, "truth", str)
    truth = None
    if truth_path and os.path.exists(truth_path):
        truth = load_truth_json(truth_path)

    variants_raw = args.variant or _get(_section(cfg, "sampler"), "variant",
                                        str, required=True)
    variants = [v.strip() for v in variants_raw.split(",") if v.strip()]
    for v in variants:
        if v not in VARIANTS:
            raise ConfigError(f"unknown variant {v!r}; choose from {VARIANTS}")

    outroot = args.output or _get(runsec, "output", str, required=True)
    replicates = args.replicates or _get(runsec, "replicates", int, default=1)
    threads = args.threads or _get(runsec, "threads", int, default=1)
    emit = args.emit_figures or _get(runsec, "emit_figures", bool,
                                     default=False)

    master_seed = (args.seed if args.seed is not None
                   else _get(_section(cfg, "sampler"), "seed", int, default=0))
    data = load_dataset_csv(data_path)
    data_hash = _sha256(data_path)

    base = _sampler_config(cfg, args, variants[0], master_seed)
    problem = build_problem(data, base)

    jobs = []
    for variant in variants:
        for rep in range(replicates):
            config = _sampler_config(cfg, args, variant,
                                     derive_seed(master_seed, rep))
            outdir = os.path.join(outroot, variant, f"rep{rep:03d}")
            jobs.append((config, outdir))

    failures = []

    def _job(config, outdir):
        try:
            _run_one(problem, config, outdir, truth, data_hash, emit)
        except FactorizationError as exc:
            failures.append((outdir, str(exc)))

    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for config, outdir in jobs:
                pool.submit(_job, config, outdir)
    else:
        for config, outdir in jobs:
            _job(config, outdir)

    if failures:
        for outdir, message in failures:
            print(f"numerical abort in {outdir}: {message}", file=sys.stderr)
        return 1
    for config, outdir in jobs:
        print(f"chain written: {outdir}")
    return 0


# --------------------------------------------------------------------------
# oracle-check / diagnose
# --------------------------------------------------------------------------

def cmd_oracle_check(args) -> int:
    seed, sweeps, m, p, n = 0, 10_000, 2, 3, 50
    if args.config:
        cfg = _read_config(args.config)
        sec = _section(cfg, "oracle")
        seed = _get(sec, "seed", int, default=seed)
        sweeps = _get(sec, "sweeps", int, default=sweeps)
        m = _get(sec, "channels", int, default=m)
        p = _get(sec, "fir_order", int, default=p)
        n = _get(sec, "samples", int, default=n)
    try:
        report = run_oracle_checks(seed=seed, n_sweeps=sweeps, m=m, p=p, n=n,
                                   corrupt_mean=args.corrupt_mean)
    except SizeGuardError as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return 2
    for check in report.checks:
        status = "PASS" if check.passed else "FAIL"
        print(f"{status}  {check.name}: statistic={check.statistic:.3e} "
              f"limit={check.limit:g}")
    return 0 if report.passed else 1


def cmd_diagnose(args) -> int:
    if not os.path.isdir(args.run_dir):
        raise ConfigError(f"run directory not found: {args.run_dir}")
    record = load_record(args.run_dir)
    summary = summarize(record)
    truth = None
    if args.truth:
        truth = load_truth_json(args.truth)
    report = build_report(record, summary,
                          truth["responses"] if truth else None)
    out = os.path.join(args.run_dir, "diagnostics.json")
    report.to_json(out)
    for name in sorted(report.iact):
        print(f"{name}: iact={report.iact[name]:.2f} "
              f"ess={report.ess[name]:.1f}")
    if report.fit_errors is not None:
        print("fit (relative L2 per channel): " +
              " ".join(f"{e:.3f}" for e in report.fit_errors))
    print(f"wrote {out}")
    return 0


# --------------------------------------------------------------------------
# parser / entry points
# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="misoid",
        description="Bayesian MISO system identification via blocked Gibbs "
                    "sampling",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="generate a synthetic dataset")
    sim.add_argument("config")
    sim.add_argument("--output")
    sim.add_argument("--emit-figures", action="store_true", default=False)
    sim.set_defaults(func=cmd_simulate)

    ident = sub.add_parser("identify", help="run Gibbs chains on a dataset")
    ident.add_argument("config")
    ident.add_argument("--data")
    ident.add_argument("--truth")
    ident.add_argument("--output")
    ident.add_argument("--variant", help="comma-separated list")
    ident.add_argument("--iterations", type=int)
    ident.add_argument("--burn-in", type=int, dest="burn_in")
    ident.add_argument("--alpha", type=float)
    ident.add_argument("--beta", type=float)
    ident.add_argument("--n-ob", type=int, dest="n_ob")
    ident.add_argument("--fir-order", type=int, dest="fir_order")
    ident.add_argument("--seed", type=int)
    ident.add_argument("--thin", type=int)
    ident.add_argument("--replicates", type=int)
    ident.add_argument("--threads", type=int)
    ident.add_argument("--literal-paper-shape", action="store_true",
                       default=False)
    ident.add_argument("--emit-figures", action="store_true", default=False)
    ident.set_defaults(func=cmd_identify)

    oc = sub.add_parser("oracle-check",
                        help="fixed-hyperparameter equivalence suite")
    oc.add_argument("config", nargs="?")
    oc.add_argument("--corrupt-mean", action="store_true", default=False,
                    help="mutation sanity hook: flip conditional means")
    oc.set_defaults(func=cmd_oracle_check)

    diag = sub.add_parser("diagnose", help="recompute chain diagnostics")
    diag.add_argument("run_dir")
    diag.add_argument("--truth")
    diag.set_defaults(func=cmd_diagnose)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FactorizationError as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return 1


def console_main() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console_main()
