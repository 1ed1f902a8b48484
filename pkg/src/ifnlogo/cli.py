"""Command line entry point: ``ifnlogo <subcommand> ...``.

Exit status is 0 on success, 1 on a data or runtime error (with a one-line
diagnostic on stderr) and 2 on a usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import harness
from .data import compute_log_returns, read_observations_csv, read_prices_csv, write_observations_csv
from .dependence import (
    correlation_to_covariance,
    covariance_to_correlation,
    kendall_correlation,
    pearson_covariance,
)
from .errors import ConfigError
from .forest import deserialize, serialize
from .gaussian import GaussianModel, assemble_precision, fit_mu
from .harness import MODELS
from .mfcf import build_mfcf
from .models import load_model, model_log_likelihood, save_model
from .student import EmConfig, StudentTModel, estimate_nu_tail, fit_student_em
from .synthetic import GeneratorSpec, factor_covariance, make_rng, sample


def _nu(text: str) -> float | str:
    if text == "tail":
        return text
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"nu must be a number or 'tail', got {text!r}") from None


def _estimates(obs, estimator: str, transform: str):
    if estimator == "pearson":
        cov = pearson_covariance(obs)
        return covariance_to_correlation(cov), cov
    corr = kendall_correlation(obs, transform)
    return corr, correlation_to_covariance(corr)


def _emit(doc: dict) -> None:
    print(json.dumps(doc))


def cmd_returns(args: argparse.Namespace) -> None:
    obs = compute_log_returns(read_prices_csv(args.prices))
    write_observations_csv(obs, args.out)
    _emit({"rows": obs.q, "series": obs.p, "out": str(args.out)})


def cmd_synth(args: argparse.Namespace) -> None:
    seed = args.seed if args.seed is not None else 0
    if args.like:
        base = read_observations_csv(args.like)
        mu, sigma, labels = base.values.mean(axis=0), np.cov(base.values, rowvar=False, bias=True), base.labels
    else:
        if args.p is None:
            raise ConfigError("synth needs --p or --like")
        mu = np.zeros(args.p)
        sigma = np.eye(args.p) if args.identity else factor_covariance(args.p, make_rng(seed, 1))
        labels = ()
    spec = GeneratorSpec(mu, sigma, args.family, args.nu, seed, args.q, labels)
    obs = sample(spec)
    write_observations_csv(obs, args.out)
    _emit({"rows": obs.q, "series": obs.p, "family": args.family, "out": str(args.out)})


def cmd_build_net(args: argparse.Namespace) -> None:
    obs = read_observations_csv(args.data)
    corr, _ = _estimates(obs, args.estimator, args.kendall_transform)
    forest = build_mfcf(corr, args.max_clique)
    Path(args.out).write_text(serialize(forest))
    _emit({"p": forest.p, "cliques": len(forest.cliques), "n_edges": forest.n_edges, "out": str(args.out)})


def cmd_fit(args: argparse.Namespace) -> None:
    spec = MODELS[args.model]
    obs = read_observations_csv(args.data)
    corr, cov = _estimates(obs, spec.estimator, args.kendall_transform)
    if args.network:
        forest = deserialize(Path(args.network).read_text())
    elif args.max_clique:
        forest = build_mfcf(corr, args.max_clique)
    else:
        raise ConfigError("fit needs --network or --max-clique")
    if forest.p != obs.p:
        raise ConfigError(f"network has p={forest.p} but data has {obs.p} series")
    if spec.family == "normal":
        model = GaussianModel(fit_mu(obs), assemble_precision(cov, forest))
    else:
        nu = estimate_nu_tail(obs, args.tail_fraction) if args.nu == "tail" else float(args.nu)
        if spec.em:
            model = fit_student_em(obs, forest, EmConfig(args.em_max_iterations, args.em_tolerance, nu), covariance=cov)
        else:
            model = StudentTModel(fit_mu(obs), assemble_precision(cov, forest), nu)
    save_model(model, args.out)
    ll = model_log_likelihood(obs, model)
    out = {"model": args.model, "n_edges": forest.n_edges, "ll_train": ll, "ll_train_per_obs": ll / obs.q}
    if isinstance(model, StudentTModel):
        out["nu"] = model.nu
        if model.iterations is not None:
            out["em_iterations"] = model.iterations
    _emit(out)


def cmd_eval(args: argparse.Namespace) -> None:
    model = load_model(args.model)
    obs = read_observations_csv(args.data)
    if obs.p != model.mu.size:
        raise ConfigError(f"model has p={model.mu.size} but data has {obs.p} series")
    ll = model_log_likelihood(obs, model)
    _emit({"ll": ll, "ll_per_obs": ll / obs.q, "rows": obs.q})


def _sweep_config(args: argparse.Namespace) -> harness.SweepConfig:
    if not args.config:
        raise ConfigError("sweep needs --config")
    cfg = harness.load_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, plan=replace(cfg.plan, seed=args.seed))
    if args.jobs is not None:
        cfg = replace(cfg, jobs=args.jobs)
    if args.kendall_transform != "none":
        cfg = replace(cfg, kendall_transform=args.kendall_transform)
    if args.out:
        cfg = replace(cfg, output=str(args.out))
    if not cfg.output:
        raise ConfigError("no output path: pass --out or set 'output' in the config")
    return cfg


def cmd_sweep(args: argparse.Namespace) -> None:
    cfg = _sweep_config(args)
    results = harness.run_sweep(cfg)
    harness.write_results(results, cfg.output)
    failed = sum(not r.ok for r in results)
    _emit({"cells": len(results), "failed": failed, "out": cfg.output})


def cmd_aggregate(args: argparse.Namespace) -> None:
    rows = harness.aggregate(harness.read_results(args.results))
    baseline = harness.read_baseline(args.baseline) if args.baseline else ()
    harness.write_aggregate(rows, args.out, baseline)
    _emit({"rows": len(rows) + len(baseline), "out": str(args.out)})


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="master seed")
    common.add_argument("--config", default=None, help="TOML or JSON sweep config")
    common.add_argument("--jobs", type=int, default=None, help="worker processes for sweeps")
    common.add_argument("--kendall-transform", choices=("none", "sine"), default="none")

    parser = argparse.ArgumentParser(prog="ifnlogo", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("returns", parents=[common], help="prices CSV -> log-returns CSV")
    p.add_argument("--prices", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_returns)

    p = sub.add_parser("synth", parents=[common], help="sample synthetic observations")
    p.add_argument("--family", choices=("normal", "student_t"), default="normal")
    p.add_argument("--nu", type=float, default=None)
    p.add_argument("--p", type=int, default=None, help="number of series (factor covariance)")
    p.add_argument("--identity", action="store_true", help="identity covariance instead of factor model")
    p.add_argument("--like", default=None, help="returns CSV whose mean and covariance are used")
    p.add_argument("--q", type=int, default=1000)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("build-net", parents=[common], help="build an MFCF network")
    p.add_argument("--data", required=True)
    p.add_argument("--max-clique", type=int, required=True)
    p.add_argument("--estimator", choices=("pearson", "kendall"), default="pearson")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_build_net)

    p = sub.add_parser("fit", parents=[common], help="fit a model on a network")
    p.add_argument("--data", required=True)
    p.add_argument("--model", choices=tuple(MODELS), required=True)
    p.add_argument("--network", default=None)
    p.add_argument("--max-clique", type=int, default=None)
    p.add_argument("--nu", type=_nu, default=2.2)
    p.add_argument("--tail-fraction", type=float, default=0.05)
    p.add_argument("--em-max-iterations", type=int, default=500)
    p.add_argument("--em-tolerance", type=float, default=1e-6)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("eval", parents=[common], help="log-likelihood of data under a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", parents=[common], help="run a clique-size sweep")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("aggregate", parents=[common], help="summarise a results CSV")
    p.add_argument("--results", required=True)
    p.add_argument("--baseline", default=None, help="CSV of external baseline points")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_aggregate)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"ifnlogo {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
