"""Command-line entry point: ``singwish <subcommand> [options]``.

Exit status is 0 on success, 2 on usage errors and 1 on runtime errors.
Stochastic subcommands refuse to run without ``--seed``.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from . import io
from .asymptotics import AsymptoticParams, omega_matrix, sigma2, validate_assumptions
from .charfn import CfQuadratureConfig, cf_product_result, empirical_cf, sample_az_naive
from .errors import SingwishError
from .harness import (
    ExperimentConfig,
    benchmark,
    generate_population,
    generate_projection,
    normal_pdf,
    run_experiment,
)
from .product import ClampStats, ProductSpec, sample_product
from .rng import RngStream
from .samplers import (
    GaussianSpec,
    WishartSpec,
    sample_chi2,
    sample_singular_normal,
    sample_singular_wishart,
)
from .spectral import read_matrix_csv, spectral_decompose

log = logging.getLogger("singwish")


def _common(parser: argparse.ArgumentParser) -> None:
    g = parser.add_argument_group("global options")
    g.add_argument("--seed", type=int, help="master seed (required for anything random)")
    g.add_argument("--threads", type=int, default=1, help="worker threads, 0 = one per CPU (default 1)")
    g.add_argument("-v", "--verbose", action="count", default=0, help="more logging; repeatable")
    g.add_argument("--out-dir", default=".", help="directory for output files (default: current)")


def _population_args(parser, kappa_default: str = "1/n") -> None:
    parser.add_argument("--n", type=int, required=True, help="Wishart degrees of freedom")
    parser.add_argument("--k", type=int, help="dimension (generated population)")
    parser.add_argument("--r", type=int, help="rank of Sigma (generated population)")
    parser.add_argument("--kappa", type=float, help=f"scale of Cov(z) = kappa Sigma (default {kappa_default})")
    parser.add_argument("--sigma", help="CSV file with the k x k matrix Sigma instead of a generated one")
    parser.add_argument("--mu", help="CSV file with one row holding mu (default: generated, or 0 with --sigma)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="singwish",
        description="Singular Wishart x singular Gaussian products: samplers, CF, asymptotics.",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("sample", help="draw chi-square, singular normal or singular Wishart variates")
    p.add_argument("kind", choices=["chi2", "normal", "wishart"], help="distribution to draw from")
    _population_args(p, kappa_default="1")
    p.add_argument("--stream", type=int, default=0, help="stream index under the master seed (default 0)")
    p.add_argument("--n-draws", type=int, default=1000, help="number of draws (default 1000)")
    p.add_argument("--out", default="samples.csv", help="output CSV, one draw per row")
    _common(p)

    p = sub.add_parser("sample-product", help="draw M A z (or m'A z when p = 1)")
    p.add_argument("--method", choices=["naive", "stochrep"], default="stochrep", help="sampler (default stochrep)")
    p.add_argument("--n", type=int, required=True, help="Wishart degrees of freedom")
    p.add_argument("--k", type=int, required=True, help="dimension")
    p.add_argument("--r", type=int, required=True, help="rank of Sigma")
    p.add_argument("--p", type=int, default=1, help="rows of M; 1 uses m = 1/k and the scalar path")
    p.add_argument("--kappa", type=float, help="scale of Cov(z) = kappa Sigma (default 1/n)")
    p.add_argument("--stream", type=int, default=0, help="stream index under the master seed (default 0)")
    p.add_argument("--n-draws", type=int, default=1000, help="number of draws (default 1000)")
    p.add_argument("--out", default="samples.csv", help="output CSV, one draw per row")
    _common(p)

    p = sub.add_parser("charfn", help="characteristic function of A z at given u vectors")
    p.add_argument("--u", required=True, help="CSV file, one u vector per row")
    _population_args(p, kappa_default="1")
    p.add_argument("--rel-tol", type=float, default=1e-8, help="quadrature relative tolerance")
    p.add_argument("--tail-mass", type=float, default=1e-12, help="chi-square mass dropped from the tails")
    p.add_argument("--empirical", type=int, metavar="N", help="add a Monte Carlo comparison over N naive draws")
    p.add_argument("--out", default="charfn.csv", help="output CSV")
    _common(p)

    p = sub.add_parser("asymptotics", help="asymptotic variance (p = 1) or covariance matrix and assumption report")
    p.add_argument("--n", type=int, required=True, help="Wishart degrees of freedom")
    p.add_argument("--k", type=int, required=True, help="dimension")
    p.add_argument("--r", type=int, required=True, help="rank of Sigma")
    p.add_argument("--p", type=int, default=1, help="rows of M; 1 uses m = 1/k")
    p.add_argument("--kappa", type=float, help="scale of Cov(z) = kappa Sigma (default 1/n)")
    p.add_argument("--c", type=float, help="concentration; default r/n")
    p.add_argument("--l2", type=float, default=10.0, help="coherence bound used for warnings")
    p.add_argument("--out", help="JSON file (default: stdout)")
    _common(p)

    p = sub.add_parser("figure", help="Monte Carlo check of the normal approximation (KDE vs N(0,1))")
    p.add_argument("--config", help="JSON file with ExperimentConfig fields; flags override it")
    p.add_argument("--n", type=int, help="Wishart degrees of freedom")
    p.add_argument("--k", type=int, help="dimension")
    p.add_argument("--c", type=float, help="concentration; r = round(c n)")
    p.add_argument("--kappa", type=float, help="scale of Cov(z) = kappa Sigma (default 1/n)")
    p.add_argument("--reps", type=int, help="replications N (default 10000)")
    p.add_argument("--method", choices=["naive", "stochrep"], help="sampler (default stochrep)")
    p.add_argument("--out-prefix", default="figure", help="prefix of the output files")
    p.add_argument("--no-svg", action="store_true", help="skip the overlay SVG")
    p.add_argument("--timings", action="store_true", help="record wall-clock timings in the summary")
    _common(p)

    p = sub.add_parser("benchmark", help="naive vs stochastic-representation cost per draw")
    p.add_argument("--n", type=int, required=True, help="Wishart degrees of freedom")
    p.add_argument("--k", type=int, required=True, help="dimension")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--r", type=int, help="rank of Sigma")
    g.add_argument("--c", type=float, help="concentration; r = round(c n)")
    p.add_argument("--n-draws", type=int, default=100, help="draws per timing run")
    p.add_argument("--repeats", type=int, default=3, help="timing runs; the best is kept")
    p.add_argument("--out", default="benchmark.json", help="output JSON")
    _common(p)
    return parser


def _require_seed(parser, args) -> int:
    if args.seed is None:
        parser.error(f"{args.command}: --seed is required (no implicit seeding)")
    if args.seed < 0:
        parser.error("--seed must be non-negative")
    return args.seed


def _out(args, name) -> Path:
    return Path(args.out_dir) / name


def _gaussian(parser, args, kappa: float) -> GaussianSpec:
    if args.sigma:
        sigma = spectral_decompose(read_matrix_csv(args.sigma))
        mu = io.read_vectors_csv(args.mu)[0] if args.mu else np.zeros(sigma.k)
        return GaussianSpec(mu, kappa, sigma)
    if args.k is None or args.r is None:
        parser.error("--k and --r are required unless --sigma is given")
    pop = generate_population(args.k, args.r, RngStream(_require_seed(parser, args)).child("population"))
    mu = io.read_vectors_csv(args.mu)[0] if args.mu else pop.mu
    return GaussianSpec(mu, kappa, pop.sigma)


def cmd_sample(parser, args) -> None:
    seed = _require_seed(parser, args)
    stream = RngStream(seed, args.stream)
    if args.kind == "chi2":
        draws = sample_chi2(args.n, stream, size=args.n_draws)
        header = ["chi2"]
    else:
        spec = _gaussian(parser, args, 1.0 if args.kappa is None else args.kappa)
        k = spec.k
        if args.kind == "normal":
            draws = sample_singular_normal(spec, stream, size=args.n_draws)
            header = [f"z{i + 1}" for i in range(k)]
        else:
            draws = sample_singular_wishart(WishartSpec(args.n, spec.sigma), stream, size=args.n_draws)
            draws = draws.reshape(args.n_draws, k * k)
            header = [f"a{i + 1}_{j + 1}" for i in range(k) for j in range(k)]
    io.write_csv(_out(args, args.out), header, draws)


def _product_spec(args, seed: int) -> ProductSpec:
    root = RngStream(seed)
    pop = generate_population(args.k, args.r, root.child("population"))
    kappa = 1.0 / args.n if args.kappa is None else args.kappa
    gauss = GaussianSpec(pop.mu, kappa, pop.sigma)
    if args.p == 1:
        return ProductSpec(gauss, args.n, pop.m)
    return ProductSpec(gauss, args.n, generate_projection(args.k, args.p, root.child("projection")))


def cmd_sample_product(parser, args) -> None:
    seed = _require_seed(parser, args)
    if args.p < 1:
        parser.error("--p must be at least 1")
    spec = _product_spec(args, seed)
    stats = ClampStats()
    draws = sample_product(spec, RngStream(seed, args.stream), size=args.n_draws, method=args.method, stats=stats)
    header = ["x"] if spec.is_scalar else [f"x{i + 1}" for i in range(spec.p)]
    io.write_csv(_out(args, args.out), header, draws)
    if stats.clamps:
        log.info("clamped %d of %d draws", stats.clamps, stats.draws)


def cmd_charfn(parser, args) -> None:
    stochastic = args.empirical is not None or not (args.sigma and args.mu)
    if stochastic:
        _require_seed(parser, args)
    spec = _gaussian(parser, args, 1.0 if args.kappa is None else args.kappa)
    cfg = CfQuadratureConfig(rel_tol=args.rel_tol, tail_mass=args.tail_mass)
    us = io.read_vectors_csv(args.u)
    if us.shape[1] != spec.k:
        raise SingwishError(f"u vectors have {us.shape[1]} entries, expected k = {spec.k}")
    samples = None
    if args.empirical is not None:
        samples = sample_az_naive(spec, args.n, RngStream(args.seed).child("empirical"), args.empirical)
    header = [f"u{i + 1}" for i in range(spec.k)] + ["re", "im", "est_error"]
    if samples is not None:
        header += ["emp_re", "emp_im", "abs_diff"]
    rows = []
    for u in us:
        res = cf_product_result(u, spec, args.n, cfg)
        row = list(u) + [res.value.real, res.value.imag, res.abserr]
        if samples is not None:
            emp = empirical_cf(samples, u)
            row += [emp.real, emp.imag, abs(emp - res.value)]
        rows.append(row)
    io.write_csv(_out(args, args.out), header, rows)


def cmd_asymptotics(parser, args) -> None:
    seed = _require_seed(parser, args)
    spec = _product_spec(args, seed)
    gauss = spec.gaussian
    if args.c is None:
        params = AsymptoticParams.from_ratio(args.r, args.n, gauss.kappa)
    else:
        params = AsymptoticParams(c=args.c, kappa=gauss.kappa)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        report = validate_assumptions(gauss, spec.projection, args.n, l2=args.l2)
    out = {
        "config": {"n": args.n, "k": args.k, "r": args.r, "p": args.p, "kappa": gauss.kappa,
                   "c": params.c, "seed": seed},
        "assumptions": report.to_dict(),
        "warnings": [str(w.message) for w in caught],
    }
    if spec.is_scalar:
        out["sigma2"] = sigma2(spec.projection, gauss, params)
    else:
        out["omega"] = omega_matrix(spec.projection, gauss, params)
    text = io.json_text(out)
    if args.out:
        io.atomic_write_text(_out(args, args.out), text)
    else:
        sys.stdout.write(text)


def _experiment_config(parser, args) -> ExperimentConfig:
    data = {}
    if args.config:
        with open(args.config) as fh:
            data = json.load(fh)
    for flag, name in (("n", "n"), ("k", "k"), ("c", "c"), ("kappa", "kappa"), ("reps", "n_reps"), ("method", "method")):
        value = getattr(args, flag)
        if value is not None:
            data[name] = value
    if args.seed is not None:
        data["master_seed"] = args.seed
    if data.get("master_seed") is None:
        parser.error(f"{args.command}: --seed is required (no implicit seeding)")
    missing = [f for f in ("n", "k", "c") if f not in data]
    if missing:
        parser.error(f"{args.command}: missing " + ", ".join(f"--{f}" for f in missing))
    return ExperimentConfig.from_dict(data)


def cmd_figure(parser, args) -> None:
    cfg = _experiment_config(parser, args)
    result = run_experiment(cfg, workers=args.threads)
    prefix = args.out_prefix
    grid, dens = result.kde.grid, result.kde.density
    ref = normal_pdf(grid)
    io.write_csv(_out(args, f"{prefix}_kde.csv"), ["grid", "kde_density", "normal_density"], np.column_stack([grid, dens, ref]))
    io.write_json(_out(args, f"{prefix}_summary.json"), result.summary(include_timing=args.timings))
    if not args.no_svg:
        title = f"n={cfg.n}, c={cfg.c:g}, k={cfg.k}"
        io.atomic_write_text(_out(args, f"{prefix}.svg"), io.overlay_svg(grid, dens, ref, title=title))
    log.info("ks=%.4f sup_gap=%.4f", result.ks_vs_normal, result.sup_density_gap)


def cmd_benchmark(parser, args) -> None:
    seed = _require_seed(parser, args)
    c = args.c if args.c is not None else args.r / args.n
    cfg = ExperimentConfig(n=args.n, k=args.k, c=c, master_seed=seed, n_reps=100)
    if args.r is not None and cfg.r != args.r:
        raise SingwishError(f"cannot represent r={args.r} as round(c*n)")
    io.write_json(_out(args, args.out), benchmark(cfg, n_draws=args.n_draws, repeats=args.repeats))


COMMANDS = {
    "sample": cmd_sample,
    "sample-product": cmd_sample_product,
    "charfn": cmd_charfn,
    "asymptotics": cmd_asymptotics,
    "figure": cmd_figure,
    "benchmark": cmd_benchmark,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(name)s: %(message)s")
    if args.threads == 0:
        args.threads = os.cpu_count() or 1
    if args.threads < 0:
        parser.error("--threads must be non-negative")
    try:
        COMMANDS[args.command](parser, args)
    except SingwishError as exc:
        print(f"singwish: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"singwish: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
