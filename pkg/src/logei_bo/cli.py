"""``logei-bo`` command line interface.

Exit codes: 0 success, 2 I/O failure, 64 usage error, 65 data or domain
error, 70 numeric or internal failure (including a failed ``verify`` sweep).
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .acquisition import Incumbent, PosteriorGaussian, Variant, acquisition_array, evaluate, AcquisitionSpec
from .bo import ObjectiveError, run
from .errors import DomainError, LogEIBOError, NumericError
from .gp import Dataset, fit, log_marginal_likelihood, tune_hyperparams
from .oracle import (
    QuadratureConfig,
    ei_integral_mc,
    ei_integral_quadrature,
    log_ei_integral_quadrature,
)
from .persist import ConfigError, RunConfig, RunManifest, fmt17, write_csv, write_jsonl
from .problems import PROBLEMS, get_problem

EXIT_OK = 0
EXIT_IO = 2
EXIT_USAGE = 64
EXIT_DATA = 65
EXIT_SOFTWARE = 70

SEED_ENV = "LOGEI_BO_SEED"

TOLERANCES = {Variant.EI: 1e-8, Variant.LOG_TRANSFORMED_EI: 1e-7}
ABS_FLOOR = 1e-12

DEFAULT_GRID = {
    "mu": [-3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0],
    "sigma": [0.1, 0.5, 1.0, 2.0, 5.0],
    Variant.EI: [-2.0, -1.0, 0.0, 1.0, 2.0],
    Variant.LOG_TRANSFORMED_EI: [0.1, 0.5, 1.0, 2.0, 10.0],
}

VERIFY_HEADER = [
    "mu",
    "sigma",
    "y_star",
    "variant",
    "closed_form",
    "quadrature",
    "mc_estimate",
    "mc_stderr",
    "rel_err",
]

log = logging.getLogger("logei_bo")


class UsageError(LogEIBOError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _parse_grid(text: str, name: str) -> list[float]:
    """``a,b,c`` or ``start:stop:count`` (inclusive linspace)."""
    try:
        if ":" in text:
            parts = text.split(":")
            if len(parts) != 3:
                raise ValueError
            a, b, n = float(parts[0]), float(parts[1]), int(parts[2])
            if n < 1:
                raise ValueError
            values = np.linspace(a, b, n).tolist()
        else:
            values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"invalid --{name} grid {text!r}; use a,b,c or start:stop:count") from None
    if not values or not all(math.isfinite(v) for v in values):
        raise UsageError(f"invalid --{name} grid {text!r}")
    return values


def resolve_seed(flag: int | None, fallback: int | None = None) -> int:
    """Command-line flag, then ``fallback`` (config/manifest), then $LOGEI_BO_SEED, then 0."""
    if flag is not None:
        return flag
    if fallback is not None:
        return fallback
    env = os.environ.get(SEED_ENV)
    if env:
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"{SEED_ENV}={env!r} is not an integer") from None
    return 0


def _rel_err(closed: float, ref: float) -> float:
    diff = abs(closed - ref)
    if diff == 0:
        return 0.0
    return diff / abs(ref) if ref != 0 else math.inf


def verify_rows(
    variants, mus, sigmas, y_stars: dict, cfg: QuadratureConfig, with_mc: bool = True
) -> tuple[list[list], bool]:
    rows, ok = [], True
    for variant in variants:
        tol = TOLERANCES[variant]
        for mu in mus:
            for sigma in sigmas:
                for ys in y_stars[variant]:
                    closed = float(acquisition_array(variant, mu, sigma, ys))
                    if sigma == 0:
                        rows.append([mu, sigma, ys, variant.value, closed] + ["skipped"] * 4)
                        continue
                    post, inc = PosteriorGaussian(mu, sigma), Incumbent(ys)
                    if variant is Variant.EI:
                        ref = ei_integral_quadrature(post, inc, cfg)
                    else:
                        ref = log_ei_integral_quadrature(post, inc, cfg)
                    if with_mc:
                        est, se = ei_integral_mc(post, inc, cfg, variant)
                    else:
                        est = se = "skipped"
                    rel = _rel_err(closed, ref)
                    if abs(closed - ref) > max(tol * abs(ref), ABS_FLOOR):
                        ok = False
                        log.warning(
                            "%s mu=%g sigma=%g y*=%g: closed %r vs quadrature %r",
                            variant.value, mu, sigma, ys, closed, ref,
                        )
                    rows.append([mu, sigma, ys, variant.value, closed, ref, est, se, rel])
    return rows, ok


def cmd_verify(args) -> int:
    variants = (
        [Variant.EI, Variant.LOG_TRANSFORMED_EI]
        if args.variant == "both"
        else [Variant.parse(args.variant)]
    )
    mus = _parse_grid(args.mu, "mu") if args.mu else DEFAULT_GRID["mu"]
    sigmas = _parse_grid(args.sigma, "sigma") if args.sigma else DEFAULT_GRID["sigma"]
    if any(s < 0 for s in sigmas):
        raise UsageError(f"--sigma values must be >= 0, got {min(sigmas)!r}")
    y_stars = {}
    for v in variants:
        y_stars[v] = _parse_grid(args.y_star, "y-star") if args.y_star else DEFAULT_GRID[v]
        if v is Variant.LOG_TRANSFORMED_EI:
            bad = [y for y in y_stars[v] if y <= 0]
            if bad:
                raise UsageError(f"logei needs y* > 0; offending --y-star value {bad[0]!r}")
    try:
        cfg = QuadratureConfig(args.nodes, args.mc_samples, resolve_seed(args.seed, args.mc_seed))
    except DomainError as exc:
        raise UsageError(str(exc)) from None
    rows, ok = verify_rows(variants, mus, sigmas, y_stars, cfg, with_mc=not args.no_mc)
    if args.output:
        write_csv(Path(args.output), VERIFY_HEADER, rows)
    else:
        write_csv(sys.stdout, VERIFY_HEADER, rows)
    n_checked = sum(1 for r in rows if r[5] != "skipped")
    log.info("verify: %d rows, %d checked against quadrature, %s", len(rows), n_checked, "ok" if ok else "FAILED")
    return EXIT_OK if ok else EXIT_SOFTWARE


def cmd_evaluate_acq(args) -> int:
    try:
        spec = AcquisitionSpec(Variant.parse(args.variant), Incumbent(args.y_star))
        value = evaluate(PosteriorGaussian(args.mu, args.sigma), spec)
    except DomainError as exc:
        raise UsageError(str(exc)) from None
    if spec.variant is Variant.LOG_OF_EI:
        print(f"{fmt17(value.value)}\tunderflowed={'true' if value.underflowed else 'false'}")
    else:
        print(fmt17(value.value))
    return EXIT_OK


def _utcnow() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _load_json(path: Path) -> dict:
    text = Path(path).read_text()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(raw, dict):
        raise UsageError(f"{path}: top level must be a JSON object")
    return raw


def cmd_optimize(args) -> int:
    if args.manifest:
        manifest = RunManifest.from_json(Path(args.manifest).read_text())
        problem_name = args.problem or manifest.problem
        raw = dict(manifest.config)
        fallback = manifest.seed
    else:
        if not args.problem:
            raise UsageError("optimize needs a PROBLEM or --manifest")
        problem_name = args.problem
        raw = _load_json(Path(args.config)) if args.config else {}
        fallback = raw.get("seed")
    try:
        problem = get_problem(problem_name)
    except DomainError as exc:
        raise UsageError(str(exc)) from None
    try:
        seed = resolve_seed(args.seed, fallback)
        config = RunConfig.from_dict(raw, seed=seed)
    except ConfigError as exc:
        raise UsageError(f"config schema violation at {exc}") from None

    out = Path(args.output or ".")
    out.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(
        problem=problem.name,
        config=config.to_dict(),
        seed=int(config.bo.seed),
        artifact_version=__version__,
        started_at=_utcnow(),
    )
    t0 = time.perf_counter()
    try:
        records = run(problem, problem.space, config.bo)
    except ObjectiveError as exc:
        write_jsonl(out / "trials.jsonl", exc.records, config.record_timing)
        raise
    wall = time.perf_counter() - t0
    manifest.finished_at = _utcnow()

    write_jsonl(out / "trials.jsonl", records, config.record_timing)
    (out / "manifest.json").write_text(manifest.to_json())
    final = records[-1].incumbent_so_far
    write_csv(
        out / "summary.csv",
        ["problem", "variant", "final_incumbent", "evaluations", "wall_time_s", "known_optimum"],
        [[problem.name, config.bo.acquisition.value, final, len(records), wall, problem.optimum]],
    )
    log.info(
        "optimize %s (%s): best %s after %d evaluations, optimum %s",
        problem.name, config.bo.acquisition.value, fmt17(final), len(records), fmt17(problem.optimum),
    )
    return EXIT_OK


def cmd_fit(args) -> int:
    data = Dataset.from_csv(args.csv)
    seed = resolve_seed(args.seed)
    hp = tune_hyperparams(data, args.log_targets, args.budget, seed=seed)
    model = fit(data, hp, log_targets=args.log_targets)
    result = {
        "hyperparams": hp.to_dict(),
        "log_marginal_likelihood": log_marginal_likelihood(data, hp, args.log_targets),
        "log_targets": bool(args.log_targets),
        "targets": model.targets.tolist(),
        "target_shift": model.target_shift,
        "target_scale": model.target_scale,
        "jitter": model.jitter,
        "seed": seed,
    }
    if args.predict is not None:
        try:
            x = [float(v) for v in args.predict.split(",")]
        except ValueError:
            raise UsageError(f"--predict expects comma-separated numbers, got {args.predict!r}") from None
        if len(x) != data.dim:
            raise UsageError(f"--predict has {len(x)} coordinates, data has {data.dim}")
        post = model.predict(x)
        result["prediction"] = {"x": x, "mu": post.mu, "sigma": post.sigma}
    text = json.dumps(result, indent=2) + "\n"
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help=f"RNG seed (fallback: ${SEED_ENV})")
    common.add_argument("--output", default=argparse.SUPPRESS, help="output file (verify, fit) or directory (optimize)")
    common.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS, help="only print errors")

    parser = _Parser(prog="logei-bo", description=__doc__.splitlines()[0], parents=[common])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("verify", parents=[common], help="closed forms vs quadrature and Monte Carlo")
    p.add_argument("--variant", choices=["ei", "logei", "both"], default="both")
    p.add_argument("--mu", help="grid for mu: a,b,c or start:stop:count (use --mu=-3:3:7)")
    p.add_argument("--sigma", help="grid for sigma")
    p.add_argument("--y-star", dest="y_star", help="grid for y* (default depends on variant)")
    p.add_argument("--nodes", type=int, default=24, help="Gauss-Legendre nodes per panel")
    p.add_argument("--mc-samples", type=int, default=100_000)
    p.add_argument("--mc-seed", type=int, default=None)
    p.add_argument("--no-mc", action="store_true", help="skip the Monte-Carlo column")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("optimize", parents=[common], help="run BO on a built-in problem")
    p.add_argument("problem", nargs="?", help=f"one of {', '.join(sorted(PROBLEMS))}")
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--manifest", help="rerun from a manifest.json")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("evaluate-acq", parents=[common], help="evaluate one acquisition value")
    p.add_argument("mu", type=float)
    p.add_argument("sigma", type=float)
    p.add_argument("y_star", type=float)
    p.add_argument("variant", help="ei, logei or logofei")
    p.set_defaults(func=cmd_evaluate_acq)

    p = sub.add_parser("fit", parents=[common], help="tune and fit a GP on a CSV dataset")
    p.add_argument("csv", help="file with header x1,...,xD,y")
    p.add_argument("--log-targets", action="store_true", help="train on log y")
    p.add_argument("--predict", help="comma-separated query point (use --predict=-1,2)")
    p.add_argument("--budget", type=int, default=8, help="hyperparameter search budget")
    p.set_defaults(func=cmd_fit)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    for name, default in (("seed", None), ("output", None), ("quiet", False)):
        if not hasattr(args, name):
            setattr(args, name, default)
    logging.basicConfig(
        level=logging.ERROR if args.quiet else logging.INFO,
        format="%(name)s: %(message)s",
        stream=sys.stderr,
        force=True,
    )
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"logei-bo: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DomainError as exc:
        print(f"logei-bo: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericError, ObjectiveError) as exc:
        print(f"logei-bo: numeric error: {exc}", file=sys.stderr)
        return EXIT_SOFTWARE
    except OSError as exc:
        print(f"logei-bo: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    raise SystemExit(main())
