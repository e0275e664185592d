"""Command-line front end.

Subcommands: ``gen-model``, ``sweep``, ``verify-theory`` and ``losses``.
Exit codes: 0 success, 2 argument or parse error, 3 constraint violation,
4 I/O error, 5 empty results, 6 theory-audit violation.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Any, Sequence

from .errors import CCAError
from .estimator import read_matrix_csv
from .harness import (
    METRICS,
    CellResult,
    ExperimentConfig,
    results_to_csv,
    results_to_json,
    run_sweep,
)
from .losses import principal_angles
from .population import (
    CanonicalSpec,
    JointCovariance,
    model_from_dict,
    model_to_dict,
    random_spec,
)
from .svgplot import rate_plot_svg
from .theory import (
    RateParams,
    bmatrix_audit,
    hadamard_audit,
    kl_audit,
    metric_identity_audit,
    sample_size_condition,
    wedin_audit,
)

EXIT_OK, EXIT_PARSE, EXIT_CONSTRAINT, EXIT_IO, EXIT_EMPTY, EXIT_AUDIT = 0, 2, 3, 4, 5, 6

log = logging.getLogger("cca_subspace")

DEFAULT_MODEL = {"p1": 10, "p2": 10, "lambdas": [0.9, 0.8, 0.3, 0.1], "k": 2}
_GENERATOR_FIELDS = {"p1", "p2", "lambdas", "k", "kappa_x", "kappa_y", "seed"}
_CONFIG_FIELDS = {
    "model",
    "models",
    "n_grid",
    "replicates",
    "master_seed",
    "k",
    "losses",
    "ridge",
    "center",
    "csv",
    "json",
    "plot",
    "threads",
    "verbosity",
}
DEFAULT_TRIALS = {"kl": 50, "hadamard": 10_000, "wedin": 1000, "bmatrix": 1000, "metric_identities": 1000}


class ConfigError(Exception):
    """Malformed configuration or flags (exit code 2)."""


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # keep argparse's exit code 2, but via our handler
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def _parse_lambdas(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"invalid lambdas {text!r}") from exc


def _padded(lambdas: Sequence[float], p1: int, p2: int) -> list[float]:
    """Zero-pad correlations to min(p1, p2) entries."""
    lam = list(lambdas)
    return lam + [0.0] * max(0, min(p1, p2) - len(lam))


def _generated_spec(doc: dict) -> CanonicalSpec:
    unknown = set(doc) - _GENERATOR_FIELDS
    if unknown:
        raise ConfigError(f"unknown model generator fields: {sorted(unknown)}")
    try:
        p1, p2 = int(doc["p1"]), int(doc["p2"])
        lam = [float(v) for v in doc["lambdas"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"model generator needs p1, p2 and lambdas: {exc}") from exc
    return random_spec(
        p1,
        p2,
        _padded(lam, p1, p2),
        doc.get("k"),
        float(doc.get("kappa_x", 1.0)),
        float(doc.get("kappa_y", 1.0)),
        doc.get("seed", 0),
    )


def _load_model_entry(entry: Any, base: Path) -> CanonicalSpec:
    if isinstance(entry, str):
        path = Path(entry) if Path(entry).is_absolute() else base / entry
        entry = json.loads(path.read_text())
    if not isinstance(entry, dict):
        raise ConfigError("a model must be a JSON object or a path to one")
    if "frame_u" in entry or "sigma_xy" in entry:
        try:
            model = model_from_dict(entry)
        except CCAError as exc:
            if "unknown model fields" in str(exc) or "missing model fields" in str(exc):
                raise ConfigError(str(exc)) from exc
            raise
        if isinstance(model, JointCovariance):
            raise ConfigError("sweeps need a canonical spec (lambdas, frames, k), not raw blocks")
        return model
    return _generated_spec(entry)


def load_config(path: str | Path, seed: int | None = None) -> tuple[ExperimentConfig, dict]:
    """Parse a sweep configuration file strictly.

    Returns the experiment config and the remaining CLI-level settings
    (output paths, threads, verbosity).
    """
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(doc) - _CONFIG_FIELDS
    if unknown:
        raise ConfigError(f"unknown config fields: {sorted(unknown)}")
    if "model" in doc and "models" in doc:
        raise ConfigError("give either 'model' or 'models', not both")
    if "n_grid" not in doc or "replicates" not in doc:
        raise ConfigError("config needs 'n_grid' and 'replicates'")
    entries = doc.get("models", [doc["model"]] if "model" in doc else [DEFAULT_MODEL])
    if not isinstance(entries, list) or not entries:
        raise ConfigError("'models' must be a non-empty list")
    models = tuple(_load_model_entry(e, path.parent) for e in entries)
    losses = doc.get("losses", list(METRICS))
    if not isinstance(losses, list):
        raise ConfigError("'losses' must be a list")
    try:
        cfg = ExperimentConfig(
            models=models,
            n_grid=tuple(int(n) for n in doc["n_grid"]),
            replicates=int(doc["replicates"]),
            master_seed=int(seed if seed is not None else doc.get("master_seed", 0)),
            k=doc.get("k"),
            losses=tuple(losses),
            ridge=float(doc.get("ridge", 0.0)),
            center=bool(doc.get("center", False)),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, CCAError):
            raise
        raise ConfigError(f"bad config value: {exc}") from exc
    extra = {key: doc[key] for key in ("csv", "json", "plot", "threads", "verbosity") if key in doc}
    return cfg, extra


def _threads(flag: int | None, extra: dict) -> int:
    if flag is not None:
        return flag
    if "threads" in extra:
        return int(extra["threads"])
    env = os.environ.get("CCA_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ConfigError(f"CCA_THREADS must be an integer, got {env!r}") from exc
    return 1


def _write(path: str | Path, text: str) -> None:
    Path(path).write_text(text)


# ---------------------------------------------------------------- commands


def cmd_gen_model(args: argparse.Namespace) -> int:
    lam = _padded(args.lambdas, args.p1, args.p2)
    spec = random_spec(args.p1, args.p2, lam, args.k, args.kappa_x, args.kappa_y, args.seed)
    text = json.dumps(model_to_dict(spec), indent=2) + "\n"
    summary = [
        f"p1 = {spec.p1}, p2 = {spec.p2}, k = {spec.k}",
        f"Delta = {spec.delta:.6g}",
        f"kappa_x = {spec.kappa_x:.6g}, kappa_y = {spec.kappa_y:.6g}",
    ]
    if spec.k < min(spec.p1, spec.p2):
        rp = RateParams(spec.p1, spec.p2, args.ref_n, spec.k, spec.lambda_k, spec.lambda_k1)
        summary.append(f"sample_size_condition(n = {args.ref_n}) = {sample_size_condition(rp):.6g}")
    if args.out:
        _write(args.out, text)
        print("\n".join(summary))
    else:
        sys.stdout.write(text)
        print("\n".join(summary), file=sys.stderr)
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    cfg, extra = load_config(args.config, args.seed)
    if "verbosity" in extra:
        log.setLevel(logging.WARNING - 10 * min(int(extra["verbosity"]), 2))
    threads = _threads(args.threads, extra)
    log.info("running %d cells with %d thread(s)", len(cfg.cells()), threads)
    results = run_sweep(cfg, threads=threads)
    ok = [r for r in results if isinstance(r, CellResult)]
    for r in results:
        if not isinstance(r, CellResult):
            log.warning("cell failed: %s", r)
    csv_text = results_to_csv(results)
    out = args.out or extra.get("csv")
    if out:
        _write(out, csv_text)
    else:
        sys.stdout.write(csv_text)
    json_path = args.json or extra.get("json")
    if json_path:
        _write(json_path, results_to_json(results))
    plot = args.plot or extra.get("plot")
    if plot:
        _write(plot, rate_plot_svg(ok))
    return EXIT_OK if ok else EXIT_EMPTY


def cmd_verify_theory(args: argparse.Namespace) -> int:
    selected = [name for name in DEFAULT_TRIALS if getattr(args, name)]
    if not selected:
        selected = list(DEFAULT_TRIALS)
    corrupt = {"A2": args.corrupt_a2_bound} if args.corrupt_a2_bound is not None else None
    runners = {
        "kl": lambda t, s: kl_audit(t, s),
        "hadamard": lambda t, s: hadamard_audit(t, s, corrupt),
        "wedin": lambda t, s: wedin_audit(t, s),
        "bmatrix": lambda t, s: bmatrix_audit(t, s),
        "metric_identities": lambda t, s: metric_identity_audit(t, s),
    }
    reports = []
    for name in selected:
        trials = args.trials if args.trials is not None else DEFAULT_TRIALS[name]
        log.info("audit %s with %d trials", name, trials)
        reports.append(runners[name](trials, args.seed).to_dict())
    violations = sum(r["violations"] for r in reports)
    doc = {"seed": args.seed, "violations": violations, "audits": reports}
    if not args.full_report:
        for r in reports:
            r["reference_values"].pop("report", None)
    text = json.dumps(doc, indent=2, default=float) + "\n"
    if args.out:
        _write(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_AUDIT if violations else EXIT_OK


def _rounded(value: Any, digits: int) -> Any:
    if isinstance(value, list):
        return [_rounded(v, digits) for v in value]
    if isinstance(value, float):
        return round(value, digits) + 0.0
    return value


def cmd_losses(args: argparse.Namespace) -> int:
    u1 = read_matrix_csv(args.u1, args.header)
    u2 = read_matrix_csv(args.u2, args.header)
    sx = read_matrix_csv(args.sigma_x, args.header) if args.sigma_x else None
    dist = principal_angles(u1, u2, sx)
    doc = {key: _rounded(v, args.digits) for key, v in dist.to_dict().items()}
    sys.stdout.write(json.dumps(doc, indent=2) + "\n")
    return EXIT_OK


# ---------------------------------------------------------------- entry point


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cca-subspace", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more logging")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen-model", help="write a random canonical model as JSON")
    g.add_argument("--p1", type=int, required=True)
    g.add_argument("--p2", type=int, required=True)
    g.add_argument("--lambdas", type=_parse_lambdas, required=True, help="comma-separated, descending")
    g.add_argument("--k", type=int, required=True)
    g.add_argument("--kappa-x", type=float, default=1.0)
    g.add_argument("--kappa-y", type=float, default=1.0)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--ref-n", type=int, default=1000, help="sample size for the printed condition ratio")
    g.add_argument("--out", help="output path (stdout if omitted)")
    g.set_defaults(func=cmd_gen_model)

    s = sub.add_parser("sweep", help="run a Monte-Carlo rate sweep from a JSON config")
    s.add_argument("config")
    s.add_argument("--out", help="CSV output path (stdout if omitted)")
    s.add_argument("--json", help="JSON mirror of the results")
    s.add_argument("--plot", help="SVG rate plot")
    s.add_argument("--seed", type=int, help="override master_seed")
    s.add_argument("--threads", type=int, help="worker threads (default: CCA_THREADS or 1)")
    s.set_defaults(func=cmd_sweep)

    v = sub.add_parser("verify-theory", help="randomized audits of closed forms and bounds")
    v.add_argument("--kl", action="store_true")
    v.add_argument("--hadamard", action="store_true")
    v.add_argument("--wedin", action="store_true")
    v.add_argument("--bmatrix", action="store_true")
    v.add_argument("--metric-identities", dest="metric_identities", action="store_true")
    v.add_argument("--trials", type=int)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--out", help="JSON report path (stdout if omitted)")
    v.add_argument("--full-report", action="store_true", help=argparse.SUPPRESS)
    v.add_argument("--corrupt-a2-bound", type=float, help=argparse.SUPPRESS)
    v.set_defaults(func=cmd_verify_theory)

    lo = sub.add_parser("losses", help="principal angles between two reduction matrices")
    lo.add_argument("--u1", required=True)
    lo.add_argument("--u2", required=True)
    lo.add_argument("--sigma-x")
    lo.add_argument("--header", action="store_true", help="CSV files have a header row")
    lo.add_argument("--digits", type=int, default=12, help="decimal places in the output")
    lo.set_defaults(func=cmd_losses)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s: %(message)s"
    )
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except CCAError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONSTRAINT
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO if isinstance(exc, OSError) else EXIT_PARSE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
