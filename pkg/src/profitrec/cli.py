"""Command-line entry point.

Exit codes: 0 success, 1 domain or validation failure, 2 I/O or parse failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

from . import __version__
from .config import read_kv, to_bool
from .datagen import PRESETS, config_from_text, describe, generate
from .domain import HyperParams, ValidationError, build_customer_profiles, validate_dataset
from .evaluation import EvaluationError, SplitSpec, evaluate, grid_sweep, time_split
from .io import ParseError, dataset_hash, file_hash, read_dataset, write_dataset
from .mf_baseline import TrainConfig, TrainingError, fit, load_model, save_model
from .reranker import Reranker

_log = logging.getLogger("profitrec")

EXIT_OK, EXIT_DOMAIN, EXIT_IO = 0, 1, 2


class CommandError(Exception):
    def __init__(self, message, code=EXIT_DOMAIN):
        super().__init__(message)
        self.code = code


def _range(text: str) -> tuple[float, float]:
    parts = [float(p) for p in text.split(",")]
    if len(parts) == 1:
        return parts[0], parts[0]
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected 'lo,hi', got {text!r}")
    return parts[0], parts[1]


def _data_args(p):
    p.add_argument("--interactions", type=Path, required=True, help="interactions CSV")
    p.add_argument("--catalog", type=Path, required=True, help="catalog CSV")


def _model_args(p):
    _data_args(p)
    p.add_argument("--model", type=Path, required=True, help="model file written by 'train'")


def _hyper_args(p):
    p.add_argument("--alpha", type=float, default=0.0, help="profit strength in [-1, 1]")
    p.add_argument("--beta", type=float, default=0.0, help="price-preference strength in [-1, 1]")
    p.add_argument("--baseline-only", action="store_true", help="rank by the baseline score alone")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="profitrec", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def command(name, help):
        p = sub.add_parser(name, help=help)
        p.add_argument("--config", type=Path, help="key = value file; command-line flags win")
        return p

    p = command("validate", "check dataset files against the data invariants")
    _data_args(p)
    p.set_defaults(func=cmd_validate)

    p = command("generate", "write a synthetic dataset and its statistics")
    p.add_argument("--preset", choices=sorted(PRESETS), default="ds1")
    p.add_argument("--gen-config", type=Path, help="generator settings (JSON or key = value)")
    p.add_argument("--seed", type=int)
    p.add_argument("--customers", type=int, help="override the number of customers")
    p.add_argument("--items", type=int, help="override the number of items")
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.set_defaults(func=cmd_generate)

    p = command("train", "split the data by time and fit the baseline model")
    _data_args(p)
    p.add_argument("--model", type=Path, required=True, help="output model file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epochs", type=int, default=TrainConfig.epochs)
    p.add_argument("--learning-rate", type=float, default=TrainConfig.learning_rate)
    p.add_argument("--latent-dim", type=int, default=TrainConfig.latent_dim)
    p.add_argument("--max-warp-trials", type=int, default=TrainConfig.max_warp_trials)
    p.add_argument("--regularization", type=float, default=TrainConfig.regularization)
    p.add_argument("--learning-schedule", choices=("adagrad", "sgd"), default=TrainConfig.learning_schedule)
    p.add_argument("--train-fraction", type=float, default=SplitSpec.train_fraction)
    p.add_argument("--per-user-split", action="store_true")
    p.set_defaults(func=cmd_train)

    p = command("recommend", "print the re-ranked Top-N list for one customer")
    _model_args(p)
    _hyper_args(p)
    p.add_argument("--customer", required=True)
    p.add_argument("--n", type=int, default=10)
    p.set_defaults(func=cmd_recommend)

    p = command("evaluate", "ranking and profit metrics for one (alpha, beta)")
    _model_args(p)
    _hyper_args(p)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--literal-pah", action="store_true", help="pooled Profit at Hit over all test users")
    p.add_argument("--out", type=Path, help="also write the row as JSON here")
    p.set_defaults(func=cmd_evaluate)

    p = command("sweep", "evaluate the whole (alpha, beta) grid")
    _model_args(p)
    p.add_argument("--alpha-range", type=_range, default=(-1.0, 1.0), help="lo,hi (default -1,1)")
    p.add_argument("--beta-range", type=_range, default=(-1.0, 1.0), help="lo,hi (default -1,1)")
    p.add_argument("--step", type=float, default=0.1)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--workers", type=int, default=None, help="worker processes (default: CPU count)")
    p.add_argument("--literal-pah", action="store_true")
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.set_defaults(func=cmd_sweep)
    return parser


def _scan(argv):
    """Subcommand name and ``--config`` value, found before full parsing."""
    command = next((t for t in argv if not t.startswith("-")), None)
    config = None
    for n, tok in enumerate(argv):
        if tok == "--config" and n + 1 < len(argv):
            config = argv[n + 1]
        elif tok.startswith("--config="):
            config = tok.split("=", 1)[1]
    return command, config


def _apply_config(sub_parser, path):
    """Install values from a config file as defaults so explicit flags still win."""
    try:
        values = read_kv(path)
    except OSError as e:
        raise CommandError(f"{path}: {e.strerror}", EXIT_IO) from e
    actions = {a.dest: a for a in sub_parser._actions}
    defaults = {}
    for key, raw in values.items():
        action = actions.get(key)
        if action is None or key in ("config", "help"):
            raise CommandError(f"{path}: unknown setting {key!r}")
        if isinstance(action, argparse._StoreTrueAction):
            defaults[key] = to_bool(raw)
        elif action.type is not None:
            try:
                defaults[key] = action.type(raw)
            except (ValueError, argparse.ArgumentTypeError) as e:
                raise CommandError(f"{path}: bad value for {key}: {e}") from None
        else:
            defaults[key] = raw
        action.required = False
    sub_parser.set_defaults(**defaults)


def _load(args):
    d = read_dataset(args.interactions, args.catalog)
    problems = validate_dataset(d)
    if problems:
        raise CommandError(f"dataset has {len(problems)} problem(s), first: {problems[0]}")
    return d


def _manifest_path(model_path: Path) -> Path:
    return model_path.with_name(model_path.name + ".manifest.json")


def _write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _context(args):
    """Dataset, split, model, profiles and manifest for the commands that use a trained model."""
    d = _load(args)
    model = load_model(args.model)
    manifest_file = _manifest_path(args.model)
    if manifest_file.exists():
        manifest = json.loads(manifest_file.read_text())
        split = SplitSpec(**manifest["split"])
        if manifest.get("dataset_sha256") not in (None, dataset_hash(d)):
            _log.warning("dataset differs from the one the model was trained on")
    else:
        manifest, split = {}, SplitSpec()
    train, test = time_split(d, split)
    return d, train, test, model, build_customer_profiles(train), manifest


def _hyper(args) -> HyperParams | None:
    return None if args.baseline_only else HyperParams(args.alpha, args.beta)


def cmd_validate(args) -> int:
    d = read_dataset(args.interactions, args.catalog)
    problems = validate_dataset(d)
    for p in problems:
        print(p)
    return EXIT_DOMAIN if problems else EXIT_OK


def cmd_generate(args) -> int:
    if args.gen_config:
        try:
            cfg = config_from_text(args.gen_config.read_text(encoding="utf-8"))
        except OSError as e:
            raise CommandError(f"{args.gen_config}: {e.strerror}", EXIT_IO) from e
    else:
        cfg = PRESETS[args.preset]
    overrides = {k: v for k, v in (("seed", args.seed), ("n_customers", args.customers),
                                   ("n_items", args.items)) if v is not None}
    if overrides:
        cfg = type(cfg)(**{**asdict(cfg), **overrides})
    d = generate(cfg)
    args.out.mkdir(parents=True, exist_ok=True)
    write_dataset(d, args.out / "interactions.csv", args.out / "catalog.csv")
    _write_json(args.out / "stats.json", describe(d).to_json())
    _write_json(args.out / "generator.json", asdict(cfg))
    print(f"wrote {len(d)} interactions for {len(d.catalog)} items to {args.out}")
    return EXIT_OK


def cmd_train(args) -> int:
    d = _load(args)
    split = SplitSpec(args.train_fraction, args.per_user_split)
    cfg = TrainConfig(
        learning_rate=args.learning_rate, latent_dim=args.latent_dim, epochs=args.epochs,
        max_warp_trials=args.max_warp_trials, seed=args.seed, regularization=args.regularization,
        learning_schedule=args.learning_schedule,
    )
    train, test = time_split(d, split)
    model = fit(train, cfg)
    save_model(model, args.model)
    manifest = {
        "seed": cfg.seed,
        "train_config": asdict(cfg),
        "split": asdict(split),
        "interactions_sha256": file_hash(args.interactions),
        "catalog_sha256": file_hash(args.catalog),
        "dataset_sha256": dataset_hash(d),
        "n_train_events": len(train),
        "n_test_events": len(test),
        "model_sha256": file_hash(args.model),
    }
    _write_json(_manifest_path(args.model), manifest)
    print(f"model written to {args.model}")
    return EXIT_OK


def cmd_recommend(args) -> int:
    if args.n < 1:
        raise CommandError("--n must be at least 1")
    d, train, _, model, profiles, _ = _context(args)
    if model.customer_index(args.customer) is None:
        _log.warning("customer %r unknown to the model; using bias-only cold-start scores", args.customer)
    recs = Reranker(model, profiles, d.catalog).recommend(args.customer, _hyper(args), args.n)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(("customer_id", "rank", "item_id", "baseline_score", "multiplier", "final_score"))
    for rank, s in enumerate(recs, start=1):
        w.writerow((args.customer, rank, s.item_id, repr(s.baseline_score),
                    repr(s.adjusted_multiplier), repr(s.final_score)))
    return EXIT_OK


def cmd_evaluate(args) -> int:
    if args.k < 1:
        raise CommandError("--k must be at least 1")
    d, _, test, model, profiles, _ = _context(args)
    row = evaluate(model, profiles, d.catalog, test, _hyper(args), args.k, literal_pah=args.literal_pah)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(row.CSV_HEADER)
    w.writerow([repr(v) for v in row.csv_values()])
    if args.out:
        _write_json(args.out, row.as_dict())
    return EXIT_OK


def cmd_sweep(args) -> int:
    if args.k < 1:
        raise CommandError("--k must be at least 1")
    d, _, test, model, profiles, manifest = _context(args)
    meta = {
        "seed": manifest.get("seed"),
        "dataset_sha256": dataset_hash(d),
        "model_sha256": file_hash(args.model),
        "train_config": manifest.get("train_config"),
        "split": manifest.get("split"),
    }
    report = grid_sweep(model, profiles, d.catalog, test, args.alpha_range, args.beta_range,
                        args.step, args.k, workers=args.workers, literal_pah=args.literal_pah,
                        metadata=meta)
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "sweep.csv").write_text(report.to_csv(), encoding="utf-8")
    (args.out / "sweep_long.csv").write_text(report.to_long_csv(), encoding="utf-8")
    _write_json(args.out / "sweep.json", report.to_json())
    best = report.best()
    print(f"{len(report.rows)} cells written to {args.out}; best P@{args.k} "
          f"{best.precision_at_k:.4f} at alpha={best.alpha}, beta={best.beta}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    command, config = _scan(argv)
    try:
        subparsers = parser._subparsers._group_actions[0].choices
        if config and command in subparsers:
            _apply_config(subparsers[command], config)
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_IO if e.code not in (0, None) else EXIT_OK
    except (CommandError, ValidationError) as e:
        print(f"error: {e}", file=sys.stderr)
        return getattr(e, "code", EXIT_DOMAIN)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except CommandError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.code
    except (ParseError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    except (ValidationError, TrainingError, EvaluationError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DOMAIN
    except ValueError as e:
        # malformed model files
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
