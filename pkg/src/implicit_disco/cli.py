"""Command-line entry points: train, evaluate, predict, grid, compare, report.

Runs are described by a JSON config; relative paths in it are resolved
against the config file's directory.  Exit codes: 0 success, 1 usage or
config error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass, field, fields
from itertools import product
from pathlib import Path
from typing import Dict, List, Optional

from .corpus import (
    CorpusFormatError,
    Dataset,
    TreeError,
    attach_trees,
    filter_for_task,
    label_distribution,
    load_conll_json,
    load_parses,
    load_scheme,
)
from .embeddings import EmbeddingFormatError, WordVectorTable, load_vectors
from .evaluation import PredictionSet, accuracy, bootstrap_test, predict_dataset, render_comparison
from .models import Model, ModelConfig, ModelFormatError
from .training import NumericalError, TrainConfig, grid_search, read_records, render_table, train, write_records

logger = logging.getLogger("implicit_disco")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class ConfigError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


MODEL_KEYS = {f.name for f in fields(ModelConfig)}
TRAIN_KEYS = {f.name for f in fields(TrainConfig)}


@dataclass
class RunConfig:
    scheme: str
    embeddings: List[str]
    train: Optional[str] = None
    dev: Optional[str] = None
    test: Optional[str] = None
    parses: Optional[str] = None
    trees: Optional[str] = None
    out: str = "run"
    seed: int = 0
    jobs: int = 1
    model: Dict = field(default_factory=dict)
    training: Dict = field(default_factory=dict)
    grid: Dict = field(default_factory=dict)

    @classmethod
    def from_file(cls, path, overrides: Optional[dict] = None) -> "RunConfig":
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: invalid JSON ({e})") from None
        for key, value in (overrides or {}).items():
            if value is not None:
                raw[key] = value
        base = path.parent
        unknown = set(raw) - {f.name for f in fields(cls)}
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "scheme" not in raw or "embeddings" not in raw:
            raise ConfigError("config needs 'scheme' and 'embeddings'")
        emb = raw["embeddings"]
        raw["embeddings"] = [emb] if isinstance(emb, str) else list(emb)

        def resolve(p):
            return str(p if Path(p).is_absolute() else base / p)

        for key in ("train", "dev", "test", "parses", "trees", "out"):
            if raw.get(key) is not None:
                raw[key] = resolve(raw[key])
        raw["embeddings"] = [resolve(p) for p in raw["embeddings"]]
        if not _is_builtin(raw["scheme"]) and not Path(raw["scheme"]).is_absolute():
            raw["scheme"] = resolve(raw["scheme"])
        cfg = cls(**raw)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        for key in ("train", "dev", "test", "parses", "trees"):
            p = getattr(self, key)
            if p is not None and not Path(p).exists():
                raise ConfigError(f"{key} file not found: {p}")
        for p in self.embeddings:
            if not Path(p).exists():
                raise ConfigError(f"embedding file not found: {p}")
        try:
            load_scheme(self.scheme)
        except ValueError as e:
            raise ConfigError(str(e)) from None
        bad = set(self.model) - MODEL_KEYS
        if bad:
            raise ConfigError(f"unknown model keys: {sorted(bad)}")
        bad = set(self.training) - TRAIN_KEYS
        if bad:
            raise ConfigError(f"unknown training keys: {sorted(bad)}")

    def train_config(self) -> TrainConfig:
        opts = dict(self.training)
        opts["seed"] = self.seed
        try:
            return TrainConfig.from_dict(opts)
        except (TypeError, ValueError) as e:
            raise ConfigError(f"bad training settings: {e}") from None


def _is_builtin(name: str) -> bool:
    from .corpus import scheme_names

    return name in scheme_names()


def _load_split(cfg: RunConfig, key: str, parses) -> Dataset:
    path = getattr(cfg, key)
    if path is None:
        raise ConfigError(f"config lacks a '{key}' data file")
    instances = load_conll_json(path, parses=parses)
    if cfg.trees:
        instances = attach_trees(instances, cfg.trees)
    ds = filter_for_task(instances, load_scheme(cfg.scheme))
    if len(ds) == 0:
        raise DataError(f"{path}: no instances left after filtering for {ds.scheme.name}")
    return ds


def _model_config(cfg: RunConfig, table: WordVectorTable, n_labels: int, **extra) -> ModelConfig:
    opts = {**cfg.model, **extra, "k": table.dim, "num_labels": n_labels}
    try:
        return ModelConfig(**opts)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"bad model settings: {e}") from None


def _overrides(args) -> dict:
    out = {}
    for key in ("seed", "scheme", "out", "jobs"):
        if getattr(args, key, None) is not None:
            out[key] = getattr(args, key)
    if getattr(args, "embeddings", None) is not None:
        out["embeddings"] = args.embeddings
    return out


def cmd_train(args) -> int:
    cfg = RunConfig.from_file(args.config, _overrides(args))
    parses = load_parses(cfg.parses) if cfg.parses else None
    train_set = _load_split(cfg, "train", parses)
    dev_set = _load_split(cfg, "dev", parses)
    table = load_vectors(cfg.embeddings[0])
    mc = _model_config(cfg, table, len(train_set.scheme))
    model, history = train(train_set, dev_set, mc, cfg.train_config(), table)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    model.save(out / "model.npz")
    (out / "history.json").write_text(json.dumps(history.to_dict(), indent=2) + "\n", encoding="utf-8")
    print(f"best dev accuracy {history.best_dev_accuracy:.4f} at epoch {history.best_epoch}")
    print(f"model written to {out / 'model.npz'}")
    return EXIT_OK


def _load_model(path) -> Model:
    if not Path(path).exists():
        raise ConfigError(f"model file not found: {path}")
    return Model.load(path)


def _eval_inputs(args):
    model = _load_model(args.model)
    if not Path(args.data).exists():
        raise ConfigError(f"data file not found: {args.data}")
    if not Path(args.embeddings).exists():
        raise ConfigError(f"embedding file not found: {args.embeddings}")
    if args.scheme:
        scheme = load_scheme(args.scheme)
    elif model.scheme is not None:
        scheme = model.scheme
    else:
        raise ConfigError("model file carries no label scheme; pass --scheme")
    if model.scheme_name and scheme.name != model.scheme_name:
        raise DataError(f"scheme mismatch: model was trained on {model.scheme_name}, data declared as {scheme.name}")
    if scheme.labels != model.labels:
        raise DataError(f"scheme mismatch: {scheme.name} labels differ from the model's labels")
    table = load_vectors(args.embeddings)
    if table.dim != model.config.k:
        raise DataError(f"embeddings have k={table.dim}, model expects k={model.config.k}")
    instances = load_conll_json(args.data)
    if args.trees:
        instances = attach_trees(instances, args.trees)
    return model, scheme, table, instances


def cmd_evaluate(args) -> int:
    model, scheme, table, instances = _eval_inputs(args)
    ds = filter_for_task(instances, scheme)
    if len(ds) == 0:
        raise DataError(f"{args.data}: no instances left after filtering for {scheme.name}")
    preds = predict_dataset(model, ds, table)
    print(f"accuracy {accuracy(preds):.4f}")
    if args.out:
        preds.save(args.out)
    return EXIT_OK


def cmd_predict(args) -> int:
    model, scheme, table, instances = _eval_inputs(args)
    out = open(args.out, "w", encoding="utf-8") if args.out else sys.stdout
    try:
        for inst in instances:
            if inst.relation_type not in scheme.types or not inst.arg1_tokens or not inst.arg2_tokens:
                continue
            probs = model.probabilities(inst, table)
            row = {"id": inst.id, "predicted": model.labels[int(probs.argmax())], "probabilities": probs.tolist()}
            out.write(json.dumps(row, ensure_ascii=False) + "\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_OK


def _grid_axes(cfg: RunConfig):
    grid = dict(cfg.grid)
    if not grid:
        raise ConfigError("config declares no 'grid' axes")
    rates = grid.pop("learning_rate", None)
    bad = set(grid) - MODEL_KEYS - {"embeddings"}
    if bad:
        raise ConfigError(f"unknown grid axes: {sorted(bad)}")
    for key, values in grid.items():
        if not isinstance(values, list) or not values:
            raise ConfigError(f"grid axis {key!r} must be a non-empty list")
    return grid, rates


def cmd_grid(args) -> int:
    cfg = RunConfig.from_file(args.config, _overrides(args))
    grid, rates = _grid_axes(cfg)
    parses = load_parses(cfg.parses) if cfg.parses else None
    train_set = _load_split(cfg, "train", parses)
    dev_set = _load_split(cfg, "dev", parses)
    test_set = _load_split(cfg, "test", parses) if cfg.test else None
    emb_paths = cfg.embeddings
    if "embeddings" in grid:
        base = Path(args.config).parent
        emb_paths = [p if Path(p).is_absolute() else str(base / p) for p in grid.pop("embeddings")]
        for p in emb_paths:
            if not Path(p).exists():
                raise ConfigError(f"embedding file not found: {p}")
    tc = cfg.train_config()
    records = []
    keys = list(grid)
    for path in emb_paths:
        table = load_vectors(path)
        configs = []
        for combo in product(*(grid[k] for k in keys)):
            extra = dict(zip(keys, combo))
            if extra.get("pooling", cfg.model.get("pooling")) == "last" and extra.get(
                "architecture", cfg.model.get("architecture", "FF")
            ) == "FF":
                continue  # undefined, shown as "-"
            configs.append(_model_config(cfg, table, len(train_set.scheme), **extra))
        recs, _ = grid_search(train_set, dev_set, configs, tc, table, rates=rates, test_set=test_set, jobs=cfg.jobs)
        records.extend(recs)
    for r in records:
        if r.error:
            logger.warning("cell failed: %s", r.error)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    records.sort(key=lambda r: r.sort_key())
    write_records(records, out / "records.jsonl")
    report = render_table(records)
    (out / "report.txt").write_text(report + "\n", encoding="utf-8")
    print(report)
    return EXIT_OK


def cmd_compare(args) -> int:
    for p in (args.a, args.b):
        if not Path(p).exists():
            raise ConfigError(f"prediction file not found: {p}")
    a, b = PredictionSet.load(args.a), PredictionSet.load(args.b)
    try:
        p = bootstrap_test(a, b, n_resamples=args.resamples, seed=args.seed or 0)
    except ValueError as e:
        raise DataError(str(e)) from None
    print(f"accuracy A {accuracy(a):.4f}  B {accuracy(b):.4f}")
    print(f"p = {p:.4f}")
    return EXIT_OK


def cmd_report(args) -> int:
    if args.records:
        print(render_table(read_records(args.records), metric=args.metric))
    if args.predictions:
        rows = []
        for spec in args.predictions:
            name, sep, path = spec.partition("=")
            if not sep:
                raise ConfigError(f"--predictions expects NAME=PATH, got {spec!r}")
            rows.append((name, accuracy(PredictionSet.load(path))))
        rows.sort(key=lambda r: r[1])
        print(render_comparison(rows, args.title or ""))
    if args.distribution:
        if not args.scheme:
            raise ConfigError("--distribution needs --scheme")
        ds = filter_for_task(load_conll_json(args.distribution), load_scheme(args.scheme))
        print(label_distribution(ds).render())
    if not (args.records or args.predictions or args.distribution):
        raise ConfigError("report needs --records, --predictions or --distribution")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="implicit-disco", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def run_flags(p):
        p.add_argument("--config", required=True)
        p.add_argument("--seed", type=int)
        p.add_argument("--scheme")
        p.add_argument("--embeddings")
        p.add_argument("--out")

    p = sub.add_parser("train", help="train one model from a config")
    run_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("grid", help="train every cell of a configuration grid")
    run_flags(p)
    p.add_argument("--jobs", type=int)
    p.set_defaults(func=cmd_grid)

    for name, func, text in (("evaluate", cmd_evaluate, "score a model on labeled data"),
                             ("predict", cmd_predict, "label relations with a model")):
        p = sub.add_parser(name, help=text)
        p.add_argument("--model", required=True)
        p.add_argument("--data", required=True)
        p.add_argument("--embeddings", required=True)
        p.add_argument("--scheme")
        p.add_argument("--trees")
        p.add_argument("--out")
        p.set_defaults(func=func)

    p = sub.add_parser("compare", help="paired bootstrap test between two prediction files")
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("--resamples", type=int, default=10000)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("report", help="render result tables")
    p.add_argument("--records")
    p.add_argument("--metric", choices=("auto", "dev", "test"), default="auto")
    p.add_argument("--predictions", nargs="+", metavar="NAME=PATH")
    p.add_argument("--title")
    p.add_argument("--distribution", metavar="DATA")
    p.add_argument("--scheme")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if not getattr(args, "func", None):
        parser.print_help(sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, CorpusFormatError, EmbeddingFormatError, TreeError, ModelFormatError) as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except (NumericalError, FloatingPointError) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
