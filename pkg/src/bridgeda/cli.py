"""Command-line entry points.

Subcommands: gen-data (synthesize datasets from a spec file), measure
(pairwise divergence between dataset files), train (source-only, pada,
or cfgan from a run config), eval (score a saved classifier on a
dataset), plot (SVG figures from logs, datasets, or measure reports).

Exit codes: 0 success, 1 usage error, 2 validation error (bad config or
input files), 3 runtime or numeric failure during compute. Usage errors
print to stderr; results print to stdout as JSON.

The default output directory is `--out` if given, else the report
section of the run config, else $BRIDGEDA_OUT, else the working
directory.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Dict, List, Optional, Sequence

from .config import (
    RunConfig,
    cfgan_config,
    load_run_config,
    pada_config,
    parse_data_section,
    serialize_run_config,
)
from .divergence import DistanceReport, proxy_a_distance, validate_bridge
from .errors import (
    ConfigError,
    ContractError,
    DataFormatError,
    DimensionError,
    EstimationError,
    LabelError,
    NumericDomainError,
    ToolkitError,
    TrainingError,
    ValidationError,
)
from .pipelines import (
    evaluate,
    load_model,
    read_metrics,
    save_model,
    train_cfgan,
    train_pada,
    train_source_only,
    write_metrics,
)
from .plots import emit_plot
from .synthdata import (
    DomainDataset,
    gen_domain_triple,
    gen_translation_task,
    read_dataset,
    read_dataset_groups,
    write_dataset,
    write_datasets,
)

__all__ = ["cli_dispatch", "main"]

OUT_ENV = "BRIDGEDA_OUT"

_USAGE_EXIT = 1
_VALIDATION_EXIT = 2
_RUNTIME_EXIT = 3

_VALIDATION_ERRORS = (
    ConfigError,
    ContractError,
    DataFormatError,
    DimensionError,
    LabelError,
    ValidationError,
)
_RUNTIME_ERRORS = (
    EstimationError,
    NumericDomainError,
    TrainingError,
    FloatingPointError,
)


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse with usage failures routed to exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise _UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="bridgeda", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", metavar="command")

    p = sub.add_parser("gen-data", help="generate datasets from a data spec file")
    p.add_argument("--spec", required=True, help="JSON data section file")
    p.add_argument("--out", default=None, help="output directory")

    p = sub.add_parser("measure", help="divergence between dataset files")
    p.add_argument("--a", required=True, help="first dataset file")
    p.add_argument("--b", required=True, help="second dataset file")
    p.add_argument("--c", default=None, help="optional third dataset file")
    p.add_argument("--metric", required=True, choices=("adist", "mmd"))
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("train", help="run a training pipeline")
    p.add_argument("method", choices=("source-only", "pada", "cfgan"))
    p.add_argument("--config", required=True, help="JSON run config file")
    p.add_argument("--out", default=None, help="output directory")

    p = sub.add_parser("eval", help="score a saved classifier on a dataset")
    p.add_argument("--model", required=True, help="directory holding model.json")
    p.add_argument("--data", required=True, help="dataset file with labels")

    p = sub.add_parser("plot", help="emit an SVG figure")
    p.add_argument("--log", required=True, help="metrics log, dataset, or measure report")
    p.add_argument("--out", required=True, help="output SVG path")
    p.add_argument("--kind", default="curves",
                   choices=("curves", "scatter2d", "distance_bars"))
    p.add_argument("--metric", default="adist", choices=("adist", "mmd"))
    return parser


def _out_dir(flag: Optional[str], run: Optional[RunConfig] = None) -> str:
    if flag:
        return flag
    if run is not None and run.report.out_dir:
        return run.report.out_dir
    return os.environ.get(OUT_ENV) or "."


def _emit(obj) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True))


def _cmd_gen_data(args) -> int:
    with open(args.spec, "r", encoding="utf-8") as fh:
        try:
            section = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{args.spec}: not valid JSON: {exc}") from None
    data = parse_data_section(section)
    if data.kind == "files":
        raise ConfigError("gen-data: spec points at existing files; nothing to generate")
    out = _out_dir(args.out)
    os.makedirs(out, exist_ok=True)
    written: List[str] = []
    if data.kind == "triple":
        tri = gen_domain_triple(data.triple)
        for name, ds in (("source", tri.source), ("bridge", tri.bridge),
                         ("target", tri.target)):
            path = os.path.join(out, f"{name}.csv")
            write_dataset(path, ds)
            written.append(path)
        sealed = os.path.join(out, "sealed_labels.csv")
        write_datasets(sealed, [tri.sealed["bridge"], tri.sealed["target"]])
        written.append(sealed)
    else:
        task = gen_translation_task(data.translation)
        for name in ("source", "bridge", "target"):
            path = os.path.join(out, f"{name}.csv")
            write_dataset(path, task[name])
            written.append(path)
    _emit({"written": written})
    return 0


def _cmd_measure(args) -> int:
    feats_a = read_dataset(args.a).features
    feats_b = read_dataset(args.b).features
    if args.c is None:
        report = proxy_a_distance(feats_a, feats_b, seed=args.seed, pair=("a", "b"))
        _emit({"metric": args.metric, "reports": [report.to_dict()]})
        return 0
    feats_c = read_dataset(args.c).features
    verdict, reports = validate_bridge(
        feats_a, feats_b, feats_c, metric=args.metric, seed=args.seed
    )
    _emit({
        "metric": args.metric,
        "reports": [r.to_dict() for r in reports],
        "bridge_verdict": verdict,
    })
    return 0


def _load_domains(run: RunConfig):
    """Datasets named by the run config: (train domains, labeled eval views)."""
    data = run.data
    if data.kind == "triple":
        tri = gen_domain_triple(data.triple)
        train = {"source": tri.source, "bridge": tri.bridge.unlabeled(),
                 "target": tri.target.unlabeled()}
        eval_data = {"source": tri.source, **tri.sealed}
        return train, eval_data
    if data.kind == "translation":
        task = gen_translation_task(data.translation)
        return dict(task), {}
    paths = dict(zip(("source", "bridge", "target"), data.files))
    loaded = {name: read_dataset(path) for name, path in paths.items()}
    train = {"source": loaded["source"],
             "bridge": loaded["bridge"].unlabeled(),
             "target": loaded["target"].unlabeled()}
    eval_data = {name: ds for name, ds in loaded.items() if ds.labels is not None}
    return train, eval_data


def _cmd_train(args) -> int:
    run = load_run_config(args.config)
    out = _out_dir(args.out, run)
    os.makedirs(out, exist_ok=True)
    train_domains, eval_data = _load_domains(run)

    if args.method == "cfgan":
        model, records = train_cfgan(train_domains, cfgan_config(run))
    else:
        cfg = pada_config(run)
        source = train_domains["source"]
        if source.labels is None:
            raise LabelError("train: source dataset carries no labels")
        if args.method == "source-only":
            model, records = train_source_only(source, cfg, eval_data or None)
        else:
            model, records = train_pada(
                source, train_domains["bridge"], train_domains["target"],
                cfg, eval_data or None,
            )

    log_path = os.path.join(out, "metrics.jsonl")
    write_metrics(log_path, records)
    model_path = os.path.join(out, "model.json")
    save_model(model, model_path)
    with open(os.path.join(out, "config.json"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(serialize_run_config(run))
    if run.report.curves:
        emit_plot(records, "curves", os.path.join(out, "curves.svg"))
    if run.report.scatter and args.method != "cfgan":
        plottable = {n: d for n, d in train_domains.items() if d.dim >= 2}
        if plottable:
            emit_plot(plottable, "scatter2d", os.path.join(out, "scatter.svg"))

    summary: Dict[str, object] = {"out": out, "records": len(records)}
    if args.method != "cfgan" and eval_data:
        summary["accuracy"] = evaluate(model, eval_data)
    elif records:
        summary["final_losses"] = records[-1].losses
    _emit(summary)
    return 0


def _cmd_eval(args) -> int:
    model_path = os.path.join(args.model, "model.json")
    if not os.path.exists(model_path):
        model_path = args.model
    model = load_model(model_path)
    if not hasattr(model, "predict"):
        raise ValidationError("eval: saved model is not a classifier")
    groups = read_dataset_groups(args.data)
    labeled = {name: ds for name, ds in groups.items() if ds.labels is not None}
    if not labeled:
        raise LabelError(f"{args.data}: no labeled domain to score")
    _emit({"accuracy": evaluate(model, labeled)})
    return 0


def _cmd_plot(args) -> int:
    if args.kind == "curves":
        payload = read_metrics(args.log)
    elif args.kind == "scatter2d":
        payload = read_dataset_groups(args.log)
    else:
        with open(args.log, "r", encoding="utf-8") as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise DataFormatError(f"{args.log}: not valid JSON: {exc}") from None
        entries = doc.get("reports") if isinstance(doc, dict) else doc
        if not isinstance(entries, list):
            raise DataFormatError(f"{args.log}: expected a measure report document")
        payload = [DistanceReport.from_dict(e) for e in entries]
    emit_plot(payload, args.kind, args.out, metric=args.metric)
    _emit({"written": [args.out]})
    return 0


_COMMANDS = {
    "gen-data": _cmd_gen_data,
    "measure": _cmd_measure,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "plot": _cmd_plot,
}


def cli_dispatch(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError:
        return _USAGE_EXIT
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return _USAGE_EXIT
    try:
        return _COMMANDS[args.command](args)
    except _VALIDATION_ERRORS as exc:
        print(f"bridgeda {args.command}: {exc}", file=sys.stderr)
        return _VALIDATION_EXIT
    except FileNotFoundError as exc:
        print(f"bridgeda {args.command}: {exc}", file=sys.stderr)
        return _VALIDATION_EXIT
    except _RUNTIME_ERRORS as exc:
        print(f"bridgeda {args.command}: {exc}", file=sys.stderr)
        return _RUNTIME_EXIT
    except ToolkitError as exc:
        print(f"bridgeda {args.command}: {exc}", file=sys.stderr)
        return _RUNTIME_EXIT


def main() -> None:
    sys.exit(cli_dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
