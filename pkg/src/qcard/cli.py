"""Command-line entry point: ``qcard {ingest,train,eval,hist,fixture}``.

A config file given with ``--config FILE`` holds ``key = value`` lines whose
keys are long option names without the dashes (``episodes = 2000``,
``tie-threshold-scalars = true``); ``#`` starts a comment. Explicit flags
override the file.

Exit codes: 0 success, 1 usage or configuration error, 2 data or parse
error (including partial ingestion), 3 numeric failure.
"""
from __future__ import annotations

import argparse
import csv
import os
import sys
from pathlib import Path

from . import analysis, synthetic
from .errors import NumericError, QCardError, UsageError, WorkloadError
from .postproc import DEFAULT_EPSILON, DEFAULT_THRESHOLD, PostLayer
from .trainer import (
    DEFAULT_LR,
    DEFAULT_LR_DECAY,
    DEFAULT_EPISODES,
    ModelConfig,
    TrainConfig,
    evaluate,
    init_model,
    load_checkpoint,
    save_checkpoint,
    train,
)
from .vqc import AnsatzSpec, EncodingSpec
from .workload import FORMATS, ingest_sql_dir, load_workload, write_digested

LAYER_FLAGS = {
    "linear": "Linear",
    "rational": "Rational",
    "rational-log": "RationalLog",
    "threshold": "Threshold",
    "threshold-ratio": "ThresholdRatio",
    "place-value": "PlaceValue",
    "place-value-neg": "PlaceValueNeg",
}
MODE_FLAGS = {"estimate": "Estimation", "correct": "Correction"}
HIST_PANELS = {
    "Linear": ("Linear", None, 4),
    "Rational": ("Rational", None, 4),
    "RationalLog": ("RationalLog", None, 4),
    "Threshold": ("Threshold", None, 4),
    "ThresholdRatio": ("ThresholdRatio", None, 4),
    "PlaceValue4": ("PlaceValue", 4, 4),
    "PlaceValueNeg4": ("PlaceValueNeg", 4, 4),
    "PlaceValue8": ("PlaceValue", 8, 8),
    "PlaceValueNeg8": ("PlaceValueNeg", 8, 8),
}
DEFAULT_PANELS = [
    "Linear", "Rational", "Threshold", "ThresholdRatio",
    "PlaceValue4", "PlaceValueNeg4", "PlaceValue8", "PlaceValueNeg8",
]


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _default_workers() -> int:
    env = os.environ.get("QCARD_WORKERS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def _split_arg(text: str):
    if text == "full":
        return "full"
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'full' or a fraction, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = _Parser(prog="qcard", description=__doc__.split("\n\n")[0], formatter_class=fmt)
    parser.add_argument("--config", help="key = value file supplying defaults for any long option")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    common = _Parser(add_help=False)
    common.add_argument("--workers", type=int, default=_default_workers(),
                        help="worker threads (env QCARD_WORKERS overrides the core-count default)")

    p = sub.add_parser("ingest", parents=[common], formatter_class=fmt,
                       help="parse queries.sql against CSV tables into a digested workload")
    p.add_argument("--data", required=True, help="directory holding <table>.csv, queries.sql, truths.csv")
    p.add_argument("--out", help="digested output file (default: <data>/workload.jsonl)")
    p.add_argument("--rejects", help="rejects report (default: next to --out, rejects.csv)")

    def model_flags(p):
        p.add_argument("--workload", required=True, help="workload file (or directory for sql+data)")
        p.add_argument("--format", choices=FORMATS, default="digested", help="workload format")

    p = sub.add_parser("train", parents=[common], formatter_class=fmt, help="train a model")
    model_flags(p)
    p.add_argument("--mode", choices=sorted(MODE_FLAGS), default="estimate", help="estimate or correct")
    p.add_argument("--layer", choices=list(LAYER_FLAGS), default="threshold", help="post-processing head")
    p.add_argument("--width", type=int, default=4, help="entries read by place-value heads (4 or 8)")
    p.add_argument("--d", type=float, default=DEFAULT_THRESHOLD, help="threshold for threshold heads")
    p.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON, help="offset for rational heads")
    p.add_argument("--base", type=float, default=2.0, help="initial base for place-value heads")
    p.add_argument("--tie-threshold-scalars", action="store_true",
                   help="threshold-ratio denominator reuses s1 instead of s2")
    p.add_argument("--qubits", type=int, default=6, help="circuit width (table slots)")
    p.add_argument("--layers", type=int, default=16, help="ansatz layers")
    p.add_argument("--max-table-id", type=int, help="tables in the schema (default: from the workload)")
    p.add_argument("--episodes", type=int, default=DEFAULT_EPISODES, help="full-batch Adam steps")
    p.add_argument("--lr", type=float, default=DEFAULT_LR, help="initial learning rate")
    p.add_argument("--lr-decay", type=float, default=DEFAULT_LR_DECAY, help="per-episode lr multiplier")
    p.add_argument("--seed", type=int, default=0, help="run seed")
    p.add_argument("--split", type=_split_arg, default="full", help="'full' or train fraction, e.g. 0.8")
    p.add_argument("--log-every", type=int, default=0, help="print the loss every N episodes (0: never)")
    p.add_argument("--out", default="runs/train", help="output directory")

    p = sub.add_parser("eval", parents=[common], formatter_class=fmt, help="evaluate a checkpoint")
    model_flags(p)
    p.add_argument("--checkpoint", required=True, help="checkpoint.json written by train")
    p.add_argument("--out", default="runs/eval", help="output directory")

    p = sub.add_parser("hist", parents=[common], formatter_class=fmt,
                       help="value distributions of heads under Haar-random states")
    p.add_argument("--panels", nargs="+", choices=list(HIST_PANELS), default=DEFAULT_PANELS,
                   help="heads to sample")
    p.add_argument("--samples", type=int, default=analysis.DEFAULT_SAMPLES, help="Haar samples per head")
    p.add_argument("--bins", type=int, default=analysis.DEFAULT_BINS, help="uniform bins over the observed range")
    p.add_argument("--seed", type=int, default=0, help="sampling seed")
    p.add_argument("--qubits", type=int, help="register size for every panel (default: 4, or 8 for 8-wide)")
    p.add_argument("--d", type=float, default=DEFAULT_THRESHOLD, help="threshold for threshold heads")
    p.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON, help="offset for rational heads")
    p.add_argument("--inputs", choices=["basis", "marginal"], default="basis",
                   help="feed basis-state probabilities or per-qubit marginals")
    p.add_argument("--out", default="runs/hist", help="output directory")

    p = sub.add_parser("fixture", formatter_class=fmt, help="write a synthetic digested workload")
    p.add_argument("--kind", choices=synthetic.KINDS, default="biased", help="workload generator")
    p.add_argument("--queries", type=int, help="number of queries (generator default if omitted)")
    p.add_argument("--bias", type=float, default=1.5, help="log bias of classical estimates (biased)")
    p.add_argument("--seed", type=int, default=0, help="generator seed")
    p.add_argument("--out", required=True, help="output file")
    return parser


def read_config(path: str) -> dict[str, str]:
    values = {}
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    for n, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{n}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        values[key.replace("_", "-")] = value
    return values


def _apply_config(parser: argparse.ArgumentParser, command: str, config: dict[str, str]) -> None:
    subparser = parser._subparsers._group_actions[0].choices[command]
    actions = {a.option_strings[0][2:]: a for a in subparser._actions if a.option_strings}
    defaults = {}
    for key, value in config.items():
        action = actions.get(key)
        if action is None:
            raise UsageError(f"config key {key!r} is not an option of '{command}'")
        if isinstance(action, argparse._StoreTrueAction):
            defaults[action.dest] = value.lower() in ("1", "true", "yes", "on")
        elif action.nargs in ("+", "*"):
            defaults[action.dest] = value.split()
        else:
            defaults[action.dest] = action.type(value) if action.type else value
        action.required = False
    subparser.set_defaults(**defaults)


def parse_args(argv=None) -> argparse.Namespace:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, rest = pre.parse_known_args(argv)
    if known.config:
        command = next((a for a in rest if not a.startswith("-")), None)
        if command in ("ingest", "train", "eval", "hist", "fixture"):
            _apply_config(parser, command, read_config(known.config))
    return parser.parse_args(argv)


def _load(args, n_qubits=None, require_classical=False):
    return load_workload(args.workload, args.format, n_qubits=n_qubits, require_classical=require_classical)


def _summary(report) -> str:
    text = f"mean abs log error {report.mean_abs_log_error:.6g} over {len(report.rows)} queries"
    if report.has_baseline:
        text += (f"; baseline {report.baseline_mean_abs_log_error:.6g}; "
                 f"improvement factor {analysis.format_factor(report.improvement_factor)}")
    return text


def cmd_ingest(args) -> int:
    data = Path(args.data)
    out = Path(args.out) if args.out else data / "workload.jsonl"
    rejects_path = Path(args.rejects) if args.rejects else out.parent / "rejects.csv"
    wl = ingest_sql_dir(data, strict=False)
    for q in wl.queries:
        slots = ", ".join(f"{wl.catalog.names[t - 1]}(t={t}, s={s:.6g})" for t, s in q.slots)
        print(f"{q.query_id}: {slots}  true={q.true_cardinality}"
              + (f" classical={q.classical_estimate}" if q.classical_estimate is not None else ""))
    if wl.queries:
        write_digested(out, wl)
        print(f"wrote {len(wl.queries)} queries to {out}")
    if wl.rejects:
        rejects_path.parent.mkdir(parents=True, exist_ok=True)
        with rejects_path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["query_id", "reason"])
            writer.writerows(wl.rejects)
        for qid, reason in wl.rejects:
            print(f"rejected {qid}: {reason}", file=sys.stderr)
        status = "partial success" if wl.queries else "no query ingested"
        print(f"{status}: {len(wl.rejects)} rejected, listed in {rejects_path}", file=sys.stderr)
        return 2
    return 0


def cmd_train(args) -> int:
    mode = MODE_FLAGS[args.mode]
    wl = _load(args, n_qubits=args.qubits, require_classical=mode == "Correction")
    max_table_id = args.max_table_id or wl.table_count
    if max_table_id < wl.table_count:
        raise UsageError(f"--max-table-id {max_table_id} is below the workload's {wl.table_count} tables")
    kind = LAYER_FLAGS[args.layer]
    scalars = [args.base] if kind.startswith("PlaceValue") else None
    layer = PostLayer(kind, width=args.width if kind.startswith("PlaceValue") else None, scalars=scalars,
                      d=args.d, epsilon=args.epsilon, tie_scalars=args.tie_threshold_scalars)
    config = ModelConfig(mode, EncodingSpec(args.qubits, max_table_id), AnsatzSpec(args.qubits, args.layers),
                         layer, args.seed)
    train_cfg = TrainConfig(args.episodes, args.lr, args.lr_decay, split=args.split, workers=args.workers)
    progress = None
    if args.log_every > 0:
        def progress(ep, value):
            if ep % args.log_every == 0:
                print(f"episode {ep}: loss {value:.6g}", flush=True)
    model, report = train(init_model(config), wl, train_cfg, progress)
    out = Path(args.out)
    save_checkpoint(out / "checkpoint.json", model, train_cfg)
    analysis.emit_report(report, [], out)
    print(_summary(report))
    print(f"wrote {out / 'checkpoint.json'}, {out / 'metrics.csv'}, {out / 'loss_curve.csv'}")
    return 0


def cmd_eval(args) -> int:
    model = load_checkpoint(args.checkpoint)
    cfg = model.config
    wl = _load(args)
    if wl.table_count != cfg.encoding.max_table_id:
        raise WorkloadError(
            f"schema mismatch: workload has {wl.table_count} tables, "
            f"checkpoint encodes table ids up to {cfg.encoding.max_table_id}"
        )
    if wl.max_slots > cfg.encoding.n_qubits:
        raise WorkloadError(
            f"encoding width mismatch: workload needs {wl.max_slots} slots, "
            f"checkpoint has {cfg.encoding.n_qubits} qubits"
        )
    wl.validate(require_classical=cfg.mode == "Correction")
    baseline = "classical" if all(q.classical_estimate is not None for q in wl.queries) else None
    report = evaluate(model, wl, baseline, args.workers)
    out = Path(args.out)
    analysis.emit_report(report, [], out)
    print(_summary(report))
    print(f"wrote {out / 'metrics.csv'}")
    return 0


def cmd_hist(args) -> int:
    histograms = []
    for label in args.panels:
        kind, width, n_qubits = HIST_PANELS[label]
        layer = PostLayer(kind, width=width, d=args.d, epsilon=args.epsilon, label=label)
        hist = analysis.value_distribution(layer, args.qubits or n_qubits, args.samples, args.seed,
                                           args.bins, args.inputs, args.workers)
        histograms.append(hist)
        mode_lo, mode_hi = hist.edges[hist.modal_bin], hist.edges[hist.modal_bin + 1]
        print(f"{label}: range [{hist.min_value:.6g}, {hist.max_value:.6g}], "
              f"modal bin [{mode_lo:.6g}, {mode_hi:.6g}) with {hist.counts[hist.modal_bin]} samples")
    written = analysis.emit_histograms(histograms, args.out)
    print(f"wrote {len(written)} files to {args.out}")
    return 0


def cmd_fixture(args) -> int:
    kwargs = {}
    if args.queries is not None and args.kind != "job-light-shaped":
        kwargs["n_queries"] = args.queries
    if args.kind == "biased":
        kwargs["bias"] = args.bias
    wl = synthetic.make(args.kind, seed=args.seed, **kwargs)
    write_digested(args.out, wl)
    print(f"wrote {len(wl.queries)} {args.kind} queries to {args.out}")
    return 0


COMMANDS = {"ingest": cmd_ingest, "train": cmd_train, "eval": cmd_eval, "hist": cmd_hist, "fixture": cmd_fixture}


def main(argv=None) -> int:
    try:
        try:
            args = parse_args(argv)
        except SystemExit as exc:
            # argparse exits for --help (0) and usage errors (1)
            return exc.code if isinstance(exc.code, int) else 1
        return COMMANDS[args.command](args)
    except NumericError as exc:
        episode = "" if exc.episode is None else f" (episode {exc.episode})"
        print(f"qcard: numeric failure{episode}: {exc}", file=sys.stderr)
        return exc.exit_code
    except QCardError as exc:
        print(f"qcard: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"qcard: error: {exc}", file=sys.stderr)
        return 2
