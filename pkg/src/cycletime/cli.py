"""Command-line front end: ``cycletime <subcommand> [flags]``.

Subcommands
    gen-data     write a synthetic process data CSV
    train-ann    train one network with one algorithm
    train-anfis  train one (MF count, Sugeno order) ANFIS cell
    compare      algorithm / ANFIS comparison tables over several seeds
    predict      cycle time for one input triple or a CSV batch

Every file goes under ``--out-dir``. Exit codes: 0 ok, 2 usage,
3 I/O failure, 4 data or model schema problem. Diverged training runs
are results, not failures, and still exit 0.
"""

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .anfis import ORDERS, FisModel, grid_partition, partition_trace, run_anfis_comparison, train_hybrid
from .ann import DimensionMismatch, NetworkModel, Topology, init_weights
from .dataset import (COLUMNS, ConstantColumn, NormParams, ParseError, SchemaError, _canonical,
                      generate_synthetic, load_csv, split, write_csv)
from .trainers import ALGORITHM_NAMES, ALGORITHMS, TrainConfig, run_comparison, train

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_SCHEMA = 0, 2, 3, 4
REPORT_SCHEMA_VERSION = 1
MIN_ROWS = 10

ANN_TABLE_COLUMNS = ("seed", "training_method", "topology", "number_of_epochs", "training_mse",
                     "test_mse", "network_mse", "r_value", "validation_mse", "stop_reason",
                     "diverged")
ANFIS_TABLE_COLUMNS = ("seed", "number_of_mfs", "sugeno_type", "training_mse", "testing_mse",
                       "validation_mse", "number_of_epochs", "n_rules")


class UsageError(Exception):
    pass


class SchemaProblem(Exception):
    pass


# -- formatting --------------------------------------------------------------

def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def _write_rows(path, header, rows):
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])


def _write_json(path, obj):
    # json renders floats with repr, which round-trips exactly
    path.write_text(json.dumps(obj, indent=2, sort_keys=False) + "\n", encoding="utf-8")


def _write_table(path_stem, fmt, header, rows):
    """Tabular output as CSV or as a JSON list of records."""
    if fmt == "csv":
        path = path_stem.with_suffix(".csv")
        _write_rows(path, header, rows)
    else:
        path = path_stem.with_suffix(".json")
        _write_json(path, [dict(zip(header, r)) for r in rows])
    return path


# -- argument helpers ----------------------------------------------------------

def _parse_seeds(text):
    """``"1..10"``, ``"3,5,8"`` or a mix like ``"1..3,7"``."""
    seeds = []
    try:
        for part in text.split(","):
            part = part.strip()
            if ".." in part:
                lo, hi = (int(v) for v in part.split(".."))
                if hi < lo:
                    raise ValueError
                seeds.extend(range(lo, hi + 1))
            else:
                seeds.append(int(part))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad seed list {text!r}; use e.g. 1..10 or 1,2,3")
    return seeds


def _parse_widths(text):
    try:
        widths = tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad hidden widths {text!r}; use e.g. 8,8")
    if any(w < 1 for w in widths):
        raise argparse.ArgumentTypeError("hidden widths must be positive")
    return widths


def _out_path(out_dir, name):
    """Resolve ``name`` inside ``out_dir``; refuse anything that escapes it."""
    base = Path(out_dir).resolve()
    path = (base / name).resolve()
    if base != path and base not in path.parents:
        raise UsageError(f"output {name!r} would land outside --out-dir {out_dir!r}")
    return path


def _prepare_out_dir(out_dir):
    path = Path(out_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _load_data(args):
    """The one data source: ``--data`` CSV, else the synthetic generator."""
    if args.data:
        data = load_csv(args.data, has_header=not args.no_header)
        source = {"kind": "csv", "path": str(args.data), "rows": len(data)}
    else:
        data = generate_synthetic(args.n, seed=args.seed, noise_sd=args.noise)
        source = {"kind": "synthetic", "n": args.n, "noise_sd": args.noise, "seed": args.seed}
    source["shuffled_split"] = not args.no_shuffle
    if len(data) < MIN_ROWS:
        raise SchemaProblem(f"need at least {MIN_ROWS} rows, got {len(data)}")
    return data, source


# -- subcommands ---------------------------------------------------------------

def cmd_gen_data(args):
    if args.n < MIN_ROWS:
        raise UsageError(f"--n must be at least {MIN_ROWS}, got {args.n}")
    if args.noise < 0:
        raise UsageError("--noise must be non-negative")
    path = _out_path(args.out_dir, args.output)
    _prepare_out_dir(path.parent)
    data = generate_synthetic(args.n, seed=args.seed, noise_sd=args.noise)
    write_csv(data, path)
    print(f"wrote {len(data)} rows to {path} (seed {args.seed})")
    for name, lo, hi in zip(COLUMNS, np.r_[data.inputs.min(0), data.targets.min()],
                            np.r_[data.inputs.max(0), data.targets.max()]):
        print(f"  {name:20s} {lo:10.3f} .. {hi:10.3f}")
    return EXIT_OK


def _ann_artifacts(out, fmt, model, report, source, seed):
    _write_json(out / "ann_model.json", model.to_dict())
    _write_json(out / "ann_report.json", {
        "schema_version": REPORT_SCHEMA_VERSION,
        "kind": "ann_report",
        "seed": seed,
        "data": source,
        "report": report.to_dict(),
    })
    vt = report.validation_trace
    trace_rows = [(i, loss, vt[i] if i < len(vt) else None)
                  for i, loss in enumerate(report.loss_trace)]
    _write_table(out / "ann_loss_trace", fmt, ("epoch", "train_mse_norm", "validation_mse_norm"),
                 trace_rows)
    fit = report.fit
    fit_rows = [(i, p, a, q) for i, (p, a, q) in
                enumerate(zip(fit["partition"], fit["actual"], fit["predicted"]))]
    _write_table(out / "ann_fit", fmt, ("index", "partition", "actual_s", "predicted_s"),
                 fit_rows)


def cmd_train_ann(args):
    if args.epochs < 0 or args.lr <= 0:
        raise UsageError("--epochs must be >= 0 and --lr positive")
    data, source = _load_data(args)
    out = _prepare_out_dir(args.out_dir)
    topology = Topology(data.n_inputs, args.hidden, 1)
    norm = NormParams.fit(data)
    parts = split(data, seed=args.seed, shuffle=not args.no_shuffle)
    config = TrainConfig(args.algo, max_epochs=args.epochs, lr=args.lr, seed=args.seed)
    model, report = train(init_weights(topology, args.seed, norm), parts, config)
    _ann_artifacts(out, args.format, model, report, source, args.seed)
    status = " (diverged)" if report.diverged else ""
    print(f"{report.algorithm} {topology.label()} seed {args.seed}: {report.epochs_run} epochs, "
          f"stop {report.stop_reason}{status}, network MSE {report.network_mse:.6g} s^2")
    return EXIT_OK


def cmd_train_anfis(args):
    if args.mfs < 2:
        raise UsageError(f"--mfs must be at least 2, got {args.mfs}")
    if args.epochs < 1:
        raise UsageError("--epochs must be at least 1")
    data, source = _load_data(args)
    out = _prepare_out_dir(args.out_dir)
    norm = NormParams.fit(data)
    parts = split(data, ratios=(2 / 3, 1 / 6, 1 / 6), seed=args.seed,
                  shuffle=not args.no_shuffle)
    fis0 = grid_partition([(-1.0, 1.0)] * data.n_inputs, args.mfs, args.order, norm)
    fis, report = train_hybrid(fis0, parts, epochs=args.epochs, lr_premise=args.lr_premise,
                               seed=args.seed)
    _write_json(out / "anfis_model.json", fis.to_dict())
    _write_json(out / "anfis_report.json", {
        "schema_version": REPORT_SCHEMA_VERSION,
        "kind": "anfis_report",
        "seed": args.seed,
        "data": source,
        "n_rules": fis.n_rules,
        "report": report.to_dict(),
    })
    _write_table(out / "anfis_test_trace", args.format, ("index", "actual_s", "predicted_s"),
                 partition_trace(report, "test"))
    print(f"{report.algorithm} ({fis.n_rules} rules) seed {args.seed}: "
          f"{report.epochs_run} epochs, train MSE {report.train_mse:.6g}, "
          f"test MSE {report.test_mse:.6g} s^2")
    return EXIT_OK


def _ann_rows(reports):
    rows = []
    for r in reports:
        rows.append((r.seed, r.algorithm, r.details.get("topology"), r.epochs_run, r.train_mse,
                     r.test_mse, r.network_mse, r.r_value, r.validation_mse, r.stop_reason,
                     r.diverged))
    return rows


def _anfis_rows(reports):
    return [(r.seed, r.details["n_mfs"][0], r.details["order"], r.train_mse, r.test_mse,
             r.validation_mse, r.epochs_run, r.details["n_rules"]) for r in reports]


def cmd_compare(args):
    if args.epochs < 0 or args.anfis_epochs < 1:
        raise UsageError("--epochs must be >= 0 and --anfis-epochs >= 1")
    data, source = _load_data(args)
    out = _prepare_out_dir(args.out_dir)
    seeds = args.seeds or [args.seed]
    summary = {"schema_version": REPORT_SCHEMA_VERSION, "kind": "comparison", "seed": args.seed,
               "seeds": seeds, "data": source}
    written = []
    if args.suite in ("ann", "all"):
        topology = Topology(data.n_inputs, args.hidden, 1)
        configs = [TrainConfig(a, max_epochs=args.epochs) for a in ALGORITHMS]
        reps = run_comparison(data, topology, seeds=seeds, configs=configs,
                              shuffle=not args.no_shuffle)
        written.append(_write_table(out / "compare_ann", args.format, ANN_TABLE_COLUMNS,
                                    _ann_rows(reps)))
        summary["ann"] = [r.to_dict() for r in reps]
    if args.suite in ("anfis", "all"):
        reps = []
        for s in seeds:
            reps.extend(run_anfis_comparison(data, seed=s, epochs=args.anfis_epochs,
                                             shuffle=not args.no_shuffle))
        written.append(_write_table(out / "compare_anfis", args.format, ANFIS_TABLE_COLUMNS,
                                    _anfis_rows(reps)))
        summary["anfis"] = [r.to_dict() for r in reps]
    if args.format == "csv":
        _write_json(out / "compare.json", summary)
        written.append(out / "compare.json")
    for p in written:
        print(f"wrote {p}")
    return EXIT_OK


def _load_model(path, expect):
    try:
        d = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaProblem(f"{path}: not valid JSON ({exc})")
    kind = d.get("model_kind") if isinstance(d, dict) else None
    if kind not in ("ann", "anfis"):
        raise SchemaProblem(f"{path}: unknown model_kind {kind!r}")
    if expect and kind != expect:
        raise SchemaProblem(f"{path}: expected model_kind {expect!r}, file holds {kind!r}")
    try:
        return NetworkModel.from_dict(d) if kind == "ann" else FisModel.from_dict(d)
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaProblem(f"{path}: malformed {kind} model ({exc})")


def _read_batch(path):
    """Rows of a CSV with the three input columns (extra columns kept)."""
    with Path(path).open(newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if any(c.strip() for c in r)]
    if not rows:
        raise SchemaError(f"{path}: empty file")
    header = rows[0]
    canon = [_canonical(h) for h in header]
    missing = [c for c in COLUMNS[:3] if c not in canon]
    if missing:
        raise SchemaError(f"{path}: missing columns {missing}")
    idx = [canon.index(c) for c in COLUMNS[:3]]
    X = np.empty((len(rows) - 1, 3))
    for i, row in enumerate(rows[1:]):
        for k, j in enumerate(idx):
            try:
                X[i, k] = float(row[j])
            except (IndexError, ValueError):
                raise ParseError(f"{path}: row {i + 2}, column {COLUMNS[k]}: not a number",
                                 row=i + 2, column=COLUMNS[k]) from None
    return header, rows[1:], X


def cmd_predict(args):
    model = _load_model(args.model, args.kind)
    if args.x is not None:
        y = float(model.predict(np.array([args.x]))[0])
        print(format(y, ".17g"))
        return EXIT_OK
    header, rows, X = _read_batch(args.input)
    y = model.predict(X) if len(X) else np.empty(0)
    path = _out_path(args.out_dir, args.output)
    _prepare_out_dir(path.parent)
    if args.format == "csv":
        _write_rows(path.with_suffix(".csv"), [*header, "predicted_cycle_time"],
                    [[*r, float(v)] for r, v in zip(rows, y)])
    else:
        _write_json(path.with_suffix(".json"),
                    [dict(zip([*header, "predicted_cycle_time"], [*r, float(v)]))
                     for r, v in zip(rows, y)])
    print(f"wrote {len(y)} predictions to {path.with_suffix('.' + args.format)}")
    return EXIT_OK


# -- parser --------------------------------------------------------------------

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=42, help="random seed (default 42)")
    common.add_argument("--out-dir", default=".", help="directory for every output file")
    common.add_argument("--format", choices=("csv", "json"), default="csv",
                        help="format of tabular outputs (reports and models are always JSON)")

    data = argparse.ArgumentParser(add_help=False)
    data.add_argument("--data", help="process data CSV; omit to use the synthetic generator")
    data.add_argument("--no-header", action="store_true",
                      help="CSV has no header; take the first four columns by position")
    data.add_argument("--n", type=int, default=600, help="synthetic rows (default 600)")
    data.add_argument("--noise", type=float, default=0.1, help="synthetic noise sd [s]")
    data.add_argument("--no-shuffle", action="store_true",
                      help="split rows in file order instead of a seeded random permutation")

    parser = argparse.ArgumentParser(prog="cycletime", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", parents=[common], help="write synthetic process data")
    p.add_argument("--n", type=int, default=600)
    p.add_argument("--noise", type=float, default=0.1)
    p.add_argument("-o", "--output", default="data.csv", help="file name inside --out-dir")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train-ann", parents=[common, data], help="train one network")
    p.add_argument("--algo", choices=ALGORITHMS, default="br",
                   help="training algorithm: " + ", ".join(
                       f"{a} ({ALGORITHM_NAMES[a]})" for a in ALGORITHMS))
    p.add_argument("--hidden", type=_parse_widths, default=(8, 8),
                   help="hidden layer widths, e.g. 8,8")
    p.add_argument("--epochs", type=int, default=1000)
    p.add_argument("--lr", type=float, default=0.01, help="learning rate for gd/gdm")
    p.set_defaults(func=cmd_train_ann)

    p = sub.add_parser("train-anfis", parents=[common, data], help="train one ANFIS")
    p.add_argument("--mfs", type=int, default=2, help="membership functions per input")
    p.add_argument("--order", choices=ORDERS, default="linear", help="Sugeno consequent order")
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--lr-premise", type=float, default=0.01)
    p.set_defaults(func=cmd_train_anfis)

    p = sub.add_parser("compare", parents=[common, data], help="comparison tables")
    p.add_argument("--suite", choices=("ann", "anfis", "all"), default="all")
    p.add_argument("--seeds", type=_parse_seeds, help="run seeds, e.g. 1..10 (default: --seed)")
    p.add_argument("--hidden", type=_parse_widths, default=(8, 8))
    p.add_argument("--epochs", type=int, default=1000, help="epoch cap for the ANN runs")
    p.add_argument("--anfis-epochs", type=int, default=100)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("predict", parents=[common], help="predict cycle time")
    p.add_argument("--model", required=True, help="model JSON from train-ann or train-anfis")
    p.add_argument("--kind", choices=("ann", "anfis"), help="require this model_kind")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--x", type=float, nargs=3, metavar=("TEMP", "INJ", "SWITCH"),
                     help="one input triple in original units")
    src.add_argument("--input", help="CSV with mould_temp, injection_pressure, "
                                     "switchover_pressure columns")
    p.add_argument("-o", "--output", default="predictions",
                   help="batch output name inside --out-dir (extension from --format)")
    p.set_defaults(func=cmd_predict)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)  # argparse itself exits 2 on bad flags
    try:
        return args.func(args)
    except UsageError as exc:
        parser.error(str(exc))
    except (ParseError, SchemaError, ConstantColumn, SchemaProblem, DimensionMismatch) as exc:
        print(f"cycletime: error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except OSError as exc:
        print(f"cycletime: error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
