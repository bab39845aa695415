"""Command-line workflow driver.

Subcommands: translate, export-queries, train, import-weights, check-grad.
Artifacts go to --out-dir only; diagnostics go to stderr as a single
machine-parsable line; a failed command leaves no partial artifacts.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

from . import autodiff, codegen, pipeline, pivot
from .errors import (
    AmbiguousColumn,
    ConfigError,
    CsvTypeError,
    CyclicDependency,
    DivergenceDetected,
    DuplicateFeatureName,
    DuplicateKey,
    LengthMismatch,
    LexError,
    MissingInput,
    MissingJoinKey,
    MissingTarget,
    NonFiniteGradient,
    NonFiniteValue,
    NonNumericValue,
    ParseError,
    SchemaMismatch,
    ShapeMismatch,
    SqlgradError,
    UnknownColumn,
    UnknownTable,
    UnmappedTable,
    UnsupportedFeature,
    UnsupportedNode,
    UnsupportedOperator,
)

EXIT_CODES = {
    MissingInput: 2,
    ConfigError: 3, UnknownTable: 3, UnknownColumn: 3, AmbiguousColumn: 3,
    LexError: 4, ParseError: 4, UnsupportedFeature: 4,
    CyclicDependency: 5, UnsupportedOperator: 5, UnmappedTable: 5,
    ShapeMismatch: 5, UnsupportedNode: 5,
    SchemaMismatch: 6, CsvTypeError: 6, MissingTarget: 6, DuplicateKey: 6,
    NonNumericValue: 6, DuplicateFeatureName: 6, MissingJoinKey: 6,
    LengthMismatch: 6,
    NonFiniteValue: 7, NonFiniteGradient: 7, DivergenceDetected: 7,
}

GRAD_CHECK_TOLERANCE = 1e-4
GRAD_CHECK_FAILED = 8


def exit_code_for(exc: SqlgradError) -> int:
    for cls, code in EXIT_CODES.items():
        if isinstance(exc, cls):
            return code
    return 1


def write_artifacts(out_dir: Path, artifacts: dict[str, str]):
    """All-or-nothing artifact writing."""
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    try:
        for name, content in artifacts.items():
            path = out_dir / name
            path.write_text(content, encoding="utf-8", newline="\n")
            written.append(path)
    except BaseException:
        for path in written:
            path.unlink(missing_ok=True)
        raise


def csv_text(header: list[str], rows: list[tuple]) -> str:
    import io

    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buffer.getvalue()


def hyperparam_overrides(args) -> dict:
    overrides = {}
    if args.iterations is not None:
        overrides["iterations"] = args.iterations
    if args.learning_rate is not None:
        overrides["learning_rate"] = args.learning_rate
    return overrides


def cmd_translate(args) -> int:
    bundle = pipeline.prepare(args.sql, args.config, args.data_dir,
                              hyperparam_overrides(args))
    artifacts = {
        "model_train.py": codegen.emit_program(
            bundle.program, bundle.catalog, bundle.mapping,
            print_every=args.print_every),
        "import_weights.sql": codegen.emit_import_template(
            bundle.catalog, bundle.mapping),
    }
    artifacts.update(codegen.emit_export_queries(bundle.catalog, bundle.mapping))
    write_artifacts(Path(args.out_dir), artifacts)
    log(f"translate: wrote {len(artifacts)} files to {args.out_dir}")
    return 0


def cmd_export_queries(args) -> int:
    bundle = pipeline.prepare(args.sql, args.config, args.data_dir)
    artifacts = codegen.emit_export_queries(bundle.catalog, bundle.mapping)
    write_artifacts(Path(args.out_dir), artifacts)
    log(f"export-queries: wrote {len(artifacts)} files to {args.out_dir}")
    return 0


def cmd_train(args) -> int:
    bundle = pipeline.prepare(args.sql, args.config, args.data_dir,
                              hyperparam_overrides(args))
    result = pipeline.train(bundle)
    weights = result.weights[bundle.weights_name]

    features_header, features_rows = pipeline.features_matrix_rows(bundle)
    targets_header, targets_rows = pipeline.targets_matrix_rows(bundle)
    artifacts = {
        "weights.csv": csv_text(["table", "featureName", "value"],
                                pipeline.weights_csv_rows(bundle, weights)),
        "import_weights.sql": pivot.gen_weight_imports(
            bundle.catalog, bundle.mapping, weights),
        "loss_trace.csv": csv_text(["iteration", "objective"],
                                   pipeline.loss_trace_rows(result)),
        codegen.FEATURES_FILE: csv_text(features_header, features_rows),
        codegen.TARGETS_FILE: csv_text(targets_header, targets_rows),
    }
    write_artifacts(Path(args.out_dir), artifacts)
    final = result.loss_trace[-1][1] if result.loss_trace else float("nan")
    log(f"train: {result.iterations_run} iterations, final objective {final!r}")
    return 0


def cmd_import_weights(args) -> int:
    script, cat = pipeline.load_model(args.sql, args.config)
    weights_path = Path(args.data_dir) / "weights.csv"
    if not weights_path.is_file():
        raise MissingInput(f"missing data file: {weights_path}")
    with weights_path.open(newline="", encoding="utf-8") as handle:
        rows = list(csv.reader(handle))
    if not rows or rows[0] != ["table", "featureName", "value"]:
        raise SchemaMismatch(f"{weights_path}: expected header table,featureName,value")
    entries = tuple((row[0], row[1]) for row in rows[1:])
    values = [float(row[2]) for row in rows[1:]]
    mapping = pivot.FeatureMapping(entries, ())
    artifacts = {
        "import_weights.sql": pivot.gen_weight_imports(cat, mapping, values),
    }
    write_artifacts(Path(args.out_dir), artifacts)
    log(f"import-weights: regenerated SQL for {len(values)} weights")
    return 0


def cmd_check_grad(args) -> int:
    bundle = pipeline.prepare(args.sql, args.config, args.data_dir)
    bindings = {**bundle.data_bindings(), **bundle.initial_weights(scale=0.5)}
    error = autodiff.finite_diff_check(bundle.program, bindings)
    print(f"max finite-difference error: {error:.3e}")
    if error > GRAD_CHECK_TOLERANCE:
        log(f"check-grad: FAILED ({error:.3e} > {GRAD_CHECK_TOLERANCE:.0e})")
        return GRAD_CHECK_FAILED
    log("check-grad: ok")
    return 0


def log(message: str):
    print(message, file=sys.stderr)


def add_common(sub, *, data=True, out=True, hyper=False):
    sub.add_argument("--sql", required=True, help="model definition .sql file")
    sub.add_argument("--config", required=True, help="key = value config file")
    if data:
        sub.add_argument("--data-dir", required=True,
                         help="directory holding <table>.csv inputs")
    if out:
        sub.add_argument("--out-dir", required=True, help="artifact directory")
    if hyper:
        sub.add_argument("--iterations", type=int, default=None)
        sub.add_argument("--learning-rate", type=float, default=None)
        sub.add_argument("--print-every", type=int, default=1)


def build_arg_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sqlgrad",
        description="Translate SQL model definitions to tensor programs, "
                    "generate data-movement SQL, and train in process.")
    commands = parser.add_subparsers(dest="command", required=True)

    translate = commands.add_parser(
        "translate", help="emit the training script and the SQL bundle")
    add_common(translate, hyper=True)
    translate.set_defaults(run=cmd_translate)

    export = commands.add_parser(
        "export-queries", help="emit only the feature/target export SQL")
    add_common(export)
    export.set_defaults(run=cmd_export_queries)

    train = commands.add_parser(
        "train", help="train in process; write weights and the loss trace")
    add_common(train, hyper=True)
    train.set_defaults(run=cmd_train)
    # --print-every is accepted for interface symmetry; the in-process
    # trainer records every iteration in loss_trace.csv regardless.

    import_weights = commands.add_parser(
        "import-weights", help="regenerate import SQL from a weights.csv")
    add_common(import_weights)
    import_weights.set_defaults(run=cmd_import_weights)

    check = commands.add_parser(
        "check-grad", help="finite-difference gradient verification")
    add_common(check, out=False)
    check.set_defaults(run=cmd_check_grad)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_arg_parser()
    args = parser.parse_args(argv)
    try:
        return args.run(args)
    except SqlgradError as exc:
        code = exit_code_for(exc)
        print(f"error code={type(exc).__name__} exit={code} message={exc}",
              file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
