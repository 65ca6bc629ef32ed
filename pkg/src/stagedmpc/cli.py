"""Command-line interface: ``stagedmpc {fit,benchmark,resize,score,export}``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 engine error.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import bench
from .data import DataError
from .export import SchemaError, export_dot, export_json, import_document, to_ceg
from .pipeline import ENGINE_CHOICES, ConfigError, RunConfig, fit, prepare, summary, write_atomic, write_fit
from .scoring import ScoringError, Staging
from .selection import SelectionError
from .tree import TreeError, variable_hyperstage

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_ENGINE = 0, 2, 3, 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def read_config_file(path: str) -> list[str]:
    """``key = value`` lines as flags; a key may repeat, booleans take true/false."""
    argv = []
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{n}: expected key = value")
        key, value = (p.strip() for p in line.split("=", 1))
        flag = "--" + key.replace("_", "-")
        if value.lower() in ("true", "yes", "on"):
            argv.append(flag)
        elif value.lower() in ("false", "no", "off"):
            continue
        else:
            argv += [flag, value]
    return argv


def _mapping(items: list[str] | None, what: str) -> dict[str, tuple[str, ...]]:
    out = {}
    for item in items or []:
        var, sep, labels = item.partition("=")
        if not sep or not var or not labels:
            raise ConfigError(f"{what} must look like VAR=a,b,c, got {item!r}")
        out[var.strip()] = tuple(x.strip() for x in labels.split(","))
    return out


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", required=True,
                   help="CSV file, or a bundled name: titanic, reinis, chds")
    p.add_argument("--order", help="comma-separated variable order (default: column order)")
    p.add_argument("--engine", default="ahc", choices=ENGINE_CHOICES)
    p.add_argument("--alpha", type=float, help="total prior mass (default: number of leaves)")
    p.add_argument("--split-order", action="append", metavar="VAR=a,b,c",
                   help="order in which a variable's outcomes are split off when resizing")
    p.add_argument("--categories", action="append", metavar="VAR=a,b,c",
                   help="declare a variable's categories (needed for empty data)")
    p.add_argument("--exact-cap", type=int, help="largest hyperset for exact search")
    p.add_argument("--exact-mode", default="all", choices=("all", "interval"))
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--timeout-secs", type=float, default=10000.0)
    p.add_argument("--prune-zeros", action="store_true",
                   help="drop zero-count paths from the event tree")
    p.add_argument("--reorder", action="store_true",
                   help="mpc: re-sort clusters by pooled posterior mean after each merge")
    p.add_argument("--delimiter", default=",")
    p.add_argument("--seed", type=int, help="reserved; all engines are deterministic")


def config_from_args(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig(
        data=args.data,
        order=tuple(v.strip() for v in args.order.split(",")) if args.order else None,
        engine=args.engine,
        split_order=_mapping(args.split_order, "--split-order"),
        alpha=args.alpha,
        exact_cap=args.exact_cap,
        exact_mode=args.exact_mode,
        out_dir=getattr(args, "out_dir", None),
        timeout_secs=args.timeout_secs,
        threads=args.threads,
        prune_zeros=args.prune_zeros,
        categories=_mapping(args.categories, "--categories"),
        delimiter=args.delimiter,
        reorder=args.reorder,
        seed=args.seed,
    )
    cfg.validate()
    return cfg


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="stagedmpc", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("fit", help="fit a staging and write result JSON and DOT files")
    _add_run_flags(p)
    p.add_argument("--out-dir")
    p.add_argument("--summary", action="store_true", help="print one JSON summary line")

    p = sub.add_parser("benchmark", help="run a manifest of fits and tabulate them")
    p.add_argument("--manifest", help="file with one line of fit flags per row")
    p.add_argument("--bundled", action="store_true", help="use the bundled comparison rows")
    p.add_argument("--timeout-secs", type=float, help="override every row's timeout")
    p.add_argument("--jobs", type=int, default=1, help="rows run concurrently")
    p.add_argument("--out-dir", help="write benchmark.tsv and benchmark.json here")
    p.add_argument("--bounds", metavar="N1,N2,...",
                   help="also emit worst-case candidate-count curves for these sizes")

    p = sub.add_parser("resize", help="binary resize; write the tree as JSON and DOT")
    _add_run_flags(p)
    p.add_argument("--out-dir")

    p = sub.add_parser("score", help="score the staging stored in a JSON document")
    p.add_argument("json")

    p = sub.add_parser("export", help="render a JSON document as DOT")
    p.add_argument("json")
    p.add_argument("--out-dir")
    return parser


def _parse_fit_argv(argv: list[str]) -> RunConfig:
    p = _Parser(prog="manifest row")
    _add_run_flags(p)
    p.add_argument("--out-dir")
    return config_from_args(p.parse_args(argv))


def cmd_fit(args) -> int:
    cfg = config_from_args(args)
    fitted = fit(cfg)
    if cfg.out_dir:
        write_fit(fitted, cfg.out_dir)
    info = summary(fitted)
    if args.summary:
        print(json.dumps(info))
        return EXIT_OK
    print(f"engine         {info['engine']}")
    print(f"leaves         {info['leaves']}")
    print(f"log score      {info['log_score']:.6f}")
    print(f"saturated      {info['saturated_score']:.6f}")
    print(f"elapsed (s)    {info['elapsed']:.6f}")
    print(f"evaluated      {info['evaluated']} {info['evaluated_per_hyperset']}")
    print(f"accepted       {info['accepted']}")
    print(f"stages         {info['stages']}")
    return EXIT_OK


def cmd_benchmark(args) -> int:
    manifest = []
    if args.bundled:
        manifest += bench.bundled_manifest()
    if args.manifest:
        try:
            text = Path(args.manifest).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read manifest: {exc}") from None
        manifest += bench.read_manifest(text, _parse_fit_argv)
    if args.timeout_secs is not None:
        for cfg in manifest:
            cfg.timeout_secs = args.timeout_secs
    rows = bench.benchmark(manifest, jobs=args.jobs)
    table = bench.format_tsv(rows)
    sys.stdout.write(table)
    bounds = None
    if args.bounds:
        try:
            ns = [int(x) for x in args.bounds.split(",")]
        except ValueError:
            raise ConfigError(f"--bounds must be integers, got {args.bounds!r}") from None
        bounds = bench.bounds_tsv(ns)
        sys.stdout.write("\n" + bounds)
    if args.out_dir:
        out = Path(args.out_dir)
        write_atomic(out / "benchmark.tsv", table)
        write_atomic(out / "benchmark.json", bench.format_json(rows))
        if bounds:
            write_atomic(out / "bounds.tsv", bounds)
    return EXIT_OK


def cmd_resize(args) -> int:
    cfg = config_from_args(args)
    cfg.engine = "mpc"
    _, source, tree, rmap, prior, h = prepare(cfg)
    text = export_json(None, tree, prior, h)
    if args.out_dir:
        write_atomic(Path(args.out_dir) / "resized.json", text)
        write_atomic(Path(args.out_dir) / "resized.dot", export_dot(tree, name="resized"))
    else:
        sys.stdout.write(text)
        return EXIT_OK
    depth = max(len(tree.path(leaf)) for leaf in tree.leaves) if tree.leaves else 0
    print(f"source   {source.describe()}")
    print(f"resized  {tree.describe()}, {depth} levels")
    for name, hs in zip(h.names, h.hypersets):
        print(f"  {name}: {len(hs)} situations")
    return EXIT_OK


def _load_doc(path: str):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    return import_document(text)


def _staging(tree, prior, h, result):
    if h is None:
        h = variable_hyperstage(tree)
    if result is None:
        return Staging.saturated(tree, prior, h)
    return result.staging


def cmd_score(args) -> int:
    tree, prior, h, result = _load_doc(args.json)
    staging = _staging(tree, prior, h, result)
    print(f"{staging.log_score():.6f}")
    return EXIT_OK


def cmd_export(args) -> int:
    tree, prior, h, result = _load_doc(args.json)
    staging = _staging(tree, prior, h, result)
    tree_dot = export_dot(tree, staging, name="staged_tree")
    ceg_dot = export_dot(to_ceg(tree, staging), name="ceg")
    if args.out_dir:
        write_atomic(Path(args.out_dir) / "staged_tree.dot", tree_dot)
        write_atomic(Path(args.out_dir) / "ceg.dot", ceg_dot)
    else:
        sys.stdout.write(tree_dot + "\n" + ceg_dot)
    return EXIT_OK


COMMANDS = {"fit": cmd_fit, "benchmark": cmd_benchmark, "resize": cmd_resize,
            "score": cmd_score, "export": cmd_export}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        if "--config" in argv:
            i = argv.index("--config")
            if i + 1 >= len(argv):
                raise ConfigError("--config needs a path")
            extra = read_config_file(argv[i + 1])
            # subcommand first, then file values, then explicit flags (last wins)
            rest = argv[:i] + argv[i + 2:]
            argv = rest[:1] + extra + rest[1:]
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, SchemaError, TreeError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (SelectionError, ScoringError) as exc:
        print(f"engine error: {exc}", file=sys.stderr)
        return EXIT_ENGINE


if __name__ == "__main__":
    sys.exit(main())
