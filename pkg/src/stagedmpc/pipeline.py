"""Run configuration and the fit pipeline shared by the CLI and the benchmark."""
from __future__ import annotations

import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

from .data import Dataset, DataError, ingest
from .export import export_dot, export_json, to_ceg
from .fixtures import BUNDLED, load
from .resize import ResizeMap, binary_resize, transport_prior
from .scoring import PriorSpec, leaf_path_prior
from .selection import SelectionResult, ahc, exact_map, mpc
from .tree import EventTree, Hyperstage, TreeError, build_event_tree, variable_hyperstage

ENGINE_CHOICES = ("ahc", "ahc-binary", "mpc", "exact")
BINARY_ENGINES = ("ahc-binary", "mpc")


class ConfigError(ValueError):
    """Invalid run configuration."""


@dataclass
class RunConfig:
    data: str
    order: tuple[str, ...] | None = None
    engine: str = "ahc"
    split_order: dict[str, tuple[str, ...]] = field(default_factory=dict)
    alpha: float | None = None
    exact_cap: int | None = None
    exact_mode: str = "all"
    out_dir: str | None = None
    timeout_secs: float = 10000.0
    threads: int = 1
    prune_zeros: bool = False
    categories: dict[str, tuple[str, ...]] = field(default_factory=dict)
    delimiter: str = ","
    reorder: bool = False
    # Reserved: every engine is deterministic.
    seed: int | None = None

    def validate(self) -> None:
        if self.engine not in ENGINE_CHOICES:
            raise ConfigError(f"unknown engine {self.engine!r}; choose from {ENGINE_CHOICES}")
        if self.alpha is not None and not self.alpha > 0:
            raise ConfigError(f"alpha must be positive, got {self.alpha}")
        if self.threads < 1:
            raise ConfigError(f"threads must be >= 1, got {self.threads}")
        if self.timeout_secs <= 0:
            raise ConfigError(f"timeout must be positive, got {self.timeout_secs}")
        if self.exact_mode not in ("all", "interval"):
            raise ConfigError(f"exact mode must be 'all' or 'interval', got {self.exact_mode!r}")
        if self.exact_cap is not None and self.exact_cap < 1:
            raise ConfigError(f"exact cap must be >= 1, got {self.exact_cap}")
        if self.reorder and self.engine != "mpc":
            raise ConfigError("reorder only applies to the mpc engine")

    @property
    def needs_binary(self) -> bool:
        return self.engine in BINARY_ENGINES or (self.engine == "exact"
                                                 and self.exact_mode == "interval")

    def to_args(self) -> list[str]:
        """Command-line flags reproducing this configuration."""
        args = ["--data", self.data, "--engine", self.engine]
        if self.order:
            args += ["--order", ",".join(self.order)]
        for var, labels in self.split_order.items():
            args += ["--split-order", f"{var}={','.join(labels)}"]
        for var, cats in self.categories.items():
            args += ["--categories", f"{var}={','.join(cats)}"]
        if self.alpha is not None:
            args += ["--alpha", repr(self.alpha)]
        if self.exact_cap is not None:
            args += ["--exact-cap", str(self.exact_cap)]
        if self.engine == "exact":
            args += ["--exact-mode", self.exact_mode]
        if self.out_dir:
            args += ["--out-dir", self.out_dir]
        args += ["--threads", str(self.threads), "--delimiter", self.delimiter]
        if self.prune_zeros:
            args.append("--prune-zeros")
        if self.reorder:
            args.append("--reorder")
        return args


@dataclass
class Fit:
    config: RunConfig
    dataset: Dataset
    source: EventTree
    tree: EventTree
    resize: ResizeMap | None
    prior: PriorSpec
    hyperstage: Hyperstage
    result: SelectionResult

    @property
    def binary_native(self) -> bool:
        return self.source.is_binary


def load_dataset(config: RunConfig) -> Dataset:
    path = Path(config.data)
    if not path.exists() and config.data in BUNDLED:
        return load(config.data, config.categories or None)
    if not path.exists():
        raise DataError(f"dataset {config.data!r} not found")
    return ingest(path, schema=config.categories or None, delimiter=config.delimiter)


def prepare(config: RunConfig, data: Dataset | None = None):
    """Build (dataset, source tree, engine tree, resize map, prior, hyperstage)."""
    config.validate()
    data = load_dataset(config) if data is None else data
    order = list(config.order) if config.order else list(data.names)
    if sorted(order) != sorted(data.names) or len(set(order)) != len(order):
        raise ConfigError(f"order {order} is not a permutation of {list(data.names)}")
    unknown = sorted(set(config.split_order) - set(data.names))
    if unknown:
        raise ConfigError(f"split order given for unknown variables {unknown}")
    source = build_event_tree(data, order, prune_zeros=config.prune_zeros)
    prior = leaf_path_prior(source, config.alpha)
    tree, rmap = source, None
    if config.needs_binary and not source.is_binary:
        try:
            tree, rmap = binary_resize(source, config.split_order)
        except TreeError as exc:
            raise ConfigError(str(exc)) from None
        prior = transport_prior(prior, rmap)
    hyperstage = variable_hyperstage(tree, split_signatures=config.prune_zeros)
    return data, source, tree, rmap, prior, hyperstage


def run_engine(config: RunConfig, tree: EventTree, h: Hyperstage,
               prior: PriorSpec) -> SelectionResult:
    if config.engine in ("ahc", "ahc-binary"):
        result = ahc(tree, h, prior, threads=config.threads)
        result.engine = config.engine
        return result
    if config.engine == "mpc":
        return mpc(tree, h, prior, threads=config.threads, reorder=config.reorder)
    return exact_map(tree, h, prior, mode=config.exact_mode, cap=config.exact_cap)


def fit(config: RunConfig, data: Dataset | None = None) -> Fit:
    data, source, tree, rmap, prior, h = prepare(config, data)
    result = run_engine(config, tree, h, prior)
    return Fit(config, data, source, tree, rmap, prior, h, result)


def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def write_fit(fitted: Fit, out_dir: str | Path) -> list[Path]:
    """Write result JSON, the staged tree and its CEG as DOT; return the paths."""
    out = Path(out_dir)
    res = fitted.result
    files = {
        "result.json": export_json(res, fitted.tree, fitted.prior, fitted.hyperstage),
        "staged_tree.dot": export_dot(fitted.tree, res.staging, name="staged_tree"),
        "ceg.dot": export_dot(to_ceg(fitted.tree, res.staging), name="ceg"),
    }
    paths = []
    for name, text in files.items():
        write_atomic(out / name, text)
        paths.append(out / name)
    return paths


def summary(fitted: Fit) -> dict:
    res = fitted.result
    return {
        "data": fitted.config.data,
        "engine": fitted.config.engine,
        "leaves": len(fitted.tree.leaves),
        "binary_native": fitted.binary_native,
        "log_score": res.log_score,
        "saturated_score": res.saturated_score,
        "elapsed": res.elapsed,
        "evaluated": res.total_evaluated,
        "evaluated_per_hyperset": list(res.evaluated),
        "scored": res.scored,
        "accepted": res.accepted,
        "stages": len(res.staging.blocks),
    }
