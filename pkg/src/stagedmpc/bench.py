"""Benchmark harness: one subprocess per row, with a per-row timeout."""
from __future__ import annotations

import json
import shlex
import subprocess
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

from .pipeline import RunConfig
from .selection import bound_curves

COLUMNS = ("data", "engine", "leaves", "elapsed", "log_score", "evaluated", "status")


@dataclass
class BenchRow:
    data: str
    engine: str
    status: str = "ok"
    leaves: int | None = None
    binary_native: bool = False
    elapsed: float | None = None
    log_score: float | None = None
    evaluated: int | None = None
    message: str = ""

    def cells(self) -> list[str]:
        name = self.data + ("*" if self.binary_native else "")
        return [
            name, self.engine,
            "" if self.leaves is None else str(self.leaves),
            "" if self.elapsed is None else f"{self.elapsed:.4f}",
            "" if self.log_score is None else f"{self.log_score:.2f}",
            "" if self.evaluated is None else str(self.evaluated),
            self.status if not self.message else f"{self.status}: {self.message}",
        ]


def bundled_manifest() -> list[RunConfig]:
    """Bundled rows in the published comparison's layout.

    Original-tree AHC keeps zero-count paths; the binary rows use the tree
    with zero-count paths removed.
    """
    rows = []
    for name in ("titanic", "reinis"):
        rows.append(RunConfig(data=name, engine="ahc"))
        rows.append(RunConfig(data=name, engine="ahc-binary", prune_zeros=True))
        rows.append(RunConfig(data=name, engine="mpc", prune_zeros=True))
    return rows


def read_manifest(text: str, parse) -> list[RunConfig]:
    """One row per non-blank, non-comment line of fit flags; ``parse`` maps argv to a config."""
    rows = []
    for line in text.splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            rows.append(parse(shlex.split(line)))
    return rows


def run_row(config: RunConfig) -> BenchRow:
    row = BenchRow(config.data, config.engine)
    cmd = [sys.executable, "-m", "stagedmpc", "fit", *config.to_args(), "--summary"]
    try:
        proc = subprocess.run(cmd, capture_output=True, text=True, timeout=config.timeout_secs)
    except subprocess.TimeoutExpired:
        row.status = "timeout"
        row.message = f"> {config.timeout_secs:g} s"
        return row
    if proc.returncode != 0:
        row.status = f"error({proc.returncode})"
        row.message = (proc.stderr.strip().splitlines() or [""])[-1]
        return row
    info = json.loads(proc.stdout.strip().splitlines()[-1])
    row.leaves = info["leaves"]
    row.binary_native = info["binary_native"]
    row.elapsed = info["elapsed"]
    row.log_score = info["log_score"]
    row.evaluated = info["evaluated"]
    return row


def benchmark(manifest: list[RunConfig], jobs: int = 1) -> list[BenchRow]:
    """Run every row; failures and timeouts are recorded and the run continues."""
    if not manifest:
        return []
    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        return list(pool.map(run_row, manifest))


def format_tsv(rows: list[BenchRow]) -> str:
    lines = ["\t".join(COLUMNS)]
    lines += ["\t".join(r.cells()) for r in rows]
    return "\n".join(lines) + "\n"


def format_json(rows: list[BenchRow]) -> str:
    return json.dumps([asdict(r) for r in rows], indent=2) + "\n"


def bounds_tsv(ns, ks=(2, 3, 4)) -> str:
    curves = bound_curves(ns, ks)
    header = ["N", "ahc"] + [f"mpc_k{k}" for k in ks]
    lines = ["\t".join(header)]
    lines += ["\t".join(str(row[c]) for c in header) for row in curves]
    return "\n".join(lines) + "\n"
