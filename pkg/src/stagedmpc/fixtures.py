"""Bundled datasets and synthetic generators."""
from __future__ import annotations

import itertools
from importlib import resources

import numpy as np

from .data import Dataset, DataError, ingest

BUNDLED = ("titanic", "reinis", "chds")

# Variable order used for the bundled files (the column order of the files).
TITANIC_ORDER = ("Class", "Sex", "Age", "Survived")
REINIS_ORDER = ("smoke", "mental", "phys", "systol", "protein", "family")
CHDS_ORDER = ("S", "E", "H", "L")
CHDS_L_HIGH_FIRST = ("High", "Average", "Low")


def bundled_path(name: str):
    return resources.files("stagedmpc") / "datasets" / f"{name}.csv"


def load(name: str, schema=None) -> Dataset:
    """Load a bundled dataset by name (``titanic``, ``reinis`` or ``chds``).

    ``schema`` (variable -> categories) is passed to :func:`ingest`; the
    synthetic ``chds`` fixture has a fixed schema and rejects one.
    """
    if name == "chds":
        if schema:
            raise DataError("the synthetic chds fixture has fixed categories")
        return chds_synthetic()
    if name not in BUNDLED:
        raise KeyError(f"no bundled dataset {name!r}; choose from {BUNDLED}")
    with resources.as_file(bundled_path(name)) as path:
        return ingest(path, schema=schema)


# P(L = High | S, E, H): three groups, lowest for high social and economic
# background without hospital admission.
_L_HIGH = {
    ("High", "High", "No"): 0.06,
    ("Low", "High", "No"): 0.20, ("High", "Low", "No"): 0.20, ("High", "High", "Yes"): 0.20,
    ("Low", "Low", "No"): 0.42, ("Low", "Low", "Yes"): 0.42,
    ("High", "Low", "Yes"): 0.42, ("Low", "High", "Yes"): 0.42,
}
# P(L = Average | L != High, S)
_L_AVERAGE = {"High": 0.35, "Low": 0.55}


def chds_synthetic(n: int = 890, seed: int = 1977) -> Dataset:
    """Synthetic complete-case records shaped like the CHDS study.

    S (social background), E (economic situation) and H (hospital
    admission) are binary; L (life events) takes Low, Average or High.
    """
    rng = np.random.default_rng(seed)
    p_s_high = 0.52
    p_e_high = {"High": 0.72, "Low": 0.38}
    p_h_yes = {("High", "High"): 0.12, ("High", "Low"): 0.22,
               ("Low", "High"): 0.20, ("Low", "Low"): 0.30}
    records = []
    for _ in range(n):
        s = "High" if rng.random() < p_s_high else "Low"
        e = "High" if rng.random() < p_e_high[s] else "Low"
        h = "Yes" if rng.random() < p_h_yes[(s, e)] else "No"
        if rng.random() < _L_HIGH[(s, e, h)]:
            lev = "High"
        else:
            lev = "Average" if rng.random() < _L_AVERAGE[s] else "Low"
        records.append((s, e, h, lev))
    schema = {"S": ("High", "Low"), "E": ("High", "Low"), "H": ("Yes", "No"),
              "L": ("Low", "Average", "High")}
    return Dataset.from_records(CHDS_ORDER, records, schema=schema)


def random_dataset(rng: np.random.Generator, n_vars: int, levels, max_count: int = 1000,
                   zero_prob: float = 0.0) -> Dataset:
    """Contingency-form dataset with independent random cell counts.

    ``levels`` is one cardinality per variable or a single int for all.
    """
    if isinstance(levels, int):
        levels = [levels] * n_vars
    names = [f"X{i}" for i in range(n_vars)]
    cats = [[f"c{j}" for j in range(k)] for k in levels]
    records, weights = [], []
    for combo in itertools.product(*cats):
        records.append(combo)
        if zero_prob and rng.random() < zero_prob:
            weights.append(0)
        else:
            weights.append(int(rng.integers(0, max_count + 1)))
    return Dataset.from_records(names, records, weights, schema=dict(zip(names, cats)))


def homogeneous_binary_dataset(depth: int, n: int, p: float = 0.5, seed: int = 0) -> Dataset:
    """``depth`` independent Bernoulli(p) variables: every situation of a
    variable shares one distribution, so greedy search merges nearly all."""
    rng = np.random.default_rng(seed)
    names = [f"B{i}" for i in range(depth)]
    cats = [("0", "1")] * depth
    records = list(itertools.product(*cats))
    probs = np.array([np.prod([p if v == "1" else 1 - p for v in r]) for r in records])
    counts = rng.multinomial(n, probs / probs.sum())
    return Dataset.from_records(names, records, [int(c) for c in counts],
                                schema=dict(zip(names, cats)))
