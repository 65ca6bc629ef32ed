import numpy as np
import pytest
from hypothesis import strategies as st

from stagedmpc.data import Dataset
from stagedmpc.tree import SpecLeaf, SpecNode, canonical_tree

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def two_situation_tree():
    """root --x(3)--> s1 {u: 2, v: 1};  root --y(1)--> leaf"""
    return canonical_tree(SpecNode("A", [
        ("x", 3, SpecNode("B", [("u", 2, SpecLeaf()), ("v", 1, SpecLeaf())])),
        ("y", 1, SpecLeaf()),
    ]))


def product_dataset(levels, counts, names=None):
    import itertools
    names = names or [f"V{i}" for i in range(len(levels))]
    cats = [[f"{n.lower()}{j}" for j in range(k)] for n, k in zip(names, levels)]
    records = list(itertools.product(*cats))
    assert len(records) == len(counts)
    return Dataset.from_records(names, records, counts, schema=dict(zip(names, cats)))


@st.composite
def datasets(draw, max_vars=4, max_levels=4, binary=False, max_count=1000):
    n_vars = draw(st.integers(2, max_vars))
    levels = [2 if binary else draw(st.integers(2, max_levels)) for _ in range(n_vars)]
    cells = int(np.prod(levels))
    counts = draw(st.lists(st.integers(0, max_count), min_size=cells, max_size=cells))
    return product_dataset(levels, counts)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
