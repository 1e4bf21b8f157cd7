"""Shared fixtures: the Employee relation, the ten-by-ten relation and helpers."""

from __future__ import annotations

import pytest

from qbin.audit import make_view
from qbin.binning import create_bins_base
from qbin.core import OwnerMetadata, Row, Rng, build_metadata, ingest
from qbin.executor import execute_naive, run_plan
from qbin.stores import ObservationLog, OwnerKey, encrypt_and_upload

EMPLOYEE = [
    ("t1", "E101", "Adam", "Defense"),
    ("t2", "E259", "John", "Design"),
    ("t3", "E199", "Eve", "Design"),
    ("t4", "E259", "John", "Defense"),
    ("t5", "E152", "Clark", "Defense"),
    ("t6", "E254", "David", "Design"),
    ("t7", "E159", "Lisa", "Defense"),
    ("t8", "E152", "Clark", "Design"),
]
EMPLOYEE_ORDER = ["E259", "E159", "E101", "E152"]
EMPLOYEE_FILL = ["E254", "E199"]

TEN_S = ["v1", "v2", "v3", "s4", "v5", "v6", "s7", "s8", "s9", "s10"]
TEN_NS = ["v1", "v2", "v3", "v5", "v6", "ns11", "ns12", "ns13", "ns14", "ns15"]
TEN_ORDER = ["v5", "v1", "v2", "v3", "s4", "s10", "v6", "s7", "s8", "s9"]
TEN_FILL = ["ns11", "ns12", "ns13", "ns14", "ns15"]


def employee_rows() -> list[Row]:
    return [
        Row(rid, {"EId": eid, "FirstName": first, "Dept": dept}, dept == "Defense")
        for rid, eid, first, dept in EMPLOYEE
    ]


def ten_rows(heavy: dict | None = None) -> list[Row]:
    """One row per value unless ``heavy`` maps (value, side) to a row count."""
    heavy = heavy or {}
    rows = []
    for side, values in (("s", TEN_S), ("n", TEN_NS)):
        for v in values:
            for k in range(heavy.get((v, side), 1)):
                rows.append(Row(f"{side}-{v}-{k}", {"A": v}, side == "s"))
    return rows


def small_rows(n_s: int, n_ns: int, k: int, counts: dict | None = None) -> list[Row]:
    """``k`` shared values ``a*``, the rest private to one side."""
    counts = counts or {}
    sv = [f"a{i}" for i in range(k)] + [f"s{i}" for i in range(n_s - k)]
    nv = [f"a{i}" for i in range(k)] + [f"n{i}" for i in range(n_ns - k)]
    rows = []
    for v in sv:
        rows += [Row(f"r-{v}-{c}", {"A": v}, True) for c in range(counts.get(v, 1))]
    for v in nv:
        rows.append(Row(f"q-{v}", {"A": v}, False))
    return rows


class Deployment:
    """A relation uploaded under a layout, ready to query."""

    def __init__(self, rel, layout, seed=7):
        self.rel = rel
        self.meta = build_metadata(rel)
        self.layout = layout
        self.key = OwnerKey.from_seed(layout.permutation_seed)
        self.enc, self.plain = encrypt_and_upload(rel, layout, Rng(seed).child("upload"), self.key)

    def run(self, values, naive=False, mechanism=None):
        log = ObservationLog()
        for i, w in enumerate(values):
            if naive:
                execute_naive(w, self.enc, self.plain, self.key, self.meta.sensitive_counts, log, i)
            else:
                run_plan(self.layout, w, self.enc, self.plain, self.key, log, i)
        return make_view(
            log,
            self.enc,
            self.meta.nonsensitive_values,
            len(self.meta.associated),
            mechanism or ("naive" if naive else "qb"),
            self.layout.mode,
        )

    def refs_of(self, value):
        tags = {self.key.tag(value, k) for k in range(self.meta.sensitive_counts.get(value, 0))}
        return sorted(c.tuple_ref for c in self.enc.rows if c.tag in tags)


@pytest.fixture
def employee():
    rel = ingest(employee_rows(), "EId")
    layout = create_bins_base(build_metadata(rel), Rng(1), order=EMPLOYEE_ORDER, fill_order=EMPLOYEE_FILL)
    return Deployment(rel, layout)


@pytest.fixture
def ten():
    rel = ingest(ten_rows(), "A")
    layout = create_bins_base(build_metadata(rel), Rng(1), order=TEN_ORDER, fill_order=TEN_FILL)
    return Deployment(rel, layout)


@pytest.fixture
def nine_counts_meta():
    return OwnerMetadata.from_counts(
        {f"s{i}": 10 * i for i in range(1, 10)}, {f"ns{i}": 1 for i in range(1, 10)}
    )


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
