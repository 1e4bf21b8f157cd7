"""Synthetic datasets, query workloads and the end-to-end runner.

All randomness comes from one root seed through named children
(``permutation``, ``upload``, ``workload``), so each stage can be replayed
on its own.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Sequence

from .audit import AdversarialView, make_view
from .binning import BinLayout, create_bins
from .core import PartitionedRelation, Rng, Row, Value, build_metadata, ingest, value_key
from .executor import BenchReport, execute, execute_naive, plan_query
from .stores import EncryptedStore, ObservationLog, OwnerKey, PlaintextStore, encrypt_and_upload

DISTRIBUTIONS = ("uniform", "zipf", "list", "sweep")


class GenerateError(ValueError):
    """The requested dataset cannot be built."""


def parse_multiplicity(text: str | int) -> list[int]:
    """``"3"`` gives ``[3]``; ``"10..90:10"`` or ``"10..90 step 10"`` gives a cycle."""
    s = str(text).strip()
    m = re.fullmatch(r"(\d+)\s*\.\.\s*(\d+)(?:\s*(?::|step)\s*(\d+))?", s)
    if m:
        lo, hi, step = int(m[1]), int(m[2]), int(m[3] or 1)
        if lo < 1 or hi < lo or step < 1:
            raise GenerateError(f"bad multiplicity range {text!r}")
        return list(range(lo, hi + 1, step))
    if s.isdigit() and int(s) >= 1:
        return [int(s)]
    raise GenerateError(f"bad multiplicity {text!r}")


def generate(
    n_values: int,
    alpha: float,
    multiplicity: str | int = 1,
    ns_multiplicity: str | int = 1,
    associated: int | None = None,
    seed: int = 0,
    attribute: str = "value",
    max_rows: int | None = None,
) -> list[Row]:
    """A relation with ``round(alpha * n_values)`` distinct sensitive values.

    The rest of the ``n_values`` slots are non-sensitive values. Of the two
    sides, ``associated`` values (default: half of the smaller side) are
    shared, named ``v*``; side-only values are ``s*`` and ``ns*``. Tuple
    counts cycle through the parsed multiplicities. Row order is shuffled
    from ``seed``.
    """
    if not 0.0 <= alpha <= 1.0:
        raise GenerateError(f"alpha={alpha} outside [0, 1]")
    if n_values < 1:
        raise GenerateError("need at least one value")
    n_s = round(alpha * n_values)
    n_ns = n_values - n_s
    if associated is None:
        associated = min(n_s, n_ns) // 2
    if associated < 0 or associated > min(n_s, n_ns):
        raise GenerateError(f"cannot share {associated} values between sides of {n_s} and {n_ns}")
    shared = [f"v{i + 1}" for i in range(associated)]
    s_vals = shared + [f"s{i + 1}" for i in range(n_s - associated)]
    ns_vals = shared + [f"ns{i + 1}" for i in range(n_ns - associated)]
    smul, nmul = parse_multiplicity(multiplicity), parse_multiplicity(ns_multiplicity)
    n_rows = sum(smul[i % len(smul)] for i in range(n_s)) + sum(nmul[i % len(nmul)] for i in range(n_ns))
    if max_rows is not None and n_rows > max_rows:
        raise GenerateError(f"dataset needs {n_rows} rows, more than the limit {max_rows}")
    cells: list[tuple[Value, bool]] = []
    for i, v in enumerate(s_vals):
        cells.extend([(v, True)] * smul[i % len(smul)])
    for i, v in enumerate(ns_vals):
        cells.extend([(v, False)] * nmul[i % len(nmul)])
    cells = Rng(seed).child("generate").shuffled(cells)
    width = len(str(len(cells)))
    return [
        Row(f"t{i + 1:0{width}d}", {attribute: v}, sens) for i, (v, sens) in enumerate(cells)
    ]


@dataclass(frozen=True)
class WorkloadSpec:
    """Query distribution over the domain.

    ``uniform`` and ``zipf`` draw ``count`` queries with replacement; zipf
    ranks the domain by a seeded shuffle and weights rank ``r`` by
    ``1/r**s``. ``list`` replays ``values`` verbatim. ``sweep`` queries every
    domain value once in a seeded order.
    """

    distribution: str = "uniform"
    count: int = 100
    seed: int = 0
    s: float = 1.0
    values: tuple = ()

    def __post_init__(self):
        if self.distribution not in DISTRIBUTIONS:
            raise ValueError(f"unknown distribution {self.distribution!r}")
        if self.count < 0:
            raise ValueError("negative query count")
        if self.distribution == "list" and not self.values:
            raise ValueError("list workload without values")

    def weights(self, n: int) -> list[float]:
        if self.distribution == "zipf":
            raw = [1.0 / (r + 1) ** self.s for r in range(n)]
        else:
            raw = [1.0] * n
        total = math.fsum(raw)
        return [w / total for w in raw]

    def queries(self, domain: Sequence[Value], rng: Rng | None = None) -> list[Value]:
        rng = rng or Rng(self.seed).child("workload")
        if self.distribution == "list":
            return list(self.values)
        dom = sorted(domain, key=value_key)
        if self.distribution == "sweep":
            return rng.shuffled(dom)
        if not dom:
            return []
        if self.distribution == "zipf":
            dom = rng.child("ranks").shuffled(dom)
        return rng.choices(dom, self.weights(len(dom)), self.count)


@dataclass
class WorkloadRun:
    layout: BinLayout
    enc: EncryptedStore
    plain: PlaintextStore
    queries: list
    results: list[dict] = field(default_factory=list)
    view: AdversarialView | None = None
    report: BenchReport = field(default_factory=BenchReport)
    mismatches: list[int] = field(default_factory=list)

    @property
    def verified(self) -> bool:
        return not self.mismatches


def oracle_index(rel: PartitionedRelation) -> dict:
    """Row ids per value by a full pass over both sides (the reference answer)."""
    out: dict = {}
    a = rel.searchable_attribute
    for r in rel.rows:
        out.setdefault(r.attributes[a], []).append(r.row_id)
    return {v: sorted(ids) for v, ids in out.items()}


def run_workload(
    rel: PartitionedRelation,
    workload: WorkloadSpec,
    mode: str = "auto",
    seed: int = 0,
    naive: bool = False,
    verify: bool = False,
    charge: str = "scan",
    log_path=None,
) -> WorkloadRun:
    """Plan bins, upload, run every query and collect the adversarial view.

    With ``verify`` each answer is compared with the reference answer; the
    indexes of queries that differ land in ``mismatches``.
    """
    root = Rng(seed)
    meta = build_metadata(rel)
    layout = create_bins(meta, root.child("permutation"), mode)
    key = OwnerKey.from_seed(layout.permutation_seed)
    enc, plain = encrypt_and_upload(rel, layout, root.child("upload"), key, charge)
    queries = workload.queries(meta.domain)
    log = ObservationLog(log_path)
    run = WorkloadRun(layout, enc, plain, queries)
    truth = oracle_index(rel) if verify else {}
    for qi, w in enumerate(queries):
        try:
            if naive:
                res = execute_naive(w, enc, plain, key, layout.sensitive_counts, log, qi)
            else:
                res = execute(plan_query(layout, w, key), enc, plain, key, log, qi)
        except Exception as exc:
            raise RuntimeError(f"query {qi} ({w!r}) failed: {exc}") from exc
        ids = res.row_ids()
        rec = {"query_index": qi, "value": w, "row_ids": ids, "stats": res.stats.to_dict()}
        if verify:
            ok = ids == truth.get(w, [])
            rec["verified"] = ok
            if not ok:
                run.mismatches.append(qi)
        run.results.append(rec)
        run.report.add(w, res.stats)
    run.view = make_view(
        log,
        enc,
        meta.nonsensitive_values,
        len(meta.associated),
        "naive" if naive else "qb",
        layout.mode,
    )
    return run


def bench_summary(run: WorkloadRun, rel: PartitionedRelation) -> dict:
    """Counter totals plus the empirical model inputs they imply."""
    totals = run.report.totals()
    D = len(rel.rows)
    q = max(1, totals["queries"])
    lay = run.layout
    sb = max((len(lay.sensitive_values(i)) for i in range(lay.n_sb)), default=0)
    nsb = max((len(lay.nonsensitive_values(j)) for j in range(lay.n_nsb)), default=0)
    totals["plain_predicates"] = sum(len(o.plain_predicates) for o in run.view.observations)
    return {
        "totals": totals,
        "D": D,
        "alpha": len(rel.sensitive_rows) / D if D else 0.0,
        "rho": totals["matches"] / q / D if D else 0.0,
        "sb_size": sb,
        "nsb_size": nsb,
        "ns_values": len(build_metadata(rel).nonsensitive_values),
        "encrypted_store_size": run.enc.size,
        "padded_totals": lay.padded_totals(),
    }

