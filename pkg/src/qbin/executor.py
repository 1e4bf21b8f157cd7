"""Owner-side query engine.

A query value is mapped to one sensitive and one non-sensitive bin, both
bins are fetched, the sensitive rows are decrypted, and the owner keeps
only the real rows that equal the query value.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Mapping

from .binning import BinLayout
from .core import Rng, Row, Value, value_key
from .stores import (
    EncryptedStore,
    ObservationLog,
    OwnerKey,
    PlaintextStore,
    StoreObservation,
)


class PlanError(RuntimeError):
    """The two retrieval rules disagree, which means the layout is corrupt."""


@dataclass(frozen=True)
class QueryPlan:
    query_value: Value
    sensitive_bin_index: int | None
    nonsensitive_bin_index: int | None
    tokens: tuple = ()
    plain_values: tuple = ()

    @property
    def empty(self) -> bool:
        return self.sensitive_bin_index is None and self.nonsensitive_bin_index is None

    @property
    def bins(self) -> tuple[int | None, int | None]:
        return self.sensitive_bin_index, self.nonsensitive_bin_index


@dataclass
class QueryStats:
    enc_fetched: int = 0
    plain_fetched: int = 0
    enc_scanned: int = 0
    fakes_discarded: int = 0
    enc_discarded: int = 0
    plain_discarded: int = 0
    matches: int = 0
    bytes_transferred: int = 0

    @property
    def discarded(self) -> int:
        return self.fakes_discarded + self.enc_discarded + self.plain_discarded

    def to_dict(self) -> dict:
        d = asdict(self)
        d["discarded"] = self.discarded
        return d


@dataclass
class QueryResult:
    query_value: Value
    rows: set = field(default_factory=set)
    stats: QueryStats = field(default_factory=QueryStats)
    observation: StoreObservation | None = None

    def row_ids(self) -> list[str]:
        return sorted(r.row_id for r in self.rows)


def bin_tokens(layout: BinLayout, i: int, key: OwnerKey) -> tuple[int, ...]:
    """Search tags for every real and fake tuple of sensitive bin ``i``."""
    toks = [
        key.tag(v, k)
        for v in layout.sensitive_values(i)
        for k in range(layout.sensitive_counts.get(v, 1))
    ]
    toks.extend(key.fake_tag(i, k) for k in range(layout.fake_counts[i]))
    return tuple(sorted(toks))


def bin_pair(layout: BinLayout, w: Value) -> tuple[int | None, int | None]:
    """Bin indexes for ``w`` under the two retrieval rules."""
    s = layout.locate_sensitive(w)
    ns = layout.locate_nonsensitive(w)
    r1 = (s[0], s[1] % layout.n_nsb) if s else None
    r2 = (ns[1] % layout.n_sb, ns[0]) if ns else None
    if r1 and r2 and r1 != r2:
        raise PlanError(f"value {w!r}: rule R1 gives {r1}, rule R2 gives {r2}")
    return r1 or r2 or (None, None)


def _make_plan(layout: BinLayout, w: Value, i: int | None, j: int | None, key: OwnerKey) -> QueryPlan:
    if i is None:
        return QueryPlan(w, None, None)
    return QueryPlan(
        w,
        i,
        j,
        bin_tokens(layout, i, key),
        tuple(sorted(layout.nonsensitive_values(j), key=value_key)),
    )


def plan_query(layout: BinLayout, w: Value, key: OwnerKey | None = None) -> QueryPlan:
    key = key or OwnerKey.from_seed(layout.permutation_seed)
    i, j = bin_pair(layout, w)
    return _make_plan(layout, w, i, j, key)


def plan_deviation(
    layout: BinLayout,
    w: Value,
    rng: Rng,
    pairing: Mapping[Value, tuple[int, int]] | None = None,
    key: OwnerKey | None = None,
) -> QueryPlan:
    """Insecure variant: unassociated values get a random partner bin.

    Associated values still follow the retrieval rules (they must, or their
    rows would not meet). ``pairing`` pins the bin pair of chosen values.
    Kept only as a negative control for the auditor.
    """
    key = key or OwnerKey.from_seed(layout.permutation_seed)
    if pairing and w in pairing:
        i, j = pairing[w]
        return _make_plan(layout, w, i, j, key)
    s = layout.locate_sensitive(w)
    ns = layout.locate_nonsensitive(w)
    if s and ns:
        return plan_query(layout, w, key)
    if s:
        return _make_plan(layout, w, s[0], rng.randrange(layout.n_nsb), key)
    if ns:
        return _make_plan(layout, w, rng.randrange(layout.n_sb), ns[0], key)
    return QueryPlan(w, None, None)


def execute(
    plan: QueryPlan,
    enc: EncryptedStore,
    plain: PlaintextStore,
    key: OwnerKey,
    log: ObservationLog | None = None,
    query_index: int = 0,
) -> QueryResult:
    """Fetch both bins of ``plan``, decrypt, filter and merge.

    An empty plan returns at once; the stores are never contacted for
    values outside the domain.
    """
    result = QueryResult(plan.query_value)
    if plan.empty:
        return result
    w = plan.query_value
    st = result.stats
    scanned_before = enc.rows_scanned
    cts = enc.select(plan.tokens)
    st.enc_scanned = enc.rows_scanned - scanned_before
    st.enc_fetched = len(cts)
    for c in cts:
        st.bytes_transferred += len(c.blob) + len(c.tuple_ref)
        payload = key.decrypt(c.blob)
        if payload["f"]:
            st.fakes_discarded += 1
        elif payload["a"] == w:
            result.rows.add(Row.from_dict(payload["r"]))
        else:
            st.enc_discarded += 1
    prows = plain.select(plan.plain_values)
    st.plain_fetched = len(prows)
    for r in prows:
        st.bytes_transferred += plain.row_bytes(r)
        if r.attributes[plain.attribute] == w:
            result.rows.add(r)
        else:
            st.plain_discarded += 1
    st.matches = len(result.rows)
    result.observation = StoreObservation(
        query_index,
        list(plan.plain_values),
        [f"{t:016x}" for t in plan.tokens],
        sorted(r.row_id for r in prows),
        sorted(c.tuple_ref for c in cts),
    )
    if log is not None:
        log.append(result.observation)
    return result


def execute_naive(
    w: Value,
    enc: EncryptedStore,
    plain: PlaintextStore,
    key: OwnerKey,
    sensitive_counts: Mapping[Value, int],
    log: ObservationLog | None = None,
    query_index: int = 0,
) -> QueryResult:
    """Insecure baseline: fetch only exact matches from each side.

    Both stores are always asked, so a value present on one side only shows
    up as an empty answer on the other.
    """
    n = max(1, sensitive_counts.get(w, 0))
    plan = QueryPlan(w, -1, -1, tuple(sorted(key.tag(w, k) for k in range(n))), (w,))
    return execute(plan, enc, plain, key, log, query_index)


def run_plan(
    layout: BinLayout,
    w: Value,
    enc: EncryptedStore,
    plain: PlaintextStore,
    key: OwnerKey | None = None,
    log: ObservationLog | None = None,
    query_index: int = 0,
) -> QueryResult:
    """Plan and execute in one call."""
    key = key or OwnerKey.from_seed(layout.permutation_seed)
    return execute(plan_query(layout, w, key), enc, plain, key, log, query_index)


@dataclass
class BenchReport:
    """Counters per query plus their sums."""

    per_query: list[dict] = field(default_factory=list)

    def add(self, w: Value, stats: QueryStats) -> None:
        self.per_query.append({"value": w, **stats.to_dict()})

    def totals(self) -> dict:
        keys = [k for k in QueryStats().to_dict()]
        return {k: sum(q[k] for q in self.per_query) for k in keys} | {"queries": len(self.per_query)}
