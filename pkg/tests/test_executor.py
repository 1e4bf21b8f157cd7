import pytest
from hypothesis import given, settings, strategies as st

from qbin.binning import BinLayout, create_bins, create_bins_general
from qbin.core import Rng, Row, build_metadata, ingest
from qbin.executor import (
    BenchReport,
    PlanError,
    bin_pair,
    execute,
    execute_naive,
    plan_deviation,
    plan_query,
    run_plan,
)
from qbin.stores import IntegrityError, ObservationLog, OwnerKey, encrypt_and_upload


def test_plans_on_ten_value_layout(ten):
    assert plan_query(ten.layout, "v2", ten.key).bins == (2, 0)
    assert plan_query(ten.layout, "ns13", ten.key).bins == (2, 1)
    assert plan_query(ten.layout, "s7", ten.key).bins == (2, 1)
    assert plan_query(ten.layout, "nowhere", ten.key).empty


def test_employee_query_for_e259(employee):
    log = ObservationLog()
    res = run_plan(employee.layout, "E259", employee.enc, employee.plain, employee.key, log)
    obs = list(log)[0]
    assert sorted(obs.cipher_refs) == sorted(employee.refs_of("E259") + employee.refs_of("E101"))
    assert obs.plain_row_ids == ["t2", "t6"]
    assert res.row_ids() == ["t2", "t4"]


def test_employee_query_for_e199(employee):
    log = ObservationLog()
    res = run_plan(employee.layout, "E199", employee.enc, employee.plain, employee.key, log)
    obs = list(log)[0]
    assert sorted(obs.cipher_refs) == sorted(employee.refs_of("E259") + employee.refs_of("E101"))
    assert obs.plain_row_ids == ["t3", "t8"]
    assert res.row_ids() == ["t3"]
    assert res.stats.plain_discarded == 1 and res.stats.enc_discarded == 2


def test_absent_value_contacts_nothing(employee):
    log = ObservationLog()
    res = run_plan(employee.layout, "E000", employee.enc, employee.plain, employee.key, log)
    assert res.rows == set() and len(log) == 0
    assert employee.enc.rows_scanned == 0 and employee.plain.rows_fetched == 0


@pytest.mark.parametrize(
    "w,n_cipher,plain",
    [("E259", 1, ["t2"]), ("E101", 1, []), ("E199", 0, ["t3"])],
)
def test_naive_views(employee, w, n_cipher, plain):
    log = ObservationLog()
    execute_naive(w, employee.enc, employee.plain, employee.key, employee.meta.sensitive_counts, log)
    obs = list(log)[0]
    assert obs.n_cipher == n_cipher and obs.plain_row_ids == plain
    if n_cipher:
        assert obs.cipher_refs == employee.refs_of(w)


def test_rules_disagreeing_raise(ten):
    lay = ten.layout
    broken = BinLayout(
        lay.sensitive_bins,
        [list(reversed(lay.nonsensitive_bins[0])), lay.nonsensitive_bins[1]],
        lay.permutation_seed,
        lay.fake_counts,
        lay.mode,
        lay.sensitive_counts,
        lay.info,
    )
    with pytest.raises(PlanError):
        bin_pair(broken, "v5")


def test_tampered_store_raises(ten):
    c = ten.enc.rows[0]
    ten.enc.rows[0] = type(c)(c.tuple_ref, c.blob[:-1] + bytes([c.blob[-1] ^ 1]), c.tag)
    with pytest.raises(IntegrityError):
        for w in ten.meta.domain:
            run_plan(ten.layout, w, ten.enc, ten.plain, ten.key)


def test_deviation_keeps_shared_values_on_their_rules(ten):
    rng = Rng(0)
    for v in ten.meta.associated:
        assert plan_deviation(ten.layout, v, rng, key=ten.key).bins == plan_query(ten.layout, v, ten.key).bins
    assert plan_deviation(ten.layout, "s4", rng, {"s4": (4, 0)}, ten.key).bins == (4, 0)


def _rel_from(spec):
    rows, n = [], 0
    for v, (cs, cn) in spec.items():
        for _ in range(cs):
            rows.append(Row(f"r{n}", {"k": v}, True)); n += 1
        for _ in range(cn):
            rows.append(Row(f"r{n}", {"k": v}, False)); n += 1
    return ingest(rows, "k")


relations = st.dictionaries(
    st.integers(0, 40),
    st.tuples(st.integers(0, 4), st.integers(0, 3)).filter(lambda t: sum(t) > 0),
    min_size=2,
    max_size=25,
)


@settings(max_examples=40, deadline=None)
@given(relations, st.integers(0, 1000))
def test_every_answer_matches_full_scan(spec, seed):
    rel = _rel_from(spec)
    meta = build_metadata(rel)
    try:
        lay = create_bins(meta, Rng(seed))
    except ValueError:
        return
    key = OwnerKey.from_seed(lay.permutation_seed)
    enc, plain = encrypt_and_upload(rel, lay, Rng(seed + 1), key)
    for w in meta.domain + [-1]:
        res = run_plan(lay, w, enc, plain, key)
        assert res.rows == rel.select(w)
        if w in meta.sensitive_counts or w in meta.nonsensitive_counts:
            i, j = plan_query(lay, w, key).bins
            assert res.stats.enc_fetched == lay.padded_totals()[i]


def test_fetch_size_independent_of_value(nine_counts_meta):
    rows = [Row(f"{v}-{k}", {"k": v}, True) for v, c in nine_counts_meta.sensitive_counts.items() for k in range(c)]
    rows += [Row(f"p-{v}", {"k": v}) for v in nine_counts_meta.nonsensitive_values]
    rel = ingest(rows, "k")
    lay = create_bins_general(build_metadata(rel), Rng(0))
    key = OwnerKey.from_seed(lay.permutation_seed)
    enc, plain = encrypt_and_upload(rel, lay, Rng(1), key)
    fetched = {run_plan(lay, w, enc, plain, key).stats.enc_fetched for w in build_metadata(rel).domain}
    assert fetched == {160}


def test_bench_report_totals(ten):
    rep = BenchReport()
    for w in ten.meta.domain:
        rep.add(w, run_plan(ten.layout, w, ten.enc, ten.plain, ten.key).stats)
    tot = rep.totals()
    assert tot["queries"] == 15
    assert tot["matches"] == sum(q["matches"] for q in rep.per_query) == 20
    assert tot["discarded"] == tot["enc_fetched"] + tot["plain_fetched"] - tot["matches"]
