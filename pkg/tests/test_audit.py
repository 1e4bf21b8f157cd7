from fractions import Fraction

import pytest

from qbin.audit import (
    AdversarialView,
    AuditError,
    Universe,
    check_partitioned_security,
    frequency_count_attack,
    make_view,
    owner_bin_refs,
    posterior_aggregate,
    posterior_kernel,
    prior,
    size_attack,
    surviving_graph,
    workload_skew_attack,
)
from qbin.binning import create_bins_base, create_bins_general
from qbin.core import Rng, Row, build_metadata, ingest
from qbin.executor import execute, plan_deviation, plan_query
from qbin.stores import ObservationLog, StoreObservation

from brute_oracle import sweep_posteriors, worst_shifts
from conftest import Deployment, TEN_FILL, TEN_ORDER, small_rows, ten_rows


def obs(i, refs, values):
    return StoreObservation(i, sorted(values), [], [], sorted(refs))


def sweep_view(u, sb, nsb):
    """The view a full sweep leaves: every bin pair fetched once."""
    o = [obs(i * len(nsb) + j, a, b) for i, a in enumerate(sb) for j, b in enumerate(nsb)]
    return AdversarialView(o, {"refs": list(u.refs), "nonsensitive_values": list(u.values),
                                "associations": u.associations, "mechanism": "qb", "layout_mode": "base"})


def test_proof_sketch_instance():
    u = Universe(("E1", "E2", "E3", "E4"), ("v1", "v2", "v3", "v4"), 4, "base")
    av = AdversarialView([obs(0, ["E1", "E3"], ["v1", "v2"])])
    assert prior(u).pair[("E1", "v1")] == Fraction(1, 4)
    for route in ("kernel", "aggregate"):
        assert posterior_kernel(u, av, "qb").pair[("E1", "v1")] == Fraction(1, 4)
        v = check_partitioned_security(av, u, "qb", route)
        assert v.holds and v.witness is None


def test_empty_view_holds():
    u = Universe(("a", "b"), ("x", "y"), 1)
    assert check_partitioned_security(AdversarialView(), u, "qb").holds
    g = surviving_graph(AdversarialView([], {"refs": ["a", "b"], "nonsensitive_values": ["x", "y"]}), "values")
    assert g.is_complete()


def test_naive_employee_fails_with_e199_witness(employee):
    av = employee.run(["E259", "E101", "E199"], naive=True)
    v = check_partitioned_security(av)
    assert not v.condition1_holds
    u = Universe.from_view(av)
    before, after = prior(u), posterior_kernel(u, av, "naive")
    for e in u.refs:
        assert before.pair[(e, "E199")] == Fraction(1, 8)
        assert after.pair[(e, "E199")] == 0
    assert before.value_assoc["E199"] == Fraction(1, 2) and after.value_assoc["E199"] == 0
    (t4,) = employee.refs_of("E259")
    assert after.pair[(t4, "E259")] == 1


def test_binned_employee_holds_on_both_routes(employee):
    av = employee.run(["E259", "E101", "E199"])
    for route in ("kernel", "aggregate"):
        assert check_partitioned_security(av, route=route).holds


def test_surviving_graph_after_sweep(ten):
    av = ten.run(ten.meta.domain)
    g = surviving_graph(av)
    assert len(g.left) == 5 and len(g.right) == 2 and g.is_complete()


def deviation_view(ten):
    """Unshared values paired at random: the unshared sensitive ones with
    the first plaintext bin, the unshared plaintext ones with SB_1."""
    pairing = {v: (ten.layout.locate_sensitive(v)[0], 0) for v in ["s4", "s7", "s8", "s9", "s10"]}
    pairing |= {v: (1, 1) for v in ["ns12", "ns13", "ns14", "ns15"]}
    log = ObservationLog()
    rng = Rng(5)
    for i, w in enumerate(ten.meta.domain):
        execute(plan_deviation(ten.layout, w, rng, pairing, ten.key), ten.enc, ten.plain, ten.key, log, i)
    return make_view(log, ten.enc, ten.meta.nonsensitive_values, 5, "deviation")


def test_deviation_drops_bin_edges(ten):
    av = deviation_view(ten)
    g = surviving_graph(av)
    sb = owner_bin_refs(ten.layout, ten.enc, ten.key)
    nsb = [frozenset(ten.layout.nonsensitive_values(j)) for j in range(2)]
    assert g.neighbors(sb[2]) == {nsb[0]}
    assert g.neighbors(nsb[1]) == {sb[1]}
    assert not g.is_complete()


def test_order_does_not_change_verdict(employee):
    a = employee.run(["E259", "E101", "E199", "E152"])
    b = employee.run(["E152", "E199", "E101", "E259"])
    assert check_partitioned_security(a).to_dict() == check_partitioned_security(b).to_dict()


def test_too_large_universe_refused():
    u = Universe(tuple(f"e{i}" for i in range(11)), tuple(f"v{i}" for i in range(11)), 3)
    with pytest.raises(AuditError, match="smaller"):
        check_partitioned_security(AdversarialView([obs(0, ["e0"], ["v0"])]), u, "qb")


@pytest.mark.parametrize("n_s,n_ns,k", [(2, 2, 1), (2, 4, 2), (3, 4, 2), (3, 6, 2), (4, 4, 2)])
def test_routes_match_brute_force_posteriors(n_s, n_ns, k):
    refs, vals, post = sweep_posteriors(n_s, n_ns, k)
    u = Universe(tuple(refs), tuple(vals), k, "base")
    for (sb, nsb), expect in list(post.items())[:6]:
        av = sweep_view(u, sorted(sb, key=sorted), sorted(nsb, key=sorted))
        for p in (posterior_kernel(u, av, "qb"), posterior_aggregate(u, av, "qb")):
            assert p.pair == expect["pair"]
            assert p.value_joint == expect["both"]


# Frozen from brute_oracle.worst_shifts: (pair shift, value-joint shift).
FROZEN_SHIFTS = {
    (2, 4, 2): (0, Fraction(1, 3)),
    (3, 4, 2): (0, 0),
    (3, 6, 2): (0, Fraction(1, 10)),
    (4, 4, 2): (0, 0),
}


@pytest.mark.parametrize("inst", sorted(FROZEN_SHIFTS))
def test_brute_force_shifts_frozen(inst):
    assert worst_shifts(*inst) == FROZEN_SHIFTS[inst]


@pytest.mark.parametrize("n_s,n_ns,k", [(2, 4, 2), (3, 6, 2)])
def test_uneven_bins_leak_pair_counts(n_s, n_ns, k):
    """When sensitive bins are not full, shared values crowd the low plaintext bins."""
    for seed in range(3):
        d = Deployment(ingest(small_rows(n_s, n_ns, k), "A"), create_bins_base(build_metadata(ingest(small_rows(n_s, n_ns, k), "A")), Rng(seed)))
        v = check_partitioned_security(d.run(d.meta.domain))
        assert v.condition1_holds and not v.condition2_holds


def test_possible_weighting_agrees_across_routes(employee):
    av = employee.run(employee.meta.domain)
    a = check_partitioned_security(av, weighting="possible")
    b = check_partitioned_security(av, route="aggregate", weighting="possible")
    assert (a.condition1_holds, a.condition2_holds, a.total_weight) == (b.condition1_holds, b.condition2_holds, b.total_weight)


def heavy_ten(general: bool):
    rows = ten_rows({("v1", "s"): 1000, ("v1", "n"): 2000})
    rel = ingest(rows, "A")
    meta = build_metadata(rel)
    if general:
        lay = create_bins_general(meta, Rng(0), order=TEN_ORDER, fill_order=TEN_FILL)
    else:
        lay = create_bins_base(meta, Rng(0), order=TEN_ORDER, fill_order=TEN_FILL)
    return Deployment(rel, lay)


def test_size_attack_without_padding():
    d = heavy_ten(False)
    av = d.run(d.meta.domain)
    rep = size_attack(av, d.refs_of("v1"), trials=2000)
    assert rep.success and rep.details["max_pair_total"] == 3005
    sb1 = owner_bin_refs(d.layout, d.enc, d.key)[1]
    assert rep.details["max_pair"][0] == "{" + ",".join(sorted(sb1)) + "}"


def test_size_attack_with_padding():
    d = heavy_ten(True)
    av = d.run(d.meta.domain)
    rep = size_attack(av, d.refs_of("v1"), trials=10_000)
    assert not rep.details["distinguishable"]
    assert rep.advantage <= 0.02


def test_size_attack_uniform_data(ten):
    assert not size_attack(ten.run(ten.meta.domain)).success


def test_frequency_attack(employee):
    heavy = heavy_ten(False)
    ws = ["v1", "v2", "s4", "v5"]
    counts = [heavy.meta.sensitive_counts.get(w, 0) for w in ws]
    naive = frequency_count_attack(heavy.run(ws, naive=True), counts, trials=2000)
    padded = heavy_ten(True)
    binned = frequency_count_attack(padded.run(ws), counts, trials=2000)
    assert naive.success and naive.accuracy == 1.0
    assert not binned.success


def skewed(n=1000, hot="v2", seed=0):
    r = Rng(seed)
    return [hot if r.random() < 0.9 else r.choice(["v1", "v3", "s4", "v5", "ns12"]) for _ in range(n)]


def test_skew_attack_bin_level_only(ten):
    av = ten.run(skewed())
    (hot_ref,) = ten.refs_of("v2")
    rep = workload_skew_attack(av, hot_ref, trials=10_000)
    assert rep.details["bin_identified"]
    assert abs(rep.accuracy - 0.5) < 0.02 and rep.baseline == 0.5
    assert not rep.success


def test_skew_attack_naive_finds_value(ten):
    av = ten.run(skewed(), naive=True)
    (hot_ref,) = ten.refs_of("v2")
    rep = workload_skew_attack(av, hot_ref, trials=2000)
    assert rep.accuracy == 1.0 and rep.success


def test_skew_attack_uniform_on_even_bins():
    rel = ingest(small_rows(9, 9, 9), "A")
    d = Deployment(rel, create_bins_base(build_metadata(rel), Rng(2)))
    r = Rng(3)
    av = d.run([r.choice(d.meta.domain) for _ in range(1000)])
    assert not workload_skew_attack(av).details["bin_identified"]


def test_uniform_values_can_load_bins_unevenly(ten):
    """Each bin serves its own values plus the plaintext-only values routed to it."""
    r = Rng(3)
    av = ten.run([r.choice(ten.meta.domain) for _ in range(1000)])
    rep = workload_skew_attack(av)
    assert rep.details["hot_set_size"] == 2
    served = [0] * 5
    for w in ten.meta.domain:
        served[plan_query(ten.layout, w, ten.key).sensitive_bin_index] += 1
    assert served == [3, 2, 3, 3, 4]
    assert rep.details["top_fetches"] > rep.details["second_fetches"]


def test_view_round_trip(tmp_path, employee):
    av = employee.run(["E259", "E199"])
    av.save(tmp_path / "av.ndjson")
    back = AdversarialView.load(tmp_path / "av.ndjson")
    assert back.auxiliary == av.auxiliary and back.pairs() == av.pairs()
    text = (tmp_path / "av.ndjson").read_text()
    assert "seed" not in text and "E101" not in text and "E159" not in text


def test_deviation_fails_condition_one(ten):
    v = check_partitioned_security(deviation_view(ten))
    assert not v.condition1_holds
    assert v.witness["after"] == "0"


def test_ten_value_sweep_holds(ten):
    assert check_partitioned_security(ten.run(ten.meta.domain)).holds
