import csv
import io
import math

import pytest
from hypothesis import given, strategies as st

from qbin.costmodel import (
    CostParams,
    beats_full_encryption,
    break_even_alpha,
    cost_crypt,
    cost_plain,
    eta,
    eta_curve,
    eta_empirical,
    log_range,
    to_csv,
)


def test_closed_form_fixture():
    for alpha in (0.0, 0.25, 0.9):
        p = CostParams.from_ratios(alpha, 1e4, 25_000, 1e6, 10_000, rho=0.1)
        assert abs(eta(p).eta_simplified - (alpha + 0.0008)) < 1e-12


def test_no_sensitive_data_and_tiny_selectivity():
    p = CostParams.from_ratios(0.0, 1e4, 25_000, 1e6, 10_000, rho=1e-12)
    assert eta(p).eta_simplified < 1e-12


def test_cost_crypt_fixture():
    p = CostParams(0.5, 1000, 100, c_e=10, c_com=0.004, rho=0.001)
    assert cost_crypt(1, 1000, p) == pytest.approx(10000.004, abs=1e-9)
    assert cost_crypt(0, 1000, p) == 10 * 1000
    assert cost_crypt(5, 1000, p) - cost_crypt(4, 1000, p) == pytest.approx(0.004)


def test_cost_plain_uses_log2():
    p = CostParams(0.5, 1024, 100, c_p=1, c_com=1, rho=0.1)
    assert cost_plain(1, 1024, p) == pytest.approx(10 + 102.4)
    assert cost_plain(0, 1024, p) == 0


def test_defaults():
    p = CostParams(0.3, 1e5, 10_000)
    assert p.selectivity == 1e-4 and p.sb == p.nsb == 100
    assert CostParams(0.3, 1e5, 10).sb == 4


@pytest.mark.parametrize("kw", [{"gamma": 0}, {"gamma": -1}, {"beta": 0}])
def test_domain_errors(kw):
    args = {"alpha": 0.2, "beta": 100, "gamma": 100, "D": 1e4, "ns_values": 100} | kw
    with pytest.raises(ValueError):
        CostParams.from_ratios(**args)


def test_bad_inputs():
    with pytest.raises(ValueError):
        CostParams(1.5, 10, 10)
    with pytest.raises(ValueError):
        CostParams(0.5, 10, 10, rho=0)
    with pytest.raises(ValueError):
        break_even_alpha(0.1, 100, 0)


def test_break_even_predicate_grid():
    n = 0
    for i in range(100):
        for j in range(100):
            alpha, gamma, rho, ns = i / 99, 10 ** (1 + 4 * j / 99), 0.1, 10_000
            p = CostParams.from_ratios(alpha, 1e4, gamma, 1e6, ns, rho=rho)
            assert beats_full_encryption(alpha, rho, ns, gamma) == (alpha < 1 - 2 * rho * math.sqrt(ns) / gamma)
            assert beats_full_encryption(alpha, rho, ns, gamma) == (eta(p).eta_simplified < 1)
            n += 1
    assert n == 10_000


@given(
    st.floats(0, 1), st.sampled_from([100, 1e3, 1e5]), st.sampled_from([100, 1e3, 25_000, 1e6]),
    st.sampled_from([1e4, 1e5, 1e7]), st.sampled_from([100, 10_000]), st.sampled_from([None, 0.01, 0.1, 1.0]),
)
def test_dropped_terms_stay_small(alpha, beta, gamma, D, ns, rho):
    r = eta(CostParams.from_ratios(alpha, beta, gamma, D, ns, rho=rho))
    assert r.abs_diff < 0.05


def test_curve_shape_from_csv():
    rows = eta_curve(0.1, [0.1, 0.3, 0.5, 0.7, 0.9], log_range(100, 1e5, 13))
    table = list(csv.DictReader(io.StringIO(to_csv(rows, ["gamma", "alpha", "eta"]))))
    assert len(table) == 65
    by = {(float(r["gamma"]), float(r["alpha"])): float(r["eta"]) for r in table}
    gammas = sorted({g for g, _ in by})
    alphas = sorted({a for _, a in by})
    for a in alphas:
        col = [by[(g, a)] for g in gammas]
        assert all(x >= y for x, y in zip(col, col[1:]))
        assert col[-1] - a < 1e-3
    for g in gammas:
        row = [by[(g, a)] for a in alphas]
        assert all(x < y for x, y in zip(row, row[1:]))


def test_single_point_curve_matches_eta():
    (row,) = eta_curve(0.1, [0.4], [25_000], 10_000)
    p = CostParams.from_ratios(0.4, 1e4, 25_000, 1e6, 10_000, rho=0.1)
    assert row["eta"] == pytest.approx(eta(p).eta_simplified, abs=1e-15)
    assert eta_curve(0.1, [], [1.0]) == [] and eta_curve(0.1, [0.1], []) == []


@given(st.floats(0, 1), st.floats(0, 1), st.floats(1e-3, 1), st.floats(1e-3, 1), st.floats(10, 1e6), st.floats(10, 1e6))
def test_monotone(a1, a2, r1, r2, g1, g2):
    def simp(a, r, g):
        return eta(CostParams.from_ratios(a, 1e3, g, 1e5, 400, rho=r)).eta_simplified
    lo_a, hi_a = sorted((a1, a2))
    lo_r, hi_r = sorted((r1, r2))
    lo_g, hi_g = sorted((g1, g2))
    assert simp(lo_a, 0.1, 1e3) <= simp(hi_a, 0.1, 1e3)
    assert simp(0.5, lo_r, 1e3) <= simp(0.5, hi_r, 1e3)
    assert simp(0.5, 0.1, lo_g) >= simp(0.5, 0.1, hi_g)


@given(st.floats(1, 1e7), st.floats(1, 1e7))
def test_costs_monotone_in_d(d1, d2):
    p = CostParams(0.5, 10, 10, rho=0.1)
    lo, hi = sorted((d1, d2))
    assert 0 <= cost_plain(3, lo, p) <= cost_plain(3, hi, p)
    assert 0 <= cost_crypt(3, lo, p) <= cost_crypt(3, hi, p)


def test_empirical_eta_from_counters():
    p = CostParams(0.5, 1000, 100, c_e=1, c_p=0.01, c_com=1e-4)
    totals = {"queries": 2, "enc_scanned": 1000, "enc_fetched": 20, "plain_fetched": 20,
              "plain_predicates": 20, "matches": 4}
    expect = (1000 + 1e-4 * 40 + 0.01 * 20 * math.log2(1000)) / (2000 + 1e-4 * 4)
    assert eta_empirical(totals, 1000, p) == pytest.approx(expect)
    with pytest.raises(ValueError):
        eta_empirical({"queries": 0}, 1000, p)
