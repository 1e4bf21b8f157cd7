"""Analytical cost of binned search against a fully encrypted baseline.

``eta`` is the cost of answering one query with bins (an encrypted scan of
the sensitive part plus ``|NSB|`` plaintext lookups, and shipping both
bins) divided by the cost of one encrypted query over the whole dataset.
Binning wins when ``eta < 1``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence


def log_depth(d: float) -> float:
    """Index depth for ``d`` tuples; base 2 throughout the model."""
    return math.log2(d) if d > 1 else 0.0


@dataclass(frozen=True)
class CostParams:
    """Model inputs in time units per tuple.

    ``beta = c_e / c_p`` and ``gamma = c_e / c_com`` are derived. ``rho``
    defaults to ``1 / ns_values`` and the bin sizes to ``ceil(sqrt(ns_values))``.
    """

    alpha: float
    D: float
    ns_values: int
    c_e: float = 1.0
    c_p: float = 1e-2
    c_com: float = 1e-4
    rho: float | None = None
    sb_size: int | None = None
    nsb_size: int | None = None

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha={self.alpha} outside [0, 1]")
        if self.D < 1 or self.ns_values < 1:
            raise ValueError("D and ns_values must be positive")
        if self.c_e <= 0 or self.c_p <= 0 or self.c_com <= 0:
            raise ValueError("unit costs must be positive")
        if self.rho is not None and not 0.0 < self.rho <= 1.0:
            raise ValueError(f"rho={self.rho} outside (0, 1]")

    @classmethod
    def from_ratios(
        cls,
        alpha: float,
        beta: float,
        gamma: float,
        D: float,
        ns_values: int,
        rho: float | None = None,
        c_e: float = 1.0,
        sb_size: int | None = None,
        nsb_size: int | None = None,
    ) -> "CostParams":
        if gamma <= 0:
            raise ValueError(f"gamma must be positive, got {gamma}")
        if beta <= 0:
            raise ValueError(f"beta must be positive, got {beta}")
        return cls(alpha, D, ns_values, c_e, c_e / beta, c_e / gamma, rho, sb_size, nsb_size)

    @property
    def beta(self) -> float:
        return self.c_e / self.c_p

    @property
    def gamma(self) -> float:
        return self.c_e / self.c_com

    @property
    def selectivity(self) -> float:
        return self.rho if self.rho is not None else 1.0 / self.ns_values

    @property
    def sb(self) -> int:
        return self.sb_size if self.sb_size is not None else math.ceil(math.sqrt(self.ns_values))

    @property
    def nsb(self) -> int:
        return self.nsb_size if self.nsb_size is not None else math.ceil(math.sqrt(self.ns_values))


def cost_plain(x: float, D: float, p: CostParams) -> float:
    """``x`` indexed plaintext lookups, each shipping a ``rho`` share of ``D``."""
    if x < 0:
        raise ValueError("query count must be non-negative")
    return x * (log_depth(D) * p.c_p + p.selectivity * D * p.c_com)


def cost_crypt(x: float, D: float, p: CostParams) -> float:
    """One encrypted scan answering ``x`` predicates, plus shipping their results."""
    if x < 0:
        raise ValueError("query count must be non-negative")
    return p.c_e * D + p.selectivity * x * D * p.c_com


@dataclass(frozen=True)
class EtaResult:
    eta_full: float
    eta_simplified: float
    crypt_term: float
    plain_term: float

    @property
    def abs_diff(self) -> float:
        return abs(self.eta_full - self.eta_simplified)

    @property
    def rel_diff(self) -> float:
        return self.abs_diff / self.eta_full if self.eta_full else 0.0


def eta(p: CostParams) -> EtaResult:
    """Both the unreduced ratio and the closed form ``alpha + rho(|SB|+|NSB|)/gamma``.

    The unreduced ratio charges every communication term with the full
    ``rho * D`` and the plaintext lookups with ``log(D)``, as the model does
    before it drops small terms.
    """
    rho, D = p.selectivity, p.D
    denom = cost_crypt(1, D, p)
    crypt = (p.c_e * p.alpha * D + p.sb * rho * D * p.c_com) / denom
    plain = (p.nsb * log_depth(D) * p.c_p + p.nsb * rho * D * p.c_com) / denom
    simplified = p.alpha + rho * (p.sb + p.nsb) / p.gamma
    return EtaResult(crypt + plain, simplified, crypt, plain)


def break_even_alpha(rho: float, ns_values: int, gamma: float) -> float:
    """Largest sensitive share for which binning still beats full encryption."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    return 1.0 - 2.0 * rho * math.sqrt(ns_values) / gamma


def beats_full_encryption(alpha: float, rho: float, ns_values: int, gamma: float) -> bool:
    return alpha < break_even_alpha(rho, ns_values, gamma)


def eta_curve(
    rho: float,
    alphas: Sequence[float],
    gammas: Sequence[float],
    ns_values: int = 10_000,
) -> list[dict]:
    """Closed-form eta on a (gamma, alpha) grid, gamma-major."""
    side = math.ceil(math.sqrt(ns_values))
    return [
        {"gamma": g, "alpha": a, "eta": a + rho * 2 * side / g}
        for g in gammas
        for a in alphas
    ]


def log_range(lo: float, hi: float, points: int) -> list[float]:
    if points < 1 or lo <= 0 or hi < lo:
        return []
    if points == 1:
        return [lo]
    step = (math.log10(hi) - math.log10(lo)) / (points - 1)
    return [10 ** (math.log10(lo) + i * step) for i in range(points)]


def to_csv(rows: Iterable[Mapping], columns: Sequence[str]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({c: r[c] for c in columns})
    return buf.getvalue()


def eta_empirical(totals: Mapping[str, float], D: float, p: CostParams) -> float:
    """Eta from workload counters instead of the selectivity assumption.

    The binned cost charges every scanned ciphertext, every fetched row and
    one index lookup per plaintext predicate. The baseline charges one full
    encrypted scan per query and ships only the true matches.
    """
    q = totals.get("queries", 0)
    if not q:
        raise ValueError("no queries in the counters")
    binned = (
        p.c_e * totals["enc_scanned"]
        + p.c_com * (totals["enc_fetched"] + totals["plain_fetched"])
        + p.c_p * totals.get("plain_predicates", 0) * log_depth(D)
    )
    baseline = p.c_e * D * q + p.c_com * totals["matches"]
    return binned / baseline
