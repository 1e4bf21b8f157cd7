"""What the cloud can infer from what it saw.

The exact security check models the adversary as a Bayesian who knows the
public shape of the data (the encrypted refs, the plaintext values, how
many values are associated, and which mechanism produced the view) but not
the secret permutation or fill order. Its hidden state is an assignment
``sigma`` of each encrypted ref to the plaintext value it equals, or to
nothing. The weight of ``sigma`` after the view is the number of secret
layouts that realize it and reproduce every observed bin. A query's choice
of value is not treated as random, so an observation only says which bin
pairs exist.

Two independent routes compute the posterior: a per-assignment enumeration
(``kernel``) and an enumeration over bin-level association counts
(``aggregate``). Tests check that they agree exactly.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import _kernels
from .binning import BinLayout, approx_square_factors
from .core import Rng, Value, iter_ndjson, value_key
from .executor import bin_tokens
from .stores import EncryptedStore, OwnerKey, StoreObservation

MECHANISMS = ("qb", "naive", "deviation")
WEIGHTINGS = ("layouts", "possible")
MAX_EXACT = 10
MAX_COMPLETIONS = 50_000
EPSILON = 0.02
TRIALS = 10_000


class AuditError(ValueError):
    """The view cannot be audited as requested."""


@dataclass
class AdversarialView:
    """Observations plus the auxiliary knowledge the adversary starts with.

    ``auxiliary`` keys: ``refs`` (every encrypted ref in the store),
    ``nonsensitive_values`` (the plaintext domain), ``associations`` (the
    number of values present on both sides), ``mechanism`` and
    ``layout_mode``. None of this is owner secret beyond the association
    count, which the oracle grants the adversary to fix its prior.
    """

    observations: list[StoreObservation] = field(default_factory=list)
    auxiliary: dict = field(default_factory=dict)

    def pairs(self) -> set[tuple[frozenset, frozenset]]:
        return {
            (frozenset(o.cipher_refs), frozenset(o.plain_predicates)) for o in self.observations
        }

    def save(self, path: str | Path) -> None:
        with open(path, "w") as fh:
            fh.write(json.dumps({"kind": "aux", **self.auxiliary}, sort_keys=True) + "\n")
            for o in self.observations:
                fh.write(json.dumps({"kind": "obs", **o.to_dict()}, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "AdversarialView":
        av = cls()
        for d in iter_ndjson(path):
            kind = d.pop("kind", "obs")
            if kind == "aux":
                av.auxiliary = d
            else:
                av.observations.append(StoreObservation.from_dict(d))
        return av


def make_view(
    observations: Iterable[StoreObservation],
    enc: EncryptedStore,
    nonsensitive_values: Sequence[Value],
    associations: int,
    mechanism: str = "qb",
    layout_mode: str = "base",
) -> AdversarialView:
    return AdversarialView(
        list(observations),
        {
            "refs": sorted(c.tuple_ref for c in enc.rows),
            "nonsensitive_values": sorted(nonsensitive_values, key=value_key),
            "associations": associations,
            "mechanism": mechanism,
            "layout_mode": layout_mode,
        },
    )


def owner_bin_refs(layout: BinLayout, enc: EncryptedStore, key: OwnerKey) -> list[frozenset]:
    """Owner-side ground truth: the refs stored for each sensitive bin."""
    return [frozenset(c.tuple_ref for c in enc.select(bin_tokens(layout, i, key))) for i in range(layout.n_sb)]


# --- surviving matches -------------------------------------------------------

UNSEEN = "*"


@dataclass
class SurvivingGraph:
    left: list
    right: list
    edges: set
    granularity: str

    def is_complete(self) -> bool:
        return len(self.edges) == len(self.left) * len(self.right)

    def neighbors(self, node) -> set:
        return {r for l, r in self.edges if l == node} | {l for l, r in self.edges if r == node}

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["left", "right"])
            for l, r in sorted((_label(l), _label(r)) for l, r in self.edges):
                w.writerow([l, r])


def _label(node) -> str:
    if isinstance(node, frozenset):
        return "{" + ",".join(str(v) for v in sorted(node, key=value_key)) + "}"
    return str(node)


def surviving_graph(av: AdversarialView, granularity: str = "bins") -> SurvivingGraph:
    """Associations the view still allows.

    At bin level the nodes are the distinct fetched sets, plus a ``*`` node
    per side for items never fetched, which may pair with anything. At value
    level an edge ``(ref, value)`` survives unless both were fetched and
    never together.
    """
    refs = list(av.auxiliary.get("refs", []))
    values = list(av.auxiliary.get("nonsensitive_values", []))
    pairs = {(a, b) for a, b in av.pairs() if a or b}
    seen_r = set().union(*(a for a, _ in pairs)) if pairs else set()
    seen_v = set().union(*(b for _, b in pairs)) if pairs else set()
    if granularity == "bins":
        left = sorted({a for a, _ in pairs if a}, key=_label)
        right = sorted({b for _, b in pairs if b}, key=_label)
        edges = {(a, b) for a, b in pairs if a and b}
        if set(refs) - seen_r:
            left.append(UNSEEN)
            edges |= {(UNSEEN, b) for b in right}
        if set(values) - seen_v:
            right.append(UNSEEN)
            edges |= {(a, UNSEEN) for a in left}
        return SurvivingGraph(left, right, edges, "bins")
    if granularity != "values":
        raise ValueError(f"unknown granularity {granularity!r}")
    together = {(e, v) for a, b in pairs for e in a for v in b}
    edges = {
        (e, v)
        for e in refs
        for v in values
        if e not in seen_r or v not in seen_v or (e, v) in together
    }
    return SurvivingGraph(refs, values, edges, "values")


# --- exact security oracle ---------------------------------------------------


@dataclass(frozen=True)
class Universe:
    """Public shape of the data the adversary reasons about."""

    refs: tuple
    values: tuple
    associations: int
    layout_mode: str = "base"

    @classmethod
    def from_view(cls, av: AdversarialView) -> "Universe":
        aux = av.auxiliary
        try:
            return cls(
                tuple(aux["refs"]),
                tuple(aux["nonsensitive_values"]),
                int(aux["associations"]),
                aux.get("layout_mode", "base"),
            )
        except KeyError as exc:
            raise AuditError(f"view lacks auxiliary field {exc}") from None

    @property
    def m(self) -> int:
        return len(self.refs)

    @property
    def n(self) -> int:
        return len(self.values)

    def shape(self) -> tuple[list[int], list[int], bool]:
        """Bin sizes of the ref side and the value side, and whether refs are dealt."""
        m, n = self.m, self.n
        if self.layout_mode == "base":
            f = approx_square_factors(n)
            if m < f.x or m > n:
                raise AuditError(f"base layout needs x={f.x} <= |S|={m} <= |NS|={n}")
            return _rr_sizes(m, f.x), [f.x] * (n // f.x), True
        if self.layout_mode == "reversed":
            f = approx_square_factors(m)
            if n < f.y or m <= n:
                raise AuditError(f"reversed layout needs y={f.y} <= |NS|={n} < |S|={m}")
            return [f.y] * f.x, _rr_sizes(n, f.y), False
        raise AuditError(f"exact audit supports base and reversed layouts, not {self.layout_mode!r}")


def _rr_sizes(count: int, bins: int) -> list[int]:
    return [count // bins + (1 if i < count % bins else 0) for i in range(bins)]


@dataclass
class SecurityVerdict:
    condition1_holds: bool
    condition2_holds: bool
    witness: dict | None
    max_deviation: float
    route: str
    total_weight: int

    @property
    def holds(self) -> bool:
        return self.condition1_holds and self.condition2_holds

    def to_dict(self) -> dict:
        return {
            "condition1_holds": self.condition1_holds,
            "condition2_holds": self.condition2_holds,
            "witness": self.witness,
            "max_deviation": self.max_deviation,
            "route": self.route,
            "total_weight": self.total_weight,
        }


@dataclass
class Posterior:
    """Marginals of the hidden assignment, as exact fractions."""

    pair: dict            # (ref, value) -> Pr[ref equals value]
    ref_assoc: dict       # ref -> Pr[ref has a partner]
    value_assoc: dict     # value -> Pr[value has a partner]
    ref_joint: dict       # (ref, ref') -> Pr[both have partners], ref != ref'
    value_joint: dict     # (value, value') -> Pr[both have partners]
    total: int


def prior(u: Universe) -> Posterior:
    m, n, k = u.m, u.n, u.associations
    pe = Fraction(k, m * n) if m and n else Fraction(0)
    ra = Fraction(k, m) if m else Fraction(0)
    va = Fraction(k, n) if n else Fraction(0)
    rj = Fraction(k * (k - 1), m * (m - 1)) if m > 1 else Fraction(0)
    vj = Fraction(k * (k - 1), n * (n - 1)) if n > 1 else Fraction(0)
    return Posterior(
        {(e, v): pe for e in u.refs for v in u.values},
        {e: ra for e in u.refs},
        {v: va for v in u.values},
        {(e, f): rj for e in u.refs for f in u.refs if e != f},
        {(v, w): vj for v in u.values for w in u.values if v != w},
        math.comb(m, k) * math.perm(n, k),
    )


def _partitions(items: list, sizes: list[int]):
    """Unordered partitions of ``items`` into blocks with the multiset ``sizes``."""
    if not items:
        if not sizes:
            yield []
        return
    first, rest = items[0], items[1:]
    for s in sorted(set(sizes)):
        left = list(sizes)
        left.remove(s)
        for comp in itertools.combinations(rest, s - 1):
            block = frozenset((first,) + comp)
            remaining = [x for x in rest if x not in block]
            for tail in _partitions(remaining, left):
                yield [block] + tail


def _observed_blocks(blocks: Iterable[frozenset], universe: set, sizes: list[int], side: str):
    blocks = [b for b in set(blocks) if b]
    seen: set = set()
    left = list(sizes)
    for b in blocks:
        if b & seen:
            raise AuditError(f"overlapping {side} bins in the view")
        if not b <= universe:
            raise AuditError(f"unknown {side} items in the view: {sorted(b - universe, key=value_key)!r}")
        if len(b) not in left:
            raise AuditError(f"{side} bin of size {len(b)} does not fit the layout shape")
        left.remove(len(b))
        seen |= b
    return blocks, sorted(universe - seen, key=value_key), left


def _completions(u: Universe, pairs):
    ref_sizes, val_sizes, ref_primary = u.shape()
    r_obs, r_rest, r_left = _observed_blocks((a for a, _ in pairs), set(u.refs), ref_sizes, "ref")
    v_obs, v_rest, v_left = _observed_blocks((b for _, b in pairs), set(u.values), val_sizes, "value")
    r_parts = list(_partitions(r_rest, r_left))
    v_parts = list(_partitions(v_rest, v_left))
    if len(r_parts) * len(v_parts) > MAX_COMPLETIONS:
        raise AuditError("too many unobserved layouts to enumerate; query more bins or shrink the universe")
    for rp in r_parts:
        for vp in v_parts:
            yield r_obs + rp, v_obs + vp, ref_primary


def _check_size(u: Universe) -> None:
    if u.m > MAX_EXACT or u.n > MAX_EXACT:
        raise AuditError(
            f"exact audit is limited to |S|, |NS| <= {MAX_EXACT} (got {u.m}, {u.n}); "
            "audit a smaller instance"
        )
    if not 0 <= u.associations <= min(u.m, u.n):
        raise AuditError(f"association count {u.associations} is impossible")


def _naive_allowed(u: Universe, observations: Sequence[StoreObservation]) -> np.ndarray:
    ri = {e: i for i, e in enumerate(u.refs)}
    vi = {v: j for j, v in enumerate(u.values)}
    allowed = np.ones((u.m, u.n + 1), dtype=np.uint8)
    for o in observations:
        if len(o.plain_predicates) != 1:
            raise AuditError("a naive observation carries exactly one plaintext predicate")
        w = o.plain_predicates[0]
        got = {ri[e] for e in o.cipher_refs}
        if w in vi:
            j = vi[w]
            for e in range(u.m):
                if e in got:
                    keep = allowed[e, j]
                    allowed[e, :] = 0
                    allowed[e, j] = keep
                else:
                    allowed[e, j] = 0
        else:
            for e in got:
                keep = allowed[e, u.n]
                allowed[e, :] = 0
                allowed[e, u.n] = keep
    return allowed


def posterior_kernel(
    u: Universe, av: AdversarialView, mechanism: str, weighting: str = "layouts"
) -> Posterior:
    """Posterior by enumerating assignments (compiled kernel when available)."""
    mode = 1 if weighting == "layouts" else 2
    m, n, k = u.m, u.n, u.associations
    counts = np.zeros((m, n), dtype=object)
    je = np.zeros((m, m), dtype=object)
    jv = np.zeros((n, n), dtype=object)
    total = 0
    if mechanism == "naive":
        allowed = _naive_allowed(u, av.observations)
        c, t, e2, v2 = _kernels.enumerate_assignments(
            allowed, k, 0, np.zeros(m, int), np.zeros(n, int), True, [m], [n]
        )
        counts, total, je, jv = c.astype(object), t, e2.astype(object), v2.astype(object)
    else:
        pairs = av.pairs()
        ri = {e: i for i, e in enumerate(u.refs)}
        vi = {v: j for j, v in enumerate(u.values)}
        for r_blocks, v_blocks, ref_primary in _completions(u, pairs):
            rb = np.empty(m, dtype=int)
            vb = np.empty(n, dtype=int)
            for a, blk in enumerate(r_blocks):
                for e in blk:
                    rb[ri[e]] = a
            for b, blk in enumerate(v_blocks):
                for v in blk:
                    vb[vi[v]] = b
            allowed = np.ones((m, n + 1), dtype=np.uint8)
            if mechanism == "deviation":
                ok = {(r_blocks.index(a), v_blocks.index(b)) for a, b in pairs if a and b}
                for e in range(m):
                    for v in range(n):
                        allowed[e, v] = (rb[e], vb[v]) in ok
            c, t, e2, v2 = _kernels.enumerate_assignments(
                allowed, k, mode, rb, vb, ref_primary,
                [len(b) for b in r_blocks], [len(b) for b in v_blocks],
            )
            counts = counts + c.astype(object)
            je = je + e2.astype(object)
            jv = jv + v2.astype(object)
            total += int(t)
    if total == 0:
        raise AuditError("no assignment is consistent with the view")
    return _posterior_from_counts(u, counts, je, jv, total)


def _posterior_from_counts(u: Universe, counts, je, jv, total: int) -> Posterior:
    return Posterior(
        {(e, v): Fraction(int(counts[i, j]), total) for i, e in enumerate(u.refs) for j, v in enumerate(u.values)},
        {e: Fraction(int(sum(counts[i, :])), total) for i, e in enumerate(u.refs)},
        {v: Fraction(int(sum(counts[:, j])), total) for j, v in enumerate(u.values)},
        {
            (e, f): Fraction(int(je[i, i2]), total)
            for i, e in enumerate(u.refs)
            for i2, f in enumerate(u.refs)
            if i != i2
        },
        {
            (v, w): Fraction(int(jv[j, j2]), total)
            for j, v in enumerate(u.values)
            for j2, w in enumerate(u.values)
            if j != j2
        },
        total,
    )


def _lambda_brute(limits: list[int], n_sec: int) -> int:
    return sum(
        all(p < lim for p, lim in zip(perm, limits)) for perm in itertools.permutations(range(n_sec))
    )


def posterior_aggregate(
    u: Universe, av: AdversarialView, mechanism: str, weighting: str = "layouts"
) -> Posterior:
    """Posterior by enumerating 0/1 matrices of bin-level association counts.

    For a matrix ``c`` the number of assignments is
    ``prod_A |A|!/(|A|-r_A)! * prod_B |B|!/(|B|-a_B)!`` and each of them has
    weight ``prod_A (|A|-r_A)! * prod_B (|B|-a_B)! * #positions``, so the
    product collapses to ``prod |A|! prod |B|! * #positions``. Under the
    ``possible`` weighting each realizable assignment counts once, so the
    mass of ``c`` is just the number of assignments. Marginals spread each
    bin pair's mass evenly over its members.
    """
    if mechanism == "naive":
        raise AuditError("the aggregate route covers binned mechanisms only")
    pairs = av.pairs()
    k = u.associations
    acc = {
        "pair": {(e, v): Fraction(0) for e in u.refs for v in u.values},
        "ref": {e: Fraction(0) for e in u.refs},
        "val": {v: Fraction(0) for v in u.values},
        "rj": {(e, f): Fraction(0) for e in u.refs for f in u.refs if e != f},
        "vj": {(v, w): Fraction(0) for v in u.values for w in u.values if v != w},
    }
    total = 0
    for r_blocks, v_blocks, ref_primary in _completions(u, pairs):
        pair_mass: Counter = Counter()
        ref_mass: Counter = Counter()
        val_mass: Counter = Counter()
        ref_joint: Counter = Counter()
        val_joint: Counter = Counter()
        nr, nv = len(r_blocks), len(v_blocks)
        rs = [len(b) for b in r_blocks]
        vs = [len(b) for b in v_blocks]
        ok = {(r_blocks.index(a), v_blocks.index(b)) for a, b in pairs if a and b}
        cells = [
            (a, b) for a in range(nr) for b in range(nv) if mechanism != "deviation" or (a, b) in ok
        ]
        base_w = math.prod(math.factorial(s) for s in rs) * math.prod(math.factorial(s) for s in vs)
        n_sigma_num = base_w
        for chosen in itertools.combinations(cells, k):
            r_used = Counter(a for a, _ in chosen)
            v_used = Counter(b for _, b in chosen)
            if any(r_used[a] > rs[a] for a in r_used) or any(v_used[b] > vs[b] for b in v_used):
                continue
            if ref_primary:
                limits = [min([rs[a] for a, b2 in chosen if b2 == b], default=nv) for b in range(nv)]
                lam = _lambda_brute(limits, nv)
            else:
                limits = [min([vs[b] for a2, b in chosen if a2 == a], default=nr) for a in range(nr)]
                lam = _lambda_brute(limits, nr)
            if lam == 0:
                continue
            if weighting == "layouts":
                w = base_w * lam
            else:
                w = n_sigma_num // (
                    math.prod(math.factorial(rs[a] - r_used[a]) for a in range(nr))
                    * math.prod(math.factorial(vs[b] - v_used[b]) for b in range(nv))
                )
            total += w
            for a, b in chosen:
                pair_mass[(a, b)] += w
            for a in range(nr):
                ref_mass[a] += w * r_used[a]
                for a2 in range(nr):
                    same = r_used[a] * (r_used[a] - 1) if a == a2 else r_used[a] * r_used[a2]
                    ref_joint[(a, a2)] += w * same
            for b in range(nv):
                val_mass[b] += w * v_used[b]
                for b2 in range(nv):
                    same = v_used[b] * (v_used[b] - 1) if b == b2 else v_used[b] * v_used[b2]
                    val_joint[(b, b2)] += w * same
        _fold(acc, u, r_blocks, v_blocks, pair_mass, ref_mass, val_mass, ref_joint, val_joint)
    if total == 0:
        raise AuditError("no assignment is consistent with the view")
    return Posterior(
        {key: Fraction(val, total) for key, val in acc["pair"].items()},
        {key: Fraction(val, total) for key, val in acc["ref"].items()},
        {key: Fraction(val, total) for key, val in acc["val"].items()},
        {key: Fraction(val, total) for key, val in acc["rj"].items()},
        {key: Fraction(val, total) for key, val in acc["vj"].items()},
        total,
    )


def _fold(acc, u, r_blocks, v_blocks, pair_mass, ref_mass, val_mass, ref_joint, val_joint) -> None:
    """Spread one completion's bin-level masses evenly over bin members."""
    rbin = {e: a for a, blk in enumerate(r_blocks) for e in blk}
    vbin = {v: b for b, blk in enumerate(v_blocks) for v in blk}
    for e in u.refs:
        a = rbin[e]
        acc["ref"][e] += Fraction(ref_mass[a], len(r_blocks[a]))
        for v in u.values:
            b = vbin[v]
            acc["pair"][(e, v)] += Fraction(pair_mass[(a, b)], len(r_blocks[a]) * len(v_blocks[b]))
        for f in u.refs:
            if f == e:
                continue
            a2 = rbin[f]
            denom = len(r_blocks[a]) * (len(r_blocks[a]) - 1) if a == a2 else len(r_blocks[a]) * len(r_blocks[a2])
            acc["rj"][(e, f)] += Fraction(ref_joint[(a, a2)], denom)
    for v in u.values:
        b = vbin[v]
        acc["val"][v] += Fraction(val_mass[b], len(v_blocks[b]))
        for w in u.values:
            if w == v:
                continue
            b2 = vbin[w]
            denom = len(v_blocks[b]) * (len(v_blocks[b]) - 1) if b == b2 else len(v_blocks[b]) * len(v_blocks[b2])
            acc["vj"][(v, w)] += Fraction(val_joint[(b, b2)], denom)


def check_partitioned_security(
    av: AdversarialView,
    universe: Universe | None = None,
    mechanism: str | None = None,
    route: str = "kernel",
    weighting: str = "layouts",
) -> SecurityVerdict:
    """Compare prior and posterior marginals exactly.

    Condition 1 compares ``Pr[ref equals value]`` for every pair. Condition
    2 compares, per value and per pair of values, the probability of having
    a partner on the other side, which fixes every count relation in a
    one-tuple-per-value universe.

    ``weighting="layouts"`` weighs each hidden assignment by the number of
    secret layouts behind it. ``weighting="possible"`` treats every
    (assignment, bin partition) pair that the view allows as equally likely.
    """
    u = universe or Universe.from_view(av)
    mech = mechanism or av.auxiliary.get("mechanism", "qb")
    if mech not in MECHANISMS:
        raise AuditError(f"unknown mechanism {mech!r}")
    if weighting not in WEIGHTINGS:
        raise AuditError(f"unknown weighting {weighting!r}")
    _check_size(u)
    before = prior(u)
    if not av.observations:
        return SecurityVerdict(True, True, None, 0.0, route, before.total)
    if route == "kernel":
        after = posterior_kernel(u, av, mech, weighting)
    elif route == "aggregate":
        after = posterior_aggregate(u, av, mech, weighting)
    else:
        raise ValueError(f"unknown route {route!r}")
    w1, d1 = _largest_shift("association", before.pair, after.pair)
    w2, d2 = None, Fraction(0)
    for kind, b, a in (
        ("ref_has_partner", before.ref_assoc, after.ref_assoc),
        ("value_has_partner", before.value_assoc, after.value_assoc),
        ("refs_both_partnered", before.ref_joint, after.ref_joint),
        ("values_both_partnered", before.value_joint, after.value_joint),
    ):
        w, d = _largest_shift(kind, b, a)
        if d > d2:
            w2, d2 = w, d
    return SecurityVerdict(
        d1 == 0,
        d2 == 0,
        w1 if d1 else w2,
        float(max(d1, d2)),
        route,
        after.total,
    )


def _largest_shift(kind: str, before: Mapping, after: Mapping) -> tuple[dict | None, Fraction]:
    best, delta = None, Fraction(0)
    for key in sorted(before, key=lambda k: json.dumps(k, default=str)):
        d = abs(after[key] - before[key])
        if d > delta:
            best, delta = key, d
    if best is None:
        return None, delta
    return (
        {
            "kind": kind,
            "pair": list(best) if isinstance(best, tuple) else [best],
            "before": str(before[best]),
            "after": str(after[best]),
        },
        delta,
    )


# --- attack simulators -------------------------------------------------------


@dataclass
class AttackReport:
    name: str
    success: bool
    accuracy: float
    baseline: float
    epsilon: float = EPSILON
    trials: int = TRIALS
    details: dict = field(default_factory=dict)

    @property
    def advantage(self) -> float:
        return self.accuracy - self.baseline

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "success": self.success,
            "accuracy": self.accuracy,
            "baseline": self.baseline,
            "advantage": self.advantage,
            "epsilon": self.epsilon,
            "trials": self.trials,
            "details": self.details,
        }


def size_attack(
    av: AdversarialView,
    target_refs: Iterable[str] | None = None,
    rng: Rng | None = None,
    trials: int = TRIALS,
    epsilon: float = EPSILON,
) -> AttackReport:
    """Guess which fetched encrypted set holds the heaviest sensitive value.

    The adversary picks the set with the most returned ciphertexts (random
    among ties). ``target_refs`` are the refs of the heaviest value, known
    only to the evaluator; without them only the distinguishability flag is
    reported.
    """
    rng = rng or Rng(0)
    sizes: dict[frozenset, int] = {}
    pair_totals: dict[tuple[frozenset, frozenset], int] = {}
    for o in av.observations:
        a = frozenset(o.cipher_refs)
        if a:
            sizes[a] = len(a)
        pair_totals[(a, frozenset(o.plain_predicates))] = o.n_cipher + o.n_plain
    if not sizes:
        return AttackReport("size", False, 0.0, 0.0, epsilon, 0, {"reason": "no encrypted fetches"})
    top = max(sizes.values())
    leaders = sorted((a for a, s in sizes.items() if s == top), key=_label)
    distinguishable = len(set(sizes.values())) > 1
    best_pair = max(pair_totals.items(), key=lambda kv: (kv[1], _label(kv[0][0])))
    details = {
        "bins": len(sizes),
        "bin_sizes": sorted(sizes.values(), reverse=True),
        "distinguishable": distinguishable,
        "max_pair_total": best_pair[1],
        "max_pair": [_label(best_pair[0][0]), _label(best_pair[0][1])],
    }
    baseline = 1.0 / len(sizes)
    if target_refs is None:
        return AttackReport("size", distinguishable, float("nan"), baseline, epsilon, 0, details)
    target = set(target_refs)
    r = rng.child("size-attack")
    hits = sum(bool(target & r.choice(leaders)) for _ in range(trials))
    acc = hits / trials
    return AttackReport("size", acc - baseline > epsilon, acc, baseline, epsilon, trials, details)


def frequency_count_attack(
    av: AdversarialView,
    true_counts: Sequence[int],
    rng: Rng | None = None,
    trials: int = TRIALS,
    epsilon: float = EPSILON,
) -> AttackReport:
    """Order two queries by the tuple count of their (hidden) query values.

    ``true_counts[i]`` is the number of sensitive tuples of the value behind
    observation ``i``. The adversary says the query with more returned
    ciphertexts has the larger count; the baseline is a coin flip.
    """
    rng = (rng or Rng(0)).child("frequency-attack")
    obs = av.observations
    if len(obs) != len(true_counts):
        raise ValueError("one true count per observation required")
    idx = range(len(obs))
    usable = [(i, j) for i in idx for j in idx if i < j and true_counts[i] != true_counts[j]]
    if not usable:
        return AttackReport("frequency", False, 0.5, 0.5, epsilon, 0, {"reason": "no comparable pairs"})
    hits = 0
    for _ in range(trials):
        i, j = rng.choice(usable)
        ci, cj = obs[i].n_cipher, obs[j].n_cipher
        guess_i = ci > cj if ci != cj else rng.random() < 0.5
        hits += guess_i == (true_counts[i] > true_counts[j])
    acc = hits / trials
    return AttackReport("frequency", acc - 0.5 > epsilon, acc, 0.5, epsilon, trials, {"pairs": len(usable)})


def workload_skew_attack(
    av: AdversarialView,
    hot_ref: str | None = None,
    bin_capacity: int | None = None,
    rng: Rng | None = None,
    trials: int = TRIALS,
    epsilon: float = EPSILON,
) -> AttackReport:
    """Find the hottest encrypted set, then guess the hot value's ref inside it.

    A set counts as identified when its fetch count beats the runner-up by
    more than three standard deviations of the difference. The value-level
    guess is a uniform pick inside the hot set, scored against ``hot_ref``
    (evaluator ground truth). The baseline is one over the nominal bin
    capacity ``y`` of the public layout shape.
    """
    rng = (rng or Rng(0)).child("skew-attack")
    freq = Counter(frozenset(o.cipher_refs) for o in av.observations if o.cipher_refs)
    if not freq:
        return AttackReport("skew", False, 0.0, 0.0, epsilon, 0, {"reason": "no encrypted fetches"})
    ranked = freq.most_common()
    top_set, top = ranked[0]
    second = ranked[1][1] if len(ranked) > 1 else 0
    identified = (top - second) > 3 * math.sqrt(top + second)
    if bin_capacity is None:
        refs = av.auxiliary.get("refs", [])
        values = av.auxiliary.get("nonsensitive_values", [])
        bin_capacity = approx_square_factors(max(1, len(values))).y if len(refs) <= len(values) else approx_square_factors(len(refs)).y
    baseline = 1.0 / bin_capacity
    details = {
        "bin_identified": identified,
        "top_fetches": top,
        "second_fetches": second,
        "hot_set_size": len(top_set),
        "distinct_sets": len(freq),
    }
    if hot_ref is None:
        return AttackReport("skew", False, float("nan"), baseline, epsilon, 0, details)
    members = sorted(top_set)
    hits = sum(rng.choice(members) == hot_ref for _ in range(trials))
    acc = hits / trials
    return AttackReport("skew", acc - baseline > epsilon, acc, baseline, epsilon, trials, details)
