"""Independent reference for the exact audit.

Enumerates every hidden assignment, every secret permutation and every
fill order, runs the real bin builder on each, and groups the outcomes by
what a full query sweep shows the cloud (the two bin partitions). It
shares no code with the audit module beyond ``create_bins_base``.
"""

from __future__ import annotations

import itertools
from collections import defaultdict
from fractions import Fraction

from qbin.binning import create_bins_base
from qbin.core import OwnerMetadata, Rng


def sweep_posteriors(n_s: int, n_ns: int, k: int):
    refs = [f"e{i}" for i in range(n_s)]
    vals = [f"v{j}" for j in range(n_ns)]
    stats = defaultdict(lambda: defaultdict(int))
    for chosen in itertools.combinations(refs, k):
        for partners in itertools.permutations(vals, k):
            sigma = dict(zip(chosen, partners))
            plain = {e: sigma.get(e, "p_" + e) for e in refs}
            back = {v: e for e, v in plain.items()}
            meta = OwnerMetadata.from_counts({v: 1 for v in plain.values()}, {v: 1 for v in vals})
            rest = [v for v in vals if v not in sigma.values()]
            for perm in itertools.permutations(plain.values()):
                for fill in itertools.permutations(rest):
                    lay = create_bins_base(meta, Rng(0), order=list(perm), fill_order=list(fill))
                    seen = (
                        frozenset(frozenset(back[v] for v in b if v is not None) for b in lay.sensitive_bins),
                        frozenset(frozenset(v for v in b if v is not None) for b in lay.nonsensitive_bins),
                    )
                    st = stats[seen]
                    st["n"] += 1
                    for e, v in sigma.items():
                        st[("pair", e, v)] += 1
                    for v in sigma.values():
                        for w in sigma.values():
                            if v != w:
                                st[("both", v, w)] += 1
    out = {}
    for seen, st in stats.items():
        n = st["n"]
        out[seen] = {
            "pair": {(e, v): Fraction(st[("pair", e, v)], n) for e in refs for v in vals},
            "both": {(v, w): Fraction(st[("both", v, w)], n) for v in vals for w in vals if v != w},
        }
    return refs, vals, out


def worst_shifts(n_s: int, n_ns: int, k: int):
    """Largest pair and value-joint shifts over every possible sweep view."""
    refs, vals, post = sweep_posteriors(n_s, n_ns, k)
    p_pair = Fraction(k, n_s * n_ns)
    p_both = Fraction(k * (k - 1), n_ns * (n_ns - 1)) if n_ns > 1 else Fraction(0)
    d1 = max(abs(x - p_pair) for p in post.values() for x in p["pair"].values())
    d2 = max((abs(x - p_both) for p in post.values() for x in p["both"].values()), default=Fraction(0))
    return d1, d2
