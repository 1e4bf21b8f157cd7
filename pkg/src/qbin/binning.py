"""Secret bin layouts over sensitive and non-sensitive attribute values.

All layouts share one grid orientation. There are ``n_sb`` sensitive bins
and ``n_nsb`` non-sensitive bins, and the cell ``(i, j)`` pairs position
``j`` of sensitive bin ``i`` with position ``i`` of non-sensitive bin ``j``.
An associated value (present on both sides) always occupies both halves of
one cell, so fetching ``(SB_i, NSB_j)`` for any value of that cell returns
all of its tuples.

One side is dealt round-robin after a secret shuffle, and the other side is
placed by the cell rule and then topped up with its unassociated values.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

from .core import OwnerMetadata, Rng, Value, value_key

MODES = ("base", "near_square", "general", "reversed")


class BinningError(ValueError):
    """The metadata does not meet a bin-creation precondition."""


@dataclass(frozen=True)
class Factorization:
    x: int  # larger factor
    y: int  # smaller factor
    n: int

    @property
    def exact(self) -> bool:
        return self.x * self.y == self.n


def approx_square_factors(n: int) -> Factorization:
    """Exact factor pair of ``n`` with the smallest difference, larger first."""
    if n < 1:
        raise ValueError(f"cannot factorize {n}")
    y = math.isqrt(n)
    while n % y:
        y -= 1
    return Factorization(n // y, y, n)


def nearest_square_side(n: int) -> int:
    lo = math.isqrt(n)
    hi = lo + 1
    return lo if n - lo * lo <= hi * hi - n else hi


@dataclass
class BinLayout:
    """The owner's secret assignment of values to bins.

    Bins keep their positional slots; an unfilled slot is ``None``. ``sensitive_counts`` carries the per-value tuple counts the
    owner needs to derive search tokens.
    """

    sensitive_bins: list[list[Value]]
    nonsensitive_bins: list[list[Value | None]]
    permutation_seed: int
    fake_counts: list[int]
    mode: str
    sensitive_counts: dict = field(default_factory=dict)
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if len(self.fake_counts) != len(self.sensitive_bins):
            raise ValueError("one fake count per sensitive bin required")
        self._s_pos: dict = {}
        self._ns_pos: dict = {}
        for i, b in enumerate(self.sensitive_bins):
            for j, v in enumerate(b):
                if v is None:
                    continue
                if v in self._s_pos:
                    raise ValueError(f"bad sensitive bin entry {v!r}")
                self._s_pos[v] = (i, j)
        for j, b in enumerate(self.nonsensitive_bins):
            for i, v in enumerate(b):
                if v is None:
                    continue
                if v in self._ns_pos:
                    raise ValueError(f"value {v!r} in two non-sensitive bins")
                self._ns_pos[v] = (j, i)

    @property
    def n_sb(self) -> int:
        return len(self.sensitive_bins)

    @property
    def n_nsb(self) -> int:
        return len(self.nonsensitive_bins)

    def locate_sensitive(self, v: Value) -> tuple[int, int] | None:
        """(bin, position) of a sensitive value, or None."""
        return self._s_pos.get(v)

    def locate_nonsensitive(self, v: Value) -> tuple[int, int] | None:
        """(bin, position) of a non-sensitive value, or None."""
        return self._ns_pos.get(v)

    def nonsensitive_values(self, j: int) -> list[Value]:
        return [v for v in self.nonsensitive_bins[j] if v is not None]

    def sensitive_values(self, i: int) -> list[Value]:
        return [v for v in self.sensitive_bins[i] if v is not None]

    def bin_totals(self) -> list[int]:
        """Real sensitive tuples per sensitive bin."""
        return [
            sum(self.sensitive_counts.get(v, 1) for v in self.sensitive_values(i))
            for i in range(self.n_sb)
        ]

    def padded_totals(self) -> list[int]:
        return [t + f for t, f in zip(self.bin_totals(), self.fake_counts)]

    @property
    def total_fakes(self) -> int:
        return sum(self.fake_counts)

    # -- persistence (owner-side state, never uploaded) ---------------------

    def to_records(self) -> list[dict]:
        recs: list[dict] = [
            {
                "kind": "header",
                "mode": self.mode,
                "seed": self.permutation_seed,
                "info": self.info,
                "warning": "owner secret: do not upload",
            }
        ]
        for i, b in enumerate(self.sensitive_bins):
            recs.append({"kind": "sb", "index": i, "values": list(b), "fake": self.fake_counts[i]})
        for j, b in enumerate(self.nonsensitive_bins):
            recs.append({"kind": "nsb", "index": j, "values": list(b)})
        for v, c in self.sensitive_counts.items():
            recs.append({"kind": "count", "value": v, "count": c})
        return recs

    def save(self, path: str | Path) -> None:
        with open(path, "w") as fh:
            for rec in self.to_records():
                fh.write(json.dumps(rec, sort_keys=True, separators=(",", ":")) + "\n")

    @classmethod
    def from_records(cls, records: Iterable[dict]) -> "BinLayout":
        header = None
        sb: dict[int, tuple[list, int]] = {}
        nsb: dict[int, list] = {}
        counts: dict = {}
        for rec in records:
            kind = rec.get("kind")
            if kind == "header":
                header = rec
            elif kind == "sb":
                sb[rec["index"]] = (rec["values"], rec["fake"])
            elif kind == "nsb":
                nsb[rec["index"]] = rec["values"]
            elif kind == "count":
                counts[rec["value"]] = rec["count"]
        if header is None:
            raise ValueError("layout file has no header record")
        return cls(
            [sb[i][0] for i in sorted(sb)],
            [nsb[j] for j in sorted(nsb)],
            header["seed"],
            [sb[i][1] for i in sorted(sb)],
            header["mode"],
            counts,
            header.get("info", {}),
        )

    @classmethod
    def load(cls, path: str | Path) -> "BinLayout":
        with open(path) as fh:
            return cls.from_records(json.loads(line) for line in fh if line.strip())


# --- grid construction ------------------------------------------------------


def deal_round_robin(values: Sequence[Value], n_bins: int) -> list[list[Value]]:
    bins: list[list[Value]] = [[] for _ in range(n_bins)]
    for r, v in enumerate(values):
        bins[r % n_bins].append(v)
    return bins


def place_by_cells(
    primary_bins: list[list[Value]],
    partners: dict,
    fill_values: Sequence[Value],
    n_bins: int,
    capacity: int,
) -> list[list[Value | None]]:
    """Build the other side of the grid from the dealt side.

    The partner of ``primary_bins[a][p]`` goes to slot ``a`` of bin ``p``;
    ``fill_values`` then top up the empty slots bin by bin. Values that do
    not fit are appended round-robin past ``capacity``. When slots are left
    over, holes go preferentially where the dealt side already occupies the
    cell, so every (bin, bin) pair stays fetchable.
    """
    slots: list[list[Value | None]] = [[None] * capacity for _ in range(n_bins)]
    for a, b in enumerate(primary_bins):
        for p, v in enumerate(b):
            if v in partners:
                if p >= n_bins or a >= capacity:
                    raise BinningError(f"no cell for associated value {v!r}")
                slots[p][a] = partners[v]
    empty = [(j, s) for j in range(n_bins) for s in range(capacity) if slots[j][s] is None]
    fill = list(fill_values)
    if len(fill) < len(empty):
        occupied = {(p, a) for a, b in enumerate(primary_bins) for p in range(len(b))}
        empty.sort(key=lambda js: (js in occupied, js))
        chosen = sorted(empty[: len(fill)])
    else:
        chosen = empty
    for (j, s), v in zip(chosen, fill):
        slots[j][s] = v
    for r, v in enumerate(fill[len(chosen):]):
        slots[r % n_bins].append(v)
    return slots


def _check_one_side(meta: OwnerMetadata) -> None:
    if meta.n_sensitive == 0 or meta.n_nonsensitive == 0:
        raise BinningError("both sides need at least one value")


def _permute(values: Sequence[Value], rng: Rng, order: Sequence[Value] | None) -> list[Value]:
    if order is None:
        return rng.child("permutation").shuffled(sorted(values, key=value_key))
    if sorted(order, key=value_key) != sorted(values, key=value_key):
        raise BinningError("pinned order is not a permutation of the values")
    return list(order)


def _fill_order(values: Sequence[Value], rng: Rng, order: Sequence[Value] | None) -> list[Value]:
    if order is None:
        return rng.child("fill").shuffled(sorted(values, key=value_key))
    missing = set(values) - set(order)
    if missing:
        raise BinningError(f"pinned fill order misses {sorted(missing, key=value_key)!r}")
    wanted = set(values)
    return [v for v in order if v in wanted]


def _grid_layout(
    meta: OwnerMetadata,
    rng: Rng,
    sensitive_bins: list[list[Value]],
    n_nsb: int,
    nsb_capacity: int,
    mode: str,
    fill_order: Sequence[Value] | None,
    info: dict,
) -> BinLayout:
    partners = {v: v for v in meta.associated}
    rest = [v for v in meta.nonsensitive_values if v not in meta.associated]
    ns_bins = place_by_cells(
        sensitive_bins, partners, _fill_order(rest, rng, fill_order), n_nsb, nsb_capacity
    )
    return BinLayout(
        sensitive_bins,
        ns_bins,
        rng.seed,
        [0] * len(sensitive_bins),
        mode,
        dict(meta.sensitive_counts),
        info,
    )


def create_bins_base(
    meta: OwnerMetadata,
    rng: Rng,
    order: Sequence[Value] | None = None,
    fill_order: Sequence[Value] | None = None,
) -> BinLayout:
    """Bin creation for ``|S| <= |NS|`` with the exact square-ish factorization.

    ``order`` pins the secret permutation of sensitive values and
    ``fill_order`` the order unassociated non-sensitive values are placed in;
    both default to seeded shuffles.
    """
    _check_one_side(meta)
    s, ns = meta.n_sensitive, meta.n_nonsensitive
    if s > ns:
        raise BinningError(f"|S|={s} > |NS|={ns}: use create_bins_reversed")
    f = approx_square_factors(ns)
    if s < f.x:
        raise BinningError(f"|S|={s} is below x={f.x}; base case needs |S| >= x")
    perm = _permute(meta.sensitive_values, rng, order)
    sb = deal_round_robin(perm, f.x)
    n_nsb = -(-ns // f.x)
    info = {"x": f.x, "y": f.y, "cost": f.x + f.y}
    return _grid_layout(meta, rng, sb, n_nsb, f.x, "base", fill_order, info)


def _near_square_shape(meta: OwnerMetadata) -> dict:
    """Costs of the exact and the nearest-square shapes, and which one wins.

    Cost is the number of values fetched per query: one sensitive bin plus
    one non-sensitive bin, each at its largest size.
    """
    s, ns = meta.n_sensitive, meta.n_nonsensitive
    f = approx_square_factors(ns)
    m = nearest_square_side(ns)
    spill = max(0, ns - m * m)
    exact_ok = s >= f.x
    near_ok = m * m != ns and m <= s <= m * m
    out = {
        "x": f.x,
        "y": f.y,
        "m": m,
        "exact_cost": f.x + f.y if exact_ok else None,
        "near_square_cost": m + m + -(-spill // m) if near_ok else None,
    }
    if not exact_ok and not near_ok:
        raise BinningError(f"|S|={s} fits neither {f.x}x{f.y} nor {m}x{m} bins")
    if near_ok and (not exact_ok or out["near_square_cost"] < out["exact_cost"]):
        out["choice"] = "near_square"
    else:
        out["choice"] = "base"
    return out


def create_bins_near_square(
    meta: OwnerMetadata,
    rng: Rng,
    order: Sequence[Value] | None = None,
    fill_order: Sequence[Value] | None = None,
) -> BinLayout:
    """Pick the cheaper of the exact factorization and an ``m x m`` grid.

    ``m*m`` is the square nearest to ``|NS|``. Non-sensitive values beyond
    ``m*m`` spill round-robin onto the non-sensitive bins.
    """
    _check_one_side(meta)
    if meta.n_sensitive > meta.n_nonsensitive:
        raise BinningError("|S| > |NS|: use create_bins_reversed")
    shape = _near_square_shape(meta)
    if shape["choice"] == "base":
        layout = create_bins_base(meta, rng, order, fill_order)
        layout.info.update(shape)
        return layout
    m = shape["m"]
    perm = _permute(meta.sensitive_values, rng, order)
    sb = deal_round_robin(perm, m)
    return _grid_layout(meta, rng, sb, m, m, "near_square", fill_order, shape)


def greedy_assign(
    values: Sequence[Value], counts: dict, n_bins: int, capacity: int
) -> list[list[Value]]:
    """Balance tuple totals over ``n_bins`` bins of at most ``capacity`` values.

    ``values`` must already be in the caller's tie-breaking order; they are
    stably sorted by decreasing count. The first ``n_bins`` go one per bin,
    then each next value joins the lightest bin that still has room (lowest
    index on ties).
    """
    if len(values) > n_bins * capacity:
        raise BinningError(f"{len(values)} values do not fit {n_bins}x{capacity} bins")
    ranked = sorted(values, key=lambda v: -counts[v])
    bins: list[list[Value]] = [[] for _ in range(n_bins)]
    totals = [0] * n_bins
    for r, v in enumerate(ranked):
        if r < n_bins:
            k = r
        else:
            open_bins = [i for i in range(n_bins) if len(bins[i]) < capacity]
            k = min(open_bins, key=lambda i: (totals[i], i))
        bins[k].append(v)
        totals[k] += counts[v]
    return bins


def create_bins_general(
    meta: OwnerMetadata,
    rng: Rng,
    order: Sequence[Value] | None = None,
    fill_order: Sequence[Value] | None = None,
) -> BinLayout:
    """Bins with equal padded tuple totals for values with arbitrary multiplicities."""
    _check_one_side(meta)
    if meta.n_sensitive > meta.n_nonsensitive:
        raise BinningError("|S| > |NS| is not supported by the general case")
    shape = _near_square_shape(meta)
    if shape["choice"] == "base":
        n_sb, cap = shape["x"], shape["y"]
        n_nsb, nsb_cap = -(-meta.n_nonsensitive // shape["x"]), shape["x"]
    else:
        n_sb = cap = n_nsb = nsb_cap = shape["m"]
    perm = _permute(meta.sensitive_values, rng, order)
    sb = greedy_assign(perm, dict(meta.sensitive_counts), n_sb, cap)
    layout = _grid_layout(meta, rng, sb, n_nsb, nsb_cap, "general", fill_order, shape)
    totals = layout.bin_totals()
    top = max(totals)
    layout.fake_counts = [top - t for t in totals]
    return layout


def _reversed_shape(meta: OwnerMetadata) -> dict:
    """Mirror of the near-square choice with the roles of the two sides swapped."""
    s, ns = meta.n_sensitive, meta.n_nonsensitive
    f = approx_square_factors(s)
    m = nearest_square_side(s)
    spill = max(0, s - m * m)
    exact_ok = ns >= f.y
    near_ok = m * m != s and m <= ns <= m * m
    out = {
        "x": f.x,
        "y": f.y,
        "m": m,
        "exact_cost": f.x + f.y if exact_ok else None,
        "near_square_cost": m + m + -(-spill // m) if near_ok else None,
    }
    if not exact_ok and not near_ok:
        raise BinningError(f"|NS|={ns} fits neither {f.x}x{f.y} nor {m}x{m} bins")
    if near_ok and (not exact_ok or out["near_square_cost"] < out["exact_cost"]):
        out["choice"] = "near_square"
    else:
        out["choice"] = "base"
    return out


def create_bins_reversed(
    meta: OwnerMetadata,
    rng: Rng,
    order: Sequence[Value] | None = None,
    fill_order: Sequence[Value] | None = None,
) -> BinLayout:
    """Bin creation for ``|S| > |NS|`` by factorizing ``|S|``.

    The grid keeps its orientation (``x`` sensitive bins of ``y`` values,
    ``y`` non-sensitive bins), but now the non-sensitive values are shuffled
    and dealt round-robin, and the sensitive side is placed by the cell rule.
    As on the standard path, an ``m x m`` grid is used instead when it is
    cheaper. ``order`` pins the non-sensitive permutation, ``fill_order`` the
    placement order of unassociated sensitive values.
    """
    _check_one_side(meta)
    s, ns = meta.n_sensitive, meta.n_nonsensitive
    if s <= ns:
        raise BinningError(f"|S|={s} <= |NS|={ns}: use the standard path")
    shape = _reversed_shape(meta)
    if shape["choice"] == "base":
        n_sb, sb_cap, n_nsb = shape["x"], shape["y"], shape["y"]
    else:
        n_sb = sb_cap = n_nsb = shape["m"]
    perm = _permute(meta.nonsensitive_values, rng, order)
    ns_dealt = deal_round_robin(perm, n_nsb)
    partners = {v: v for v in meta.associated}
    rest = [v for v in meta.sensitive_values if v not in meta.associated]
    sb_slots = place_by_cells(ns_dealt, partners, _fill_order(rest, rng, fill_order), n_sb, sb_cap)
    ns_bins: list[list[Value | None]] = [list(b) for b in ns_dealt]
    return BinLayout(
        sb_slots, ns_bins, rng.seed, [0] * n_sb, "reversed", dict(meta.sensitive_counts), shape
    )


def create_bins(meta: OwnerMetadata, rng: Rng, mode: str = "auto", **kw: Any) -> BinLayout:
    """Dispatch on ``mode``; ``auto`` picks reversed, general or near-square."""
    if mode == "auto":
        if meta.n_sensitive > meta.n_nonsensitive:
            mode = "reversed"
        elif not meta.is_one_to_one():
            mode = "general"
        else:
            mode = "near_square"
    fn = {
        "base": create_bins_base,
        "near_square": create_bins_near_square,
        "general": create_bins_general,
        "reversed": create_bins_reversed,
    }.get(mode)
    if fn is None:
        raise ValueError(f"unknown mode {mode!r}")
    return fn(meta, rng, **kw)
