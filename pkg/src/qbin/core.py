"""Relations, sensitivity labels, owner metadata and seeded randomness.

Every other module works on the types defined here. Rows carry a
row-level ``sensitive`` flag fixed at ingestion; the owner-side metadata
holds the distinct searchable values of each side with their tuple counts.
"""

from __future__ import annotations

import csv
import hashlib
import json
import random
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Iterator, Mapping, Sequence

Value = Any  # opaque, hashable attribute value (str or int in practice)


class IngestError(ValueError):
    """A row could not be ingested."""


def value_key(v: Value) -> tuple:
    """Sort key giving a deterministic order over mixed str/int values."""
    return (type(v).__name__, v)


@dataclass(frozen=True)
class Row:
    row_id: str
    attributes: Mapping[str, Value] = field(compare=False)
    sensitive: bool = False

    def __hash__(self) -> int:
        return hash(self.row_id)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Row):
            return NotImplemented
        return (
            self.row_id == other.row_id
            and self.sensitive == other.sensitive
            and dict(self.attributes) == dict(other.attributes)
        )

    def get(self, name: str) -> Value:
        return self.attributes[name]

    def to_dict(self) -> dict:
        d = {"row_id": self.row_id, "sensitive": self.sensitive}
        d.update(self.attributes)
        return d

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "Row":
        if "row_id" not in d:
            raise IngestError(f"row without row_id: {dict(d)!r}")
        attrs = {k: v for k, v in d.items() if k not in ("row_id", "sensitive")}
        return cls(str(d["row_id"]), attrs, _as_bool(d.get("sensitive", False)))


def _as_bool(v: Any) -> bool:
    if isinstance(v, bool):
        return v
    if isinstance(v, (int, float)):
        return bool(v)
    s = str(v).strip().lower()
    if s in ("1", "true", "t", "yes", "y"):
        return True
    if s in ("0", "false", "f", "no", "n", ""):
        return False
    raise IngestError(f"cannot read {v!r} as a sensitivity flag")


@dataclass(frozen=True)
class PartitionedRelation:
    name: str
    sensitive_rows: tuple[Row, ...]
    nonsensitive_rows: tuple[Row, ...]
    searchable_attribute: str

    def __post_init__(self):
        if any(not r.sensitive for r in self.sensitive_rows):
            raise IngestError("non-sensitive row on the sensitive side")
        if any(r.sensitive for r in self.nonsensitive_rows):
            raise IngestError("sensitive row on the non-sensitive side")

    @property
    def rows(self) -> tuple[Row, ...]:
        return self.sensitive_rows + self.nonsensitive_rows

    def select(self, w: Value) -> set[Row]:
        """Brute-force equality selection over both sides (test oracle)."""
        a = self.searchable_attribute
        return {r for r in self.rows if r.attributes[a] == w}


@dataclass(frozen=True)
class OwnerMetadata:
    """Distinct searchable values per side and their tuple counts.

    ``sensitive_counts`` and ``nonsensitive_counts`` map value -> #tuples and
    are ordered deterministically. ``associated`` holds the values present on
    both sides; since values are compared as plain tokens, association is
    equality.
    """

    sensitive_counts: Mapping[Value, int]
    nonsensitive_counts: Mapping[Value, int]
    associated: frozenset

    @property
    def sensitive_values(self) -> list[Value]:
        return list(self.sensitive_counts)

    @property
    def nonsensitive_values(self) -> list[Value]:
        return list(self.nonsensitive_counts)

    @property
    def n_sensitive(self) -> int:
        return len(self.sensitive_counts)

    @property
    def n_nonsensitive(self) -> int:
        return len(self.nonsensitive_counts)

    @property
    def domain(self) -> list[Value]:
        seen = dict.fromkeys(self.sensitive_counts)
        seen.update(dict.fromkeys(self.nonsensitive_counts))
        return sorted(seen, key=value_key)

    def is_one_to_one(self) -> bool:
        """Base-case shape: every value has at most one tuple per side."""
        return all(c == 1 for c in self.sensitive_counts.values()) and all(
            c == 1 for c in self.nonsensitive_counts.values()
        )

    def to_dict(self) -> dict:
        return {
            "sensitive_counts": [[v, c] for v, c in self.sensitive_counts.items()],
            "nonsensitive_counts": [[v, c] for v, c in self.nonsensitive_counts.items()],
        }

    @classmethod
    def from_counts(
        cls, sensitive: Mapping[Value, int], nonsensitive: Mapping[Value, int]
    ) -> "OwnerMetadata":
        s = {v: int(sensitive[v]) for v in sorted(sensitive, key=value_key)}
        ns = {v: int(nonsensitive[v]) for v in sorted(nonsensitive, key=value_key)}
        for side in (s, ns):
            bad = [v for v, c in side.items() if c < 1]
            if bad:
                raise ValueError(f"non-positive counts for {bad!r}")
        return cls(s, ns, frozenset(s.keys() & ns.keys()))

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "OwnerMetadata":
        return cls.from_counts(
            {v: c for v, c in d["sensitive_counts"]},
            {v: c for v, c in d["nonsensitive_counts"]},
        )


def ingest(rows: Iterable[Row], searchable_attribute: str, name: str = "R") -> PartitionedRelation:
    rows = list(rows)
    if not rows:
        raise IngestError("no rows to ingest")
    seen: set[str] = set()
    for r in rows:
        if searchable_attribute not in r.attributes:
            raise IngestError(
                f"row {r.row_id!r} has no searchable attribute {searchable_attribute!r}"
            )
        if r.row_id in seen:
            raise IngestError(f"duplicate row_id {r.row_id!r}")
        seen.add(r.row_id)
    return PartitionedRelation(
        name,
        tuple(r for r in rows if r.sensitive),
        tuple(r for r in rows if not r.sensitive),
        searchable_attribute,
    )


def build_metadata(rel: PartitionedRelation) -> OwnerMetadata:
    a = rel.searchable_attribute
    s = Counter(r.attributes[a] for r in rel.sensitive_rows)
    ns = Counter(r.attributes[a] for r in rel.nonsensitive_rows)
    return OwnerMetadata.from_counts(s, ns)


class Rng:
    """Seeded randomness with named, independent sub-streams.

    ``Rng(seed).child("nonces")`` always yields the same stream for the same
    root seed, whatever else was drawn from the parent.
    """

    def __init__(self, seed: int):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self._r = random.Random(self.seed)

    def child(self, name: str) -> "Rng":
        h = hashlib.sha256(f"{self.seed}/{name}".encode()).digest()
        return Rng(int.from_bytes(h[:8], "big"))

    def shuffled(self, items: Sequence) -> list:
        out = list(items)
        self._r.shuffle(out)
        return out

    def randbytes(self, n: int) -> bytes:
        return self._r.getrandbits(8 * n).to_bytes(n, "big")

    def random(self) -> float:
        return self._r.random()

    def randrange(self, n: int) -> int:
        return self._r.randrange(n)

    def choice(self, seq: Sequence):
        return seq[self._r.randrange(len(seq))]

    def choices(self, population: Sequence, weights: Sequence[float], k: int) -> list:
        return self._r.choices(population, weights=weights, k=k)

    def __repr__(self) -> str:
        return f"Rng(seed={self.seed})"


# --- file formats -----------------------------------------------------------


def read_rows(path: str | Path) -> list[Row]:
    """Read rows from NDJSON (one object per line) or CSV with a ``sensitive`` column."""
    path = Path(path)
    if path.suffix.lower() == ".csv":
        with open(path, newline="") as fh:
            return [Row.from_dict(_numify(d)) for d in csv.DictReader(fh)]
    return [Row.from_dict(d) for d in iter_ndjson(path)]


def _numify(d: dict) -> dict:
    out = {}
    for k, v in d.items():
        if k not in ("row_id", "sensitive") and isinstance(v, str) and v.lstrip("-").isdigit():
            out[k] = int(v)
        else:
            out[k] = v
    return out


def write_rows(path: str | Path, rows: Iterable[Row]) -> None:
    write_ndjson(path, (r.to_dict() for r in rows))


def iter_ndjson(path: str | Path) -> Iterator[dict]:
    with open(path) as fh:
        for n, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                yield json.loads(line)
            except json.JSONDecodeError as exc:
                raise IngestError(f"{path}:{n}: {exc}") from None


def write_ndjson(path: str | Path, records: Iterable[Mapping]) -> None:
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True, separators=(",", ":")))
            fh.write("\n")
