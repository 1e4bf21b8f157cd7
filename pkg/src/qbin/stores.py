"""The simulated honest-but-curious cloud.

Non-sensitive rows sit in a plaintext store with an equality index.
Sensitive rows and fake padding rows sit in an encrypted store as AES-GCM
blobs over a fixed-width encoding. Each blob carries a keyed search tag
for the ``(value, occurrence)`` pair it holds. The store answers a set of
tags with one full scan, and it keeps a log of everything it was sent and
everything it returned.
"""

from __future__ import annotations

import base64
import hashlib
import hmac
import json
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives import hashes
from cryptography.hazmat.primitives.ciphers.aead import AESGCM
from cryptography.hazmat.primitives.kdf.hkdf import HKDF

from . import _kernels
from .binning import BinLayout
from .core import PartitionedRelation, Rng, Row, Value, iter_ndjson, value_key, write_ndjson

ENCRYPTED_FILE = "encrypted.ndjson"
PLAINTEXT_FILE = "plaintext.ndjson"
OBSERVATIONS_FILE = "observations.ndjson"

NONCE_BYTES = 12
PAD_BLOCK = 64


class UploadError(ValueError):
    """The relation and the layout disagree."""


class IntegrityError(RuntimeError):
    """A ciphertext failed authentication."""


class OwnerKey:
    """Encryption and tag keys, derived from the owner's secret seed."""

    def __init__(self, secret: bytes):
        self._enc = self._derive(secret, b"qbin/enc")
        self._tag = self._derive(secret, b"qbin/tag")
        self._aead = AESGCM(self._enc)
        self._memo: dict = {}

    @staticmethod
    def _derive(secret: bytes, info: bytes) -> bytes:
        return HKDF(algorithm=hashes.SHA256(), length=32, salt=b"qbin", info=info).derive(secret)

    @classmethod
    def from_seed(cls, seed: int) -> "OwnerKey":
        return cls(int(seed).to_bytes(8, "big", signed=False))

    def tag(self, value: Value, occurrence: int) -> int:
        """Search tag of the ``occurrence``-th tuple holding ``value``."""
        return self._mac([value, occurrence])

    def fake_tag(self, bin_index: int, k: int) -> int:
        """Tag of the ``k``-th fake tuple of a sensitive bin."""
        return self._mac(["fake", bin_index, k])

    def _mac(self, parts: list) -> int:
        msg = json.dumps(parts).encode()
        t = self._memo.get(msg)
        if t is None:
            t = int.from_bytes(hmac.new(self._tag, msg, hashlib.sha256).digest()[:8], "big")
            self._memo[msg] = t
        return t

    def encrypt(self, payload: dict, width: int, nonce: bytes) -> bytes:
        raw = json.dumps(payload, sort_keys=True, separators=(",", ":")).encode()
        if len(raw) > width:
            raise ValueError(f"payload of {len(raw)} bytes exceeds width {width}")
        raw = raw + b" " * (width - len(raw))
        return nonce + self._aead.encrypt(nonce, raw, None)

    def decrypt(self, blob: bytes) -> dict:
        try:
            raw = self._aead.decrypt(blob[:NONCE_BYTES], blob[NONCE_BYTES:], None)
        except InvalidTag:
            raise IntegrityError("ciphertext failed authentication") from None
        return json.loads(raw.rstrip(b" "))


@dataclass(frozen=True)
class Ciphertext:
    tuple_ref: str
    blob: bytes
    tag: int


@dataclass
class StoreObservation:
    """What the cloud saw during one query."""

    query_index: int
    plain_predicates: list = field(default_factory=list)
    cipher_predicates: list = field(default_factory=list)
    plain_row_ids: list = field(default_factory=list)
    cipher_refs: list = field(default_factory=list)

    @property
    def n_plain(self) -> int:
        return len(self.plain_row_ids)

    @property
    def n_cipher(self) -> int:
        return len(self.cipher_refs)

    def to_dict(self) -> dict:
        return {
            "query_index": self.query_index,
            "plain_predicates": self.plain_predicates,
            "cipher_predicates": self.cipher_predicates,
            "plain_row_ids": self.plain_row_ids,
            "cipher_refs": self.cipher_refs,
            "n_plain": self.n_plain,
            "n_cipher": self.n_cipher,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "StoreObservation":
        return cls(
            d["query_index"],
            list(d.get("plain_predicates", [])),
            list(d.get("cipher_predicates", [])),
            list(d.get("plain_row_ids", [])),
            list(d.get("cipher_refs", [])),
        )


class ObservationLog:
    """Append-only list of observations, optionally mirrored to NDJSON."""

    def __init__(self, path: str | Path | None = None):
        self.entries: list[StoreObservation] = []
        self.path = Path(path) if path else None
        self._lock = threading.Lock()

    def append(self, obs: StoreObservation) -> None:
        with self._lock:
            self.entries.append(obs)
            if self.path is not None:
                with open(self.path, "a") as fh:
                    fh.write(json.dumps(obs.to_dict(), sort_keys=True, separators=(",", ":")) + "\n")

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    @staticmethod
    def read(path: str | Path) -> list[StoreObservation]:
        return [StoreObservation.from_dict(d) for d in iter_ndjson(path)]


class EncryptedStore:
    """Ciphertexts of sensitive rows and fakes, searchable by tag.

    ``charge`` selects how ``rows_scanned`` grows per query: ``"scan"``
    charges one full pass, ``"token"`` one pass per token.
    """

    def __init__(self, rows: Sequence[Ciphertext], charge: str = "scan"):
        if charge not in ("scan", "token"):
            raise ValueError(f"unknown charge mode {charge!r}")
        self.rows = list(rows)
        self.tags = np.fromiter((c.tag for c in self.rows), dtype=np.uint64, count=len(self.rows))
        self.charge = charge
        self.rows_scanned = 0
        self.queries = 0
        self._lock = threading.Lock()

    @property
    def size(self) -> int:
        return len(self.rows)

    def select(self, tokens: Iterable[int]) -> list[Ciphertext]:
        toks = np.unique(np.fromiter(tokens, dtype=np.uint64))
        if toks.size == 0:
            return []
        hits = _kernels.scan_match(self.tags, toks)
        with self._lock:
            self.queries += 1
            self.rows_scanned += self.size * (toks.size if self.charge == "token" else 1)
        return [self.rows[i] for i in hits]

    def save(self, path: str | Path) -> None:
        write_ndjson(
            path,
            (
                {"ref": c.tuple_ref, "tag": f"{c.tag:016x}", "blob": base64.b64encode(c.blob).decode()}
                for c in self.rows
            ),
        )

    @classmethod
    def load(cls, path: str | Path, charge: str = "scan") -> "EncryptedStore":
        return cls(
            [
                Ciphertext(d["ref"], base64.b64decode(d["blob"]), int(d["tag"], 16))
                for d in iter_ndjson(path)
            ],
            charge,
        )


class PlaintextStore:
    def __init__(self, rows: Sequence[Row], attribute: str):
        self.rows = list(rows)
        self.attribute = attribute
        self.index: dict = {}
        for r in self.rows:
            self.index.setdefault(r.attributes[attribute], []).append(r)
        self.rows_fetched = 0
        self._bytes: dict[str, int] = {}

    def row_bytes(self, row: Row) -> int:
        """Wire size of a row, as its compact JSON encoding."""
        n = self._bytes.get(row.row_id)
        if n is None:
            n = len(json.dumps(row.to_dict(), sort_keys=True, separators=(",", ":")))
            self._bytes[row.row_id] = n
        return n

    @property
    def size(self) -> int:
        return len(self.rows)

    def select(self, values: Iterable[Value]) -> list[Row]:
        out: list[Row] = []
        for v in values:
            out.extend(self.index.get(v, ()))
        self.rows_fetched += len(out)
        return out

    def save(self, path: str | Path) -> None:
        write_ndjson(path, ({"attribute": self.attribute, **r.to_dict()} for r in self.rows))

    @classmethod
    def load(cls, path: str | Path, attribute: str | None = None) -> "PlaintextStore":
        rows = []
        for d in iter_ndjson(path):
            attribute = attribute or d.get("attribute")
            d = {k: v for k, v in d.items() if k != "attribute"}
            rows.append(Row.from_dict(d))
        if attribute is None:
            raise ValueError("plaintext store file names no attribute")
        return cls(rows, attribute)


def select_encrypted(store: EncryptedStore, tokens: Iterable[int]) -> list[Ciphertext]:
    return store.select(tokens)


def select_plaintext(store: PlaintextStore, values: Iterable[Value]) -> list[Row]:
    return store.select(values)


def _payload_width(payloads: Iterable[dict]) -> int:
    longest = max(
        (len(json.dumps(p, sort_keys=True, separators=(",", ":")).encode()) for p in payloads),
        default=0,
    )
    return PAD_BLOCK * (longest // PAD_BLOCK + 1)


def encrypt_and_upload(
    rel: PartitionedRelation,
    layout: BinLayout,
    rng: Rng,
    key: OwnerKey | None = None,
    charge: str = "scan",
) -> tuple[EncryptedStore, PlaintextStore]:
    """Encrypt sensitive rows plus fakes and load the plaintext rows.

    The ``k``-th row holding value ``v`` gets tag ``tag(v, k)`` in relation
    order, which is how the owner later regenerates a bin's tokens from the
    per-value counts alone.
    """
    key = key or OwnerKey.from_seed(layout.permutation_seed)
    a = rel.searchable_attribute
    for r in rel.sensitive_rows:
        if layout.locate_sensitive(r.attributes[a]) is None:
            raise UploadError(f"sensitive value {r.attributes[a]!r} is not in the layout")
    for r in rel.nonsensitive_rows:
        if layout.locate_nonsensitive(r.attributes[a]) is None:
            raise UploadError(f"non-sensitive value {r.attributes[a]!r} is not in the layout")

    occ: dict = {}
    entries: list[tuple[int, dict]] = []
    for r in rel.sensitive_rows:
        v = r.attributes[a]
        k = occ.get(v, 0)
        occ[v] = k + 1
        entries.append((key.tag(v, k), {"a": v, "f": 0, "r": r.to_dict()}))
    for i, n_fake in enumerate(layout.fake_counts):
        for k in range(n_fake):
            entries.append((key.fake_tag(i, k), {"a": None, "f": 1, "r": None}))
    for v, c in occ.items():
        if c != layout.sensitive_counts.get(v, c):
            raise UploadError(f"value {v!r} has {c} rows but the layout counts {layout.sensitive_counts[v]}")

    width = _payload_width(p for _, p in entries)
    order = rng.child("refs").shuffled(range(len(entries)))
    ref_rng = rng.child("refs/ids")
    nonce_rng = rng.child("nonces")
    cts = []
    for idx in order:
        tag, payload = entries[idx]
        ref = ref_rng.randbytes(8).hex()
        cts.append(Ciphertext(ref, key.encrypt(payload, width, nonce_rng.randbytes(NONCE_BYTES)), tag))
    return EncryptedStore(cts, charge), PlaintextStore(rel.nonsensitive_rows, a)


def save_stores(directory: str | Path, enc: EncryptedStore, plain: PlaintextStore) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    enc.save(d / ENCRYPTED_FILE)
    plain.save(d / PLAINTEXT_FILE)
    (d / OBSERVATIONS_FILE).write_text("")


def load_stores(directory: str | Path, charge: str = "scan") -> tuple[EncryptedStore, PlaintextStore]:
    d = Path(directory)
    return EncryptedStore.load(d / ENCRYPTED_FILE, charge), PlaintextStore.load(d / PLAINTEXT_FILE)


def sorted_values(values: Iterable[Value]) -> list[Value]:
    return sorted(values, key=value_key)
