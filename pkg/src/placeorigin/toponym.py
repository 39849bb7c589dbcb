"""Gazetteer ingestion, root-name extraction and the anchor question."""
from __future__ import annotations

import csv
import enum
import io
from dataclasses import dataclass
from typing import BinaryIO, Iterable, Sequence

from .errors import EmptyRoot, MalformedRow, MissingContext

DEFAULT_PREFIXES = ("Little", "Upper", "Lower", "Old", "New")
DEFAULT_STREET_TYPES = (
    "Street", "Road", "Lane", "Alley", "Place", "Walk", "Court",
    "Avenue", "Way", "Parade", "Square", "Terrace",
)

ANCHOR_TEMPLATE = (
    "Who is {place} most likely named after, in {city}, {country}? "
    "If it is not a person, find any other origin."
)

GAZETTEER_COLUMNS = ("name", "type", "city", "state", "country", "origin_text", "origin_kind")
_REQUIRED_COLUMNS = ("name", "type", "city", "state", "country")


class OriginKind(str, enum.Enum):
    NAMED_PERSON = "named_person"
    UNNAMED_PERSON = "unnamed_person"
    NON_PERSON = "non_person"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class Toponym:
    raw_name: str
    root_name: str
    feature_type: str = ""
    city: str = ""
    state: str = ""
    country: str = ""


@dataclass(frozen=True)
class GazetteerEntry:
    toponym: Toponym
    origin_text: str | None = None
    origin_kind: OriginKind = OriginKind.UNKNOWN

    def __post_init__(self):
        if (self.origin_kind is OriginKind.UNKNOWN) != (self.origin_text is None):
            raise ValueError("origin_kind is unknown exactly when origin_text is absent")

    @property
    def entry_id(self) -> str:
        t = self.toponym
        return f"{t.raw_name}|{t.city}|{t.country}"


@dataclass(frozen=True)
class AnchorQuestion:
    text: str
    toponym_ref: str


def _split_vocab(vocab: Iterable[str]) -> list[tuple[str, ...]]:
    # longest entries first so "Private Lane" wins over "Lane"
    out = {tuple(w.casefold() for w in v.split()) for v in vocab if v.strip()}
    return sorted(out, key=lambda t: (-len(t), t))


def extract_root(raw_name: str, prefixes: Sequence[str] = DEFAULT_PREFIXES,
                 street_types: Sequence[str] = DEFAULT_STREET_TYPES) -> str:
    """Strip leading prefix tokens and trailing street-type tokens.

    Matching is case-insensitive; the retained tokens keep their casing.
    Stripping repeats until neither end matches, which makes the operation
    idempotent.

    >>> extract_root("Little Bourke Street")
    'Bourke'
    """
    if not raw_name or not raw_name.strip():
        raise EmptyRoot("raw_name is empty")
    tokens = raw_name.split()
    folded = [t.casefold() for t in tokens]
    pre = _split_vocab(prefixes)
    types = _split_vocab(street_types)

    start, end = 0, len(tokens)
    changed = True
    while changed and start < end:
        changed = False
        for p in pre:
            if tuple(folded[start:start + len(p)]) == p and start + len(p) <= end:
                start += len(p)
                changed = True
                break
        for t in types:
            if end - len(t) >= start and tuple(folded[end - len(t):end]) == t:
                end -= len(t)
                changed = True
                break
    if start >= end:
        raise EmptyRoot(f"nothing left of {raw_name!r} after removing prefixes and types")
    return " ".join(tokens[start:end])


def build_anchor_question(t: Toponym) -> AnchorQuestion:
    for field in ("raw_name", "city", "country"):
        if not getattr(t, field).strip():
            raise MissingContext(f"toponym {t.raw_name!r} has no {field}")
    text = ANCHOR_TEMPLATE.format(place=t.raw_name, city=t.city, country=t.country)
    return AnchorQuestion(text=text, toponym_ref=f"{t.raw_name}|{t.city}|{t.country}")


def load_gazetteer(source: BinaryIO | bytes, format: str = "csv",
                   prefixes: Sequence[str] = DEFAULT_PREFIXES,
                   street_types: Sequence[str] | None = None) -> list[GazetteerEntry]:
    """Read a delimited gazetteer (UTF-8, header row) into entries.

    ``format`` is ``"csv"`` or ``"tsv"``. When ``street_types`` is None the
    vocabulary is taken from the file's own ``type`` column, falling back to
    ``DEFAULT_STREET_TYPES`` if that column is blank everywhere.
    """
    if format not in ("csv", "tsv"):
        raise ValueError(f"unknown gazetteer format {format!r}")
    data = source if isinstance(source, bytes) else source.read()
    text = data.decode("utf-8-sig")
    reader = csv.reader(io.StringIO(text, newline=""),
                        delimiter="," if format == "csv" else "\t")
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise MalformedRow(0, "missing header row") from None
    missing = [c for c in _REQUIRED_COLUMNS if c not in header]
    unknown = [c for c in header if c not in GAZETTEER_COLUMNS]
    if missing or unknown:
        raise MalformedRow(0, f"header mismatch (missing {missing}, unknown {unknown})")
    col = {name: i for i, name in enumerate(header)}

    rows = []
    for idx, row in enumerate(reader, start=1):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise MalformedRow(idx, f"expected {len(header)} fields, got {len(row)}")
        rows.append((idx, {name: row[i].strip() for name, i in col.items()}))

    if street_types is None:
        seen = sorted({r["type"] for _, r in rows if r["type"]})
        street_types = seen or DEFAULT_STREET_TYPES

    entries = []
    for idx, r in rows:
        if not r["name"]:
            raise MalformedRow(idx, "empty name")
        try:
            root = extract_root(r["name"], prefixes, street_types)
        except EmptyRoot as exc:
            raise MalformedRow(idx, str(exc)) from None
        origin_text = r.get("origin_text") or None
        kind_raw = r.get("origin_kind") or ""
        try:
            kind = OriginKind(kind_raw) if kind_raw else OriginKind.UNKNOWN
        except ValueError:
            raise MalformedRow(idx, f"bad origin_kind {kind_raw!r}") from None
        if (kind is OriginKind.UNKNOWN) != (origin_text is None):
            raise MalformedRow(idx, "origin_kind must be unknown exactly when origin_text is empty")
        top = Toponym(raw_name=r["name"], root_name=root, feature_type=r["type"],
                      city=r["city"], state=r["state"], country=r["country"])
        entries.append(GazetteerEntry(top, origin_text, kind))
    return entries


def origin_counts(entries: Sequence[GazetteerEntry]) -> dict[str, int]:
    counts = {k.value: 0 for k in OriginKind}
    for e in entries:
        counts[e.origin_kind.value] += 1
    counts["total"] = len(entries)
    counts["with_origin"] = len(entries) - counts[OriginKind.UNKNOWN.value]
    return counts
