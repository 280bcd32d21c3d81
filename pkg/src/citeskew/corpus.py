"""
Record schema, JSON-lines ingestion and OECD discipline mapping.

A :class:`CorpusSnapshot` stores records column-wise (numpy arrays for the
numeric attributes, tuples for strings and references) so that corpora of a
few million records fit comfortably in memory; individual
:class:`PublicationRecord` objects are materialized on access.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import os
import sys
from collections import Counter, deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from itertools import islice
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

log = logging.getLogger(__name__)

DISCIPLINES = (
    "NaturalSciences",
    "EngineeringTechnology",
    "MedicalHealth",
    "Agricultural",
    "SocialSciences",
    "Humanities",
)
TOTAL = "Total"

MIN_YEAR = 1900
DEFAULT_HORIZON = 2014


class IngestError(ValueError):
    """Fatal ingestion problem."""


class MalformedRecordError(IngestError):
    def __init__(self, lineno: int, reason: str):
        super().__init__(f"line {lineno}: {reason}")
        self.lineno = lineno
        self.reason = reason


class DuplicateRecordError(IngestError):
    pass


class RecordError(ValueError):
    """A single record failed validation; ``reason`` is a short stable token."""

    def __init__(self, reason: str, detail: str = ""):
        super().__init__(f"{reason}: {detail}" if detail else reason)
        self.reason = reason


@dataclass(frozen=True, slots=True)
class CitedReference:
    raw: str
    doi: str | None = None
    first_author_key: str | None = None
    ref_year: int | None = None
    source_token: str | None = None
    volume: str | None = None
    first_page: str | None = None

    @property
    def composite_key(self) -> tuple[str, int, str] | None:
        if self.first_author_key and self.ref_year is not None and self.source_token:
            return (self.first_author_key, self.ref_year, self.source_token)
        return None

    def __reduce__(self):
        # re-intern shared fields when chunks come back from worker processes
        return (_unpickle_ref, (self.raw, self.doi, self.first_author_key, self.ref_year,
                                self.source_token, self.volume, self.first_page))

    def to_dict(self) -> dict:
        d = {}
        for name in ("doi", "first_author_key", "ref_year", "source_token", "volume", "first_page"):
            v = getattr(self, name)
            if v is not None:
                d[name] = v
        d["raw"] = self.raw
        return d


@dataclass(frozen=True, slots=True)
class PublicationRecord:
    record_id: str
    pub_year: int
    doc_type: str
    journal_id: str
    subject_categories: tuple[str, ...]
    author_count: int
    jif: float | None = None
    page_count: int | None = None
    cited_refs: tuple[CitedReference, ...] = ()
    citations_by_year: Mapping[int, int] | None = None
    # bibliographic identity of the record itself, used as the cited side of linking
    doi: str | None = None
    first_author_key: str | None = None
    source_token: str | None = None
    volume: str | None = None
    first_page: str | None = None

    @property
    def source(self) -> str:
        return self.source_token or self.journal_id

    def to_dict(self) -> dict:
        d: dict = {
            "record_id": self.record_id,
            "pub_year": self.pub_year,
            "doc_type": self.doc_type,
            "journal_id": self.journal_id,
        }
        if self.jif is not None:
            d["jif"] = self.jif
        d["subject_categories"] = list(self.subject_categories)
        d["author_count"] = self.author_count
        if self.page_count is not None:
            d["page_count"] = self.page_count
        d["cited_refs"] = [r.to_dict() for r in self.cited_refs]
        if self.citations_by_year is not None:
            d["citations_by_year"] = {str(y): c for y, c in sorted(self.citations_by_year.items())}
        for name in ("doi", "first_author_key", "source_token", "volume", "first_page"):
            v = getattr(self, name)
            if v is not None:
                d[name] = v
        return d


def normalize_doi(doi: str) -> str:
    d = doi.strip().lower()
    for prefix in ("https://doi.org/", "http://doi.org/", "http://dx.doi.org/", "doi:"):
        if d.startswith(prefix):
            d = d[len(prefix):]
    return d


# ---------------------------------------------------------------------------
# field scheme


@dataclass(frozen=True)
class FieldScheme:
    """Subject-category code to OECD discipline."""

    mapping: Mapping[str, str]

    def __post_init__(self):
        bad = {d for d in self.mapping.values() if d not in DISCIPLINES}
        if bad:
            raise ValueError(f"unknown discipline token(s): {sorted(bad)}")
        object.__setattr__(self, "mapping", dict(self.mapping))

    def discipline_of(self, code: str) -> str | None:
        return self.mapping.get(code)

    def __contains__(self, code: str) -> bool:
        return code in self.mapping

    @classmethod
    def load(cls, path: str | os.PathLike) -> FieldScheme:
        with open(path, newline="", encoding="utf-8") as fh:
            return cls.from_rows(csv.reader(fh))

    @classmethod
    def from_rows(cls, rows: Iterable[Sequence[str]]) -> FieldScheme:
        mapping = {}
        for i, row in enumerate(rows):
            if not row or not "".join(row).strip():
                continue
            if len(row) != 2:
                raise ValueError(f"scheme row {i + 1}: expected 2 columns, got {len(row)}")
            code, disc = row[0].strip(), row[1].strip()
            if i == 0 and (code, disc) == ("category_code", "discipline"):
                continue
            if code in mapping and mapping[code] != disc:
                raise ValueError(f"category {code!r} mapped twice")
            mapping[code] = disc
        return cls(mapping)

    def dump(self, path: str | os.PathLike) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["category_code", "discipline"])
            for code in sorted(self.mapping):
                w.writerow([code, self.mapping[code]])


def assign_disciplines(record: PublicationRecord, scheme: FieldScheme) -> frozenset[str]:
    """Disciplines of all mapped categories (whole counting).

    An empty set means every category is unmapped; such records only enter
    corpus-wide ("Total") analyses.
    """
    return frozenset(
        d for d in (scheme.discipline_of(c) for c in record.subject_categories) if d is not None
    )


# ---------------------------------------------------------------------------
# validation


def _req_int(obj: dict, key: str, reason: str) -> int:
    v = obj.get(key)
    if isinstance(v, bool) or not isinstance(v, int):
        raise RecordError(reason, f"{key}={v!r}")
    return v


def _opt_str(obj: dict, key: str) -> str | None:
    v = obj.get(key)
    if v is None:
        return None
    if not isinstance(v, str):
        raise RecordError("invalid field", f"{key}={v!r}")
    return v


def _year(v, horizon: int) -> int:
    if isinstance(v, bool) or not isinstance(v, int) or not (MIN_YEAR <= v <= horizon):
        raise RecordError("invalid year", repr(v))
    return v


# Repeated reference fields share one object per value; large corpora hold
# millions of references, most naming a small set of authors and sources.
_YEARS: dict[int, int] = {}


def _interned(obj: dict, key: str) -> str | None:
    return _intern(_opt_str(obj, key))


def _intern(v: str | None) -> str | None:
    return sys.intern(v) if v is not None else None


def _unpickle_ref(raw, doi, fak, year, source, volume, page) -> CitedReference:
    return CitedReference(raw, doi, _intern(fak), year if year is None else _YEARS.setdefault(year, year),
                          _intern(source), _intern(volume), _intern(page))


def parse_reference(obj) -> CitedReference:
    if not isinstance(obj, dict):
        raise RecordError("invalid reference", repr(obj)[:60])
    raw = obj.get("raw")
    if not isinstance(raw, str):
        raise RecordError("invalid reference", "raw string missing")
    ref_year = obj.get("ref_year")
    if ref_year is not None and (isinstance(ref_year, bool) or not isinstance(ref_year, int)):
        raise RecordError("invalid reference", f"ref_year={ref_year!r}")
    doi = _opt_str(obj, "doi")
    ref = CitedReference(
        raw=raw,
        doi=normalize_doi(doi) if doi else None,
        first_author_key=_interned(obj, "first_author_key"),
        ref_year=ref_year if ref_year is None else _YEARS.setdefault(ref_year, ref_year),
        source_token=_interned(obj, "source_token"),
        volume=_interned(obj, "volume"),
        first_page=_interned(obj, "first_page"),
    )
    if ref.doi is None and ref.composite_key is None:
        raise RecordError("invalid reference", "needs a doi or (first_author_key, ref_year, source_token)")
    return ref


def parse_record(obj, horizon: int = DEFAULT_HORIZON) -> PublicationRecord:
    """Validate one decoded JSON object; raise :class:`RecordError` on failure."""
    if not isinstance(obj, dict):
        raise RecordError("not an object")
    rid = obj.get("record_id")
    if not isinstance(rid, str) or not rid:
        raise RecordError("missing record_id")
    pub_year = _year(obj.get("pub_year"), horizon)
    doc_type = obj.get("doc_type")
    if not isinstance(doc_type, str) or not doc_type:
        raise RecordError("missing doc_type")
    journal_id = obj.get("journal_id")
    if not isinstance(journal_id, str):
        raise RecordError("missing journal_id")
    cats = obj.get("subject_categories")
    if not isinstance(cats, list) or not cats or not all(isinstance(c, str) and c for c in cats):
        raise RecordError("invalid subject_categories")
    authors = _req_int(obj, "author_count", "invalid author_count")
    if authors < 1:
        raise RecordError("invalid author_count", str(authors))
    jif = obj.get("jif")
    if jif is not None:
        if isinstance(jif, bool) or not isinstance(jif, (int, float)) or not (jif >= 0) or jif == float("inf"):
            raise RecordError("invalid jif", repr(jif))
        jif = float(jif)
    pages = obj.get("page_count")
    if pages is not None:
        if isinstance(pages, bool) or not isinstance(pages, int) or pages < 1:
            raise RecordError("invalid page_count", repr(pages))
    refs = obj.get("cited_refs", [])
    if not isinstance(refs, list):
        raise RecordError("invalid reference", "cited_refs is not a list")
    cby = obj.get("citations_by_year")
    if cby is not None:
        if not isinstance(cby, dict):
            raise RecordError("invalid citations_by_year")
        parsed = {}
        for k, v in cby.items():
            try:
                y = int(k)
            except (TypeError, ValueError):
                raise RecordError("invalid citations_by_year", repr(k)) from None
            if not (MIN_YEAR <= y <= horizon):
                raise RecordError("invalid citations_by_year", f"year {y}")
            if isinstance(v, bool) or not isinstance(v, int) or v < 0:
                raise RecordError("invalid citations_by_year", f"{k}: {v!r}")
            parsed[y] = v
        cby = parsed
    doi = _opt_str(obj, "doi")
    return PublicationRecord(
        record_id=rid,
        pub_year=pub_year,
        doc_type=doc_type,
        journal_id=journal_id,
        subject_categories=tuple(cats),
        author_count=authors,
        jif=jif,
        page_count=pages,
        cited_refs=tuple(parse_reference(r) for r in refs),
        citations_by_year=cby,
        doi=normalize_doi(doi) if doi else None,
        first_author_key=_opt_str(obj, "first_author_key"),
        source_token=_opt_str(obj, "source_token"),
        volume=_opt_str(obj, "volume"),
        first_page=_opt_str(obj, "first_page"),
    )


# ---------------------------------------------------------------------------
# snapshot


@dataclass(frozen=True)
class IngestStats:
    n_records: int
    per_year: dict[int, int]
    per_discipline: dict[str, int]
    n_missing_jif: int
    n_missing_pages: int
    n_unmapped: int
    n_all_unmapped: int
    rejects: dict[str, int] = field(default_factory=dict)

    def to_json(self) -> str:
        d = {
            "n_records": self.n_records,
            "per_year": {str(k): v for k, v in sorted(self.per_year.items())},
            "per_discipline": {k: self.per_discipline.get(k, 0) for k in DISCIPLINES},
            "n_missing_jif": self.n_missing_jif,
            "n_missing_pages": self.n_missing_pages,
            "n_unmapped": self.n_unmapped,
            "n_all_unmapped": self.n_all_unmapped,
            "rejects": dict(sorted(self.rejects.items())),
        }
        return json.dumps(d, indent=2, sort_keys=False)


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


class CorpusSnapshot:
    """Immutable, column-oriented collection of validated records."""

    _STR_COLS = ("record_id", "doc_type", "journal_id", "doi", "first_author_key",
                 "source_token", "volume", "first_page")

    def __init__(
        self,
        scheme: FieldScheme,
        *,
        record_id: Sequence[str],
        pub_year: np.ndarray,
        doc_type: Sequence[str],
        journal_id: Sequence[str],
        jif: np.ndarray,
        subject_categories: Sequence[tuple[str, ...]],
        author_count: np.ndarray,
        page_count: np.ndarray,
        cited_refs: Sequence[tuple[CitedReference, ...]],
        cby_offsets: np.ndarray,
        cby_years: np.ndarray,
        cby_counts: np.ndarray,
        has_cby: np.ndarray,
        doi: Sequence[str | None],
        first_author_key: Sequence[str | None],
        source_token: Sequence[str | None],
        volume: Sequence[str | None],
        first_page: Sequence[str | None],
        rejects: Mapping[str, int] | None = None,
    ):
        self.scheme = scheme
        self.record_id = tuple(record_id)
        self.pub_year = _frozen(np.asarray(pub_year, dtype=np.int32))
        self.doc_type = tuple(doc_type)
        self.journal_id = tuple(journal_id)
        self.jif = _frozen(np.asarray(jif, dtype=np.float64))
        self.subject_categories = tuple(subject_categories)
        self.author_count = _frozen(np.asarray(author_count, dtype=np.int32))
        self.page_count = _frozen(np.asarray(page_count, dtype=np.int32))
        self.cited_refs = tuple(cited_refs)
        self.cby_offsets = _frozen(np.asarray(cby_offsets, dtype=np.int64))
        self.cby_years = _frozen(np.asarray(cby_years, dtype=np.int32))
        self.cby_counts = _frozen(np.asarray(cby_counts, dtype=np.int64))
        self.has_cby = _frozen(np.asarray(has_cby, dtype=bool))
        self.doi = tuple(doi)
        self.first_author_key = tuple(first_author_key)
        self.source_token = tuple(source_token)
        self.volume = tuple(volume)
        self.first_page = tuple(first_page)
        self.rejects = dict(rejects or {})
        n = len(self.record_id)
        for name in ("pub_year", "jif", "author_count", "page_count", "has_cby"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"column {name} has wrong length")
        if len(self.cby_offsets) != n + 1:
            raise ValueError("citations_by_year offsets have wrong length")

    def __len__(self) -> int:
        return len(self.record_id)

    def __getitem__(self, i: int) -> PublicationRecord:
        if i < 0:
            i += len(self)
        lo, hi = self.cby_offsets[i], self.cby_offsets[i + 1]
        cby = None
        if self.has_cby[i]:
            cby = dict(zip(self.cby_years[lo:hi].tolist(), self.cby_counts[lo:hi].tolist()))
        jif = float(self.jif[i])
        pages = int(self.page_count[i])
        return PublicationRecord(
            record_id=self.record_id[i],
            pub_year=int(self.pub_year[i]),
            doc_type=self.doc_type[i],
            journal_id=self.journal_id[i],
            subject_categories=self.subject_categories[i],
            author_count=int(self.author_count[i]),
            jif=None if np.isnan(jif) else jif,
            page_count=pages if pages > 0 else None,
            cited_refs=self.cited_refs[i],
            citations_by_year=cby,
            doi=self.doi[i],
            first_author_key=self.first_author_key[i],
            source_token=self.source_token[i],
            volume=self.volume[i],
            first_page=self.first_page[i],
        )

    def __iter__(self) -> Iterator[PublicationRecord]:
        return (self[i] for i in range(len(self)))

    @cached_property
    def index_of(self) -> dict[str, int]:
        return {rid: i for i, rid in enumerate(self.record_id)}

    @cached_property
    def discipline_sets(self) -> tuple[frozenset[str], ...]:
        cache: dict[tuple[str, ...], frozenset[str]] = {}
        out = []
        for cats in self.subject_categories:
            ds = cache.get(cats)
            if ds is None:
                ds = frozenset(
                    d for d in (self.scheme.discipline_of(c) for c in cats) if d is not None
                )
                cache[cats] = ds
            out.append(ds)
        return tuple(out)

    def discipline_mask(self, discipline: str) -> np.ndarray:
        """Boolean membership of each record in ``discipline`` (or all for Total)."""
        if discipline == TOTAL:
            return np.ones(len(self), dtype=bool)
        return self._masks[discipline]

    @cached_property
    def _masks(self) -> dict[str, np.ndarray]:
        masks = {d: np.zeros(len(self), dtype=bool) for d in DISCIPLINES}
        for i, ds in enumerate(self.discipline_sets):
            for d in ds:
                masks[d][i] = True
        for m in masks.values():
            m.setflags(write=False)
        return masks

    @cached_property
    def ref_counts(self) -> np.ndarray:
        return _frozen(np.fromiter((len(r) for r in self.cited_refs), dtype=np.int64, count=len(self)))

    @cached_property
    def stats(self) -> IngestStats:
        years = Counter(self.pub_year.tolist())
        per_disc = Counter()
        unmapped = all_unmapped = 0
        for cats, ds in zip(self.subject_categories, self.discipline_sets):
            per_disc.update(ds)
            if not ds:
                all_unmapped += 1
            if any(c not in self.scheme for c in cats):
                unmapped += 1
        return IngestStats(
            n_records=len(self),
            per_year=dict(sorted(years.items())),
            per_discipline={d: per_disc.get(d, 0) for d in DISCIPLINES},
            n_missing_jif=int(np.isnan(self.jif).sum()),
            n_missing_pages=int((self.page_count <= 0).sum()),
            n_unmapped=unmapped,
            n_all_unmapped=all_unmapped,
            rejects=dict(self.rejects),
        )

    def subset(self, indices: Sequence[int] | np.ndarray) -> CorpusSnapshot:
        idx = np.asarray(indices, dtype=np.int64)
        il = idx.tolist()
        lens = np.diff(self.cby_offsets)[idx]
        offsets = np.r_[0, np.cumsum(lens)].astype(np.int64)
        gather = np.repeat(self.cby_offsets[idx] - offsets[:-1], lens) + np.arange(offsets[-1])
        cols = {name: [getattr(self, name)[i] for i in il] for name in self._STR_COLS}
        return CorpusSnapshot(
            self.scheme,
            pub_year=self.pub_year[idx],
            jif=self.jif[idx],
            subject_categories=[self.subject_categories[i] for i in il],
            author_count=self.author_count[idx],
            page_count=self.page_count[idx],
            cited_refs=[self.cited_refs[i] for i in il],
            cby_offsets=offsets,
            cby_years=self.cby_years[gather],
            cby_counts=self.cby_counts[gather],
            has_cby=self.has_cby[idx],
            **cols,
        )

    @classmethod
    def from_records(
        cls, records: Iterable[PublicationRecord], scheme: FieldScheme
    ) -> CorpusSnapshot:
        b = _ColumnBuilder()
        for r in records:
            b.add(r)
        return b.build(scheme)


class _ColumnBuilder:
    def __init__(self):
        self.cols: dict[str, list] = {
            name: [] for name in (*CorpusSnapshot._STR_COLS, "pub_year", "jif",
                                  "subject_categories", "author_count", "page_count",
                                  "cited_refs", "has_cby")
        }
        self.cby_len: list[int] = []
        self.cby_years: list[int] = []
        self.cby_counts: list[int] = []
        self.seen: set[str] = set()
        self._interned: dict = {}

    def _intern(self, v):
        if v is None:
            return None
        return self._interned.setdefault(v, v)

    def add(self, r: PublicationRecord) -> None:
        if r.record_id in self.seen:
            raise DuplicateRecordError(f"duplicate record_id {r.record_id!r}")
        self.seen.add(r.record_id)
        c = self.cols
        c["record_id"].append(r.record_id)
        c["pub_year"].append(r.pub_year)
        c["doc_type"].append(self._intern(r.doc_type))
        c["journal_id"].append(self._intern(r.journal_id))
        c["jif"].append(np.nan if r.jif is None else r.jif)
        c["subject_categories"].append(self._intern(r.subject_categories))
        c["author_count"].append(r.author_count)
        c["page_count"].append(r.page_count or 0)
        c["cited_refs"].append(r.cited_refs)
        c["doi"].append(r.doi)
        c["first_author_key"].append(self._intern(r.first_author_key))
        c["source_token"].append(self._intern(r.source_token))
        c["volume"].append(self._intern(r.volume))
        c["first_page"].append(self._intern(r.first_page))
        if r.citations_by_year is None:
            c["has_cby"].append(False)
            self.cby_len.append(0)
        else:
            c["has_cby"].append(True)
            items = sorted(r.citations_by_year.items())
            self.cby_len.append(len(items))
            for y, n in items:
                self.cby_years.append(y)
                self.cby_counts.append(n)

    def build(self, scheme: FieldScheme, rejects: Mapping[str, int] | None = None) -> CorpusSnapshot:
        c = self.cols
        offsets = np.zeros(len(self.cby_len) + 1, dtype=np.int64)
        np.cumsum(self.cby_len, out=offsets[1:])
        return CorpusSnapshot(
            scheme,
            record_id=c["record_id"],
            pub_year=np.array(c["pub_year"], dtype=np.int32),
            doc_type=c["doc_type"],
            journal_id=c["journal_id"],
            jif=np.array(c["jif"], dtype=np.float64),
            subject_categories=c["subject_categories"],
            author_count=np.array(c["author_count"], dtype=np.int32),
            page_count=np.array(c["page_count"], dtype=np.int32),
            cited_refs=c["cited_refs"],
            cby_offsets=offsets,
            cby_years=np.array(self.cby_years, dtype=np.int32),
            cby_counts=np.array(self.cby_counts, dtype=np.int64),
            has_cby=np.array(c["has_cby"], dtype=bool),
            doi=c["doi"],
            first_author_key=c["first_author_key"],
            source_token=c["source_token"],
            volume=c["volume"],
            first_page=c["first_page"],
            rejects=rejects,
        )


# ---------------------------------------------------------------------------
# ingestion


@dataclass(frozen=True)
class IngestConfig:
    horizon_year: int = DEFAULT_HORIZON
    on_malformed: str = "skip"  # "skip" | "fail"
    workers: int = 1
    chunk_size: int = 20000

    def __post_init__(self):
        if self.on_malformed not in ("skip", "fail"):
            raise ValueError(f"on_malformed must be 'skip' or 'fail', not {self.on_malformed!r}")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


def _parse_chunk(args) -> tuple[list[PublicationRecord], list[tuple[int, str, str]]]:
    start, lines, horizon = args
    ok, bad = [], []
    for offset, line in enumerate(lines):
        lineno = start + offset
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as e:
            bad.append((lineno, "invalid json", str(e)))
            continue
        try:
            ok.append(parse_record(obj, horizon))
        except RecordError as e:
            bad.append((lineno, e.reason, str(e)))
    return ok, bad


def _chunks(lines: Iterable[str], size: int, horizon: int):
    it = iter(lines)
    start = 1
    while True:
        block = list(islice(it, size))
        if not block:
            return
        yield start, block, horizon
        start += len(block)


def _open_stream(stream) -> tuple[Iterable[str], io.IOBase | None]:
    if isinstance(stream, (str, os.PathLike)):
        fh = open(stream, encoding="utf-8")
        return fh, fh
    return stream, None


def _bounded_map(pool: ProcessPoolExecutor, chunks, in_flight: int):
    """Ordered ``pool.map`` that keeps at most ``in_flight`` chunks pending."""
    pending: deque = deque()
    for chunk in chunks:
        pending.append(pool.submit(_parse_chunk, chunk))
        if len(pending) >= in_flight:
            yield pending.popleft().result()
    while pending:
        yield pending.popleft().result()


def ingest_records(
    stream, scheme: FieldScheme, config: IngestConfig | None = None
) -> CorpusSnapshot:
    """Validate a JSON-lines record source into a :class:`CorpusSnapshot`.

    ``stream`` is a path or any iterable of text lines.  Malformed lines are
    logged and skipped (or raise :class:`MalformedRecordError` when
    ``config.on_malformed == "fail"``); a duplicate ``record_id`` always
    raises :class:`DuplicateRecordError`.  Records with categories unknown to
    ``scheme`` are kept and counted as unmapped.
    """
    config = config or IngestConfig()
    lines, fh = _open_stream(stream)
    builder = _ColumnBuilder()
    rejects: Counter = Counter()
    chunks = _chunks(lines, config.chunk_size, config.horizon_year)
    pool = ProcessPoolExecutor(config.workers) if config.workers > 1 else None
    try:
        results = _bounded_map(pool, chunks, 2 * config.workers) if pool else map(_parse_chunk, chunks)
        for ok, bad in results:
            for lineno, reason, detail in bad:
                if config.on_malformed == "fail":
                    raise MalformedRecordError(lineno, reason)
                log.warning("skipping line %d: %s", lineno, detail)
                rejects[reason] += 1
            for rec in ok:
                builder.add(rec)
    finally:
        if pool:
            pool.shutdown(cancel_futures=True)
        if fh:
            fh.close()
    snap = builder.build(scheme, rejects)
    unmapped = snap.stats.n_unmapped
    if unmapped:
        log.info("%d records carry subject categories unknown to the scheme", unmapped)
    return snap


def filter_articles(
    snapshot: CorpusSnapshot, years: Iterable[int], doc_type: str = "article"
) -> CorpusSnapshot:
    """Sub-snapshot of records with ``doc_type`` published in ``years``."""
    years = set(years)
    keep = [
        i
        for i, (dt, y) in enumerate(zip(snapshot.doc_type, snapshot.pub_year.tolist()))
        if dt == doc_type and y in years
    ]
    return snapshot.subset(keep)


def write_records(records: Iterable[PublicationRecord], out=sys.stdout) -> int:
    n = 0
    for r in records:
        out.write(json.dumps(r.to_dict(), separators=(",", ":")))
        out.write("\n")
        n += 1
    return n
