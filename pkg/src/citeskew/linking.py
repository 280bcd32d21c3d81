"""
Reference linking and windowed citation counts.

Each cited reference is matched against the corpus by exact DOI first and,
failing that, by the composite key ``(first_author_key, year, source)``
narrowed by volume / first page where both sides carry them.  References
matching several records are ambiguous and stay unlinked.
"""

from __future__ import annotations

import csv
import logging
import os
from dataclasses import dataclass, field
from functools import cached_property
from typing import Union

import numpy as np

from .corpus import CorpusSnapshot

log = logging.getLogger(__name__)

MATCH_RULE_VERSION = "doi>author-year-source/vol-page:1"

_AMBIGUOUS = -1


@dataclass(frozen=True)
class Fixed:
    """Citing years ``pub_year + start_offset`` .. ``pub_year + end_offset``."""

    start_offset: int = 1
    end_offset: int = 3

    def __post_init__(self):
        if not (1 <= self.start_offset <= self.end_offset):
            raise ValueError(f"invalid fixed window {self.start_offset}..{self.end_offset}")

    def bounds(self, pub_year):
        return pub_year + self.start_offset, pub_year + self.end_offset

    def truncated(self, pub_year: int, horizon_year: int) -> bool:
        return pub_year + self.end_offset > horizon_year

    def __str__(self):
        if self.start_offset == 1:
            return f"fixed:{self.end_offset}"
        return f"fixed:{self.start_offset}-{self.end_offset}"


@dataclass(frozen=True)
class Open:
    """Citing years from the publication year through ``horizon_year``."""

    horizon_year: int

    def bounds(self, pub_year):
        return pub_year, self.horizon_year

    def truncated(self, pub_year: int, horizon_year: int) -> bool:
        return False

    def __str__(self):
        return f"open:{self.horizon_year}"


WindowSpec = Union[Fixed, Open]


def parse_window(text: str) -> WindowSpec:
    """``fixed:3`` (offsets 1..3), ``fixed:2-5`` or ``open:2014``."""
    kind, _, arg = text.strip().partition(":")
    try:
        if kind == "fixed":
            if "-" in arg:
                a, b = arg.split("-", 1)
                return Fixed(int(a), int(b))
            return Fixed(1, int(arg))
        if kind == "open":
            return Open(int(arg))
    except ValueError as e:
        raise ValueError(f"bad window {text!r}: {e}") from None
    raise ValueError(f"bad window {text!r}; expected fixed:N, fixed:A-B or open:YYYY")


class WindowCount(int):
    """Citation count that remembers whether its window ran past the data horizon."""

    truncated: bool

    def __new__(cls, value: int, truncated: bool = False):
        obj = super().__new__(cls, value)
        obj.truncated = truncated
        return obj


@dataclass
class LinkStats:
    match_rule: str = MATCH_RULE_VERSION
    n_refs: int = 0
    n_doi_matches: int = 0
    n_composite_matches: int = 0
    n_ambiguous: int = 0
    n_unlinked: int = 0
    n_early_links: int = 0  # citing year before the cited record's publication year

    def as_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass(frozen=True, eq=False)
class CitationIndex:
    """Inbound citation histograms and per-record reference counts.

    Link-derived inbound counts live in the link table; records that carry a
    pre-aggregated ``citations_by_year`` map keep it as a separate
    ("supplied") histogram.
    """

    record_id: tuple[str, ...]
    pub_year: np.ndarray
    horizon_year: int
    link_citing: np.ndarray
    link_cited: np.ndarray
    link_year: np.ndarray
    all_ref_count: np.ndarray
    supplied_offsets: np.ndarray
    supplied_years: np.ndarray
    supplied_counts: np.ndarray
    has_supplied: np.ndarray
    stats: LinkStats = field(default_factory=LinkStats)

    @cached_property
    def index_of(self) -> dict[str, int]:
        return {rid: i for i, rid in enumerate(self.record_id)}

    @cached_property
    def linked_ref_count(self) -> np.ndarray:
        return np.bincount(self.link_citing, minlength=len(self.record_id)).astype(np.int64)

    @cached_property
    def inbound_total(self) -> np.ndarray:
        return np.bincount(self.link_cited, minlength=len(self.record_id)).astype(np.int64)

    @cached_property
    def _inbound_hist(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        if len(self.link_cited) == 0:
            z = np.zeros(0, dtype=np.int64)
            return z, z, z
        base = int(self.link_year.min())
        span = int(self.link_year.max()) - base + 1
        key = self.link_cited.astype(np.int64) * span + (self.link_year - base)
        uniq, counts = np.unique(key, return_counts=True)
        return uniq // span, uniq % span + base, counts.astype(np.int64)

    def _supplied_hist(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        rec = np.repeat(np.arange(len(self.record_id)), np.diff(self.supplied_offsets))
        return rec, self.supplied_years.astype(np.int64), self.supplied_counts

    def _pos(self, record_id: str) -> int:
        try:
            return self.index_of[record_id]
        except KeyError:
            raise KeyError(f"unknown record_id {record_id!r}") from None

    def inbound(self, record_id: str, source: str = "links") -> dict[int, int]:
        """Citing-year histogram of one record."""
        i = self._pos(record_id)
        if source == "supplied" or (source == "auto" and self.has_supplied[i]):
            lo, hi = self.supplied_offsets[i], self.supplied_offsets[i + 1]
            return dict(zip(self.supplied_years[lo:hi].tolist(), self.supplied_counts[lo:hi].tolist()))
        rec, yr, cnt = self._inbound_hist
        lo, hi = np.searchsorted(rec, [i, i + 1])
        return dict(zip(yr[lo:hi].tolist(), cnt[lo:hi].tolist()))

    def citation_counts(self, window: WindowSpec, source: str = "auto") -> np.ndarray:
        """Windowed citation count of every record (vectorized).

        ``source`` is ``"links"`` (link-derived), ``"supplied"`` (the
        records' own ``citations_by_year``) or ``"auto"``: supplied where a
        record carries it, link-derived otherwise.
        """
        if source not in ("auto", "links", "supplied"):
            raise ValueError(f"unknown citation source {source!r}")
        n = len(self.record_id)
        out = np.zeros(n, dtype=np.int64)
        if source in ("auto", "links"):
            out = self._window_sum(*self._inbound_hist, window)
        if source in ("auto", "supplied"):
            sup = self._window_sum(*self._supplied_hist(), window)
            out = np.where(self.has_supplied, sup, out) if source == "auto" else sup
        return out

    def _window_sum(self, rec, yr, cnt, window: WindowSpec) -> np.ndarray:
        n = len(self.record_id)
        if len(rec) == 0:
            return np.zeros(n, dtype=np.int64)
        lo, hi = window.bounds(self.pub_year[rec])
        inside = (yr >= lo) & (yr <= hi)
        return np.bincount(rec[inside], weights=cnt[inside], minlength=n).round().astype(np.int64)

    def link_table(self) -> list[tuple[str, str, int]]:
        ids = self.record_id
        return [
            (ids[a], ids[b], y)
            for a, b, y in zip(self.link_citing.tolist(), self.link_cited.tolist(), self.link_year.tolist())
        ]

    def export_links(self, path: str | os.PathLike) -> int:
        rows = self.link_table()
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["citing_id", "cited_id", "citing_year"])
            w.writerows(rows)
        return len(rows)


def _build_keys(snapshot: CorpusSnapshot):
    by_doi: dict[str, int] = {}
    by_key: dict[tuple, int | list[int]] = {}
    years = snapshot.pub_year.tolist()
    for i, doi in enumerate(snapshot.doi):
        if doi is not None:
            by_doi[doi] = _AMBIGUOUS if doi in by_doi else i
    for i, (author, src, jid) in enumerate(
        zip(snapshot.first_author_key, snapshot.source_token, snapshot.journal_id)
    ):
        if not author:
            continue
        key = (author, years[i], src or jid)
        prev = by_key.get(key)
        if prev is None:
            by_key[key] = i
        elif isinstance(prev, list):
            prev.append(i)
        else:
            by_key[key] = [prev, i]
    return by_doi, by_key


def _narrow(cands: list[int], ref, snapshot: CorpusSnapshot) -> list[int]:
    out = []
    for c in cands:
        vol, page = snapshot.volume[c], snapshot.first_page[c]
        if ref.volume is not None and vol is not None and vol != ref.volume:
            continue
        if ref.first_page is not None and page is not None and page != ref.first_page:
            continue
        out.append(c)
    return out


def link_references(snapshot: CorpusSnapshot, horizon_year: int | None = None) -> CitationIndex:
    """Match every cited reference in ``snapshot`` against its records.

    Each match adds one inbound citation to the cited record at the citing
    record's publication year and one linked reference to the citing record.
    Self-citations count like any other link.
    """
    by_doi, by_key = _build_keys(snapshot)
    stats = LinkStats()
    citing: list[int] = []
    cited: list[int] = []
    for i, refs in enumerate(snapshot.cited_refs):
        for ref in refs:
            stats.n_refs += 1
            target = None
            ambiguous = False
            if ref.doi is not None:
                hit = by_doi.get(ref.doi)
                if hit == _AMBIGUOUS:
                    ambiguous = True
                elif hit is not None:
                    target = hit
                    stats.n_doi_matches += 1
            if target is None and not ambiguous:
                key = ref.composite_key
                if key is not None:
                    hit = by_key.get(key)
                    if isinstance(hit, list):
                        hit = _narrow(hit, ref, snapshot)
                        if len(hit) == 1:
                            hit = hit[0]
                        elif len(hit) > 1:
                            ambiguous = True
                            hit = None
                        else:
                            hit = None
                    elif hit is not None and not _narrow([hit], ref, snapshot):
                        hit = None
                    if hit is not None:
                        target = hit
                        stats.n_composite_matches += 1
            if target is None:
                if ambiguous:
                    stats.n_ambiguous += 1
                stats.n_unlinked += 1
                continue
            citing.append(i)
            cited.append(target)
    link_citing = np.array(citing, dtype=np.int64)
    link_cited = np.array(cited, dtype=np.int64)
    pub = snapshot.pub_year.astype(np.int64)
    link_year = pub[link_citing] if len(link_citing) else np.zeros(0, dtype=np.int64)
    if len(link_citing):
        stats.n_early_links = int((link_year < pub[link_cited]).sum())
    if stats.n_early_links:
        log.info("%d links cite a record published after the citing record", stats.n_early_links)
    if stats.n_ambiguous:
        log.info("%d references matched several records and were left unlinked", stats.n_ambiguous)
    if horizon_year is None:
        horizon_year = int(max(snapshot.pub_year.max(initial=0),
                               snapshot.cby_years.max(initial=0)))
    return CitationIndex(
        record_id=snapshot.record_id,
        pub_year=pub,
        horizon_year=horizon_year,
        link_citing=link_citing,
        link_cited=link_cited,
        link_year=link_year,
        all_ref_count=snapshot.ref_counts.astype(np.int64),
        supplied_offsets=snapshot.cby_offsets,
        supplied_years=snapshot.cby_years,
        supplied_counts=snapshot.cby_counts,
        has_supplied=snapshot.has_cby,
        stats=stats,
    )


def citation_count(
    index: CitationIndex,
    record_id: str,
    window: WindowSpec,
    pub_year: int | None = None,
    source: str = "auto",
) -> WindowCount:
    """Citations of one record inside ``window``.

    >>> # inbound {1990: 2, 1991: 1, 1993: 5, 1994: 1}, pub_year 1990
    >>> # Fixed(1, 3) -> 6, Open(2014) -> 9
    """
    i = index._pos(record_id)
    if pub_year is None:
        pub_year = int(index.pub_year[i])
    hist = index.inbound(record_id, source)
    lo, hi = window.bounds(pub_year)
    total = sum(c for y, c in hist.items() if lo <= y <= hi)
    return WindowCount(total, window.truncated(pub_year, index.horizon_year))


def linked_ref_count(index: CitationIndex, record_id: str) -> int:
    return int(index.linked_ref_count[index._pos(record_id)])


def all_ref_count(index: CitationIndex, record_id: str) -> int:
    return int(index.all_ref_count[index._pos(record_id)])
