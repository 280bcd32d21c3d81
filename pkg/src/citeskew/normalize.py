"""
Mean-normalized citation scores (MNCS).

A paper's windowed citation count is divided by the mean count of its
(subject category, publication year) reference cell.  Papers in several
categories contribute fully to each of their cells and receive the
arithmetic mean of their per-cell ratios.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass
from typing import Iterator, Mapping

import numpy as np

from .corpus import CorpusSnapshot, PublicationRecord
from .linking import CitationIndex, WindowSpec, citation_count


@dataclass(frozen=True)
class ReferenceCell:
    category: str
    pub_year: int
    n_papers: int
    total_citations: int
    mean_citations: float

    @property
    def key(self) -> tuple[str, int]:
        return (self.category, self.pub_year)

    @property
    def all_zero_flag(self) -> bool:
        return self.total_citations == 0


@dataclass(frozen=True)
class NormalizedScore:
    record_id: str
    mncs: float
    cells: tuple[tuple[str, int], ...]
    zero_cells: int = 0  # contributing cells whose mean is zero


class CellTable(Mapping):
    """Reference cells keyed by ``(category, pub_year)``, computed under one window."""

    def __init__(self, cells: Mapping[tuple[str, int], ReferenceCell], window: WindowSpec,
                 source: str, record_ids: tuple[str, ...]):
        self._cells = dict(cells)
        self.window = window
        self.source = source
        self._ids = frozenset(record_ids)

    def __getitem__(self, key):
        return self._cells[key]

    def __iter__(self) -> Iterator[tuple[str, int]]:
        return iter(self._cells)

    def __len__(self):
        return len(self._cells)

    def covers(self, record_id: str) -> bool:
        return record_id in self._ids

    def export(self, path: str | os.PathLike) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["category", "pub_year", "n_papers", "mean_citations"])
            for key in sorted(self._cells):
                c = self._cells[key]
                w.writerow([c.category, c.pub_year, c.n_papers, repr(c.mean_citations)])


def _category_pairs(snapshot: CorpusSnapshot):
    """Explode records into (record, category-code) pairs."""
    codes: dict[str, int] = {}
    rec, cat = [], []
    for i, cats in enumerate(snapshot.subject_categories):
        for c in dict.fromkeys(cats):
            rec.append(i)
            cat.append(codes.setdefault(c, len(codes)))
    names = sorted(codes, key=codes.get)
    return np.array(rec, dtype=np.int64), np.array(cat, dtype=np.int64), names


def _cells(snapshot: CorpusSnapshot, cites: np.ndarray):
    rec, cat, names = _category_pairs(snapshot)
    years = snapshot.pub_year.astype(np.int64)[rec]
    y0 = int(years.min()) if len(years) else 0
    span = (int(years.max()) - y0 + 1) if len(years) else 1
    key = cat * span + (years - y0)
    uniq, inverse = np.unique(key, return_inverse=True)
    n = np.bincount(inverse, minlength=len(uniq))
    tot = np.bincount(inverse, weights=cites[rec].astype(np.float64), minlength=len(uniq))
    return rec, inverse, uniq, n, tot.round().astype(np.int64), names, span, y0


def compute_cell_means(
    snapshot: CorpusSnapshot, index: CitationIndex, window: WindowSpec, source: str = "auto"
) -> CellTable:
    cites = index.citation_counts(window, source)
    _, _, uniq, n, tot, names, span, y0 = _cells(snapshot, cites)
    cells = {}
    for k, cnt, t in zip(uniq.tolist(), n.tolist(), tot.tolist()):
        c = ReferenceCell(names[k // span], k % span + y0, cnt, t, t / cnt)
        cells[c.key] = c
    return CellTable(cells, window, source, snapshot.record_id)


def mncs(
    record: PublicationRecord, cells: CellTable, index: CitationIndex, window: WindowSpec
) -> NormalizedScore:
    """Normalized score of one record.

    Per-cell ratios are citations over cell mean; a cell whose mean is zero
    contributes a ratio of 0.
    """
    if not cells.covers(record.record_id):
        raise KeyError(f"record {record.record_id!r} is not part of the cells' snapshot")
    if window != cells.window:
        raise ValueError(f"cells were computed for window {cells.window}, not {window}")
    c = int(citation_count(index, record.record_id, window, source=cells.source))
    keys = tuple((cat, record.pub_year) for cat in dict.fromkeys(record.subject_categories))
    ratios = []
    zero = 0
    for key in keys:
        cell = cells[key]
        if cell.all_zero_flag:
            zero += 1
            ratios.append(0.0)
        else:
            ratios.append(c / cell.mean_citations)
    return NormalizedScore(record.record_id, sum(ratios) / len(ratios), keys, zero)


def mncs_scores(
    snapshot: CorpusSnapshot,
    index: CitationIndex,
    window: WindowSpec,
    source: str = "auto",
    cites: np.ndarray | None = None,
) -> np.ndarray:
    """MNCS of every record in ``snapshot``, cells computed from the same snapshot."""
    if cites is None:
        cites = index.citation_counts(window, source)
    rec, inverse, _, n, tot, _, _, _ = _cells(snapshot, cites)
    mean = tot / n
    safe = np.where(mean > 0, mean, 1.0)
    ratio = np.where(mean[inverse] > 0, cites[rec] / safe[inverse], 0.0)
    k = np.bincount(rec, minlength=len(snapshot))
    s = np.bincount(rec, weights=ratio, minlength=len(snapshot))
    return s / np.maximum(k, 1)
