"""
Discipline x year breakdowns of citation impact.

Three studies produce rows of an :class:`AnalysisMatrix`:

* :func:`impact_distribution`: citations and linked-reference counts, each
  ranked by itself;
* :func:`density_profile`: self-ranked citation densities under a fixed
  window, publication years pooled;
* :func:`fic_covariate`: citations (raw or MNCS) ranked by a covariate.

"Total" rows pool every record once, whatever its disciplines.
"""

from __future__ import annotations

import csv
import enum
import json
import logging
import os
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .corpus import DISCIPLINES, TOTAL, CorpusSnapshot, FieldScheme
from .inequality import (
    CutSpec,
    ShareBreakdown,
    gini,
    percentile_shares,
    percentile_shares_by,
)
from .linking import CitationIndex, Fixed, WindowSpec, parse_window
from .normalize import CellTable, mncs_scores

log = logging.getLogger(__name__)

REPORT_HEADER = (
    "discipline", "pub_year", "ranking", "outcome", "window", "group",
    "width_pct", "share_pct", "density", "gini", "n_papers", "total_outcome",
)
POOLED = "pooled"
SELF = "self"


class FicKind(enum.Enum):
    AllRefs = "all_refs"
    LinkedRefs = "linked_refs"
    Authors = "authors"
    Pages = "pages"
    Jif = "jif"

    @classmethod
    def parse(cls, text: str) -> FicKind:
        try:
            return cls(text.strip())
        except ValueError:
            raise ValueError(f"unknown FIC {text!r}; choose from {[f.value for f in cls]}") from None


RANKING_ORDER = (SELF, *(f.value for f in FicKind))
OUTCOME_ORDER = ("times_cited", "mncs", "linked_refs")


@dataclass(frozen=True)
class OutcomeKind:
    kind: str  # "times_cited" | "mncs" | "linked_refs"
    window: WindowSpec | None

    def __post_init__(self):
        if self.kind not in OUTCOME_ORDER:
            raise ValueError(f"unknown outcome {self.kind!r}")
        if self.kind != "linked_refs" and self.window is None:
            raise ValueError(f"outcome {self.kind} needs an explicit window")

    @property
    def window_label(self) -> str:
        return str(self.window) if self.window is not None else "none"


def TimesCited(window: WindowSpec) -> OutcomeKind:
    return OutcomeKind("times_cited", window)


def NormalizedCitations(window: WindowSpec) -> OutcomeKind:
    return OutcomeKind("mncs", window)


LINKED_REFS = OutcomeKind("linked_refs", None)


@dataclass(frozen=True)
class Row:
    discipline: str
    pub_year: int | None  # None: years pooled
    ranking: str
    outcome: str
    window: str
    breakdown: ShareBreakdown
    n_papers: int
    n_missing: int = 0  # records excluded for lacking the ranking attribute

    @property
    def key(self) -> tuple:
        return (self.discipline, self.pub_year, self.ranking, self.outcome, self.window)

    def sort_key(self) -> tuple:
        d = DISCIPLINES.index(self.discipline) if self.discipline in DISCIPLINES else len(DISCIPLINES)
        y = self.pub_year if self.pub_year is not None else 10**6
        return (d, y, RANKING_ORDER.index(self.ranking), OUTCOME_ORDER.index(self.outcome), self.window)

    def as_dict(self) -> dict:
        return {
            "discipline": self.discipline,
            "pub_year": self.pub_year,
            "ranking": self.ranking,
            "outcome": self.outcome,
            "window": self.window,
            "n_papers": self.n_papers,
            "n_missing": self.n_missing,
            "breakdown": self.breakdown.as_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> Row:
        return cls(
            discipline=d["discipline"],
            pub_year=d["pub_year"],
            ranking=d["ranking"],
            outcome=d["outcome"],
            window=d["window"],
            breakdown=ShareBreakdown.from_dict(d["breakdown"]),
            n_papers=d["n_papers"],
            n_missing=d.get("n_missing", 0),
        )


@dataclass
class AnalysisMatrix:
    rows: list[Row] = field(default_factory=list)
    notices: list[str] = field(default_factory=list)

    def __len__(self):
        return len(self.rows)

    def __iter__(self):
        return iter(self.rows)

    def extend(self, other: AnalysisMatrix) -> AnalysisMatrix:
        self.rows.extend(other.rows)
        self.notices.extend(other.notices)
        return self

    def sorted_rows(self) -> list[Row]:
        return sorted(self.rows, key=Row.sort_key)

    def get(self, discipline: str, pub_year: int | None, ranking: str, outcome: str) -> Row:
        for r in self.rows:
            if (r.discipline, r.pub_year, r.ranking, r.outcome) == (discipline, pub_year, ranking, outcome):
                return r
        raise KeyError((discipline, pub_year, ranking, outcome))

    def to_json(self) -> str:
        return json.dumps(
            {"rows": [r.as_dict() for r in self.sorted_rows()], "notices": self.notices},
            indent=1,
        )

    @classmethod
    def from_json(cls, text: str) -> AnalysisMatrix:
        d = json.loads(text)
        return cls([Row.from_dict(r) for r in d["rows"]], list(d.get("notices", [])))

    def save(self, path: str | os.PathLike) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json())
            fh.write("\n")

    @classmethod
    def load(cls, path: str | os.PathLike) -> AnalysisMatrix:
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(fh.read())


# ---------------------------------------------------------------------------
# per-record frame


class _Frame:
    """Per-record outcome and covariate arrays, computed once and reused."""

    def __init__(self, snapshot: CorpusSnapshot, index: CitationIndex, scheme: FieldScheme | None,
                 source: str = "auto"):
        if len(index.record_id) != len(snapshot) or index.record_id != snapshot.record_id:
            raise ValueError("citation index was not built from this snapshot")
        self.snapshot = snapshot
        self.index = index
        self.source = source
        self.scheme = scheme or snapshot.scheme
        self.year = snapshot.pub_year
        self._cites: dict = {}
        self._mncs: dict = {}
        if self.scheme == snapshot.scheme:
            self._mask = snapshot.discipline_mask
        else:
            masks = {d: np.zeros(len(snapshot), dtype=bool) for d in DISCIPLINES}
            for i, cats in enumerate(snapshot.subject_categories):
                for c in cats:
                    d = self.scheme.discipline_of(c)
                    if d is not None:
                        masks[d][i] = True
            self._mask = lambda d: np.ones(len(snapshot), dtype=bool) if d == TOTAL else masks[d]

    def cites(self, window: WindowSpec) -> np.ndarray:
        if window not in self._cites:
            self._cites[window] = self.index.citation_counts(window, self.source)
        return self._cites[window]

    def mncs(self, window: WindowSpec) -> np.ndarray:
        if window not in self._mncs:
            self._mncs[window] = mncs_scores(self.snapshot, self.index, window, self.source,
                                             cites=self.cites(window))
        return self._mncs[window]

    def outcome(self, outcome: OutcomeKind) -> np.ndarray:
        if outcome.kind == "times_cited":
            return self.cites(outcome.window).astype(np.float64)
        if outcome.kind == "mncs":
            return self.mncs(outcome.window)
        return self.index.linked_ref_count.astype(np.float64)

    def covariate(self, fic: FicKind) -> np.ndarray:
        """FIC values with NaN marking missing data."""
        s = self.snapshot
        if fic is FicKind.AllRefs:
            return self.index.all_ref_count.astype(np.float64)
        if fic is FicKind.LinkedRefs:
            return self.index.linked_ref_count.astype(np.float64)
        if fic is FicKind.Authors:
            return s.author_count.astype(np.float64)
        if fic is FicKind.Pages:
            return np.where(s.page_count > 0, s.page_count, np.nan).astype(np.float64)
        return s.jif.astype(np.float64)

    def groups(self, pooled: bool = False) -> Iterable[tuple[str, int | None, np.ndarray]]:
        years = [None] if pooled else sorted(set(self.year.tolist()))
        for d in (*DISCIPLINES, TOTAL):
            dm = self._mask(d)
            for y in years:
                m = dm if y is None else dm & (self.year == y)
                if m.any():
                    yield d, y, m


def _frame(snapshot, index, scheme, frame):
    return frame if frame is not None else _Frame(snapshot, index, scheme)


def _self_row(d, y, m, values, outcome: OutcomeKind, cuts, notices) -> Row | None:
    v = values[m]
    if not v.sum() > 0:
        notices.append(f"{d} {y if y is not None else POOLED} {outcome.kind}: zero total, row omitted")
        log.info(notices[-1])
        return None
    return Row(d, y, SELF, outcome.kind, outcome.window_label, percentile_shares(v, cuts), int(m.sum()))


def impact_distribution(
    snapshot: CorpusSnapshot,
    index: CitationIndex,
    scheme: FieldScheme | None,
    window: WindowSpec,
    cuts: CutSpec | None = None,
    *,
    frame: _Frame | None = None,
) -> AnalysisMatrix:
    """Self-ranked breakdowns of citations and of linked-reference counts."""
    cuts = cuts or CutSpec()
    f = _frame(snapshot, index, scheme, frame)
    out = AnalysisMatrix()
    tc = TimesCited(window)
    cites = f.outcome(tc)
    linked = f.outcome(LINKED_REFS)
    for d, y, m in f.groups():
        for oc, values in ((tc, cites), (LINKED_REFS, linked)):
            row = _self_row(d, y, m, values, oc, cuts, out.notices)
            if row is not None:
                out.rows.append(row)
    return out


def density_profile(
    snapshot: CorpusSnapshot,
    index: CitationIndex,
    scheme: FieldScheme | None,
    fixed_window: WindowSpec,
    cuts: CutSpec | None = None,
    *,
    frame: _Frame | None = None,
) -> AnalysisMatrix:
    """Per-discipline self-ranked citation densities, publication years pooled.

    Each record is counted in its own fixed window before pooling.
    """
    if not isinstance(fixed_window, Fixed):
        raise ValueError(f"density profiles need a fixed window, got {fixed_window}")
    cuts = cuts or CutSpec()
    f = _frame(snapshot, index, scheme, frame)
    out = AnalysisMatrix()
    tc = TimesCited(fixed_window)
    cites = f.outcome(tc)
    for d, y, m in f.groups(pooled=True):
        row = _self_row(d, y, m, cites, tc, cuts, out.notices)
        if row is not None:
            out.rows.append(row)
    return out


def fic_covariate(
    snapshot: CorpusSnapshot,
    index: CitationIndex,
    cells: CellTable | None,
    scheme: FieldScheme | None,
    fic: FicKind,
    outcome: OutcomeKind,
    cuts: CutSpec | None = None,
    *,
    frame: _Frame | None = None,
) -> AnalysisMatrix:
    """Citation shares of groups ranked by a covariate.

    Records lacking the covariate are left out of that analysis only; the
    row records how many were included and how many were missing.
    """
    if outcome.kind == "linked_refs":
        raise ValueError("covariate analyses rank citation outcomes")
    if outcome.kind == "mncs":
        if cells is None:
            raise ValueError("normalized outcomes need reference cells")
        if cells.window != outcome.window:
            raise ValueError(f"cells computed for {cells.window}, outcome uses {outcome.window}")
    cuts = cuts or CutSpec()
    f = _frame(snapshot, index, scheme, frame)
    if cells is not None:
        f.source = cells.source
    values = f.outcome(outcome)
    ranking = f.covariate(fic)
    present = ~np.isnan(ranking)
    out = AnalysisMatrix()
    for d, y, m in f.groups():
        keep = m & present
        n_missing = int(m.sum() - keep.sum())
        label = f"{d} {y} {fic.value}/{outcome.kind}"
        if not keep.any():
            out.notices.append(f"{label}: no records carry {fic.value}, row omitted")
            log.info(out.notices[-1])
            continue
        v = values[keep]
        if not v.sum() > 0:
            out.notices.append(f"{label}: zero total, row omitted")
            log.info(out.notices[-1])
            continue
        b = percentile_shares_by(v, ranking[keep], cuts)
        out.rows.append(Row(d, y, fic.value, outcome.kind, outcome.window_label, b,
                            int(keep.sum()), n_missing))
    return out


def analyze(
    snapshot: CorpusSnapshot,
    index: CitationIndex,
    window: WindowSpec,
    cuts: CutSpec | None = None,
    fics: Sequence[FicKind] = tuple(FicKind),
    outcomes: Sequence[str] = ("times_cited", "mncs"),
    scheme: FieldScheme | None = None,
    source: str = "auto",
) -> AnalysisMatrix:
    """All rows for one window: self-ranked impact plus every FIC x outcome."""
    f = _Frame(snapshot, index, scheme, source)
    matrix = impact_distribution(snapshot, index, scheme, window, cuts, frame=f)
    cells = None
    if "mncs" in outcomes:
        from .normalize import compute_cell_means

        cells = compute_cell_means(snapshot, index, window, source)
    for fic in fics:
        for kind in outcomes:
            oc = OutcomeKind(kind, window)
            matrix.extend(fic_covariate(snapshot, index, cells, scheme, fic, oc, cuts, frame=f))
    return matrix


# ---------------------------------------------------------------------------
# report


def _num(x: float) -> str:
    return format(float(x), ".12g")


def report_lines(matrix: AnalysisMatrix) -> list[list[str]]:
    out = []
    for r in matrix.sorted_rows():
        b = r.breakdown
        year = str(r.pub_year) if r.pub_year is not None else POOLED
        for label, w, s, dens in zip(b.labels, b.widths, b.shares, b.densities):
            out.append([r.discipline, year, r.ranking, r.outcome, r.window, label,
                        format(w, "g"), _num(s), _num(dens), _num(b.gini), str(r.n_papers),
                        _num(b.total_outcome)])
    return out


def emit_report(matrix: AnalysisMatrix, destination: str | os.PathLike) -> list[str]:
    """Write the report CSV (and a notices sidecar when rows were omitted).

    ``destination`` is a CSV path or an existing directory, in which case
    ``report.csv`` is written inside it.
    """
    if not matrix.rows:
        raise ValueError("empty analysis matrix")
    dest = os.fspath(destination)
    if os.path.isdir(dest):
        dest = os.path.join(dest, "report.csv")
    written = []
    with open(dest, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPORT_HEADER)
        w.writerows(report_lines(matrix))
    written.append(dest)
    if matrix.notices:
        side = os.path.splitext(dest)[0] + ".notices.log"
        with open(side, "w", encoding="utf-8") as fh:
            fh.writelines(n + "\n" for n in matrix.notices)
        written.append(side)
    return written


def read_report(path: str | os.PathLike) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


__all__ = [
    "AnalysisMatrix", "FicKind", "OutcomeKind", "Row", "TimesCited", "NormalizedCitations",
    "LINKED_REFS", "impact_distribution", "density_profile", "fic_covariate", "analyze",
    "emit_report", "read_report", "report_lines", "parse_window", "gini",
]
