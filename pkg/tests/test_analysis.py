import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import SCHEME, lines, rec
from citeskew.analysis import (
    REPORT_HEADER,
    AnalysisMatrix,
    FicKind,
    NormalizedCitations,
    TimesCited,
    analyze,
    density_profile,
    emit_report,
    fic_covariate,
    impact_distribution,
    read_report,
)
from citeskew.corpus import ingest_records
from citeskew.inequality import CutSpec, percentile_shares, percentile_shares_by
from citeskew.linking import Fixed, Open, link_references
from citeskew.normalize import compute_cell_means

W = Open(2014)


def build(records):
    s = ingest_records(lines(*records), SCHEME)
    return s, link_references(s, horizon_year=2014)


def corpus(seed, n=120):
    rng = np.random.default_rng(seed)
    cats = ["PHYS-A", "CHEM", "ENG", "MED", "ECON", "HIST"]
    out = []
    for i in range(n):
        k = int(rng.integers(1, 3))
        out.append(rec(
            f"r{i}", year=int(rng.choice([2000, 2010])),
            cats=tuple(rng.choice(cats, size=k, replace=False)),
            author_count=int(rng.integers(1, 9)),
            jif=None if rng.random() < 0.1 else round(float(rng.gamma(2.0)), 3),
            page_count=int(rng.integers(1, 30)),
            citations_by_year={"2012": int(rng.negative_binomial(0.8, 0.1))},
        ))
    return out


def test_single_discipline_row():
    s, idx = build([rec(f"r{i}", citations_by_year={"2011": c}) for i, c in enumerate(range(1, 11))])
    m = impact_distribution(s, idx, SCHEME, W)
    row = m.get("NaturalSciences", 2010, "self", "times_cited")
    assert row.n_papers == 10
    np.testing.assert_allclose(row.breakdown.shares, percentile_shares(np.arange(1, 11)).shares)
    assert m.get("Total", 2010, "self", "times_cited").breakdown == row.breakdown


def test_zero_total_row_omitted():
    s, idx = build([rec("a", citations_by_year={}), rec("b", year=2000, citations_by_year={"2001": 2})])
    m = impact_distribution(s, idx, SCHEME, W)
    with pytest.raises(KeyError):
        m.get("NaturalSciences", 2010, "self", "times_cited")
    assert any("zero total" in n for n in m.notices)
    assert m.get("NaturalSciences", 2000, "self", "times_cited").n_papers == 1


def test_total_counts_each_record_once():
    s, idx = build(corpus(1))
    m = impact_distribution(s, idx, SCHEME, W)
    for y in (2000, 2010):
        row = m.get("Total", y, "self", "times_cited")
        assert row.n_papers == int((s.pub_year == y).sum())


def test_linked_refs_rows():
    recs = [rec("X", year=2000, doi="10.1/x"), rec("Y", year=2000, doi="10.1/y"),
            rec("C", refs=[{"raw": "a", "doi": "10.1/x"}, {"raw": "b", "doi": "10.1/y"}]),
            rec("D", refs=[{"raw": "a", "doi": "10.1/x"}])]
    s, idx = build(recs)
    row = impact_distribution(s, idx, SCHEME, W).get("Total", 2010, "self", "linked_refs")
    assert row.breakdown.total_outcome == 3 and row.window == "none"


def test_missing_fic_excluded():
    s, idx = build(corpus(2))
    cells = compute_cell_means(s, idx, W)
    raw = fic_covariate(s, idx, cells, SCHEME, FicKind.Jif, TimesCited(W))
    norm = fic_covariate(s, idx, cells, SCHEME, FicKind.Jif, NormalizedCitations(W))
    for r in raw:
        twin = norm.get(r.discipline, r.pub_year, "jif", "mncs")
        assert (r.n_papers, r.n_missing) == (twin.n_papers, twin.n_missing)
    total = raw.get("Total", 2000, "jif", "times_cited")
    mask = (s.pub_year == 2000)
    assert total.n_missing == int(np.isnan(s.jif[mask]).sum())
    assert total.n_papers + total.n_missing == int(mask.sum())


def test_fic_matches_inequality():
    s, idx = build(corpus(3))
    m = fic_covariate(s, idx, None, SCHEME, FicKind.Authors, TimesCited(W))
    mask = s.pub_year == 2010
    expected = percentile_shares_by(idx.citation_counts(W)[mask], s.author_count[mask])
    assert m.get("Total", 2010, "authors", "times_cited").breakdown == expected


def test_cells_window_checked():
    s, idx = build(corpus(4))
    cells = compute_cell_means(s, idx, Fixed(1, 3))
    with pytest.raises(ValueError):
        fic_covariate(s, idx, cells, SCHEME, FicKind.Jif, NormalizedCitations(W))
    with pytest.raises(ValueError):
        fic_covariate(s, idx, None, SCHEME, FicKind.Jif, NormalizedCitations(W))


def test_density_profile_pooled():
    s, idx = build(corpus(5))
    m = density_profile(s, idx, SCHEME, Fixed(1, 3))
    assert all(r.pub_year is None for r in m)
    assert m.get("Total", None, "self", "times_cited").n_papers == len(s)
    with pytest.raises(ValueError):
        density_profile(s, idx, SCHEME, W)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_self_ranking_dominates(seed):
    s, idx = build(corpus(seed, n=60))
    m = analyze(s, idx, W, outcomes=("times_cited",))
    for r in m:
        if r.ranking in ("self", "linked_refs") or r.outcome != "times_cited":
            continue
        own = m.get(r.discipline, r.pub_year, "self", "times_cited").breakdown
        if r.n_missing == 0:
            assert own.shares[-1] >= r.breakdown.shares[-1] - 1e-9


def test_report_layout(tmp_path):
    s, idx = build([rec(f"r{i}", citations_by_year={"2011": i + 1}) for i in range(4)])
    m = impact_distribution(s, idx, SCHEME, W)
    m.rows = [m.get("Total", 2010, "self", "times_cited")]
    paths = emit_report(m, tmp_path)
    text = (tmp_path / "report.csv").read_text().splitlines()
    assert paths[0] == str(tmp_path / "report.csv")
    assert text[0] == ",".join(REPORT_HEADER)
    assert len(text) == 4
    rows = read_report(tmp_path / "report.csv")
    assert [r["group"] for r in rows] == ["bottom50", "mid40", "top10"]
    assert rows[0]["gini"] == "0.25" and rows[0]["n_papers"] == "4"


def test_report_deterministic_and_sidecar(tmp_path):
    s, idx = build(corpus(6))
    a = analyze(s, idx, W)
    emit_report(a, tmp_path / "a.csv")
    m = AnalysisMatrix.from_json(a.to_json())
    m.rows.reverse()
    m.notices.append("something was omitted")
    out = emit_report(m, tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert out[1].endswith("b.notices.log")


def test_matrix_roundtrip(tmp_path):
    s, idx = build(corpus(7))
    m = analyze(s, idx, W, CutSpec((25.0, 50.0, 99.0)))
    m.save(tmp_path / "m.json")
    back = AnalysisMatrix.load(tmp_path / "m.json")
    assert [r.key for r in back.sorted_rows()] == [r.key for r in m.sorted_rows()]
    assert back.to_json() == m.to_json()


def test_empty_report_rejected(tmp_path):
    with pytest.raises(ValueError):
        emit_report(AnalysisMatrix(), tmp_path / "r.csv")


def test_fic_parse():
    assert FicKind.parse("jif") is FicKind.Jif
    with pytest.raises(ValueError):
        FicKind.parse("citations")
