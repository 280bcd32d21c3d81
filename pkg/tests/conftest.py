import json

import pytest

from citeskew.corpus import DISCIPLINES, FieldScheme

SCHEME = FieldScheme(
    {
        "PHYS-A": "NaturalSciences",
        "CHEM": "NaturalSciences",
        "ENG": "EngineeringTechnology",
        "MED": "MedicalHealth",
        "AGRI": "Agricultural",
        "ECON": "SocialSciences",
        "HIST": "Humanities",
    }
)


def rec(rid, year=2010, cats=("PHYS-A",), refs=(), doc_type="article", **kw):
    d = {
        "record_id": rid,
        "pub_year": year,
        "doc_type": doc_type,
        "journal_id": kw.pop("journal_id", "J1"),
        "subject_categories": list(cats),
        "author_count": kw.pop("author_count", 1),
        "cited_refs": list(refs),
    }
    d.update(kw)
    return d


def lines(*records):
    return [json.dumps(r) for r in records]


@pytest.fixture
def scheme():
    return SCHEME


@pytest.fixture
def all_disciplines():
    return DISCIPLINES


# one PASS/FAIL line per acceptance criterion, shown in the terminal summary
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
