"""
Seedable synthetic corpora with known ground truth.

Citation counts follow a gamma-Poisson (negative binomial) model whose mean
depends multiplicatively on the record's subject category and on its FIC
values (references, authors, pages, JIF).  A share of each record's
references points at other generated records, chosen by linear preferential
attachment; those planted links are recorded in a :class:`GeneratorLedger`
so every downstream stage can be checked exactly.

Counts are drawn by inverse CDF from per-record uniforms and gamma variates
that do not depend on the coupling coefficients, so raising a coefficient
changes every record's count monotonically.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field, fields, replace
from typing import Iterator, Mapping

import numpy as np
from scipy import stats

from .corpus import DISCIPLINES, DEFAULT_HORIZON, FieldScheme

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

FIC_NAMES = ("all_refs", "authors", "pages", "jif")

_ABBR = {
    "NaturalSciences": "NAT",
    "EngineeringTechnology": "ENG",
    "MedicalHealth": "MED",
    "Agricultural": "AGR",
    "SocialSciences": "SOC",
    "Humanities": "HUM",
}


class InfeasibleConfigError(ValueError):
    pass


class CalibrationError(ValueError):
    pass


@dataclass(frozen=True)
class DisciplineModel:
    weight: float = 1.0
    mean_citations: float = 10.0
    dispersion: float | None = 1.0  # None: Poisson
    n_categories: int = 3
    journals_per_category: int = 4
    authors_mean: float = 3.0
    pages_median: float = 8.0
    refs_mean: float = 6.0
    jif_mean: float = 2.0


DEFAULT_DISCIPLINES = {
    "NaturalSciences": DisciplineModel(3.0, 12.0, 0.9, 4, 5, 4.0, 8.0, 7.0, 2.5),
    "EngineeringTechnology": DisciplineModel(1.5, 8.0, 0.8, 3, 4, 3.0, 9.0, 6.0, 1.6),
    "MedicalHealth": DisciplineModel(2.5, 14.0, 0.8, 4, 5, 5.0, 7.0, 7.0, 3.0),
    "Agricultural": DisciplineModel(0.5, 8.0, 1.6, 2, 3, 4.0, 8.0, 6.0, 1.5),
    "SocialSciences": DisciplineModel(1.0, 6.0, 0.6, 3, 4, 2.0, 15.0, 6.0, 1.3),
    "Humanities": DisciplineModel(0.5, 2.0, 0.3, 2, 3, 1.2, 18.0, 4.0, 0.5),
}


@dataclass(frozen=True)
class SynthConfig:
    """Generator parameters.

    ``coupling`` maps a FIC name to its elasticity: a record's citation
    mean is multiplied by ``(x / x_ref) ** beta`` where ``x_ref`` is the
    FIC's 90th-percentile value in the record's (year, discipline) group.
    """

    seed: int = 0
    n_records: int = 10_000
    years: tuple[int, ...] = (1990, 2000, 2010)
    year_shares: tuple[float, ...] | None = None
    horizon_year: int = DEFAULT_HORIZON
    disciplines: Mapping[str, DisciplineModel] = field(default_factory=lambda: dict(DEFAULT_DISCIPLINES))
    coupling: Mapping[str, float] = field(
        default_factory=lambda: {"all_refs": 0.3, "authors": 0.3, "pages": 0.1, "jif": 0.6}
    )
    field_spread: float = 0.5  # sd of the log category effect
    field_citation_elasticity: float = 1.0
    field_author_elasticity: float = 1.0
    jif_spread: float = 0.4  # sd of log journal JIF around its category mean
    refs_dispersion: float = 3.0
    internal_link_fraction: float = 0.4
    attachment: float = 0.5  # weight of a target = 1 + attachment * inbound so far
    doi_share: float = 0.7  # planted links carrying a DOI; others use composite keys
    multi_category_share: float = 0.1
    jif_missing: Mapping[int, float] = field(default_factory=dict)
    pages_missing: float = 0.005
    author_pool: int = 3000

    def __post_init__(self):
        if self.n_records < 0:
            raise ValueError("n_records must be >= 0")
        if not self.years:
            raise ValueError("at least one publication year is required")
        if self.year_shares is not None:
            if len(self.year_shares) != len(self.years) or any(s < 0 for s in self.year_shares):
                raise ValueError("year_shares must be non-negative, one per year")
            if not math.isclose(sum(self.year_shares), 1.0, abs_tol=1e-9):
                raise ValueError("year_shares must sum to 1")
        if max(self.years) > self.horizon_year:
            raise ValueError("publication years beyond the horizon")
        for name, m in self.disciplines.items():
            if name not in DISCIPLINES:
                raise ValueError(f"unknown discipline {name!r}")
            if not m.mean_citations > 0:
                raise ValueError(f"{name}: mean_citations must be > 0")
            if m.dispersion is not None and not m.dispersion > 0:
                raise ValueError(f"{name}: dispersion must be > 0")
            if m.n_categories < 1 or m.journals_per_category < 1:
                raise ValueError(f"{name}: needs at least one category and journal")
        for k, v in self.coupling.items():
            if k not in FIC_NAMES:
                raise ValueError(f"unknown coupling FIC {k!r}")
            if not math.isfinite(v):
                raise ValueError(f"coupling {k} is not finite")
        if not 0.0 <= self.internal_link_fraction <= 1.0:
            raise ValueError("internal_link_fraction must lie in [0, 1]")
        for name in ("doi_share", "multi_category_share", "pages_missing"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")

    @classmethod
    def from_mapping(cls, d: Mapping) -> SynthConfig:
        d = dict(d)
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown synth config keys: {sorted(unknown)}")
        if "years" in d:
            d["years"] = tuple(d["years"])
        if "year_shares" in d:
            d["year_shares"] = tuple(d["year_shares"])
        if "jif_missing" in d:
            d["jif_missing"] = {int(k): float(v) for k, v in d["jif_missing"].items()}
        if "disciplines" in d:
            discs = {}
            for name, spec in d["disciplines"].items():
                spec = dict(spec)
                if spec.get("dispersion") in ("poisson", "inf"):
                    spec["dispersion"] = None
                base = DEFAULT_DISCIPLINES.get(name, DisciplineModel())
                discs[name] = replace(base, **spec)
            d["disciplines"] = discs
        return cls(**d)

    @classmethod
    def load(cls, path: str | os.PathLike) -> SynthConfig:
        with open(path, "rb") as fh:
            return cls.from_mapping(tomllib.load(fh))


@dataclass
class GeneratorLedger:
    """Ground truth of one generated corpus."""

    record_ids: list[str]
    pub_year: np.ndarray
    category: list[tuple[str, ...]]
    link_citing: np.ndarray  # record positions
    link_cited: np.ndarray
    per_year: dict[int, int]
    per_cell_mean: dict[tuple[str, int], float]  # expected citations (open window)
    truth: dict[str, np.ndarray]  # per-record true attribute values

    @property
    def n_links(self) -> int:
        return len(self.link_citing)

    @property
    def planted_refs(self) -> np.ndarray:
        """Internal references per citing record."""
        return np.bincount(self.link_citing, minlength=len(self.record_ids))

    @property
    def planted_inbound(self) -> np.ndarray:
        return np.bincount(self.link_cited, minlength=len(self.record_ids))

    def write(self, prefix: str | os.PathLike) -> list[str]:
        """CSV sidecars ``<prefix>.links.csv``, ``.cells.csv``, ``.years.csv``, ``.truth.csv``."""
        prefix = os.fspath(prefix)
        out = []
        ids = self.record_ids
        path = prefix + ".links.csv"
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["citing_id", "cited_id", "citing_year"])
            years = self.pub_year
            for a, b in zip(self.link_citing.tolist(), self.link_cited.tolist()):
                w.writerow([ids[a], ids[b], int(years[a])])
        out.append(path)
        path = prefix + ".cells.csv"
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["category", "pub_year", "expected_mean_citations"])
            for (cat, year), m in sorted(self.per_cell_mean.items()):
                w.writerow([cat, year, repr(m)])
        out.append(path)
        path = prefix + ".years.csv"
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["pub_year", "n_records"])
            for y, n in sorted(self.per_year.items()):
                w.writerow([y, n])
        out.append(path)
        path = prefix + ".truth.csv"
        cols = sorted(self.truth)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["record_id", *cols])
            arrays = [self.truth[c].tolist() for c in cols]
            for i, rid in enumerate(ids):
                w.writerow([rid, *(a[i] for a in arrays)])
        out.append(path)
        return out


def _largest_remainder(total: int, weights: np.ndarray) -> np.ndarray:
    w = np.asarray(weights, dtype=np.float64)
    exact = total * w / w.sum()
    base = np.floor(exact).astype(np.int64)
    short = total - int(base.sum())
    order = np.argsort(-(exact - base), kind="stable")
    base[order[:short]] += 1
    return base


def cell_counts(config: SynthConfig) -> dict[tuple[int, str], int]:
    """Records per (year, discipline), by largest-remainder apportionment."""
    discs = list(config.disciplines)
    ys = np.asarray(config.year_shares if config.year_shares else [1.0] * len(config.years))
    dw = np.array([config.disciplines[d].weight for d in discs])
    counts = _largest_remainder(config.n_records, np.outer(ys, dw).ravel())
    keys = [(y, d) for y in config.years for d in discs]
    return dict(zip(keys, counts.tolist()))


def scheme_for(config: SynthConfig) -> FieldScheme:
    return FieldScheme(
        {f"{_ABBR[d]}-{k:02d}": d for d, m in config.disciplines.items() for k in range(m.n_categories)}
    )


def _aging_weights(n_years: int) -> np.ndarray:
    a = np.arange(n_years) + 0.5
    w = a * np.exp(-a / 3.0)
    return w / w.sum()


def _rng(seed: int, *stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed & (2**64 - 1), *stream]))


def _q90(x: np.ndarray) -> float:
    xs = np.sort(x)
    return float(xs[min(int(math.floor(0.9 * len(xs))), len(xs) - 1)])


def _nb_draw(mu, dispersion, g_raw, u):
    """Inverse-CDF gamma-Poisson draw; ``g_raw`` are standard-gamma variates with shape r."""
    lam = mu if dispersion is None else mu * g_raw / dispersion
    return stats.poisson.ppf(u, lam).astype(np.int64)


@dataclass
class _Structure:
    categories: list[str]
    cat_disc: list[str]
    cat_effect: np.ndarray
    journals: list[list[str]]  # per category
    journal_jif: dict[str, float]


def _structure(config: SynthConfig) -> _Structure:
    rng = _rng(config.seed, 1)
    cats, cat_disc, effects, journals, jif = [], [], [], [], {}
    for d, m in config.disciplines.items():
        for k in range(m.n_categories):
            code = f"{_ABBR[d]}-{k:02d}"
            e = float(np.exp(rng.normal(0.0, config.field_spread))) if config.field_spread > 0 else 1.0
            cats.append(code)
            cat_disc.append(d)
            effects.append(e)
            js = []
            for j in range(m.journals_per_category):
                jid = f"{code}-J{j:02d}"
                jif[jid] = round(m.jif_mean * e * float(np.exp(rng.normal(0.0, config.jif_spread))), 3)
                js.append(jid)
            journals.append(js)
    return _Structure(cats, cat_disc, np.array(effects), journals, jif)


def generate_corpus(config: SynthConfig) -> tuple[Iterator[str], GeneratorLedger]:
    """Draw a corpus; return its JSON lines (lazily) and the ledger.

    Records are generated shard by shard, one shard per (year, discipline),
    each from its own seeded sub-stream.  Internal links are drawn afterwards
    from a separate stream, citing records in corpus order.
    """
    if config.internal_link_fraction > 0 and config.n_records == 1:
        raise InfeasibleConfigError("internal links need at least two records")
    st = _structure(config)
    counts = cell_counts(config)
    cat_index = {c: i for i, c in enumerate(st.categories)}
    cats_by_disc = {d: [i for i, cd in enumerate(st.cat_disc) if cd == d] for d in config.disciplines}

    cols: dict[str, list[np.ndarray]] = {k: [] for k in (
        "year", "cat", "cat2", "journal", "authors", "pages", "pages_missing", "refs",
        "jif", "jif_missing", "mu", "cites", "author_key")}
    for shard, ((year, disc), n) in enumerate(counts.items()):
        if n == 0:
            continue
        m = config.disciplines[disc]
        rng = _rng(config.seed, 2, shard)
        own = np.array(cats_by_disc[disc])
        cat = own[rng.integers(0, len(own), size=n)]
        eff = st.cat_effect[cat]
        jpos = rng.integers(0, m.journals_per_category, size=n)
        journal = np.array([st.journals[c][j] for c, j in zip(cat.tolist(), jpos.tolist())], dtype=object)
        jif = np.array([st.journal_jif[j] for j in journal], dtype=np.float64)
        a_med = np.maximum(m.authors_mean * eff ** config.field_author_elasticity - 1.0, 0.05)
        authors = 1 + np.rint(a_med * np.exp(rng.normal(0.0, 0.6, size=n))).astype(np.int64)
        pages = 1 + np.rint((m.pages_median - 1) * np.exp(rng.normal(0.0, 0.5, size=n))).astype(np.int64)
        rr = config.refs_dispersion
        refs = rng.negative_binomial(rr, rr / (rr + m.refs_mean), size=n).astype(np.int64)
        fic = {"all_refs": refs.astype(np.float64), "authors": authors.astype(np.float64),
               "pages": pages.astype(np.float64), "jif": jif}
        mu = m.mean_citations * eff ** config.field_citation_elasticity
        for name, beta in config.coupling.items():
            if beta:
                x = np.maximum(fic[name], 1e-9)
                mu = mu * (x / max(_q90(x), 1e-9)) ** beta
        g_raw = rng.standard_gamma(m.dispersion, size=n) if m.dispersion is not None else None
        u = rng.random(size=n)
        cites = _nb_draw(mu, m.dispersion, g_raw, u)
        multi = rng.random(size=n) < config.multi_category_share
        second = rng.integers(0, len(st.categories), size=n)
        second = np.where(multi & (second != cat), second, -1)
        pmiss = rng.random(size=n) < config.pages_missing
        jmiss = rng.random(size=n) < config.jif_missing.get(year, 0.0)
        akey = rng.integers(0, config.author_pool, size=n)
        for k, v in (("year", np.full(n, year)), ("cat", cat), ("cat2", second), ("journal", journal),
                     ("authors", authors), ("pages", pages), ("pages_missing", pmiss), ("refs", refs),
                     ("jif", jif), ("jif_missing", jmiss), ("mu", np.broadcast_to(mu, (n,)).astype(float)),
                     ("cites", cites), ("author_key", akey)):
            cols[k].append(np.asarray(v))
    if not cols["year"]:
        empty = np.zeros(0, dtype=np.int64)
        ledger = GeneratorLedger([], empty, [], empty, empty, {y: 0 for y in config.years}, {},
                                 {k: empty for k in ("authors", "pages", "all_refs", "internal_refs",
                                                     "jif", "expected_citations", "citations")})
        return iter(()), ledger
    arr = {k: np.concatenate(v) for k, v in cols.items()}
    n = len(arr["year"])
    year = arr["year"].astype(np.int64)

    # internal links by preferential attachment, citing records in corpus order
    lrng = _rng(config.seed, 3)
    refs = arr["refs"].astype(np.int64)
    internal = lrng.binomial(refs, config.internal_link_fraction)
    order = np.argsort(year, kind="stable")
    year_sorted = year[order]
    pool_end = np.searchsorted(year_sorted, year, side="right")  # eligible prefix in `order`
    if np.any((internal > 0) & (pool_end <= 1)):
        raise InfeasibleConfigError("a record with internal references has no other record to cite")
    inbound = np.zeros(n, dtype=np.float64)
    citing_l, cited_l = [], []
    batch = 4096
    for lo in range(0, n, batch):
        idx = np.arange(lo, min(n, lo + batch))
        k = internal[idx]
        if k.sum() == 0:
            continue
        src = np.repeat(idx, k)
        weights = 1.0 + config.attachment * inbound[order]
        cum = np.cumsum(weights)
        ends = pool_end[src]
        tgt_pos = _draw_targets(lrng, cum, ends, order, src)
        cited = order[tgt_pos]
        citing_l.append(src)
        cited_l.append(cited)
        np.add.at(inbound, cited, 1.0)
    link_citing = np.concatenate(citing_l) if citing_l else np.zeros(0, dtype=np.int64)
    link_cited = np.concatenate(cited_l) if cited_l else np.zeros(0, dtype=np.int64)
    doi_flag = lrng.random(size=len(link_citing)) < config.doi_share

    record_ids = [f"S{i:08d}" for i in range(n)]
    cats = [
        (st.categories[c],) if c2 < 0 else (st.categories[c], st.categories[c2])
        for c, c2 in zip(arr["cat"].tolist(), arr["cat2"].tolist())
    ]
    # unique (journal, year, volume, first_page) so composite keys resolve uniquely
    first_page = np.zeros(n, dtype=np.int64)
    seen_pages: dict[tuple[str, int], int] = {}
    for i, (j, y, p) in enumerate(zip(arr["journal"].tolist(), year.tolist(), arr["pages"].tolist())):
        start = seen_pages.get((j, y), 1)
        first_page[i] = start
        seen_pages[(j, y)] = start + int(p)

    per_cell: dict[tuple[str, int], list[float]] = {}
    for i, cs in enumerate(cats):
        for c in cs:
            per_cell.setdefault((c, int(year[i])), []).append(float(arr["mu"][i]))
    ledger = GeneratorLedger(
        record_ids=record_ids,
        pub_year=year,
        category=cats,
        link_citing=link_citing,
        link_cited=link_cited,
        per_year={y: int((year == y).sum()) for y in config.years},
        per_cell_mean={k: math.fsum(v) / len(v) for k, v in per_cell.items()},
        truth={
            "authors": arr["authors"].astype(np.int64),
            "pages": arr["pages"].astype(np.int64),
            "all_refs": refs,
            "internal_refs": internal.astype(np.int64),
            "jif": arr["jif"].astype(np.float64),
            "expected_citations": arr["mu"].astype(np.float64),
            "citations": arr["cites"].astype(np.int64),
        },
    )
    lines = _emit(config, st, arr, ledger, first_page, doi_flag)
    return lines, ledger


def _draw_targets(rng, cum, ends, order, src):
    """Positions in ``order`` drawn with probability proportional to weight, within each prefix."""
    u = rng.random(size=len(src)) * cum[ends - 1]
    pos = np.searchsorted(cum, u, side="right")
    pos = np.minimum(pos, ends - 1)
    # no planted self-citations: redraw those few
    bad = np.flatnonzero(order[pos] == src)
    while len(bad):
        u = rng.random(size=len(bad)) * cum[ends[bad] - 1]
        pos[bad] = np.minimum(np.searchsorted(cum, u, side="right"), ends[bad] - 1)
        bad = bad[order[pos[bad]] == src[bad]]
    return pos


def _author_key(k: int) -> str:
    return f"AUTHOR{k:04d} {chr(65 + k % 26)}"


def _emit(config, st, arr, ledger: GeneratorLedger, first_page, doi_flag) -> Iterator[str]:
    n = len(ledger.record_ids)
    ids = ledger.record_ids
    year = ledger.pub_year
    journal = arr["journal"].tolist()
    authors = arr["authors"].tolist()
    pages = arr["pages"].tolist()
    pmiss = arr["pages_missing"].tolist()
    jif = arr["jif"].tolist()
    jmiss = arr["jif_missing"].tolist()
    akey = arr["author_key"].tolist()
    refs = ledger.truth["all_refs"].tolist()
    years = year.tolist()
    fpage = first_page.tolist()
    # links grouped by citing record
    order = np.argsort(ledger.link_citing, kind="stable")
    lc = ledger.link_citing[order].tolist()
    ld = ledger.link_cited[order].tolist()
    lf = doi_flag[order].tolist()
    bounds = np.searchsorted(ledger.link_citing[order], np.arange(n + 1)).tolist()
    ext_year = min(config.years) - 1
    spans = {y: config.horizon_year - y + 1 for y in set(years)}
    crng = _rng(config.seed, 4)
    year_counts = {}
    for y in sorted(spans):
        mask = year == y
        year_counts[y] = crng.multinomial(arr["cites"][mask].astype(np.int64), _aging_weights(spans[y]))
    cursor = {y: 0 for y in spans}

    def ref_for(target: int, with_doi: bool) -> dict:
        ak = _author_key(akey[target])
        ty = years[target]
        src = journal[target]
        vol = str(ty - 1899)
        page = str(fpage[target])
        raw = f"{ak}, {ty}, {src}, V{vol}, P{page}"
        d = {"first_author_key": ak, "ref_year": ty, "source_token": src, "volume": vol, "first_page": page}
        if with_doi:
            doi = f"10.5555/syn.{target:08d}"
            d["doi"] = doi
            raw += f", DOI {doi}"
        d["raw"] = raw
        return d

    def gen():
        for i in range(n):
            y = years[i]
            refs_out = [ref_for(ld[k], lf[k]) for k in range(bounds[i], bounds[i + 1])]
            for e in range(refs[i] - len(refs_out)):
                ak = _author_key((akey[i] + 7 * e + 1) % config.author_pool)
                if e % 2:
                    doi = f"10.5555/ext.{i:08d}.{e}"
                    refs_out.append({"doi": doi, "raw": f"{ak}, {ext_year}, EXT, DOI {doi}"})
                else:
                    refs_out.append({"first_author_key": ak, "ref_year": ext_year - e % 20,
                                     "source_token": "EXT", "raw": f"{ak}, {ext_year - e % 20}, EXT"})
            row = year_counts[y][cursor[y]]
            cursor[y] += 1
            cby = {str(y + a): int(c) for a, c in enumerate(row.tolist()) if c}
            d = {
                "record_id": ids[i],
                "pub_year": y,
                "doc_type": "article",
                "journal_id": journal[i],
            }
            if not jmiss[i]:
                d["jif"] = jif[i]
            d["subject_categories"] = list(ledger.category[i])
            d["author_count"] = authors[i]
            if not pmiss[i]:
                d["page_count"] = pages[i]
            d["cited_refs"] = refs_out
            d["citations_by_year"] = cby
            d["doi"] = f"10.5555/syn.{i:08d}"
            d["first_author_key"] = _author_key(akey[i])
            d["volume"] = str(y - 1899)
            d["first_page"] = str(fpage[i])
            yield json.dumps(d, separators=(",", ":"))

    return gen()


def write_corpus(config: SynthConfig, path: str | os.PathLike, ledger_prefix: str | None = None) -> GeneratorLedger:
    """Write the corpus JSON lines, the scheme CSV and ledger sidecars."""
    lines, ledger = generate_corpus(config)
    path = os.fspath(path)
    with open(path, "w", encoding="utf-8") as fh:
        for line in lines:
            fh.write(line)
            fh.write("\n")
    prefix = ledger_prefix or (path[:-6] if path.endswith(".jsonl") else path)
    scheme_for(config).dump(prefix + ".scheme.csv")
    ledger.write(prefix)
    return ledger


# ---------------------------------------------------------------------------
# dispersion calibration


def nb_top_share(mu: float, dispersion: float | None, top: float = 10.0) -> float:
    """Top-``top``% share (percent) of the NB(mu, dispersion) population.

    Ties at the cut are split by linear interpolation, as for samples.
    """
    if dispersion is None:
        dist = stats.poisson(mu)
    else:
        dist = stats.nbinom(dispersion, dispersion / (dispersion + mu))
    kmax = int(dist.ppf(1.0 - 1e-13)) + 1
    k = np.arange(kmax + 1)
    pmf = dist.pmf(k)
    pmf /= pmf.sum()
    mass = k * pmf
    total = mass.sum()
    cdf = np.cumsum(pmf)
    p = 1.0 - top / 100.0
    j = int(np.searchsorted(cdf, p, side="left"))
    below = mass[:j].sum() + k[j] * (p - (cdf[j - 1] if j else 0.0))
    return 100.0 * (1.0 - below / total)


def calibrate_dispersion(
    target_top10_share: float,
    mu: float,
    tolerance: float = 0.1,
    r_bounds: tuple[float, float] = (1e-3, 1e4),
) -> float:
    """Dispersion ``r`` whose NB(mu, r) top-10% share is ``target`` (percent).

    The top share falls monotonically as ``r`` grows, so the root is found
    by bisection on ``log r``.
    """
    if not 10.0 < target_top10_share < 100.0:
        raise CalibrationError(f"target {target_top10_share} outside (10, 100)")
    lo, hi = r_bounds
    s_lo, s_hi = nb_top_share(mu, lo), nb_top_share(mu, hi)
    if not s_hi <= target_top10_share <= s_lo:
        raise CalibrationError(
            f"target {target_top10_share}% unreachable for mu={mu}: "
            f"r in [{lo:g}, {hi:g}] spans top shares [{s_hi:.2f}%, {s_lo:.2f}%]"
        )
    a, b = math.log(lo), math.log(hi)
    for _ in range(200):
        mid = 0.5 * (a + b)
        s = nb_top_share(mu, math.exp(mid))
        if abs(s - target_top10_share) <= tolerance / 10 or b - a < 1e-12:
            break
        if s > target_top10_share:
            a = mid
        else:
            b = mid
    return math.exp(mid)
