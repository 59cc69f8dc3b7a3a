"""Assemble cohort comparisons into delimiter-separated report files."""

from __future__ import annotations

import json
import math
import os
import tempfile
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from cdscan.lexicon import (
    CATEGORIES,
    FIRST_PERSON_PRONOUNS,
    Schema,
    filter_schemata_by_pronouns,
    lexicon_stats,
)
from cdscan.stats import (
    BootstrapConfig,
    BootstrapDraws,
    CohortMatches,
    EmptyCohortError,
    EstimateSummary,
    KSResult,
    SchemaEstimate,
    bootstrap,
    histogram_pair,
    ks_two_sample,
    per_schema_prevalence_ratios,
    significance,
    within_subject_prevalences,
)

ALL = "All CDS"


def category_subsets(schemata: Iterable[Schema]) -> list[tuple[str, frozenset[int]]]:
    """("All CDS", every id) followed by one subset per category, in fixed order."""
    schemata = list(schemata)
    rows = [(ALL, frozenset(s.id for s in schemata))]
    for cat in CATEGORIES:
        rows.append((cat, frozenset(s.id for s in schemata if s.category == cat)))
    return rows


def fmt(x: float, digits: int = 4) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return "NA"
    return f"{x:.{digits}f}"


def fmt_p(p: float) -> str:
    return f"{p:.6g}"


def config_line(config: Mapping) -> str:
    return "# config: " + json.dumps(dict(config), sort_keys=True, default=str)


def render(config: Mapping, header: Sequence[str], rows: Iterable[Sequence]) -> str:
    lines = [config_line(config), "\t".join(header)]
    lines += ["\t".join(str(c) for c in row) for row in rows]
    return "\n".join(lines) + "\n"


def write_atomic(path: str | Path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _mark(s: EstimateSummary, null: float) -> str:
    sig = significance(s, null)
    return {">>": "*", "<<": "<<", "": ""}[sig]


def summary_cells(s: EstimateSummary | None, null: float, digits: int = 4) -> list[str]:
    if s is None:
        return ["/"] * 5
    return [
        fmt(s.point, digits),
        fmt(s.median, digits),
        fmt(s.ci_low, digits),
        fmt(s.ci_high, digits),
        _mark(s, null),
    ]


@dataclass
class ConditionResult:
    """Bootstrap draws for one analysis condition over the category subsets."""

    names: list[str]
    present: list[bool]
    draws: BootstrapDraws | None

    def _index(self, name: str) -> int | None:
        k = self.names.index(name)
        if not self.present[k]:
            return None
        return sum(self.present[:k])

    def pr(self, name: str) -> EstimateSummary | None:
        j = self._index(name)
        return None if j is None else self.draws.pr_summary(j)

    def pd(self, name: str) -> EstimateSummary | None:
        j = self._index(name)
        return None if j is None else self.draws.pd_summary(j)


def run_condition(
    dep: CohortMatches,
    rnd: CohortMatches,
    schemata: Sequence[Schema],
    config: BootstrapConfig,
) -> ConditionResult:
    subsets = category_subsets(schemata)
    names = [n for n, _ in subsets]
    present = [bool(s) for _, s in subsets]
    live = [s for _, s in subsets if s]
    draws = bootstrap(dep, rnd, live, config) if live else None
    return ConditionResult(names, present, draws)


@dataclass
class CategoryAnalysis:
    all_cds: ConditionResult
    no_fpp: ConditionResult
    schema_resampled: ConditionResult


def analyze_categories(
    dep: CohortMatches,
    rnd: CohortMatches,
    schemata: Sequence[Schema],
    B: int,
    seed: int,
    workers: int = 1,
    pronouns: Iterable[str] = FIRST_PERSON_PRONOUNS,
) -> CategoryAnalysis:
    users = BootstrapConfig(B=B, axis="users", seed=seed, workers=workers)
    schem = BootstrapConfig(B=B, axis="schemata", seed=seed, workers=workers)
    return CategoryAnalysis(
        all_cds=run_condition(dep, rnd, schemata, users),
        no_fpp=run_condition(dep, rnd, filter_schemata_by_pronouns(schemata, pronouns), users),
        schema_resampled=run_condition(dep, rnd, schemata, schem),
    )


def _condition_header(prefix: str) -> list[str]:
    return [f"{prefix}_{c}" for c in ("point", "median", "ci_low", "ci_high", "sig")]


def ratio_table(analysis: CategoryAnalysis, config: Mapping, kind: str = "PR") -> str:
    """Per-category table with the all-schemata, no-first-person and schema-resampled conditions."""
    getter = (lambda c, n: c.pr(n)) if kind == "PR" else (lambda c, n: c.pd(n))
    null = 1.0 if kind == "PR" else 0.0
    header = ["category"]
    for tag in ("A", "1", "C"):
        header += _condition_header(f"{kind}_{tag}")
    header.append("group")
    rows = []
    for name in analysis.all_cds.names:
        a = getter(analysis.all_cds, name)
        row = [name]
        row += summary_cells(a, null)
        row += summary_cells(getter(analysis.no_fpp, name), null)
        row += summary_cells(getter(analysis.schema_resampled, name), null)
        group = ""
        if a is not None and a.effective_replicates:
            group = "P_D>P_R" if a.median > null else "P_D<=P_R"
        row.append(group)
        rows.append(row)
    return render(config, header, rows)


def prevalence_table(
    dep: CohortMatches, rnd: CohortMatches, schemata: Sequence[Schema], config: Mapping
) -> str:
    """Raw cohort prevalence (percent) per subset, plus ratio and difference."""
    subsets = category_subsets(schemata)
    cd = dep.matched_counts([s for _, s in subsets]).sum(axis=0)
    cr = rnd.matched_counts([s for _, s in subsets]).sum(axis=0)
    td, tr = dep.total_posts, rnd.total_posts
    rows = []
    for k, (name, _) in enumerate(subsets):
        pd_, pr_ = cd[k] / td, cr[k] / tr
        ratio = pd_ / pr_ if pr_ > 0 else math.nan
        rows.append((name, pd_, pr_, ratio, (pd_ - pr_) * 100, int(cd[k]), int(cr[k])))
    head, rest = rows[:1], sorted(rows[1:], key=lambda r: (-r[1], r[0]))
    out = []
    for name, pd_, pr_, ratio, diff, nd, nr in head + rest:
        out.append([name, fmt(100 * pd_, 3), fmt(100 * pr_, 3), fmt(ratio, 4), fmt(diff, 3), nd, nr, td, tr])
    return render(
        config,
        ["category", "P_D_pct", "P_R_pct", "PR", "PD", "matched_D", "matched_R", "posts_D", "posts_R"],
        out,
    )


def per_schema_table(
    estimates: Sequence[SchemaEstimate], schemata: Sequence[Schema], config: Mapping
) -> str:
    by_id = {s.id: s for s in schemata}
    rows = []
    rank = 0
    for e in estimates:
        s = by_id[e.schema_id]
        if e.status == "ok":
            rank += 1
            cells = summary_cells(e.summary, 1.0)
            rows.append([rank, s.id, s.category, s.text, e.n_dep, e.n_rnd, e.status, *cells])
        else:
            rows.append(["", s.id, s.category, s.text, e.n_dep, e.n_rnd, e.status, *(["NA"] * 4), ""])
    return render(
        config,
        ["rank", "schema_id", "category", "text", "matched_D", "matched_R", "status",
         "point", "median", "ci_low", "ci_high", "sig"],
        rows,
    )


def schema_table2(
    schemata: Sequence[Schema],
    estimates: Sequence[SchemaEstimate] | None,
    config: Mapping,
) -> str:
    """Lexicon statistics, with observed and significant counts when estimates are given."""
    stats = lexicon_stats(schemata)
    by_id = {s.id: s for s in schemata}
    observed: dict[str, int] = {c: 0 for c in CATEGORIES}
    signif: dict[str, int] = {c: 0 for c in CATEGORIES}
    if estimates is not None:
        for e in estimates:
            cat = by_id[e.schema_id].category
            if e.status != "not-observed":
                observed[cat] += 1
            if e.summary is not None and e.summary.ci_low > 1.0:
                signif[cat] += 1
    rows = []
    for row in (*stats.categories, stats.total):
        if row.category == "Total":
            n_obs, n_sig = sum(observed.values()), sum(signif.values())
        else:
            n_obs, n_sig = observed[row.category], signif[row.category]
        pr = "/" if row.pronoun_ratio == 0 else f"{row.pronoun_ratio:.1f}"
        cells = [row.category, row.n_schemata]
        if estimates is not None:
            cells += [n_obs, n_sig, f"{100 * n_sig / row.n_schemata:.1f}"]
        cells += [f"{row.mean_length:.3f}", pr]
        rows.append(cells)
    header = ["category", "N_CD"]
    if estimates is not None:
        header += ["N_exists", "N_sig", "N_sig_r"]
    header += ["mean_n", "P_r"]
    return render(config, header, rows)


def within_subject_report(
    dep: CohortMatches, rnd: CohortMatches, min_posts: int, bin_width: float, config: Mapping
) -> tuple[str, str, KSResult]:
    a = [u.prevalence for u in within_subject_prevalences(dep, min_posts)]
    b = [u.prevalence for u in within_subject_prevalences(rnd, min_posts)]
    if not a or not b:
        raise EmptyCohortError(f"no users with at least {min_posts} posts in one of the cohorts")
    ks = ks_two_sample(a, b)
    hist = histogram_pair(a, b, 0.0, 1.0, bin_width)
    rows = [
        [fmt(lo, 4), fmt(hi, 4), fmt(da, 6), fmt(db, 6)]
        for lo, hi, da, db in zip(hist.edges[:-1], hist.edges[1:], hist.density_a, hist.density_b)
    ]
    density = render(config, ["bin_low", "bin_high", "density_depressed", "density_random"], rows)
    zero_a = float(np.mean(np.asarray(a) == 0))
    zero_b = float(np.mean(np.asarray(b) == 0))
    ks_text = render(
        config,
        ["n_depressed", "n_random", "D", "p_value", "zero_frac_depressed", "zero_frac_random"],
        [[ks.n_a, ks.n_b, fmt(ks.statistic, 6), fmt_p(ks.p_value), fmt(zero_a, 6), fmt(zero_b, 6)]],
    )
    return density, ks_text, ks


def replicate_density(values: np.ndarray, bins: int, config: Mapping) -> str:
    v = np.asarray(values, dtype=float)
    v = v[np.isfinite(v)]
    if len(v) == 0:
        return render(config, ["bin_low", "bin_high", "density"], [])
    lo, hi = float(v.min()), float(v.max())
    if hi == lo:
        hi = lo + 1e-9
    dens, edges = np.histogram(v, bins=bins, range=(lo, hi), density=True)
    rows = [[fmt(a, 6), fmt(b, 6), fmt(d, 6)] for a, b, d in zip(edges[:-1], edges[1:], dens)]
    return render(config, ["bin_low", "bin_high", "density"], rows)


def run_per_schema(
    dep: CohortMatches, rnd: CohortMatches, schemata: Sequence[Schema], B: int, seed: int, workers: int
) -> list[SchemaEstimate]:
    cfg = BootstrapConfig(B=B, axis="users", seed=seed, workers=workers)
    return per_schema_prevalence_ratios(dep, rnd, [s.id for s in schemata], cfg)
