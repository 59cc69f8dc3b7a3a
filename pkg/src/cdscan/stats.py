"""Prevalence estimators, bootstrap intervals and two-sample KS tests.

Cohorts are reduced to :class:`CohortMatches`: for every user, the number of
retained posts and a multiset of the *non-empty* matched-schema sets of
their posts. Every estimator below (cohort prevalence for any schema subset,
within-subject prevalence, user or schema resampling) is computed from those
signatures without touching text again.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter
from collections.abc import Iterable, Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from cdscan.matcher import MatchRecord

# Replicates are generated in fixed blocks; block k always draws from
# default_rng([seed, k]), so results do not depend on how blocks are scheduled.
BLOCK = 256


class EmptyCohortError(ValueError):
    pass


@dataclass
class CohortMatches:
    name: str
    user_ids: list[str]
    n_posts: np.ndarray
    signatures: list[Counter] = field(repr=False)

    @classmethod
    def from_records(cls, name: str, by_user: Mapping[str, Iterable[MatchRecord]]) -> "CohortMatches":
        users, n_posts, sigs = [], [], []
        for user in sorted(by_user):
            n = 0
            c: Counter = Counter()
            for rec in by_user[user]:
                n += 1
                if rec.matched_schema_ids:
                    c[rec.matched_schema_ids] += 1
            users.append(user)
            n_posts.append(n)
            sigs.append(c)
        return cls(name, users, np.array(n_posts, dtype=np.int64), sigs)

    @property
    def n_users(self) -> int:
        return len(self.user_ids)

    @property
    def total_posts(self) -> int:
        return int(self.n_posts.sum())

    def pooled(self) -> Counter:
        total: Counter = Counter()
        for c in self.signatures:
            total.update(c)
        return total

    def matched_counts(self, subsets: Sequence[Iterable[int]]) -> np.ndarray:
        """Per-user count of posts matching any schema of each subset (users x subsets)."""
        subsets = [frozenset(s) for s in subsets]
        out = np.zeros((self.n_users, len(subsets)), dtype=np.int64)
        masks = [_bitmask(s) for s in subsets]
        cache: dict[frozenset, np.ndarray] = {}
        for u, c in enumerate(self.signatures):
            for sig, count in c.items():
                hit = cache.get(sig)
                if hit is None:
                    m = _bitmask(sig)
                    hit = np.array([(m & mk) != 0 for mk in masks], dtype=np.int64)
                    cache[sig] = hit
                out[u] += count * hit
        return out


def _bitmask(ids: Iterable[int]) -> int:
    m = 0
    for i in ids:
        m |= 1 << int(i)
    return m


@dataclass(frozen=True)
class UserPrevalence:
    user_id: str
    n_posts: int
    n_matched: int

    @property
    def prevalence(self) -> float:
        return self.n_matched / self.n_posts


def within_subject_prevalences(
    cohort: CohortMatches, min_posts: int = 150, subset: Iterable[int] | None = None
) -> list[UserPrevalence]:
    if min_posts < 1:
        raise ValueError("min_posts must be >= 1")
    if subset is None:
        matched = np.array([sum(c.values()) for c in cohort.signatures], dtype=np.int64)
    else:
        matched = cohort.matched_counts([subset])[:, 0]
    return [
        UserPrevalence(u, int(n), int(m))
        for u, n, m in zip(cohort.user_ids, cohort.n_posts, matched)
        if n >= min_posts
    ]


def cohort_prevalence(cohort: CohortMatches, subset: Iterable[int]) -> float:
    total = cohort.total_posts
    if total == 0:
        raise EmptyCohortError(f"cohort {cohort.name!r} has no posts")
    subset = frozenset(subset)
    if not subset:
        return 0.0
    return float(cohort.matched_counts([subset])[:, 0].sum()) / total


def prevalence_ratio_from(p_d: float, p_r: float) -> float:
    """Ratio of prevalences; NaN when the reference prevalence is zero."""
    if p_r == 0:
        return math.nan
    return p_d / p_r


def prevalence_ratio(dep: CohortMatches, rnd: CohortMatches, subset: Iterable[int]) -> float:
    subset = frozenset(subset)
    return prevalence_ratio_from(cohort_prevalence(dep, subset), cohort_prevalence(rnd, subset))


def prevalence_difference_from(p_d: float, p_r: float) -> float:
    """Percentage-point difference (p_d - p_r) * 100."""
    return (p_d - p_r) * 100.0


def prevalence_difference(dep: CohortMatches, rnd: CohortMatches, subset: Iterable[int]) -> float:
    subset = frozenset(subset)
    return prevalence_difference_from(cohort_prevalence(dep, subset), cohort_prevalence(rnd, subset))


# ---------------------------------------------------------------------------
# bootstrap


@dataclass(frozen=True)
class BootstrapConfig:
    B: int = 10000
    axis: str = "users"
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.B < 1:
            raise ValueError("B must be >= 1")
        if self.axis not in ("users", "schemata"):
            raise ValueError(f"axis must be 'users' or 'schemata', not {self.axis!r}")


@dataclass(frozen=True)
class EstimateSummary:
    point: float
    median: float
    ci_low: float
    ci_high: float
    replicates: int
    effective_replicates: int
    seed: int

    @property
    def reliable(self) -> bool:
        return self.effective_replicates >= 0.5 * self.replicates

    def excludes(self, value: float) -> bool:
        return self.ci_low > value or self.ci_high < value

    def contains(self, value: float) -> bool:
        return self.ci_low <= value <= self.ci_high


def summarize(point: float, replicates: np.ndarray, seed: int) -> EstimateSummary:
    """Median and 2.5/97.5 percentiles of the finite replicates."""
    replicates = np.asarray(replicates, dtype=float)
    ok = replicates[np.isfinite(replicates)]
    if len(ok):
        lo, med, hi = np.percentile(ok, [2.5, 50.0, 97.5])
    else:
        lo = med = hi = math.nan
    return EstimateSummary(
        point=float(point),
        median=float(med),
        ci_low=float(lo),
        ci_high=float(hi),
        replicates=len(replicates),
        effective_replicates=len(ok),
        seed=seed,
    )


@dataclass(frozen=True)
class BootstrapDraws:
    """Replicate prevalences for each subset (B x subsets) and full-data points."""

    p_dep: np.ndarray
    p_rnd: np.ndarray
    point_dep: np.ndarray
    point_rnd: np.ndarray
    seed: int

    def ratio(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            r = self.p_dep / self.p_rnd
        r[self.p_rnd == 0] = np.nan
        return r

    def difference(self) -> np.ndarray:
        return (self.p_dep - self.p_rnd) * 100.0

    def pr_summary(self, k: int) -> EstimateSummary:
        point = prevalence_ratio_from(float(self.point_dep[k]), float(self.point_rnd[k]))
        return summarize(point, self.ratio()[:, k], self.seed)

    def pd_summary(self, k: int) -> EstimateSummary:
        point = prevalence_difference_from(float(self.point_dep[k]), float(self.point_rnd[k]))
        return summarize(point, self.difference()[:, k], self.seed)

    def prevalence_summary(self, k: int, cohort: str = "dep") -> EstimateSummary:
        draws, point = (self.p_dep, self.point_dep) if cohort == "dep" else (self.p_rnd, self.point_rnd)
        return summarize(float(point[k]), draws[:, k], self.seed)


def _blocks(B: int) -> list[tuple[int, int]]:
    return [(k, min(BLOCK, B - k * BLOCK)) for k in range((B + BLOCK - 1) // BLOCK)]


def _run_blocks(fn, B: int, workers: int) -> list:
    blocks = _blocks(B)
    if workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(fn, blocks))
    return [fn(b) for b in blocks]


def _resample_prevalence(
    rng: np.random.Generator, size: int, counts: np.ndarray, n_posts: np.ndarray
) -> np.ndarray:
    """Prevalence per subset for ``size`` user resamples (size x subsets)."""
    n_users = len(n_posts)
    idx = rng.integers(0, n_users, size=(size, n_users))
    rows = np.repeat(np.arange(size), n_users)
    w = np.bincount(rows * n_users + idx.ravel(), minlength=size * n_users)
    w = w.reshape(size, n_users).astype(np.float64)
    num = w @ counts.astype(np.float64)
    den = w @ n_posts.astype(np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        return num / den[:, None]


def bootstrap_users(
    dep: CohortMatches,
    rnd: CohortMatches,
    subsets: Sequence[Iterable[int]],
    B: int = 10000,
    seed: int = 0,
    workers: int = 1,
) -> BootstrapDraws:
    """Resample users of both cohorts independently, with replacement.

    A resampled user contributes their entire timeline. All subsets share
    the same resamples.
    """
    for c in (dep, rnd):
        if c.n_users == 0 or c.total_posts == 0:
            raise EmptyCohortError(f"cohort {c.name!r} is empty")
    subsets = [frozenset(s) for s in subsets]
    cd = dep.matched_counts(subsets)
    cr = rnd.matched_counts(subsets)

    def block(b):
        k, size = b
        rng = np.random.default_rng([seed, k])
        return (
            _resample_prevalence(rng, size, cd, dep.n_posts),
            _resample_prevalence(rng, size, cr, rnd.n_posts),
        )

    parts = _run_blocks(block, B, workers)
    return BootstrapDraws(
        p_dep=np.vstack([p[0] for p in parts]),
        p_rnd=np.vstack([p[1] for p in parts]),
        point_dep=cd.sum(axis=0) / dep.total_posts,
        point_rnd=cr.sum(axis=0) / rnd.total_posts,
        seed=seed,
    )


class _SignatureTable:
    """Pooled matched-set signatures of one cohort as packed 64-bit words."""

    def __init__(self, cohort: CohortMatches, n_words: int):
        pooled = cohort.pooled()
        self.total = cohort.total_posts
        self.counts = np.array(list(pooled.values()), dtype=np.float64)
        bits = np.zeros((len(pooled), n_words), dtype=np.uint64)
        for k, sig in enumerate(pooled):
            for i in sig:
                bits[k, i // 64] |= np.uint64(1) << np.uint64(i % 64)
        self.bits = bits

    def prevalence(self, masks: np.ndarray) -> np.ndarray:
        if len(self.counts) == 0:
            return np.zeros(len(masks))
        hit = ((self.bits[None, :, :] & masks[:, None, :]) != 0).any(axis=2)
        return (hit @ self.counts) / self.total


def _masks(draws: np.ndarray, n_words: int) -> np.ndarray:
    masks = np.zeros((draws.shape[0], n_words), dtype=np.uint64)
    rows = np.repeat(np.arange(draws.shape[0]), draws.shape[1])
    flat = draws.ravel()
    np.bitwise_or.at(
        masks,
        (rows, flat // 64),
        np.left_shift(np.uint64(1), (flat % 64).astype(np.uint64)),
    )
    return masks


def bootstrap_schemata(
    dep: CohortMatches,
    rnd: CohortMatches,
    subsets: Sequence[Iterable[int]],
    B: int = 10000,
    seed: int = 0,
    workers: int = 1,
) -> BootstrapDraws:
    """Resample each schema subset with replacement, keeping the cohorts fixed.

    Duplicate draws collapse: a post matches the resampled subset iff it
    matches any distinct schema drawn.
    """
    for c in (dep, rnd):
        if c.total_posts == 0:
            raise EmptyCohortError(f"cohort {c.name!r} is empty")
    pools = [np.array(sorted(frozenset(s)), dtype=np.int64) for s in subsets]
    max_id = max([int(p.max()) for p in pools if len(p)] + [0])
    n_words = max_id // 64 + 1
    td = _SignatureTable(dep, n_words)
    tr = _SignatureTable(rnd, n_words)

    def block(b):
        k, size = b
        rng = np.random.default_rng([seed, k])
        pd_ = np.zeros((size, len(pools)))
        pr_ = np.zeros((size, len(pools)))
        for j, pool in enumerate(pools):
            if len(pool) == 0:
                continue
            draws = pool[rng.integers(0, len(pool), size=(size, len(pool)))]
            m = _masks(draws, n_words)
            pd_[:, j] = td.prevalence(m)
            pr_[:, j] = tr.prevalence(m)
        return pd_, pr_

    parts = _run_blocks(block, B, workers)
    full = _masks_for_sets(pools, n_words)
    return BootstrapDraws(
        p_dep=np.vstack([p[0] for p in parts]),
        p_rnd=np.vstack([p[1] for p in parts]),
        point_dep=td.prevalence(full),
        point_rnd=tr.prevalence(full),
        seed=seed,
    )


def _masks_for_sets(pools: Sequence[np.ndarray], n_words: int) -> np.ndarray:
    masks = np.zeros((len(pools), n_words), dtype=np.uint64)
    for j, pool in enumerate(pools):
        for i in pool:
            masks[j, i // 64] |= np.uint64(1) << np.uint64(i % 64)
    return masks


def bootstrap(
    dep: CohortMatches,
    rnd: CohortMatches,
    subsets: Sequence[Iterable[int]],
    config: BootstrapConfig = BootstrapConfig(),
) -> BootstrapDraws:
    fn = bootstrap_users if config.axis == "users" else bootstrap_schemata
    return fn(dep, rnd, subsets, B=config.B, seed=config.seed, workers=config.workers)


def significance(summary: EstimateSummary, null: float = 1.0) -> str:
    """'>>' if the CI lies above ``null``, '<<' if below, '' otherwise."""
    if not summary.effective_replicates:
        return ""
    if summary.ci_low > null:
        return ">>"
    if summary.ci_high < null:
        return "<<"
    return ""


# ---------------------------------------------------------------------------
# per-schema ratios


@dataclass(frozen=True)
class SchemaEstimate:
    schema_id: int
    n_dep: int
    n_rnd: int
    status: str  # "ok", "not-observed", "undefined"
    summary: EstimateSummary | None


def per_schema_prevalence_ratios(
    dep: CohortMatches,
    rnd: CohortMatches,
    schema_ids: Iterable[int],
    config: BootstrapConfig = BootstrapConfig(),
) -> list[SchemaEstimate]:
    """Bootstrap the ratio of every single schema, ranked by median ratio.

    Schemata never seen in either cohort are "not-observed"; those absent
    from the reference cohort only are "undefined". Both sink to the end.
    """
    ids = sorted(set(int(i) for i in schema_ids))
    cd = dep.matched_counts([[i] for i in ids]).sum(axis=0)
    cr = rnd.matched_counts([[i] for i in ids]).sum(axis=0)
    observed = [k for k, _ in enumerate(ids) if cd[k] + cr[k] > 0 and cr[k] > 0]
    draws = None
    if observed:
        draws = bootstrap(dep, rnd, [[ids[k]] for k in observed], config)
    out = []
    for k, sid in enumerate(ids):
        if cd[k] + cr[k] == 0:
            out.append(SchemaEstimate(sid, 0, 0, "not-observed", None))
        elif cr[k] == 0:
            out.append(SchemaEstimate(sid, int(cd[k]), 0, "undefined", None))
    ranked = []
    for j, k in enumerate(observed):
        s = draws.pr_summary(j)
        ranked.append(SchemaEstimate(ids[k], int(cd[k]), int(cr[k]), "ok", s))
    ranked.sort(key=lambda e: (-(e.summary.median if math.isfinite(e.summary.median) else -math.inf), e.schema_id))
    return ranked + out


# ---------------------------------------------------------------------------
# Kolmogorov-Smirnov


@dataclass(frozen=True)
class KSResult:
    statistic: float
    p_value: float
    n_a: int
    n_b: int


def ks_statistic(a: Sequence[float], b: Sequence[float]) -> float:
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    grid = np.concatenate([a, b])
    fa = np.searchsorted(a, grid, side="right") / len(a)
    fb = np.searchsorted(b, grid, side="right") / len(b)
    return float(np.max(np.abs(fa - fb)))


def kolmogorov_sf(x: float, tol: float = 1e-12) -> float:
    """Survival function of the Kolmogorov distribution, P(K > x)."""
    if x <= 0:
        return 1.0
    if x < 1.0:
        # Jacobi-theta form converges fast for small x.
        s = 0.0
        k = 1
        c = math.pi**2 / (8.0 * x * x)
        while True:
            term = math.exp(-((2 * k - 1) ** 2) * c)
            s += term
            if term < tol:
                break
            k += 1
        return min(1.0, max(0.0, 1.0 - math.sqrt(2.0 * math.pi) / x * s))
    s = 0.0
    k = 1
    while True:
        term = math.exp(-2.0 * k * k * x * x)
        s += term if k % 2 else -term
        if term < tol:
            break
        k += 1
    return min(1.0, max(0.0, 2.0 * s))


def ks_exact_pvalue(a: Sequence[float], b: Sequence[float], max_n: int = 20) -> float:
    """Permutation p-value: share of all relabelings of the pooled sample with D >= observed."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    na, nb = len(a), len(b)
    n = na + nb
    if n > max_n:
        raise ValueError(f"exact mode supports n_a + n_b <= {max_n}")
    pooled = np.concatenate([a, b])
    order = np.argsort(pooled, kind="stable")
    values = pooled[order]
    # evaluate the ECDFs only at the last position of each tied run
    ends = np.r_[values[1:] != values[:-1], True]
    combos = np.array(list(itertools.combinations(range(n), na)), dtype=np.int64)
    member = np.zeros((len(combos), n), dtype=np.int64)
    member[np.arange(len(combos))[:, None], combos] = 1
    ca = np.cumsum(member, axis=1)[:, ends]
    pos = np.arange(1, n + 1)[ends]
    d = np.abs(ca / na - (pos - ca) / nb).max(axis=1)
    observed_a = np.cumsum(order < na)[ends]
    d_obs = np.abs(observed_a / na - (pos - observed_a) / nb).max()
    return float(np.mean(d >= d_obs - 1e-12))


def ks_two_sample(a: Sequence[float], b: Sequence[float], mode: str = "asymptotic") -> KSResult:
    """Two-sample KS test.

    ``mode="asymptotic"`` uses the Kolmogorov limit distribution with
    effective size n_a*n_b/(n_a+n_b); ``mode="exact"`` enumerates every
    relabeling of the pooled sample (small samples only).
    """
    na, nb = len(a), len(b)
    if na < 1 or nb < 1:
        raise ValueError("both samples need at least one value")
    d = ks_statistic(a, b)
    if mode == "exact":
        p = ks_exact_pvalue(a, b)
    elif mode == "asymptotic":
        p = kolmogorov_sf(math.sqrt(na * nb / (na + nb)) * d)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return KSResult(d, p, na, nb)


# ---------------------------------------------------------------------------
# threshold sweep and sentiment


@dataclass(frozen=True)
class SweepRow:
    threshold: int
    ks: KSResult


def threshold_sweep(
    dep: CohortMatches, rnd: CohortMatches, thresholds: Sequence[int]
) -> list[SweepRow]:
    if any(t < 1 for t in thresholds):
        raise ValueError("thresholds must be positive")
    if list(thresholds) != sorted(thresholds):
        raise ValueError("thresholds must be ascending")
    rows = []
    for t in thresholds:
        a = [u.prevalence for u in within_subject_prevalences(dep, t)]
        b = [u.prevalence for u in within_subject_prevalences(rnd, t)]
        if not a or not b:
            raise EmptyCohortError(f"no users with at least {t} posts in one of the cohorts")
        rows.append(SweepRow(t, ks_two_sample(a, b)))
    return rows


@dataclass(frozen=True)
class Histogram:
    edges: np.ndarray
    density_a: np.ndarray
    density_b: np.ndarray


def histogram_pair(
    a: Sequence[float], b: Sequence[float], lo: float, hi: float, bin_width: float
) -> Histogram:
    n_bins = int(round((hi - lo) / bin_width))
    if n_bins < 1 or not math.isclose(n_bins * bin_width, hi - lo, rel_tol=1e-9):
        raise ValueError(f"bin width {bin_width} does not tile [{lo}, {hi}]")
    edges = np.linspace(lo, hi, n_bins + 1)
    ha, _ = np.histogram(np.asarray(a, dtype=float), bins=edges, density=True)
    hb, _ = np.histogram(np.asarray(b, dtype=float), bins=edges, density=True)
    return Histogram(edges, ha, hb)


@dataclass(frozen=True)
class SentimentComparison:
    histogram: Histogram
    ks: KSResult
    zero_fraction_a: float
    zero_fraction_b: float
    mean_a: float
    mean_b: float


def sentiment_distribution_compare(
    scores_a: Sequence[float], scores_b: Sequence[float], bin_width: float = 0.05
) -> SentimentComparison:
    a = np.asarray(scores_a, dtype=float)
    b = np.asarray(scores_b, dtype=float)
    for x in (a, b):
        if len(x) == 0:
            raise ValueError("empty score sample")
        if np.any((x < -1) | (x > 1)) or not np.all(np.isfinite(x)):
            raise ValueError("sentiment scores must lie in [-1, 1]")
    return SentimentComparison(
        histogram=histogram_pair(a, b, -1.0, 1.0, bin_width),
        ks=ks_two_sample(a, b),
        zero_fraction_a=float(np.mean(a == 0)),
        zero_fraction_b=float(np.mean(b == 0)),
        mean_a=float(a.mean()),
        mean_b=float(b.mean()),
    )
