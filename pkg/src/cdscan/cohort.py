"""Corpus ingestion, cohort selection and manifest files."""

from __future__ import annotations

import hashlib
import logging
from collections import Counter, defaultdict
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from cdscan.textnorm import (
    EXCLUDED_RETWEET,
    EXCLUSION_REASONS,
    MalformedRecord,
    Post,
    apply_exclusions,
    detect_diagnosis_statement,
    parse_post_line,
    parse_timestamp,
)

log = logging.getLogger(__name__)

_EPOCH = datetime(1970, 1, 1, tzinfo=timezone.utc)


class DataError(Exception):
    """Input data that cannot be processed (bad format, empty cohort, ...)."""


@dataclass
class UserRecord:
    user_id: str
    account_created_at: datetime | None = None
    post_count: int = 0
    has_location: bool | None = None
    sources: tuple[str, ...] = ()

    def __post_init__(self):
        if self.post_count < 0:
            raise ValueError("post_count must be >= 0")


@dataclass
class IngestResult:
    posts_by_user: dict[str, list[Post]]
    users: dict[str, UserRecord]
    exclusion_counts: Counter
    lines: int = 0
    malformed: int = 0
    duplicates: int = 0
    truncated: int = 0
    malformed_examples: list[str] = field(default_factory=list)

    @property
    def considered(self) -> int:
        return sum(self.exclusion_counts.values())

    def retained(self) -> dict[str, list[Post]]:
        """Non-excluded posts per user; users left with no posts are kept with []."""
        return {u: [p for p in ps if p.included] for u, ps in self.posts_by_user.items()}


def _read_lines(path: Path) -> Iterable[tuple[int, str]]:
    try:
        fh = path.open("r", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    lineno = 0
    with fh:
        try:
            for lineno, line in enumerate(fh, 1):
                yield lineno, line
        except (OSError, UnicodeDecodeError) as exc:
            raise DataError(f"{path}: read error after line {lineno}: {exc}") from exc


def ingest_corpus(
    paths: Sequence[str | Path],
    max_posts: int | None = 3200,
    max_malformed_rate: float = 0.10,
) -> IngestResult:
    """Read JSON-lines corpora, dedupe, truncate timelines and mark exclusions.

    Each user's timeline keeps the ``max_posts`` most recent posts (by
    ``created_at``; posts without a timestamp sort oldest). Exclusions are
    applied after truncation.
    """
    raw: dict[str, dict[str, Post]] = defaultdict(dict)
    sources: dict[str, set[str]] = defaultdict(set)
    lines = malformed = duplicates = 0
    examples: list[str] = []
    for path in map(Path, paths):
        for lineno, line in _read_lines(path):
            if not line.strip():
                continue
            lines += 1
            try:
                post = parse_post_line(line)
            except MalformedRecord as exc:
                malformed += 1
                if len(examples) < 10:
                    examples.append(f"{path}:{lineno}: {exc}")
                continue
            timeline = raw[post.user_id]
            if post.post_id in timeline:
                duplicates += 1
                continue
            timeline[post.post_id] = post
            sources[post.user_id].add(str(path))
    if lines and malformed / lines > max_malformed_rate:
        raise DataError(
            f"{malformed} of {lines} lines malformed (> {max_malformed_rate:.0%}); "
            f"wrong input format? first: {examples[0] if examples else ''}"
        )
    if malformed:
        log.warning("skipped %d malformed lines", malformed)

    posts_by_user: dict[str, list[Post]] = {}
    users: dict[str, UserRecord] = {}
    counts: Counter = Counter({r: 0 for r in EXCLUSION_REASONS})
    truncated = 0
    for user in sorted(raw):
        timeline = sorted(
            raw[user].values(), key=lambda p: (p.created_at or _EPOCH, p.post_id)
        )
        if max_posts is not None and len(timeline) > max_posts:
            truncated += len(timeline) - max_posts
            timeline = timeline[-max_posts:]
        marked = apply_exclusions(timeline)
        counts.update(p.excluded for p in marked)
        posts_by_user[user] = marked
        created = next((p.account_created_at for p in marked if p.account_created_at), None)
        loc = next((p.has_location for p in marked if p.has_location is not None), None)
        users[user] = UserRecord(
            user_id=user,
            account_created_at=created,
            post_count=sum(1 for p in marked if p.included),
            has_location=loc,
            sources=tuple(sorted(sources[user])),
        )
    return IngestResult(
        posts_by_user, users, counts, lines, malformed, duplicates, truncated, examples
    )


@dataclass(frozen=True)
class DiagnosisStatement:
    user_id: str
    post_id: str
    text: str


def select_depressed_users(
    posts_by_user: dict[str, list[Post]],
) -> tuple[list[str], list[DiagnosisStatement]]:
    """Users with at least one non-retweet diagnosis statement.

    The matched statements are returned for manual review.
    """
    selected = []
    statements = []
    for user in sorted(posts_by_user):
        hits = [
            p
            for p in posts_by_user[user]
            if not p.is_retweet and p.excluded != EXCLUDED_RETWEET
            and detect_diagnosis_statement(p.raw_text)
        ]
        if hits:
            selected.append(user)
            statements.extend(DiagnosisStatement(user, p.post_id, p.raw_text) for p in hits)
    return selected, statements


def month_bin(ts: datetime) -> str:
    return f"{ts.year:04d}-{ts.month:02d}"


@dataclass
class SampleResult:
    users: list[UserRecord]
    quotas: dict[str, int]
    deficits: dict[str, int]
    dropped_overlap: int = 0


def _quotas(ref_counts: Counter, size: int) -> dict[str, int]:
    """Largest-remainder allocation of ``size`` proportional to ``ref_counts``."""
    total = sum(ref_counts.values())
    exact = {k: size * v / total for k, v in ref_counts.items()}
    quotas = {k: int(np.floor(x)) for k, x in exact.items()}
    left = size - sum(quotas.values())
    for k in sorted(exact, key=lambda k: (-(exact[k] - quotas[k]), k))[:left]:
        quotas[k] += 1
    return quotas


def date_matched_sample(
    candidates: Iterable[UserRecord],
    reference: Iterable[UserRecord],
    seed: int,
    size: int | None = None,
    require_location: bool = False,
) -> SampleResult:
    """Sample candidates so their account-creation month histogram follows the reference.

    Bins that cannot fill their quota contribute every candidate they have;
    the shortfall is reported in ``deficits``.
    """
    reference = [r for r in reference if r.account_created_at is not None]
    if not reference:
        raise DataError("reference cohort is empty (or has no account creation dates)")
    ref_ids = {r.user_id for r in reference}
    pool = []
    overlap = 0
    for c in candidates:
        if c.user_id in ref_ids:
            overlap += 1
            continue
        if c.account_created_at is None:
            continue
        if require_location and not c.has_location:
            continue
        pool.append(c)
    if overlap:
        log.warning("dropped %d candidates already in the reference cohort", overlap)

    size = len(reference) if size is None else size
    quotas = _quotas(Counter(month_bin(r.account_created_at) for r in reference), size)
    bins: dict[str, list[UserRecord]] = defaultdict(list)
    for c in pool:
        bins[month_bin(c.account_created_at)].append(c)

    rng = np.random.default_rng(seed)
    chosen: list[UserRecord] = []
    deficits = {}
    for month in sorted(quotas):
        want = quotas[month]
        have = sorted(bins.get(month, []), key=lambda u: u.user_id)
        if len(have) <= want:
            if len(have) < want:
                deficits[month] = want - len(have)
                log.warning("month %s: %d candidates for quota %d", month, len(have), want)
            chosen.extend(have)
        else:
            pick = np.sort(rng.choice(len(have), size=want, replace=False))
            chosen.extend(have[i] for i in pick)
    chosen.sort(key=lambda u: u.user_id)
    return SampleResult(chosen, quotas, deficits, overlap)


# ---------------------------------------------------------------------------
# user tables and manifests

USER_COLUMNS = ("user_id", "account_created_at", "post_count", "has_location", "sources")


def _fmt_ts(ts: datetime | None) -> str:
    return "" if ts is None else ts.isoformat().replace("+00:00", "Z")


def user_line(u: UserRecord) -> str:
    loc = "" if u.has_location is None else str(int(u.has_location))
    return "\t".join(
        [u.user_id, _fmt_ts(u.account_created_at), str(u.post_count), loc, ";".join(u.sources)]
    )


def parse_user_line(line: str) -> UserRecord:
    parts = line.rstrip("\n").split("\t")
    parts += [""] * (len(USER_COLUMNS) - len(parts))
    uid, created, count, loc, src = parts[:5]
    return UserRecord(
        user_id=uid,
        account_created_at=parse_timestamp(created) if created else None,
        post_count=int(count or 0),
        has_location=None if loc == "" else loc == "1",
        sources=tuple(s for s in src.split(";") if s),
    )


def format_users(users: Iterable[UserRecord]) -> str:
    return "\t".join(USER_COLUMNS) + "\n" + "".join(user_line(u) + "\n" for u in users)


def read_users(path: str | Path) -> list[UserRecord]:
    out = []
    for lineno, line in _read_lines(Path(path)):
        if line.startswith("#") or not line.strip():
            continue
        if line.startswith("user_id\t"):
            continue
        try:
            out.append(parse_user_line(line))
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: {exc}") from exc
    return out


@dataclass
class CohortManifest:
    name: str
    users: list[UserRecord]
    exclusion_counts: dict[str, int] = field(default_factory=dict)
    seed: int | None = None
    created_at: str = ""

    def __post_init__(self):
        if self.name not in ("depressed", "random"):
            raise ValueError(f"cohort name must be 'depressed' or 'random', not {self.name!r}")

    @property
    def user_ids(self) -> list[str]:
        return [u.user_id for u in self.users]

    @property
    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(f"{self.name}\n{self.seed}\n".encode())
        for u in sorted(self.users, key=lambda u: u.user_id):
            h.update((user_line(u) + "\n").encode())
        return h.hexdigest()

    def dumps(self) -> str:
        excl = ",".join(f"{k}={v}" for k, v in sorted(self.exclusion_counts.items()))
        head = [
            f"# cohort: {self.name}",
            f"# seed: {'' if self.seed is None else self.seed}",
            f"# created_at: {self.created_at}",
            f"# exclusions: {excl}",
            f"# digest: {self.digest}",
        ]
        users = sorted(self.users, key=lambda u: u.user_id)
        return "\n".join(head) + "\n" + format_users(users)

    @classmethod
    def loads(cls, text: str) -> "CohortManifest":
        meta: dict[str, str] = {}
        users = []
        for line in text.splitlines():
            if line.startswith("# "):
                key, _, value = line[2:].partition(": ")
                meta[key] = value
            elif line and not line.startswith("user_id\t"):
                users.append(parse_user_line(line))
        excl = {}
        for item in filter(None, meta.get("exclusions", "").split(",")):
            k, _, v = item.partition("=")
            excl[k] = int(v)
        m = cls(
            name=meta.get("cohort", ""),
            users=users,
            exclusion_counts=excl,
            seed=int(meta["seed"]) if meta.get("seed") else None,
            created_at=meta.get("created_at", ""),
        )
        if meta.get("digest") and meta["digest"] != m.digest:
            raise DataError("manifest digest mismatch")
        return m


def check_disjoint(a: CohortManifest, b: CohortManifest) -> None:
    both = set(a.user_ids) & set(b.user_ids)
    if both:
        raise DataError(f"cohorts {a.name} and {b.name} share {len(both)} users")
