"""Synthetic corpora with planted schema rates.

Used by the test-suite, the acceptance run and the benchmark. Run as
``python -m cdscan.synth OUTDIR`` to write a pair of JSON-lines fixture
corpora (depressed.jsonl, random.jsonl).
"""

from __future__ import annotations

import argparse
import itertools
import json
from collections import Counter
from collections.abc import Mapping, Sequence
from datetime import datetime, timedelta, timezone
from pathlib import Path

import numpy as np

from cdscan.lexicon import CATEGORIES, Schema, load_lexicon
from cdscan.matcher import PatternIndex, build_index
from cdscan.stats import CohortMatches

# Filler words share no token with any schema, so they cannot complete a
# match across an inserted phrase boundary.
FILLER = (
    "coffee river lamp orange quietly window garden seven purple bicycle "
    "morning paper kitten jacket music tuesday sandwich cloud pencil guitar "
    "mountain yellow basket candle ocean ticket forest button dinner planet"
).split()

# Random-sample prevalence per category and depressed/random ratio, taken from
# the published cohort tables; used as defaults for planted corpora.
REFERENCE_RATES = {
    "Dichotomous Reasoning": 0.13933,
    "Should Statements": 0.02896,
    "Magnification and Minimization": 0.01851,
    "Labeling and Mislabeling": 0.00903,
    "Mindreading": 0.01026,
    "Personalizing": 0.00427,
    "Overgeneralizing": 0.00476,
    "Disqualifying the Positive": 0.00060,
    "Emotional Reasoning": 0.00023,
    "Fortune-telling": 0.00050,
    "Mental Filtering": 0.00016,
    "Catastrophizing": 0.00019,
}
REFERENCE_MULTIPLIERS = {
    "Personalizing": 2.402,
    "Emotional Reasoning": 2.323,
    "Overgeneralizing": 1.580,
    "Mental Filtering": 1.468,
    "Labeling and Mislabeling": 1.328,
    "Disqualifying the Positive": 1.349,
    "Dichotomous Reasoning": 1.195,
    "Mindreading": 1.136,
    "Should Statements": 1.103,
    "Magnification and Minimization": 1.075,
    "Fortune-telling": 0.954,
    "Catastrophizing": 0.729,
}


def pure_schemata(index: PatternIndex) -> dict[str, list[Schema]]:
    """Schemata whose own text matches schemata of their category only."""
    res = index.scan([s.tokens for s in index.schemata])
    cat = {s.id: s.category for s in index.schemata}
    out: dict[str, list[Schema]] = {c: [] for c in CATEGORIES}
    for k, s in enumerate(index.schemata):
        if {cat[int(i)] for i in res.matched(k)} == {s.category}:
            out[s.category].append(s)
    return out


def random_token_docs(
    rng: np.random.Generator,
    n_docs: int,
    mean_tokens: float = 20.0,
    schemata: Sequence[Schema] | None = None,
    fragment_rate: float = 0.15,
) -> list[list[str]]:
    """Token lists mixing filler, schema vocabulary and whole/partial schemata."""
    schemata = list(schemata or load_lexicon())
    words = [(w,) for w in sorted({t for s in schemata for t in s.tokens}) + FILLER]
    frags = sorted(
        {s.tokens[a:b] for s in schemata for a in range(s.length_n) for b in range(a + 1, s.length_n + 1)}
    )
    units = words + frags
    p = np.r_[
        np.full(len(words), (1 - fragment_rate) / len(words)),
        np.full(len(frags), fragment_rate / len(frags)),
    ]
    lengths = rng.poisson(mean_tokens, size=n_docs)
    need = int(lengths.sum())
    mean_unit = float(p @ np.array([len(u) for u in units]))
    flat: list[str] = []
    while len(flat) < need:
        draw = rng.choice(len(units), size=int((need - len(flat)) / mean_unit) + 64, p=p)
        flat.extend(itertools.chain.from_iterable(units[i] for i in draw))
    ends = np.cumsum(lengths).tolist()
    starts = [0] + ends[:-1]
    return [flat[a:b] for a, b in zip(starts, ends)]


def planted_post_texts(
    rng: np.random.Generator,
    n_posts: int,
    rates: Mapping[str, float],
    pools: Mapping[str, Sequence[Schema]],
    filler_len: int = 8,
) -> list[str]:
    """Posts where category ``k`` is inserted independently with probability rates[k]."""
    cats = [c for c in CATEGORIES if rates.get(c, 0) > 0]
    p = np.array([rates[c] for c in cats])
    hits = rng.random((n_posts, len(cats))) < p
    texts = []
    for i in range(n_posts):
        parts = [FILLER[j] for j in rng.integers(0, len(FILLER), size=filler_len)]
        for j in np.flatnonzero(hits[i]):
            pool = pools[cats[j]]
            phrase = " ".join(pool[rng.integers(len(pool))].tokens)
            pos = int(rng.integers(0, len(parts) + 1))
            # keep a filler word on both sides of every phrase
            parts[pos:pos] = [FILLER[rng.integers(len(FILLER))], phrase, FILLER[rng.integers(len(FILLER))]]
        texts.append(" ".join(parts))
    return texts


def planted_corpus(
    rng: np.random.Generator,
    cohort: str,
    n_users: int,
    rates: Mapping[str, float],
    posts_per_user: tuple[int, int] = (150, 450),
    index: PatternIndex | None = None,
    start: datetime = datetime(2017, 1, 1, tzinfo=timezone.utc),
) -> list[dict]:
    """JSON-ready post records for one cohort."""
    index = index or build_index(load_lexicon())
    pools = pure_schemata(index)
    records = []
    for u in range(n_users):
        uid = f"{cohort[0]}{u:05d}"
        n = int(rng.integers(posts_per_user[0], posts_per_user[1] + 1))
        created = datetime(2009, 1, 1, tzinfo=timezone.utc) + timedelta(days=int(rng.integers(0, 3000)))
        for k, text in enumerate(planted_post_texts(rng, n, rates, pools)):
            records.append(
                {
                    "post_id": f"{uid}-{k}",
                    "user_id": uid,
                    "created_at": (start + timedelta(minutes=37 * k + u)).isoformat().replace("+00:00", "Z"),
                    "text": text,
                    "lang": "en",
                    "is_retweet": False,
                    "account_created_at": created.isoformat().replace("+00:00", "Z"),
                }
            )
    return records


def bernoulli_cohort(
    name: str, rng: np.random.Generator, n_users: int, posts_per_user: int, rate: float
) -> CohortMatches:
    """Cohort where each post matches schema 0 independently with ``rate``."""
    matched = rng.binomial(posts_per_user, rate, size=n_users)
    sig = frozenset({0})
    return CohortMatches(
        name,
        [f"{name}{i}" for i in range(n_users)],
        np.full(n_users, posts_per_user, dtype=np.int64),
        [Counter({sig: int(m)}) if m else Counter() for m in matched],
    )


def write_jsonl(path: str | Path, records: Sequence[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps(r) + "\n")


def main(argv: Sequence[str] | None = None) -> int:
    ap = argparse.ArgumentParser(description="write planted synthetic cohort corpora")
    ap.add_argument("outdir")
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--depressed-users", type=int, default=60)
    ap.add_argument("--random-users", type=int, default=120)
    args = ap.parse_args(argv)
    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(args.seed)
    index = build_index(load_lexicon())
    dep_rates = {c: REFERENCE_RATES[c] * REFERENCE_MULTIPLIERS[c] for c in CATEGORIES}
    write_jsonl(out / "depressed.jsonl", planted_corpus(rng, "depressed", args.depressed_users, dep_rates, index=index))
    write_jsonl(out / "random.jsonl", planted_corpus(rng, "random", args.random_users, REFERENCE_RATES, index=index))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
