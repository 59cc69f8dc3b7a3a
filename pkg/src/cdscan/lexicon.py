"""Embedded cognitive-distortion schema lexicon.

The 241 schemata are stored verbatim, grouped by distortion category, and
re-tokenized through :mod:`cdscan.textnorm` so that schemata and posts share
one token space.
"""

from __future__ import annotations

import io
from collections.abc import Iterable
from dataclasses import dataclass

from cdscan.textnorm import normalize

# Category order follows the appendix listing; schema ids are assigned in this
# order and must never be renumbered.
CATEGORY_DEFINITIONS: dict[str, str] = {
    "Catastrophizing": "Exaggerating the importance of negative events",
    "Dichotomous Reasoning": (
        "Thinking that an inherently continuous situation can only fall into two categories"
    ),
    "Disqualifying the Positive": "Unreasonably discounting positive experiences",
    "Emotional Reasoning": (
        "Thinking that something is true based on how one feels, "
        "ignoring the evidence to the contrary"
    ),
    "Fortune-telling": "Making predictions, usually negative ones, about the future.",
    "Labeling and Mislabeling": (
        "Labeling yourself or others while discounting evidence that could lead "
        "to less disastrous conclusions"
    ),
    "Magnification and Minimization": (
        "Magnifying negative aspects or minimizing positive aspects"
    ),
    "Mental Filtering": (
        "Paying too much attention to negative details instead of the whole picture"
    ),
    "Mindreading": "Believing you know what others are thinking",
    "Overgeneralizing": "Making sweeping negative conclusions based on a few examples",
    "Personalizing": (
        "Believing others are behaving negatively because of oneself, without "
        "considering more plausible or external explanations for behavior"
    ),
    "Should Statements": "Having a fixed idea on how you and/or others should behave",
}

CATEGORIES: tuple[str, ...] = tuple(CATEGORY_DEFINITIONS)

_RAW_SCHEMATA: dict[str, str] = {
    "Catastrophizing": (
        "will fail, will go wrong, will end, will be impossible, will not happen, "
        "will be terrible, will be horrible, will be a catastrophe, will be a disaster, "
        "will never end, will not end"
    ),
    "Dichotomous Reasoning": (
        "only, every, everyone, everybody, everything, everywhere, always, perfect, "
        "the best, all, not a single, no one, nobody, nothing, nowhere, never, "
        "worthless, the worst, neither, nor, either or, black or white, ever"
    ),
    "Disqualifying the Positive": (
        "great but, good but, OK but, not that great, not that good, it was not, "
        "not all that, fine but, acceptable but, great yet, good yet, OK yet, "
        "fine yet, acceptable yet"
    ),
    "Emotional Reasoning": (
        "but I feel, since I feel, because I feel, but it feels, since it feels, "
        "because it feels, still feels"
    ),
    "Fortune-telling": (
        "I will not, we will not , you will not, they will not, it will not, "
        "that will not, he will not, she will not"
    ),
    "Labeling and Mislabeling": (
        "I am a, he is a, she is a, they are a, it is a, that is a, sucks at, suck at, "
        "I never, he never, she never, you never, we never, they never, I am an, "
        "he is an, she is an, they are an, it is an, that is an, a burden, a complete, "
        "a completely, a huge, a loser, a major, a total, a totally, a weak, "
        "an absolute, an utter, a bad, a broken, a damaged, a helpless, a hopeless, "
        "an incompetent, a toxic, an ugly, an undesirable, an unlovable, a worthless, "
        "a horrible, a terrible"
    ),
    "Magnification and Minimization": (
        "worst, best, not important, not count, not matter, no matter, "
        "the only thing, the one thing"
    ),
    "Mental Filtering": (
        "I see only, all I see, all I can see, can only think, nothing good, "
        "nothing right, completely bad, completely wrong, only the bad, only the worst, "
        "if I just, if I only, if it just, if it only"
    ),
    "Mindreading": (
        "everyone believes, everyone knows, everyone thinks, everyone will believe, "
        "everyone will know, everyone will think, nobody believes, nobody knows, "
        "nobody thinks, nobody will believe, nobody will know, nobody will think, "
        "he believes, he knows, he thinks, he does not believe, he does not know, "
        "he does not think, he will believe, he will know, he will think, "
        "he will not believe, he will not know, he will not think, she believes, "
        "she knows, she thinks, she does not believe, she does not know, "
        "she does not think, she will believe, she will know, she will think, "
        "she will not believe, she will not know, she will not think, they believe, "
        "they know, they think, they do not believe, they do not know, "
        "they do not think, they will believe, they will know, they will think, "
        "they will not believe, they will not know, they will not think, we believe, "
        "we know, we think, we do not believe, we do not know, we do not think, "
        "we will believe, we will know, we will think, we will not believe, "
        "we will not know, we will not think, you believe, you know, you think, "
        "you do not believe, you do not know, you do not think, you will believe, "
        "you will know, you will think, you will not believe, you will not know, "
        "you will not think"
    ),
    "Overgeneralizing": (
        "all of the time, all of them, all the time, always happens, always like, "
        "happens every time, completely, no one ever, nobody ever, "
        "every single one of them, every single one of you, I always, you always, "
        "he always, she always, they always, I am always, you are always, "
        "he is always, she is always, they are always"
    ),
    "Personalizing": (
        "all me, all my, because I, because my, because of my, because of me, "
        "I am responsible, blame me, I caused, I feel responsible, all my doing, "
        "all my fault, my bad, my responsibility"
    ),
    "Should Statements": "should, ought, must, have to, has to",
}

EXPECTED_COUNTS: dict[str, int] = {
    "Catastrophizing": 11,
    "Dichotomous Reasoning": 23,
    "Disqualifying the Positive": 14,
    "Emotional Reasoning": 7,
    "Fortune-telling": 8,
    "Labeling and Mislabeling": 44,
    "Magnification and Minimization": 8,
    "Mental Filtering": 14,
    "Mindreading": 72,
    "Overgeneralizing": 21,
    "Personalizing": 14,
    "Should Statements": 5,
}

FIRST_PERSON_PRONOUNS = frozenset({"i", "me", "my", "mine", "myself"})
PERSONAL_PRONOUNS = FIRST_PERSON_PRONOUNS | frozenset(
    {
        "you", "your", "he", "him", "his", "she", "her", "it",
        "we", "us", "our", "they", "them", "their",
    }
)


class LexiconError(ValueError):
    """The embedded lexicon failed an internal consistency check."""


@dataclass(frozen=True)
class Category:
    name: str
    definition: str


@dataclass(frozen=True)
class Schema:
    id: int
    text: str
    tokens: tuple[str, ...]
    category: str
    has_first_person: bool
    has_personal_pronoun: bool

    @property
    def length_n(self) -> int:
        return len(self.tokens)

    @property
    def category_index(self) -> int:
        return CATEGORIES.index(self.category)


@dataclass(frozen=True)
class CategoryStats:
    category: str
    n_schemata: int
    mean_length: float
    pronoun_ratio: float  # percent


@dataclass(frozen=True)
class LexiconStats:
    categories: tuple[CategoryStats, ...]
    total: CategoryStats

    def by_name(self, name: str) -> CategoryStats:
        for row in self.categories:
            if row.category == name:
                return row
        raise KeyError(name)


def categories() -> tuple[Category, ...]:
    return tuple(Category(name, CATEGORY_DEFINITIONS[name]) for name in CATEGORIES)


def make_schema(
    schema_id: int,
    text: str,
    category: str,
    pronouns: Iterable[str] = PERSONAL_PRONOUNS,
) -> Schema:
    """Build a schema from its printed text, tokenized like a post."""
    tokens = tuple(normalize(text))
    if not tokens:
        raise LexiconError(f"schema {schema_id} ({text!r}) has no tokens")
    if len(tokens) > 5:
        raise LexiconError(f"schema {schema_id} ({text!r}) is longer than 5 tokens")
    if category not in CATEGORY_DEFINITIONS:
        raise LexiconError(f"unknown category {category!r}")
    pron = {p.lower() for p in pronouns}
    return Schema(
        id=schema_id,
        text=text,
        tokens=tokens,
        category=category,
        has_first_person=any(t in FIRST_PERSON_PRONOUNS for t in tokens),
        has_personal_pronoun=any(t in pron for t in tokens),
    )


_CACHE: tuple[Schema, ...] | None = None


def load_lexicon() -> tuple[Schema, ...]:
    """Return the 241 embedded schemata ordered by id.

    Raises LexiconError if the embedded table is internally inconsistent
    (duplicate entries within a category, empty schemata, wrong counts).
    """
    global _CACHE
    if _CACHE is not None:
        return _CACHE
    out: list[Schema] = []
    for category in CATEGORIES:
        # The printed table has a stray space inside "we will not "; strip it.
        texts = [t.strip() for t in _RAW_SCHEMATA[category].split(",")]
        if any(not t for t in texts):
            raise LexiconError(f"empty schema in {category}")
        seen: set[tuple[str, ...]] = set()
        for text in texts:
            schema = make_schema(len(out), text, category)
            if schema.tokens in seen:
                raise LexiconError(f"duplicate schema {text!r} in {category}")
            seen.add(schema.tokens)
            out.append(schema)
        if len(texts) != EXPECTED_COUNTS[category]:
            raise LexiconError(
                f"{category}: {len(texts)} schemata, expected {EXPECTED_COUNTS[category]}"
            )
    _CACHE = tuple(out)
    return _CACHE


def _row(name: str, group: list[Schema], pronouns: frozenset[str]) -> CategoryStats:
    n = len(group)
    if n == 0:
        return CategoryStats(name, 0, 0.0, 0.0)
    mean_len = sum(s.length_n for s in group) / n
    with_pron = sum(1 for s in group if any(t in pronouns for t in s.tokens))
    return CategoryStats(name, n, mean_len, 100.0 * with_pron / n)


def lexicon_stats(
    schemata: Iterable[Schema], pronouns: Iterable[str] = PERSONAL_PRONOUNS
) -> LexiconStats:
    """Per-category count, mean token length and pronoun-bearing percentage."""
    schemata = list(schemata)
    if not schemata:
        raise ValueError("lexicon_stats needs at least one schema")
    pron = frozenset(p.lower() for p in pronouns)
    rows = []
    for name in CATEGORIES:
        group = [s for s in schemata if s.category == name]
        if group:
            rows.append(_row(name, group, pron))
    return LexiconStats(tuple(rows), _row("Total", schemata, pron))


def filter_schemata_by_pronouns(
    schemata: Iterable[Schema], pronouns: Iterable[str]
) -> tuple[Schema, ...]:
    """Drop every schema containing one of ``pronouns`` (case-insensitive)."""
    pron = {p.lower() for p in pronouns}
    return tuple(s for s in schemata if not any(t in pron for t in s.tokens))


def by_category(schemata: Iterable[Schema]) -> dict[str, tuple[Schema, ...]]:
    groups: dict[str, list[Schema]] = {name: [] for name in CATEGORIES}
    for s in schemata:
        groups[s.category].append(s)
    return {k: tuple(v) for k, v in groups.items()}


def export_lexicon(schemata: Iterable[Schema]) -> str:
    """Tab-separated audit dump of the lexicon."""
    buf = io.StringIO()
    buf.write("id\tcategory\ttext\tn\thas_first_person\thas_personal_pronoun\n")
    for s in schemata:
        buf.write(
            f"{s.id}\t{s.category}\t{s.text}\t{s.length_n}\t"
            f"{int(s.has_first_person)}\t{int(s.has_personal_pronoun)}\n"
        )
    return buf.getvalue()


def format_stats(stats: LexiconStats) -> str:
    buf = io.StringIO()
    buf.write("category\tN_CD\tmean_n\tP_r\n")
    for row in (*stats.categories, stats.total):
        pr = "/" if row.pronoun_ratio == 0 else f"{row.pronoun_ratio:.1f}"
        buf.write(f"{row.category}\t{row.n_schemata}\t{row.mean_length:.3f}\t{pr}\n")
    return buf.getvalue()
