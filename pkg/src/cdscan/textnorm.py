"""Text normalization shared by posts and schemata.

Pipeline: curly apostrophes to ASCII, contraction expansion, Unicode NFKC,
case folding, URL and @-mention removal, then word tokens split on anything
that is not a letter or digit (so '#' and punctuation act as separators and
emoji vanish).
"""

from __future__ import annotations

import json
import re
import unicodedata
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from typing import Any, Iterable, Sequence

EXCLUDED_NONE = "none"
EXCLUDED_RETWEET = "retweet"
EXCLUDED_NON_ENGLISH = "non-english"
EXCLUDED_KEYWORD = "keyword-diagnos-depress"
EXCLUSION_REASONS = (EXCLUDED_RETWEET, EXCLUDED_NON_ENGLISH, EXCLUDED_KEYWORD, EXCLUDED_NONE)

_APOSTROPHES = str.maketrans({"’": "'", "‘": "'", "ʼ": "'"})

_SPECIAL_NEG = {"won't": "will not", "can't": "can not", "shan't": "shall not"}
_SUFFIXES = {
    "n't": " not",
    "'m": " am",
    "'re": " are",
    "'ve": " have",
    "'ll": " will",
    "'d": " would",
    "'s": " is",
}

_SPECIAL_RE = re.compile(r"\b(won't|can't|shan't)\b", re.IGNORECASE)
_SUFFIX_RE = re.compile(r"(?<=\w)(n't|'m|'re|'ve|'ll|'d|'s)\b", re.IGNORECASE)
_URL_RE = re.compile(r"(?:https?://|www\.)\S+")
_MENTION_RE = re.compile(r"@\w+")
_TOKEN_RE = re.compile(r"[^\W_]+")


def _special(m: re.Match) -> str:
    word = m.group(0)
    out = _SPECIAL_NEG[word.lower()]
    return out[0].upper() + out[1:] if word[0].isupper() else out


def _suffix(m: re.Match) -> str:
    return _SUFFIXES[m.group(0).lower()]


def expand_contractions(text: str) -> str:
    """Expand English contractions with a fixed table.

    >>> expand_contractions("I won't fail")
    'I will not fail'
    """
    text = text.translate(_APOSTROPHES)
    if "'" not in text:
        return text
    text = _SPECIAL_RE.sub(_special, text)
    return _SUFFIX_RE.sub(_suffix, text)


def tokenize(text: str) -> list[str]:
    """Case-folded word tokens of already-expanded text."""
    text = unicodedata.normalize("NFKC", unicodedata.normalize("NFKC", text).casefold())
    if "/" in text or "www." in text:
        text = _URL_RE.sub(" ", text)
    if "@" in text:
        text = _MENTION_RE.sub(" ", text)
    return _TOKEN_RE.findall(text)


def normalize(text: str) -> list[str]:
    return tokenize(expand_contractions(text))


def detect_diagnosis_statement(text: str) -> bool:
    """True if the tokens contain "i", then "diagnos*", then "depres*", in order.

    Any number of tokens may sit between the three anchors.
    """
    stage = 0
    for tok in normalize(text):
        if stage == 0:
            if tok == "i":
                stage = 1
        elif stage == 1:
            if tok.startswith("diagnos"):
                stage = 2
        elif tok.startswith("depres"):
            return True
    return False


@dataclass(frozen=True)
class Post:
    post_id: str
    user_id: str
    raw_text: str
    created_at: datetime | None = None
    lang: str = "en"
    is_retweet: bool = False
    tokens: tuple[str, ...] | None = None
    excluded: str | None = None
    account_created_at: datetime | None = None
    has_location: bool | None = None

    @property
    def included(self) -> bool:
        return self.excluded == EXCLUDED_NONE


def exclusion_reason(post: Post) -> str:
    if post.is_retweet:
        return EXCLUDED_RETWEET
    if (post.lang or "").lower() != "en":
        return EXCLUDED_NON_ENGLISH
    low = post.raw_text.lower()
    if "diagnos" in low or "depress" in low:
        return EXCLUDED_KEYWORD
    return EXCLUDED_NONE


def apply_exclusions(posts: Iterable[Post]) -> list[Post]:
    """Mark every post with its exclusion reason and tokenize the survivors.

    Nothing is dropped; excluded posts keep ``tokens=None``.
    """
    out = []
    for post in posts:
        reason = exclusion_reason(post)
        tokens = tuple(normalize(post.raw_text)) if reason == EXCLUDED_NONE else None
        out.append(replace(post, excluded=reason, tokens=tokens))
    return out


class MalformedRecord(ValueError):
    pass


def parse_timestamp(value: Any) -> datetime | None:
    """Parse ISO-8601 (``Z`` suffix allowed) into an aware UTC datetime."""
    if value is None or value == "":
        return None
    if isinstance(value, (int, float)):
        return datetime.fromtimestamp(value, tz=timezone.utc)
    s = str(value).strip()
    if s.endswith(("Z", "z")):
        s = s[:-1] + "+00:00"
    try:
        dt = datetime.fromisoformat(s)
    except ValueError as exc:
        raise MalformedRecord(f"bad timestamp {value!r}") from exc
    if dt.tzinfo is None:
        return dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc)


def _as_bool(value: Any) -> bool:
    if isinstance(value, bool):
        return value
    if isinstance(value, (int, float)):
        return bool(value)
    if isinstance(value, str) and value.strip().lower() in {"true", "1", "yes"}:
        return True
    if value is None or (isinstance(value, str) and value.strip().lower() in {"false", "0", "no", ""}):
        return False
    raise MalformedRecord(f"bad boolean {value!r}")


def parse_post_line(line: str) -> Post:
    """Parse one JSON-lines corpus record.

    Required keys: post_id, user_id, text. Optional: created_at, lang
    (default "en"), is_retweet, account_created_at, has_location.
    """
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise MalformedRecord(str(exc)) from exc
    if not isinstance(obj, dict):
        raise MalformedRecord("record is not an object")
    try:
        post_id, user_id, text = obj["post_id"], obj["user_id"], obj["text"]
    except KeyError as exc:
        raise MalformedRecord(f"missing key {exc}") from exc
    if not isinstance(text, str):
        raise MalformedRecord("text is not a string")
    loc = obj.get("has_location")
    return Post(
        post_id=str(post_id),
        user_id=str(user_id),
        raw_text=text,
        created_at=parse_timestamp(obj.get("created_at")),
        lang=str(obj.get("lang") or "en"),
        is_retweet=_as_bool(obj.get("is_retweet", False)),
        account_created_at=parse_timestamp(obj.get("account_created_at")),
        has_location=None if loc is None else _as_bool(loc),
    )


def post_to_line(post: Post) -> str:
    obj: dict[str, Any] = {
        "post_id": post.post_id,
        "user_id": post.user_id,
        "created_at": post.created_at.isoformat().replace("+00:00", "Z") if post.created_at else None,
        "text": post.raw_text,
        "lang": post.lang,
        "is_retweet": post.is_retweet,
    }
    if post.account_created_at is not None:
        obj["account_created_at"] = post.account_created_at.isoformat().replace("+00:00", "Z")
    if post.has_location is not None:
        obj["has_location"] = post.has_location
    return json.dumps(obj, ensure_ascii=False)


def plain_text_posts(lines: Sequence[str], user_id: str = "anonymous") -> list[Post]:
    """Plain-text mode: one post per non-empty line, all from one user."""
    return [
        Post(post_id=str(i), user_id=user_id, raw_text=line.rstrip("\n"))
        for i, line in enumerate(lines)
        if line.strip()
    ]
