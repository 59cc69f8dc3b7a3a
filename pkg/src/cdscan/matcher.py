"""Multi-pattern schema matching over token sequences.

All schema token sequences are compiled into a single Aho-Corasick automaton
over an integer token alphabet. The automaton is stored as a dense
transition table (state x symbol) so the scan loop is one table lookup per
token; symbol 0 stands for every token outside the schema vocabulary and
always leads back to the root.
"""

from __future__ import annotations

from collections import deque
from collections.abc import Iterable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from cdscan import _kernels
from cdscan.lexicon import CATEGORIES, LexiconError, Schema
from cdscan.textnorm import EXCLUDED_NONE, Post, normalize


@dataclass(frozen=True)
class MatchRecord:
    post_id: str
    matched_schema_ids: frozenset[int]
    per_category_flags: tuple[int, ...]

    @property
    def f_c(self) -> int:
        return 1 if self.matched_schema_ids else 0


@dataclass(frozen=True)
class ScanResult:
    """Compact scan output: post ``i`` matched ``ids[offsets[i]:offsets[i+1]]``."""

    offsets: np.ndarray
    ids: np.ndarray

    def __len__(self) -> int:
        return len(self.offsets) - 1

    def matched(self, i: int) -> np.ndarray:
        return self.ids[self.offsets[i] : self.offsets[i + 1]]

    def f_c(self) -> np.ndarray:
        return (np.diff(self.offsets) > 0).astype(np.int8)


class PatternIndex:
    """Immutable automaton over a set of schemata."""

    def __init__(self, schemata: Iterable[Schema]):
        schemata = sorted(schemata, key=lambda s: s.id)
        seen: dict[tuple[tuple[str, ...], str], int] = {}
        ids: set[int] = set()
        for s in schemata:
            if s.id in ids:
                raise LexiconError(f"duplicate schema id {s.id}")
            ids.add(s.id)
            key = (s.tokens, s.category)
            if key in seen:
                raise LexiconError(
                    f"schema {s.id} repeats schema {seen[key]} ({' '.join(s.tokens)!r}, {s.category})"
                )
            seen[key] = s.id
        self.schemata: tuple[Schema, ...] = tuple(schemata)
        self.schema_ids = np.array([s.id for s in schemata], dtype=np.int64)
        self._cat_of = [CATEGORIES.index(s.category) for s in schemata]
        self._pos = {s.id: k for k, s in enumerate(schemata)}

        vocab: dict[str, int] = {}
        for s in schemata:
            for t in s.tokens:
                if t not in vocab:
                    vocab[t] = len(vocab) + 1
        self.vocab = vocab
        self._build(schemata)

    def _build(self, schemata: Sequence[Schema]) -> None:
        children: list[dict[int, int]] = [{}]
        parent = [-1]
        label = [0]
        own: list[list[int]] = [[]]
        for p, s in enumerate(schemata):
            node = 0
            for t in s.tokens:
                sym = self.vocab[t]
                nxt = children[node].get(sym)
                if nxt is None:
                    nxt = len(children)
                    children[node][sym] = nxt
                    children.append({})
                    parent.append(node)
                    label.append(sym)
                    own.append([])
                node = nxt
            own[node].append(p)

        n_states = len(children)
        n_sym = len(self.vocab) + 1
        delta = np.zeros((n_states, n_sym), dtype=np.int32)
        fail = [0] * n_states
        outputs: list[list[int]] = [[] for _ in range(n_states)]
        queue = deque()
        for sym, nxt in children[0].items():
            delta[0, sym] = nxt
            queue.append(nxt)
        while queue:
            node = queue.popleft()
            f = fail[node]
            outputs[node] = sorted(set(own[node]) | set(outputs[f]))
            delta[node] = delta[f]
            for sym, nxt in children[node].items():
                fail[nxt] = int(delta[f, sym])
                delta[node, sym] = nxt
                queue.append(nxt)
        delta[:, 0] = 0

        out_start = np.zeros(n_states + 1, dtype=np.int32)
        for st in range(n_states):
            out_start[st + 1] = out_start[st] + len(outputs[st])
        out_ids = np.array([p for st in range(n_states) for p in outputs[st]], dtype=np.int32)

        self.delta = delta
        self.out_start = out_start
        self.out_ids = out_ids
        self._parent = parent
        self._label = label
        self._own = own

    @property
    def n_patterns(self) -> int:
        return len(self.schemata)

    @property
    def n_states(self) -> int:
        return self.delta.shape[0]

    def patterns(self) -> dict[int, tuple[str, ...]]:
        """Reconstruct every pattern from the trie (schema id -> tokens)."""
        inv = {v: k for k, v in self.vocab.items()}
        out = {}
        for state, pats in enumerate(self._own):
            if not pats:
                continue
            path = []
            node = state
            while node > 0:
                path.append(inv[self._label[node]])
                node = self._parent[node]
            for p in pats:
                out[self.schemata[p].id] = tuple(reversed(path))
        return out

    def scan(self, docs: Sequence[Sequence[str]]) -> ScanResult:
        """Scan token sequences; result ids are schema ids, sorted per post."""
        if not isinstance(docs, list):
            docs = list(docs)
        offsets, pat = _kernels.scan_lists(
            docs, self.vocab, self.delta, self.out_start, self.out_ids, self.n_patterns
        )
        return ScanResult(offsets, self.schema_ids[pat] if len(pat) else pat.astype(np.int64))

    def record(self, post_id: str, ids: Iterable[int]) -> MatchRecord:
        ids = frozenset(int(i) for i in ids)
        flags = [0] * len(CATEGORIES)
        pos = self._pos
        for i in ids:
            flags[self._cat_of[pos[i]]] = 1
        return MatchRecord(post_id, ids, tuple(flags))


def build_index(schemata: Iterable[Schema]) -> PatternIndex:
    return PatternIndex(schemata)


def match_post(index: PatternIndex, tokens: Sequence[str], post_id: str = "") -> MatchRecord:
    res = index.scan([tokens])
    return index.record(post_id, res.matched(0).tolist())


def _post_tokens(post: Post) -> Sequence[str]:
    return post.tokens if post.tokens is not None else normalize(post.raw_text)


def match_corpus(
    index: PatternIndex,
    posts: Iterable[Post],
    workers: int = 1,
    chunk_size: int = 65536,
) -> list[MatchRecord]:
    """One MatchRecord per non-excluded post, in input order."""
    kept = [p for p in posts if p.excluded in (None, EXCLUDED_NONE)]
    chunks = [kept[i : i + chunk_size] for i in range(0, len(kept), chunk_size)]

    def run(chunk: list[Post]) -> list[MatchRecord]:
        res = index.scan([_post_tokens(p) for p in chunk])
        ids = res.ids.tolist()
        off = res.offsets.tolist()
        return [index.record(p.post_id, ids[off[i] : off[i + 1]]) for i, p in enumerate(chunk)]

    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(run, chunks))
    else:
        parts = [run(c) for c in chunks]
    return [r for part in parts for r in part]


def format_records(records: Iterable[MatchRecord]) -> str:
    lines = ["post_id\tf_c\tschema_ids"]
    for r in records:
        lines.append(f"{r.post_id}\t{r.f_c}\t{','.join(str(i) for i in sorted(r.matched_schema_ids))}")
    return "\n".join(lines) + "\n"
