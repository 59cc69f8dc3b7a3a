import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cdscan import _kernels, _scan_py
from cdscan.lexicon import CATEGORIES, LexiconError, make_schema
from cdscan.matcher import PatternIndex, build_index, format_records, match_corpus, match_post
from cdscan.synth import FILLER, random_token_docs
from cdscan.textnorm import Post, apply_exclusions, normalize
from oracles import sliding_window_matches

try:
    from cdscan import _scan
except ImportError:  # extension not built
    _scan = None

BACKENDS = [pytest.param(_scan_py.scan_lists, id="python")]
if _scan is not None:
    BACKENDS.append(pytest.param(_scan.scan_lists, id="cython"))


def scan_with(kernel, index, docs):
    off, pat = kernel(docs, index.vocab, index.delta, index.out_start, index.out_ids, index.n_patterns)
    ids = index.schema_ids[pat] if len(pat) else pat
    return [set(ids[off[i] : off[i + 1]].tolist()) for i in range(len(docs))]


def ids_for(index, text):
    return {index.schemata[index._pos[i]].text for i in match_post(index, normalize(text)).matched_schema_ids}


def test_worked_examples(index):
    assert ids_for(index, "I am a total loser.") == {"I am a", "a total"}
    assert ids_for(index, "No one will EVER like me.") == {"no one", "ever"}
    assert ids_for(index, "coffee river lamp") == set()


def test_record_flags(index, lexicon):
    rec = match_post(index, normalize("No one will EVER like me."), "p1")
    cats = {lexicon[i].category for i in rec.matched_schema_ids}
    assert rec.f_c == 1
    assert rec.per_category_flags == tuple(int(c in cats) for c in CATEGORIES)
    empty = match_post(index, [], "p2")
    assert empty.f_c == 0 and sum(empty.per_category_flags) == 0


@pytest.mark.parametrize("kernel", BACKENDS)
def test_oracle_equivalence(kernel, index, lexicon, rng):
    docs = random_token_docs(rng, 12000, schemata=lexicon)
    oracle = {s.id: s.tokens for s in lexicon}
    got = scan_with(kernel, index, docs)
    mismatches = [i for i, d in enumerate(docs) if got[i] != sliding_window_matches(oracle, d)]
    assert not mismatches
    assert sum(bool(g) for g in got) > 1000


def test_backends_agree(index, lexicon, rng):
    if _scan is None:
        pytest.skip("extension not built")
    docs = random_token_docs(rng, 20000, schemata=lexicon)
    a = _scan.scan_lists(docs, index.vocab, index.delta, index.out_start, index.out_ids, index.n_patterns)
    b = _scan_py.scan_lists(docs, index.vocab, index.delta, index.out_start, index.out_ids, index.n_patterns)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])


words = st.sampled_from(["i", "am", "a", "not", "never", "always", "no", "one", "will", "ever", "total", "x"])


@settings(max_examples=200, deadline=None)
@given(
    pats=st.lists(st.lists(words, min_size=1, max_size=4), min_size=1, max_size=12),
    doc=st.lists(words, max_size=30),
)
def test_random_pattern_sets(pats, doc):
    uniq = list(dict.fromkeys(tuple(p) for p in pats))
    schemata = [make_schema(k, " ".join(p), CATEGORIES[k % 12]) for k, p in enumerate(uniq)]
    index = build_index(schemata)
    want = sliding_window_matches({s.id: s.tokens for s in schemata}, doc)
    assert set(index.scan([doc]).matched(0).tolist()) == want


@settings(max_examples=100, deadline=None)
@given(doc=st.lists(words, max_size=25), extra=st.lists(words, max_size=10))
def test_monotone_under_extension(index, doc, extra):
    base = set(index.scan([doc]).matched(0).tolist())
    longer = set(index.scan([doc + extra]).matched(0).tolist())
    assert base <= longer


def test_patterns_roundtrip(index, lexicon):
    assert index.patterns() == {s.id: s.tokens for s in lexicon}
    assert index.n_patterns == 241


def test_every_schema_matches_itself(index, lexicon):
    res = index.scan([s.tokens for s in lexicon])
    for k, s in enumerate(lexicon):
        assert s.id in res.matched(k)


def test_same_text_in_two_categories_allowed():
    a = make_schema(0, "always", "Dichotomous Reasoning")
    b = make_schema(1, "always", "Overgeneralizing")
    index = build_index([a, b])
    assert index.scan([["always"]]).matched(0).tolist() == [0, 1]


def test_duplicate_rejected():
    a = make_schema(0, "always", "Dichotomous Reasoning")
    with pytest.raises(LexiconError):
        PatternIndex([a, make_schema(1, "Always", "Dichotomous Reasoning")])
    with pytest.raises(LexiconError):
        PatternIndex([a, a])


def test_unknown_tokens_reset(index):
    # "I am" + unknown + "a" must not complete "I am a"
    assert ids_for(index, "I am coffee a") == ids_for(index, "coffee a") | ids_for(index, "I am")


def test_match_corpus_order_and_workers(index, lexicon, rng):
    docs = random_token_docs(rng, 3000, schemata=lexicon)
    posts = apply_exclusions(
        Post(post_id=str(i), user_id="u", raw_text=" ".join(d)) for i, d in enumerate(docs)
    )
    one = match_corpus(index, posts, workers=1, chunk_size=500)
    four = match_corpus(index, posts, workers=4, chunk_size=500)
    assert one == four
    kept = [p.post_id for p in posts if p.included]
    assert [r.post_id for r in one] == kept


def test_match_corpus_skips_excluded(index):
    posts = apply_exclusions(
        [
            Post(post_id="a", user_id="u", raw_text="never again"),
            Post(post_id="b", user_id="u", raw_text="never again", is_retweet=True),
        ]
    )
    assert [r.post_id for r in match_corpus(index, posts)] == ["a"]


def test_format_records(index):
    text = format_records([match_post(index, ["no", "one"], "p")])
    assert text.splitlines()[1].startswith("p\t1\t")


def test_fallback_selected_by_env():
    env = dict(os.environ, CDSCAN_PURE_PYTHON="1")
    out = subprocess.run(
        [sys.executable, "-c", "from cdscan import _kernels; print(_kernels.BACKEND)"],
        env=env, capture_output=True, text=True, check=True,
    )
    assert out.stdout.strip() == "python"


def test_default_backend():
    forced = os.environ.get("CDSCAN_PURE_PYTHON", "") not in ("", "0")
    assert _kernels.BACKEND == ("cython" if _scan is not None and not forced else "python")


def test_filler_not_in_vocab(index):
    assert not set(FILLER) & set(index.vocab)
