import pytest

from cdscan.lexicon import (
    CATEGORIES,
    EXPECTED_COUNTS,
    FIRST_PERSON_PRONOUNS,
    LexiconError,
    _RAW_SCHEMATA,
    by_category,
    export_lexicon,
    filter_schemata_by_pronouns,
    format_stats,
    lexicon_stats,
    load_lexicon,
    make_schema,
)

PERSONAL = {
    "i", "me", "my", "mine", "myself", "you", "your", "he", "him", "his", "she", "her",
    "it", "we", "us", "our", "they", "them", "their",
}

# Published N_CD column, table order.
PUBLISHED_COUNTS = {
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


def split_rows():
    """Whitespace split of the printed rows, independent of the tokenizer."""
    return {
        cat: [tuple(t.lower().split()) for t in raw.split(",")]
        for cat, raw in _RAW_SCHEMATA.items()
    }


def test_counts_match_published_table():
    lex = load_lexicon()
    assert len(lex) == 241
    got = {c: len(v) for c, v in by_category(lex).items()}
    assert got == PUBLISHED_COUNTS == dict(EXPECTED_COUNTS)


def test_ids_are_dense_and_ordered():
    lex = load_lexicon()
    assert [s.id for s in lex] == list(range(241))
    order = [CATEGORIES.index(s.category) for s in lex]
    assert order == sorted(order)


def test_tokens_agree_with_whitespace_split():
    rows = split_rows()
    for cat, group in by_category(load_lexicon()).items():
        assert [s.tokens for s in group] == rows[cat]


def test_no_duplicates_within_category():
    for group in by_category(load_lexicon()).values():
        assert len({s.tokens for s in group}) == len(group)


def test_lengths_in_range():
    assert all(1 <= s.length_n <= 5 for s in load_lexicon())


@pytest.mark.parametrize(
    "category, expected",
    [
        ("Fortune-telling", 87.5),
        ("Emotional Reasoning", 85.7),
        ("Mindreading", 83.3),
        ("Labeling and Mislabeling", 36.4),
        ("Mental Filtering", 50.0),
        ("Personalizing", 100.0),
        ("Disqualifying the Positive", 7.1),
    ],
)
def test_pronoun_ratio_published(category, expected):
    row = lexicon_stats(load_lexicon()).by_name(category)
    assert round(row.pronoun_ratio, 1) == expected


def test_pronoun_ratio_matches_split_oracle():
    stats = lexicon_stats(load_lexicon())
    for cat, rows in split_rows().items():
        want = 100 * sum(any(t in PERSONAL for t in r) for r in rows) / len(rows)
        assert stats.by_name(cat).pronoun_ratio == pytest.approx(want)


def test_overgeneralizing_ratio_from_printed_list():
    # the printed list gives 13 of 21; the summary table rounds a different count
    row = lexicon_stats(load_lexicon()).by_name("Overgeneralizing")
    assert row.pronoun_ratio == pytest.approx(100 * 13 / 21)


def test_mean_lengths():
    stats = lexicon_stats(load_lexicon())
    assert stats.by_name("Dichotomous Reasoning").mean_length == pytest.approx(31 / 23)
    assert stats.by_name("Personalizing").mean_length == pytest.approx(
        sum(len(r) for r in split_rows()["Personalizing"]) / 14
    )
    assert stats.total.n_schemata == 241


def test_first_person_filter():
    lex = load_lexicon()
    kept = by_category(filter_schemata_by_pronouns(lex, FIRST_PERSON_PRONOUNS))
    assert kept["Personalizing"] == ()
    assert len(kept["Disqualifying the Positive"]) == 14
    for cat, rows in split_rows().items():
        want = [r for r in rows if not set(r) & set(FIRST_PERSON_PRONOUNS)]
        assert [s.tokens for s in kept[cat]] == want


def test_filter_is_case_insensitive():
    lex = load_lexicon()
    assert filter_schemata_by_pronouns(lex, {"I", "ME"}) == filter_schemata_by_pronouns(lex, {"i", "me"})


def test_flags():
    s = make_schema(0, "I am a", "Labeling and Mislabeling")
    assert s.has_first_person and s.has_personal_pronoun
    s = make_schema(1, "they will", "Fortune-telling")
    assert not s.has_first_person and s.has_personal_pronoun


def test_make_schema_rejects_bad_input():
    with pytest.raises(LexiconError):
        make_schema(0, "!!!", "Personalizing")
    with pytest.raises(LexiconError):
        make_schema(0, "a b c d e f", "Personalizing")
    with pytest.raises(LexiconError):
        make_schema(0, "fine", "Nonsense")


def test_stats_require_schemata():
    with pytest.raises(ValueError):
        lexicon_stats([])


def test_export_and_format():
    lex = load_lexicon()
    dump = export_lexicon(lex).splitlines()
    assert len(dump) == 242
    assert dump[1].split("\t")[0] == "0"
    table = format_stats(lexicon_stats(lex)).splitlines()
    assert table[0] == "category\tN_CD\tmean_n\tP_r"
    assert table[-1].startswith("Total\t241\t")
