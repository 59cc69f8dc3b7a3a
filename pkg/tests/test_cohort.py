import json
from datetime import datetime, timezone

import pytest

from cdscan.cohort import (
    CohortManifest,
    DataError,
    UserRecord,
    _quotas,
    check_disjoint,
    date_matched_sample,
    format_users,
    ingest_corpus,
    month_bin,
    read_users,
    select_depressed_users,
)


def line(pid, user, text, ts="2019-01-01T00:00:00Z", **kw):
    return json.dumps({"post_id": pid, "user_id": user, "text": text, "created_at": ts, **kw}) + "\n"


def write(path, lines):
    path.write_text("".join(lines), encoding="utf-8")
    return path


def test_ingest_counts_and_dedupe(tmp_path):
    f = write(
        tmp_path / "c.jsonl",
        [
            line("1", "u", "always late"),
            line("1", "u", "always late"),  # duplicate
            line("2", "u", "rt", is_retweet=True),
            line("3", "u", "hola", lang="es"),
            line("4", "u", "so depressed"),
            "\n",
            line("5", "v", "fine day", account_created_at="2011-02-03T00:00:00Z", has_location=True),
        ],
    )
    ing = ingest_corpus([f])
    assert ing.duplicates == 1 and ing.lines == 6
    assert ing.exclusion_counts == {"retweet": 1, "non-english": 1, "keyword-diagnos-depress": 1, "none": 2}
    assert ing.considered == 5
    assert [p.post_id for p in ing.retained()["u"]] == ["1"]
    assert ing.users["v"].has_location is True
    assert ing.users["v"].account_created_at == datetime(2011, 2, 3, tzinfo=timezone.utc)
    assert ing.users["u"].post_count == 1


def test_truncation_keeps_most_recent(tmp_path):
    lines = [line(str(k), "u", f"post {k}", ts=f"2019-01-{k + 1:02d}T00:00:00Z") for k in range(10)]
    ing = ingest_corpus([write(tmp_path / "c.jsonl", lines)], max_posts=4)
    assert [p.post_id for p in ing.posts_by_user["u"]] == ["6", "7", "8", "9"]
    assert ing.truncated == 6


def test_truncation_before_exclusion(tmp_path):
    lines = [line("0", "u", "old one")] + [
        line(str(k), "u", "depressed", ts=f"2019-02-{k:02d}T00:00:00Z") for k in range(1, 4)
    ]
    ing = ingest_corpus([write(tmp_path / "c.jsonl", lines)], max_posts=3)
    assert ing.retained()["u"] == []


def test_malformed_tolerated_then_abort(tmp_path):
    good = [line(str(k), "u", "x") for k in range(19)]
    ing = ingest_corpus([write(tmp_path / "a.jsonl", good + ["garbage\n"])])
    assert ing.malformed == 1
    with pytest.raises(DataError, match="malformed"):
        ingest_corpus([write(tmp_path / "b.jsonl", good[:5] + ["garbage\n"] * 2)])


def test_missing_file(tmp_path):
    with pytest.raises(DataError):
        ingest_corpus([tmp_path / "nope.jsonl"])


def test_select_depressed(tmp_path):
    f = write(
        tmp_path / "c.jsonl",
        [
            line("1", "a", "I was diagnosed with depression last year"),
            line("2", "b", "RT I was diagnosed with depression", is_retweet=True),
            line("3", "c", "nothing here"),
        ],
    )
    users, statements = select_depressed_users(ingest_corpus([f], max_posts=None).posts_by_user)
    assert users == ["a"]
    assert [(s.user_id, s.post_id) for s in statements] == [("a", "1")]


def ur(uid, y, m, loc=True):
    return UserRecord(uid, datetime(y, m, 15, tzinfo=timezone.utc), 10, loc)


def test_quotas_largest_remainder():
    assert _quotas({"a": 1, "b": 1, "c": 1}, 10) == {"a": 4, "b": 3, "c": 3}
    q = _quotas({"x": 5, "y": 3, "z": 2}, 7)
    assert sum(q.values()) == 7 and q == {"x": 4, "y": 2, "z": 1}


def test_date_matched_split():
    ref = [ur(f"d{i}", 2012, 1) for i in range(20)] + [ur(f"e{i}", 2013, 6) for i in range(10)]
    cand = [ur(f"r{i}", 2012, 1) for i in range(50)] + [ur(f"s{i}", 2013, 6) for i in range(50)]
    res = date_matched_sample(cand, ref, seed=4, size=30)
    months = [month_bin(u.account_created_at) for u in res.users]
    assert months.count("2012-01") == 20 and months.count("2013-06") == 10
    assert res.deficits == {}
    again = date_matched_sample(cand, ref, seed=4, size=30)
    assert [u.user_id for u in again.users] == [u.user_id for u in res.users]


def test_date_matched_deficit_and_overlap():
    ref = [ur(f"d{i}", 2012, 1) for i in range(10)]
    cand = [ur(f"r{i}", 2012, 1) for i in range(4)] + [ur("d0", 2012, 1), ur("nl", 2012, 1, loc=False)]
    res = date_matched_sample(cand, ref, seed=0, require_location=True)
    assert len(res.users) == 4
    assert res.deficits == {"2012-01": 6}
    assert res.dropped_overlap == 1


def test_date_matched_empty_reference():
    with pytest.raises(DataError):
        date_matched_sample([ur("a", 2012, 1)], [], seed=0)


def test_user_table_roundtrip(tmp_path):
    users = [ur("a", 2012, 1), UserRecord("b", None, 0, None, ("x.jsonl",))]
    p = tmp_path / "users.tsv"
    p.write_text(format_users(users))
    assert read_users(p) == users


def test_manifest_roundtrip_and_digest():
    m = CohortManifest("random", [ur("b", 2012, 2), ur("a", 2011, 1)], {"none": 5, "retweet": 1}, seed=3, created_at="x")
    back = CohortManifest.loads(m.dumps())
    assert back.user_ids == ["a", "b"]
    assert back.exclusion_counts == {"none": 5, "retweet": 1}
    assert back.digest == m.digest and back.seed == 3
    with pytest.raises(DataError, match="digest"):
        CohortManifest.loads(m.dumps().replace("\ta\t", "\tz\t").replace("a\t2011", "z\t2011"))


def test_manifest_name_and_disjoint():
    with pytest.raises(ValueError):
        CohortManifest("control", [])
    a = CohortManifest("depressed", [ur("a", 2012, 1)])
    b = CohortManifest("random", [ur("a", 2012, 1)])
    with pytest.raises(DataError):
        check_disjoint(a, b)
    check_disjoint(a, CohortManifest("random", [ur("b", 2012, 1)]))
