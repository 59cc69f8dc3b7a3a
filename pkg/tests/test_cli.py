import json
import subprocess
import sys

import numpy as np
import pytest

from cdscan.cli import run
from cdscan.lexicon import load_lexicon
from cdscan.synth import main as synth_main, write_jsonl


@pytest.fixture(scope="session")
def corpora(tmp_path_factory):
    d = tmp_path_factory.mktemp("corpora")
    assert synth_main([str(d), "--seed", "5", "--depressed-users", "20", "--random-users", "30"]) == 0
    return d


def cohort_args(d):
    return ["--depressed", str(d / "depressed.jsonl"), "--random", str(d / "random.jsonl")]


def test_no_args_is_usage_error(capsys):
    assert run([]) == 1
    assert "usage" in capsys.readouterr().err


def test_unknown_flag(tmp_path):
    assert run(["lexicon", "--bogus", "-o", str(tmp_path)]) == 1


def test_bad_replicates(tmp_path, corpora):
    assert run(["bootstrap", *cohort_args(corpora), "-B", "0", "-o", str(tmp_path)]) == 1


def test_missing_input_is_data_error(tmp_path):
    assert run(["prevalence", "--depressed", "nope", "--random", "nope2", "-o", str(tmp_path)]) == 2


def test_lexicon_stats(tmp_path):
    assert run(["lexicon", "--stats", "-o", str(tmp_path)]) == 0
    lines = (tmp_path / "lexicon.tsv").read_text().splitlines()
    assert lines[0].startswith("# config: ")
    assert len(lines) == 243
    stats = (tmp_path / "lexicon_stats.tsv").read_text().splitlines()
    assert any(r.startswith("Personalizing\t14\t") and r.endswith("\t100.0") for r in stats)


def test_output_dir_from_env(tmp_path, monkeypatch):
    monkeypatch.setenv("CDSCAN_OUTPUT_DIR", str(tmp_path / "envout"))
    assert run(["lexicon"]) == 0
    assert (tmp_path / "envout" / "lexicon.tsv").exists()


def test_ingest_and_select(tmp_path):
    corpus = tmp_path / "c.jsonl"
    write_jsonl(corpus, [
        {"post_id": "1", "user_id": "a", "text": "I got diagnosed with depression", "created_at": "2019-01-01T00:00:00Z",
         "account_created_at": "2012-03-01T00:00:00Z"},
        {"post_id": "2", "user_id": "a", "text": "never again", "created_at": "2019-01-02T00:00:00Z"},
        {"post_id": "3", "user_id": "b", "text": "ok", "created_at": "2019-01-02T00:00:00Z",
         "account_created_at": "2012-03-09T00:00:00Z"},
    ])
    out = tmp_path / "o"
    assert run(["ingest", str(corpus), "-o", str(out)]) == 0
    summary = dict(l.split("\t") for l in (out / "ingest_summary.tsv").read_text().splitlines()[2:])
    assert summary["keyword-diagnos-depress"] == "1" and summary["none"] == "2"
    assert run(["select", str(corpus), "-o", str(out)]) == 0
    manifest = (out / "depressed_manifest.txt").read_text()
    assert "\na\t" in manifest and "\nb\t" not in manifest
    assert run(["sample", "--candidates", str(out / "users.tsv"), "--reference",
                str(out / "depressed_manifest.txt"), "-o", str(out)]) == 0
    assert "\nb\t" in (out / "random_manifest.txt").read_text()


def test_match_plain_text(tmp_path):
    src = tmp_path / "posts.txt"
    src.write_text("I am a total loser.\ncoffee\n")
    assert run(["match", "--plain-text", str(src), "-o", str(tmp_path)]) == 0
    rows = (tmp_path / "matches.tsv").read_text().splitlines()
    assert rows[1] == "post_id\tf_c\tschema_ids"
    _, f_c, ids = rows[2].split("\t")
    texts = {s.text for s in load_lexicon() if str(s.id) in ids.split(",")}
    assert f_c == "1" and texts == {"I am a", "a total"}
    assert rows[3].split("\t")[1:] == ["0", ""]


def test_sentiment(tmp_path):
    r = np.random.default_rng(0)
    a, b = tmp_path / "a.txt", tmp_path / "b.txt"
    a.write_text("score\n" + "\n".join(f"{x:.3f}" for x in np.clip(r.normal(0, 0.3, 200), -1, 1)))
    b.write_text("\n".join(f"id\t{x:.3f}" for x in np.clip(r.normal(0.1, 0.3, 200), -1, 1)))
    assert run(["sentiment", "--scores-a", str(a), "--scores-b", str(b), "-o", str(tmp_path)]) == 0
    assert (tmp_path / "sentiment_ks.tsv").read_text().splitlines()[2].startswith("200\t200\t")


def test_subcommands_run(tmp_path, corpora):
    base = cohort_args(corpora)
    assert run(["prevalence", *base, "-o", str(tmp_path)]) == 0
    assert run(["bootstrap", *base, "-B", "200", "--axis", "schemata", "-o", str(tmp_path)]) == 0
    assert run(["ks", *base, "--min-posts", "100", "-o", str(tmp_path)]) == 0
    assert run(["sweep", *base, "--thresholds", "150,200", "-o", str(tmp_path)]) == 0
    assert run(["per-schema", *base, "-B", "100", "-o", str(tmp_path)]) == 0
    assert run(["sweep", *base, "--thresholds", "x", "-o", str(tmp_path)]) == 1
    for name in ("prevalence.tsv", "bootstrap_schemata.tsv", "within_subject_ks.tsv", "sweep.tsv", "per_schema.tsv"):
        assert (tmp_path / name).read_text().startswith("# config: {")


def test_category_restriction(tmp_path, corpora):
    assert run(["prevalence", *cohort_args(corpora), "--category", "Personalizing", "-o", str(tmp_path)]) == 0
    rows = (tmp_path / "prevalence.tsv").read_text().splitlines()[2:]
    assert rows[0].startswith("All CDS\t")
    personalizing = [r for r in rows if r.startswith("Personalizing")][0]
    assert personalizing.split("\t")[1:3] == rows[0].split("\t")[1:3]


def test_overlapping_cohorts_rejected(tmp_path, corpora):
    f = str(corpora / "random.jsonl")
    assert run(["prevalence", "--depressed", f, "--random", f, "-o", str(tmp_path)]) == 2


def test_report_deterministic_across_workers(tmp_path, corpora):
    outs = []
    for w in ("1", "3"):
        out = tmp_path / f"w{w}"
        assert run(["report", "--all", *cohort_args(corpora), "-B", "600", "--seed", "2",
                    "--workers", w, "-o", str(out)]) == 0
        outs.append(out)
    names = sorted(p.name for p in outs[0].iterdir())
    assert names == sorted(p.name for p in outs[1].iterdir())
    assert "per_schema.tsv" in names and "table_pr.tsv" in names
    for n in names:
        assert (outs[0] / n).read_bytes() == (outs[1] / n).read_bytes(), n
    cfg = json.loads((outs[0] / "table_pr.tsv").read_text().splitlines()[0][len("# config: "):])
    assert cfg["seed"] == 2 and cfg["B"] == 600 and "workers" not in cfg


def test_report_personalizing_fpp_slash(tmp_path, corpora):
    assert run(["report", *cohort_args(corpora), "-B", "200", "-o", str(tmp_path)]) == 0
    rows = (tmp_path / "table_pr.tsv").read_text().splitlines()
    header = rows[1].split("\t")
    row = dict(zip(header, [r for r in rows if r.startswith("Personalizing\t")][0].split("\t")))
    assert all(row[f"PR_1_{c}"] == "/" for c in ("point", "median", "ci_low", "ci_high", "sig"))


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "cdscan", "--version"], capture_output=True, text=True)
    assert out.returncode == 0 and out.stdout.strip()
