"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 data error. Every output file is
written atomically and starts with a ``# config:`` line holding the
resolved settings (worker count excluded, since it cannot change results).
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from collections.abc import Sequence
from pathlib import Path

import numpy as np

from cdscan import __version__
from cdscan.cohort import (
    CohortManifest,
    DataError,
    check_disjoint,
    date_matched_sample,
    format_users,
    ingest_corpus,
    read_users,
    select_depressed_users,
)
from cdscan.lexicon import (
    CATEGORIES,
    FIRST_PERSON_PRONOUNS,
    LexiconError,
    export_lexicon,
    filter_schemata_by_pronouns,
    load_lexicon,
)
from cdscan.matcher import build_index, format_records, match_corpus
from cdscan.textnorm import apply_exclusions, plain_text_posts
from cdscan import reports
from cdscan.stats import (
    BootstrapConfig,
    CohortMatches,
    EmptyCohortError,
    bootstrap,
    sentiment_distribution_compare,
    threshold_sweep,
)

log = logging.getLogger("cdscan")

SUBCOMMANDS = (
    "lexicon", "ingest", "select", "sample", "match", "prevalence", "bootstrap",
    "ks", "per-schema", "sweep", "sentiment", "report",
)
DEFAULT_SWEEP = "1,25,50,75,100,125,150,175,200,250,300"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _default_out() -> str:
    return os.environ.get("CDSCAN_OUTPUT_DIR", "cdscan-out")


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    common = _Parser(add_help=False)
    common.add_argument("-o", "--out", default=_default_out(),
                        help="output directory (env CDSCAN_OUTPUT_DIR)")
    common.add_argument("-v", "--verbose", action="store_true")

    cohorts = _Parser(add_help=False)
    cohorts.add_argument("--depressed", nargs="+", required=True, metavar="FILE",
                         help="JSON-lines corpus file(s) of the depressed cohort")
    cohorts.add_argument("--random", nargs="+", required=True, metavar="FILE",
                         help="JSON-lines corpus file(s) of the random-sample cohort")
    cohorts.add_argument("--depressed-manifest", help="restrict to users in this manifest")
    cohorts.add_argument("--random-manifest", help="restrict to users in this manifest")
    cohorts.add_argument("--max-posts", type=int, default=3200,
                         help="keep only the most recent N posts per user")
    cohorts.add_argument("--category", action="append", choices=CATEGORIES,
                         help="restrict the lexicon to these categories (repeatable)")
    cohorts.add_argument("--exclude-fpp", action="store_true",
                         help="drop schemata containing first-person pronouns")

    boot = _Parser(add_help=False)
    boot.add_argument("--seed", type=int, default=0)
    boot.add_argument("-B", "--replicates", type=int, default=10000, dest="B")
    boot.add_argument("--workers", type=int, default=1)

    p = _Parser(prog="cdscan", description="cognitive-distortion schema analysis", formatter_class=fmt)
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    s = sub.add_parser("lexicon", parents=[common], formatter_class=fmt,
                       help="export the embedded lexicon")
    s.add_argument("--stats", action="store_true", help="also write per-category statistics")

    s = sub.add_parser("ingest", parents=[common], formatter_class=fmt,
                       help="normalize a corpus and report exclusions")
    s.add_argument("corpus", nargs="+")
    s.add_argument("--max-posts", type=int, default=3200)

    s = sub.add_parser("select", parents=[common], formatter_class=fmt,
                       help="find users with a diagnosis statement")
    s.add_argument("corpus", nargs="+")

    s = sub.add_parser("sample", parents=[common], formatter_class=fmt,
                       help="draw a creation-date matched random cohort")
    s.add_argument("--candidates", required=True, help="user table of the candidate pool")
    s.add_argument("--reference", required=True, help="user table or manifest of the depressed cohort")
    s.add_argument("--size", type=int, help="target size (default: reference size)")
    s.add_argument("--require-location", action="store_true")
    s.add_argument("--seed", type=int, default=0)

    s = sub.add_parser("match", parents=[common], formatter_class=fmt,
                       help="match schemata against posts")
    s.add_argument("corpus", nargs="+")
    s.add_argument("--plain-text", action="store_true", help="one post per line")
    s.add_argument("--workers", type=int, default=1)

    sub.add_parser("prevalence", parents=[common, cohorts], formatter_class=fmt,
                   help="cohort prevalence per category")

    s = sub.add_parser("bootstrap", parents=[common, cohorts, boot], formatter_class=fmt,
                       help="bootstrap prevalence ratios and differences")
    s.add_argument("--axis", choices=("users", "schemata"), default="users")

    s = sub.add_parser("ks", parents=[common, cohorts], formatter_class=fmt,
                       help="within-subject prevalence distributions and KS test")
    s.add_argument("--min-posts", type=int, default=150)
    s.add_argument("--bin-width", type=float, default=0.01)

    sub.add_parser("per-schema", parents=[common, cohorts, boot], formatter_class=fmt,
                   help="rank single schemata by bootstrapped ratio")

    s = sub.add_parser("sweep", parents=[common, cohorts], formatter_class=fmt,
                       help="KS statistic across minimum-post thresholds")
    s.add_argument("--thresholds", default=DEFAULT_SWEEP, help="comma-separated, ascending")

    s = sub.add_parser("sentiment", parents=[common], formatter_class=fmt,
                       help="compare two sentiment score distributions")
    s.add_argument("--scores-a", required=True, help="one score per line (last tab field)")
    s.add_argument("--scores-b", required=True)
    s.add_argument("--bin-width", type=float, default=0.05)

    s = sub.add_parser("report", parents=[common, cohorts, boot], formatter_class=fmt,
                       help="write every table and figure data file")
    s.add_argument("--all", action="store_true", help="include per-schema ranking and sweep")
    s.add_argument("--min-posts", type=int, default=150)
    s.add_argument("--bin-width", type=float, default=0.01)
    s.add_argument("--thresholds", default=DEFAULT_SWEEP)
    return p


# ---------------------------------------------------------------------------


def _config(args: argparse.Namespace) -> dict:
    cfg = {k: v for k, v in vars(args).items() if k not in ("workers", "verbose", "out")}
    cfg["version"] = __version__
    return cfg


def _write(args, name: str, text: str) -> None:
    path = reports.write_atomic(Path(args.out) / name, text)
    log.info("wrote %s", path)


def _lexicon(args) -> list:
    schemata = list(load_lexicon())
    if getattr(args, "category", None):
        schemata = [s for s in schemata if s.category in args.category]
    if getattr(args, "exclude_fpp", False):
        schemata = list(filter_schemata_by_pronouns(schemata, FIRST_PERSON_PRONOUNS))
    return schemata


def _load_cohort(name: str, files, manifest_path, max_posts, index, workers) -> tuple[CohortMatches, CohortManifest]:
    ing = ingest_corpus(files, max_posts=max_posts)
    by_user = ing.posts_by_user
    if manifest_path:
        manifest = CohortManifest.loads(Path(manifest_path).read_text(encoding="utf-8"))
        keep = set(manifest.user_ids)
        by_user = {u: ps for u, ps in by_user.items() if u in keep}
    else:
        manifest = CohortManifest(
            name, [ing.users[u] for u in sorted(by_user)], dict(ing.exclusion_counts)
        )
    kept = [p for u in sorted(by_user) for p in by_user[u] if p.included]
    records: dict[str, list] = {u: [] for u in by_user}
    for post, rec in zip(kept, match_corpus(index, kept, workers=workers)):
        records[post.user_id].append(rec)
    cohort = CohortMatches.from_records(name, records)
    if cohort.total_posts == 0:
        raise EmptyCohortError(f"{name} cohort has no retained posts")
    return cohort, manifest


def _cohorts(args, schemata):
    index = build_index(load_lexicon())
    workers = getattr(args, "workers", 1)
    dep, mdep = _load_cohort("depressed", args.depressed, args.depressed_manifest, args.max_posts, index, workers)
    rnd, mrnd = _load_cohort("random", args.random, args.random_manifest, args.max_posts, index, workers)
    check_disjoint(mdep, mrnd)
    return dep, rnd


def cmd_lexicon(args) -> None:
    schemata = load_lexicon()
    cfg = _config(args)
    _write(args, "lexicon.tsv", reports.config_line(cfg) + "\n" + export_lexicon(schemata))
    if args.stats:
        _write(args, "lexicon_stats.tsv", reports.schema_table2(schemata, None, cfg))


def cmd_ingest(args) -> None:
    ing = ingest_corpus(args.corpus, max_posts=args.max_posts)
    cfg = _config(args)
    _write(args, "users.tsv", reports.config_line(cfg) + "\n" + format_users(ing.users.values()))
    rows = [[k, v] for k, v in sorted(ing.exclusion_counts.items())]
    rows += [["retained_total", ing.exclusion_counts.get("none", 0)],
             ["considered_total", ing.considered], ["lines", ing.lines],
             ["malformed", ing.malformed], ["duplicates", ing.duplicates],
             ["truncated", ing.truncated], ["users", len(ing.users)]]
    _write(args, "ingest_summary.tsv", reports.render(cfg, ["item", "count"], rows))
    norm = [
        [p.post_id, p.user_id, p.excluded, " ".join(p.tokens or ())]
        for u in sorted(ing.posts_by_user) for p in ing.posts_by_user[u]
    ]
    _write(args, "normalized.tsv", reports.render(cfg, ["post_id", "user_id", "excluded", "tokens"], norm))


def cmd_select(args) -> None:
    ing = ingest_corpus(args.corpus, max_posts=None)
    users, statements = select_depressed_users(ing.posts_by_user)
    cfg = _config(args)
    manifest = CohortManifest("depressed", [ing.users[u] for u in users], dict(ing.exclusion_counts))
    _write(args, "depressed_manifest.txt", manifest.dumps())
    _write(args, "diagnosis_review.tsv", reports.render(
        cfg, ["user_id", "post_id", "text"],
        [[s.user_id, s.post_id, s.text.replace("\t", " ").replace("\n", " ")] for s in statements],
    ))


def _read_user_table(path: str):
    text = Path(path).read_text(encoding="utf-8")
    if text.startswith("# cohort:"):
        return CohortManifest.loads(text).users
    return read_users(path)


def cmd_sample(args) -> None:
    cand = _read_user_table(args.candidates)
    ref = _read_user_table(args.reference)
    res = date_matched_sample(cand, ref, seed=args.seed, size=args.size,
                              require_location=args.require_location)
    manifest = CohortManifest("random", res.users, seed=args.seed)
    _write(args, "random_manifest.txt", manifest.dumps())
    rows = [[m, q, res.deficits.get(m, 0)] for m, q in sorted(res.quotas.items())]
    _write(args, "sample_bins.tsv", reports.render(_config(args), ["month", "quota", "deficit"], rows))


def cmd_match(args) -> None:
    index = build_index(load_lexicon())
    if args.plain_text:
        posts = []
        for f in args.corpus:
            with open(f, encoding="utf-8") as fh:
                posts += plain_text_posts(fh.readlines(), user_id=Path(f).stem)
        posts = apply_exclusions(posts)
    else:
        ing = ingest_corpus(args.corpus, max_posts=None)
        posts = [p for u in sorted(ing.posts_by_user) for p in ing.posts_by_user[u]]
    records = match_corpus(index, posts, workers=args.workers)
    _write(args, "matches.tsv", reports.config_line(_config(args)) + "\n" + format_records(records))


def cmd_prevalence(args) -> None:
    schemata = _lexicon(args)
    dep, rnd = _cohorts(args, schemata)
    _write(args, "prevalence.tsv", reports.prevalence_table(dep, rnd, schemata, _config(args)))


def cmd_bootstrap(args) -> None:
    schemata = _lexicon(args)
    dep, rnd = _cohorts(args, schemata)
    subsets = [(n, s) for n, s in reports.category_subsets(schemata) if s]
    cfg = BootstrapConfig(B=args.B, axis=args.axis, seed=args.seed, workers=args.workers)
    draws = bootstrap(dep, rnd, [s for _, s in subsets], cfg)
    rows = []
    for k, (name, _) in enumerate(subsets):
        pr, pd = draws.pr_summary(k), draws.pd_summary(k)
        rows.append([name, *reports.summary_cells(pr, 1.0), *reports.summary_cells(pd, 0.0),
                     pr.replicates, pr.effective_replicates, int(pr.reliable), pr.seed])
    header = ["category", "PR_point", "PR_median", "PR_ci_low", "PR_ci_high", "PR_sig",
              "PD_point", "PD_median", "PD_ci_low", "PD_ci_high", "PD_sig",
              "replicates", "effective_replicates", "reliable", "seed"]
    _write(args, f"bootstrap_{args.axis}.tsv", reports.render(_config(args), header, rows))
    _write(args, "pr_all_density.tsv", reports.replicate_density(draws.ratio()[:, 0], 50, _config(args)))


def cmd_ks(args) -> None:
    dep, rnd = _cohorts(args, _lexicon(args))
    density, ks_text, _ = reports.within_subject_report(dep, rnd, args.min_posts, args.bin_width, _config(args))
    _write(args, "within_subject_density.tsv", density)
    _write(args, "within_subject_ks.tsv", ks_text)


def cmd_per_schema(args) -> None:
    schemata = _lexicon(args)
    dep, rnd = _cohorts(args, schemata)
    est = reports.run_per_schema(dep, rnd, schemata, args.B, args.seed, args.workers)
    _write(args, "per_schema.tsv", reports.per_schema_table(est, schemata, _config(args)))


def _parse_thresholds(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise UsageError(f"bad --thresholds {text!r}") from exc


def _sweep_rows(dep, rnd, thresholds):
    return [[r.threshold, r.ks.n_a, r.ks.n_b, reports.fmt(r.ks.statistic, 6), reports.fmt_p(r.ks.p_value)]
            for r in threshold_sweep(dep, rnd, thresholds)]


def cmd_sweep(args) -> None:
    dep, rnd = _cohorts(args, _lexicon(args))
    rows = _sweep_rows(dep, rnd, _parse_thresholds(args.thresholds))
    _write(args, "sweep.tsv", reports.render(_config(args), ["min_posts", "n_depressed", "n_random", "D", "p_value"], rows))


def _read_scores(path: str) -> np.ndarray:
    vals = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                vals.append(float(line.split("\t")[-1]))
            except ValueError:
                if lineno == 1:
                    continue  # header
                raise DataError(f"{path}:{lineno}: not a number: {line!r}")
    return np.array(vals)


def cmd_sentiment(args) -> None:
    res = sentiment_distribution_compare(_read_scores(args.scores_a), _read_scores(args.scores_b), args.bin_width)
    cfg = _config(args)
    h = res.histogram
    rows = [[reports.fmt(a, 4), reports.fmt(b, 4), reports.fmt(x, 6), reports.fmt(y, 6)]
            for a, b, x, y in zip(h.edges[:-1], h.edges[1:], h.density_a, h.density_b)]
    _write(args, "sentiment_hist.tsv", reports.render(cfg, ["bin_low", "bin_high", "density_a", "density_b"], rows))
    _write(args, "sentiment_ks.tsv", reports.render(
        cfg, ["n_a", "n_b", "D", "p_value", "zero_frac_a", "zero_frac_b", "mean_a", "mean_b"],
        [[res.ks.n_a, res.ks.n_b, reports.fmt(res.ks.statistic, 6), reports.fmt_p(res.ks.p_value),
          reports.fmt(res.zero_fraction_a, 6), reports.fmt(res.zero_fraction_b, 6),
          reports.fmt(res.mean_a, 6), reports.fmt(res.mean_b, 6)]],
    ))


def cmd_report(args) -> None:
    schemata = _lexicon(args)
    dep, rnd = _cohorts(args, schemata)
    cfg = _config(args)
    analysis = reports.analyze_categories(dep, rnd, schemata, args.B, args.seed, args.workers)
    _write(args, "table_prevalence.tsv", reports.prevalence_table(dep, rnd, schemata, cfg))
    _write(args, "table_pr.tsv", reports.ratio_table(analysis, cfg, "PR"))
    _write(args, "table_pd.tsv", reports.ratio_table(analysis, cfg, "PD"))
    _write(args, "pr_all_density.tsv", reports.replicate_density(analysis.all_cds.draws.ratio()[:, 0], 50, cfg))
    try:
        density, ks_text, _ = reports.within_subject_report(dep, rnd, args.min_posts, args.bin_width, cfg)
        _write(args, "within_subject_density.tsv", density)
        _write(args, "within_subject_ks.tsv", ks_text)
    except EmptyCohortError as exc:
        log.warning("skipping within-subject comparison: %s", exc)
    estimates = None
    if args.all:
        estimates = reports.run_per_schema(dep, rnd, schemata, args.B, args.seed, args.workers)
        _write(args, "per_schema.tsv", reports.per_schema_table(estimates, schemata, cfg))
        longest = min(int(dep.n_posts.max()), int(rnd.n_posts.max()))
        usable = [t for t in _parse_thresholds(args.thresholds) if t <= longest]
        if usable:
            rows = _sweep_rows(dep, rnd, usable)
            _write(args, "sweep.tsv", reports.render(cfg, ["min_posts", "n_depressed", "n_random", "D", "p_value"], rows))
    _write(args, "table_lexicon.tsv", reports.schema_table2(schemata, estimates, cfg))


COMMANDS = {
    "lexicon": cmd_lexicon, "ingest": cmd_ingest, "select": cmd_select, "sample": cmd_sample,
    "match": cmd_match, "prevalence": cmd_prevalence, "bootstrap": cmd_bootstrap, "ks": cmd_ks,
    "per-schema": cmd_per_schema, "sweep": cmd_sweep, "sentiment": cmd_sentiment, "report": cmd_report,
}


def run(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    if not argv:
        parser.print_usage(sys.stderr)
        return 1
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("missing subcommand; choose one of: " + ", ".join(SUBCOMMANDS))
        for name in ("B", "workers", "min_posts", "max_posts"):
            value = getattr(args, name, None)
            if value is not None and value < 1:
                raise UsageError(f"--{name.replace('_', '-')} must be >= 1")
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(exc, file=sys.stderr)
        return 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"cdscan: {exc}", file=sys.stderr)
        return 1
    except (DataError, EmptyCohortError, LexiconError, ValueError, OSError) as exc:
        print(f"cdscan: error: {exc}", file=sys.stderr)
        return 2
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
