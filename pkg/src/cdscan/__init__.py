"""Cognitive-distortion schema detection and cohort prevalence statistics."""

from cdscan._kernels import BACKEND
from cdscan.lexicon import CATEGORIES, Schema, lexicon_stats, load_lexicon
from cdscan.matcher import MatchRecord, PatternIndex, build_index, match_corpus, match_post
from cdscan.textnorm import Post, apply_exclusions, expand_contractions, normalize, tokenize

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "CATEGORIES",
    "MatchRecord",
    "PatternIndex",
    "Post",
    "Schema",
    "apply_exclusions",
    "build_index",
    "expand_contractions",
    "lexicon_stats",
    "load_lexicon",
    "match_corpus",
    "match_post",
    "normalize",
    "tokenize",
]
