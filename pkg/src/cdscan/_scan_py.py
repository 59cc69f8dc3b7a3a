"""Pure-Python scan kernel; same contract as the compiled ``_scan`` module."""

from __future__ import annotations

import numpy as np


def scan_lists(docs, vocab, delta, out_start, out_ids, n_patterns):
    """Run the automaton over each token list.

    Returns ``(offsets, pattern_positions)`` where document ``i`` matched
    ``pattern_positions[offsets[i]:offsets[i+1]]`` (sorted, unique).
    """
    table = delta.tolist()
    starts = out_start.tolist()
    outs = out_ids.tolist()
    emits = [tuple(outs[starts[s] : starts[s + 1]]) for s in range(len(table))]
    get = vocab.get
    offsets = [0]
    found: list[int] = []
    total = 0
    for doc in docs:
        state = 0
        hits = None
        for tok in doc:
            state = table[state][get(tok, 0)]
            e = emits[state]
            if e:
                if hits is None:
                    hits = set(e)
                else:
                    hits.update(e)
        if hits:
            found.extend(sorted(hits))
            total += len(hits)
        offsets.append(total)
    return np.array(offsets, dtype=np.int64), np.array(found, dtype=np.int64)
