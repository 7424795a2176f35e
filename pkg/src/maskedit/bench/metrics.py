"""Text alignment metrics, implemented from scratch.

Tokenization is lowercase whitespace everywhere, with no smoothing, so scores
are deterministic and self-consistent (though not comparable to numbers from
other toolchains). The METEOR variant uses exact unigram matches only; full
METEOR needs stem/synonym resources out of scope here.
"""

from __future__ import annotations

import math
from collections import Counter

from ..errors import DegenerateMaskError


def tokenize(text: str) -> list[str]:
    return text.lower().split()


def _ngrams(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def bleu(candidate: str, reference: str, max_n: int = 4) -> dict[int, float]:
    """Clipped-count BLEU-n with brevity penalty, for n in 2..max_n.

    BLEU-n uses uniform weights over orders 1..n; any zero-precision order
    zeroes the score (no smoothing).
    """
    cand = tokenize(candidate)
    ref = tokenize(reference)
    if not cand or not ref:
        raise DegenerateMaskError("BLEU needs non-empty candidate and reference")
    if max_n < 2:
        raise DegenerateMaskError(f"max_n must be >= 2, got {max_n}")
    precisions = []
    for n in range(1, max_n + 1):
        cand_ngrams = _ngrams(cand, n)
        ref_ngrams = _ngrams(ref, n)
        total = sum(cand_ngrams.values())
        if total == 0:
            precisions.append(0.0)
            continue
        clipped = sum(min(c, ref_ngrams[g]) for g, c in cand_ngrams.items())
        precisions.append(clipped / total)
    bp = min(1.0, math.exp(1.0 - len(ref) / len(cand)))
    scores = {}
    for n in range(2, max_n + 1):
        ps = precisions[:n]
        if min(ps) == 0.0:
            scores[n] = 0.0
        else:
            scores[n] = bp * math.exp(sum(math.log(p) for p in ps) / n)
    return scores


def _align(cand: list[str], ref: list[str]) -> tuple[int, int]:
    """Exact-match alignment; returns (matches, chunks).

    Candidate tokens are matched left to right. A match extends the current
    chunk when it lands on the reference position right after the previous
    match; otherwise it opens a new chunk at the earliest unused position.
    """
    used = [False] * len(ref)
    positions: dict[str, list[int]] = {}
    for pos, tok in enumerate(ref):
        positions.setdefault(tok, []).append(pos)
    matches = 0
    chunks = 0
    prev_ref = -2
    for tok in cand:
        options = [p for p in positions.get(tok, []) if not used[p]]
        if not options:
            prev_ref = -2
            continue
        if prev_ref + 1 in options:
            chosen = prev_ref + 1
        else:
            chosen = options[0]
            chunks += 1
        used[chosen] = True
        matches += 1
        prev_ref = chosen
    return matches, chunks


def meteor_exact(candidate: str, reference: str) -> float:
    """Harmonic mean with recall weight 9 and fragmentation penalty
    0.5 * (chunks / matches)^3, exact unigram matches only."""
    cand = tokenize(candidate)
    ref = tokenize(reference)
    if not cand or not ref:
        raise DegenerateMaskError("METEOR needs non-empty candidate and reference")
    matches, chunks = _align(cand, ref)
    if matches == 0:
        return 0.0
    precision = matches / len(cand)
    recall = matches / len(ref)
    f_mean = 10.0 * precision * recall / (recall + 9.0 * precision)
    penalty = 0.5 * (chunks / matches) ** 3
    return f_mean * (1.0 - penalty)
