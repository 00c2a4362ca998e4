"""Corpus text-generation metrics: BLEU, ROUGE-N, ROUGE-L, METEOR-lite and
Levenshtein distance.

All sequence metrics consume :class:`TokenizedText`, so callers can supply
their own tokenization; :func:`word_tokenize` is the single shipped word
tokenizer (lowercase, split on whitespace and punctuation boundaries,
punctuation kept as tokens) that makes scores reproducible.

Conventions pinned here:

- BLEU is corpus-level: modified n-gram precisions aggregate counts over all
  pairs, each smoothed additively (epsilon 1e-9 on numerator and denominator)
  so short candidates with zero higher-order overlap do not collapse the
  geometric mean; brevity penalty exp(1 - r/c) applies when c < r.
- ROUGE is reported as per-pair F1 averaged over pairs; pairs where both
  sides lack n-grams (or share none) score 0.
- METEOR-lite keeps the exact and stem matching stages only; the synonym
  stage needs an external lexical database and is dropped, hence the name.
  Alignment: per stage, candidate tokens left to right each take the
  leftmost available reference token; chunks are maximal runs of adjacent
  pairs. Score = F_mean * (1 - gamma * (chunks/matches)^beta) with
  alpha=0.9, beta=3, gamma=0.5.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

from chemtext.errors import ChemtextError
from chemtext.stem import porter_stem

BLEU_EPSILON = 1e-9
METEOR_ALPHA = 0.9
METEOR_BETA = 3.0
METEOR_GAMMA = 0.5

_WORD_RE = re.compile(r"\w+|[^\w\s]")


class LengthMismatchError(ChemtextError):
    """Candidates and references have different lengths."""


class EmptyCorpusError(ChemtextError):
    """A corpus metric was asked to aggregate zero pairs."""


@dataclass(frozen=True)
class TokenizedText:
    """Token sequence plus the string it came from."""

    tokens: tuple[str, ...]
    source: str

    def __post_init__(self) -> None:
        if any(not t for t in self.tokens):
            raise ValueError("tokens must be non-empty strings")


@dataclass(frozen=True)
class MetricValue:
    """A named score with the number of pairs it aggregates."""

    name: str
    value: float
    support: int

    def __post_init__(self) -> None:
        if self.support < 1:
            raise ValueError("support must be >= 1")


def word_tokenize(text: str) -> TokenizedText:
    """Lowercase word tokenization with punctuation kept as tokens."""
    return TokenizedText(tokens=tuple(_WORD_RE.findall(text.lower())), source=text)


def char_tokenize(text: str) -> TokenizedText:
    """Each character one token; case preserved (SMILES is case-sensitive)."""
    return TokenizedText(tokens=tuple(text), source=text)


def _check_pairs(
    candidates: Sequence[TokenizedText], references: Sequence[TokenizedText]
) -> None:
    if len(candidates) != len(references):
        raise LengthMismatchError(
            f"{len(candidates)} candidates vs {len(references)} references"
        )
    if not candidates:
        raise EmptyCorpusError("no (candidate, reference) pairs")


def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def bleu(
    candidates: Sequence[TokenizedText],
    references: Sequence[TokenizedText],
    max_n: int,
) -> MetricValue:
    """Corpus BLEU with uniform weights over orders 1..max_n."""
    if max_n not in (2, 4):
        raise ValueError("max_n must be 2 or 4")
    _check_pairs(candidates, references)
    matches = [0] * max_n
    totals = [0] * max_n
    cand_len = 0
    ref_len = 0
    for cand, ref in zip(candidates, references):
        cand_len += len(cand.tokens)
        ref_len += len(ref.tokens)
        for n in range(1, max_n + 1):
            c_counts = _ngrams(cand.tokens, n)
            r_counts = _ngrams(ref.tokens, n)
            matches[n - 1] += sum(min(c, r_counts[g]) for g, c in c_counts.items())
            totals[n - 1] += sum(c_counts.values())
    log_sum = 0.0
    for m, t in zip(matches, totals):
        log_sum += math.log((m + BLEU_EPSILON) / (t + BLEU_EPSILON))
    if cand_len == 0:
        value = 0.0
    else:
        brevity = 1.0 if cand_len >= ref_len else math.exp(1.0 - ref_len / cand_len)
        value = brevity * math.exp(log_sum / max_n)
    return MetricValue(name=f"bleu{max_n}", value=value, support=len(candidates))


def rouge_n(
    candidates: Sequence[TokenizedText],
    references: Sequence[TokenizedText],
    n: int,
) -> MetricValue:
    """Mean per-pair n-gram F1 (clipped overlap)."""
    if n not in (1, 2):
        raise ValueError("n must be 1 or 2")
    _check_pairs(candidates, references)
    total = 0.0
    for cand, ref in zip(candidates, references):
        c_counts = _ngrams(cand.tokens, n)
        r_counts = _ngrams(ref.tokens, n)
        overlap = sum(min(c, r_counts[g]) for g, c in c_counts.items())
        c_total = sum(c_counts.values())
        r_total = sum(r_counts.values())
        precision = overlap / c_total if c_total else 0.0
        recall = overlap / r_total if r_total else 0.0
        if precision + recall > 0:
            total += 2 * precision * recall / (precision + recall)
    return MetricValue(name=f"rouge{n}", value=total / len(candidates),
                       support=len(candidates))


def _lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    if not a or not b:
        return 0
    previous = [0] * (len(b) + 1)
    for x in a:
        current = [0]
        for j, y in enumerate(b, start=1):
            if x == y:
                current.append(previous[j - 1] + 1)
            else:
                current.append(max(previous[j], current[j - 1]))
        previous = current
    return previous[-1]


def rouge_l(
    candidates: Sequence[TokenizedText],
    references: Sequence[TokenizedText],
) -> MetricValue:
    """Mean per-pair F1 of longest-common-subsequence statistics."""
    _check_pairs(candidates, references)
    total = 0.0
    for cand, ref in zip(candidates, references):
        lcs = _lcs_length(cand.tokens, ref.tokens)
        precision = lcs / len(cand.tokens) if cand.tokens else 0.0
        recall = lcs / len(ref.tokens) if ref.tokens else 0.0
        if precision + recall > 0:
            total += 2 * precision * recall / (precision + recall)
    return MetricValue(name="rougeL", value=total / len(candidates),
                       support=len(candidates))


def _align(cand: Sequence[str], ref: Sequence[str]) -> list[tuple[int, int]]:
    """Two-stage alignment: exact matches first, stem matches on the rest.
    Candidate positions scan left to right and take the leftmost free
    reference position."""
    pairs: list[tuple[int, int]] = []
    cand_free = [True] * len(cand)
    ref_free = [True] * len(ref)
    for stage in ("exact", "stem"):
        if stage == "exact":
            c_keys = list(cand)
            r_keys = list(ref)
        else:
            c_keys = [porter_stem(t) for t in cand]
            r_keys = [porter_stem(t) for t in ref]
        for i, key in enumerate(c_keys):
            if not cand_free[i]:
                continue
            for j, r_key in enumerate(r_keys):
                if ref_free[j] and r_key == key:
                    pairs.append((i, j))
                    cand_free[i] = False
                    ref_free[j] = False
                    break
    pairs.sort()
    return pairs


def _chunk_count(pairs: list[tuple[int, int]]) -> int:
    chunks = 0
    prev = None
    for ci, ri in pairs:
        if prev is None or (ci, ri) != (prev[0] + 1, prev[1] + 1):
            chunks += 1
        prev = (ci, ri)
    return chunks


def meteor_lite(
    candidates: Sequence[TokenizedText],
    references: Sequence[TokenizedText],
) -> MetricValue:
    """METEOR restricted to exact and Porter-stem matching, averaged over
    pairs."""
    _check_pairs(candidates, references)
    total = 0.0
    for cand, ref in zip(candidates, references):
        pairs = _align(cand.tokens, ref.tokens)
        m = len(pairs)
        if m == 0:
            continue
        precision = m / len(cand.tokens)
        recall = m / len(ref.tokens)
        f_mean = (precision * recall) / (
            METEOR_ALPHA * precision + (1 - METEOR_ALPHA) * recall
        )
        penalty = METEOR_GAMMA * (_chunk_count(pairs) / m) ** METEOR_BETA
        total += f_mean * (1.0 - penalty)
    return MetricValue(name="meteor_lite", value=total / len(candidates),
                       support=len(candidates))


def levenshtein(a: str, b: str) -> int:
    """Minimal edit count (insert/delete/substitute) over unicode scalars."""
    if a == b:
        return 0
    if not a:
        return len(b)
    if not b:
        return len(a)
    if len(b) > len(a):
        a, b = b, a
    previous = list(range(len(b) + 1))
    for i, x in enumerate(a, start=1):
        current = [i]
        for j, y in enumerate(b, start=1):
            current.append(
                min(
                    previous[j] + 1,
                    current[j - 1] + 1,
                    previous[j - 1] + (x != y),
                )
            )
        previous = current
    return previous[-1]
