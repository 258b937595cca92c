"""Okapi BM25 over a per-example micro-corpus of candidate paragraphs.

Each example is ranked against an index built from its own candidate
list only; document frequencies never leak across examples. The idf uses
``ln(1 + (N - df + 0.5) / (df + 0.5))`` so scores stay non-negative even
when a term occurs in every candidate of a tiny list.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

from .corpus import Corpus, link_context
from .dataset import Example
from .predictions import Prediction, prediction_from_scores
from .text import tokenize

DEFAULT_K1 = 1.2
DEFAULT_B = 0.75
DEFAULT_WINDOW_TOKENS = 50


@dataclass(frozen=True)
class Bm25Index:
    term_freqs: tuple[dict[str, int], ...]
    doc_freq: dict[str, int]
    doc_lens: tuple[int, ...]
    avg_len: float
    k1: float
    b: float

    @property
    def n_docs(self) -> int:
        return len(self.doc_lens)


def build_index(
    candidate_texts: Sequence[str], k1: float = DEFAULT_K1, b: float = DEFAULT_B
) -> Bm25Index:
    """Index the example's candidate paragraphs for BM25 scoring."""
    if not candidate_texts:
        raise ValueError("cannot build a BM25 index over zero candidates")
    term_freqs = tuple(dict(Counter(tokenize(text))) for text in candidate_texts)
    doc_lens = tuple(sum(tf.values()) for tf in term_freqs)
    if sum(doc_lens) == 0:
        raise ValueError("all candidates are empty after tokenization")
    doc_freq: dict[str, int] = {}
    for tf in term_freqs:
        for term in tf:
            doc_freq[term] = doc_freq.get(term, 0) + 1
    return Bm25Index(
        term_freqs=term_freqs,
        doc_freq=doc_freq,
        doc_lens=doc_lens,
        avg_len=sum(doc_lens) / len(doc_lens),
        k1=k1,
        b=b,
    )


def idf(index: Bm25Index, term: str) -> float:
    df = index.doc_freq.get(term, 0)
    return math.log(1.0 + (index.n_docs - df + 0.5) / (df + 0.5))


def bm25_score(index: Bm25Index, query_tokens: Sequence[str], candidate_index: int) -> float:
    """Okapi BM25 score of one candidate; query tokens count multiplicity."""
    tf = index.term_freqs[candidate_index]
    length_norm = index.k1 * (
        1.0 - index.b + index.b * index.doc_lens[candidate_index] / index.avg_len
    )
    score = 0.0
    for term in query_tokens:
        f = tf.get(term, 0)
        if f == 0:
            continue
        score += idf(index, term) * (f * (index.k1 + 1.0)) / (f + length_norm)
    return score


def score_all(index: Bm25Index, query_tokens: Sequence[str]) -> list[float]:
    return [bm25_score(index, query_tokens, i) for i in range(index.n_docs)]


def rank_bm25(
    example: Example,
    corpus: Corpus,
    query_mode: str,
    window_tokens: int = DEFAULT_WINDOW_TOKENS,
    k1: float = DEFAULT_K1,
    b: float = DEFAULT_B,
) -> Prediction:
    """Rank one example with BM25 against the source title or link context.

    When every candidate scores zero (no lexical overlap at all) the lead
    candidate is predicted instead of an arbitrary tie-break.
    """
    if query_mode not in ("title", "context"):
        raise ValueError(f"unknown BM25 query mode {query_mode!r}")
    source = corpus.get(example.link.source_id)
    if source is None:
        raise LookupError(
            f"source article {example.link.source_id!r} not in corpus "
            f"(needed for BM25-{query_mode} on example {example.example_id})"
        )
    target = corpus.get(example.link.target_id)
    if target is None:
        raise LookupError(f"target article {example.link.target_id!r} not in corpus")
    if query_mode == "title":
        query = tokenize(source.title)
    else:
        query = tokenize(link_context(source, example.link, window_tokens))
    texts = [target.text[c.span[0] : c.span[1]] for c in example.candidates]
    index = build_index(texts, k1=k1, b=b)
    scores = score_all(index, query)
    if all(s == 0.0 for s in scores):
        lead = next(c.index for c in example.candidates if c.is_lead)
        return Prediction(example.example_id, lead, tuple(scores))
    return prediction_from_scores(example.example_id, scores)
