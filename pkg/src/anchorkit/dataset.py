"""Dataset construction: target filtering, link extraction, dedup,
trivial filtering, section-to-paragraph label expansion, and splitting.

The pipeline is a pure function of the corpus: identical input bytes
produce byte-identical dataset files. Each stage reports its counts in a
:class:`BuildReport` funnel.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

from .corpus import (
    Article,
    CandidateAnchor,
    Corpus,
    EmptyCandidatesError,
    Link,
    candidate_anchors,
    is_trivial_heading_path,
    section_chains,
)
from .text import normalize_match_text, tokenize

logger = logging.getLogger(__name__)

MIN_TOKENS = 500
MIN_SECTIONS = 5
MIN_INLINKS = 25
MAX_INLINKS = 5000
MAX_LINK_CHAR_FRACTION = 0.5

SPLITS = ("train", "dev", "test", "eval_only")

REJECT_REASONS = (
    "minimal_prose",
    "link_dense",
    "too_short",
    "too_few_sections",
    "too_few_inlinks",
    "too_many_inlinks",
)


class DataError(ValueError):
    """Dataset file or example fails its schema or invariants."""


class EmptyDatasetError(DataError):
    """The pipeline produced no examples."""


@dataclass(frozen=True)
class FilterDecision:
    article_id: str
    accepted: bool
    reason: str | None = None


@dataclass(frozen=True)
class Example:
    example_id: str
    link: Link
    candidates: tuple[CandidateAnchor, ...]
    relevant: frozenset[int]
    split: str
    relevant_by_annotator: tuple[frozenset[int], ...] | None = None

    def validate(self) -> None:
        if not self.candidates:
            raise DataError(f"example {self.example_id}: empty candidate list")
        if not self.relevant:
            raise DataError(f"example {self.example_id}: empty relevant set")
        if any(not (0 <= i < len(self.candidates)) for i in self.relevant):
            raise DataError(f"example {self.example_id}: relevant index out of range")
        if self.split not in SPLITS:
            raise DataError(f"example {self.example_id}: unknown split {self.split!r}")

    def acceptance_set(self) -> frozenset[int]:
        """Indices accepted as correct: union over all label sources."""
        accepted = set(self.relevant)
        for labels in self.relevant_by_annotator or ():
            accepted.update(labels)
        return frozenset(accepted)


@dataclass
class Dataset:
    name: str
    examples: list[Example] = field(default_factory=list)

    def split_examples(self, split: str | None) -> list[Example]:
        if split is None or split == "all":
            return list(self.examples)
        return [ex for ex in self.examples if ex.split == split]


@dataclass
class BuildReport:
    """Per-stage funnel counts for one dataset build."""

    n_articles: int = 0
    n_valid_targets: int = 0
    reject_reason_counts: dict[str, int] = field(default_factory=dict)
    n_links: int = 0
    n_anchored_links: int = 0
    n_extracted: int = 0
    n_fragment_unresolved: int = 0
    n_after_dedup: int = 0
    n_duplicates_removed: int = 0
    n_after_trivial: int = 0
    n_trivial_removed: int = 0
    n_dropped_empty_section: int = 0
    n_examples: int = 0
    split_counts: dict[str, int] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "n_articles": self.n_articles,
            "n_valid_targets": self.n_valid_targets,
            "reject_reason_counts": dict(sorted(self.reject_reason_counts.items())),
            "n_links": self.n_links,
            "n_anchored_links": self.n_anchored_links,
            "n_extracted": self.n_extracted,
            "n_fragment_unresolved": self.n_fragment_unresolved,
            "n_after_dedup": self.n_after_dedup,
            "n_duplicates_removed": self.n_duplicates_removed,
            "n_after_trivial": self.n_after_trivial,
            "n_trivial_removed": self.n_trivial_removed,
            "n_dropped_empty_section": self.n_dropped_empty_section,
            "n_examples": self.n_examples,
            "split_counts": dict(sorted(self.split_counts.items())),
        }


# ---------------------------------------------------------------------------
# Stage 0: target filtering
# ---------------------------------------------------------------------------


def is_valid_target(article: Article) -> FilterDecision:
    """Decide whether an article is a refinement-worthy link target.

    Checks run in a fixed order and the first failure names the reason,
    so a rejection always has exactly one cause.
    """

    def reject(reason: str) -> FilterDecision:
        return FilterDecision(article.id, accepted=False, reason=reason)

    if article.title.startswith("List of") or article.title.lower().endswith("(disambiguation)"):
        return reject("minimal_prose")
    link_chars = sum(e - b for (b, e) in (l.span for l in article.links))
    if len(article.text) > 0 and link_chars / len(article.text) > MAX_LINK_CHAR_FRACTION:
        return reject("link_dense")
    if len(tokenize(article.text)) < MIN_TOKENS:
        return reject("too_short")
    n_sections = sum(1 for s in article.sections if not is_trivial_heading_path(s.heading_path))
    if n_sections < MIN_SECTIONS:
        return reject("too_few_sections")
    if article.inlink_count < MIN_INLINKS:
        return reject("too_few_inlinks")
    if article.inlink_count > MAX_INLINKS:
        return reject("too_many_inlinks")
    return FilterDecision(article.id, accepted=True)


def resolve_fragment_section(target: Article, fragment: str) -> int | None:
    """First section whose normalized heading equals the fragment."""
    wanted = normalize_match_text(fragment)
    for i, sec in enumerate(target.sections):
        if normalize_match_text(sec.heading) == wanted:
            return i
    return None


# ---------------------------------------------------------------------------
# Stage 1-3: extraction, dedup, trivial filtering
# ---------------------------------------------------------------------------


def extract_anchored_links(
    corpus: Corpus, decisions: dict[str, FilterDecision]
) -> tuple[list[Link], int]:
    """Anchored links into valid targets whose fragment names a section.

    Returns the retained links in canonical (source_id, span) order plus
    the count of links dropped because their fragment matched no section
    heading of an otherwise valid target.
    """
    anchored = [link for a in corpus for link in a.links if link.target_fragment]
    anchored.sort(key=lambda l: (l.source_id, l.span))
    retained: list[Link] = []
    unresolved = 0
    for link in anchored:
        decision = decisions.get(link.target_id)
        if decision is None or not decision.accepted:
            continue
        if resolve_fragment_section(corpus[link.target_id], link.target_fragment) is None:
            unresolved += 1
            logger.info(
                "dropping link %r in %s: fragment %r names no section of %s",
                link.text,
                link.source_id,
                link.target_fragment,
                link.target_id,
            )
            continue
        retained.append(link)
    return retained, unresolved


def dedup_key(link: Link) -> tuple[str, str]:
    return (normalize_match_text(link.text), link.target_id)


def deduplicate(links: list[Link]) -> list[Link]:
    """Keep the first link per (normalized text, target) key.

    "First" is under the canonical (source_id, span) order, so the result
    is deterministic regardless of input order.
    """
    ordered = sorted(links, key=lambda l: (l.source_id, l.span))
    seen: set[tuple[str, str]] = set()
    kept: list[Link] = []
    for link in ordered:
        key = dedup_key(link)
        if key in seen:
            continue
        seen.add(key)
        kept.append(link)
    return kept


def filter_trivial(links: list[Link], corpus: Corpus) -> list[Link]:
    """Drop links whose normalized text equals the linked heading."""
    kept: list[Link] = []
    for link in links:
        target = corpus[link.target_id]
        sec = resolve_fragment_section(target, link.target_fragment or "")
        if sec is not None and normalize_match_text(link.text) == normalize_match_text(
            target.sections[sec].heading
        ):
            continue
        kept.append(link)
    return kept


# ---------------------------------------------------------------------------
# Label expansion and splitting
# ---------------------------------------------------------------------------


def expand_section_labels(link: Link, target: Article) -> frozenset[int]:
    """Candidate indices covered by the link's section, subsections included.

    Empty when the linked section holds no retained paragraph (the caller
    drops such examples).
    """
    section = resolve_fragment_section(target, link.target_fragment or "")
    if section is None:
        raise DataError(
            f"fragment {link.target_fragment!r} names no section of {target.id!r}"
        )
    chains = section_chains(target)
    para_section = {p.span: p.section_index for p in target.paragraphs}
    relevant: set[int] = set()
    for cand in candidate_anchors(target):
        sec_idx = para_section[cand.span]
        if sec_idx is not None and section in chains[sec_idx]:
            relevant.add(cand.index)
    return frozenset(relevant)


def make_example_id(source_id: str, span: tuple[int, int], target_id: str) -> str:
    """Stable 128-bit hex id of (source, link span, target)."""
    payload = "\x00".join((source_id, str(span[0]), str(span[1]), target_id))
    return hashlib.blake2b(payload.encode("utf-8"), digest_size=16).hexdigest()


def assign_split(example_id: str) -> str:
    """Deterministic 80/10/10 bucket from a stable hash of the id."""
    digest = hashlib.blake2b(example_id.encode("utf-8"), digest_size=8).digest()
    bucket = int.from_bytes(digest, "big") % 100
    if bucket < 80:
        return "train"
    if bucket < 90:
        return "dev"
    return "test"


# ---------------------------------------------------------------------------
# The whole pipeline
# ---------------------------------------------------------------------------


def build_dataset(corpus: Corpus, name: str = "dataset") -> tuple[Dataset, BuildReport]:
    """Run the full construction pipeline over a parsed corpus."""
    report = BuildReport()
    report.n_articles = len(corpus)
    report.n_links = sum(len(a.links) for a in corpus)
    report.n_anchored_links = sum(
        1 for a in corpus for link in a.links if link.target_fragment
    )

    decisions = {a.id: is_valid_target(a) for a in corpus}
    report.n_valid_targets = sum(1 for d in decisions.values() if d.accepted)
    reasons: dict[str, int] = {}
    for d in decisions.values():
        if not d.accepted:
            reasons[d.reason] = reasons.get(d.reason, 0) + 1
    report.reject_reason_counts = reasons

    links, unresolved = extract_anchored_links(corpus, decisions)
    report.n_extracted = len(links)
    report.n_fragment_unresolved = unresolved

    deduped = deduplicate(links)
    report.n_after_dedup = len(deduped)
    report.n_duplicates_removed = len(links) - len(deduped)

    nontrivial = filter_trivial(deduped, corpus)
    report.n_after_trivial = len(nontrivial)
    report.n_trivial_removed = len(deduped) - len(nontrivial)

    examples: list[Example] = []
    for link in nontrivial:
        target = corpus[link.target_id]
        try:
            relevant = expand_section_labels(link, target)
        except EmptyCandidatesError:
            relevant = frozenset()
        if not relevant:
            report.n_dropped_empty_section += 1
            logger.info(
                "dropping link %r in %s: section %r has no retained paragraphs",
                link.text,
                link.source_id,
                link.target_fragment,
            )
            continue
        example_id = make_example_id(link.source_id, link.span, link.target_id)
        example = Example(
            example_id=example_id,
            link=link,
            candidates=candidate_anchors(target),
            relevant=relevant,
            split=assign_split(example_id),
        )
        example.validate()
        examples.append(example)

    if not examples:
        raise EmptyDatasetError("pipeline produced no examples")
    report.n_examples = len(examples)
    counts: dict[str, int] = {}
    for ex in examples:
        counts[ex.split] = counts.get(ex.split, 0) + 1
    report.split_counts = counts
    return Dataset(name=name, examples=examples), report


# ---------------------------------------------------------------------------
# Dataset file IO
# ---------------------------------------------------------------------------


def example_to_json(example: Example) -> dict:
    row = {
        "example_id": example.example_id,
        "source_id": example.link.source_id,
        "link_span": list(example.link.span),
        "link_text": example.link.text,
        "target_id": example.link.target_id,
        "candidates": [
            {
                "index": c.index,
                "span": list(c.span),
                "heading_path": list(c.heading_path),
                "is_lead": c.is_lead,
            }
            for c in example.candidates
        ],
        "relevant": sorted(example.relevant),
        "split": example.split,
    }
    if example.relevant_by_annotator is not None:
        row["relevant_by_annotator"] = [sorted(s) for s in example.relevant_by_annotator]
    return row


def example_from_json(row: dict) -> Example:
    try:
        candidates = tuple(
            CandidateAnchor(
                index=c["index"],
                span=(c["span"][0], c["span"][1]),
                heading_path=tuple(c["heading_path"]),
                is_lead=bool(c["is_lead"]),
            )
            for c in row["candidates"]
        )
        by_annotator = None
        if "relevant_by_annotator" in row:
            by_annotator = tuple(frozenset(s) for s in row["relevant_by_annotator"])
        if "relevant" in row:
            relevant = frozenset(row["relevant"])
        elif by_annotator:
            relevant = frozenset().union(*by_annotator)
        else:
            raise DataError(f"example {row.get('example_id')}: no relevance labels")
        example = Example(
            example_id=row["example_id"],
            link=Link(
                source_id=row["source_id"],
                span=(row["link_span"][0], row["link_span"][1]),
                text=row["link_text"],
                target_id=row["target_id"],
                target_fragment=None,
            ),
            candidates=candidates,
            relevant=relevant,
            split=row["split"],
            relevant_by_annotator=by_annotator,
        )
    except (KeyError, IndexError, TypeError) as exc:
        raise DataError(f"malformed example row: {exc!r}") from exc
    if [c.index for c in candidates] != list(range(len(candidates))):
        raise DataError(f"example {example.example_id}: candidate indices not 0..n-1")
    example.validate()
    return example


def write_dataset(path: str | Path, dataset: Dataset) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for example in dataset.examples:
            fh.write(json.dumps(example_to_json(example), ensure_ascii=False, sort_keys=True))
            fh.write("\n")


def read_dataset(path: str | Path, name: str | None = None) -> Dataset:
    examples: list[Example] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}: line {lineno}: invalid JSON ({exc.msg})") from exc
            example = example_from_json(row)
            if example.example_id in seen:
                raise DataError(f"{path}: line {lineno}: duplicate example {example.example_id}")
            seen.add(example.example_id)
            examples.append(example)
    return Dataset(name=name or Path(path).stem, examples=examples)


def write_report(path: str | Path, report: BuildReport) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report.to_json(), fh, indent=2, sort_keys=True)
        fh.write("\n")
