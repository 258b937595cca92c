"""Wiki-lite corpus model: articles, sections, paragraphs, links.

The corpus format is UTF-8 JSON Lines, one record per article:
``{"id": str, "title": str, "body": str}`` where ``body`` uses wiki-lite
markup:

* blank lines separate paragraphs,
* a line starting with ``=`` is a heading: ``== History ==`` (level =
  length of the ``=`` run; both runs must match),
* links are ``[[Target]]``, ``[[Target|text]]`` or
  ``[[Target#Heading|text]]``; the target names another article id.

Parsing strips the markup and records every span (sections, paragraphs,
links) as character offsets into the resulting plain text, so the slice
at a link's span is exactly its display text. Heading lines keep their
heading text in the plain text; a paragraph never contains a heading
line. Articles are immutable once parsed.
"""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Iterator

from .text import normalize_match_text, token_spans

# Headings whose subtree never contributes candidate anchors and never
# counts toward the multi-facetedness of a target article.
TRIVIAL_SECTIONS = frozenset(
    {
        "references",
        "see also",
        "external links",
        "notes",
        "further reading",
        "bibliography",
        "sources",
    }
)

_HEADING_RE = re.compile(r"^(=+)[ \t]*(.*?)[ \t]*(=+)[ \t]*$")


class ParseError(ValueError):
    """Malformed corpus input (bad markup, bad record, duplicate id)."""


class EmptyCandidatesError(ValueError):
    """Target article has no retained paragraphs to anchor into."""


@dataclass(frozen=True)
class Section:
    heading: str
    level: int
    heading_path: tuple[str, ...]
    span: tuple[int, int]


@dataclass(frozen=True)
class ParagraphSpan:
    span: tuple[int, int]
    # Index into Article.sections; None for the lead region before the
    # first heading.
    section_index: int | None


@dataclass(frozen=True)
class Link:
    source_id: str
    span: tuple[int, int]
    text: str
    target_id: str
    target_fragment: str | None


@dataclass(frozen=True)
class CandidateAnchor:
    index: int
    span: tuple[int, int]
    heading_path: tuple[str, ...]
    is_lead: bool


@dataclass(frozen=True)
class Article:
    id: str
    title: str
    text: str
    sections: tuple[Section, ...]
    paragraphs: tuple[ParagraphSpan, ...]
    links: tuple[Link, ...]
    inlink_count: int = 0


def _parse_link_markup(line: str, pos: int, lineno: int) -> tuple[int, str, str | None, str]:
    """Parse one ``[[...]]`` starting at ``pos``.

    Returns (end position after ``]]``, target, fragment, display text).
    """
    close = line.find("]]", pos + 2)
    inner = line[pos + 2 : close] if close != -1 else ""
    if close == -1 or "[[" in inner:
        raise ParseError(f"line {lineno}: unclosed link markup")
    target_spec, pipe, display = inner.partition("|")
    if not pipe:
        display = inner
    target, hash_sep, fragment = target_spec.partition("#")
    target = target.strip()
    if not target:
        raise ParseError(f"line {lineno}: link with empty target")
    if not display.strip():
        raise ParseError(f"line {lineno}: link with empty display text")
    frag = fragment.strip() if hash_sep else ""
    return close + 2, target, frag or None, display


def _strip_line(line: str, lineno: int) -> tuple[str, list[tuple[int, int, str, str | None]]]:
    """Strip link markup from one line.

    Returns the plain line plus per-link (start, end, target, fragment)
    with offsets local to the plain line.
    """
    parts: list[str] = []
    links: list[tuple[int, int, str, str | None]] = []
    pos = 0
    out_len = 0
    while True:
        open_at = line.find("[[", pos)
        if open_at == -1:
            parts.append(line[pos:])
            break
        literal = line[pos:open_at]
        parts.append(literal)
        out_len += len(literal)
        pos, target, fragment, display = _parse_link_markup(line, open_at, lineno)
        links.append((out_len, out_len + len(display), target, fragment))
        parts.append(display)
        out_len += len(display)
    return "".join(parts), links


def parse_article(record: dict) -> Article:
    """Parse one corpus record into an :class:`Article` with offsets.

    Deterministic: identical records parse to equal articles. Raises
    :class:`ParseError` on malformed headings, unclosed or empty link
    markup, or a structurally invalid record.
    """
    for key in ("id", "title", "body"):
        if not isinstance(record.get(key), str):
            raise ParseError(f"record is missing string field {key!r}")
    article_id = record["id"]
    if not article_id:
        raise ParseError("record has empty id")

    body = record["body"].replace("\r\n", "\n").replace("\r", "\n")
    plain_lines: list[str] = []
    # (lineno, kind, level, local links); kind in {"blank", "heading", "text"}
    line_info: list[tuple[int, str, int]] = []
    line_links: list[list[tuple[int, int, str, str | None]]] = []
    for lineno, raw in enumerate(body.split("\n"), start=1):
        if raw.startswith("="):
            m = _HEADING_RE.match(raw)
            if not m or len(m.group(1)) != len(m.group(3)) or not m.group(2):
                raise ParseError(f"line {lineno}: malformed heading line")
            plain, links = _strip_line(m.group(2), lineno)
            if not plain.strip():
                raise ParseError(f"line {lineno}: malformed heading line")
            plain_lines.append(plain)
            line_info.append((lineno, "heading", len(m.group(1))))
            line_links.append(links)
        else:
            plain, links = _strip_line(raw, lineno)
            kind = "text" if plain.strip() else "blank"
            plain_lines.append(plain)
            line_info.append((lineno, kind, 0))
            line_links.append(links)

    text = "\n".join(plain_lines)

    # Absolute start offset of each plain line.
    line_starts: list[int] = []
    offset = 0
    for plain in plain_lines:
        line_starts.append(offset)
        offset += len(plain) + 1

    # Sections: a heading opens a section reaching to the next heading of
    # the same or shallower level (or end of text).
    heading_rows = [i for i, info in enumerate(line_info) if info[1] == "heading"]
    sections: list[Section] = []
    stack: list[tuple[int, str]] = []
    for pos, row in enumerate(heading_rows):
        level = line_info[row][2]
        heading = plain_lines[row]
        while stack and stack[-1][0] >= level:
            stack.pop()
        stack.append((level, heading))
        end = len(text)
        for later in heading_rows[pos + 1 :]:
            if line_info[later][2] <= level:
                end = line_starts[later]
                break
        sections.append(
            Section(
                heading=heading,
                level=level,
                heading_path=tuple(h for _, h in stack),
                span=(line_starts[row], end),
            )
        )

    # Paragraphs: maximal runs of consecutive text lines.
    paragraphs: list[ParagraphSpan] = []
    run_start: int | None = None
    for i, info in enumerate(line_info + [(0, "blank", 0)]):
        if info[1] == "text":
            if run_start is None:
                run_start = i
        elif run_start is not None:
            begin = line_starts[run_start]
            end = line_starts[i - 1] + len(plain_lines[i - 1])
            paragraphs.append(ParagraphSpan((begin, end), _innermost_section(sections, begin)))
            run_start = None

    links: list[Link] = []
    for i, local in enumerate(line_links):
        base = line_starts[i]
        for start, end, target, fragment in local:
            links.append(
                Link(
                    source_id=article_id,
                    span=(base + start, base + end),
                    text=text[base + start : base + end],
                    target_id=target,
                    target_fragment=fragment,
                )
            )

    return Article(
        id=article_id,
        title=record["title"],
        text=text,
        sections=tuple(sections),
        paragraphs=tuple(paragraphs),
        links=tuple(links),
    )


def _innermost_section(sections: list[Section], offset: int) -> int | None:
    best = None
    for i, sec in enumerate(sections):
        if sec.span[0] <= offset < sec.span[1]:
            if best is None or sec.span[0] >= sections[best].span[0]:
                best = i
    return best


def section_of_offset(article: Article, offset: int) -> int | None:
    """Index of the innermost section containing ``offset`` (None = lead)."""
    return _innermost_section(list(article.sections), offset)


def section_chains(article: Article) -> list[tuple[int, ...]]:
    """Per section, the ancestor indices from outermost to itself."""
    chains: list[tuple[int, ...]] = []
    stack: list[int] = []
    for i, sec in enumerate(article.sections):
        while stack and article.sections[stack[-1]].level >= sec.level:
            stack.pop()
        stack.append(i)
        chains.append(tuple(stack))
    return chains


def is_trivial_heading_path(heading_path: Iterable[str]) -> bool:
    return any(normalize_match_text(h) in TRIVIAL_SECTIONS for h in heading_path)


def candidate_anchors(target: Article) -> tuple[CandidateAnchor, ...]:
    """Candidate anchors of ``target``: its retained paragraphs, in order.

    Paragraphs under a trivial section (References, See also, ...) are
    excluded; indices are assigned after exclusion. The first retained
    paragraph is the lead. Raises :class:`EmptyCandidatesError` when
    nothing is retained.
    """
    candidates: list[CandidateAnchor] = []
    for para in target.paragraphs:
        if para.section_index is None:
            path: tuple[str, ...] = ()
        else:
            path = target.sections[para.section_index].heading_path
        if is_trivial_heading_path(path):
            continue
        candidates.append(
            CandidateAnchor(
                index=len(candidates),
                span=para.span,
                heading_path=path,
                is_lead=len(candidates) == 0,
            )
        )
    if not candidates:
        raise EmptyCandidatesError(f"article {target.id!r} has no retained paragraphs")
    return tuple(candidates)


def lead_paragraph_text(article: Article) -> str:
    """Text of the article's lead paragraph, or "" if it has none."""
    try:
        lead = candidate_anchors(article)[0]
    except EmptyCandidatesError:
        return ""
    return article.text[lead.span[0] : lead.span[1]]


def link_context(source: Article, link: Link, window_tokens: int) -> str:
    """The link text plus up to ``window_tokens`` tokens on each side.

    The window is clipped at the article bounds and never crosses them.
    """
    if window_tokens <= 0:
        raise ValueError("window_tokens must be positive")
    b, e = link.span
    if link.source_id != source.id or not (0 <= b < e <= len(source.text)):
        raise ValueError(f"link span {link.span} does not belong to article {source.id!r}")
    if source.text[b:e] != link.text:
        raise ValueError(f"link text does not match its span in article {source.id!r}")
    spans = token_spans(source.text)
    left = [s for s in spans if s[0] < b]
    right = [s for s in spans if s[1] > e]
    start = min(left[-window_tokens:][0][0], b) if left else b
    end = max(right[:window_tokens][-1][1], e) if right else e
    return source.text[start:end]


# ---------------------------------------------------------------------------
# Corpus container and IO
# ---------------------------------------------------------------------------


class Corpus:
    """Immutable mapping of article id -> :class:`Article`.

    In-link counts are computed over this corpus only: every parsed link
    occurrence targeting an id increments that article's count.
    """

    def __init__(self, articles: Iterable[Article]):
        by_id: dict[str, Article] = {}
        for article in articles:
            if article.id in by_id:
                raise ParseError(f"duplicate article id {article.id!r}")
            by_id[article.id] = article
        inlinks = Counter(link.target_id for a in by_id.values() for link in a.links)
        self._articles = {
            aid: replace(a, inlink_count=inlinks.get(aid, 0)) for aid, a in by_id.items()
        }

    def __getitem__(self, article_id: str) -> Article:
        return self._articles[article_id]

    def get(self, article_id: str) -> Article | None:
        return self._articles.get(article_id)

    def __contains__(self, article_id: str) -> bool:
        return article_id in self._articles

    def __len__(self) -> int:
        return len(self._articles)

    def __iter__(self) -> Iterator[Article]:
        return iter(self._articles.values())


def load_corpus(path: str | Path) -> Corpus:
    """Load a JSON Lines corpus file; errors name the offending line."""
    articles: list[Article] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}: line {lineno}: invalid JSON ({exc.msg})") from exc
            try:
                article = parse_article(record)
            except ParseError as exc:
                raise ParseError(f"{path}: record at line {lineno}: {exc}") from exc
            if article.id in seen:
                raise ParseError(f"{path}: line {lineno}: duplicate article id {article.id!r}")
            seen.add(article.id)
            articles.append(article)
    return Corpus(articles)


# ---------------------------------------------------------------------------
# Debug serializer (golden tests)
# ---------------------------------------------------------------------------


def article_to_debug_json(article: Article) -> dict:
    return {
        "id": article.id,
        "title": article.title,
        "text": article.text,
        "sections": [
            {
                "heading": s.heading,
                "level": s.level,
                "heading_path": list(s.heading_path),
                "span": list(s.span),
            }
            for s in article.sections
        ],
        "paragraphs": [
            {"span": list(p.span), "section_index": p.section_index}
            for p in article.paragraphs
        ],
        "links": [
            {
                "span": list(l.span),
                "text": l.text,
                "target_id": l.target_id,
                "target_fragment": l.target_fragment,
            }
            for l in article.links
        ],
        "inlink_count": article.inlink_count,
    }


def article_from_debug_json(data: dict) -> Article:
    return Article(
        id=data["id"],
        title=data["title"],
        text=data["text"],
        sections=tuple(
            Section(
                heading=s["heading"],
                level=s["level"],
                heading_path=tuple(s["heading_path"]),
                span=(s["span"][0], s["span"][1]),
            )
            for s in data["sections"]
        ),
        paragraphs=tuple(
            ParagraphSpan((p["span"][0], p["span"][1]), p["section_index"])
            for p in data["paragraphs"]
        ),
        links=tuple(
            Link(
                source_id=data["id"],
                span=(l["span"][0], l["span"][1]),
                text=l["text"],
                target_id=l["target_id"],
                target_fragment=l["target_fragment"],
            )
            for l in data["links"]
        ),
        inlink_count=data["inlink_count"],
    )
