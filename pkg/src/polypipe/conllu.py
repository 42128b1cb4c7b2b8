"""Reading, validating, and writing CoNLL-U treebanks.

The format is the standard 10-column tab-separated layout: "#" comment lines,
one word per row, multi-word tokens as "i-j" range lines placed before their
first covered word, sentences separated by blank lines, "_" for empty fields.
Parsing and serialization are exact inverses up to trailing-whitespace
normalization, so treebanks survive a load/save cycle byte-for-byte.

Empty nodes (ids like "3.1") are skipped on read and never written.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

logger = logging.getLogger(__name__)

EMPTY = "_"


class ConlluError(ValueError):
    """Malformed CoNLL-U content.  ``line`` is the 1-based input line."""

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


@dataclass
class WordRow:
    """One syntactic word: a single 10-column row."""

    id: int
    form: str
    lemma: str = EMPTY
    upos: str = EMPTY
    xpos: str = EMPTY
    feats: str = EMPTY
    head: int = 0
    deprel: str = EMPTY
    deps: str = EMPTY
    misc: str = EMPTY


@dataclass
class MwtRange:
    """A surface token covering words ``start..end`` (inclusive)."""

    start: int
    end: int
    form: str
    misc: str = EMPTY


@dataclass
class Sentence:
    comments: list[str] = field(default_factory=list)
    rows: list[WordRow] = field(default_factory=list)
    mwt_ranges: list[MwtRange] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.rows)


def feats_string(pairs) -> str:
    """Join Name=Value pairs in canonical order (case-insensitive by name)."""
    items = sorted(pairs.items() if hasattr(pairs, "items") else pairs,
                   key=lambda kv: (kv[0].lower(), kv[0], kv[1]))
    if not items:
        return EMPTY
    return "|".join(f"{k}={v}" for k, v in items)


def parse_feats(feats: str) -> list[tuple[str, str]]:
    if feats == EMPTY or not feats:
        return []
    out = []
    for item in feats.split("|"):
        name, _, value = item.partition("=")
        out.append((name, value))
    return out


def _is_empty_node_id(col: str) -> bool:
    left, dot, right = col.partition(".")
    return bool(dot) and left.isdigit() and right.isdigit()


def parse_conllu(text: str) -> list[Sentence]:
    """Parse CoNLL-U text into sentences.

    Raises ConlluError (with a line number) on structural problems: wrong
    column count, non-integer ids, non-consecutive ids, heads outside 0..N,
    and malformed or overlapping multi-word token ranges.
    """
    if text.startswith("﻿"):
        text = text[1:]
    sentences: list[Sentence] = []
    current = Sentence()
    row_lines: list[int] = []
    range_lines: list[int] = []

    def finish(at_line: int) -> None:
        nonlocal current, row_lines, range_lines
        if not current.comments and not current.rows:
            return
        if not current.rows:
            raise ConlluError("sentence has comments but no word rows", at_line)
        n = len(current.rows)
        for row, ln in zip(current.rows, row_lines):
            if not 0 <= row.head <= n:
                raise ConlluError(
                    f"HEAD {row.head} out of range 0..{n}", ln)
        prev_end = 0
        for rng, ln in zip(current.mwt_ranges, range_lines):
            if rng.end > n:
                raise ConlluError(
                    f"token range {rng.start}-{rng.end} covers missing word ids", ln)
            if rng.start <= prev_end:
                raise ConlluError(
                    f"token range {rng.start}-{rng.end} overlaps a previous range", ln)
            prev_end = rng.end
        sentences.append(current)
        current = Sentence()
        row_lines = []
        range_lines = []

    for lineno, line in enumerate(text.split("\n"), start=1):
        line = line.rstrip("\r")
        if line == "":
            finish(lineno)
            continue
        if line.startswith("#"):
            if current.rows:
                raise ConlluError("comment line inside a sentence", lineno)
            current.comments.append(line)
            continue
        cols = line.split("\t")
        if len(cols) != 10:
            raise ConlluError(
                f"expected 10 tab-separated fields, got {len(cols)}", lineno)
        if any(c == "" for c in cols):
            raise ConlluError("empty field (use '_')", lineno)
        idcol = cols[0]
        if _is_empty_node_id(idcol):
            logger.debug("skipping empty node %s at line %d", idcol, lineno)
            continue
        if "-" in idcol:
            left, _, right = idcol.partition("-")
            if not (left.isdigit() and right.isdigit()):
                raise ConlluError(f"cannot parse token range id {idcol!r}", lineno)
            start, end = int(left), int(right)
            if start > end:
                raise ConlluError(f"token range {idcol} has start > end", lineno)
            if any(c != EMPTY for c in cols[2:9]):
                raise ConlluError(
                    "token range line must leave columns 3-9 empty", lineno)
            if start != len(current.rows) + 1:
                raise ConlluError(
                    f"token range {idcol} does not start at the next word id", lineno)
            current.mwt_ranges.append(MwtRange(start, end, cols[1], cols[9]))
            range_lines.append(lineno)
            continue
        if not idcol.isdigit():
            raise ConlluError(f"cannot parse word id {idcol!r}", lineno)
        wid = int(idcol)
        if wid != len(current.rows) + 1:
            raise ConlluError(
                f"word id {wid} is not consecutive (expected {len(current.rows) + 1})",
                lineno)
        head_col = cols[6]
        if not (head_col.isdigit() or (head_col.startswith("-") and head_col[1:].isdigit())):
            raise ConlluError(f"cannot parse HEAD {head_col!r}", lineno)
        head = int(head_col)
        if head < 0:
            raise ConlluError("HEAD cannot be negative", lineno)
        current.rows.append(WordRow(
            id=wid, form=cols[1], lemma=cols[2], upos=cols[3], xpos=cols[4],
            feats=cols[5], head=head, deprel=cols[7], deps=cols[8], misc=cols[9]))
        row_lines.append(lineno)
    finish(len(text.split("\n")) + 1)
    return sentences


def load_conllu_file(path) -> list[Sentence]:
    with open(path, encoding="utf-8") as f:
        return parse_conllu(f.read())


def _check_field(value: str, what: str) -> None:
    if value == "":
        raise ConlluError(f"cannot serialize: empty {what} (use '_')")
    if "\t" in value or "\n" in value or "\r" in value:
        raise ConlluError(f"cannot serialize: {what} contains a tab or newline")


def serialize_conllu(sentences: list[Sentence]) -> str:
    """Render sentences back to CoNLL-U text.

    Refuses (naming the violated invariant) if ids are not consecutive, a
    head is out of range, a field contains a tab/newline, or token ranges
    are malformed.  Output ends with a blank line after the last sentence.
    """
    out: list[str] = []
    for sent in sentences:
        for comment in sent.comments:
            _check_field(comment, "comment")
            out.append(comment)
        n = len(sent.rows)
        ranges = {r.start: r for r in sent.mwt_ranges}
        prev_end = 0
        for rng in sorted(sent.mwt_ranges, key=lambda r: r.start):
            if not 1 <= rng.start <= rng.end <= n:
                raise ConlluError(
                    f"cannot serialize: token range {rng.start}-{rng.end} "
                    f"outside word ids 1..{n}")
            if rng.start <= prev_end:
                raise ConlluError("cannot serialize: overlapping token ranges")
            prev_end = rng.end
        for i, row in enumerate(sent.rows, start=1):
            if row.id != i:
                raise ConlluError(
                    f"cannot serialize: word ids not consecutive at {row.id}")
            if not 0 <= row.head <= n:
                raise ConlluError(
                    f"cannot serialize: HEAD {row.head} out of range 0..{n}")
            if i in ranges:
                rng = ranges[i]
                _check_field(rng.form, "token range form")
                _check_field(rng.misc, "token range misc")
                out.append("\t".join([
                    f"{rng.start}-{rng.end}", rng.form, EMPTY, EMPTY, EMPTY,
                    EMPTY, EMPTY, EMPTY, EMPTY, rng.misc]))
            fields = [str(row.id), row.form, row.lemma, row.upos, row.xpos,
                      row.feats, str(row.head), row.deprel, row.deps, row.misc]
            for value, what in zip(fields[1:], ("form", "lemma", "upos", "xpos",
                                                "feats", "head", "deprel",
                                                "deps", "misc")):
                _check_field(value, what)
            out.append("\t".join(fields))
        out.append("")
    return "\n".join(out) + "\n" if out else ""


def write_conllu_file(path, sentences: list[Sentence]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(serialize_conllu(sentences))


def canonicalize(text: str) -> str:
    """Normalize only line endings, trailing whitespace, and final newline."""
    text = text.replace("\r\n", "\n").replace("\r", "\n")
    lines = [ln.rstrip() for ln in text.split("\n")]
    while lines and lines[-1] == "":
        lines.pop()
    if not lines:
        return ""
    return "\n".join(lines) + "\n\n"


def validate_tree(sentence: Sentence, allow_multiple_roots: bool = False) -> list[str]:
    """Check that HEAD values form a single tree rooted at node 0.

    Returns a list of human-readable violations; empty means well-formed.
    With ``allow_multiple_roots`` several words may attach to 0 (some gold
    treebanks contain this), but cycles and rootless graphs still count.
    """
    violations: list[str] = []
    n = len(sentence.rows)
    heads = [row.head for row in sentence.rows]
    for i, h in enumerate(heads, start=1):
        if not 0 <= h <= n:
            violations.append(f"word {i} has HEAD {h} outside 0..{n}")
            return violations
    root_children = [i for i, h in enumerate(heads, start=1) if h == 0]
    if not root_children:
        violations.append("no node attached to root")
    elif len(root_children) > 1 and not allow_multiple_roots:
        violations.append(
            "multiple root attachments: words "
            + ", ".join(str(i) for i in root_children))
    # Nodes not reachable from the root necessarily sit on or under a cycle.
    children: dict[int, list[int]] = {}
    for i, h in enumerate(heads, start=1):
        children.setdefault(h, []).append(i)
    reachable = set()
    stack = list(children.get(0, []))
    while stack:
        node = stack.pop()
        if node in reachable:
            continue
        reachable.add(node)
        stack.extend(children.get(node, []))
    unreachable = [i for i in range(1, n + 1) if i not in reachable]
    reported: set[int] = set()
    for start in unreachable:
        if start in reported:
            continue
        seen: dict[int, int] = {}
        node, step = start, 0
        while node not in seen and 1 <= node <= n and node not in reachable:
            seen[node] = step
            node, step = heads[node - 1], step + 1
        if node in seen:
            cycle = sorted(k for k, v in seen.items() if v >= seen[node])
            reported.update(cycle)
            violations.append(
                "cycle involving words " + ", ".join(str(i) for i in cycle))
        else:
            reported.update(seen)
    return violations


@dataclass
class TokenSpan:
    """A surface token located in reconstructed document text."""

    start: int
    end: int
    form: str
    is_mwt: bool = False
    word_ids: tuple[int, ...] = ()


@dataclass
class ReconstructedDocument:
    """Raw text recovered from a treebank, with token/sentence locations."""

    text: str
    sentences: list[list[TokenSpan]]

    def sentence_span(self, i: int) -> tuple[int, int]:
        toks = self.sentences[i]
        return toks[0].start, toks[-1].end


def _space_after(misc: str) -> bool:
    return "SpaceAfter=No" not in misc.split("|")


def sentence_tokens(sentence: Sentence) -> list[tuple[str, str, bool, tuple[int, ...]]]:
    """Surface tokens of a sentence: (form, misc, is_mwt, covered word ids)."""
    ranges = {r.start: r for r in sentence.mwt_ranges}
    tokens = []
    i = 0
    while i < len(sentence.rows):
        row = sentence.rows[i]
        rng = ranges.get(row.id)
        if rng is not None:
            covered = tuple(range(rng.start, rng.end + 1))
            tokens.append((rng.form, rng.misc, True, covered))
            i += rng.end - rng.start + 1
        else:
            tokens.append((row.form, row.misc, False, (row.id,)))
            i += 1
    return tokens


def reconstruct_document(sentences: list[Sentence]) -> ReconstructedDocument:
    """Rebuild raw text from token surfaces.

    Tokens are joined by single spaces except where MISC carries
    SpaceAfter=No; sentences are joined by the same rule.  Used when a
    treebank ships without its source text.
    """
    parts: list[str] = []
    spans: list[list[TokenSpan]] = []
    pos = 0
    pending_space = False
    for sent in sentences:
        sent_spans: list[TokenSpan] = []
        for form, misc, is_mwt, word_ids in sentence_tokens(sent):
            if pending_space:
                parts.append(" ")
                pos += 1
            parts.append(form)
            sent_spans.append(TokenSpan(pos, pos + len(form), form, is_mwt, word_ids))
            pos += len(form)
            pending_space = _space_after(misc)
        spans.append(sent_spans)
    return ReconstructedDocument("".join(parts), spans)
