"""Segmentation-aware evaluation of system treebanks against gold.

Both sides are reduced to the character stream obtained by concatenating
surface token forms (all Unicode spaces removed), so tokens, sentences, and
words become character spans that can be compared even when segmentations
disagree.  Words inside multi-word tokens are aligned by longest common
subsequence of their lowercased forms within the smallest enclosing
multi-word span; all other words align when their spans are identical.

Aligned-word metrics follow shared-task conventions: morphological features
are restricted to the universal inventory and re-sorted, dependency
relations are compared without language-specific subtypes, and a gold lemma
of "_" accepts any system lemma.  F1 is 2·correct/(gold+system) with 0/0
defined as 0.  Reported percentages are rounded half-up to two decimals.
"""

from __future__ import annotations

import json
import unicodedata
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal

from polypipe import conllu

UNIVERSAL_FEATURES = {
    "PronType", "NumType", "Poss", "Reflex", "Foreign", "Abbr", "Gender",
    "Animacy", "Number", "Case", "Definite", "Degree", "VerbForm", "Mood",
    "Tense", "Aspect", "Voice", "Evident", "Polarity", "Person", "Polite",
}

METRICS = ("Tokens", "Sentences", "Words", "UPOS", "XPOS", "UFeats",
           "Lemmas", "UAS", "LAS")


class ScorerError(ValueError):
    pass


@dataclass
class _Span:
    start: int
    end: int


class _Word:
    __slots__ = ("span", "form", "upos", "xpos", "feats", "lemma", "deprel",
                 "head", "is_multiword", "parent")

    def __init__(self, span: _Span, row: conllu.WordRow, is_multiword: bool):
        self.span = span
        self.form = row.form
        self.upos = row.upos
        self.xpos = row.xpos
        self.feats = "|".join(sorted(
            f for f in row.feats.split("|")
            if f.split("=", 1)[0] in UNIVERSAL_FEATURES))
        self.lemma = row.lemma
        self.deprel = row.deprel.split(":")[0]
        self.head = row.head
        self.is_multiword = is_multiword
        self.parent: "_Word | None" = None


class _Side:
    """Character stream plus token/word/sentence spans for one treebank."""

    def __init__(self, sentences: list[conllu.Sentence]):
        self.characters: list[str] = []
        self.tokens: list[_Span] = []
        self.words: list[_Word] = []
        self.sentences: list[_Span] = []
        pos = 0
        for sent in sentences:
            sent_start = pos
            first_word = len(self.words)
            ranges = {r.start: r for r in sent.mwt_ranges}
            covered_until = 0
            for row in sent.rows:
                rng = ranges.get(row.id)
                if rng is not None:
                    form = _strip_spaces(rng.form)
                    if not form:
                        raise ScorerError("empty token form")
                    token = _Span(pos, pos + len(form))
                    self.characters.extend(form)
                    self.tokens.append(token)
                    pos = token.end
                    covered_until = rng.end
                    self.words.append(_Word(token, row, True))
                elif row.id <= covered_until:
                    self.words.append(_Word(self.tokens[-1], row, True))
                else:
                    form = _strip_spaces(row.form)
                    if not form:
                        raise ScorerError("empty word form")
                    token = _Span(pos, pos + len(form))
                    self.characters.extend(form)
                    self.tokens.append(token)
                    pos = token.end
                    self.words.append(_Word(token, row, False))
            for row, word in zip(sent.rows, self.words[first_word:]):
                if row.head > 0:
                    word.parent = self.words[first_word + row.head - 1]
            self.sentences.append(_Span(sent_start, pos))


def _strip_spaces(form: str) -> str:
    return "".join(c for c in form if unicodedata.category(c) != "Zs")


@dataclass
class MetricScore:
    correct: float
    gold_total: int
    system_total: int
    aligned_total: int | None = None

    @property
    def precision(self) -> float:
        return self.correct / self.system_total if self.system_total else 0.0

    @property
    def recall(self) -> float:
        return self.correct / self.gold_total if self.gold_total else 0.0

    @property
    def f1(self) -> float:
        denom = self.system_total + self.gold_total
        return 2.0 * self.correct / denom if denom else 0.0


def pct(value: float) -> str:
    """Percentage with two decimals, rounded half-up."""
    return str(Decimal(value * 100.0).quantize(Decimal("0.01"),
                                               rounding=ROUND_HALF_UP))


@dataclass
class ScoreReport:
    scores: dict[str, MetricScore]
    ner: MetricScore | None = None
    extras: dict = field(default_factory=dict)

    def f1_pct(self, metric: str) -> str:
        return pct(self.scores[metric].f1)

    def format_table(self) -> str:
        lines = [f"{'Metric':<10} {'Precision':>10} {'Recall':>10} {'F1':>10}",
                 "-" * 43]
        rows = list(self.scores.items())
        if self.ner is not None:
            rows.append(("NER", self.ner))
        for name, s in rows:
            lines.append(f"{name:<10} {pct(s.precision):>10} "
                         f"{pct(s.recall):>10} {pct(s.f1):>10}")
        return "\n".join(lines)

    def to_json(self) -> str:
        out = {}
        for name, s in self.scores.items():
            out[name] = {"precision": float(pct(s.precision)),
                         "recall": float(pct(s.recall)),
                         "f1": float(pct(s.f1)),
                         "correct": s.correct,
                         "gold": s.gold_total, "system": s.system_total}
        if self.ner is not None:
            s = self.ner
            out["NER"] = {"precision": float(pct(s.precision)),
                          "recall": float(pct(s.recall)),
                          "f1": float(pct(s.f1)),
                          "correct": s.correct,
                          "gold": s.gold_total, "system": s.system_total}
        out.update(self.extras)
        return json.dumps(out, indent=2, sort_keys=True)


def _spans_score(gold: list[_Span], system: list[_Span]) -> MetricScore:
    correct, gi, si = 0, 0, 0
    while gi < len(gold) and si < len(system):
        if system[si].start < gold[gi].start:
            si += 1
        elif gold[gi].start < system[si].start:
            gi += 1
        else:
            correct += gold[gi].end == system[si].end
            si += 1
            gi += 1
    return MetricScore(correct, len(gold), len(system))


@dataclass
class WordAlignment:
    gold_words: list[_Word]
    system_words: list[_Word]
    matched: list[tuple[_Word, _Word]] = field(default_factory=list)
    system_to_gold: dict[int, _Word] = field(default_factory=dict)

    def append(self, gold_word: _Word, system_word: _Word) -> None:
        self.matched.append((gold_word, system_word))
        self.system_to_gold[id(system_word)] = gold_word


def _beyond_end(words: list[_Word], i: int, end: int) -> bool:
    if i >= len(words):
        return True
    if words[i].is_multiword:
        return words[i].span.start >= end
    return words[i].span.end > end


def _find_multiword_span(gold: list[_Word], system: list[_Word],
                         gi: int, si: int) -> tuple[int, int, int, int]:
    # The smallest character span such that every multi-word token on either
    # side lies fully inside it.
    if gold[gi].is_multiword:
        end = gold[gi].span.end
        if not system[si].is_multiword and system[si].span.start < gold[gi].span.start:
            si += 1
    else:
        end = system[si].span.end
        if not gold[gi].is_multiword and gold[gi].span.start < system[si].span.start:
            gi += 1
    gs, ss = gi, si
    while not _beyond_end(gold, gi, end) or not _beyond_end(system, si, end):
        if gi < len(gold) and (si >= len(system)
                               or gold[gi].span.start <= system[si].span.start):
            if gold[gi].is_multiword and gold[gi].span.end > end:
                end = gold[gi].span.end
            gi += 1
        else:
            if system[si].is_multiword and system[si].span.end > end:
                end = system[si].span.end
            si += 1
    return gs, ss, gi, si


def _lcs_align(alignment: WordAlignment, gold: list[_Word],
               system: list[_Word], gs: int, gi: int, ss: int, si: int) -> None:
    ng, ns = gi - gs, si - ss
    if ng == 0 or ns == 0:
        return
    lcs = [[0] * ns for _ in range(ng)]
    for g in reversed(range(ng)):
        for s in reversed(range(ns)):
            if gold[gs + g].form.lower() == system[ss + s].form.lower():
                lcs[g][s] = 1 + (lcs[g + 1][s + 1] if g + 1 < ng and s + 1 < ns
                                 else 0)
            if g + 1 < ng:
                lcs[g][s] = max(lcs[g][s], lcs[g + 1][s])
            if s + 1 < ns:
                lcs[g][s] = max(lcs[g][s], lcs[g][s + 1])
    g = s = 0
    while g < ng and s < ns:
        if gold[gs + g].form.lower() == system[ss + s].form.lower():
            alignment.append(gold[gs + g], system[ss + s])
            g += 1
            s += 1
        elif lcs[g][s] == (lcs[g + 1][s] if g + 1 < ng else 0):
            g += 1
        else:
            s += 1


def align_words(gold: list[_Word], system: list[_Word]) -> WordAlignment:
    alignment = WordAlignment(gold, system)
    gi = si = 0
    while gi < len(gold) and si < len(system):
        if gold[gi].is_multiword or system[si].is_multiword:
            gs, ss, gi, si = _find_multiword_span(gold, system, gi, si)
            _lcs_align(alignment, gold, system, gs, gi, ss, si)
        else:
            gspan, sspan = gold[gi].span, system[si].span
            if (gspan.start, gspan.end) == (sspan.start, sspan.end):
                alignment.append(gold[gi], system[si])
                gi += 1
                si += 1
            elif gspan.start <= sspan.start:
                gi += 1
            else:
                si += 1
    return alignment


def _alignment_score(alignment: WordAlignment, key_fn=None) -> MetricScore:
    gold = len(alignment.gold_words)
    system = len(alignment.system_words)
    aligned = len(alignment.matched)
    if key_fn is None:
        return MetricScore(aligned, gold, system, aligned)
    correct = 0
    for gold_word, system_word in alignment.matched:
        gold_key = key_fn(gold_word, lambda w: w)
        system_key = key_fn(
            system_word,
            lambda w: alignment.system_to_gold.get(id(w), "<unaligned>")
            if w is not None else None)
        if gold_key == system_key:
            correct += 1
    return MetricScore(correct, gold, system, aligned)


def score(system: list[conllu.Sentence],
          gold: list[conllu.Sentence]) -> ScoreReport:
    """Full report over the nine segmentation/tagging/parsing metrics."""
    g, s = _Side(gold), _Side(system)
    if g.characters != s.characters:
        raise ScorerError(
            "system and gold token characters differ; the two sides do not "
            "annotate the same text")
    alignment = align_words(g.words, s.words)
    scores = {
        "Tokens": _spans_score(g.tokens, s.tokens),
        "Sentences": _spans_score(g.sentences, s.sentences),
        "Words": _alignment_score(alignment),
        "UPOS": _alignment_score(alignment, lambda w, _: w.upos),
        "XPOS": _alignment_score(alignment, lambda w, _: w.xpos),
        "UFeats": _alignment_score(alignment, lambda w, _: w.feats),
        "Lemmas": _alignment_score(
            alignment, lambda w, ga: w.lemma if ga(w).lemma != "_" else "_"),
        "UAS": _alignment_score(alignment, lambda w, ga: ga(w.parent)),
        "LAS": _alignment_score(
            alignment, lambda w, ga: (ga(w.parent), w.deprel)),
    }
    return ScoreReport(scores)


def score_ner(system_spans: list[list], gold_spans: list[list]) -> MetricScore:
    """Entity F1 with exact type+boundary matching, micro-averaged over
    sentences.  Inputs are per-sentence lists of EntitySpan."""
    if len(system_spans) != len(gold_spans):
        raise ScorerError("NER span lists cover different sentence counts")
    correct = 0
    n_gold = 0
    n_sys = 0
    for sys_sent, gold_sent in zip(system_spans, gold_spans):
        gold_keys = {s.key() for s in gold_sent}
        sys_keys = {s.key() for s in sys_sent}
        correct += len(gold_keys & sys_keys)
        n_gold += len(gold_keys)
        n_sys += len(sys_keys)
    return MetricScore(correct, n_gold, n_sys)
