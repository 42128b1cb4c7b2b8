"""Hierarchical annotated documents and their JSON/CoNLL-U forms.

The JSON layout is text → sentences → tokens → (optionally) expanded words,
with the fixed key names ``text, id, span, tokens, expanded, upos, xpos,
feats, head, deprel, lemma, ner``.  A multi-word token carries an "i-j"
range id and its syntactic words under ``expanded``; a plain token carries
its word annotations inline.  Conversion to CoNLL-U keeps every
CoNLL-U-expressible field: spacing is encoded as SpaceAfter=No and the
per-token NER tag travels in MISC.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from polypipe import conllu

EMPTY = conllu.EMPTY


@dataclass
class Word:
    id: int
    text: str
    upos: str = EMPTY
    xpos: str = EMPTY
    feats: str = EMPTY
    head: int = 0
    deprel: str = EMPTY
    lemma: str = EMPTY


@dataclass
class Token:
    id: str                      # "3" or a range "3-4"
    text: str
    span: tuple[int, int]
    ner: str | None = None
    words: list[Word] = field(default_factory=list)

    @property
    def is_mwt(self) -> bool:
        return "-" in self.id


@dataclass
class SentenceAnn:
    id: int
    text: str
    span: tuple[int, int]
    tokens: list[Token]


@dataclass
class Document:
    text: str
    lang: str
    sentences: list[SentenceAnn] = field(default_factory=list)
    notices: list[str] = field(default_factory=list)

    def n_tokens(self) -> int:
        return sum(len(s.tokens) for s in self.sentences)


def _word_dict(word: Word) -> dict:
    return {"id": word.id, "text": word.text, "upos": word.upos,
            "xpos": word.xpos, "feats": word.feats, "head": word.head,
            "deprel": word.deprel, "lemma": word.lemma}


def to_json_dict(doc: Document) -> dict:
    sentences = []
    for sent in doc.sentences:
        tokens = []
        for tok in sent.tokens:
            entry: dict = {"id": tok.id, "text": tok.text,
                           "span": list(tok.span)}
            if tok.ner is not None:
                entry["ner"] = tok.ner
            if tok.is_mwt:
                entry["expanded"] = [_word_dict(w) for w in tok.words]
            else:
                entry.update({k: v for k, v in _word_dict(tok.words[0]).items()
                              if k not in ("id", "text")})
            tokens.append(entry)
        sentences.append({"id": sent.id, "text": sent.text,
                          "span": list(sent.span), "tokens": tokens})
    out = {"text": doc.text, "lang": doc.lang, "sentences": sentences}
    if doc.notices:
        out["notices"] = list(doc.notices)
    return out


def from_json_dict(data: dict) -> Document:
    doc = Document(data["text"], data.get("lang", ""),
                   notices=list(data.get("notices", [])))
    for sd in data["sentences"]:
        tokens = []
        for td in sd["tokens"]:
            tok = Token(str(td["id"]), td["text"], tuple(td["span"]),
                        td.get("ner"))
            if "expanded" in td:
                tok.words = [Word(w["id"], w["text"], w["upos"], w["xpos"],
                                  w["feats"], w["head"], w["deprel"],
                                  w["lemma"]) for w in td["expanded"]]
            else:
                wid = int(td["id"])
                tok.words = [Word(wid, td["text"], td.get("upos", EMPTY),
                                  td.get("xpos", EMPTY), td.get("feats", EMPTY),
                                  td.get("head", 0), td.get("deprel", EMPTY),
                                  td.get("lemma", EMPTY))]
            tokens.append(tok)
        doc.sentences.append(SentenceAnn(sd["id"], sd["text"],
                                         tuple(sd["span"]), tokens))
    return doc


def _misc_for(doc_text: str, tok: Token, is_last_in_doc: bool,
              include_ner: bool) -> str:
    items = []
    if include_ner and tok.ner is not None:
        items.append(f"NER={tok.ner}")
    end = tok.span[1]
    if not is_last_in_doc and end < len(doc_text) and not doc_text[end].isspace():
        items.append("SpaceAfter=No")
    return "|".join(items) if items else EMPTY


def to_conllu(doc: Document) -> list[conllu.Sentence]:
    """Lossless conversion for all CoNLL-U-expressible fields."""
    out = []
    all_tokens = [t for s in doc.sentences for t in s.tokens]
    last_token = all_tokens[-1] if all_tokens else None
    for sent in doc.sentences:
        cs = conllu.Sentence(comments=[f"# sent_id = {sent.id}",
                                       f"# text = {sent.text}"])
        for tok in sent.tokens:
            misc = _misc_for(doc.text, tok, tok is last_token, True)
            if tok.is_mwt:
                cs.mwt_ranges.append(conllu.MwtRange(
                    tok.words[0].id, tok.words[-1].id, tok.text, misc))
                word_misc = EMPTY
            else:
                word_misc = misc
            for word in tok.words:
                cs.rows.append(conllu.WordRow(
                    id=word.id, form=word.text, lemma=word.lemma,
                    upos=word.upos, xpos=word.xpos, feats=word.feats,
                    head=word.head, deprel=word.deprel, deps=EMPTY,
                    misc=word_misc))
        out.append(cs)
    return out


def from_conllu(sentences: list[conllu.Sentence], lang: str = "") -> Document:
    """Rebuild a document (text reconstructed from SpaceAfter) from rows."""
    recon = conllu.reconstruct_document(sentences)
    doc = Document(recon.text, lang)
    for i, (sent, spans) in enumerate(zip(sentences, recon.sentences), start=1):
        rows_by_id = {r.id: r for r in sent.rows}
        tokens = []
        for span in spans:
            ids = span.word_ids
            first = rows_by_id[ids[0]]
            misc = first.misc
            if span.is_mwt:
                rng = next(r for r in sent.mwt_ranges if r.start == ids[0])
                misc = rng.misc
            ner = None
            for item in misc.split("|"):
                if item.startswith("NER="):
                    ner = item[4:]
            tok_id = (f"{ids[0]}-{ids[-1]}" if span.is_mwt else str(ids[0]))
            tok = Token(tok_id, span.form, (span.start, span.end), ner)
            tok.words = [Word(rows_by_id[wid].id, rows_by_id[wid].form,
                              rows_by_id[wid].upos, rows_by_id[wid].xpos,
                              rows_by_id[wid].feats, rows_by_id[wid].head,
                              rows_by_id[wid].deprel, rows_by_id[wid].lemma)
                         for wid in ids]
            tokens.append(tok)
        start, end = spans[0].start, spans[-1].end
        doc.sentences.append(SentenceAnn(i, recon.text[start:end],
                                         (start, end), tokens))
    return doc
