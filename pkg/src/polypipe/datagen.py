"""Deterministic synthetic corpora for training and exercising pipelines.

Three invented languages with different scripts, word orders, and
morphology, a name-bearing corpus for entity tagging, and a large mixed
"pretraining" text for building the shared subword vocabulary and encoder.
Everything is a pure function of its seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from polypipe import conllu

_LATIN_SYLLABLES = ["ba", "ce", "di", "fo", "gu", "ha", "je", "ki", "lo",
                    "mu", "na", "pe", "qui", "ro", "su", "ta", "ve", "wi",
                    "xa", "zo", "bra", "cle", "dri", "flo", "gru"]
_CYRILLIC_SYLLABLES = ["ба", "ве", "ги", "до", "жу", "за", "ке", "ли", "мо",
                       "ну", "па", "ре", "си", "то", "ул", "фа", "че", "ши",
                       "юр", "ян"]
_GREEK_SYLLABLES = ["βα", "γε", "δι", "ζο", "θυ", "κα", "λε", "μι", "νο",
                    "πυ", "ρα", "σε", "τι", "φο", "χυ", "ψα", "ωνε"]


def _invent_words(rng, syllables, count, min_syl=2, max_syl=4) -> list[str]:
    words = set()
    while len(words) < count:
        n = int(rng.integers(min_syl, max_syl + 1))
        idx = rng.integers(0, len(syllables), size=n)
        words.add("".join(syllables[i] for i in idx))
    return sorted(words)


# ---------------------------------------------------------------------------
# toy treebank languages


@dataclass
class Lexicon:
    name: str
    order: str                       # "svo" | "sov" | "vso"
    dets: list[tuple[str, str]]      # (form, definiteness value)
    nouns: list[tuple[str, str, str]]    # (sing, plur, lemma)
    verbs: list[tuple[str, str, str, str]]   # (pres, past, inf, lemma)
    adjs: list[str]
    advs: list[str]
    xpos: dict[str, str] | None      # upos -> xpos tag, None = no XPOS layer
    mwt: dict[str, tuple[tuple[str, str], tuple[str, str]]] | None
    # surface -> ((aux form, aux lemma), (part form, part lemma))


TOYEN = Lexicon(
    name="toyen", order="svo",
    dets=[("the", "Def"), ("a", "Ind")],
    nouns=[("cat", "cats", "cat"), ("dog", "dogs", "dog"),
           ("bird", "birds", "bird"), ("fish", "fishes", "fish"),
           ("horse", "horses", "horse"), ("tree", "trees", "tree"),
           ("river", "rivers", "river"), ("stone", "stones", "stone"),
           ("house", "houses", "house"), ("cloud", "clouds", "cloud")],
    verbs=[("sees", "saw", "see", "see"), ("chases", "chased", "chase", "chase"),
           ("finds", "found", "find", "find"), ("likes", "liked", "like", "like"),
           ("takes", "took", "take", "take")],
    adjs=["big", "small", "red", "old", "quick"],
    advs=["quickly", "slowly", "today"],
    xpos={"DET": "DT", "NOUN": "NN", "NOUN_P": "NNS", "VERB": "VBZ",
          "VERB_PAST": "VBD", "VERB_INF": "VB", "ADJ": "JJ", "ADV": "RB",
          "PUNCT": ".", "AUX": "MD", "PART": "RB"},
    mwt={"cannot": (("can", "can"), ("not", "not"))},
)

ALIA = Lexicon(
    name="alia", order="svo",
    dets=[("lo", "Def"), ("un", "Ind")],
    nouns=[(s, s + "t", s) for s in
           ["mira", "talu", "pesa", "rona", "vilu", "kasa", "domi", "fera"]],
    verbs=[(s + "en", s + "is", s, s) for s in
           ["kanta", "vola", "dorma", "skriba", "lekta"]],
    adjs=["bela", "gran", "rua"],
    advs=["rapide", "lente"],
    xpos={"DET": "D", "NOUN": "N", "NOUN_P": "Np", "VERB": "Vp",
          "VERB_PAST": "Vd", "VERB_INF": "Vi", "ADJ": "A", "ADV": "R",
          "PUNCT": "P", "AUX": "X", "PART": "T"},
    mwt=None,
)

BORUN = Lexicon(
    name="borun", order="sov",
    dets=[("та", "Def"), ("на", "Ind")],
    nouns=[(s, s + "и", s) for s in
           ["бако", "мору", "виде", "гора", "желу", "краи", "луна", "сова"]],
    verbs=[(s + "ет", s + "ал", s, s) for s in
           ["бежа", "гледа", "носи", "пева"]],
    adjs=["добра", "мала", "тиха"],
    advs=["брзо", "тихо"],
    xpos=None,
    mwt=None,
)

CELIM = Lexicon(
    name="celim", order="vso",
    dets=[("ο", "Def"), ("ενα", "Ind")],
    nouns=[(s, s + "ι", s) for s in
           ["γατο", "σκυλο", "δεντρο", "ποταμο", "λιθο", "νεφο"]],
    verbs=[(s + "ει", s + "ησε", s, s) for s in
           ["βλεπ", "κυνηγ", "βρισκ", "αγαπ"]],
    adjs=["μεγαλο", "μικρο"],
    advs=["γρηγορα"],
    xpos={"DET": "d", "NOUN": "n", "NOUN_P": "np", "VERB": "v3",
          "VERB_PAST": "v3p", "VERB_INF": "vi", "ADJ": "a", "ADV": "r",
          "PUNCT": "p", "AUX": "x", "PART": "t"},
    mwt=None,
)

LEXICONS = {lex.name: lex for lex in (TOYEN, ALIA, BORUN, CELIM)}


def _xpos_of(lex: Lexicon, key: str) -> str:
    if lex.xpos is None:
        return conllu.EMPTY
    return lex.xpos[key]


def _noun_phrase(lex: Lexicon, rng, wid: int, head_of_noun: int,
                 noun_deprel: str):
    """Rows for [det] [adj?] noun; the noun's head is patched by the caller
    (via its returned index)."""
    rows = []
    det_form, definite = lex.dets[int(rng.integers(0, len(lex.dets)))]
    plural = bool(rng.integers(0, 2))
    sing, plur, lemma = lex.nouns[int(rng.integers(0, len(lex.nouns)))]
    use_adj = bool(rng.integers(0, 3) == 0)
    n_words = 2 + use_adj
    noun_id = wid + n_words - 1
    rows.append(conllu.WordRow(
        id=wid, form=det_form, lemma=det_form, upos="DET",
        xpos=_xpos_of(lex, "DET"), feats=f"Definite={definite}",
        head=noun_id, deprel="det"))
    if use_adj:
        adj = lex.adjs[int(rng.integers(0, len(lex.adjs)))]
        rows.append(conllu.WordRow(
            id=wid + 1, form=adj, lemma=adj, upos="ADJ",
            xpos=_xpos_of(lex, "ADJ"), feats="Degree=Pos",
            head=noun_id, deprel="amod"))
    rows.append(conllu.WordRow(
        id=noun_id, form=plur if plural else sing, lemma=lemma, upos="NOUN",
        xpos=_xpos_of(lex, "NOUN_P" if plural else "NOUN"),
        feats=f"Number={'Plur' if plural else 'Sing'}",
        head=head_of_noun, deprel=noun_deprel))
    return rows, noun_id


def toy_sentence(lex: Lexicon, rng) -> conllu.Sentence:
    """One sentence with deterministic heads from the language's grammar."""
    pres, past, inf, vlemma = lex.verbs[int(rng.integers(0, len(lex.verbs)))]
    use_mwt = bool(lex.mwt) and bool(rng.integers(0, 4) == 0)
    use_past = not use_mwt and bool(rng.integers(0, 2))
    use_adv = bool(rng.integers(0, 3) == 0)

    sections: list[list[conllu.WordRow]] = []
    subj_rows, _ = _noun_phrase(lex, rng, 0, 0, "nsubj")
    obj_rows, _ = _noun_phrase(lex, rng, 0, 0, "obj")

    verb_rows = []
    mwt_surface = None
    if use_mwt:
        mwt_surface = sorted(lex.mwt)[int(rng.integers(0, len(lex.mwt)))]
        (aux_form, aux_lemma), (part_form, part_lemma) = lex.mwt[mwt_surface]
        verb_rows.append(conllu.WordRow(
            id=0, form=aux_form, lemma=aux_lemma, upos="AUX",
            xpos=_xpos_of(lex, "AUX"), feats=conllu.EMPTY, head=0,
            deprel="aux"))
        verb_rows.append(conllu.WordRow(
            id=0, form=part_form, lemma=part_lemma, upos="PART",
            xpos=_xpos_of(lex, "PART"), feats="Polarity=Neg", head=0,
            deprel="advmod"))
        verb_rows.append(conllu.WordRow(
            id=0, form=inf, lemma=vlemma, upos="VERB",
            xpos=_xpos_of(lex, "VERB_INF"), feats="VerbForm=Inf",
            head=0, deprel="root"))
    else:
        verb_rows.append(conllu.WordRow(
            id=0, form=past if use_past else pres, lemma=vlemma, upos="VERB",
            xpos=_xpos_of(lex, "VERB_PAST" if use_past else "VERB"),
            feats="Mood=Ind|Tense=" + ("Past" if use_past else "Pres"),
            head=0, deprel="root"))

    adv_rows = []
    if use_adv:
        adv = lex.advs[int(rng.integers(0, len(lex.advs)))]
        adv_rows.append(conllu.WordRow(
            id=0, form=adv, lemma=adv, upos="ADV", xpos=_xpos_of(lex, "ADV"),
            feats=conllu.EMPTY, head=0, deprel="advmod"))

    if lex.order == "svo":
        sections = [subj_rows, verb_rows, obj_rows, adv_rows]
    elif lex.order == "sov":
        sections = [subj_rows, obj_rows, adv_rows, verb_rows]
    else:  # vso
        sections = [verb_rows, subj_rows, obj_rows, adv_rows]

    # Renumber and wire heads: nouns and the verb's modifiers point at slots
    # known only after ordering.
    sent = conllu.Sentence()
    flat: list[conllu.WordRow] = [r for sec in sections for r in sec]
    verb_pos = next(i for i, r in enumerate(flat) if r.deprel == "root") + 1
    noun_positions = {}
    for sec_name, sec in (("subj", subj_rows), ("obj", obj_rows)):
        for r in sec:
            if r.upos == "NOUN":
                noun_positions[sec_name] = next(
                    i for i, fr in enumerate(flat, start=1) if fr is r)
    for i, row in enumerate(flat, start=1):
        row.id = i
    for sec_name, sec in (("subj", subj_rows), ("obj", obj_rows)):
        noun_id = noun_positions[sec_name]
        for r in sec:
            if r.upos == "NOUN":
                r.head = verb_pos
            else:
                r.head = noun_id
    for r in verb_rows + adv_rows:
        r.head = 0 if r.deprel == "root" else verb_pos

    punct = conllu.WordRow(
        id=len(flat) + 1, form=".", lemma=".", upos="PUNCT",
        xpos=_xpos_of(lex, "PUNCT"), feats=conllu.EMPTY, head=verb_pos,
        deprel="punct")
    flat[-1].misc = "SpaceAfter=No"
    flat.append(punct)
    sent.rows = flat
    if mwt_surface is not None:
        aux_id = next(r.id for r in flat if r.deprel == "aux")
        sent.mwt_ranges.append(conllu.MwtRange(aux_id, aux_id + 1, mwt_surface))
    return sent


def toy_treebank(lang: str, n_sentences: int, seed: int) -> list[conllu.Sentence]:
    lex = LEXICONS[lang]
    rng = np.random.default_rng(seed)
    sentences = []
    for i in range(n_sentences):
        sent = toy_sentence(lex, rng)
        sent.comments = [f"# sent_id = {lang}-{i + 1}"]
        sentences.append(sent)
    return sentences


# ---------------------------------------------------------------------------
# toy NER corpus (BIO tags on output; training converts to BIOES)

_FIRST = ["John", "Mary", "Omar", "Lena", "Paulo", "Aiko", "Ivan", "Sara"]
_LAST = ["Smith", "Haddad", "Novak", "Tanaka", "Costa", "Weber"]
_CITY = ["Berlin", "Lagos", "Osaka", "Quito", "Tromso", "Adelaide"]
_ORG_A = ["Acme", "Globex", "Initech", "Umbra", "Vandel"]
_ORG_B = ["Corp", "Labs", "Group"]


def toy_ner_corpus(n_sentences: int, seed: int) -> list[tuple[list[str], list[str]]]:
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n_sentences):
        person = [_FIRST[int(rng.integers(0, len(_FIRST)))],
                  _LAST[int(rng.integers(0, len(_LAST)))]]
        city = _CITY[int(rng.integers(0, len(_CITY)))]
        org = [_ORG_A[int(rng.integers(0, len(_ORG_A)))],
               _ORG_B[int(rng.integers(0, len(_ORG_B)))]]
        template = int(rng.integers(0, 3))
        if template == 0:
            tokens = person + ["visited", city, "."]
            tags = ["B-PER", "I-PER", "O", "B-LOC", "O"]
        elif template == 1:
            tokens = org + ["hired", *person, "."]
            tags = ["B-ORG", "I-ORG", "O", "B-PER", "I-PER", "O"]
        else:
            tokens = person + ["works", "at", *org, "in", city, "."]
            tags = ["B-PER", "I-PER", "O", "O", "B-ORG", "I-ORG", "O",
                    "B-LOC", "O"]
        out.append((tokens, tags))
    return out


# ---------------------------------------------------------------------------
# pretraining corpus


def pretraining_corpus(seed: int = 0, n_tokens: int = 60000) -> str:
    """Mixed-script text rich enough to fill a large subword vocabulary.

    Invented Zipf-distributed words from three scripts, plus every surface
    form of the toy lexicons and name lists so downstream treebanks never
    fall outside the alphabet.  The inventory is deliberately larger than
    any default vocabulary target, so rare words stay split into genuine
    subword pieces.
    """
    rng = np.random.default_rng(seed)
    inventory: list[str] = []
    inventory += _invent_words(rng, _LATIN_SYLLABLES, 5800)
    inventory += _invent_words(rng, _CYRILLIC_SYLLABLES, 4600)
    inventory += _invent_words(rng, _GREEK_SYLLABLES, 3600)
    for lex in LEXICONS.values():
        inventory += [d for d, _ in lex.dets]
        inventory += [f for group in lex.nouns for f in group[:2]]
        inventory += [f for group in lex.verbs for f in group[:3]]
        inventory += lex.adjs + lex.advs
        if lex.mwt:
            inventory += list(lex.mwt)
            inventory += [w for pair in lex.mwt.values() for w, _ in pair]
    inventory += _FIRST + _LAST + _CITY + _ORG_A + _ORG_B
    inventory = sorted(set(inventory))
    n = len(inventory)
    ranks = np.arange(1, n + 1, dtype=float)
    weights = 1.0 / ranks ** 0.85
    weights /= weights.sum()
    order = rng.permutation(n)

    words = []
    sentence_len = 0
    target = int(rng.integers(5, 13))
    for idx in rng.choice(n, size=n_tokens, p=weights):
        words.append(inventory[order[idx]])
        sentence_len += 1
        if sentence_len >= target:
            words[-1] = words[-1] + (rng.choice([".", "!", "?", ","]))
            sentence_len = 0
            target = int(rng.integers(5, 13))
    # Guarantee every inventory word (hence every character) appears.
    words.extend(inventory)
    return " ".join(words)


def write_treebank(path, sentences) -> None:
    conllu.write_conllu_file(path, sentences)
