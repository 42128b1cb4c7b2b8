"""Pipeline orchestration: package building, training modes, annotation.

A package holds one shared frozen encoder plus per-language bundles.  A
Pipeline loads the encoder once (process-wide, packages with the same
encoder checksum share the arrays), lazily loads language bundles with an
optional byte budget (least-recently-used eviction), and runs the component
sequence splitter → MWT expander → tagger/parser → lemmatizer → NER,
switching the active adapter set between components.

Training modes: "adapters" (default, per-language adapters plus task
weights), "multilingual" (one shared bundle trained on the combined data of
several treebanks), and "no_adapters" (task weights only, encoder fully
fixed, no adapter parameters at all).  Every mode leaves the encoder bytes
untouched.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from polypipe import conllu, datagen, document, ner as ner_mod, packaging
from polypipe import parserhead, scorer, seq2seq, splitter as splitter_mod
from polypipe.encoder import (
    AdapterRegistry, AdapterSet, EncoderConfig, init_adapter_set,
    init_encoder, pretrain_encoder,
)
from polypipe.neural import ParamStore
from polypipe.subword import SubwordVocab, tokenize, train_vocab

logger = logging.getLogger(__name__)

MODES = ("adapters", "multilingual", "no_adapters")
ALL_COMPONENTS = ("splitter", "mwt", "tagparse", "lemma", "ner")
MULTI = "multilingual"


class PipelineError(ValueError):
    pass


class DataError(ValueError):
    pass


@dataclass
class TrainConfig:
    vocab_size: int = 12000
    pretrain_steps: int = 150
    pretrain_seq_len: int = 126
    pretrain_batch: int = 4
    max_len: int | None = None          # chunk limit; None = encoder default
    encoder_max_len: int = 512
    adapter_bottleneck: int = 16
    lr: float = 4e-3
    splitter_epochs: int = 200
    tagparse_epochs: int = 100
    ner_epochs: int = 48
    transducer_epochs: int = 40

    def to_dict(self) -> dict:
        return asdict(self)


# ---------------------------------------------------------------------------
# package building


def build_encoder_package(out_dir, corpus_text: str, hyper: TrainConfig,
                          seed: int) -> packaging.Manifest:
    """Train the subword vocabulary and the shared encoder, freeze it, and
    write the package skeleton."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / packaging.BUNDLE_DIR).mkdir(exist_ok=True)

    vocab = train_vocab(corpus_text, hyper.vocab_size, seed)
    if len(vocab) < hyper.vocab_size:
        logger.warning("vocabulary saturated at %d pieces (target %d)",
                       len(vocab), hyper.vocab_size)
    vocab_path = out_dir / packaging.VOCAB_NAME
    vocab.save(vocab_path)

    cfg = EncoderConfig(vocab_size=len(vocab), max_len=hyper.encoder_max_len,
                        adapter_bottleneck=hyper.adapter_bottleneck,
                        trained_window=hyper.pretrain_seq_len + 2)
    base = ParamStore()
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0]))
    init_encoder(base, cfg, rng)
    corpus_seq = tokenize(vocab, corpus_text)
    pretrain_encoder(base, cfg, corpus_seq.piece_ids, hyper.pretrain_steps,
                     rng, seq_len=hyper.pretrain_seq_len,
                     batch=hyper.pretrain_batch,
                     corpus_continuations=corpus_seq.continuation_flags())
    base.freeze()

    enc_path = out_dir / packaging.ENCODER_NAME
    packaging.save_tensors(enc_path, base.state_arrays(),
                           meta={"encoder_config": cfg.to_dict()})
    manifest = packaging.Manifest(
        format_version=packaging.FORMAT_VERSION,
        encoder_file=packaging.ENCODER_NAME,
        encoder_sha256=packaging.sha256_file(enc_path),
        vocab_file=packaging.VOCAB_NAME,
        vocab_sha256=packaging.sha256_file(vocab_path),
        encoder_config=cfg.to_dict())
    manifest.save(out_dir)
    return manifest


def _load_base(package_dir, manifest: packaging.Manifest):
    enc_path = Path(package_dir) / manifest.encoder_file
    packaging.verify_file(enc_path, manifest.encoder_sha256)
    arrays, meta = packaging.load_tensors(enc_path)
    base = ParamStore()
    base.load_arrays(arrays, frozen=True)
    cfg = EncoderConfig.from_dict(meta["encoder_config"])
    vocab_path = Path(package_dir) / manifest.vocab_file
    packaging.verify_file(vocab_path, manifest.vocab_sha256)
    vocab = SubwordVocab.load(vocab_path)
    return base, cfg, vocab


# ---------------------------------------------------------------------------
# language bundle: everything one language needs beyond the encoder


@dataclass
class LangBundle:
    lang: str
    mode: str
    store: ParamStore
    components: list[str]
    adapters: dict[str, AdapterSet] = field(default_factory=dict)
    tagparse_head: parserhead.TagParseHead | None = None
    ner_head: ner_mod.NerHead | None = None
    mwt_model: seq2seq.TransducerModel | None = None
    lemma_model: seq2seq.TransducerModel | None = None
    xpos_namespaced: bool = False
    file_bytes: int = 0

    def meta(self) -> dict:
        return {
            "lang": self.lang,
            "mode": self.mode,
            "components": self.components,
            "xpos_namespaced": self.xpos_namespaced,
            "adapters": sorted(self.adapters),
            "bottleneck": next(iter(self.adapters.values())).bottleneck
            if self.adapters else None,
            "tagparse": None if self.tagparse_head is None
            else self.tagparse_head.meta(),
            "ner": None if self.ner_head is None else self.ner_head.meta(),
            "mwt": None if self.mwt_model is None else self.mwt_model.meta(),
            "lemma": None if self.lemma_model is None
            else self.lemma_model.meta(),
        }

    @classmethod
    def from_file(cls, path, enc_cfg: EncoderConfig,
                  expected_encoder_sha: str) -> "LangBundle":
        arrays, meta = packaging.load_tensors(path)
        if meta["encoder_sha256"] != expected_encoder_sha:
            raise packaging.ChecksumError(
                f"bundle {Path(path).name} was trained against a different "
                f"encoder (checksum mismatch)")
        store = ParamStore()
        store.load_arrays(arrays)
        bundle = cls(meta["lang"], meta["mode"], store, meta["components"],
                     xpos_namespaced=meta["xpos_namespaced"],
                     file_bytes=Path(path).stat().st_size)
        for comp in meta["adapters"]:
            bundle.adapters[comp] = AdapterSet(
                meta["lang"], comp, meta["bottleneck"], store, f"ad.{comp}")
        if meta["tagparse"] is not None:
            bundle.tagparse_head = parserhead.TagParseHead.from_meta(
                store, meta["tagparse"])
        if meta["ner"] is not None:
            bundle.ner_head = ner_mod.NerHead.from_meta(store, meta["ner"])
        if meta["mwt"] is not None:
            bundle.mwt_model = seq2seq.TransducerModel.from_meta(
                store, "mwt", meta["mwt"])
        if meta["lemma"] is not None:
            bundle.lemma_model = seq2seq.TransducerModel.from_meta(
                store, "lemma", meta["lemma"])
        return bundle

    def save(self, path, encoder_sha: str) -> int:
        meta = self.meta()
        meta["encoder_sha256"] = encoder_sha
        packaging.save_tensors(path, self.store.state_arrays(), meta)
        self.file_bytes = Path(path).stat().st_size
        return self.file_bytes


# ---------------------------------------------------------------------------
# training


def _rng_for(seed: int, *key: int):
    return np.random.default_rng(np.random.SeedSequence([seed, *key]))


def _mwt_pairs(sentences) -> list[tuple[str, None, str]]:
    pairs = []
    for sent in sentences:
        rows = {r.id: r for r in sent.rows}
        for rng_ in sent.mwt_ranges:
            words = [rows[i].form for i in range(rng_.start, rng_.end + 1)]
            pairs.append((rng_.form, None, seq2seq.SEPARATOR.join(words)))
    return pairs


def _lemma_pairs(sentences) -> list[tuple[str, str, str]]:
    pairs = []
    for sent in sentences:
        for row in sent.rows:
            if row.lemma != conllu.EMPTY:
                pairs.append((row.form, row.upos, row.lemma))
    return pairs


def train_language_bundle(base: ParamStore, enc_cfg: EncoderConfig,
                          vocab: SubwordVocab, lang: str, mode: str,
                          sentences: list[conllu.Sentence],
                          components: list[str], hyper: TrainConfig,
                          seed: int,
                          ner_corpus=None,
                          xpos_namespaced: bool = False) -> tuple[LangBundle, dict]:
    """Train the requested components for one language (or one combined
    multilingual dataset).  Only the bundle store receives updates."""
    bundle = LangBundle(lang, mode, ParamStore(), [],
                        xpos_namespaced=xpos_namespaced)
    store = bundle.store
    log: dict = {"lang": lang, "mode": mode}
    use_adapters = mode != "no_adapters"
    max_len = hyper.max_len or enc_cfg.trained_window

    def adapter_for(component: str) -> AdapterSet | None:
        if not use_adapters:
            return None
        if component not in bundle.adapters:
            rng = _rng_for(seed, 1, ALL_COMPONENTS.index(component))
            bundle.adapters[component] = init_adapter_set(
                store, enc_cfg, lang, component, rng,
                bottleneck=hyper.adapter_bottleneck)
        return bundle.adapters[component]

    if "splitter" in components:
        rng = _rng_for(seed, 2)
        splitter_mod.init_splitter_head(store, enc_cfg, rng)
        doc = conllu.reconstruct_document(sentences)
        data = splitter_mod.prepare_splitter_data(vocab, doc)
        log["splitter_boundary_mismatches"] = data.mismatches
        losses = splitter_mod.train_splitter(
            store, base, enc_cfg, adapter_for("splitter"), data,
            hyper.splitter_epochs, hyper.lr, rng, max_len)
        log["splitter_loss"] = losses[-1] if losses else None
        bundle.components.append("splitter")

    if "mwt" in components:
        pairs = _mwt_pairs(sentences)
        if pairs:
            rng = _rng_for(seed, 3)
            cfg = seq2seq.TransducerConfig(epochs=hyper.transducer_epochs)
            bundle.mwt_model = seq2seq.train_transducer(
                pairs, "mwt", rng, cfg, store, "mwt")
            bundle.components.append("mwt")
            log["mwt_pairs"] = len(pairs)
        else:
            log["mwt_pairs"] = 0

    if "tagparse" in components:
        rng = _rng_for(seed, 4)
        upos, xpos, ufeats, deprel = parserhead.build_tag_vocabs(sentences)
        head = parserhead.init_tagparse_head(
            store, enc_cfg, parserhead.HeadConfig(), upos, xpos, ufeats,
            deprel, rng)
        bundle.tagparse_head = head
        examples = parserhead.make_examples(sentences, vocab, head)
        losses = parserhead.train_tagparse(
            store, base, enc_cfg, adapter_for("tagparse"), examples, head,
            hyper.tagparse_epochs, hyper.lr, rng, max_len)
        log["tagparse_loss"] = losses[-1] if losses else None
        bundle.components.append("tagparse")

    if "lemma" in components:
        pairs = _lemma_pairs(sentences)
        if pairs:
            rng = _rng_for(seed, 5)
            cfg = seq2seq.TransducerConfig(epochs=hyper.transducer_epochs)
            bundle.lemma_model = seq2seq.train_transducer(
                pairs, "lemma", rng, cfg, store, "lemma")
            bundle.components.append("lemma")
            log["lemma_pairs"] = len(pairs)

    if "ner" in components:
        if not ner_corpus:
            raise DataError("NER training requested but no NER corpus given")
        rng = _rng_for(seed, 6)
        types = ner_mod.collect_types(ner_corpus)
        head = ner_mod.init_ner_head(store, enc_cfg,
                                     ner_mod.BioesLabels(types), rng)
        bundle.ner_head = head
        losses = ner_mod.train_ner(
            store, base, enc_cfg, adapter_for("ner"), vocab, ner_corpus,
            head, hyper.ner_epochs, hyper.lr, rng, max_len)
        log["ner_loss"] = losses[-1] if losses else None
        bundle.components.append("ner")

    return bundle, log


def _load_treebank(path) -> list[conllu.Sentence]:
    sentences = conllu.load_conllu_file(path)
    for i, sent in enumerate(sentences):
        violations = conllu.validate_tree(sent, allow_multiple_roots=True)
        if violations:
            raise DataError(
                f"{path}: sentence {i + 1} is not a valid tree: "
                + "; ".join(violations))
        strict = conllu.validate_tree(sent, allow_multiple_roots=False)
        if strict:
            logger.warning("%s: sentence %d: %s (accepted on ingestion)",
                           path, i + 1, "; ".join(strict))
    return sentences


def _namespace_xpos(sentences: list[conllu.Sentence], tb_id: int) -> None:
    for sent in sentences:
        for row in sent.rows:
            if row.xpos != conllu.EMPTY:
                row.xpos = f"tb{tb_id}:{row.xpos}"


def train(mode: str, components, treebank_paths, langs, out_dir,
          hyper: TrainConfig | None = None, seed: int = 0,
          ner_paths=None, pretrain_corpus: str | None = None) -> dict:
    """Train bundles (and the encoder, on first use) into ``out_dir``.

    Returns the training log.  The encoder is built once per package; later
    runs reuse it unchanged, whatever the mode.
    """
    if mode not in MODES:
        raise PipelineError(f"unknown mode {mode!r}")
    hyper = hyper or TrainConfig()
    components = list(ALL_COMPONENTS) if "all" in components else list(components)
    for comp in components:
        if comp not in ALL_COMPONENTS:
            raise PipelineError(f"unknown component {comp!r}")
    treebank_paths = list(treebank_paths)
    langs = list(langs)
    if len(langs) != len(treebank_paths):
        raise PipelineError("need one language code per treebank")
    if mode == MULTI and len(treebank_paths) < 2:
        raise PipelineError("multilingual mode needs at least 2 treebanks")

    out_dir = Path(out_dir)
    treebanks = [_load_treebank(p) for p in treebank_paths]
    ner_corpora = {}
    if ner_paths:
        for lang, path in ner_paths.items():
            ner_corpora[lang] = ner_mod.parse_ner_corpus(
                Path(path).read_text(encoding="utf-8"))

    if (out_dir / packaging.MANIFEST_NAME).exists():
        manifest = packaging.Manifest.load(out_dir)
    else:
        corpus = pretrain_corpus
        if corpus is None:
            corpus = "\n".join(
                conllu.reconstruct_document(tb).text for tb in treebanks)
        manifest = build_encoder_package(out_dir, corpus, hyper, seed)
    base, enc_cfg, vocab = _load_base(out_dir, manifest)

    log: dict = {"mode": mode, "seed": seed, "languages": {},
                 "hyper": hyper.to_dict()}
    bundle_dir = out_dir / packaging.BUNDLE_DIR
    bundle_dir.mkdir(exist_ok=True)

    def save_bundle(bundle: LangBundle, file_lang: str, register: list[str]):
        path = bundle_dir / f"{file_lang}.ntc"
        bundle.save(path, manifest.encoder_sha256)
        sha = packaging.sha256_file(path)
        for reg_lang in register:
            manifest.languages[reg_lang] = {
                "bundle": f"{packaging.BUNDLE_DIR}/{file_lang}.ntc",
                "sha256": sha,
                "components": bundle.components,
            }

    if mode == MULTI:
        combined: list[conllu.Sentence] = []
        for i, tb in enumerate(treebanks):
            _namespace_xpos(tb, i)
            combined.extend(tb)
        ner_all = [s for c in ner_corpora.values() for s in c]
        bundle, blog = train_language_bundle(
            base, enc_cfg, vocab, MULTI, mode, combined, components, hyper,
            seed, ner_corpus=ner_all or None, xpos_namespaced=True)
        save_bundle(bundle, MULTI, langs)
        log["languages"][MULTI] = blog
    else:
        for i, (lang, tb) in enumerate(zip(langs, treebanks)):
            bundle, blog = train_language_bundle(
                base, enc_cfg, vocab, lang, mode, tb, components, hyper,
                seed + i, ner_corpus=ner_corpora.get(lang))
            save_bundle(bundle, lang, [lang])
            log["languages"][lang] = blog

    manifest.save(out_dir)
    (out_dir / "train_log.json").write_text(
        json.dumps(log, indent=2, sort_keys=True), encoding="utf-8")
    return log


# ---------------------------------------------------------------------------
# the runtime pipeline

_ENCODER_CACHE: dict[str, tuple[ParamStore, EncoderConfig]] = {}
_VOCAB_CACHE: dict[str, SubwordVocab] = {}


@dataclass
class MemoryReport:
    encoder_bytes: int
    bundle_bytes: dict[str, int]

    @property
    def total_bytes(self) -> int:
        return self.encoder_bytes + sum(self.bundle_bytes.values())

    def to_dict(self) -> dict:
        return {"encoder_bytes": self.encoder_bytes,
                "bundles": dict(sorted(self.bundle_bytes.items())),
                "total_bytes": self.total_bytes}


class Pipeline:
    """One loaded package: a shared encoder plus per-language bundles.

    A pipeline instance is a single logical execution context; concurrent
    use requires one instance per thread (they share the encoder arrays).
    """

    def __init__(self, package_dir, languages=None,
                 bundle_byte_budget: int | None = None,
                 max_len: int | None = None):
        self.package_dir = Path(package_dir)
        self.manifest = packaging.Manifest.load(self.package_dir)
        key = self.manifest.encoder_sha256
        if key in _ENCODER_CACHE:
            self.base, self.enc_cfg = _ENCODER_CACHE[key]
            self.vocab = _VOCAB_CACHE[self.manifest.vocab_sha256]
        else:
            self.base, self.enc_cfg, self.vocab = _load_base(
                self.package_dir, self.manifest)
            _ENCODER_CACHE[key] = (self.base, self.enc_cfg)
            _VOCAB_CACHE[self.manifest.vocab_sha256] = self.vocab
        self.max_len = max_len or self.enc_cfg.trained_window
        self.registry = AdapterRegistry()
        self._bundles: dict[str, LangBundle] = {}
        self._lru: list[str] = []
        self._budget = bundle_byte_budget
        if languages is not None:
            unknown = set(languages) - set(self.manifest.languages)
            if unknown:
                raise PipelineError(
                    f"package has no bundle for {sorted(unknown)}")
            self.languages = list(languages)
            for lang in languages:
                self._get_bundle(lang)
        else:
            self.languages = sorted(self.manifest.languages)

    # -- bundle management --------------------------------------------------

    def _get_bundle(self, lang: str) -> LangBundle:
        if lang in self._bundles:
            self._lru.remove(lang)
            self._lru.append(lang)
            return self._bundles[lang]
        entry = self.manifest.languages.get(lang)
        if entry is None:
            raise PipelineError(f"unknown language {lang!r}")
        path = self.package_dir / entry["bundle"]
        if not path.exists():
            raise packaging.PackageError(f"missing bundle file {path}")
        packaging.verify_file(path, entry["sha256"])
        bundle = LangBundle.from_file(path, self.enc_cfg,
                                      self.manifest.encoder_sha256)
        bundle.lang = lang  # a shared (multilingual) bundle serves many codes
        for comp, aset in bundle.adapters.items():
            aset.language = lang
            self.registry.register(aset)
        self._bundles[lang] = bundle
        self._lru.append(lang)
        self._evict()
        return bundle

    def _evict(self) -> None:
        if self._budget is None:
            return
        def used() -> int:
            return sum(b.store.nbytes() for b in self._bundles.values())
        while len(self._lru) > 1 and used() > self._budget:
            victim = self._lru.pop(0)
            bundle = self._bundles.pop(victim)
            for comp in bundle.adapters:
                self.registry._sets.pop((victim, comp), None)

    def memory_report(self) -> MemoryReport:
        return MemoryReport(
            encoder_bytes=self.base.nbytes(),
            bundle_bytes={lang: b.store.nbytes()
                          for lang, b in self._bundles.items()})

    # -- annotation ---------------------------------------------------------

    def _activate(self, bundle: LangBundle, component: str) -> AdapterSet | None:
        if component in bundle.adapters:
            return self.registry.activate(bundle.lang, component)
        return None

    def annotate(self, lang: str, text: str | None = None,
                 pretokenized: list[list[str]] | None = None,
                 timing: dict | None = None) -> document.Document:
        """Annotate raw text (or pretokenized sentences, which bypass the
        splitter).  Components missing from the bundle are skipped with a
        notice in the document."""
        if lang not in self.manifest.languages:
            raise PipelineError(f"unknown language {lang!r}")
        if (text is None) == (pretokenized is None):
            raise PipelineError("pass exactly one of text / pretokenized")
        bundle = self._get_bundle(lang)
        doc = self._segment_stage(bundle, text, pretokenized, timing)
        if not doc.sentences:
            return doc
        self._mwt_stage(bundle, doc, timing)
        self._tagparse_stage(bundle, doc, timing)
        self._lemma_stage(bundle, doc, timing)
        self._ner_stage(bundle, doc, timing)
        return doc

    def _clock(self, timing: dict | None, stage: str, t0: float) -> None:
        if timing is not None:
            timing[stage] = timing.get(stage, 0.0) + (time.perf_counter() - t0)

    def _segment_stage(self, bundle, text, pretokenized, timing):
        t0 = time.perf_counter()
        lang = bundle.lang
        if pretokenized is not None:
            parts = []
            seg_sents = []
            pos = 0
            for sent_tokens in pretokenized:
                toks = []
                for tok in sent_tokens:
                    if parts:
                        parts.append(" ")
                        pos += 1
                    parts.append(tok)
                    toks.append(splitter_mod.TokenPrediction(
                        pos, pos + len(tok), tok, False))
                    pos += len(tok)
                if toks:
                    seg_sents.append(toks)
            doc = document.Document("".join(parts), lang)
            seg = splitter_mod.Segmentation(seg_sents)
        else:
            doc = document.Document(text, lang)
            if not text.strip():
                self._clock(timing, "splitter", t0)
                return doc
            if "splitter" not in bundle.components:
                raise PipelineError(
                    f"bundle for {lang!r} has no splitter; raw text input "
                    f"needs one (or pass pretokenized input)")
            adapter = self._activate(bundle, "splitter")
            seg, _ = splitter_mod.segment(
                bundle.store, self.base, self.enc_cfg, adapter, self.vocab,
                text, self.max_len)
        for i, toks in enumerate(seg.sentences, start=1):
            span = (toks[0].start, toks[-1].end)
            sent = document.SentenceAnn(i, doc.text[span[0]:span[1]], span, [])
            for tok in toks:
                token = document.Token("?", tok.text, (tok.start, tok.end))
                token.words = [document.Word(0, tok.text)]
                if tok.is_mwt:
                    token.id = "mwt?"
                sent.tokens.append(token)
            doc.sentences.append(sent)
        self._clock(timing, "splitter", t0)
        return doc

    def _mwt_stage(self, bundle, doc, timing):
        t0 = time.perf_counter()
        missing_notice = False
        for sent in doc.sentences:
            next_id = 1
            for token in sent.tokens:
                flagged = token.id == "mwt?"
                if flagged and bundle.mwt_model is not None:
                    words = seq2seq.expand_mwt(bundle.mwt_model, token.text)
                elif flagged:
                    words = [token.text]
                    missing_notice = True
                else:
                    words = [token.text]
                if len(words) > 1:
                    token.id = f"{next_id}-{next_id + len(words) - 1}"
                    token.words = [document.Word(next_id + k, w)
                                   for k, w in enumerate(words)]
                else:
                    # single-word expansion: demote to a plain token, whose
                    # word is the surface itself
                    token.id = str(next_id)
                    token.words = [document.Word(next_id, token.text)]
                next_id += len(words)
        if missing_notice:
            doc.notices.append("mwt: component not in bundle; multi-word "
                               "tokens left unexpanded")
        self._clock(timing, "mwt", t0)

    def _tagparse_stage(self, bundle, doc, timing):
        t0 = time.perf_counter()
        if bundle.tagparse_head is None:
            doc.notices.append("tagparse: component not in bundle; skipped")
            self._clock(timing, "tagparse", t0)
            return
        adapter = self._activate(bundle, "tagparse")
        head = bundle.tagparse_head
        for sent in doc.sentences:
            words = [w for tok in sent.tokens for w in tok.words]
            result = parserhead.predict_tagparse(
                head, self.base, self.enc_cfg, adapter, self.vocab,
                [w.text for w in words], self.max_len)
            for w, upos, xpos, feats, hd, rel in zip(
                    words, result.upos, result.xpos, result.ufeats,
                    result.heads, result.deprels):
                w.upos = upos
                w.xpos = (xpos.partition(":")[2]
                          if bundle.xpos_namespaced and ":" in xpos else xpos)
                w.feats = feats
                w.head = hd
                w.deprel = rel
        self._clock(timing, "tagparse", t0)

    def _lemma_stage(self, bundle, doc, timing):
        t0 = time.perf_counter()
        if bundle.lemma_model is None:
            doc.notices.append("lemma: component not in bundle; skipped")
            self._clock(timing, "lemma", t0)
            return
        for sent in doc.sentences:
            for tok in sent.tokens:
                for w in tok.words:
                    w.lemma = seq2seq.transduce(
                        bundle.lemma_model, w.text, w.upos).output
        self._clock(timing, "lemma", t0)

    def _ner_stage(self, bundle, doc, timing):
        t0 = time.perf_counter()
        if bundle.ner_head is None:
            doc.notices.append("ner: component not in bundle; skipped")
            self._clock(timing, "ner", t0)
            return
        adapter = self._activate(bundle, "ner")
        for sent in doc.sentences:
            tokens = [tok.text for tok in sent.tokens]
            tags = ner_mod.predict_ner(
                bundle.ner_head, self.base, self.enc_cfg, adapter, self.vocab,
                tokens, self.max_len)
            for tok, tag in zip(sent.tokens, tags):
                tok.ner = tag
        self._clock(timing, "ner", t0)


def load_package(package_dir, languages=None,
                 bundle_byte_budget: int | None = None,
                 max_len: int | None = None) -> tuple[Pipeline, MemoryReport]:
    """Open a package; returns the pipeline and its memory accounting."""
    pipeline = Pipeline(package_dir, languages, bundle_byte_budget, max_len)
    return pipeline, pipeline.memory_report()


# ---------------------------------------------------------------------------
# evaluation and timing


def evaluate(pipeline: Pipeline, lang: str,
             gold: list[conllu.Sentence],
             ner_corpus=None) -> scorer.ScoreReport:
    """End-to-end evaluation: raw text reconstructed from the gold treebank
    is annotated from scratch and scored against the gold annotation."""
    recon = conllu.reconstruct_document(gold)
    doc = pipeline.annotate(lang, text=recon.text)
    system = document.to_conllu(doc)
    report = scorer.score(system, gold)
    if ner_corpus is not None:
        gold_spans = []
        sys_spans = []
        bundle = pipeline._get_bundle(lang)
        if bundle.ner_head is None:
            raise PipelineError(f"bundle for {lang!r} has no NER component")
        adapter = pipeline._activate(bundle, "ner")
        for tokens, tags in ner_corpus:
            if ner_mod._looks_like_bio(set(tags)):
                tags = ner_mod.bio_to_bioes(tags)
            gold_spans.append(ner_mod.bioes_to_spans(tags))
            predicted = ner_mod.predict_ner(
                bundle.ner_head, pipeline.base, pipeline.enc_cfg, adapter,
                pipeline.vocab, tokens, pipeline.max_len)
            sys_spans.append(ner_mod.bioes_to_spans(predicted))
        report.ner = scorer.score_ner(sys_spans, gold_spans)
    return report


def timing_report(pipeline: Pipeline, lang: str, texts: list[str]) -> dict:
    """Wall-clock throughput per component over a corpus of raw texts."""
    if not texts:
        raise PipelineError("timing needs a non-empty corpus")
    timing: dict[str, float] = {}
    n_tokens = 0
    n_words = 0
    t0 = time.perf_counter()
    for text in texts:
        doc = pipeline.annotate(lang, text=text, timing=timing)
        n_tokens += doc.n_tokens()
        n_words += sum(len(t.words) for s in doc.sentences for t in s.tokens)
    total = time.perf_counter() - t0
    bundle = pipeline._get_bundle(lang)
    report: dict = {"tokens": n_tokens, "words": n_words,
                    "total_seconds": round(total, 4),
                    "tokens_per_second": round(n_tokens / total, 2)
                    if total > 0 else None,
                    "components": {}}
    stage_names = ("splitter", "mwt", "tagparse", "lemma", "ner")
    for stage in stage_names:
        present = (stage in bundle.components
                   or (stage == "mwt" and bundle.mwt_model is not None)
                   or (stage == "lemma" and bundle.lemma_model is not None))
        if not present:
            report["components"][stage] = "skipped"
            continue
        seconds = timing.get(stage, 0.0)
        report["components"][stage] = {
            "seconds": round(seconds, 4),
            "tokens_per_second": round(n_tokens / seconds, 2)
            if seconds > 0 else None,
        }
    report["components"]["encoder"] = {
        "seconds": round(sum(v for v in timing.values()), 4),
        "note": "shared encoder time is included in each component's stage",
    }
    return report
