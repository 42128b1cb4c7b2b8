"""polypipe: a trainable multilingual NLP pipeline.

One shared transformer encoder is trained once, frozen, and reused by every
language and every component.  Per-language packages contain only small
bottleneck adapters, task heads, tag vocabularies, and character-level
transducer models, so adding a language costs a fraction of the encoder.

Components (in pipeline order): joint token/sentence splitter, multi-word
token expander, joint POS/morphology/dependency head, lemmatizer, and a
CRF-based named entity recognizer.
"""

__version__ = "0.1.0"

from polypipe.pipeline import Pipeline, load_package  # noqa: F401
