"""Small synthetic projective treebank used for smoke tests and demos.

Sentences follow ``NP VBD [NP] [IN NP] [RB] .`` with Penn-style tags and
Stanford-style labels; heads are assigned by rule so every tree is projective.
"""

from __future__ import annotations

from importlib import resources

import numpy as np

from .conll import ConllSentence, ConllToken
from .vocab import EmbeddingTable

LEXICON = {
    "DT": ["the", "a", "every", "this"],
    "JJ": ["big", "small", "red", "old", "quick", "overhasty"],
    "NN": ["dog", "cat", "decision", "park", "ball", "house", "man", "tree"],
    "NNP": ["Alice", "Bob", "Paris"],
    "PRP": ["she", "he", "they"],
    "VBD": ["saw", "made", "chased", "liked", "found"],
    "IN": ["in", "near", "with"],
    "RB": ["quickly", "today", "again"],
}


def _np(rng, words):
    """Append a noun phrase; returns the position of its head (1-based)."""
    kind = rng.integers(4)
    if kind == 0:
        words.append(["NNP", None, None])
        return len(words)
    if kind == 1:
        words.append(["PRP", None, None])
        return len(words)
    det = len(words) + 1
    words.append(["DT", None, "det"])
    adjs = []
    for _ in range(rng.integers(0, 3) if kind == 3 else 0):
        words.append(["JJ", None, "amod"])
        adjs.append(len(words))
    words.append(["NN", None, None])
    head = len(words)
    for k in [det] + adjs:
        words[k - 1][1] = head
    return head


def toy_sentence(rng: np.random.Generator, oov=("overhasty",)) -> ConllSentence:
    words: list[list] = []
    subj = _np(rng, words)
    words.append(["VBD", 0, "root"])
    verb = len(words)
    words[subj - 1][1:] = [verb, "nsubj"]
    if rng.random() < 0.7:
        obj = _np(rng, words)
        words[obj - 1][1:] = [verb, "dobj"]
    if rng.random() < 0.4:
        words.append(["IN", verb, "prep"])
        prep = len(words)
        pobj = _np(rng, words)
        words[pobj - 1][1:] = [prep, "pobj"]
    if rng.random() < 0.3:
        words.append(["RB", verb, "advmod"])
    words.append([".", verb, "punct"])
    tokens = []
    for k, (tag, head, rel) in enumerate(words, 1):
        if tag == ".":
            form = "."
        else:
            choices = [w for w in LEXICON[tag] if w not in oov]
            form = choices[rng.integers(len(choices))]
        tokens.append(ConllToken(k, form, None, tag, tag, None, head, rel))
    return ConllSentence(tuple(tokens))


def toy_treebank(n: int = 20, seed: int = 13) -> list[ConllSentence]:
    rng = np.random.default_rng(seed)
    return [toy_sentence(rng) for _ in range(n)]


def toy_embeddings(dim: int = 10, seed: int = 7) -> EmbeddingTable:
    """Random vectors for the whole lexicon, including words absent from the treebank."""
    rng = np.random.default_rng(seed)
    words = sorted({w for ws in LEXICON.values() for w in ws} | {"."})
    return EmbeddingTable(words, rng.normal(0, 0.5, size=(len(words), dim)))


def bundled_path(name: str):
    """Path of a file shipped in ``stackparse/data``."""
    return resources.files("stackparse") / "data" / name
