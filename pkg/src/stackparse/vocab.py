"""Vocabularies built from training data, singleton UNK replacement, and
pretrained embedding tables."""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .conll import ConllSentence
from .errors import ConllFormatError
from .transitions import Action, action_inventory

logger = logging.getLogger(__name__)

UNK = "<UNK>"
ROOT_TOKEN = "<ROOT>"


class Vocabulary:
    """Word, POS, relation and action inventories.

    Word and POS ids 0 and 1 are reserved for UNK and the ROOT pseudo-token.
    Ids follow first-occurrence order in the training data.
    """

    def __init__(self, words: Sequence[str], tags: Sequence[str], relations: Sequence[str],
                 singletons=()):
        self.words = list(words)
        self.tags = list(tags)
        self.relations = list(relations)
        for table in (self.words, self.tags):
            if table[:2] != [UNK, ROOT_TOKEN]:
                raise ValueError("word and tag tables must start with UNK, ROOT")
        self.word_index = {w: i for i, w in enumerate(self.words)}
        self.tag_index = {t: i for i, t in enumerate(self.tags)}
        if len(self.word_index) != len(self.words) or len(self.tag_index) != len(self.tags):
            raise ValueError("duplicate vocabulary entries")
        self.actions: list[Action] = action_inventory(self.relations)
        self.action_index = {a: i for i, a in enumerate(self.actions)}
        self.singletons = frozenset(singletons)

    unk_id = 0
    root_id = 1

    def word_id(self, form: str) -> int:
        return self.word_index.get(form, self.unk_id)

    def tag_id(self, tag: str | None) -> int:
        return self.tag_index.get(tag, self.unk_id) if tag is not None else self.unk_id

    def word_ids(self, sentence: ConllSentence) -> list[int]:
        return [self.word_id(f) for f in sentence.forms]

    def tag_ids(self, sentence: ConllSentence) -> list[int]:
        return [self.tag_id(t) for t in sentence.tags]

    def to_dict(self) -> dict:
        return {"words": self.words, "tags": self.tags, "relations": self.relations,
                "singletons": sorted(self.singletons)}

    @classmethod
    def from_dict(cls, d: dict) -> "Vocabulary":
        return cls(d["words"], d["tags"], d["relations"], d.get("singletons", ()))

    def __eq__(self, other):
        return isinstance(other, Vocabulary) and self.to_dict() == other.to_dict()


def build_vocab(train: Sequence[ConllSentence]) -> Vocabulary:
    if not train:
        raise ValueError("cannot build a vocabulary from an empty training set")
    counts: Counter = Counter()
    words = [UNK, ROOT_TOKEN]
    tags = [UNK, ROOT_TOKEN]
    relations: list[str] = []
    seen_w, seen_t, seen_r = set(words), set(tags), set()
    for s in train:
        for t in s.tokens:
            counts[t.form] += 1
            if t.form not in seen_w:
                seen_w.add(t.form)
                words.append(t.form)
            if t.pos is not None and t.pos not in seen_t:
                seen_t.add(t.pos)
                tags.append(t.pos)
            if t.deprel is not None and t.deprel not in seen_r:
                seen_r.add(t.deprel)
                relations.append(t.deprel)
    singletons = {w for w, c in counts.items() if c == 1}
    return Vocabulary(words, tags, relations, singletons)


def unk_replace(sentence: ConllSentence, vocab: Vocabulary, rng: np.random.Generator,
                p: float = 0.5) -> list[int]:
    """Word ids for ``sentence`` with each singleton token swapped for UNK w.p. ``p``.

    Only the learned-word id stream changes; forms, tags and the tree are
    left alone, so pretrained lookups still see the surface form.
    """
    ids = vocab.word_ids(sentence)
    for k, form in enumerate(sentence.forms):
        if form in vocab.singletons and rng.random() < p:
            ids[k] = vocab.unk_id
    return ids


@dataclass
class EmbeddingTable:
    words: list
    vectors: np.ndarray

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=np.float64)
        if self.vectors.ndim != 2 or self.vectors.shape[0] != len(self.words):
            raise ValueError("embedding matrix must have one row per word")
        self.index = {w: i for i, w in enumerate(self.words)}

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __len__(self):
        return len(self.words)

    def __contains__(self, word):
        return word in self.index

    def __getitem__(self, word) -> np.ndarray:
        return self.vectors[self.index[word]]

    def get(self, word, default=None):
        i = self.index.get(word)
        return default if i is None else self.vectors[i]


def read_embeddings(path, expected_dim: int | None = None) -> EmbeddingTable:
    """Load ``word v1 v2 ...`` lines; a word2vec ``count dim`` header is skipped."""
    path = Path(path)
    rows: dict[str, np.ndarray] = {}
    dim = expected_dim
    with path.open(encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            parts = line.split()
            if not parts:
                continue
            if lineno == 1 and len(parts) == 2 and all(p.isdigit() for p in parts) \
                    and (dim is None or (dim != 1 and int(parts[1]) == dim)):
                continue
            word, vals = parts[0], parts[1:]
            if dim is None:
                dim = len(vals)
            if len(vals) != dim:
                raise ConllFormatError(f"expected {dim} values for {word!r}, found {len(vals)}",
                                       path, lineno)
            try:
                vec = np.array(vals, dtype=np.float64)
            except ValueError:
                raise ConllFormatError(f"non-numeric value in vector for {word!r}",
                                       path, lineno) from None
            if word in rows:
                logger.warning("%s:%d: duplicate embedding for %r; keeping the later one",
                               path, lineno, word)
            rows[word] = vec
    if not rows:
        return EmbeddingTable([], np.zeros((0, dim or 0)))
    return EmbeddingTable(list(rows), np.stack(list(rows.values())))
