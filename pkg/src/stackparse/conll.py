"""CoNLL-X treebank reading/writing and attachment-score evaluation."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

from .errors import ConllFormatError
from .transitions import DepTree

logger = logging.getLogger(__name__)

EMPTY = "_"
# Penn punctuation tags excluded from scoring
PUNCT_TAGS = frozenset({"``", "''", ":", ",", "."})


def _opt(s: str) -> str | None:
    return None if s == EMPTY else s


def _out(s) -> str:
    return EMPTY if s is None or s == "" else str(s)


@dataclass(frozen=True)
class ConllToken:
    id: int
    form: str
    lemma: str | None = None
    cpostag: str | None = None
    postag: str | None = None
    feats: str | None = None
    head: int | None = None
    deprel: str | None = None
    phead: str | None = None
    pdeprel: str | None = None

    @property
    def pos(self) -> str | None:
        return self.postag if self.postag is not None else self.cpostag

    def to_line(self) -> str:
        return "\t".join([str(self.id), self.form, _out(self.lemma), _out(self.cpostag),
                          _out(self.postag), _out(self.feats), _out(self.head),
                          _out(self.deprel), _out(self.phead), _out(self.pdeprel)])


@dataclass(frozen=True)
class ConllSentence:
    tokens: tuple
    comments: tuple = field(default=())

    def __len__(self):
        return len(self.tokens)

    @property
    def forms(self) -> list[str]:
        return [t.form for t in self.tokens]

    @property
    def tags(self) -> list[str | None]:
        return [t.pos for t in self.tokens]

    def tree(self) -> DepTree:
        if any(t.head is None for t in self.tokens):
            raise ValueError("sentence has tokens without a head")
        return DepTree(tuple(t.head for t in self.tokens), tuple(t.deprel for t in self.tokens))

    def with_tree(self, tree: DepTree) -> "ConllSentence":
        toks = tuple(replace(t, head=h, deprel=r)
                     for t, h, r in zip(self.tokens, tree.heads, tree.labels))
        return ConllSentence(toks, self.comments)

    def without_tree(self) -> "ConllSentence":
        return ConllSentence(tuple(replace(t, head=None, deprel=None) for t in self.tokens),
                             self.comments)


def _parse_row(cols: list[str], path, lineno: int) -> ConllToken:
    if len(cols) != 10:
        raise ConllFormatError(f"expected 10 tab-separated columns, found {len(cols)}",
                               path, lineno)
    try:
        tid = int(cols[0])
    except ValueError:
        raise ConllFormatError(f"token id {cols[0]!r} is not an integer", path, lineno) from None
    head = None
    if cols[6] != EMPTY:
        try:
            head = int(cols[6])
        except ValueError:
            raise ConllFormatError(f"head {cols[6]!r} is not an integer", path, lineno) from None
    return ConllToken(tid, cols[1], _opt(cols[2]), _opt(cols[3]), _opt(cols[4]), _opt(cols[5]),
                      head, _opt(cols[7]), _opt(cols[8]), _opt(cols[9]))


def _finish(tokens, comments, path, start) -> ConllSentence:
    n = len(tokens)
    for k, t in enumerate(tokens, 1):
        if t.id != k:
            raise ConllFormatError(f"token ids must run 1..n, found {t.id} at position {k}",
                                   path, start + k - 1)
        if t.head is not None and not (0 <= t.head <= n and t.head != t.id):
            raise ConllFormatError(f"head {t.head} out of range for token {t.id}",
                                   path, start + k - 1)
    return ConllSentence(tuple(tokens), tuple(comments))


def parse_conll(lines: Iterable[str], path=None) -> list[ConllSentence]:
    sentences = []
    tokens: list[ConllToken] = []
    comments: list[str] = []
    start = 1
    lineno = 0
    for lineno, raw in enumerate(lines, 1):
        line = raw.rstrip("\r\n")
        if not line.strip():
            if tokens:
                sentences.append(_finish(tokens, comments, path, start))
            elif comments:
                raise ConllFormatError("comment block without tokens", path, lineno)
            tokens, comments = [], []
            continue
        if line.startswith("#") and not tokens:
            comments.append(line)
            continue
        if not tokens:
            start = lineno
        tokens.append(_parse_row(line.split("\t"), path, lineno))
    if tokens:
        sentences.append(_finish(tokens, comments, path, start))
    return sentences


def read_conll(path) -> list[ConllSentence]:
    path = Path(path)
    with path.open(encoding="utf-8") as f:
        return parse_conll(f, path)


def format_conll(sentences: Iterable[ConllSentence]) -> str:
    blocks = []
    for s in sentences:
        blocks.append("".join(c + "\n" for c in s.comments)
                      + "".join(t.to_line() + "\n" for t in s.tokens))
    return "\n".join(blocks)


def write_conll(path, sentences: Iterable[ConllSentence]) -> None:
    Path(path).write_text(format_conll(sentences), encoding="utf-8")


def evaluate(gold: Sequence[ConllSentence], predicted: Sequence[ConllSentence]) -> dict:
    """UAS/LAS in percent over tokens whose gold POS is not punctuation."""
    if len(gold) != len(predicted):
        raise ValueError(f"{len(gold)} gold sentences vs {len(predicted)} predicted")
    total = uas = las = 0
    for k, (g, p) in enumerate(zip(gold, predicted)):
        if len(g) != len(p):
            raise ValueError(f"sentence {k}: {len(g)} gold tokens vs {len(p)} predicted")
        for gt, pt in zip(g.tokens, p.tokens):
            if gt.pos in PUNCT_TAGS:
                continue
            total += 1
            if gt.head == pt.head:
                uas += 1
                if gt.deprel == pt.deprel:
                    las += 1
    if total == 0:
        return {"UAS": 0.0, "LAS": 0.0, "tokens": 0}
    return {"UAS": 100.0 * uas / total, "LAS": 100.0 * las / total, "tokens": total}


def format_scores(scores: dict) -> str:
    return f"UAS: {scores['UAS']:.2f} LAS: {scores['LAS']:.2f}"
