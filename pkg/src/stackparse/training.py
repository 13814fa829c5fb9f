"""SGD training with per-epoch learning-rate decay, global-norm clipping and
best-dev model selection."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import autodiff as ad
from .conll import ConllSentence, evaluate
from .errors import NotProjective
from .model import ModelConfig, ParserModel
from .transitions import is_projective, oracle
from .vocab import EmbeddingTable, build_vocab, unk_replace

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 0.1          # eta_0
    decay: float = 0.1       # rho
    l2: float = 1e-6
    clip: float = 5.0
    max_epochs: int = 50
    patience: int = 10
    eval_every: int = 1
    seed: int = 0
    model: ModelConfig = field(default_factory=ModelConfig)

    def __post_init__(self):
        if not self.lr > 0:
            raise ValueError("initial learning rate must be positive")
        if self.decay < 0:
            raise ValueError("decay must be non-negative")
        if not self.clip > 0:
            raise ValueError("clip threshold must be positive")
        if self.max_epochs < 1 or self.eval_every < 1 or self.patience < 1:
            raise ValueError("max_epochs, eval_every and patience must be >= 1")


def lr_at_epoch(t: int, cfg: TrainConfig) -> float:
    """eta_0 / (1 + rho t), t = completed epochs."""
    if t < 0:
        raise ValueError("epoch count must be non-negative")
    return cfg.lr / (1.0 + cfg.decay * t)


def clip_gradients(store: ad.ParameterStore, threshold: float) -> float:
    """Rescale all gradients so their joint l2 norm is at most ``threshold``.

    Returns the norm before clipping.
    """
    norm = store.grad_norm()
    if norm > threshold:
        k = threshold / norm
        for p in store.trainable():
            p.grad *= k
    return norm


@dataclass
class EpochLog:
    epoch: int
    nll: float
    lr: float
    seconds: float
    dev_uas: float | None = None
    dev_las: float | None = None

    def line(self) -> str:
        dev = ("dev UAS n/a LAS n/a" if self.dev_uas is None
               else f"dev UAS {self.dev_uas:.2f} LAS {self.dev_las:.2f}")
        return (f"epoch {self.epoch} nll {self.nll:.4f} {dev} "
                f"lr {self.lr:.6f} time {self.seconds:.1f}s")


@dataclass
class TrainResult:
    model: ParserModel
    history: list
    best_epoch: int


def gold_examples(sentences: Sequence[ConllSentence]):
    """(sentence, gold actions) pairs; non-projective sentences are skipped."""
    out = []
    skipped = 0
    for k, s in enumerate(sentences):
        tree = s.tree()
        if not is_projective(tree):
            skipped += 1
            logger.warning("skipping non-projective training sentence %d", k)
            continue
        try:
            out.append((s, oracle(tree)))
        except NotProjective:
            skipped += 1
            logger.warning("skipping training sentence %d: oracle failed", k)
    return out, skipped


def parse_all(model: ParserModel, sentences: Sequence[ConllSentence]) -> list[ConllSentence]:
    return [model.parse(s.without_tree()) for s in sentences]


def train(train_set: Sequence[ConllSentence], dev_set: Sequence[ConllSentence] | None,
          cfg: TrainConfig, pretrained: EmbeddingTable | None = None,
          on_epoch: Callable[[EpochLog], None] | None = None) -> TrainResult:
    if not train_set:
        raise ValueError("empty training set")
    vocab = build_vocab(train_set)
    examples, _ = gold_examples(train_set)
    if not examples:
        raise ValueError("no projective training sentences")
    model = ParserModel(cfg.model, vocab, pretrained, seed=cfg.seed)
    rng = np.random.default_rng([cfg.seed, 1])

    history: list[EpochLog] = []
    best_score = None
    best_params = None
    best_epoch = 0
    stale = 0
    for epoch in range(cfg.max_epochs):
        start = time.perf_counter()
        lr = lr_at_epoch(epoch, cfg)
        total = 0.0
        for i in rng.permutation(len(examples)):
            sentence, gold = examples[i]
            word_ids = unk_replace(sentence, vocab, rng)
            loss = model.sentence_neg_log_likelihood(sentence, gold, word_ids)
            total += float(loss.value)
            ad.backward(loss)
            clip_gradients(model.store, cfg.clip)
            ad.sgd_step(model.store, lr, cfg.l2)
        log = EpochLog(epoch + 1, total / len(examples), lr, 0.0)

        if dev_set and (epoch + 1) % cfg.eval_every == 0:
            scores = evaluate(dev_set, parse_all(model, dev_set))
            log.dev_uas, log.dev_las = scores["UAS"], scores["LAS"]
            score = (scores["UAS"], scores["LAS"])
            # ties go to the later, longer-trained parameters; only strict
            # improvements reset the patience counter
            if best_score is None or score > best_score:
                stale = 0
            else:
                stale += 1
            if best_score is None or score >= best_score:
                best_score, best_params, best_epoch = score, model.store.snapshot(), epoch + 1
        log.seconds = time.perf_counter() - start
        history.append(log)
        logger.info(log.line())
        if on_epoch is not None:
            on_epoch(log)
        if not math.isfinite(log.nll):
            raise FloatingPointError(f"training diverged at epoch {epoch + 1}")
        if stale >= cfg.patience:
            break

    if best_params is not None:
        model.store.restore(best_params)
    else:
        best_epoch = len(history)
    return TrainResult(model, history, best_epoch)
