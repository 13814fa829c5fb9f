"""Stack-LSTM parser: token embeddings, tree composition, state encoding,
action distributions, training loss and greedy decoding."""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .conll import ConllSentence
from .stack_lstm import LSTMBuilder, RNNBuilder, StackLSTMState, new_stack
from .transitions import (LEFT, SHIFT, Action, Configuration, DepTree, apply,
                          initial_config, legal_actions)
from .vocab import EmbeddingTable, Vocabulary


@dataclass(frozen=True)
class ModelConfig:
    word_dim: int = 32
    pretrained_dim: int = 100
    pos_dim: int = 12
    token_dim: int = 100
    hidden_dim: int = 100
    layers: int = 2
    action_dim: int = 16
    rel_dim: int = 16
    state_dim: int = 100
    use_pos: bool = True
    use_pretrained: bool = True
    use_composition: bool = True
    use_lstm: bool = True

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if f.type in (int, "int") and (not isinstance(v, int) or v < 1):
                raise ValueError(f"{f.name} must be a positive integer, got {v!r}")

    @property
    def token_input_dim(self) -> int:
        return (self.word_dim + (self.pretrained_dim if self.use_pretrained else 0)
                + (self.pos_dim if self.use_pos else 0))

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown model config keys: {sorted(unknown)}")
        return cls(**d)


class ParserModel:
    """All parameters of the parser plus the vocabulary they are indexed by.

    The pretrained table is stored as a non-trainable parameter whose row 0
    is the zero vector used for words the table does not cover.
    """

    def __init__(self, config: ModelConfig, vocab: Vocabulary,
                 pretrained: EmbeddingTable | None = None, seed: int = 0,
                 init: str = "glorot"):
        self.config = config
        self.vocab = vocab
        cfg = config
        rng = np.random.default_rng(seed)
        store = self.store = ad.ParameterStore()
        n_act = len(vocab.actions)
        row_init = "rows" if init == "glorot" else init

        self.word_emb = store.add("word_emb", (len(vocab.words), cfg.word_dim), rng, row_init)
        self.pos_emb = (store.add("pos_emb", (len(vocab.tags), cfg.pos_dim), rng, row_init)
                        if cfg.use_pos else None)
        self.pretrained_words: list[str] = []
        self.pretrained_index: dict[str, int] = {}
        self.pretrained = None
        if cfg.use_pretrained:
            if pretrained is None:
                pretrained = EmbeddingTable([], np.zeros((0, cfg.pretrained_dim)))
            if len(pretrained) and pretrained.dim != cfg.pretrained_dim:
                raise ValueError(f"pretrained vectors have {pretrained.dim} dims, "
                                 f"config says {cfg.pretrained_dim}")
            table = np.zeros((len(pretrained) + 1, cfg.pretrained_dim))
            if len(pretrained):
                table[1:] = pretrained.vectors
            self.pretrained = store.set("pretrained", table, trainable=False)
            self.pretrained_words = list(pretrained.words)
            self.pretrained_index = {w: i + 1 for i, w in enumerate(self.pretrained_words)}

        self.tok_V = store.add("tok.V", (cfg.token_dim, cfg.token_input_dim), rng, init)
        self.tok_b = store.add("tok.b", (cfg.token_dim,), rng, init)
        if cfg.use_composition:
            self.comp_U = store.add("comp.U", (cfg.token_dim, 2 * cfg.token_dim + cfg.rel_dim),
                                    rng, init)
            self.comp_e = store.add("comp.e", (cfg.token_dim,), rng, init)
            self.rel_emb = store.add("comp.rel_emb", (n_act, cfg.rel_dim), rng, row_init)
        self.act_emb = store.add("act_emb", (n_act, cfg.action_dim), rng, row_init)
        self.guard_S = store.add("S.guard", (cfg.token_dim,), rng, init)
        self.guard_B = store.add("B.guard", (cfg.token_dim,), rng, init)
        self.guard_A = store.add("A.guard", (cfg.action_dim,), rng, init)
        Builder = LSTMBuilder if cfg.use_lstm else RNNBuilder
        self.S = Builder(store, "S", cfg.token_dim, cfg.hidden_dim, cfg.layers, rng, init)
        self.B = Builder(store, "B", cfg.token_dim, cfg.hidden_dim, cfg.layers, rng, init)
        self.A = Builder(store, "A", cfg.action_dim, cfg.hidden_dim, cfg.layers, rng, init)
        self.state_W = store.add("state.W", (cfg.state_dim, 3 * cfg.hidden_dim), rng, init)
        self.state_d = store.add("state.d", (cfg.state_dim,), rng, init)
        self.out_G = store.add("out.G", (n_act, cfg.state_dim), rng, init)
        self.out_q = store.add("out.q", (n_act,), rng, init)

    # ------------------------------------------------------------ components

    def pretrained_row(self, form: str) -> int:
        return self.pretrained_index.get(form, 0)

    def embed_token(self, word_id: int, tag_id: int, form: str | None) -> ad.Node:
        """relu(V [w; w_LM; t] + b); the pretrained block never receives gradient."""
        parts = [ad.lookup(self.word_emb, word_id)]
        if self.pretrained is not None:
            row = self.pretrained_row(form) if form is not None else 0
            parts.append(ad.lookup(self.pretrained, row, update=False))
        if self.pos_emb is not None:
            parts.append(ad.lookup(self.pos_emb, tag_id))
        return ad.relu(ad.affine(self.tok_V, ad.concat(parts), self.tok_b))

    def compose(self, head: ad.Node, dependent: ad.Node, relation: ad.Node) -> ad.Node:
        return ad.tanh(ad.affine(self.comp_U, ad.concat([head, dependent, relation]), self.comp_e))

    def encode_state(self, state: "ParserState") -> ad.Node:
        s = ad.concat([state.S.summary(), state.B.summary(), state.A.summary()])
        return ad.relu(ad.affine(self.state_W, s, self.state_d))

    def action_log_probs(self, p: ad.Node, legal: Sequence[int]) -> ad.Node:
        if not legal:
            raise ValueError("no legal actions")
        return ad.restricted_log_softmax(ad.affine(self.out_G, p, self.out_q), legal)

    # -------------------------------------------------------------- running

    def start(self, sentence: ConllSentence, word_ids: Sequence[int] | None = None
              ) -> "ParserState":
        if word_ids is None:
            word_ids = self.vocab.word_ids(sentence)
        tag_ids = self.vocab.tag_ids(sentence)
        tokens = [self.embed_token(w, t, f)
                  for w, t, f in zip(word_ids, tag_ids, sentence.forms)]
        root = self.embed_token(self.vocab.root_id, self.vocab.root_id, None)
        return ParserState(self, tokens, root)

    def sentence_neg_log_likelihood(self, sentence: ConllSentence, gold: Sequence[Action],
                                    word_ids: Sequence[int] | None = None) -> ad.Node:
        """-sum_t log p(z_t | p_t) along the gold derivation."""
        state = self.start(sentence, word_ids)
        terms = []
        for a in gold:
            logp = state.log_probs()
            terms.append(ad.pick(logp, self.vocab.action_index[a]))
            state.apply(a)
        return ad.scale(ad.add(*terms), -1.0)

    def decode_greedy(self, sentence: ConllSentence) -> Configuration:
        """Decode by taking the most probable legal action at every step.

        ``np.argmax`` returns the first maximum, so ties go to the lowest id.
        Returns the terminal configuration, whose history is the derivation.
        """
        state = self.start(sentence)
        while not state.config.is_terminal:
            logp = state.log_probs()
            state.apply(self.vocab.actions[int(np.argmax(logp.value))])
        return state.config

    def parse_greedy(self, sentence: ConllSentence) -> DepTree:
        return DepTree.from_arcs(len(sentence), self.decode_greedy(sentence).arcs)

    def parse(self, sentence: ConllSentence) -> ConllSentence:
        return sentence.with_tree(self.parse_greedy(sentence))


class ParserState:
    """The three stack LSTMs (S, B, A) kept in lockstep with a Configuration."""

    def __init__(self, model: ParserModel, tokens: list[ad.Node], root: ad.Node):
        self.model = model
        self.tokens = tokens
        self.root = root
        self.config: Configuration = initial_config(len(tokens))
        B = new_stack(model.B, model.guard_B)
        # ROOT at the bottom, first word on top
        B = B.push(root)
        for x in reversed(tokens):
            B = B.push(x)
        self.B: StackLSTMState = B
        self.S: StackLSTMState = new_stack(model.S, model.guard_S)
        self.A: StackLSTMState = new_stack(model.A, model.guard_A)

    def legal(self) -> list[int]:
        idx = self.model.vocab.action_index
        return [idx[a] for a in legal_actions(self.config, self.model.vocab.relations)]

    def log_probs(self) -> ad.Node:
        return self.model.action_log_probs(self.model.encode_state(self), self.legal())

    def apply(self, a: Action) -> None:
        model = self.model
        self.config = apply(self.config, a)
        aid = model.vocab.action_index[a]
        if a.kind == SHIFT:
            self.B, x = self.B.pop()
            self.S = self.S.push(x)
        else:
            self.S, top = self.S.pop()
            self.S, below = self.S.pop()
            head, dep = (top, below) if a.kind == LEFT else (below, top)
            if model.config.use_composition:
                head = model.compose(head, dep, ad.lookup(model.rel_emb, aid))
            self.S = self.S.push(head)
        self.A = self.A.push(ad.lookup(model.act_emb, aid))
