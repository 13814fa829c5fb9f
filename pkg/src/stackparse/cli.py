"""Command-line interface: ``train``, ``parse`` and ``eval``."""

from __future__ import annotations

import argparse
import logging
import sys

from . import __version__
from .conll import evaluate, format_scores, read_conll, write_conll
from .errors import ConllFormatError, ModelFormatError
from .model import ModelConfig
from .serialize import load_model, save_model
from .training import TrainConfig, train
from .vocab import read_embeddings

logger = logging.getLogger("stackparse")


def _add_ablation_flags(p):
    p.add_argument("--no-pos", action="store_true", help="drop POS tag embeddings")
    p.add_argument("--no-pretrained", action="store_true",
                   help="drop pretrained word embeddings")
    p.add_argument("--no-composition", action="store_true",
                   help="keep head-word embeddings on the stack instead of composed trees")
    p.add_argument("--rnn", action="store_true",
                   help="use classical RNN cells instead of LSTMs in all three stacks")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="stackparse", description=__doc__)
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train a parser on a CoNLL-X treebank")
    t.add_argument("--train", required=True, help="training treebank (CoNLL-X)")
    t.add_argument("--dev", help="development treebank used for model selection")
    t.add_argument("--embeddings", help="pretrained word vectors (word v1 v2 ...)")
    t.add_argument("--out-model", required=True, help="where to write the model")
    d = ModelConfig()
    for name in ("word_dim", "pretrained_dim", "pos_dim", "token_dim", "hidden_dim", "layers",
                 "action_dim", "rel_dim", "state_dim"):
        default = None if name == "pretrained_dim" else getattr(d, name)
        t.add_argument("--" + name.replace("_", "-"), type=int, default=default)
    tc = TrainConfig()
    t.add_argument("--lr", type=float, default=tc.lr, help="initial learning rate")
    t.add_argument("--decay", type=float, default=tc.decay,
                   help="rho in lr = lr0 / (1 + rho * epoch)")
    t.add_argument("--l2", type=float, default=tc.l2)
    t.add_argument("--clip", type=float, default=tc.clip, help="gradient norm threshold")
    t.add_argument("--max-epochs", type=int, default=tc.max_epochs)
    t.add_argument("--patience", type=int, default=tc.patience,
                   help="stop after this many dev evaluations without improvement")
    t.add_argument("--eval-every", type=int, default=tc.eval_every)
    t.add_argument("--seed", type=int, default=tc.seed)
    _add_ablation_flags(t)

    p = sub.add_parser("parse", help="parse a CoNLL-X file with a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    _add_ablation_flags(p)

    e = sub.add_parser("eval", help="score predicted against gold trees")
    e.add_argument("--gold", required=True)
    e.add_argument("--pred", required=True)
    return ap


def _cmd_train(args) -> None:
    use_pretrained = not args.no_pretrained
    table = None
    pdim = args.pretrained_dim
    if use_pretrained:
        if not args.embeddings:
            raise ValueError("--embeddings is required unless --no-pretrained is given")
        table = read_embeddings(args.embeddings, pdim)
        pdim = table.dim if len(table) else (pdim or ModelConfig.pretrained_dim)
    model_cfg = ModelConfig(
        word_dim=args.word_dim, pretrained_dim=pdim or ModelConfig.pretrained_dim,
        pos_dim=args.pos_dim, token_dim=args.token_dim, hidden_dim=args.hidden_dim,
        layers=args.layers, action_dim=args.action_dim, rel_dim=args.rel_dim,
        state_dim=args.state_dim, use_pos=not args.no_pos, use_pretrained=use_pretrained,
        use_composition=not args.no_composition, use_lstm=not args.rnn)
    cfg = TrainConfig(lr=args.lr, decay=args.decay, l2=args.l2, clip=args.clip,
                      max_epochs=args.max_epochs, patience=args.patience,
                      eval_every=args.eval_every, seed=args.seed, model=model_cfg)
    train_set = read_conll(args.train)
    dev_set = read_conll(args.dev) if args.dev else None
    result = train(train_set, dev_set, cfg, table,
                   on_epoch=lambda log: print(log.line(), flush=True))
    save_model(result.model, args.out_model)
    print(f"best epoch {result.best_epoch}; model written to {args.out_model}")


def _cmd_parse(args) -> None:
    expected = {}
    if args.no_pos:
        expected["use_pos"] = False
    if args.no_pretrained:
        expected["use_pretrained"] = False
    if args.no_composition:
        expected["use_composition"] = False
    if args.rnn:
        expected["use_lstm"] = False
    model = load_model(args.model, expected or None)
    sentences = read_conll(args.input)
    write_conll(args.output, [model.parse(s) for s in sentences])


def _cmd_eval(args) -> None:
    print(format_scores(evaluate(read_conll(args.gold), read_conll(args.pred))))


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:     # argparse has already printed the message
        return e.code if isinstance(e.code, int) else 2
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        {"train": _cmd_train, "parse": _cmd_parse, "eval": _cmd_eval}[args.command](args)
    except (OSError, ValueError, ConllFormatError, ModelFormatError) as e:
        print(f"stackparse {args.command}: error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
