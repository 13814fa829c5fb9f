"""Arc-standard transitions with ROOT at the bottom of the buffer.

Node ids are 1..n for tokens and 0 for ROOT.  The stack top is the last
element of ``Configuration.stack``; the buffer front is ``buffer[0]`` and ROOT
is always the last buffer element until it is shifted.

With ``s0`` the top and ``s1`` the element below it:

* ``REDUCE-LEFT(r)``  adds ``s0 -r-> s1`` and keeps ``s0``;
* ``REDUCE-RIGHT(r)`` adds ``s1 -r-> s0`` and keeps ``s1``.

A reduce that would make ROOT a dependent is never legal.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

from .errors import IllegalTransition, NotProjective

ROOT = 0
SHIFT = "SHIFT"
LEFT = "REDUCE-LEFT"
RIGHT = "REDUCE-RIGHT"


class Action(NamedTuple):
    kind: str
    relation: str | None = None

    def __str__(self):
        return self.kind if self.relation is None else f"{self.kind}({self.relation})"


def action_inventory(relations: Sequence[str]) -> list[Action]:
    """SHIFT, then every REDUCE-LEFT, then every REDUCE-RIGHT, in label order."""
    return ([Action(SHIFT)] + [Action(LEFT, r) for r in relations]
            + [Action(RIGHT, r) for r in relations])


class Arc(NamedTuple):
    head: int
    dependent: int
    relation: str


@dataclass(frozen=True)
class DepTree:
    """Heads and labels for tokens 1..n; ``heads[i - 1]`` is the head of token i."""

    heads: tuple
    labels: tuple

    def __post_init__(self):
        object.__setattr__(self, "heads", tuple(self.heads))
        object.__setattr__(self, "labels", tuple(self.labels))
        if len(self.heads) != len(self.labels):
            raise ValueError("heads and labels differ in length")

    def __len__(self):
        return len(self.heads)

    def arcs(self) -> set[Arc]:
        return {Arc(h, d, r) for d, (h, r) in enumerate(zip(self.heads, self.labels), 1)}

    @classmethod
    def from_arcs(cls, n: int, arcs: Iterable) -> "DepTree":
        heads = [None] * n
        labels = [None] * n
        for h, d, r in arcs:
            if heads[d - 1] is not None:
                raise ValueError(f"token {d} has two heads")
            heads[d - 1] = h
            labels[d - 1] = r
        if any(h is None for h in heads):
            raise ValueError("some token has no head")
        return cls(tuple(heads), tuple(labels))

    def is_well_formed(self) -> bool:
        """Single-headed, acyclic and connected to ROOT."""
        n = len(self.heads)
        for d in range(1, n + 1):
            seen = set()
            h = d
            while h != ROOT:
                if h in seen or not 0 <= h <= n:
                    return False
                seen.add(h)
                h = self.heads[h - 1]
        return True


@dataclass(frozen=True)
class Configuration:
    stack: tuple = ()
    buffer: tuple = ()
    arcs: tuple = ()
    history: tuple = field(default=())

    @property
    def is_terminal(self) -> bool:
        return not self.buffer and len(self.stack) == 1


def initial_config(n_tokens: int) -> Configuration:
    if n_tokens < 1:
        raise ValueError(f"sentence must have at least one token, got {n_tokens}")
    return Configuration(stack=(), buffer=tuple(range(1, n_tokens + 1)) + (ROOT,))


def legal_actions(c: Configuration, relations: Sequence[str]) -> list[Action]:
    """Legal actions in inventory order."""
    out = []
    if c.buffer:
        out.append(Action(SHIFT))
    if len(c.stack) >= 2:
        s0, s1 = c.stack[-1], c.stack[-2]
        if s1 != ROOT:
            out.extend(Action(LEFT, r) for r in relations)
        if s0 != ROOT:
            out.extend(Action(RIGHT, r) for r in relations)
    return out


def is_legal(c: Configuration, a: Action) -> bool:
    if a.kind == SHIFT:
        return bool(c.buffer)
    if len(c.stack) < 2 or a.relation is None:
        return False
    if a.kind == LEFT:
        return c.stack[-2] != ROOT
    if a.kind == RIGHT:
        return c.stack[-1] != ROOT
    return False


def apply(c: Configuration, a: Action) -> Configuration:
    if not is_legal(c, a):
        raise IllegalTransition(f"{a} is not legal with stack={c.stack} buffer={c.buffer}")
    history = c.history + (a,)
    if a.kind == SHIFT:
        return Configuration(c.stack + (c.buffer[0],), c.buffer[1:], c.arcs, history)
    s1, s0 = c.stack[-2], c.stack[-1]
    if a.kind == LEFT:
        head, dep = s0, s1
    else:
        head, dep = s1, s0
    return Configuration(c.stack[:-2] + (head,), c.buffer, c.arcs + (Arc(head, dep, a.relation),),
                         history)


def run(n_tokens: int, actions: Iterable[Action]) -> Configuration:
    c = initial_config(n_tokens)
    for a in actions:
        c = apply(c, a)
    return c


def is_projective(tree: DepTree) -> bool:
    """No two arcs cross; ROOT sits at position 0 left of the sentence."""
    spans = [(min(h, d), max(h, d)) for d, h in enumerate(tree.heads, 1)]
    for i, (a, b) in enumerate(spans):
        for c, d in spans[i + 1:]:
            if a < c < b < d or c < a < d < b:
                return False
    return True


def oracle(tree: DepTree) -> list[Action]:
    """Gold arc-standard derivation; left before right before shift."""
    if not is_projective(tree):
        raise NotProjective("tree has crossing arcs")
    n = len(tree)
    heads = {d: h for d, h in enumerate(tree.heads, 1)}
    labels = {d: r for d, r in enumerate(tree.labels, 1)}
    missing = {i: 0 for i in range(n + 1)}
    for h in tree.heads:
        missing[h] += 1

    c = initial_config(n)
    actions = []
    while not c.is_terminal:
        a = None
        if len(c.stack) >= 2:
            s1, s0 = c.stack[-2], c.stack[-1]
            if s1 != ROOT and heads[s1] == s0 and missing[s1] == 0:
                a = Action(LEFT, labels[s1])
                missing[s0] -= 1
            elif s0 != ROOT and heads[s0] == s1 and missing[s0] == 0:
                a = Action(RIGHT, labels[s0])
                missing[s1] -= 1
        if a is None:
            if not c.buffer:
                raise NotProjective("oracle stuck; tree is not reachable by arc-standard")
            a = Action(SHIFT)
        actions.append(a)
        c = apply(c, a)
    return actions
