"""Transition semantics of a single contract.

Strong steps: an external choice offers one input per branch, a committed
output prefix (single-branch internal choice) emits its output, a wider
internal choice silently commits to one branch, and a recursion silently
unfolds.  Silent steps always terminate because recursion bodies are never
bare variables, so every contract normalizes to ``1``, to one external
choice, or to the set of committed outputs of an internal choice.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Union

from .errors import ResourceLimit
from .syntax import (
    DONE,
    Behaviour,
    Done,
    ExtChoice,
    IntChoice,
    Rec,
    Var,
    _intern,
    render,
    unfold,
)

__all__ = [
    "IN",
    "OUT",
    "ActionLabel",
    "SilentLabel",
    "OPLUS",
    "REC",
    "BehaviourStep",
    "step",
    "NormalForm",
    "converge",
    "weak_input_names",
    "StateGraph",
    "reachable",
    "Trace",
    "traces",
    "syncable",
]

IN = "in"
OUT = "out"

DEFAULT_NODE_CAP = 100_000


@dataclass(frozen=True, slots=True)
class ActionLabel:
    """A visible action: an input ``a`` or an output ``!a``."""

    polarity: str
    name: str

    def dual(self) -> "ActionLabel":
        return ActionLabel(OUT if self.polarity == IN else IN, self.name)

    def __str__(self) -> str:
        return self.name if self.polarity == IN else f"!{self.name}"


@dataclass(frozen=True, slots=True)
class SilentLabel:
    """An unobservable step: an internal-choice commit or a recursion unfold."""

    kind: str

    def __str__(self) -> str:
        return self.kind


OPLUS = SilentLabel("oplus")
REC = SilentLabel("rec")

Label = Union[ActionLabel, SilentLabel]


@dataclass(frozen=True, slots=True)
class BehaviourStep:
    label: Label
    target: Behaviour


_STEP_CACHE: dict[Behaviour, tuple[BehaviourStep, ...]] = {}


def step(term: Behaviour) -> tuple[BehaviourStep, ...]:
    """All one-step transitions of a validated contract."""
    got = _STEP_CACHE.get(term)
    if got is not None:
        return got
    t = type(term)
    if t is Done:
        out: tuple[BehaviourStep, ...] = ()
    elif t is ExtChoice:
        out = tuple(BehaviourStep(ActionLabel(IN, n), c) for n, c in term.branches)
    elif t is IntChoice:
        if len(term.branches) == 1:
            name, cont = term.branches[0]
            out = (BehaviourStep(ActionLabel(OUT, name), cont),)
        else:
            out = tuple(
                BehaviourStep(OPLUS, _intern(IntChoice(((n, c),))))
                for n, c in term.branches
            )
    elif t is Rec:
        out = (BehaviourStep(REC, unfold(term)),)
    else:
        raise ValueError(f"free variable {term.name!r} has no transitions")
    _STEP_CACHE[term] = out
    return out


# ---------------------------------------------------------------------------
# Convergence
# ---------------------------------------------------------------------------

@dataclass(frozen=True, slots=True)
class NormalForm:
    """Result of silent normalization.

    kind is "done", "ext" (one external choice) or "int" (the committed
    branches of an internal choice); branch names are pairwise distinct.
    """

    kind: str
    branches: tuple[tuple[str, Behaviour], ...] = ()

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.branches)


_CONVERGE_CACHE: dict[Behaviour, NormalForm] = {}


def converge(term: Behaviour) -> NormalForm:
    """Normalize through silent steps; total on validated contracts."""
    got = _CONVERGE_CACHE.get(term)
    if got is not None:
        return got
    t = term
    chain = []
    while type(t) is Rec:
        chain.append(t)
        t = unfold(t)
        cached = _CONVERGE_CACHE.get(t)
        if cached is not None:
            for r in chain:
                _CONVERGE_CACHE[r] = cached
            return cached
    tt = type(t)
    if tt is Done:
        nf = NormalForm("done")
    elif tt is ExtChoice:
        nf = NormalForm("ext", t.branches)
    elif tt is IntChoice:
        nf = NormalForm("int", t.branches)
    else:
        raise ValueError(f"free variable {t.name!r} does not normalize")
    _CONVERGE_CACHE[t] = nf
    for r in chain:
        _CONVERGE_CACHE[r] = nf
    return nf


def weak_input_names(term: Behaviour) -> frozenset[str]:
    """Inputs the contract can perform after its own silent steps."""
    nf = converge(term)
    if nf.kind != "ext":
        return frozenset()
    return frozenset(nf.names)


# ---------------------------------------------------------------------------
# Reachable state graph
# ---------------------------------------------------------------------------

@dataclass
class StateGraph:
    """Finite graph of all states reachable from a root contract."""

    nodes: list[Behaviour]
    edges: list[tuple[int, Label, int]]
    index: dict[Behaviour, int]
    root: int = 0

    def to_json(self) -> dict:
        def label_str(label: Label) -> str:
            if isinstance(label, ActionLabel):
                return f"{label.polarity}:{label.name}"
            return label.kind

        return {
            "nodes": [{"id": i, "term": render(t)} for i, t in enumerate(self.nodes)],
            "edges": [
                {"from": src, "label": label_str(lbl), "to": dst}
                for src, lbl, dst in self.edges
            ],
        }


def reachable(term: Behaviour, cap: int = DEFAULT_NODE_CAP) -> StateGraph:
    """Expand all states reachable via step, deduplicated up to canonical form."""
    index: dict[Behaviour, int] = {term: 0}
    nodes: list[Behaviour] = [term]
    edges: list[tuple[int, Label, int]] = []
    frontier = 0
    while frontier < len(nodes):
        src = nodes[frontier]
        for st in step(src):
            dst = index.get(st.target)
            if dst is None:
                if len(nodes) >= cap:
                    raise ResourceLimit(f"state graph exceeds {cap} nodes")
                dst = len(nodes)
                index[st.target] = dst
                nodes.append(st.target)
            edges.append((frontier, st.label, dst))
        frontier += 1
    _assert_no_silent_cycle(nodes, edges)
    return StateGraph(nodes, edges, index)


def _assert_no_silent_cycle(nodes: list[Behaviour], edges: list[tuple[int, Label, int]]) -> None:
    silent_out: list[list[int]] = [[] for _ in nodes]
    for src, lbl, dst in edges:
        if isinstance(lbl, SilentLabel):
            silent_out[src].append(dst)
    color = [0] * len(nodes)  # 0 unseen, 1 on stack, 2 done
    for start in range(len(nodes)):
        if color[start]:
            continue
        stack: list[tuple[int, int]] = [(start, 0)]
        color[start] = 1
        while stack:
            node, pos = stack[-1]
            if pos < len(silent_out[node]):
                stack[-1] = (node, pos + 1)
                nxt = silent_out[node][pos]
                if color[nxt] == 1:
                    raise RuntimeError("silent cycle in contract graph; guardedness violated")
                if color[nxt] == 0:
                    color[nxt] = 1
                    stack.append((nxt, 0))
            else:
                color[node] = 2
                stack.pop()


# ---------------------------------------------------------------------------
# Bounded traces
# ---------------------------------------------------------------------------

@dataclass(frozen=True, slots=True)
class Trace:
    """A visible-action sequence; truncated means cut at the depth bound."""

    labels: tuple[ActionLabel, ...]
    truncated: bool

    @property
    def complete(self) -> bool:
        return not self.truncated

    def __str__(self) -> str:
        body = " ".join(str(l) for l in self.labels) or "(empty)"
        return body + (" ..." if self.truncated else "")


def traces(term: Behaviour, depth: int = 32) -> frozenset[Trace]:
    """Every visible trace of the contract, cut at ``depth`` labels."""
    if depth < 0:
        raise ValueError("depth must be >= 0")
    memo: dict[tuple[Behaviour, int], frozenset[Trace]] = {}

    def go(t: Behaviour, d: int) -> frozenset[Trace]:
        key = (t, d)
        got = memo.get(key)
        if got is not None:
            return got
        nf = converge(t)
        if nf.kind == "done":
            result = frozenset({Trace((), False)})
        elif d == 0:
            result = frozenset({Trace((), True)})
        else:
            polarity = IN if nf.kind == "ext" else OUT
            acc: set[Trace] = set()
            for name, cont in nf.branches:
                head = ActionLabel(polarity, name)
                for sub in go(cont, d - 1):
                    acc.add(Trace((head,) + sub.labels, sub.truncated))
            result = frozenset(acc)
        memo[key] = result
        return result

    return go(term, depth)


# ---------------------------------------------------------------------------
# Synchronizability of one client action against a server
# ---------------------------------------------------------------------------

def syncable(label: ActionLabel, server: Behaviour) -> bool:
    """Can a client ready to perform ``label`` always reach a handshake?

    For a client input ``a``: every run of the server must emit ``!a`` after
    finitely many other outputs, with no earlier input demand and no way to
    cycle through outputs avoiding ``!a``.  For a client output ``!a``: the
    server's own outputs must always run dry, and every external choice it
    then reaches must offer the input ``a``.
    """
    if label.polarity == IN:
        return _outputs_reach(label.name, server, {})
    return _outputs_end_offering(label.name, server, {})


_GREY, _TRUE, _FALSE = 1, 2, 3


def _outputs_reach(name: str, term: Behaviour, color: dict) -> bool:
    state = color.get(term)
    if state == _GREY:
        return False  # output cycle avoiding the wanted action
    if state is not None:
        return state == _TRUE
    color[term] = _GREY
    nf = converge(term)
    ok = False
    if nf.kind == "int":
        ok = all(
            True if branch == name else _outputs_reach(name, cont, color)
            for branch, cont in nf.branches
        )
    color[term] = _TRUE if ok else _FALSE
    return ok


def _outputs_end_offering(name: str, term: Behaviour, color: dict) -> bool:
    state = color.get(term)
    if state == _GREY:
        return False  # the server can keep emitting outputs forever
    if state is not None:
        return state == _TRUE
    color[term] = _GREY
    nf = converge(term)
    if nf.kind == "done":
        ok = False
    elif nf.kind == "ext":
        ok = name in nf.names
    else:
        ok = all(_outputs_end_offering(name, cont, color) for _, cont in nf.branches)
    color[term] = _TRUE if ok else _FALSE
    return ok
