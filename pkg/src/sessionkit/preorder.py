"""The server substitutability preorder under skip-compliance.

A server may replace another when every skip-compliant client of the first
is also skip-compliant with the second.  The dual of a contract is its least
server, so the preorder is decided by a single compliance check: ``lo`` is
below ``hi`` exactly when ``dual(lo)`` is skip-compliant with ``hi``.  On a
negative answer ``dual(lo)`` itself is the separating client.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Iterator, Optional, Sequence

from .syntax import DONE, Behaviour, ExtChoice, IntChoice, dual, render
from .lts import DEFAULT_NODE_CAP
from .compliance import check_skp

__all__ = ["SubVerdict", "subbehaviour", "minimal_server", "enumerate_clients"]


@dataclass(frozen=True, slots=True)
class SubVerdict:
    is_sub: bool
    counterexample: Optional[Behaviour]

    def to_json(self) -> dict:
        return {
            "result": "sub" if self.is_sub else "notsub",
            "counterexample": None if self.counterexample is None else render(self.counterexample),
        }


def subbehaviour(lo: Behaviour, hi: Behaviour, cap: int = DEFAULT_NODE_CAP) -> SubVerdict:
    """Decide whether every skip-compliant client of ``lo`` also accepts ``hi``."""
    probe = dual(lo)
    verdict = check_skp(probe, hi, cap=cap)
    if verdict.compliant:
        return SubVerdict(True, None)
    return SubVerdict(False, probe)


def minimal_server(client: Behaviour) -> Behaviour:
    """The least server of a client: its dual."""
    return dual(client)


def enumerate_clients(alphabet: Sequence[str], max_size: int) -> Iterator[Behaviour]:
    """Exhaustive, duplicate-free stream of recursion-free contracts.

    Terms are produced in canonical form, counted by AST nodes: ``1`` has
    size one and a choice adds one to the sizes of its continuations, so
    ``a.1`` has size two.  Intended for desk-scale exhaustive checks; keep
    ``max_size`` small.
    """
    if max_size < 1:
        return
    names = sorted(set(alphabet))

    by_size: dict[int, list[Behaviour]] = {}

    def terms_of(size: int) -> list[Behaviour]:
        got = by_size.get(size)
        if got is not None:
            return got
        out: list[Behaviour] = []
        if size == 1:
            out.append(DONE)
        else:
            budget = size - 1
            for width in range(1, min(len(names), budget) + 1):
                for subset in combinations(names, width):
                    for conts in _assignments(budget, width):
                        for combo in _combos(subset, conts):
                            out.append(ExtChoice(combo))
                            out.append(IntChoice(combo))
        by_size[size] = out
        return out

    def _assignments(total: int, parts: int) -> Iterator[tuple[int, ...]]:
        if parts == 1:
            if total >= 1:
                yield (total,)
            return
        for first in range(1, total - parts + 2):
            for rest in _assignments(total - first, parts - 1):
                yield (first,) + rest

    def _combos(subset: tuple[str, ...], sizes: tuple[int, ...]) -> Iterator[tuple]:
        def go(idx: int) -> Iterator[tuple]:
            if idx == len(subset):
                yield ()
                return
            for term in terms_of(sizes[idx]):
                for rest in go(idx + 1):
                    yield ((subset[idx], term),) + rest

        yield from go(0)

    for size in range(1, max_size + 1):
        yield from terms_of(size)
