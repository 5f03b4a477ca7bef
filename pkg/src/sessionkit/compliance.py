"""Compliance deciders for client/server contract pairs.

Three deciders are exposed.  ``check_strong`` decides the classical relation
in which nothing may be discarded: every dead-end interaction state must
leave the client completed.  ``check_skp`` decides skip-compliance on the
pair graph: the client may discard server outputs it can never receive, but
no run may get stuck with an unfinished client or degenerate into a loop of
skips with no real handshake ever again.  ``derive`` decides the same
relation by syntax-directed proof reconstruction over environments of marked
assumptions and, unlike the graph oracle, yields a full derivation tree (or
its failure point) as evidence.

Both skip deciders agree on every input; the test suite enforces this on the
worked examples and on large randomized corpora.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass
from typing import Optional, Union

from .syntax import (
    Behaviour,
    Done,
    ExtChoice,
    IntChoice,
    Rec,
    contract,
    render,
    unfold,
)
from .lts import DEFAULT_NODE_CAP
from .product import (
    SKP,
    TAU,
    Lasso,
    ProductGraph,
    ProductStep,
    build_product_graph,
    definitely_skp_cycle,
    product_step,
)

__all__ = [
    "StuckWitness",
    "Verdict",
    "check_strong",
    "check_skp",
    "DerivationNode",
    "derive",
    "RULE_AX",
    "RULE_HYP",
    "RULE_UNF_L",
    "RULE_UNF_R",
    "RULE_EXT_INT",
    "RULE_INT_INT",
    "RULE_INT_EXT",
    "FAIL_WRONG_HYPOTHESIS",
    "FAIL_NO_RULE",
    "FAIL_SERVER_END",
    "derivation_to_json",
    "derivation_from_json",
    "verdict_to_json",
    "replay_witness",
]


# ---------------------------------------------------------------------------
# Verdicts and witnesses
# ---------------------------------------------------------------------------

@dataclass(frozen=True, slots=True)
class StuckWitness:
    """A replayable path from the root to a dead end with an unfinished client."""

    steps: tuple[ProductStep, ...]

    def to_json(self) -> dict:
        return {"kind": "stuck", "steps": [s.to_json() for s in self.steps]}


@dataclass(frozen=True, slots=True)
class Verdict:
    compliant: bool
    witness: Union[StuckWitness, Lasso, None]
    stats: dict
    skips: bool = True  # whether the deciding pair graph allowed skp steps

    def witness_json(self) -> Optional[dict]:
        if self.witness is None:
            return None
        if isinstance(self.witness, StuckWitness):
            return self.witness.to_json()
        return {"kind": "lasso", **self.witness.to_json()}


def _find_stuck(graph: ProductGraph) -> Optional[StuckWitness]:
    for nid, edges in enumerate(graph.out):
        if not edges and type(graph.configs[nid][0]) is not Done:
            return StuckWitness(graph.path_to(nid))
    return None


def check_strong(client: Behaviour, server: Behaviour, cap: int = DEFAULT_NODE_CAP) -> Verdict:
    """Classical compliance: no skipping, every dead end has a completed client."""
    graph = build_product_graph(client, server, cap=cap, with_skp=False)
    stats = {"nodes": len(graph.configs), "edges": len(graph.edges)}
    stuck = _find_stuck(graph)
    if stuck is not None:
        return Verdict(False, stuck, stats, skips=False)
    return Verdict(True, None, stats, skips=False)


def check_skp(client: Behaviour, server: Behaviour, cap: int = DEFAULT_NODE_CAP) -> Verdict:
    """Skip-compliance via the pair graph.

    Non-compliant exactly when some reachable state is a dead end with an
    unfinished client, or the graph contains a reachable cycle of silent and
    skp edges (with at least one skp) whose client cannot silently complete.
    """
    graph = build_product_graph(client, server, cap=cap, with_skp=True)
    stats = {"nodes": len(graph.configs), "edges": len(graph.edges)}
    stuck = _find_stuck(graph)
    if stuck is not None:
        return Verdict(False, stuck, stats)
    lasso = definitely_skp_cycle(graph)
    if lasso is not None:
        return Verdict(False, lasso, stats)
    return Verdict(True, None, stats)


def replay_witness(client: Behaviour, server: Behaviour, verdict: Verdict) -> bool:
    """Re-execute a non-compliance witness against the pair semantics."""
    if verdict.compliant or verdict.witness is None:
        return False
    skp = verdict.skips
    if isinstance(verdict.witness, StuckWitness):
        cur = (client, server)
        for st in verdict.witness.steps:
            if st not in product_step(*cur, with_skp=skp):
                return False
            cur = st.target
        return not product_step(*cur, with_skp=skp) and type(cur[0]) is not Done
    lasso = verdict.witness
    cur = (client, server)
    for st in lasso.stem:
        if st not in product_step(*cur, with_skp=skp):
            return False
        cur = st.target
    entry = cur
    saw_skp = False
    for st in lasso.cycle:
        if st.kind == TAU or st.kind not in ("silentL", "silentR", SKP):
            return False
        saw_skp = saw_skp or st.kind == SKP
        if st not in product_step(*cur):
            return False
        cur = st.target
    return saw_skp and cur == entry


# ---------------------------------------------------------------------------
# Syntax-directed derivation with marked assumption environments
# ---------------------------------------------------------------------------

RULE_AX = "Ax"
RULE_HYP = "Hyp"
RULE_UNF_L = "UnfL"
RULE_UNF_R = "UnfR"
RULE_EXT_INT = "ExtInt"
RULE_INT_INT = "IntInt"
RULE_INT_EXT = "IntExt"

FAIL_WRONG_HYPOTHESIS = "WrongHypothesis"
FAIL_NO_RULE = "NoRuleApplies"
FAIL_SERVER_END = "PrematureServerEnd"

Statement = tuple[Behaviour, Behaviour]


@dataclass(frozen=True)
class DerivationNode:
    """One judgment of the reconstruction.

    ``statements`` are the assumptions visible at this node; ``crossed`` is
    the subset marked as "only skips since assumed".  Exactly one of ``rule``
    and ``failure`` is set.  ``ok`` is true when no failure occurs in the
    whole subtree.
    """

    client: Behaviour
    server: Behaviour
    statements: frozenset
    crossed: frozenset
    rule: Optional[str]
    children: tuple["DerivationNode", ...]
    failure: Optional[str]
    ok: bool

    @property
    def goal(self) -> Statement:
        return (self.client, self.server)

    def iter_nodes(self):
        yield self
        for child in self.children:
            yield from child.iter_nodes()

    def rule_count(self) -> int:
        return sum(1 for n in self.iter_nodes() if n.rule is not None)


def _leaf(c, s, stmts, cross, rule=None, failure=None) -> DerivationNode:
    return DerivationNode(c, s, stmts, cross, rule, (), failure, failure is None)


def _node(c, s, stmts, cross, rule, children) -> DerivationNode:
    ok = all(ch.ok for ch in children)
    return DerivationNode(c, s, stmts, cross, rule, tuple(children), None, ok)


def derive(client: Behaviour, server: Behaviour, collect_all: bool = False) -> DerivationNode:
    """Reconstruct a skip-compliance derivation bottom-up.

    The procedure is deterministic and never backtracks: the judgment shape
    picks the rule.  A completed client closes a branch (Ax); a goal already
    assumed closes it through Hyp when the assumption still carries a real
    handshake since it was made, and fails as a wrong hypothesis when only
    skips happened since.  Recursions unfold left side first.  For choice
    shapes: client external versus server internal spawns one skip premise
    per unmatched server branch, marking the goal as skip-only, and one
    handshake premise per matched branch, upgrading every mark; client
    internal versus server internal skips every server branch; client
    internal versus server external requires the client's outputs to be a
    subset of the server's inputs and advances each matched pair with marks
    upgraded.  Any other shape has no rule.

    With ``collect_all`` false (default) reconstruction stops at the first
    failed premise; the failure node is still attached.
    """
    if sys.getrecursionlimit() < 20_000:
        sys.setrecursionlimit(20_000)
    return _derive(client, server, frozenset(), frozenset(), collect_all)


def _derive(c: Behaviour, s: Behaviour, stmts: frozenset, cross: frozenset, keep: bool) -> DerivationNode:
    if type(c) is Done:
        return _leaf(c, s, stmts, cross, rule=RULE_AX)
    goal = (c, s)
    if goal in stmts:
        if goal in cross:
            return _leaf(c, s, stmts, cross, failure=FAIL_WRONG_HYPOTHESIS)
        return _leaf(c, s, stmts, cross, rule=RULE_HYP)
    if type(c) is Rec:
        child = _derive(unfold(c), s, stmts, cross, keep)
        return _node(c, s, stmts, cross, RULE_UNF_L, (child,))
    if type(s) is Rec:
        child = _derive(c, unfold(s), stmts, cross, keep)
        return _node(c, s, stmts, cross, RULE_UNF_R, (child,))
    if type(s) is Done:
        return _leaf(c, s, stmts, cross, failure=FAIL_SERVER_END)

    tc, ts = type(c), type(s)
    new_stmts = stmts | {goal}
    skip_env = (new_stmts, cross | {goal})
    sync_env = (new_stmts, frozenset())  # a handshake upgrades every mark

    if tc is ExtChoice and ts is IntChoice:
        client_names = {n for n, _ in c.branches}
        children: list[DerivationNode] = []
        failed = False
        for name, scont in s.branches:
            if name in client_names:
                continue
            child = _derive(c, scont, *skip_env, keep)
            children.append(child)
            if not child.ok and not keep:
                failed = True
                break
        if not failed:
            conts = dict(c.branches)
            for name, scont in s.branches:
                if name not in client_names:
                    continue
                child = _derive(conts[name], scont, *sync_env, keep)
                children.append(child)
                if not child.ok and not keep:
                    break
        return _node(c, s, stmts, cross, RULE_EXT_INT, children)

    if tc is IntChoice and ts is IntChoice:
        children = []
        for _, scont in s.branches:
            child = _derive(c, scont, *skip_env, keep)
            children.append(child)
            if not child.ok and not keep:
                break
        return _node(c, s, stmts, cross, RULE_INT_INT, children)

    if tc is IntChoice and ts is ExtChoice:
        server_conts = dict(s.branches)
        if not all(name in server_conts for name, _ in c.branches):
            return _leaf(c, s, stmts, cross, failure=FAIL_NO_RULE)
        children = []
        for name, ccont in c.branches:
            child = _derive(ccont, server_conts[name], *sync_env, keep)
            children.append(child)
            if not child.ok and not keep:
                break
        return _node(c, s, stmts, cross, RULE_INT_EXT, children)

    # client external choice against server external choice: both sides wait
    return _leaf(c, s, stmts, cross, failure=FAIL_NO_RULE)


# ---------------------------------------------------------------------------
# JSON forms
# ---------------------------------------------------------------------------

def _env_json(node: DerivationNode) -> list[dict]:
    rows = []
    for stmt in node.statements:
        rows.append(
            {
                "client": render(stmt[0]),
                "server": render(stmt[1]),
                "mark": "cross" if stmt in node.crossed else "check",
            }
        )
    rows.sort(key=lambda r: (r["client"], r["server"]))
    return rows


def derivation_to_json(node: DerivationNode) -> dict:
    doc: dict = {
        "client": render(node.client),
        "server": render(node.server),
        "env": _env_json(node),
    }
    if node.rule is not None:
        doc["rule"] = node.rule
    if node.failure is not None:
        doc["failure"] = node.failure
    if node.children:
        doc["children"] = [derivation_to_json(ch) for ch in node.children]
    return doc


def derivation_from_json(doc: dict) -> DerivationNode:
    stmts = set()
    cross = set()
    for row in doc.get("env", ()):
        stmt = (contract(row["client"]), contract(row["server"]))
        stmts.add(stmt)
        if row["mark"] == "cross":
            cross.add(stmt)
    children = tuple(derivation_from_json(ch) for ch in doc.get("children", ()))
    failure = doc.get("failure")
    ok = failure is None and all(ch.ok for ch in children)
    return DerivationNode(
        contract(doc["client"]),
        contract(doc["server"]),
        frozenset(stmts),
        frozenset(cross),
        doc.get("rule"),
        children,
        failure,
        ok,
    )


def verdict_to_json(verdict: Verdict, rules: int = 0) -> dict:
    return {
        "result": "compliant" if verdict.compliant else "noncompliant",
        "witness": verdict.witness_json(),
        "stats": {**verdict.stats, "rules": rules},
    }
