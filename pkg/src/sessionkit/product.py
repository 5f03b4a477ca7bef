"""Interaction of a client/server contract pair.

The pair evolves by component-local silent steps, by ``tau`` handshakes of
dual actions, and by ``skp`` steps in which the client discards one server
output whose input it can never perform (not even after silent steps).
Skipping is one-sided: server inputs are never discarded, and an output the
client is ready to receive cannot be deferred.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from .errors import ResourceLimit
from .syntax import Behaviour, Done, render
from .lts import (
    DEFAULT_NODE_CAP,
    OUT,
    ActionLabel,
    SilentLabel,
    converge,
    step,
    weak_input_names,
)

__all__ = [
    "Config",
    "ProductStep",
    "product_step",
    "ProductGraph",
    "build_product_graph",
    "SyncTrace",
    "sync_traces",
    "Lasso",
    "definitely_skp_cycle",
    "seq_embed",
]

Config = tuple[Behaviour, Behaviour]

SILENT_L = "silentL"
SILENT_R = "silentR"
TAU = "tau"
SKP = "skp"

_SILENT_KINDS = (SILENT_L, SILENT_R)


@dataclass(frozen=True, slots=True)
class ProductStep:
    """One pair transition: kind, synchronized/skipped action (if any), target."""

    kind: str
    action: Optional[str]
    client: Behaviour
    server: Behaviour

    @property
    def target(self) -> Config:
        return (self.client, self.server)

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "action": self.action,
            "client": render(self.client),
            "server": render(self.server),
        }


def product_step(client: Behaviour, server: Behaviour, with_skp: bool = True) -> tuple[ProductStep, ...]:
    """All pair transitions out of ``client || server``."""
    out: list[ProductStep] = []
    csteps = step(client)
    ssteps = step(server)
    for st in csteps:
        if isinstance(st.label, SilentLabel):
            out.append(ProductStep(SILENT_L, None, st.target, server))
    for st in ssteps:
        if isinstance(st.label, SilentLabel):
            out.append(ProductStep(SILENT_R, None, client, st.target))
    client_actions = [st for st in csteps if isinstance(st.label, ActionLabel)]
    server_actions = [st for st in ssteps if isinstance(st.label, ActionLabel)]
    for cst in client_actions:
        want = cst.label.dual()
        for sst in server_actions:
            if sst.label == want:
                out.append(ProductStep(TAU, cst.label.name, cst.target, sst.target))
    if with_skp:
        reachable_inputs = weak_input_names(client)
        for sst in server_actions:
            if sst.label.polarity == OUT and sst.label.name not in reachable_inputs:
                out.append(ProductStep(SKP, sst.label.name, client, sst.target))
    return tuple(out)


@dataclass(frozen=True, slots=True)
class ProductEdge:
    src: int
    kind: str
    action: Optional[str]
    dst: int


@dataclass
class ProductGraph:
    """Finite graph of all pair states reachable from ``root = client || server``."""

    configs: list[Config]
    edges: list[ProductEdge]
    out: list[list[ProductEdge]]
    index: dict[Config, int]
    parent: list[Optional[ProductEdge]]  # BFS tree edge that discovered each node
    with_skp: bool
    root: int = 0

    def path_to(self, node: int) -> tuple[ProductStep, ...]:
        """The BFS discovery path from the root to ``node`` as replayable steps."""
        rev: list[ProductEdge] = []
        cur = node
        while cur != self.root:
            edge = self.parent[cur]
            assert edge is not None
            rev.append(edge)
            cur = edge.src
        return tuple(self._as_step(e) for e in reversed(rev))

    def _as_step(self, edge: ProductEdge) -> ProductStep:
        client, server = self.configs[edge.dst]
        return ProductStep(edge.kind, edge.action, client, server)

    def to_json(self) -> dict:
        return {
            "nodes": [
                {"id": i, "client": render(c), "server": render(s)}
                for i, (c, s) in enumerate(self.configs)
            ],
            "edges": [
                {"from": e.src, "label": e.kind, "to": e.dst} for e in self.edges
            ],
        }


def build_product_graph(
    client: Behaviour,
    server: Behaviour,
    cap: int = DEFAULT_NODE_CAP,
    with_skp: bool = True,
) -> ProductGraph:
    root: Config = (client, server)
    index: dict[Config, int] = {root: 0}
    configs: list[Config] = [root]
    edges: list[ProductEdge] = []
    out: list[list[ProductEdge]] = [[]]
    parent: list[Optional[ProductEdge]] = [None]
    frontier = 0
    while frontier < len(configs):
        c, s = configs[frontier]
        for st in product_step(c, s, with_skp=with_skp):
            tgt = st.target
            dst = index.get(tgt)
            fresh = dst is None
            if fresh:
                if len(configs) >= cap:
                    raise ResourceLimit(f"product graph exceeds {cap} nodes")
                dst = len(configs)
                index[tgt] = dst
                configs.append(tgt)
                out.append([])
                parent.append(None)
            edge = ProductEdge(frontier, st.kind, st.action, dst)
            edges.append(edge)
            out[frontier].append(edge)
            if fresh:
                parent[dst] = edge
        frontier += 1
    return ProductGraph(configs, edges, out, index, parent, with_skp)


# ---------------------------------------------------------------------------
# Bounded synchronization traces
# ---------------------------------------------------------------------------

@dataclass(frozen=True, slots=True)
class SyncTrace:
    """A sequence over tau/skp, optionally ending in a completion tick.

    ``lasso`` optionally marks the (stem length, cycle length) split of a
    trace replayed from a skip-loop witness.
    """

    steps: tuple[str, ...]
    tick: bool = False
    truncated: bool = False
    lasso: Optional[tuple[int, int]] = None

    def __str__(self) -> str:
        parts = ["τ" if s == TAU else s for s in self.steps]
        if self.tick:
            parts.append("✓")
        text = " ".join(parts) if parts else "(empty)"
        if self.truncated:
            text += " (truncated)"
        return text


def sync_traces(
    client: Behaviour,
    server: Behaviour,
    bound: Optional[int] = None,
    trace_cap: int = 10_000,
    cap: int = DEFAULT_NODE_CAP,
) -> frozenset[SyncTrace]:
    """All synchronization traces of the pair, cut at ``bound`` elements.

    A pair whose client is literally ``1`` contributes only the tick trace,
    even when skip steps are still available; a pair with no handshake or
    skip reachable through silent steps contributes the empty trace.  The
    default bound is twice the pair-graph size plus one, enough to expose
    every simple loop.
    """
    graph = build_product_graph(client, server, cap=cap)
    if bound is None:
        bound = 2 * len(graph.configs) + 1
    if bound < 0:
        raise ValueError("bound must be >= 0")

    closure_cache: dict[int, tuple[int, ...]] = {}

    def closure(nid: int) -> tuple[int, ...]:
        got = closure_cache.get(nid)
        if got is not None:
            return got
        seen = {nid}
        queue = [nid]
        qi = 0
        while qi < len(queue):
            cur = queue[qi]
            qi += 1
            for e in graph.out[cur]:
                if e.kind in _SILENT_KINDS and e.dst not in seen:
                    seen.add(e.dst)
                    queue.append(e.dst)
        result = tuple(queue)
        closure_cache[nid] = result
        return result

    succ_cache: dict[int, tuple[tuple[str, int], ...]] = {}

    def successors(nid: int) -> tuple[tuple[str, int], ...]:
        got = succ_cache.get(nid)
        if got is not None:
            return got
        acc: list[tuple[str, int]] = []
        seen: set[tuple[str, int]] = set()
        for u in closure(nid):
            for e in graph.out[u]:
                if e.kind in (TAU, SKP):
                    for anchor in closure(e.dst):
                        key = (e.kind, anchor)
                        if key not in seen:
                            seen.add(key)
                            acc.append(key)
        result = tuple(acc)
        succ_cache[nid] = result
        return result

    memo: dict[tuple[int, int], frozenset[SyncTrace]] = {}

    def go(nid: int, budget: int) -> frozenset[SyncTrace]:
        key = (nid, budget)
        got = memo.get(key)
        if got is not None:
            return got
        client_term = graph.configs[nid][0]
        if type(client_term) is Done:
            result = frozenset({SyncTrace((), tick=True)})
        else:
            nxt = successors(nid)
            if not nxt:
                result = frozenset({SyncTrace(())})
            elif budget == 0:
                result = frozenset({SyncTrace((), truncated=True)})
            else:
                acc: set[SyncTrace] = set()
                for kind, anchor in nxt:
                    for sub in go(anchor, budget - 1):
                        acc.add(
                            SyncTrace(
                                (kind,) + sub.steps,
                                tick=sub.tick,
                                truncated=sub.truncated,
                            )
                        )
                        if len(acc) > trace_cap:
                            raise ResourceLimit(
                                f"trace set exceeds {trace_cap} elements"
                            )
                result = frozenset(acc)
        memo[key] = result
        return result

    return go(graph.root, bound)


# ---------------------------------------------------------------------------
# Skip-only loops
# ---------------------------------------------------------------------------

@dataclass(frozen=True, slots=True)
class Lasso:
    """A reachable loop along which the client is only ever skipped past."""

    stem: tuple[ProductStep, ...]
    cycle: tuple[ProductStep, ...]

    def to_json(self) -> dict:
        return {
            "stem": [s.to_json() for s in self.stem],
            "cycle": [s.to_json() for s in self.cycle],
        }


def definitely_skp_cycle(graph: ProductGraph) -> Optional[Lasso]:
    """Find a reachable silent+skp cycle witnessing an eventually-skip-only run.

    The cycle carries at least one skp edge and its (necessarily constant)
    client cannot silently complete.  Returns None when no such loop exists.
    """
    n = len(graph.configs)
    sub_out: list[list[ProductEdge]] = [[] for _ in range(n)]
    for e in graph.edges:
        if e.kind != TAU:
            sub_out[e.src].append(e)

    sccs = _tarjan(n, sub_out)
    for comp in sccs:
        comp_set = set(comp)
        internal = [
            e for u in comp for e in sub_out[u] if e.dst in comp_set
        ]
        if not internal:
            continue
        if not any(e.kind == SKP for e in internal):
            raise RuntimeError("silent-only cycle in pair graph; guardedness violated")
        clients = {graph.configs[u][0] for u in comp}
        if len(clients) != 1:
            raise RuntimeError("client changed along a silent+skp cycle")
        client = next(iter(clients))
        if converge(client).kind == "done":
            continue  # the client can silently complete; the loop is benign
        entry = min(comp)
        skp_edge = next(e for e in internal if e.kind == SKP)
        cycle_edges = (
            _path_within(graph, sub_out, comp_set, entry, skp_edge.src)
            + [skp_edge]
            + _path_within(graph, sub_out, comp_set, skp_edge.dst, entry)
        )
        stem = graph.path_to(entry)
        cycle = tuple(graph._as_step(e) for e in cycle_edges)
        return Lasso(stem, cycle)
    return None


def _tarjan(n: int, out: list[list[ProductEdge]]) -> list[list[int]]:
    index_of = [-1] * n
    low = [0] * n
    on_stack = [False] * n
    stack: list[int] = []
    sccs: list[list[int]] = []
    counter = [0]

    for root in range(n):
        if index_of[root] != -1:
            continue
        work: list[tuple[int, int]] = [(root, 0)]
        while work:
            node, pos = work[-1]
            if pos == 0:
                index_of[node] = low[node] = counter[0]
                counter[0] += 1
                stack.append(node)
                on_stack[node] = True
            advanced = False
            while pos < len(out[node]):
                dst = out[node][pos].dst
                pos += 1
                if index_of[dst] == -1:
                    work[-1] = (node, pos)
                    work.append((dst, 0))
                    advanced = True
                    break
                if on_stack[dst]:
                    low[node] = min(low[node], index_of[dst])
            if advanced:
                continue
            work.pop()
            if low[node] == index_of[node]:
                comp = []
                while True:
                    top = stack.pop()
                    on_stack[top] = False
                    comp.append(top)
                    if top == node:
                        break
                sccs.append(sorted(comp))
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[node])
    return sccs


def _path_within(
    graph: ProductGraph,
    sub_out: list[list[ProductEdge]],
    allowed: set[int],
    src: int,
    dst: int,
) -> list[ProductEdge]:
    if src == dst:
        return []
    prev: dict[int, ProductEdge] = {}
    queue = [src]
    qi = 0
    while qi < len(queue):
        cur = queue[qi]
        qi += 1
        for e in sub_out[cur]:
            if e.dst in allowed and e.dst not in prev and e.dst != src:
                prev[e.dst] = e
                if e.dst == dst:
                    qi = len(queue)
                    break
                queue.append(e.dst)
    assert dst in prev, "strongly connected component lost a path"
    rev = []
    cur = dst
    while cur != src:
        e = prev[cur]
        rev.append(e)
        cur = e.src
    return list(reversed(rev))


# ---------------------------------------------------------------------------
# Skip-embedding of action-name sequences
# ---------------------------------------------------------------------------

def seq_embed(left: Sequence[str], right: Sequence[str]) -> bool:
    """Does ``left`` embed into ``right`` matching each name at its first
    occurrence past the previous match, with the final match ending ``right``?

    Both sequences must be finite and non-empty.
    """
    if not left or not right:
        raise ValueError("seq_embed is defined on non-empty sequences")
    pos = 0
    last = len(left) - 1
    for k, name in enumerate(left):
        try:
            j = right.index(name, pos)
        except ValueError:
            return False
        if k == last:
            return j == len(right) - 1
        pos = j + 1
    return False
