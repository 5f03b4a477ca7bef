from __future__ import annotations

import pytest

from sessionkit import (
    DONE,
    ResourceLimit,
    SyncTrace,
    build_product_graph,
    contract,
    converge,
    definitely_skp_cycle,
    gen_random,
    product_step,
    seq_embed,
    sync_traces,
)
from sessionkit.lts import ActionLabel, IN, OUT, step, weak_input_names
from sessionkit.product import SKP, TAU, SILENT_L, SILENT_R
from sessionkit.syntax import Done
from conftest import BALLOT_MALICIOUS, VOTER, random_pairs


def kinds(client_text, server_text):
    steps = product_step(contract(client_text), contract(server_text))
    return sorted((st.kind, st.action) for st in steps)


# -- pair steps ---------------------------------------------------------------

def test_unreceivable_output_is_skipped_not_deferred():
    assert kinds("a", "!b.!a.!b.!a") == [(SKP, "b")]


def test_receivable_output_must_synchronize():
    assert kinds("a", "!a.!b.!a") == [(TAU, "a")]


def test_finished_pair_has_no_steps():
    assert kinds("1", "1") == []


def test_server_inputs_are_never_skipped():
    # client waits on b, server waits on a: both stuck, no skip of an input
    assert kinds("b", "a") == []


def test_silent_steps_carry_their_side():
    steps = product_step(contract("rec x. a.x"), contract("!b (+) !c"))
    got = sorted(st.kind for st in steps)
    assert got == [SILENT_L, SILENT_R, SILENT_R]


def test_skip_blocked_when_input_reachable_after_client_silent_steps():
    # the client only inputs a after unfolding, still no skp of !a
    assert kinds("rec x. a.x", "!a.1") == [(SILENT_L, None)]


# -- pair graphs ----------------------------------------------------------------

def test_trivial_pair_graph():
    graph = build_product_graph(DONE, DONE)
    assert len(graph.configs) == 1 and not graph.edges


def test_skip_then_handshake_path_reaches_completion():
    graph = build_product_graph(contract("b"), contract("!a.!b"))
    assert (contract("1"), contract("1")) in graph.index
    path_kinds = [e.kind for e in graph.edges]
    assert SKP in path_kinds and TAU in path_kinds


def test_pair_graphs_stay_finite_on_random_pairs():
    cap = 100_000
    for client, server in random_pairs(10_000, seed_base=50_000):
        graph = build_product_graph(client, server, cap=cap)
        assert len(graph.configs) < cap


def test_pair_graph_cap_is_an_error():
    with pytest.raises(ResourceLimit):
        build_product_graph(
            contract("rec x. a.x + b.x"), contract("rec x. !a.x (+) !b.x"), cap=3
        )


def test_skip_side_condition_on_random_pairs():
    for client, server in random_pairs(2000, seed_base=11_000):
        graph = build_product_graph(client, server)
        for edge in graph.edges:
            if edge.kind != SKP:
                continue
            client_term = graph.configs[edge.src][0]
            assert edge.action not in weak_input_names(client_term)


def test_every_tau_edge_reconstructs_one_handshake():
    for client, server in random_pairs(2000, seed_base=23_000):
        graph = build_product_graph(client, server)
        for edge in graph.edges:
            if edge.kind != TAU:
                continue
            c, s = graph.configs[edge.src]
            c2, s2 = graph.configs[edge.dst]
            matches = [
                (cst.label, sst.label)
                for cst in step(c)
                if isinstance(cst.label, ActionLabel) and cst.target == c2
                for sst in step(s)
                if isinstance(sst.label, ActionLabel) and sst.target == s2
                and sst.label == cst.label.dual()
            ]
            assert len(matches) == 1
            assert matches[0][0].name == edge.action


# -- synchronization traces -----------------------------------------------------

def test_finished_client_yields_only_the_tick_trace():
    for server_text in ("1", "!a.!b", "rec x. !a.x"):
        got = sync_traces(DONE, contract(server_text), bound=4)
        assert got == frozenset({SyncTrace((), tick=True)})


def test_malicious_service_shows_endless_skipping(voter, ballot_malicious):
    got = sync_traces(voter, ballot_malicious, bound=6)
    assert got == frozenset(
        {SyncTrace((TAU, TAU, SKP, SKP, SKP, SKP), truncated=True)}
    )
    assert str(next(iter(got))) == "τ τ skp skp skp skp (truncated)"


def test_stuck_after_one_skip_is_a_finite_non_tick_trace():
    got = sync_traces(contract("a"), contract("!b.1"), bound=3)
    assert got == frozenset({SyncTrace((SKP,))})


def test_sync_trace_set_respects_the_cap():
    with pytest.raises(ResourceLimit):
        sync_traces(
            contract("rec x. a.x + b.x + c.x"),
            contract("rec x. !a.x (+) !b.x (+) !c.x"),
            bound=40,
            trace_cap=50,
        )


# -- skip-only loops -------------------------------------------------------------

def test_waiting_client_against_output_loop_is_a_skip_lasso():
    graph = build_product_graph(contract("b"), contract("rec x. !a.x (+) !b"))
    lasso = definitely_skp_cycle(graph)
    assert lasso is not None
    assert any(st.kind == SKP for st in lasso.cycle)
    assert all(st.kind != TAU for st in lasso.cycle)
    committed = (contract("b"), contract("!a.rec x. !a.x (+) !b"))
    cycle_nodes = {st.target for st in lasso.cycle}
    assert committed in cycle_nodes


def test_regular_skipping_with_handshakes_is_not_a_lasso():
    graph = build_product_graph(contract("rec x. b.x"), contract("rec x. !a.!a.!b.x"))
    assert definitely_skp_cycle(graph) is None


def test_no_skip_edges_means_no_lasso(voter, ballot_ab):
    graph = build_product_graph(voter, ballot_ab)
    assert not any(e.kind == SKP for e in graph.edges)
    assert definitely_skp_cycle(graph) is None


def test_loop_client_that_can_complete_is_benign():
    graph = build_product_graph(contract("rec x. 1"), contract("rec x. !a.x"))
    assert definitely_skp_cycle(graph) is None


# -- faithfulness of traces against the graph verdicts ----------------------------
#
# Anchor-level reading of the trace equations: a node counts as an anchor when
# it is the root or can be reached by a handshake/skip hop followed by silent
# steps; a run fails finitely only at an anchor with an unfinished client and
# no reachable synchronization, and fails infinitely only through a skip loop
# whose nodes keep an unfinished client.

def _anchor_view(graph):
    n = len(graph.configs)
    silent_out = [[] for _ in range(n)]
    sync_out = [[] for _ in range(n)]
    for e in graph.edges:
        (silent_out[e.src] if e.kind in (SILENT_L, SILENT_R) else sync_out[e.src]).append(e)

    def closure(nid):
        seen = {nid}
        queue = [nid]
        while queue:
            cur = queue.pop()
            for e in silent_out[cur]:
                if e.dst not in seen:
                    seen.add(e.dst)
                    queue.append(e.dst)
        return seen

    succ = {}
    for nid in range(n):
        acc = set()
        for u in closure(nid):
            for e in sync_out[u]:
                acc.update((e.kind, w) for w in closure(e.dst))
        succ[nid] = acc
    return succ


def _literal_verdict(graph):
    """(has stuck anchor, has skip loop with a literally-unfinished client)."""
    succ = _anchor_view(graph)
    root_client = graph.configs[graph.root][0]
    if type(root_client) is Done:
        return (False, False)
    anchors = {graph.root}
    queue = [graph.root]
    while queue:
        cur = queue.pop()
        if type(graph.configs[cur][0]) is Done:
            continue  # the run ends with a tick here
        for _, nxt in succ[cur]:
            if nxt not in anchors:
                anchors.add(nxt)
                queue.append(nxt)
    stuck = any(
        not succ[a] and type(graph.configs[a][0]) is not Done for a in anchors
    )
    # skip loop: a cycle among anchors using only skp hops would do, but any
    # silent+skp cycle with a literally-unfinished client is reachable iff one
    # of its nodes is an anchor-reachable skp source; detect via DFS on the
    # skp-successor relation restricted to non-finished anchors.
    skp_succ = {
        a: {w for kind, w in succ[a] if kind == SKP and type(graph.configs[w][0]) is not Done}
        for a in anchors
        if type(graph.configs[a][0]) is not Done
    }
    color = {}
    def cyclic(node):
        state = color.get(node)
        if state == 1:
            return True
        if state == 2:
            return False
        color[node] = 1
        out = any(cyclic(nxt) for nxt in skp_succ.get(node, ()))
        color[node] = 2
        return out
    lasso = any(cyclic(a) for a in list(skp_succ))
    return (stuck, lasso)


def test_trace_sets_match_the_literal_graph_verdict():
    checked = 0
    for client, server in random_pairs(400, seed_base=31_000, max_depth=3, alphabet=3):
        graph = build_product_graph(client, server)
        bound = 2 * len(graph.configs) + 1
        try:
            traces = sync_traces(client, server, bound=bound, trace_cap=30_000)
        except ResourceLimit:
            continue
        checked += 1
        stuck, lasso = _literal_verdict(graph)
        n = len(graph.configs)
        saw_finite_failure = any(not t.truncated and not t.tick for t in traces)
        saw_skip_tail = any(
            t.truncated and len(t.steps) > n and all(s == SKP for s in t.steps[-(n + 1):])
            for t in traces
        )
        assert saw_finite_failure == stuck
        assert saw_skip_tail == lasso
    assert checked > 300


# -- embedding of action sequences ------------------------------------------------

def test_embedding_examples():
    assert seq_embed("bbad", "abababd")
    assert seq_embed("ad", "abababd")
    assert not seq_embed("ad", "bbaa")


def test_embedding_requires_matching_final_element():
    assert seq_embed("b", "aab")
    assert not seq_embed("b", "aaba")


def test_embedding_first_occurrence_rule():
    assert not seq_embed("ba", "aba")  # the b match would skip an earlier a? no: a after b exists
    assert seq_embed("ba", "ba")
    assert not seq_embed("a", "aa")  # first occurrence is not final


def test_embedding_rejects_empty_sequences():
    with pytest.raises(ValueError):
        seq_embed("", "a")
    with pytest.raises(ValueError):
        seq_embed("a", "")


def test_embedding_is_transitive_on_random_triples():
    import random

    rng = random.Random(99)
    names = "abcd"
    found = 0
    for _ in range(20_000):
        x = "".join(rng.choice(names) for _ in range(rng.randint(1, 4)))
        y = "".join(rng.choice(names) for _ in range(rng.randint(1, 6)))
        z = "".join(rng.choice(names) for _ in range(rng.randint(1, 8)))
        if seq_embed(x, y) and seq_embed(y, z):
            found += 1
            assert seq_embed(x, z)
    assert found > 100
