"""Extracting one program per function symbol from a hierarchical automaton.

The automaton treats every *occurrence* of a function symbol independently;
a useful answer needs a single program per original symbol that keeps the
whole space satisfiable.  The search assigns symbols one at a time (most
occurrences first), draws candidate programs for one occurrence in global
cost order, propagates each candidate to every occurrence of its symbol, and
backtracks when the narrowed automaton becomes empty.

Propagation narrows an occurrence node's final states to those reachable by
running the candidate program with parameters pinned to the values still fed
by live inter-FTA edges, then drops edges sourced at retired finals.
"""

from __future__ import annotations

import time
from typing import Callable, Iterator, Mapping

from .dsl import CostModel, ProgramAst, UNIT_COSTS, render_program
from .fta import FtaState, reachable_final_states
from .hfta import (
    FlatVertex,
    Hfta,
    HftaNode,
    enumerate_trees,
    flatten,
    has_accepting_tree,
    reduce_hfta,
    useful_vertices,
)
from .lang import OccurrenceMap

DEFAULT_CANDIDATE_CAP = 10_000

TraceFn = Callable[[str], None]


def occurrence_nodes(h: Hfta, m: OccurrenceMap, f: str) -> tuple[HftaNode, ...]:
    """Nodes carrying the automata of f's occurrences, in node order."""
    occs = set(m.occurrences(f))
    return tuple(v for v in h.nodes if v.kind == "func" and v.label in occs)


def choose_unassigned(
    h: Hfta, m: OccurrenceMap, assigned: Mapping[str, ProgramAst]
) -> str | None:
    """The unassigned symbol with the most occurrences; ties break by name."""
    best: str | None = None
    best_rank: tuple[int, str] | None = None
    for f in m.forward:
        if f in assigned:
            continue
        rank = (-len(m.occurrences(f)), f)
        if best_rank is None or rank < best_rank:
            best, best_rank = f, rank
    return best


def choose_occurrence(h: Hfta, m: OccurrenceMap, f: str) -> HftaNode:
    """The occurrence of f whose automaton has the fewest final states."""
    nodes = occurrence_nodes(h, m, f)
    if not nodes:
        raise ValueError(f"no occurrence of {f!r} in the automaton")
    return min(nodes, key=lambda v: (len(h.annot[v].finals), v.uid))


def sub_hfta(h: Hfta, v: HftaNode) -> Hfta:
    """The sub-automaton rooted at ``v`` (v plus its descendants)."""
    keep: list[HftaNode] = []

    def walk(u: HftaNode) -> None:
        keep.append(u)
        for c in h.children.get(u, ()):
            walk(c)

    walk(v)
    keep_set = set(keep)
    nodes = tuple(u for u in h.nodes if u in keep_set)
    return Hfta(
        nodes,
        v,
        {u: h.annot[u] for u in nodes},
        {u: h.children.get(u, ()) for u in nodes},
        {u: h.child_params.get(u, ()) for u in nodes},
        tuple(e for e in h.inter if e.parent in keep_set),
    )


def candidate_programs(
    h: Hfta,
    v: HftaNode,
    costs: CostModel = UNIT_COSTS,
    cap: int = DEFAULT_CANDIDATE_CAP,
    *,
    useful: frozenset[FlatVertex] | None = None,
) -> Iterator[ProgramAst]:
    """Distinct programs acceptable at occurrence node ``v``, cheapest first.

    Enumerates the sub-automaton below ``v`` so sibling occurrences do not
    multiply the stream, and projects each hierarchical tree onto ``v``.
    Finals of ``v`` that cannot take part in any full accepting derivation
    are dropped first — a candidate reaching only those could never survive.
    """
    if useful is None:
        useful = useful_vertices(flatten(h, costs))
    a = h.annot[v]
    kept = frozenset(q for q in a.finals if (v, q) in useful)
    if not kept:
        return
    if kept != a.finals:
        h = h.replace({v: a.with_finals(kept)}, h.inter)
    seen: set[ProgramAst] = set()
    for t, _cost in enumerate_trees(sub_hfta(h, v), costs):
        p = t.trees[v]
        if p in seen:
            continue
        seen.add(p)
        yield p
        if len(seen) >= cap:
            return


def propagate(
    h: Hfta,
    m: OccurrenceMap,
    f: str,
    p: ProgramAst,
    *,
    useful: frozenset[FlatVertex] | None = None,
) -> Hfta:
    """Narrow every occurrence of ``f`` to the finals reachable by ``p``.

    Parameter pins are restricted to states still fed by a live inter-FTA
    edge whose endpoints can appear in a full derivation; finals that ``p``
    cannot reach retire, along with the edges they feed upward.
    """
    if useful is None:
        useful = useful_vertices(flatten(h))
    updates: dict[HftaNode, object] = {}
    retired: set[tuple[HftaNode, FtaState]] = set()
    for v in occurrence_nodes(h, m, f):
        a = h.annot[v]
        pools: dict[str, list[FtaState]] = {}
        for c, pname in zip(h.children.get(v, ()), h.child_params.get(v, ())):
            pools[pname] = sorted(
                {
                    e.target
                    for e in h.edges_into(v, pname)
                    if e.child is c
                    and (c, e.source) in useful
                    and (v, e.target) in useful
                },
                key=FtaState.sort_key,
            )
        new_finals = reachable_final_states(a, p, pools)
        for q in a.finals - new_finals:
            retired.add((v, q))
        updates[v] = a.with_finals(new_finals)
    inter = tuple(e for e in h.inter if (e.child, e.source) not in retired)
    return h.replace(updates, inter)


def find_progs(
    h: Hfta,
    m: OccurrenceMap,
    costs: CostModel = UNIT_COSTS,
    *,
    candidate_cap: int = DEFAULT_CANDIDATE_CAP,
    trace: TraceFn | None = None,
    deadline: float | None = None,
) -> dict[str, ProgramAst] | None:
    """One program per function symbol keeping the automaton satisfiable.

    Depth-first over symbols (most occurrences first); candidates for the
    tightest occurrence are tried in cost order and propagated to every
    occurrence; empty automata backtrack.  Returns None when no assignment
    within the candidate caps survives.
    """

    def go(cur: Hfta, assigned: dict[str, ProgramAst]) -> dict[str, ProgramAst] | None:
        f = choose_unassigned(cur, m, assigned)
        if f is None:
            return dict(assigned)
        t0 = time.monotonic()
        cur = reduce_hfta(cur, costs)
        flat = flatten(cur, costs)
        useful = useful_vertices(flat)
        v = choose_occurrence(cur, m, f)
        if trace:
            nstates = sum(len(cur.annot[u].states) for u in cur.nodes)
            trace(
                f"choose {f} at {v.name} ({len(cur.annot[v].finals)} finals,"
                f" {nstates} states after reduce, {time.monotonic() - t0:.2f}s)"
            )
        for p in candidate_programs(cur, v, costs, candidate_cap, useful=useful):
            if deadline is not None and time.monotonic() > deadline:
                raise TimeoutError("search deadline exceeded")
            t1 = time.monotonic()
            nxt = propagate(cur, m, f, p, useful=useful)
            t2 = time.monotonic()
            nxt_inter = set(nxt.inter)
            retired = frozenset(
                (e.child, e.source) for e in cur.inter if e not in nxt_inter
            )
            fast_ok = bool(flat.derivable(retired) & flat.finals)
            t3 = time.monotonic()
            if not fast_ok or not has_accepting_tree(reduce_hfta(nxt, costs)):
                if trace:
                    t4 = time.monotonic()
                    trace(
                        f"  {f} = {render_program(p)}: empty, backtrack"
                        f" (prop {t2 - t1:.2f}s fast {t3 - t2:.2f}s probe {t4 - t3:.2f}s)"
                    )
                continue
            if trace:
                t4 = time.monotonic()
                trace(
                    f"  {f} = {render_program(p)}: viable"
                    f" (prop {t2 - t1:.2f}s fast {t3 - t2:.2f}s probe {t4 - t3:.2f}s)"
                )
            assigned[f] = p
            result = go(nxt, assigned)
            if result is not None:
                return result
            del assigned[f]
        return None

    return go(h, {})
