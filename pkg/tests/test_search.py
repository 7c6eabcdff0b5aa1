"""Program extraction: occurrence choice, propagation, backtracking search."""

from __future__ import annotations

import itertools
import time

import pytest

from relsynth import (
    build_hfta,
    enumerate_trees,
    evaluate_ground,
    has_accepting_tree,
    is_empty,
    parse_program,
    parse_spec,
    relax,
    render_program,
    vint,
)
from relsynth.lang import BoundProgram
from relsynth.search import (
    candidate_programs,
    choose_occurrence,
    choose_unassigned,
    find_progs,
    occurrence_nodes,
    propagate,
    sub_hfta,
)

from oracles import (
    DOUBLING_GRAMMAR,
    LINEAR_GRAMMAR,
    all_programs,
    random_tiny_problem,
    register_toy_constructors,
)

register_toy_constructors()


def build(example: str, grammars, size_bound=3):
    decls = "\n".join(f"fun {f} : Int -> Int grammar {f}.g;" for f in sorted(grammars))
    spec = parse_spec(decls + "\nexample " + example + ";")
    phi = spec.examples[0]
    relaxed, m = relax(phi, set(grammars))
    h = build_hfta(relaxed, grammars, m, size_bound)
    return phi, m, h


SHARED = {"f": LINEAR_GRAMMAR, "g": DOUBLING_GRAMMAR}


# ---------------------------------------------------------------------------
# Choice heuristics
# ---------------------------------------------------------------------------


def test_symbol_with_most_occurrences_first():
    _, m, h = build("f(2) == g(f(1))", SHARED)
    assert choose_unassigned(h, m, {}) == "f"
    assert choose_unassigned(h, m, {"f": object()}) == "g"
    assert choose_unassigned(h, m, {"f": object(), "g": object()}) is None


def test_occurrence_with_fewest_finals_wins():
    _, m, h = build("f(2) == g(f(1))", SHARED)
    v = choose_occurrence(h, m, "f")
    f_nodes = occurrence_nodes(h, m, "f")
    assert v in f_nodes
    assert len(h.annot[v].finals) == min(len(h.annot[u].finals) for u in f_nodes)
    with pytest.raises(ValueError):
        choose_occurrence(h, m, "missing")


def test_sub_automaton_scopes_to_descendants():
    _, m, h = build("f(2) == g(f(1))", SHARED)
    (g_node,) = occurrence_nodes(h, m, "g")
    sub = sub_hfta(h, g_node)
    assert sub.root is g_node
    labels = {v.label for v in sub.nodes}
    assert labels == {"g#1", "f#2", "1"}
    assert has_accepting_tree(sub)


# ---------------------------------------------------------------------------
# Candidate enumeration
# ---------------------------------------------------------------------------


def test_candidates_come_cheapest_first_without_duplicates():
    _, m, h = build("f(2) == g(f(1))", SHARED)
    v = choose_occurrence(h, m, "f")
    got = [render_program(p) for p in candidate_programs(h, v)]
    assert got == ["x", "inc(x)", "inc(inc(x))"]


def test_candidate_cap_truncates_the_stream():
    _, m, h = build("f(2) == g(f(1))", SHARED)
    v = choose_occurrence(h, m, "f")
    got = [render_program(p) for p in candidate_programs(h, v, cap=2)]
    assert got == ["x", "inc(x)"]


# ---------------------------------------------------------------------------
# Propagation
# ---------------------------------------------------------------------------


def test_propagate_pins_every_occurrence():
    _, m, h = build("f(2) == g(f(1))", SHARED)
    p = parse_program(LINEAR_GRAMMAR, "x")
    nxt = propagate(h, m, "f", p)
    finals = {
        v.label: {q.value.data for q in nxt.annot[v].finals}
        for v in occurrence_nodes(nxt, m, "f")
    }
    assert finals == {"f#1": {2}, "f#2": {1}}
    assert has_accepting_tree(nxt)


def test_propagate_can_empty_the_automaton():
    # f = inc(x) forces g(2) == 3, unreachable by repeated doubling.
    _, m, h = build("f(2) == g(f(1))", SHARED)
    p = parse_program(LINEAR_GRAMMAR, "inc(x)")
    nxt = propagate(h, m, "f", p)
    assert is_empty(nxt)


def test_propagate_shrinks_the_language():
    _, m, h = build("f(2) == g(f(1))", SHARED)
    whole = {
        tuple(render_program(t.trees[v]) for v in h.nodes)
        for t, _ in enumerate_trees(h)
    }
    for text in ("x", "inc(x)", "inc(inc(x))"):
        nxt = propagate(h, m, "f", parse_program(LINEAR_GRAMMAR, text))
        part = {
            tuple(render_program(t.trees[v]) for v in nxt.nodes)
            for t, _ in enumerate_trees(nxt)
        }
        assert part <= whole


def test_propagate_drops_retired_inter_edges():
    _, m, h = build("f(2) == g(f(1))", SHARED)
    nxt = propagate(h, m, "f", parse_program(LINEAR_GRAMMAR, "x"))
    assert set(nxt.inter) < set(h.inter)
    for e in nxt.inter:
        assert e.source in nxt.annot[e.child].finals


# ---------------------------------------------------------------------------
# Full search
# ---------------------------------------------------------------------------


def test_finds_the_cheapest_consistent_assignment():
    phi, m, h = build("f(2) == g(f(1))", SHARED)
    result = find_progs(h, m)
    assert result is not None
    assert render_program(result["f"]) == "x"
    assert render_program(result["g"]) == "dbl(y)"
    bound = {f: BoundProgram(SHARED[f], p) for f, p in result.items()}
    assert evaluate_ground(phi, bound)


def test_one_symbol_must_satisfy_both_conjuncts():
    phi, m, h = build("f(1) == 2 && f(2) == 3", {"f": LINEAR_GRAMMAR})
    result = find_progs(h, m)
    assert result is not None
    assert render_program(result["f"]) == "inc(x)"


def test_conflicting_conjuncts_force_none():
    # Occurrence-wise the automaton is satisfiable (f#1 = x, f#2 = inc(x)),
    # but no single program covers both conjuncts.
    _, m, h = build("f(1) == 1 && f(2) == 3", {"f": LINEAR_GRAMMAR})
    assert not is_empty(h)
    assert find_progs(h, m) is None


def test_unreachable_target_gives_none():
    _, m, h = build("f(1) == 0", {"f": LINEAR_GRAMMAR})
    assert find_progs(h, m) is None


def test_candidate_cap_limits_the_search():
    _, m, h = build("f(2) == g(f(1))", SHARED)
    assert find_progs(h, m, candidate_cap=1) is None
    assert find_progs(h, m, candidate_cap=2) is not None


def test_expired_deadline_raises():
    _, m, h = build("f(2) == g(f(1))", SHARED)
    with pytest.raises(TimeoutError):
        find_progs(h, m, deadline=time.monotonic() - 1.0)


def test_trace_reports_choices():
    _, m, h = build("f(2) == g(f(1))", SHARED)
    lines: list[str] = []
    assert find_progs(h, m, trace=lines.append) is not None
    assert any(line.startswith("choose f") for line in lines)
    assert any("viable" in line for line in lines)


# ---------------------------------------------------------------------------
# Randomized soundness / completeness against brute force
# ---------------------------------------------------------------------------


def brute_force(problem):
    names = sorted(problem.grammars)
    spaces = [all_programs(problem.grammars[f], problem.size_bound) for f in names]
    out = []
    for combo in itertools.product(*spaces):
        progs = {
            f: BoundProgram(problem.grammars[f], t) for f, t in zip(names, combo)
        }
        if evaluate_ground(problem.phi, progs):
            out.append(progs)
    return out


def test_search_agrees_with_brute_force_on_random_problems():
    import random

    rng = random.Random(20240817)
    solvable = unsolvable = 0
    for _ in range(40):
        problem = random_tiny_problem(rng)
        relaxed, m = relax(problem.phi, set(problem.grammars))
        h = build_hfta(relaxed, problem.grammars, m, problem.size_bound)
        result = find_progs(h, m)
        witnesses = brute_force(problem)
        assert (result is not None) == bool(witnesses)
        if result is None:
            unsolvable += 1
            continue
        solvable += 1
        bound = {
            f: BoundProgram(problem.grammars[f], p) for f, p in result.items()
        }
        assert evaluate_ground(problem.phi, bound)
    # The generator must exercise both outcomes for the check to mean much.
    assert solvable >= 5 and unsolvable >= 5
