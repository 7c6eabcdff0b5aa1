"""Bottom-up finite tree automata over (grammar symbol, value) states.

States pair a grammar symbol (or parameter name) with the concrete value that
any tree reaching the state evaluates to.  Construction seeds one state per
parameter value, then closes under the grammar productions, gating each
application by the surface size of the smallest tree that could produce it.
Identity productions (``E -> M``, ``B -> x``) become zero-size unary ``id``
transitions; surface program trees never contain identity nodes.

Because states are interned on (symbol, value), an automaton may also accept
trees *larger* than the construction bound whose subtree values collide with
small trees; consumers that need the exactly-bounded language filter by tree
size (see :mod:`relsynth.hfta`).
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Mapping, Sequence

from .dsl import Grammar, ProgramAst, apply_constructor
from .values import Value, render_literal

DEFAULT_SIZE_BOUND = 6
DEFAULT_STATE_CEILING = 5_000_000


class CapacityExceeded(Exception):
    """Raised when an automaton would exceed the configured state ceiling."""


@dataclass(frozen=True)
class FtaState:
    symbol: str
    value: Value

    def render(self, final: bool = False) -> str:
        star = "*" if final else ""
        return f"{star}q_{self.symbol}^{render_literal(self.value)}"

    def sort_key(self) -> tuple:
        return (self.symbol, self.value.sort_key())


@dataclass(frozen=True)
class Transition:
    """``ctor(inputs...) -> output``; ctor None is the identity transition."""

    ctor: str | None
    inputs: tuple[FtaState, ...]
    output: FtaState

    @property
    def is_identity(self) -> bool:
        return self.ctor is None

    def render(self, finals: frozenset[FtaState] = frozenset()) -> str:
        name = self.ctor if self.ctor is not None else "id"
        args = ",".join(q.render(q in finals) for q in self.inputs)
        return f"{name}({args}) -> {self.output.render(self.output in finals)}"


@dataclass(frozen=True, eq=False)
class Fta:
    states: frozenset[FtaState]
    alphabet: frozenset[str]
    finals: frozenset[FtaState]
    transitions: frozenset[Transition]
    grammar: Grammar | None = None
    min_sizes: Mapping[FtaState, int] | None = None

    @cached_property
    def by_output(self) -> Mapping[FtaState, tuple[Transition, ...]]:
        idx: dict[FtaState, list[Transition]] = {}
        for t in self.transitions:
            idx.setdefault(t.output, []).append(t)
        return {k: tuple(v) for k, v in idx.items()}

    @cached_property
    def by_head(self) -> Mapping[tuple[str | None, FtaState | None], tuple[Transition, ...]]:
        """Transitions keyed by (ctor, first input state); nullary use None."""
        idx: dict[tuple[str | None, FtaState | None], list[Transition]] = {}
        for t in self.transitions:
            head = t.inputs[0] if t.inputs else None
            idx.setdefault((t.ctor, head), []).append(t)
        return {k: tuple(v) for k, v in idx.items()}

    @cached_property
    def identity_next(self) -> Mapping[FtaState, tuple[FtaState, ...]]:
        idx: dict[FtaState, list[FtaState]] = {}
        for t in self.transitions:
            if t.is_identity:
                idx.setdefault(t.inputs[0], []).append(t.output)
        return {k: tuple(v) for k, v in idx.items()}

    @cached_property
    def param_symbols(self) -> frozenset[str]:
        """Parameter names: targets of nullary transitions named like the state."""
        return frozenset(
            t.ctor
            for t in self.transitions
            if t.ctor is not None and not t.inputs and t.output.symbol == t.ctor
        )

    def param_states(self, name: str) -> tuple[FtaState, ...]:
        qs = [q for q in self.states if q.symbol == name]
        qs.sort(key=FtaState.sort_key)
        return tuple(qs)

    def identity_closure(self, qs: Iterable[FtaState]) -> frozenset[FtaState]:
        seen = set(qs)
        frontier = list(seen)
        while frontier:
            q = frontier.pop()
            for nxt in self.identity_next.get(q, ()):
                if nxt not in seen:
                    seen.add(nxt)
                    frontier.append(nxt)
        return frozenset(seen)

    def with_finals(self, finals: Iterable[FtaState]) -> "Fta":
        return Fta(
            self.states,
            self.alphabet,
            frozenset(finals) & self.states,
            self.transitions,
            self.grammar,
            self.min_sizes,
        )


def dump_fta(a: Fta) -> str:
    """One transition per line, ``σ(q_sym^val,...) -> q_sym^val``, finals starred."""
    lines = sorted(
        t.render(a.finals) for t in a.transitions
    )
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# Construction
# ---------------------------------------------------------------------------


def _initial_values(qs: Iterable[FtaState | Value]) -> list[Value]:
    vals = []
    for q in qs:
        vals.append(q.value if isinstance(q, FtaState) else q)
    vals.sort(key=Value.sort_key)
    out = []
    for v in vals:
        if not out or out[-1] != v:
            out.append(v)
    return out


def build_fta(
    g: Grammar,
    initial: Sequence[Iterable[FtaState | Value]],
    size_bound: int = DEFAULT_SIZE_BOUND,
    *,
    state_ceiling: int = DEFAULT_STATE_CEILING,
) -> Fta:
    """Close the grammar's productions over the given per-parameter value sets.

    ``initial[i]`` supplies the values parameter ``x_i`` may take (as raw
    values or as states of a child automaton, whose symbols are ignored).  A
    production fires only while 1 + Σ min-tree-size(children) stays within
    ``size_bound``; final states are all start-symbol states.
    """
    if len(initial) != len(g.params):
        raise ValueError(
            f"grammar {g.name} has {len(g.params)} parameters, got {len(initial)} initial sets"
        )
    if size_bound < 1:
        raise ValueError("size_bound must be at least 1")

    intern: dict[tuple[str, Value], FtaState] = {}
    min_size: dict[FtaState, int] = {}
    by_symbol: dict[str, list[FtaState]] = {}
    transitions: set[Transition] = set()
    queue: deque[FtaState] = deque()

    def state(symbol: str, value: Value) -> FtaState:
        key = (symbol, value)
        q = intern.get(key)
        if q is None:
            q = FtaState(symbol, value)
            intern[key] = q
            by_symbol.setdefault(symbol, []).append(q)
            if len(intern) > state_ceiling:
                raise CapacityExceeded(
                    f"{len(intern)} states exceeds the ceiling of {state_ceiling}"
                )
        return q

    def record(q: FtaState, size: int) -> None:
        old = min_size.get(q)
        if old is None or size < old:
            min_size[q] = size
            queue.append(q)

    # Input rule: one parameter state per distinct value.
    for (pname, _sort), qs in zip(g.params, initial):
        for v in _initial_values(qs):
            q = state(pname, v)
            transitions.add(Transition(pname, (), q))
            record(q, 1)

    # Constant productions seed their states unconditionally (size 1).
    for prod in g.productions:
        if prod.ctor is not None and not prod.rhs:
            ctor = g.constructors[prod.ctor]
            q = state(prod.lhs, apply_constructor(ctor, ()))
            transitions.add(Transition(prod.ctor, (), q))
            record(q, 1)

    # Index productions by the symbols they consume.
    consumers: dict[str, list] = {}
    for prod in g.productions:
        for sym in set(prod.rhs):
            consumers.setdefault(sym, []).append(prod)

    def fire(prod, fixed_pos: int, fixed_state: FtaState) -> None:
        pools = []
        for i, sym in enumerate(prod.rhs):
            pools.append([fixed_state] if i == fixed_pos else by_symbol.get(sym, []))
        for combo in itertools.product(*pools):
            if prod.ctor is None:
                src = combo[0]
                size = min_size[src]
                out = state(prod.lhs, src.value)
                transitions.add(Transition(None, (src,), out))
                record(out, size)
                continue
            size = 1 + sum(min_size[q] for q in combo)
            if size > size_bound:
                continue
            value = apply_constructor(g.constructors[prod.ctor], tuple(q.value for q in combo))
            out = state(prod.lhs, value)
            transitions.add(Transition(prod.ctor, tuple(combo), out))
            record(out, size)

    while queue:
        q = queue.popleft()
        for prod in consumers.get(q.symbol, ()):
            for pos, sym in enumerate(prod.rhs):
                if sym == q.symbol:
                    fire(prod, pos, q)

    states = frozenset(intern.values())
    finals = frozenset(q for q in states if q.symbol == g.start)
    alphabet = frozenset(c.name for c in g.constructors.values()) | frozenset(g.param_names)
    return Fta(states, alphabet, finals, frozenset(transitions), g, dict(min_size))


def build_fta_for_example(
    g: Grammar,
    e_in: Sequence[Value],
    e_out: Value,
    size_bound: int = DEFAULT_SIZE_BOUND,
    *,
    state_ceiling: int = DEFAULT_STATE_CEILING,
) -> Fta:
    """The single-example special case: singleton inputs, one accepting value."""
    a = build_fta(g, [[v] for v in e_in], size_bound, state_ceiling=state_ceiling)
    return a.with_finals([FtaState(g.start, e_out)])


# ---------------------------------------------------------------------------
# Running trees
# ---------------------------------------------------------------------------

FtaRun = Mapping[tuple[int, ...], FtaState]


def _leaf_params(a: Fta, t: ProgramAst) -> tuple[str, ...]:
    names: list[str] = []

    def walk(n: ProgramAst) -> None:
        if not n.children and n.node in a.param_symbols:
            if n.node not in names:
                names.append(n.node)
        for c in n.children:
            walk(c)

    walk(t)
    return tuple(names)


def _run_tree(
    a: Fta, t: ProgramAst, binding: Mapping[str, FtaState]
) -> tuple[frozenset[FtaState], dict]:
    """States reachable at the root (identity-closed), with provenance.

    Provenance maps (path, state) -> (transition, child direct states); the
    ``binding`` pins every leaf occurrence of a parameter to one state.
    """
    prov: dict = {}

    def go(n: ProgramAst, path: tuple[int, ...]) -> frozenset[FtaState]:
        if not n.children and n.node in binding:
            q = binding[n.node]
            prov[(path, q)] = (None, ())
            return a.identity_closure([q])
        direct: set[FtaState] = set()
        if not n.children:
            for tr in a.by_head.get((n.node, None), ()):
                direct.add(tr.output)
                prov[(path, tr.output)] = (tr, ())
        else:
            child_sets = [go(c, path + (i,)) for i, c in enumerate(n.children)]
            for q0 in child_sets[0]:
                for tr in a.by_head.get((n.node, q0), ()):
                    if len(tr.inputs) != len(child_sets):
                        continue
                    if all(qi in cs for qi, cs in zip(tr.inputs, child_sets)):
                        direct.add(tr.output)
                        prov[(path, tr.output)] = (tr, tr.inputs)
        closed = set(direct)
        frontier = list(direct)
        while frontier:
            q = frontier.pop()
            for nxt in a.identity_next.get(q, ()):
                if nxt not in closed:
                    closed.add(nxt)
                    prov[(path, nxt)] = prov.get((path, nxt), ((q,), None))
                    frontier.append(nxt)
        return frozenset(closed)

    return go(t, ()), prov


def _bindings(
    a: Fta,
    names: tuple[str, ...],
    pools: Mapping[str, Sequence[FtaState]] | None = None,
):
    chosen = [
        tuple(pools[n]) if pools is not None and n in pools else a.param_states(n)
        for n in names
    ]
    for combo in itertools.product(*chosen):
        yield dict(zip(names, combo))


def reachable_final_states(
    a: Fta,
    p: ProgramAst,
    pools: Mapping[str, Sequence[FtaState]] | None = None,
) -> frozenset[FtaState]:
    """Final states that root a run of ``p``, over every consistent pinning of
    parameter leaves to parameter states.

    ``pools`` optionally narrows the states a parameter may pin to (callers
    track which values are still fed by upstream automata); parameters not
    listed use every matching state.
    """
    names = _leaf_params(a, p)
    out: set[FtaState] = set()
    for binding in _bindings(a, names, pools):
        roots, _ = _run_tree(a, p, binding)
        out |= roots & a.finals
    return frozenset(out)


def accepts(a: Fta, t: ProgramAst) -> FtaRun | None:
    """An accepting run of ``t``, or None.  Identity steps stay implicit: each
    AST node maps to the state its constructor produces directly."""
    names = _leaf_params(a, t)
    for binding in _bindings(a, names):
        roots, prov = _run_tree(a, t, binding)
        hits = sorted(roots & a.finals, key=FtaState.sort_key)
        if not hits:
            continue
        run: dict[tuple[int, ...], FtaState] = {}

        def assign(n: ProgramAst, path: tuple[int, ...], q: FtaState) -> None:
            # Walk identity provenance back to the constructor's direct state.
            entry = prov.get((path, q))
            while entry is not None and entry[1] is None:
                q = entry[0][0]
                entry = prov.get((path, q))
            run[path] = q
            if entry is None:
                return
            tr, child_states = entry
            if tr is None or not child_states:
                return
            for i, (c, cq) in enumerate(zip(n.children, child_states)):
                assign(c, path + (i,), cq)

        assign(t, (), hits[0])
        return run
    return None
