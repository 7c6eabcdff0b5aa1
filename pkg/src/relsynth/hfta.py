"""Hierarchical finite tree automata: the relational version space.

An HFTA is a tree of nodes, one per subterm/subformula of a relaxed ground
formula.  Each node carries an FTA; inter-FTA transitions link a child node's
final states to the parameter states of its parent, so values flow upward.
A hierarchical tree assigns one program tree to every node; it is accepted
when every per-node tree is accepted by its node's FTA under a single shared
run in which all leaf occurrences of a parameter pin to the child final state
chosen for that edge.

Enumeration yields accepted hierarchical trees lazily in non-decreasing total
cost (the sum of per-node program costs), using per-state k-best derivation
streams that carry parameter pins, composed across nodes through the
inter-FTA links.
"""

from __future__ import annotations

import heapq
import itertools
from collections import defaultdict
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Iterable, Iterator, Mapping, Sequence

from .dsl import (
    Constructor,
    CostModel,
    Grammar,
    Production,
    ProgramAst,
    UNIT_COSTS,
    program_cost,
    trivial_grammar,
)
from .fta import (
    DEFAULT_SIZE_BOUND,
    DEFAULT_STATE_CEILING,
    Fta,
    FtaState,
    Transition,
    build_fta,
    dump_fta,
)
from .lang import (
    Apply,
    Atom,
    Binary,
    Const,
    Formula,
    Neg,
    OccurrenceMap,
    Term,
    eval_atom,
)
from .values import (
    DEFAULT_INTERPRETED,
    InterpretedFn,
    Value,
    render_literal,
    vbool,
)


class ShapeMismatch(Exception):
    """A hierarchical tree whose node structure differs from the HFTA's."""


@dataclass(frozen=True, eq=False)
class HftaNode:
    uid: int
    kind: str  # "const" | "func" | "logical" | "neg"
    label: str
    size_cap: int

    @property
    def name(self) -> str:
        return f"v{self.uid}:{self.label}"

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        return self.name


@dataclass(frozen=True)
class InterEdge:
    """Λ transition: a child final state feeding a parent parameter state."""

    child: HftaNode
    parent: HftaNode
    source: FtaState
    target: FtaState


@dataclass(frozen=True, eq=False)
class Hfta:
    nodes: tuple[HftaNode, ...]
    root: HftaNode
    annot: Mapping[HftaNode, Fta]
    children: Mapping[HftaNode, tuple[HftaNode, ...]]
    child_params: Mapping[HftaNode, tuple[str, ...]]  # aligned with children
    inter: tuple[InterEdge, ...]

    @cached_property
    def _edges_into(self) -> Mapping[tuple[HftaNode, str], tuple[InterEdge, ...]]:
        idx: dict[tuple[HftaNode, str], list[InterEdge]] = {}
        for e in self.inter:
            idx.setdefault((e.parent, e.target.symbol), []).append(e)
        return {k: tuple(v) for k, v in idx.items()}

    @cached_property
    def _edge_by_target(self) -> Mapping[tuple[HftaNode, FtaState], InterEdge]:
        return {(e.parent, e.target): e for e in self.inter}

    def edges_into(self, parent: HftaNode, param: str) -> tuple[InterEdge, ...]:
        return self._edges_into.get((parent, param), ())

    def edge_feeding(self, parent: HftaNode, target: FtaState) -> InterEdge | None:
        return self._edge_by_target.get((parent, target))

    def child_for_param(self, v: HftaNode, param: str) -> HftaNode | None:
        for c, p in zip(self.children.get(v, ()), self.child_params.get(v, ())):
            if p == param:
                return c
        return None

    def total_states(self) -> int:
        return sum(len(a.states) for a in self.annot.values())

    def replace(
        self,
        annot_updates: Mapping[HftaNode, Fta],
        inter: tuple[InterEdge, ...] | None = None,
    ) -> "Hfta":
        new_annot = dict(self.annot)
        new_annot.update(annot_updates)
        return Hfta(
            self.nodes,
            self.root,
            new_annot,
            self.children,
            self.child_params,
            self.inter if inter is None else inter,
        )


@dataclass(frozen=True, eq=False)
class HierarchicalTree:
    """One program tree per HFTA node (the Υ map), sharing the HFTA's shape."""

    nodes: tuple[HftaNode, ...]
    trees: Mapping[HftaNode, ProgramAst]
    root: HftaNode
    edges: tuple[tuple[HftaNode, HftaNode], ...]

    def tree_at(self, v: HftaNode) -> ProgramAst:
        return self.trees[v]


def make_hierarchical_tree(h: Hfta, trees: Mapping[HftaNode, ProgramAst]) -> HierarchicalTree:
    edges = tuple((v, c) for v in h.nodes for c in h.children.get(v, ()))
    return HierarchicalTree(h.nodes, dict(trees), h.root, edges)


def single_node_hfta(a: Fta, label: str = "f", size_cap: int | None = None) -> Hfta:
    """Wrap one FTA as a single-node HFTA (free parameters keep their inputs)."""
    cap = size_cap if size_cap is not None else _infer_cap(a)
    node = HftaNode(0, "func", label, cap)
    return Hfta((node,), node, {node: a}, {node: ()}, {node: ()}, ())


def _infer_cap(a: Fta) -> int:
    if a.min_sizes:
        return max(DEFAULT_SIZE_BOUND, max(a.min_sizes.values()))
    return DEFAULT_SIZE_BOUND


# ---------------------------------------------------------------------------
# Construction (Const / Func / Logical / Neg / Final rules)
# ---------------------------------------------------------------------------


def constant_fta(value: Value) -> Fta:
    lit = render_literal(value)
    q = FtaState(lit, value)
    t = Transition(lit, (), q)
    return Fta(
        frozenset([q]),
        frozenset([lit]),
        frozenset([q]),
        frozenset([t]),
        None,
        {q: 1},
    )


def _relation_fn(op: str) -> Callable[[Value, Value], Value]:
    def fn(a: Value, b: Value) -> Value:
        return vbool(eval_atom(a, op, b))

    return fn


def _connective_fn(op: str) -> Callable[[Value, Value], Value]:
    def fn(a: Value, b: Value) -> Value:
        if a.tag != "Bool" or b.tag != "Bool":
            return vbool(False)
        x, y = a.data, b.data
        if op == "&&":
            return vbool(x and y)
        if op == "||":
            return vbool(x or y)
        if op == "=>":
            return vbool((not x) or y)
        return vbool(x == y)  # <=>

    return fn


def _not_fn(a: Value) -> Value:
    return vbool(not (a.tag == "Bool" and a.data))


def logical_grammar(op: str, fn: Callable[..., Value]) -> Grammar:
    """Two-parameter boolean-output grammar ``s0 -> op(x1, x2)``.

    The constructor does not absorb Err: a relation over Err operands is
    simply false, mirroring ground-formula evaluation.
    """
    ctor = Constructor(op, 2, fn, absorbs_err=False)
    return Grammar(
        f"logical[{op}]",
        (("x1", "Bool"), ("x2", "Bool")),
        "s0",
        (Production("s0", op, ("x1", "x2")),),
        {op: ctor},
    )


def negation_grammar() -> Grammar:
    ctor = Constructor("!", 1, _not_fn, absorbs_err=False)
    return Grammar(
        "negation",
        (("x1", "Bool"),),
        "s0",
        (Production("s0", "!", ("x1",)),),
        {"!": ctor},
    )


TRUE_STATE = FtaState("s0", vbool(True))


def build_hfta(
    phi: Formula,
    grammars: Mapping[str, Grammar],
    m: OccurrenceMap,
    size_bound: int = DEFAULT_SIZE_BOUND,
    *,
    interpreted: Mapping[str, InterpretedFn] = DEFAULT_INTERPRETED,
    state_ceiling: int = DEFAULT_STATE_CEILING,
) -> Hfta:
    """One node per subterm/subformula of a relaxed ground formula.

    ``grammars`` is keyed by original function symbol; occurrence symbols like
    f#2 look up the grammar of f.  The root node's final states are restricted
    to the true-valued start state, so the HFTA accepts exactly the
    hierarchical trees whose programs make the formula true.
    """
    nodes: list[HftaNode] = []
    annot: dict[HftaNode, Fta] = {}
    children: dict[HftaNode, tuple[HftaNode, ...]] = {}
    child_params: dict[HftaNode, tuple[str, ...]] = {}
    inter: list[InterEdge] = []

    def new_node(kind: str, label: str, cap: int) -> HftaNode:
        node = HftaNode(len(nodes), kind, label, cap)
        nodes.append(node)
        return node

    def link(parent: HftaNode, a: Fta, kids: Sequence[HftaNode], params: Sequence[str]) -> None:
        annot[parent] = a
        children[parent] = tuple(kids)
        child_params[parent] = tuple(params)
        for kid, pname in zip(kids, params):
            for qf in sorted(annot[kid].finals, key=FtaState.sort_key):
                target = FtaState(pname, qf.value)
                inter.append(InterEdge(kid, parent, qf, target))

    def term_node(t: Term) -> HftaNode:
        if isinstance(t, Const):
            node = new_node("const", render_literal(t.value), 1)
            link(node, constant_fta(t.value), (), ())
            return node
        if not isinstance(t, Apply):
            raise ValueError(f"cannot build a version space for open term {t!r}")
        kids = [term_node(a) for a in t.args]
        original = m.inverse.get(t.fn)
        if original is not None:
            g = grammars[original]
            cap = size_bound
        elif t.fn in interpreted:
            f = interpreted[t.fn]
            g = trivial_grammar(f.name, f.arity, f.apply)
            cap = f.arity + 1
        else:
            raise ValueError(f"no grammar for function symbol {t.fn!r}")
        node = new_node("func", t.fn, cap)
        a = build_fta(
            g,
            [annot[k].finals for k in kids],
            cap,
            state_ceiling=state_ceiling,
        )
        link(node, a, kids, g.param_names)
        return node

    def formula_node(f: Formula) -> HftaNode:
        if isinstance(f, Atom):
            kids = [term_node(f.lhs), term_node(f.rhs)]
            g = logical_grammar(f.op, _relation_fn(f.op))
            node = new_node("logical", f.op, 3)
        elif isinstance(f, Binary):
            kids = [formula_node(f.lhs), formula_node(f.rhs)]
            g = logical_grammar(f.op, _connective_fn(f.op))
            node = new_node("logical", f.op, 3)
        else:
            kids = [formula_node(f.body)]
            g = negation_grammar()
            node = new_node("neg", "!", 2)
        a = build_fta(
            g,
            [annot[k].finals for k in kids],
            node.size_cap,
            state_ceiling=state_ceiling,
        )
        link(node, a, kids, g.param_names)
        return node

    root = formula_node(phi)
    annot[root] = annot[root].with_finals([TRUE_STATE])
    h = Hfta(tuple(nodes), root, annot, children, child_params, tuple(inter))
    return reduce_hfta(h)


# ---------------------------------------------------------------------------
# Acceptance
# ---------------------------------------------------------------------------


def _leaf_param_names(tree: ProgramAst, params: Iterable[str]) -> frozenset[str]:
    pset = frozenset(params)
    used: set[str] = set()

    def walk(n: ProgramAst) -> None:
        if not n.children and n.node in pset:
            used.add(n.node)
        for c in n.children:
            walk(c)

    walk(tree)
    return frozenset(used)


def _node_params(h: Hfta, v: HftaNode) -> tuple[str, ...]:
    g = h.annot[v].grammar
    if g is not None and g.params:
        return g.param_names
    return h.child_params.get(v, ())


def accepts_hierarchical(h: Hfta, t: HierarchicalTree) -> bool:
    """Bottom-up acceptance with per-edge value pinning.

    For every node the chosen tree must run to a final state; a parent's tree
    pins all leaves of parameter x_i to the state fed (via a Λ edge) by the
    child final chosen for that edge.  Children whose parameter is unused in
    the parent tree still have to accept their own tree.
    """
    if set(t.trees.keys()) != set(h.nodes) or t.root is not h.root:
        raise ShapeMismatch("hierarchical tree does not share the HFTA's node structure")

    from .fta import _run_tree  # shared internal runner

    def acc(v: HftaNode) -> frozenset[FtaState]:
        a = h.annot[v]
        tree = t.trees[v]
        kids = h.children.get(v, ())
        params = h.child_params.get(v, ())
        kid_finals: dict[HftaNode, frozenset[FtaState]] = {}
        for c in kids:
            fin = acc(c)
            if not fin:
                return frozenset()
            kid_finals[c] = fin
        used = _leaf_param_names(tree, params)
        pools: list[list[FtaState]] = []
        pool_names: list[str] = []
        for c, pname in zip(kids, params):
            if pname not in used:
                continue
            targets = []
            for e in h.edges_into(v, pname):
                if e.child is c and e.source in kid_finals[c]:
                    targets.append(e.target)
            if not targets:
                return frozenset()
            targets.sort(key=FtaState.sort_key)
            pools.append(targets)
            pool_names.append(pname)
        free = [p for p in used if p not in pool_names]
        for pname in sorted(free):
            qs = list(a.param_states(pname))
            if not qs:
                return frozenset()
            pools.append(qs)
            pool_names.append(pname)
        out: set[FtaState] = set()
        for combo in itertools.product(*pools):
            binding = dict(zip(pool_names, combo))
            roots, _ = _run_tree(a, tree, binding)
            out |= roots & a.finals
        return frozenset(out)

    return bool(acc(h.root))


# ---------------------------------------------------------------------------
# Flattening to a hypergraph
# ---------------------------------------------------------------------------

FlatVertex = tuple[HftaNode, FtaState]


@dataclass(frozen=True)
class BEdge:
    label: str
    inputs: tuple[FlatVertex, ...]
    output: FlatVertex
    weight: float


@dataclass(frozen=True, eq=False)
class FlatHypergraph:
    vertices: frozenset[FlatVertex]
    b_edges: tuple[BEdge, ...]
    finals: frozenset[FlatVertex]

    def derivable(
        self, skip_lambda_sources: frozenset[FlatVertex] | None = None
    ) -> frozenset[FlatVertex]:
        """Vertices with at least one fully-derivable incoming B-edge.

        ``skip_lambda_sources`` ignores Λ edges leaving those vertices, giving
        the derivable set of the narrowed automaton without rebuilding it.
        """
        by_input: dict[FlatVertex, list[int]] = {}
        missing = []
        for i, e in enumerate(self.b_edges):
            if (
                skip_lambda_sources is not None
                and e.label == "λ"
                and e.inputs[0] in skip_lambda_sources
            ):
                missing.append(-1)  # edge removed
                continue
            missing.append(len(set(e.inputs)))
            for u in set(e.inputs):
                by_input.setdefault(u, []).append(i)
        done: set[FlatVertex] = set()
        for i, e in enumerate(self.b_edges):
            if missing[i] == 0:
                done.add(e.output)
        frontier = list(done)
        while frontier:
            u = frontier.pop()
            for i in by_input.get(u, ()):
                missing[i] -= 1
                if missing[i] == 0:
                    out = self.b_edges[i].output
                    if out not in done:
                        done.add(out)
                        frontier.append(out)
        return frozenset(done)


def reduce_hfta(h: Hfta, m: CostModel = UNIT_COSTS) -> Hfta:
    """Shed every state, transition, and Λ edge outside the useful core.

    The accepted language is untouched: a vertex outside the useful set can
    appear in no complete derivation, so nothing reachable-and-accepting is
    lost.  Downstream passes (candidate enumeration, propagation, emptiness)
    then work on the small surviving core instead of the raw construction.
    """
    flat = flatten(h, m)
    useful = useful_vertices(flat)
    updates: dict[HftaNode, Fta] = {}
    for v in h.nodes:
        a = h.annot[v]
        keep = frozenset(q for q in a.states if (v, q) in useful)
        if keep == a.states:
            continue
        updates[v] = Fta(
            keep,
            a.alphabet,
            frozenset(q for q in a.finals if q in keep),
            frozenset(
                t
                for t in a.transitions
                if t.output in keep and all(q in keep for q in t.inputs)
            ),
            a.grammar,
            {q: s for q, s in a.min_sizes.items() if q in keep} if a.min_sizes else a.min_sizes,
        )
    inter = tuple(
        e
        for e in h.inter
        if (e.child, e.source) in useful and (e.parent, e.target) in useful
    )
    if not updates and len(inter) == len(h.inter):
        return h
    return h.replace(updates, inter)


def useful_vertices(h: Hfta, flat: FlatHypergraph) -> frozenset[FlatVertex]:
    """Vertices that can take part in some accepted hierarchical tree.

    Value flow to the root is not the whole story: every node contributes a
    tree of its own, even one whose value the parent's tree never mentions.
    Working top-down, each node keeps the derivable cones of its *needed*
    finals — those fed upward by a live Λ edge, plus all of its finals when
    some parent derivation can avoid the connecting parameter (then the node
    may be "skipped" and accept anything).  Usefulness crosses an edge only
    when every input is derivable, so a dropped vertex can never appear in an
    accepted tree.
    """
    derivable = flat.derivable()

    def cone(v: HftaNode, seeds: set[FtaState]) -> set[FtaState]:
        """Derivable states co-reachable from ``seeds`` inside v's automaton."""
        a = h.annot[v]
        by_output: dict[FtaState, list[Transition]] = {}
        for tr in a.transitions:
            by_output.setdefault(tr.output, []).append(tr)
        keep = {q for q in seeds if (v, q) in derivable}
        stack = list(keep)
        while stack:
            q = stack.pop()
            for tr in by_output.get(q, ()):
                if all((v, qi) in derivable for qi in tr.inputs):
                    for qi in tr.inputs:
                        if qi not in keep:
                            keep.add(qi)
                            stack.append(qi)
        return keep

    def avoidable(v: HftaNode, pname: str, seeds: set[FtaState]) -> bool:
        """Can some seed state derive without any ``pname`` leaf?

        Parameter states enter the local closure only by their *global*
        derivability (child-fed values arrive through Λ edges, not through
        the automaton's own nullary input transitions).
        """
        a = h.annot[v]
        params = a.param_symbols
        done = {
            q
            for q in a.states
            if q.symbol in params and q.symbol != pname and (v, q) in derivable
        }
        changed = True
        while changed:
            changed = False
            for tr in a.transitions:
                if tr.output in done or tr.output.symbol == pname:
                    continue
                if tr.ctor is not None and not tr.inputs and tr.ctor in params:
                    continue  # parameter input transition
                if all(qi in done for qi in tr.inputs):
                    done.add(tr.output)
                    changed = True
        return bool(seeds & done)

    a_root = h.annot[h.root]
    need: dict[HftaNode, set[FtaState]] = {h.root: set(a_root.finals)}
    skippable: dict[HftaNode, bool] = {h.root: False}
    useful: set[FlatVertex] = set()
    order: list[HftaNode] = [h.root]
    for v in order:
        order.extend(h.children.get(v, ()))
    for v in order:
        a = h.annot[v]
        seeds = set(need[v])
        if skippable[v]:
            seeds |= set(a.finals)
        keep = cone(v, seeds)
        useful.update((v, q) for q in keep)
        live_seeds = {q for q in seeds if (v, q) in derivable}
        for c, pname in zip(h.children.get(v, ()), h.child_params.get(v, ())):
            need[c] = {
                e.source
                for e in h.edges_into(v, pname)
                if e.child is c and e.target in keep and (c, e.source) in derivable
            }
            skippable[c] = bool(live_seeds) and avoidable(v, pname, live_seeds)
    return frozenset(useful)


def flatten(h: Hfta, m: CostModel = UNIT_COSTS) -> FlatHypergraph:
    """Combine all node FTAs into one hypergraph.

    Intra-FTA transitions keep their constructor cost (identity transitions
    are free); a Λ edge becomes a unary edge carrying the parameter-leaf cost,
    so minimum B-path weights line up with enumeration costs.  Parameter
    input transitions at child-fed states are dropped — their values must
    arrive through a Λ edge.
    """
    vertices: set[FlatVertex] = set()
    b_edges: list[BEdge] = []
    for v in h.nodes:
        a = h.annot[v]
        bound_params = set(h.child_params.get(v, ()))
        for q in a.states:
            vertices.add((v, q))
        for tr in sorted(a.transitions, key=_transition_key):
            if tr.is_identity:
                b_edges.append(BEdge("id", ((v, tr.inputs[0]),), (v, tr.output), 0.0))
                continue
            if not tr.inputs and tr.ctor in bound_params:
                continue
            b_edges.append(
                BEdge(
                    tr.ctor or "id",
                    tuple((v, q) for q in tr.inputs),
                    (v, tr.output),
                    m.node_cost(tr.ctor or "id"),
                )
            )
    for e in h.inter:
        b_edges.append(
            BEdge("λ", ((e.child, e.source),), (e.parent, e.target), m.node_cost(e.target.symbol))
        )
    finals = frozenset((h.root, q) for q in h.annot[h.root].finals)
    return FlatHypergraph(frozenset(vertices), tuple(b_edges), finals)


def _transition_key(t: Transition) -> tuple:
    return (
        t.ctor or "",
        t.output.sort_key(),
        tuple(q.sort_key() for q in t.inputs),
    )


# ---------------------------------------------------------------------------
# Lazy cost-ordered enumeration
# ---------------------------------------------------------------------------


class _LazyStream:
    """Memoized stream over a generator yielding (cost, payload) non-decreasing."""

    __slots__ = ("_items", "_gen")

    def __init__(self, gen: Iterator):
        self._items: list = []
        self._gen = gen

    def get(self, i: int):
        while len(self._items) <= i and self._gen is not None:
            try:
                self._items.append(next(self._gen))
            except StopIteration:
                self._gen = None
        return self._items[i] if i < len(self._items) else None


@dataclass(frozen=True)
class _Fragment:
    tree: ProgramAst
    pins: tuple[tuple[str, FtaState], ...]  # param name -> pinned param state


class _NodeAgenda:
    """Cost-ordered materialization of one node's fragments, all states at once.

    Transition graphs cycle freely (identity chains, value-preserving
    constructor loops), so per-state streams cannot pull from each other
    recursively.  Instead a single agenda per node pops configurations in
    global cost order; a configuration whose input fragments are not
    materialized yet parks as a waiter and resumes when the needed chart entry
    appears.  Fragments land on per-state charts in non-decreasing cost, and
    per-state duplicates (same tree, same pins) are dropped, which also
    terminates zero-cost identity cycles.
    """

    def __init__(self, a: Fta, size_cap: int, m: CostModel, counter: Iterator[int]):
        self._cap = size_cap
        self._cap_cost = size_cap * m.max_cost()
        self._m = m
        self._counter = counter
        self.chart: dict[FtaState, list[tuple[float, _Fragment]]] = defaultdict(list)
        self._heap: list = []
        self._waiters: dict[tuple[FtaState, int], list[tuple[Transition, tuple[int, ...]]]] = {}
        self._seen_cfg: set = set()
        self._emitted: dict[FtaState, set] = defaultdict(set)
        for tr in sorted(a.transitions, key=_transition_key):
            self._push(tr, (0,) * len(tr.inputs))

    def _push(self, tr: Transition, vec: tuple[int, ...]) -> None:
        cfg = (tr, vec)
        if cfg in self._seen_cfg:
            return
        self._seen_cfg.add(cfg)
        self._schedule(tr, vec)

    def _schedule(self, tr: Transition, vec: tuple[int, ...]) -> None:
        chart = self.chart
        for qi, idx in zip(tr.inputs, vec):
            if len(chart[qi]) <= idx:
                self._waiters.setdefault((qi, idx), []).append((tr, vec))
                return
        frag: _Fragment | None
        if tr.is_identity:
            cost, frag = chart[tr.inputs[0]][vec[0]]
        elif not tr.inputs:
            cost = self._m.node_cost(tr.ctor)
            if tr.ctor == tr.output.symbol:  # parameter input: a pinned leaf
                frag = _Fragment(ProgramAst(tr.ctor, (), tr.ctor), ((tr.ctor, tr.output),))
            else:  # constant constructor
                frag = _Fragment(ProgramAst(tr.ctor, (), tr.output.symbol), ())
        else:
            cost = self._m.node_cost(tr.ctor)
            kids = []
            pins: dict[str, FtaState] = {}
            conflict = False
            for qi, idx in zip(tr.inputs, vec):
                cost_i, frag_i = chart[qi][idx]
                cost += cost_i
                kids.append(frag_i.tree)
                for pname, pstate in frag_i.pins:
                    if pins.setdefault(pname, pstate) != pstate:
                        conflict = True
            frag = None
            if not conflict:
                frag = _Fragment(
                    ProgramAst(tr.ctor, tuple(kids), tr.output.symbol),
                    tuple(sorted(pins.items())),
                )
        if cost > self._cap_cost:
            return
        heapq.heappush(self._heap, (cost, next(self._counter), tr, vec, frag))

    def pump(self) -> bool:
        """Materialize at most one chart entry; False once exhausted."""
        while self._heap:
            cost, _, tr, vec, frag = heapq.heappop(self._heap)
            for i in range(len(vec)):
                self._push(tr, vec[:i] + (vec[i] + 1,) + vec[i + 1 :])
            if frag is None or frag.tree.size() > self._cap:
                continue
            sig = (frag.tree, frag.pins)
            done = self._emitted[tr.output]
            if sig in done:
                continue
            done.add(sig)
            entries = self.chart[tr.output]
            entries.append((cost, frag))
            for waiting in self._waiters.pop((tr.output, len(entries) - 1), ()):
                self._schedule(*waiting)
            return True
        return False


class _ChartView:
    """Stream interface over one state's chart, pumping its node's agenda."""

    __slots__ = ("_agenda", "_entries")

    def __init__(self, agenda: _NodeAgenda, q: FtaState):
        self._agenda = agenda
        self._entries = agenda.chart[q]

    def get(self, i: int):
        while len(self._entries) <= i:
            if not self._agenda.pump():
                return None
        return self._entries[i]


def _tree_key(t: ProgramAst) -> tuple:
    return (t.size(), t.node, tuple(_tree_key(c) for c in t.children))


def hierarchical_key(h: Hfta, trees: Mapping[HftaNode, ProgramAst]) -> tuple:
    return tuple(_tree_key(trees[v]) for v in h.nodes)


def hierarchical_cost(
    h: Hfta, trees: Mapping[HftaNode, ProgramAst], m: CostModel = UNIT_COSTS
) -> float:
    return sum(program_cost(trees[v], m) for v in h.nodes)


def enumerate_trees(
    h: Hfta, m: CostModel = UNIT_COSTS
) -> Iterator[tuple[HierarchicalTree, float]]:
    """Accepted hierarchical trees in non-decreasing cost order.

    Costs sum per-node program costs (parameter leaves included).  Equal-cost
    groups are emitted in canonical tree order.  The stream is finite: trees
    whose surface size exceeds a node's construction bound are filtered, and
    streams stop once costs pass the bound's worst-case cost.
    """
    m.require_positive()
    counter = itertools.count()
    agendas: dict[int, _NodeAgenda] = {}
    frag_streams: dict[tuple[int, FtaState], _ChartView] = {}
    full_streams: dict[tuple[int, FtaState], _LazyStream] = {}

    def frag_stream(v: HftaNode, q: FtaState) -> _ChartView:
        key = (v.uid, q)
        s = frag_streams.get(key)
        if s is None:
            ag = agendas.get(v.uid)
            if ag is None:
                ag = _NodeAgenda(h.annot[v], v.size_cap, m, counter)
                agendas[v.uid] = ag
            s = _ChartView(ag, q)
            frag_streams[key] = s
        return s

    def full_stream(v: HftaNode, qf: FtaState) -> _LazyStream:
        key = (v.uid, qf)
        s = full_streams.get(key)
        if s is None:
            s = _LazyStream(_full(v, qf))
            full_streams[key] = s
        return s

    any_final_streams: dict[int, _LazyStream] = {}

    def merged_finals_stream(v: HftaNode) -> _LazyStream:
        s = any_final_streams.get(v.uid)
        if s is None:
            finals = sorted(h.annot[v].finals, key=FtaState.sort_key)
            s = _LazyStream(_merge([full_stream(v, qf) for qf in finals]))
            any_final_streams[v.uid] = s
        return s

    def _merge(streams: list[_LazyStream]) -> Iterator:
        heap = []
        for si, s in enumerate(streams):
            item = s.get(0)
            if item is not None:
                heapq.heappush(heap, (item[0], next(counter), si, 0))
        while heap:
            cost, _, si, idx = heapq.heappop(heap)
            yield streams[si].get(idx)
            nxt = streams[si].get(idx + 1)
            if nxt is not None:
                heapq.heappush(heap, (nxt[0], next(counter), si, idx + 1))

    def _full(v: HftaNode, qf: FtaState) -> Iterator[tuple[float, dict[HftaNode, ProgramAst]]]:
        kids = h.children.get(v, ())
        params = h.child_params.get(v, ())
        frags = frag_stream(v, qf)
        heap: list = []
        seen_cfg: set = set()

        def factors_for(frag: _Fragment) -> list[_LazyStream] | None:
            pins = dict(frag.pins)
            used = _leaf_param_names(frag.tree, params)
            factors: list[_LazyStream] = []
            for c, pname in zip(kids, params):
                if pname in used:
                    target = pins.get(pname)
                    if target is None:
                        return None
                    edge = h.edge_feeding(v, target)
                    if edge is None or edge.child is not c:
                        return None
                    factors.append(full_stream(c, edge.source))
                else:
                    factors.append(merged_finals_stream(c))
            return factors

        factor_cache: dict[int, list[_LazyStream] | None] = {}

        def push(fi: int, vec: tuple[int, ...]) -> None:
            while True:
                cfg = (fi, vec)
                if cfg in seen_cfg:
                    return
                seen_cfg.add(cfg)
                item = frags.get(fi)
                if item is None:
                    return
                fcost, frag = item
                if fi not in factor_cache:
                    factor_cache[fi] = factors_for(frag)
                factors = factor_cache[fi]
                at_base = all(x == 0 for x in vec)
                entry = None
                if factors is not None:
                    total = fcost
                    parts = []
                    for s, idx in zip(factors, vec):
                        sub = s.get(idx)
                        if sub is None:
                            parts = None
                            break
                        total += sub[0]
                        parts.append(sub[1])
                    if parts is not None:
                        entry = (total, next(counter), fi, vec, frag, tuple(parts))
                if entry is not None:
                    heapq.heappush(heap, entry)
                    return
                if not at_base:
                    return
                # This fragment can never produce a full item; keep the
                # fragment chain alive by moving to the next one.
                fi, vec = fi + 1, (0,) * len(kids)

        push(0, (0,) * len(kids))
        while heap:
            cost, _, fi, vec, frag, parts = heapq.heappop(heap)
            for i in range(len(vec)):
                push(fi, vec[:i] + (vec[i] + 1,) + vec[i + 1 :])
            if all(x == 0 for x in vec):
                push(fi + 1, (0,) * len(kids))
            trees: dict[HftaNode, ProgramAst] = {v: frag.tree}
            for part in parts:
                trees.update(part)
            yield cost, trees

    finals = sorted(h.annot[h.root].finals, key=FtaState.sort_key)
    top = _LazyStream(_merge([full_stream(h.root, qf) for qf in finals]))

    seen_keys: set[tuple] = set()
    idx = 0
    pending: list[tuple[float, tuple, dict]] = []
    pending_cost: float | None = None
    while True:
        item = top.get(idx)
        if item is None:
            break
        idx += 1
        cost, trees = item
        if pending_cost is not None and cost > pending_cost + 1e-12:
            for c, k, tr in sorted(pending, key=lambda x: x[1]):
                if k not in seen_keys:
                    seen_keys.add(k)
                    yield make_hierarchical_tree(h, tr), c
            pending = []
        pending_cost = cost
        pending.append((cost, hierarchical_key(h, trees), trees))
    for c, k, tr in sorted(pending, key=lambda x: x[1]):
        if k not in seen_keys:
            seen_keys.add(k)
            yield make_hierarchical_tree(h, tr), c


def has_accepting_tree(h: Hfta) -> bool:
    """Probe the pin-respecting enumerator for a first accepted tree."""
    for _ in enumerate_trees(h):
        return True
    return False


def is_empty(h: Hfta) -> bool:
    """True iff no hierarchical tree is accepted.

    A hypergraph reachability pass gives a fast necessary condition; when it
    says "maybe nonempty", the pin-respecting enumerator is probed for a first
    witness, keeping emptiness exact.
    """
    flat = flatten(h)
    if not (flat.derivable() & flat.finals):
        return True
    return not has_accepting_tree(h)


# ---------------------------------------------------------------------------
# Debug rendering
# ---------------------------------------------------------------------------


def dump_hfta(h: Hfta) -> str:
    lines: list[str] = []
    for v in h.nodes:
        marker = " (root)" if v is h.root else ""
        lines.append(f"node {v.name} kind={v.kind}{marker}")
        body = dump_fta(h.annot[v])
        lines.extend("  " + ln for ln in body.splitlines())
    for e in h.inter:
        lines.append(
            f"lambda {e.child.name}:{e.source.render()} --> {e.parent.name}:{e.target.render()}"
        )
    return "\n".join(lines)
