"""Counterexample-guided synthesis of mutually-constrained programs.

The loop starts from a random candidate assignment and an empty ground
formula.  Each round checks the candidates against the full specification
(examples first, then every quantified clause over a bounded validation set);
a violation becomes a ground counterexample conjoined onto the formula, whose
relaxation is compiled to a hierarchical automaton from which the next
candidates are extracted.  The returned assignment always passes verification.

Bounded testing is the verifier: quantified clauses are checked over all
strings up to a configurable length over a configurable alphabet (plus the
spec's own example inputs), never by unbounded reasoning.
"""

from __future__ import annotations

import itertools
import random
import time
from dataclasses import dataclass, field
from typing import Callable, Mapping

from .dsl import (
    CostModel,
    Grammar,
    ProgramAst,
    UNIT_COSTS,
    render_program,
)
from .fta import CapacityExceeded, DEFAULT_SIZE_BOUND, DEFAULT_STATE_CEILING
from .hfta import build_hfta
from .lang import (
    BoundProgram,
    Const,
    Formula,
    PropertyClause,
    RelationalSpec,
    SpecError,
    Term,
    Apply,
    Atom,
    Binary,
    Neg,
    Var,
    conjoin,
    evaluate_ground,
    formula_size,
    instantiate,
    relax,
    render_formula,
)
from .search import DEFAULT_CANDIDATE_CAP, TraceFn, find_progs
from .values import (
    DEFAULT_INTERPRETED,
    InterpretedFn,
    Value,
    vbool,
    vchar,
    vint,
    vstr,
)

DEFAULT_VAL_ALPHABET = "ABCDEFGHIJKLMNOPé"
DEFAULT_VAL_LEN = 3
DEFAULT_TIMEOUT_S = 600.0

STATUS_SOLVED = "solved"
STATUS_NO_SOLUTION = "no_solution_within_bounds"
STATUS_TIMEOUT = "timeout"
STATUS_CAPACITY = "capacity"


@dataclass(frozen=True)
class SynthesisProblem:
    spec: RelationalSpec
    grammars: Mapping[str, Grammar]
    size_bound: int = DEFAULT_SIZE_BOUND
    val_alphabet: str = DEFAULT_VAL_ALPHABET
    val_len: int = DEFAULT_VAL_LEN
    timeout_s: float = DEFAULT_TIMEOUT_S
    seed: int = 0
    costs: CostModel = UNIT_COSTS
    state_ceiling: int = DEFAULT_STATE_CEILING
    candidate_cap: int = DEFAULT_CANDIDATE_CAP
    interpreted: Mapping[str, InterpretedFn] = None  # type: ignore[assignment]

    def __post_init__(self) -> None:
        if self.interpreted is None:
            object.__setattr__(self, "interpreted", DEFAULT_INTERPRETED)

    @property
    def targets(self) -> tuple[str, ...]:
        return tuple(f.name for f in self.spec.funs)


@dataclass(frozen=True)
class Counterexample:
    ground: Formula
    witness: Mapping[str, Value]

    def render(self) -> str:
        return render_formula(self.ground)


@dataclass(frozen=True)
class IterationRecord:
    index: int
    formula_size: int
    hfta_nodes: int
    hfta_states: int
    find_secs: float
    counterexample: str
    candidate: Mapping[str, BoundProgram] | None = None

    def render(self) -> str:
        return (
            f"iter={self.index} formula_size={self.formula_size} "
            f"nodes={self.hfta_nodes} states={self.hfta_states} "
            f"find_s={self.find_secs:.3f} ce={self.counterexample}"
        )


@dataclass
class SynthesisResult:
    status: str
    programs: dict[str, BoundProgram] | None
    iterations: int
    counterexamples: list[Counterexample] = field(default_factory=list)
    records: list[IterationRecord] = field(default_factory=list)
    peak_states: int = 0
    total_s: float = 0.0
    synth_s: float = 0.0

    @property
    def solved(self) -> bool:
        return self.status == STATUS_SOLVED


# ---------------------------------------------------------------------------
# Validation inputs
# ---------------------------------------------------------------------------


def _example_strings(spec: RelationalSpec) -> list[str]:
    """String constants mentioned in example clauses, in spec order."""
    out: list[str] = []

    def term(t: Term) -> None:
        if isinstance(t, Const) and t.value.tag == "Str":
            if t.value.data not in out:
                out.append(t.value.data)
        elif isinstance(t, Apply):
            for a in t.args:
                term(a)

    def formula(phi: Formula) -> None:
        if isinstance(phi, Atom):
            term(phi.lhs)
            term(phi.rhs)
        elif isinstance(phi, Binary):
            formula(phi.lhs)
            formula(phi.rhs)
        elif isinstance(phi, Neg):
            formula(phi.body)

    for e in spec.examples:
        formula(e)
    return out


def validation_values(
    sort: str, spec: RelationalSpec, alphabet: str, max_len: int
) -> list[Value]:
    """The bounded input pool for one quantified sort, in generation order.

    Strings start with the spec's own example inputs, then every string over
    the alphabet of length 1..max_len, shortest first then lexicographic.
    """
    if sort == "Str":
        seen = _example_strings(spec)
        vals = [vstr(s) for s in seen]
        for n in range(1, max_len + 1):
            for tup in itertools.product(alphabet, repeat=n):
                s = "".join(tup)
                if s not in seen:
                    vals.append(vstr(s))
        return vals
    if sort == "Char":
        return [vchar(c) for c in alphabet]
    if sort == "Int":
        return [vint(i) for i in range(-max_len, max_len + 1)]
    if sort == "Bool":
        return [vbool(False), vbool(True)]
    raise SpecError(f"cannot generate validation inputs for sort {sort!r}")


# ---------------------------------------------------------------------------
# Verification (bounded, exhaustive, deterministic order)
# ---------------------------------------------------------------------------


def verify(
    programs: Mapping[str, BoundProgram],
    spec: RelationalSpec,
    *,
    alphabet: str = DEFAULT_VAL_ALPHABET,
    max_len: int = DEFAULT_VAL_LEN,
    interpreted: Mapping[str, InterpretedFn] | None = None,
    deadline: float | None = None,
) -> Counterexample | None:
    """First violating ground instance, or None when every check passes.

    Examples are checked in spec order first; each property clause is then
    evaluated on every tuple of validation inputs, lexicographic over the
    input stream.
    """
    interp = DEFAULT_INTERPRETED if interpreted is None else interpreted
    for e in spec.examples:
        if not evaluate_ground(e, programs, interp):
            return Counterexample(e, {})
    for clause in spec.properties:
        pools = [
            validation_values(sort, spec, alphabet, max_len)
            for _var, sort in clause.bindings
        ]
        names = [var for var, _sort in clause.bindings]
        checked = 0
        for combo in itertools.product(*pools):
            witness = dict(zip(names, combo))
            ground = instantiate(clause, witness)
            if not evaluate_ground(ground, programs, interp):
                return Counterexample(ground, witness)
            checked += 1
            if deadline is not None and checked % 1024 == 0 and time.monotonic() > deadline:
                raise TimeoutError("verification deadline exceeded")
    return None


# ---------------------------------------------------------------------------
# Random seed candidates
# ---------------------------------------------------------------------------


def _min_depths(g: Grammar) -> dict[str, int]:
    """Smallest derivation depth per symbol (parameters and constants are 1)."""
    depth: dict[str, int] = {p: 1 for p in g.param_names}
    changed = True
    while changed:
        changed = False
        for prod in g.productions:
            if prod.ctor is None:
                d = depth.get(prod.rhs[0])
            elif not prod.rhs:
                d = 1
            else:
                kids = [depth.get(s) for s in prod.rhs]
                d = None if None in kids else 1 + max(kids)
            if d is not None and d < depth.get(prod.lhs, 1 << 30):
                depth[prod.lhs] = d
                changed = True
    return depth


def random_candidate(rng, g: Grammar, depth_bound: int) -> ProgramAst:
    """A uniformly random derivation of depth at most ``depth_bound``.

    At each step the choice is uniform over the productions that can still
    finish within the remaining depth; identity productions consume none.
    """
    depths = _min_depths(g)

    def grow(symbol: str, budget: int) -> ProgramAst:
        if symbol in g.param_names:
            return ProgramAst(symbol, (), symbol)
        options = []
        for prod in g.productions_for(symbol):
            if prod.ctor is None:
                need = depths.get(prod.rhs[0], 1 << 30)
            elif not prod.rhs:
                need = 1
            else:
                need = 1 + max(depths.get(s, 1 << 30) for s in prod.rhs)
            if need <= budget:
                options.append(prod)
        if not options:
            raise SpecError(
                f"grammar {g.name!r} cannot derive {symbol!r} within depth {budget}"
            )
        prod = rng.choice(options)
        if prod.ctor is None:
            return grow(prod.rhs[0], budget)
        kids = tuple(grow(s, budget - 1) for s in prod.rhs)
        return ProgramAst(prod.ctor, kids, symbol)

    return grow(g.start, depth_bound)


# ---------------------------------------------------------------------------
# The synthesis loop
# ---------------------------------------------------------------------------


def synthesize(
    problem: SynthesisProblem,
    *,
    trace: TraceFn | None = None,
    on_hfta: Callable[[object], None] | None = None,
) -> SynthesisResult:
    """Run the inductive loop until verification passes or resources run out.

    Statuses: ``solved`` with a verified assignment; ``no_solution_within_bounds``
    when the version space offers no viable candidates; ``timeout``;
    ``capacity`` when an automaton would exceed the state ceiling.
    """
    start = time.monotonic()
    deadline = start + problem.timeout_s
    rng = random.Random(problem.seed)
    result = SynthesisResult(STATUS_TIMEOUT, None, 0)

    def emit(line: str) -> None:
        if trace:
            trace(line)

    programs: dict[str, BoundProgram] = {}
    for f in problem.targets:
        g = problem.grammars[f]
        programs[f] = BoundProgram(g, random_candidate(rng, g, problem.size_bound))
        emit(f"seed {f} = {render_program(programs[f].ast)}")

    clauses: list[Formula] = []
    iters = 0
    try:
        while True:
            if time.monotonic() > deadline:
                result.status = STATUS_TIMEOUT
                break
            iters += 1
            ce = verify(
                programs,
                problem.spec,
                alphabet=problem.val_alphabet,
                max_len=problem.val_len,
                interpreted=problem.interpreted,
                deadline=deadline,
            )
            if ce is None:
                result.status = STATUS_SOLVED
                result.programs = dict(programs)
                emit(f"verified after {iters} iteration(s)")
                break
            result.counterexamples.append(ce)
            clauses.append(ce.ground)
            emit(f"counterexample: {ce.render()}")
            phi = conjoin(clauses)
            assert phi is not None
            rphi, m = relax(phi, set(problem.targets))
            t0 = time.monotonic()
            h = build_hfta(
                rphi,
                problem.grammars,
                m,
                problem.size_bound,
                interpreted=problem.interpreted,
                state_ceiling=problem.state_ceiling,
            )
            if on_hfta is not None:
                on_hfta(h)
            result.peak_states = max(result.peak_states, h.total_states())
            assignment = find_progs(
                h,
                m,
                problem.costs,
                candidate_cap=problem.candidate_cap,
                trace=trace,
                deadline=deadline,
            )
            dt = time.monotonic() - t0
            result.synth_s += dt
            record = IterationRecord(
                iters,
                formula_size(phi),
                len(h.nodes),
                h.total_states(),
                dt,
                ce.render(),
                candidate=dict(programs),
            )
            result.records.append(record)
            emit(record.render())
            if assignment is None:
                result.status = STATUS_NO_SOLUTION
                break
            # Symbols the formula does not yet mention keep their previous
            # candidate; verification re-checks everything either way.
            programs = dict(programs)
            for f, p in assignment.items():
                programs[f] = BoundProgram(problem.grammars[f], p)
            for f in sorted(assignment):
                emit(f"candidate {f} = {render_program(programs[f].ast)}")
    except TimeoutError:
        result.status = STATUS_TIMEOUT
    except CapacityExceeded:
        result.status = STATUS_CAPACITY
    result.iterations = iters
    result.total_s = time.monotonic() - start
    return result
