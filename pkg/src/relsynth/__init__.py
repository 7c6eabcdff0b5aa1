"""Relational program synthesis via hierarchical tree automata.

Synthesizes sets of programs that jointly satisfy relational properties
(round-trips, comparator laws, equivalences) from grammars plus a relational
specification, using counterexample-guided inductive synthesis over
hierarchical finite tree automata.
"""

from __future__ import annotations

from .values import (
    Value,
    vbool,
    vint,
    vchar,
    vstr,
    vbytes,
    vint_array,
    vchar_array,
    verr,
    is_err,
    value_equals,
    compare_values,
    render_literal,
    InterpretedFn,
    DEFAULT_INTERPRETED,
)
from .dsl import (
    Constructor,
    CostModel,
    DslError,
    DslSyntaxError,
    Grammar,
    Production,
    ProgramAst,
    UNIT_COSTS,
    conforms,
    eval_program,
    load_grammar,
    parse_grammar,
    parse_program,
    program_cost,
    render_program,
    trivial_grammar,
)
from .lang import (
    Apply,
    Atom,
    Binary,
    BoundProgram,
    Const,
    Formula,
    FunDecl,
    Neg,
    OccurrenceMap,
    PropertyClause,
    RelationalSpec,
    SpecError,
    SpecSyntaxError,
    Term,
    Var,
    conjoin,
    evaluate_ground,
    instantiate,
    parse_spec,
    relax,
    render_formula,
    render_term,
)
from .fta import (
    CapacityExceeded,
    DEFAULT_SIZE_BOUND,
    DEFAULT_STATE_CEILING,
    Fta,
    FtaState,
    Transition,
    accepts,
    build_fta,
    build_fta_for_example,
    dump_fta,
    reachable_final_states,
)
from .hfta import (
    FlatHypergraph,
    Hfta,
    HftaNode,
    HierarchicalTree,
    InterEdge,
    ShapeMismatch,
    accepts_hierarchical,
    build_hfta,
    dump_hfta,
    enumerate_trees,
    flatten,
    has_accepting_tree,
    hierarchical_cost,
    is_empty,
    make_hierarchical_tree,
    reduce_hfta,
    single_node_hfta,
    useful_vertices,
)

__all__ = [name for name in dir() if not name.startswith("_")]

__version__ = "0.1.0"
