"""Command-line interface: synthesize from spec files, benchmark, re-check.

``relsynth synth SPEC`` prints one ``name = program`` line per target
function; that output is exactly what ``relsynth check SPEC PROGS...``
re-parses, so synth output piped to a file round-trips through check.
``relsynth bench SUITE`` emits one CSV row per benchmark.
"""

from __future__ import annotations

import argparse
import csv
import json
import shlex
import sys
from pathlib import Path

from .cegis import (
    DEFAULT_TIMEOUT_S,
    DEFAULT_VAL_ALPHABET,
    DEFAULT_VAL_LEN,
    STATUS_CAPACITY,
    STATUS_NO_SOLUTION,
    STATUS_SOLVED,
    STATUS_TIMEOUT,
    SynthesisProblem,
    synthesize,
    verify,
)
from .dsl import (
    CostModel,
    DslError,
    Grammar,
    UNIT_COSTS,
    load_grammar,
    parse_program,
    render_program,
)
from .fta import DEFAULT_SIZE_BOUND
from .hfta import dump_hfta
from .lang import BoundProgram, SpecError, parse_spec

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_TIMEOUT = 3
EXIT_CAPACITY = 4
EXIT_UNSAT = 5
EXIT_IO = 10

_STATUS_EXIT = {
    STATUS_SOLVED: EXIT_OK,
    STATUS_TIMEOUT: EXIT_TIMEOUT,
    STATUS_CAPACITY: EXIT_CAPACITY,
    STATUS_NO_SOLUTION: EXIT_UNSAT,
}

CSV_COLUMNS = ["name", "solved", "iters", "total_s", "synth_s", "peak_states"]


def _add_common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--depth-bound", type=int, default=DEFAULT_SIZE_BOUND, metavar="N")
    p.add_argument("--timeout", type=float, default=DEFAULT_TIMEOUT_S, metavar="SECS")
    p.add_argument("--val-alphabet", default=DEFAULT_VAL_ALPHABET, metavar="STR")
    p.add_argument("--val-len", type=int, default=DEFAULT_VAL_LEN, metavar="K")
    p.add_argument("--seed", type=int, default=0, metavar="N")
    p.add_argument("--cost-model", default=None, metavar="PATH")
    p.add_argument("--trace", action="store_true")
    p.add_argument("--dump-hfta", default=None, metavar="PATH")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="relsynth",
        description="Synthesize mutually-constrained programs from relational specs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="synthesize programs from a spec file")
    p_synth.add_argument("spec", metavar="SPEC")
    _add_common_flags(p_synth)

    p_bench = sub.add_parser("bench", help="run a suite of spec files, emit CSV")
    p_bench.add_argument("suite", metavar="SUITE")
    _add_common_flags(p_bench)

    p_check = sub.add_parser("check", help="verify given programs against a spec")
    p_check.add_argument("spec", metavar="SPEC")
    p_check.add_argument("programs", nargs="+", metavar="PROGRAMS")
    _add_common_flags(p_check)

    return parser


def _load_cost_model(path: str | None) -> CostModel:
    if path is None:
        return UNIT_COSTS
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    return CostModel(dict(data.get("costs", {})), float(data.get("default", 1.0)))


def _load_problem(spec_path: str, args: argparse.Namespace) -> SynthesisProblem:
    text = Path(spec_path).read_text(encoding="utf-8")
    spec = parse_spec(text)
    base = Path(spec_path).parent
    grammars: dict[str, Grammar] = {}
    for f in spec.funs:
        grammars[f.name] = load_grammar(base / f.grammar_path)
    return SynthesisProblem(
        spec,
        grammars,
        size_bound=args.depth_bound,
        val_alphabet=args.val_alphabet,
        val_len=args.val_len,
        timeout_s=args.timeout,
        seed=args.seed,
        costs=_load_cost_model(args.cost_model),
    )


def cmd_synth(args: argparse.Namespace) -> int:
    try:
        problem = _load_problem(args.spec, args)
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    except (SpecError, DslError, json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_PARSE

    trace = (lambda line: print(line, file=sys.stderr)) if args.trace else None
    last_hfta: list = []
    on_hfta = None
    if args.dump_hfta:

        def on_hfta(h) -> None:
            last_hfta[:] = [h]

    result = synthesize(problem, trace=trace, on_hfta=on_hfta)
    if args.dump_hfta and last_hfta:
        Path(args.dump_hfta).write_text(dump_hfta(last_hfta[0]) + "\n", encoding="utf-8")
    if result.solved:
        assert result.programs is not None
        for name in (f.name for f in problem.spec.funs):
            print(f"{name} = {render_program(result.programs[name].ast)}")
        return EXIT_OK
    print(
        f"error: synthesis ended with status {result.status} "
        f"after {result.iterations} iteration(s)",
        file=sys.stderr,
    )
    return _STATUS_EXIT[result.status]


def _bench_args(base: argparse.Namespace, extra: list[str]) -> argparse.Namespace:
    """Per-benchmark overrides: suite-line flags win over command-line flags."""
    ns = argparse.Namespace(**vars(base))
    mini = argparse.ArgumentParser(add_help=False)
    _add_common_flags(mini)
    mini.parse_args(extra, namespace=ns)
    return ns


def cmd_bench(args: argparse.Namespace) -> int:
    try:
        lines = Path(args.suite).read_text(encoding="utf-8").splitlines()
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    base_dir = Path(args.suite).parent
    out = csv.writer(sys.stdout)
    out.writerow(CSV_COLUMNS)
    for raw in lines:
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = shlex.split(line)
        name, spec_rel, extra = parts[0], parts[1], parts[2:]
        try:
            bench_ns = _bench_args(args, extra)
            problem = _load_problem(str(base_dir / spec_rel), bench_ns)
            trace = (
                (lambda line: print(line, file=sys.stderr)) if bench_ns.trace else None
            )
            result = synthesize(problem, trace=trace)
            out.writerow(
                [
                    name,
                    "true" if result.solved else "false",
                    result.iterations,
                    f"{result.total_s:.3f}",
                    f"{result.synth_s:.3f}",
                    result.peak_states,
                ]
            )
        except Exception as e:  # per-benchmark failures recorded, suite continues
            print(f"error: benchmark {name}: {e}", file=sys.stderr)
            out.writerow([name, "false", 0, "0.000", "0.000", 0])
        sys.stdout.flush()
    return EXIT_OK


def _parse_program_lines(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        name, _, body = line.partition("=")
        if not _ or not name.strip() or not body.strip():
            raise SpecError(f"expected 'name = program', got {line!r}")
        out[name.strip()] = body.strip()
    return out


def cmd_check(args: argparse.Namespace) -> int:
    try:
        text = Path(args.spec).read_text(encoding="utf-8")
        spec = parse_spec(text)
        base = Path(args.spec).parent
        grammars = {f.name: load_grammar(base / f.grammar_path) for f in spec.funs}
        sources: dict[str, str] = {}
        for p in args.programs:
            sources.update(_parse_program_lines(Path(p).read_text(encoding="utf-8")))
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    except (SpecError, DslError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_PARSE

    programs: dict[str, BoundProgram] = {}
    try:
        for f in spec.funs:
            if f.name not in sources:
                raise SpecError(f"no program supplied for {f.name!r}")
            g = grammars[f.name]
            programs[f.name] = BoundProgram(g, parse_program(g, sources[f.name]))
    except (SpecError, DslError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_PARSE

    ce = verify(
        programs,
        spec,
        alphabet=args.val_alphabet,
        max_len=args.val_len,
    )
    if ce is None:
        print("valid")
        return EXIT_OK
    print(f"counterexample: {ce.render()}")
    return EXIT_UNSAT


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "synth":
        return cmd_synth(args)
    if args.command == "bench":
        return cmd_bench(args)
    return cmd_check(args)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
