"""Reference interpreter for single-level programs.

Executes residual programs (and annotation-erased two-level programs, the
oracle side of the mix equation) with the same call-by-value numeric
semantics as the compile-time evaluator, so specialization cannot change
results.  Array accesses are bounds-checked; scalars and arrays without an
initializer start at zero; step counts are reported as the only
performance proxy.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import nodes as n
from .staging import check_stages
from .staticeval import EvalLimits, Interpreter
from .values import Value, UNIT

DEFAULT_STEP_LIMIT = 10_000_000


@dataclass
class RunResult:
    value: Value
    steps: int
    bindings: list | None = None  # (name, Value) globals, scripting reports


def _as_program(program) -> n.Program:
    if isinstance(program, n.Program):
        return program
    if hasattr(program, "to_program_ast"):
        return program.to_program_ast()
    raise TypeError(f"cannot run {type(program).__name__}")


def run(program, entry: str | None = None, args: list | tuple = (),
        limits: EvalLimits | None = None, check: bool = True) -> RunResult:
    """Execute a single-level program: globals first, then ``entry``.

    ``program`` may be a ResidualProgram or an annotation-free Program AST.
    Without an entry the result is the global execution itself (scripting).
    """
    ast = _as_program(program)
    if check:
        check_stages(ast, levels=1)
    if limits is None:
        limits = EvalLimits(step_limit=DEFAULT_STEP_LIMIT)
    elif limits.step_limit is None:
        limits = EvalLimits(limits.loop_cap, limits.max_depth,
                            DEFAULT_STEP_LIMIT)
    interp = Interpreter(ast, limits, count_steps=True)
    interp.run_top(ast)
    value: Value = UNIT
    if entry is not None:
        value = interp.call_by_name(entry, list(args))
    return RunResult(value, interp.steps, interp.globals.bindings())


def erase_stages(program: n.Program) -> n.Program:
    """Remove every annotation: parameter lists merge (static first),
    ``f(s)(d)`` becomes ``f(s..., d...)``, and all ``@`` marks vanish.
    The result is the plain-interpretation semantics the residual is
    compared against."""
    items: list = []
    for item in program.items:
        if isinstance(item, n.FunctionDef):
            params = [n.strip_annotations(p, merge_call_lists=True)
                      for p in (item.static_params or []) + item.params]
            items.append(n.FunctionDef(
                item.name, None, params,
                n.strip_annotations(item.body, merge_call_lists=True),
                span=item.span))
        elif isinstance(item, n.ClassDef):
            cls_items = []
            for it in item.items:
                if isinstance(it, n.VisibilityLabel):
                    cls_items.append(n.VisibilityLabel(it.name, span=it.span))
                elif isinstance(it, n.CtorDef):
                    cls_items.append(n.CtorDef(
                        it.at_count,
                        n.strip_annotations(it.body, merge_call_lists=True),
                        span=it.span))
                else:
                    cls_items.append(
                        n.strip_annotations(it, merge_call_lists=True))
            items.append(n.ClassDef(
                item.name,
                [n.strip_annotations(p, merge_call_lists=True)
                 for p in item.static_params],
                cls_items, span=item.span))
        else:
            items.append(n.strip_annotations(item, merge_call_lists=True))
    return n.Program(items)


def run_unstaged(program: n.Program, entry: str, all_args: list | tuple,
                 limits: EvalLimits | None = None) -> RunResult:
    """Plain interpretation of the annotation-erased program with all
    arguments (static first); the oracle side of the mix equation."""
    erased = erase_stages(program)
    return run(erased, entry, all_args, limits, check=False)


def format_result(v: Value) -> str:
    """Stable textual form of a run result (``int 32``, ``float 8.0``)."""
    from .values import (ArrayV, BoolV, FloatV, InstanceV, IntV, StrV,
                         TypeValue, UnitV, render_static_arg, render_type)
    if isinstance(v, IntV):
        return f"int {v.value}"
    if isinstance(v, FloatV):
        return f"float {v.value!r}"
    if isinstance(v, BoolV):
        return f"bool {'true' if v.value else 'false'}"
    if isinstance(v, UnitV):
        return "void"
    if isinstance(v, TypeValue):
        return f"type {render_type(v)}"
    if isinstance(v, ArrayV):
        return f"array {render_static_arg(v)}"
    if isinstance(v, StrV):
        return f"string {v.value}"
    if isinstance(v, InstanceV):
        return f"instance {render_static_arg(v)}"
    return str(v)


def format_binding(name: str, v: Value | None) -> str:
    from .values import render_static_arg
    if v is None:
        return f"{name} = <unset>"
    return f"{name} = {render_static_arg(v)}"
