"""Well-stagedness verification for annotated programs.

The checker assigns a stage to every expression, statement, and variable
and enforces, before any evaluation happens:

  R1  an assignment (or initialization) target's stage must be >= the
      stage of every source operand: data flows static -> dynamic only;
  R2  the guard of an annotated control construct (``for@``/``if@``/
      ``switch@``) must be static relative to that construct;
  R3  a static variable may not be assigned inside a control region with a
      more-dynamic guard (congruence: static state must not depend on
      dynamic control flow);
  R4  operators execute at the maximum stage of their operands, so a
      compound expression's stage is that maximum;
  R5  typename-typed variables must be bound before the final stage
      (types do not exist at residual run time); enforced for two or more
      levels.

Annotations are relative: ``@`` runs of count k in a scope whose default
stage is s bind at stage s - k; deeper than stage 0 is an error.  Literals
are stage-polymorphic (stage 0, liftable anywhere).

Single-list functions with no way to be residualized verbatim (they bind a
typename parameter) are recorded as static-only rather than rejected: they
can be invoked with ``f@(...)`` but never called dynamically.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import nodes as n
from .errors import (
    ANNOTATION_TOO_DEEP, DYNAMIC_IN_STATIC_CONSTRUCTOR,
    DYNAMIC_TO_STATIC_FLOW, ParseError, STATIC_CONTROL_WITH_DYNAMIC_GUARD,
    STATIC_MUTATION_UNDER_DYNAMIC_CONTROL, Span, StageError,
    TYPENAME_DYNAMIC_BINDING, UnboundVariable,
)
from .flatten import KNOWN_BUILTINS


@dataclass
class StagedAST:
    """A checked program plus what the specializer needs to trust it."""

    program: n.Program
    levels: int
    static_only: frozenset = frozenset()

    def functions_by_key(self) -> dict:
        return {(f.name, f.static_arity): f for f in self.program.functions()}

    def classes_by_name(self) -> dict:
        return {c.name: c for c in self.program.classes()}


@dataclass
class _Sym:
    stage: int
    is_typename: bool = False


@dataclass
class _Scope:
    default: int
    frames: list = field(default_factory=lambda: [{}])
    controls: list = field(default_factory=list)  # guard stages of enclosing control

    def push(self):
        self.frames.append({})

    def pop(self):
        self.frames.pop()

    def declare(self, name: str, sym: _Sym):
        self.frames[-1][name] = sym

    def find(self, name: str) -> _Sym | None:
        for frame in reversed(self.frames):
            if name in frame:
                return frame[name]
        return None


class _Checker:
    def __init__(self, program: n.Program, levels: int):
        self.program = program
        self.levels = levels
        self.functions = {(f.name, f.static_arity): f
                          for f in program.functions()}
        self.fn_names: dict[str, list[int]] = {}
        for f in program.functions():
            self.fn_names.setdefault(f.name, []).append(f.static_arity)
        self.classes = {c.name: c for c in program.classes()}
        self.static_only: set[str] = set()

    # -- entry --------------------------------------------------------------

    def check(self) -> StagedAST:
        top = _Scope(default=self.levels - 1)
        for item in self.program.items:
            if isinstance(item, n.FunctionDef):
                self.check_function(item, top)
            elif isinstance(item, n.ClassDef):
                self.check_class(item, top)
            else:
                self.check_stmt(item, top)
        return StagedAST(self.program, self.levels,
                         frozenset(self.static_only))

    # -- declarations ---------------------------------------------------------

    def check_function(self, fn: n.FunctionDef, outer: _Scope) -> None:
        scope = _Scope(default=self.levels - 1,
                       frames=[outer.frames[0], {}])
        suppress_r5 = fn.is_single_list
        needed_static = False
        if fn.static_params is not None:
            for p in fn.static_params:
                stage = scope.default - p.at_count
                if stage < 0:
                    raise StageError(
                        ANNOTATION_TOO_DEEP,
                        f"parameter '{p.name}' annotated past stage 0", p.span)
                self.check_param_type(p, scope)
                scope.declare(p.name, _Sym(stage, n.is_typename_type(p.dtype)))
        for p in fn.params:
            self.check_param_type(p, scope)
            is_tn = n.is_typename_type(p.dtype)
            if is_tn and self.levels >= 2:
                if suppress_r5:
                    needed_static = True
                else:
                    raise StageError(
                        TYPENAME_DYNAMIC_BINDING,
                        f"typename parameter '{p.name}' must be static "
                        "(annotate it in the static list)", p.span)
            scope.declare(p.name, _Sym(scope.default, is_tn))
        if needed_static:
            self.static_only.add(fn.name)
        self.check_block(fn.body, scope)

    def check_param_type(self, p: n.Param, scope: _Scope) -> None:
        t = p.dtype
        while isinstance(t, (n.PointerType, n.ArrayType)):
            if isinstance(t, n.ArrayType):
                size_stage = self.expr_stage(t.size, scope)
                if size_stage > 0:
                    raise StageError(DYNAMIC_TO_STATIC_FLOW,
                                     "array extents must be static", p.span)
            t = t.base
        if isinstance(t, n.NamedType):
            self.check_named_type(t, p.span, scope)

    def check_named_type(self, t: n.NamedType, span: Span | None,
                         scope: _Scope) -> None:
        sym = scope.find(t.name)
        if sym is not None:
            if not sym.is_typename:
                raise StageError(
                    DYNAMIC_TO_STATIC_FLOW,
                    f"'{t.name}' is not a typename variable or class", span)
            return
        if t.name in self.classes:
            return
        raise UnboundVariable(f"unknown type name '{t.name}'", span)

    def check_class(self, cls: n.ClassDef, outer: _Scope) -> None:
        scope = _Scope(default=self.levels - 1,
                       frames=[outer.frames[0], {}])
        for p in cls.static_params:
            stage = scope.default - p.at_count
            if stage < 0:
                raise StageError(ANNOTATION_TOO_DEEP,
                                 f"parameter '{p.name}' annotated past stage 0",
                                 p.span)
            self.check_param_type(p, scope)
            scope.declare(p.name, _Sym(stage, n.is_typename_type(p.dtype)))
        # Members are all in scope before any constructor body is checked
        # (constructor bodies may assign members declared below them).
        member_decls = cls.member_decls()
        for decl in member_decls:
            k = n.annotation_count(decl.dtype)
            stage = scope.default - k
            if stage < 0:
                raise StageError(ANNOTATION_TOO_DEEP,
                                 "member annotated past stage 0", decl.span)
            is_tn = n.is_typename_type(decl.dtype)
            if is_tn and self.levels >= 2 and stage == self.levels - 1:
                raise StageError(TYPENAME_DYNAMIC_BINDING,
                                 "typename members must be static", decl.span)
            for d in decl.declarators:
                scope.declare(d.name, _Sym(stage, is_tn))
        for decl in member_decls:
            stage = scope.default - n.annotation_count(decl.dtype)
            self.check_decl_parts(decl, stage, scope)
        for item in cls.items:
            if not isinstance(item, n.CtorDef):
                continue
            scope.push()
            if item.at_count >= 1:
                self.check_static_ctor_block(item.body, scope)
            else:
                self.check_block(item.body, scope, fresh_frame=False)
            scope.pop()

    def check_decl_parts(self, decl: n.VarDecl, stage: int,
                         scope: _Scope) -> None:
        """Stage-check a declaration's type arguments, sizes, and inits."""
        t = decl.dtype
        while isinstance(t, (n.PointerType, n.ArrayType)):
            if isinstance(t, n.ArrayType) and \
                    self.expr_stage(t.size, scope) > 0:
                raise StageError(DYNAMIC_TO_STATIC_FLOW,
                                 "array extents must be static", decl.span)
            t = t.base
        if isinstance(t, n.NamedType):
            self.check_named_type(t, decl.span, scope)
        elif isinstance(t, n.ClassAppType):
            if t.name not in self.classes:
                raise UnboundVariable(f"unknown class '{t.name}'", decl.span)
            for a in t.args:
                if self.expr_stage(a, scope) > 0:
                    raise StageError(DYNAMIC_TO_STATIC_FLOW,
                                     "class arguments must be static",
                                     decl.span)
        for d in decl.declarators:
            if d.array_size is not None and \
                    self.expr_stage(d.array_size, scope) > 0:
                raise StageError(DYNAMIC_TO_STATIC_FLOW,
                                 "array extents must be static", d.span)
            if d.init is not None:
                src = self.expr_stage(d.init, scope)
                if src > stage:
                    raise StageError(
                        DYNAMIC_TO_STATIC_FLOW,
                        f"initializer of '{d.name}' (stage {src}) is more "
                        f"dynamic than the variable (stage {stage})", d.span)

    # -- statements -----------------------------------------------------------

    def check_block(self, block: n.Block, scope: _Scope,
                    fresh_frame: bool = True) -> None:
        if fresh_frame:
            scope.push()
        for s in block.stmts:
            self.check_stmt(s, scope)
        if fresh_frame:
            scope.pop()

    def check_stmt(self, stmt: n.Stmt, scope: _Scope) -> None:
        if isinstance(stmt, n.VarDecl):
            self.check_var_decl(stmt, scope)
        elif isinstance(stmt, n.Assign):
            self.check_assign(stmt, scope)
        elif isinstance(stmt, n.ExprStmt):
            stage = self.expr_stage(stmt.expr, scope)
            if isinstance(stmt.expr, n.Incr):
                self.check_mutation(stage, stmt.span, scope)
            stmt.stage = stage
        elif isinstance(stmt, n.Return):
            stage = 0 if stmt.value is None \
                else self.expr_stage(stmt.value, scope)
            stmt.stage = stage
        elif isinstance(stmt, n.Block):
            self.check_block(stmt, scope)
            stmt.stage = scope.default
        elif isinstance(stmt, n.If):
            self.check_if(stmt, scope)
        elif isinstance(stmt, n.For):
            self.check_for(stmt, scope)
        elif isinstance(stmt, n.Switch):
            self.check_switch(stmt, scope)
        else:
            raise ParseError(f"unexpected statement {type(stmt).__name__}",
                             stmt.span)

    def construct_stage(self, at_count: int, span: Span | None,
                        scope: _Scope) -> int:
        stage = scope.default - at_count
        if stage < 0:
            raise StageError(
                ANNOTATION_TOO_DEEP,
                f"annotation of depth {at_count} exceeds the scope's stage "
                f"{scope.default}", span)
        return stage

    def check_var_decl(self, stmt: n.VarDecl, scope: _Scope) -> None:
        k = n.annotation_count(stmt.dtype)
        stage = self.construct_stage(k, stmt.span, scope)
        if isinstance(stmt.dtype, n.ClassAppType) and stmt.dtype.ctime:
            stage = 0
        is_tn = n.is_typename_type(stmt.dtype)
        if is_tn and self.levels >= 2 and stage == self.levels - 1:
            raise StageError(
                TYPENAME_DYNAMIC_BINDING,
                "typename variables must be static (add @)", stmt.span)
        self.check_decl_parts(stmt, stage, scope)
        for d in stmt.declarators:
            scope.declare(d.name, _Sym(stage, is_tn))
        stmt.stage = stage

    def check_mutation(self, target_stage: int, span: Span | None,
                       scope: _Scope) -> None:
        for guard_stage in scope.controls:
            if guard_stage > target_stage:
                raise StageError(
                    STATIC_MUTATION_UNDER_DYNAMIC_CONTROL,
                    f"stage-{target_stage} variable assigned under a "
                    f"stage-{guard_stage} control guard", span)

    def check_assign(self, stmt: n.Assign, scope: _Scope) -> None:
        if isinstance(stmt.target, n.VarRef):
            target_stage = self.expr_stage(stmt.target, scope)
        elif isinstance(stmt.target, n.Subscript):
            target_stage = self.expr_stage(stmt.target.base, scope)
            idx = self.expr_stage(stmt.target.index, scope)
            if idx > target_stage:
                raise StageError(
                    DYNAMIC_TO_STATIC_FLOW,
                    "subscript index is more dynamic than the array",
                    stmt.span)
        else:
            raise ParseError("invalid assignment target", stmt.span)
        src = self.expr_stage(stmt.value, scope)
        if src > target_stage:
            raise StageError(
                DYNAMIC_TO_STATIC_FLOW,
                f"cannot assign a stage-{src} value to a stage-"
                f"{target_stage} target", stmt.span)
        self.check_mutation(target_stage, stmt.span, scope)
        stmt.stage = target_stage

    def check_if(self, stmt: n.If, scope: _Scope) -> None:
        cstage = self.construct_stage(stmt.at_count, stmt.span, scope)
        guard = self.expr_stage(stmt.cond, scope)
        if stmt.at_count >= 1 and guard > cstage:
            raise StageError(
                STATIC_CONTROL_WITH_DYNAMIC_GUARD,
                f"guard of if{'@' * stmt.at_count} has stage {guard}; it "
                f"must be static", stmt.span)
        effective = cstage if stmt.at_count >= 1 else guard
        scope.controls.append(effective)
        scope.push()
        self.check_stmt(stmt.then_stmt, scope)
        scope.pop()
        if stmt.else_stmt is not None:
            scope.push()
            self.check_stmt(stmt.else_stmt, scope)
            scope.pop()
        scope.controls.pop()
        stmt.stage = effective

    def check_for(self, stmt: n.For, scope: _Scope) -> None:
        cstage = self.construct_stage(stmt.at_count, stmt.span, scope)
        scope.push()
        if stmt.init is not None:
            self.check_stmt(stmt.init, scope)
            if stmt.at_count >= 1 and (stmt.init.stage or 0) > cstage:
                raise StageError(
                    STATIC_CONTROL_WITH_DYNAMIC_GUARD,
                    "loop control of an annotated loop must be static",
                    stmt.span)
        guard = 0 if stmt.cond is None else self.expr_stage(stmt.cond, scope)
        if stmt.at_count >= 1 and guard > cstage:
            raise StageError(
                STATIC_CONTROL_WITH_DYNAMIC_GUARD,
                f"guard of for{'@' * stmt.at_count} has stage {guard}; it "
                f"must be static", stmt.span)
        effective = cstage if stmt.at_count >= 1 else guard
        scope.controls.append(effective)
        if stmt.incr is not None:
            self.check_stmt(stmt.incr, scope)
            if stmt.at_count >= 1 and (stmt.incr.stage or 0) > cstage:
                raise StageError(
                    STATIC_CONTROL_WITH_DYNAMIC_GUARD,
                    "loop control of an annotated loop must be static",
                    stmt.span)
        scope.push()
        self.check_stmt(stmt.body, scope)
        scope.pop()
        scope.controls.pop()
        scope.pop()
        stmt.stage = effective

    def check_switch(self, stmt: n.Switch, scope: _Scope) -> None:
        cstage = self.construct_stage(stmt.at_count, stmt.span, scope)
        guard = self.expr_stage(stmt.subject, scope)
        if stmt.at_count >= 1 and guard > cstage:
            raise StageError(
                STATIC_CONTROL_WITH_DYNAMIC_GUARD,
                f"subject of switch{'@' * stmt.at_count} has stage {guard}; "
                f"it must be static", stmt.span)
        effective = cstage if stmt.at_count >= 1 else guard
        scope.controls.append(effective)
        for case in stmt.cases:
            if case.label is not None and \
                    self.expr_stage(case.label, scope) > 0:
                raise StageError(DYNAMIC_TO_STATIC_FLOW,
                                 "case labels must be static", case.span)
            scope.push()
            for s in case.body:
                self.check_stmt(s, scope)
            scope.pop()
        scope.controls.pop()
        stmt.stage = effective

    def check_static_ctor_block(self, block: n.Block, scope: _Scope) -> None:
        """The compile-time constructor body must be fully static."""
        scope.push()
        for s in block.stmts:
            self.check_static_ctor_stmt(s, scope)
        scope.pop()

    def check_static_ctor_stmt(self, stmt: n.Stmt, scope: _Scope) -> None:
        if isinstance(stmt, n.Return):
            raise StageError(DYNAMIC_IN_STATIC_CONSTRUCTOR,
                             "constructors do not return values", stmt.span)
        self.check_stmt(stmt, scope)
        if isinstance(stmt, (n.VarDecl, n.Assign, n.ExprStmt)) and \
                (stmt.stage or 0) > 0:
            raise StageError(
                DYNAMIC_IN_STATIC_CONSTRUCTOR,
                "dynamic construct inside a compile-time constructor",
                stmt.span)
        if isinstance(stmt, (n.If, n.For, n.Switch)) and (stmt.stage or 0) > 0:
            raise StageError(
                DYNAMIC_IN_STATIC_CONSTRUCTOR,
                "dynamic control flow inside a compile-time constructor",
                stmt.span)
        if isinstance(stmt, n.Block):
            # already checked recursively via check_stmt
            pass

    # -- expressions ----------------------------------------------------------

    def expr_stage(self, e: n.Expr, scope: _Scope) -> int:
        stage = self._expr_stage(e, scope)
        e.stage = stage
        return stage

    def _expr_stage(self, e: n.Expr, scope: _Scope) -> int:
        if isinstance(e, (n.IntLit, n.FloatLit, n.BoolLit, n.StringLit)):
            return 0
        if isinstance(e, n.TypeLit):
            t = e.type_expr
            if isinstance(t, n.NamedType):
                self.check_named_type(t, e.span, scope)
            return 0
        if isinstance(e, n.VarRef):
            sym = scope.find(e.name)
            if sym is None:
                raise UnboundVariable(f"unbound variable '{e.name}'", e.span)
            return sym.stage
        if isinstance(e, n.Unary):
            return self.expr_stage(e.operand, scope)
        if isinstance(e, n.Incr):
            return self.expr_stage(e.target, scope)
        if isinstance(e, n.Binary):
            return max(self.expr_stage(e.lhs, scope),
                       self.expr_stage(e.rhs, scope))
        if isinstance(e, n.Cond):
            return max(self.expr_stage(e.cond, scope),
                       self.expr_stage(e.then_expr, scope),
                       self.expr_stage(e.else_expr, scope))
        if isinstance(e, n.Subscript):
            return max(self.expr_stage(e.base, scope),
                       self.expr_stage(e.index, scope))
        if isinstance(e, n.Call):
            return self.call_stage(e, scope)
        raise ParseError(f"unexpected expression {type(e).__name__}", e.span)

    def call_stage(self, e: n.Call, scope: _Scope) -> int:
        if e.callee in KNOWN_BUILTINS:
            for a in e.args:
                if self.expr_stage(a, scope) > 0:
                    raise StageError(
                        DYNAMIC_TO_STATIC_FLOW,
                        f"argument of builtin '{e.callee}' must be static",
                        e.span)
            return 0
        arities = self.fn_names.get(e.callee)
        if arities is None:
            raise UnboundVariable(f"unknown function '{e.callee}'", e.span)
        if e.static_args is not None:
            if len(e.static_args) not in arities:
                raise UnboundVariable(
                    f"no definition of '{e.callee}' takes "
                    f"{len(e.static_args)} static argument(s)", e.span)
            for a in e.static_args:
                if self.expr_stage(a, scope) > 0:
                    raise StageError(
                        DYNAMIC_TO_STATIC_FLOW,
                        f"static argument of '{e.callee}' is not static",
                        e.span)
            for a in e.args:
                self.expr_stage(a, scope)
            return scope.default
        if e.at_count >= 1:
            stage = self.construct_stage(e.at_count, e.span, scope)
            if 0 not in arities:
                raise UnboundVariable(
                    f"'{e.callee}' requires static arguments; call it as "
                    f"{e.callee}(s...)(d...)", e.span)
            for a in e.args:
                if self.expr_stage(a, scope) > stage:
                    raise StageError(
                        DYNAMIC_TO_STATIC_FLOW,
                        f"argument of {e.callee}{'@' * e.at_count}(...) must "
                        "be static", e.span)
            return stage
        # Plain call: happens at the scope's stage.
        for a in e.args:
            self.expr_stage(a, scope)
        if 0 not in arities and not self._inferable(e):
            raise UnboundVariable(
                f"'{e.callee}' requires static arguments; call it as "
                f"{e.callee}(s...)(d...)", e.span)
        if e.callee in self.static_only and scope.default > 0:
            raise StageError(
                TYPENAME_DYNAMIC_BINDING,
                f"'{e.callee}' binds typename parameters and can only be "
                f"invoked statically ({e.callee}@(...))", e.span)
        return scope.default

    def _inferable(self, e: n.Call) -> bool:
        """Static parameters inferable from dynamic argument types: every
        static parameter is a typename appearing as the pointer element type
        of some dynamic parameter."""
        for arity in self.fn_names.get(e.callee, []):
            fn = self.functions[(e.callee, arity)]
            if fn.static_params is None:
                continue
            names = set()
            for p in fn.static_params:
                if not n.is_typename_type(p.dtype):
                    break
                names.add(p.name)
            else:
                covered = set()
                for p in fn.params:
                    if isinstance(p.dtype, n.PointerType) and \
                            isinstance(p.dtype.base, n.NamedType):
                        covered.add(p.dtype.base.name)
                if names and names <= covered and len(fn.params) == len(e.args):
                    return True
        return False


def check_stages(program: n.Program, levels: int = 2) -> StagedAST:
    """Verify well-stagedness; raises StageError/UnboundVariable on the
    first violation in source order."""
    if levels < 1:
        raise ValueError("levels must be >= 1")
    return _Checker(program, levels).check()


def stage_of(expr: n.Expr, env: dict, levels: int = 2) -> int:
    """Stage of a single expression given variable stages.

    ``env`` maps variable names either to plain stage integers or to
    ``(stage, is_typename)`` pairs."""
    program = n.Program([])
    checker = _Checker(program, levels)
    scope = _Scope(default=levels - 1)
    for name, info in env.items():
        if isinstance(info, tuple):
            scope.declare(name, _Sym(info[0], bool(info[1])))
        else:
            scope.declare(name, _Sym(int(info)))
    return checker.expr_stage(expr, scope)
