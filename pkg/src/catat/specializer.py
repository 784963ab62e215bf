"""The offline partial evaluator.

Given a checked program, every static construct is evaluated and every
dynamic construct is residualized: static loops unroll (one residual copy
of the body per iteration, with static state threaded sequentially),
annotated conditionals and switches keep exactly one branch, static values
crossing into dynamic code are lifted as literals, typename-typed
declarations are replaced by concrete types, and nested calls carrying
static arguments become calls to recursively specialized residuals.

Specializations are memoized per (definition, static-argument tuple);
each key yields exactly one residual entity per run, named by a
deterministic mangling scheme.  Completion order is callees-first, so the
residual program emits in one pass.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import nodes as n
from .errors import (
    LiftError, ReturnTypeMismatch, SelfRecursiveSpecialization, Span,
    StageLeak, TypeMismatch, UnboundVariable,
)
from .flatten import BUILDERS
from .staging import StagedAST
from .staticeval import DepthGuard, EvalLimits, Interpreter
from .values import (
    ArrayV, BOOL, BoolV, ClassTV, Env, FixedArrayTV, FloatV, IntV,
    PointerTV, PRIM_BY_NAME, Slot, StrV, TypeValue, VOID, Value, arith,
    canonical_key, coerce, describe, mangle_name, promote,
    render_static_arg, truth, type_of_value,
)

_ASSIGN_OPS = ("=", "+=", "-=", "*=", "/=", "%=")
_COMPARISONS = ("==", "!=", "<", ">", "<=", ">=", "&&", "||")


# ---------------------------------------------------------------------------
# Keys, residual entities, cache


@dataclass(frozen=True)
class SpecializationKey:
    kind: str  # "function" | "class"
    name: str
    args: tuple  # canonical value keys

    @classmethod
    def for_function(cls, name: str, static_args: list) -> "SpecializationKey":
        return cls("function", name,
                   tuple(canonical_key(v) for v in static_args))

    @classmethod
    def for_class(cls, name: str, static_args: list) -> "SpecializationKey":
        return cls("class", name,
                   tuple(canonical_key(v) for v in static_args))


def mangle(base: str, key: SpecializationKey) -> str:
    """Deterministic residual name for a specialization key."""
    return mangle_name(base, key.args)


def key_comment(key: SpecializationKey, static_args: list) -> str:
    rendered = ", ".join(render_static_arg(v) for v in static_args)
    return f"specialized-from: {key.name}({rendered})"


@dataclass
class ResidualFunction:
    name: str
    return_type: TypeValue
    params: list  # (name, TypeValue)
    body: list  # single-level statements
    key: SpecializationKey
    comment: str = ""

    def to_function_def(self) -> n.FunctionDef:
        params = [n.Param(name, type_value_to_texpr(tv))
                  for name, tv in self.params]
        return n.FunctionDef(self.name, None, params, n.Block(list(self.body)),
                             declared_return=type_value_to_texpr(
                                 self.return_type))

    to_def = to_function_def


@dataclass
class ResidualClass:
    name: str
    members: list  # (visibility, name, TypeValue) for dynamic members
    static_members: dict  # name -> Value
    ctor_body: list | None  # residual dynamic-constructor statements
    key: SpecializationKey
    comment: str = ""

    def to_class_def(self) -> n.ClassDef:
        items: list = []
        if self.ctor_body is not None:
            items.append(n.VisibilityLabel("public"))
            items.append(n.CtorDef(0, n.Block(list(self.ctor_body))))
        vis = None
        for visibility, name, tv in self.members:
            if visibility != vis:
                items.append(n.VisibilityLabel(visibility))
                vis = visibility
            dtype, size = type_value_to_decl(tv)
            items.append(n.VarDecl(dtype, [n.Declarator(name, size, None)]))
        return n.ClassDef(self.name, [], items)

    to_def = to_class_def


_IN_PROGRESS = object()


class SpecializationCache:
    """Memoization table, name registry, and shared depth accounting."""

    def __init__(self, staged: StagedAST, limits: EvalLimits | None = None):
        self.staged = staged
        self.limits = limits or EvalLimits()
        self.guard = DepthGuard(self.limits.max_depth)
        self.interp = Interpreter(staged.program, self.limits,
                                  depth_guard=self.guard)
        self.functions = staged.functions_by_key()
        self.classes = staged.classes_by_name()
        self.entries: dict[SpecializationKey, object] = {}
        self.order: list = []
        self.names: dict[str, SpecializationKey] = {}
        self.names_by_key: dict[SpecializationKey, str] = {}
        self.global_dyn: dict[str, tuple[str, TypeValue | None]] = {}

    @property
    def globals(self) -> Env:
        return self.interp.globals

    def lookup(self, key: SpecializationKey):
        entry = self.entries.get(key)
        if entry is _IN_PROGRESS:
            raise SelfRecursiveSpecialization(
                f"specialization of '{key.name}' recursively requires "
                "itself with identical static arguments")
        return entry

    def in_progress(self, key: SpecializationKey) -> bool:
        return self.entries.get(key) is _IN_PROGRESS

    def reserve(self, key: SpecializationKey, base: str) -> str:
        name = mangle(base, key)
        candidate = name
        suffix = 1
        while candidate in self.names and self.names[candidate] != key:
            suffix += 1
            candidate = f"{name}_{suffix}"
        self.names[candidate] = key
        self.names_by_key[key] = candidate
        self.entries[key] = _IN_PROGRESS
        return candidate

    def complete(self, key: SpecializationKey, entity) -> None:
        self.entries[key] = entity
        self.order.append(entity)

    def return_type_of(self, residual_name: str) -> TypeValue | None:
        key = self.names.get(residual_name)
        if key is None:
            return None
        entity = self.entries.get(key)
        if isinstance(entity, ResidualFunction):
            return entity.return_type
        return None


@dataclass
class ResidualProgram:
    """Single-level program plus the cache bookkeeping that produced it."""

    units: list = field(default_factory=list)
    top_stmts: list = field(default_factory=list)
    entry_name: str | None = None
    provenance: dict = field(default_factory=dict)  # name -> SpecializationKey
    comments: dict = field(default_factory=dict)  # name -> provenance text
    static_bindings: list = field(default_factory=list)  # (name, Value)

    @property
    def is_pure_static(self) -> bool:
        return not self.units and not self.top_stmts

    def to_program_ast(self) -> n.Program:
        items = [u.to_def() for u in self.units]
        items.extend(self.top_stmts)
        return n.Program(items)

    def provenance_comments(self) -> dict:
        return dict(self.comments)

    def function(self, name: str) -> ResidualFunction:
        for u in self.units:
            if isinstance(u, ResidualFunction) and u.name == name:
                return u
        raise KeyError(name)


# ---------------------------------------------------------------------------
# Lifting and type rendering


def lift(v: Value, span: Span | None = None) -> n.Expr:
    """A literal expression denoting a static value, for insertion into
    dynamic code (cross-stage persistence)."""
    if isinstance(v, IntV):
        if v.value < 0:
            return n.Unary("-", n.IntLit(-v.value), span=span)
        return n.IntLit(v.value, span=span)
    if isinstance(v, FloatV):
        if v.value < 0:
            return n.Unary("-", n.FloatLit(-v.value), span=span)
        return n.FloatLit(v.value, span=span)
    if isinstance(v, BoolV):
        return n.BoolLit(v.value, span=span)
    raise LiftError(f"{describe(v)} has no literal form in dynamic code",
                    span)


def type_value_to_texpr(tv: TypeValue) -> n.TypeExpr:
    if isinstance(tv, PointerTV):
        return n.PointerType(type_value_to_texpr(tv.elem))
    if isinstance(tv, FixedArrayTV):
        return n.ArrayType(type_value_to_texpr(tv.elem), n.IntLit(tv.size))
    if isinstance(tv, ClassTV):
        from .values import render_type
        return n.NamedType(render_type(tv))
    return n.PrimType(tv.name)


def type_value_to_decl(tv: TypeValue) -> tuple[n.TypeExpr, n.Expr | None]:
    """Declaration-style rendering: arrays move the size to the declarator."""
    if isinstance(tv, FixedArrayTV):
        return type_value_to_texpr(tv.elem), n.IntLit(tv.size)
    return type_value_to_texpr(tv), None


def _texpr_to_tv(t: n.TypeExpr) -> TypeValue | None:
    if isinstance(t, n.PrimType):
        return PRIM_BY_NAME.get(t.name)
    if isinstance(t, n.NamedType):
        return ClassTV(t.name)
    if isinstance(t, n.PointerType):
        inner = _texpr_to_tv(t.base)
        return None if inner is None else PointerTV(inner)
    if isinstance(t, n.ArrayType) and isinstance(t.size, n.IntLit):
        inner = _texpr_to_tv(t.base)
        return None if inner is None else FixedArrayTV(inner, t.size.value)
    return None


# ---------------------------------------------------------------------------
# Residual return-type inference


def infer_return_type(body: list, param_types: dict,
                      callee_types=None) -> TypeValue:
    """Unify the types of all return expressions in a residual body under
    numeric promotion; no returns means void."""
    walker = _ReturnTyper(dict(param_types), callee_types)
    for s in body:
        walker.visit(s)
    known = [tv for tv in walker.found if tv is not None]
    if not known:
        if walker.found:
            raise ReturnTypeMismatch(
                "return type depends only on unresolvable calls")
        return VOID
    result = known[0]
    for tv in known[1:]:
        unified = promote(result, tv)
        if unified is None:
            from .values import render_type
            raise ReturnTypeMismatch(
                f"cannot unify return types {render_type(result)} and "
                f"{render_type(tv)}")
        result = unified
    return result


class _ReturnTyper:
    def __init__(self, params: dict, callee_types):
        self.scopes = [dict(params)]
        self.callee_types = callee_types
        self.found: list = []

    def visit(self, s: n.Stmt) -> None:
        if isinstance(s, n.VarDecl):
            for d in s.declarators:
                dtype = s.dtype
                if d.array_size is not None:
                    dtype = n.ArrayType(dtype, d.array_size)
                self.scopes[-1][d.name] = _texpr_to_tv(dtype)
        elif isinstance(s, n.Return):
            self.found.append(VOID if s.value is None
                              else self.type_of(s.value))
        elif isinstance(s, n.Block):
            self.scopes.append({})
            for sub in s.stmts:
                self.visit(sub)
            self.scopes.pop()
        elif isinstance(s, n.If):
            self.visit(s.then_stmt)
            if s.else_stmt is not None:
                self.visit(s.else_stmt)
        elif isinstance(s, n.For):
            self.scopes.append({})
            if s.init is not None:
                self.visit(s.init)
            self.visit(s.body)
            self.scopes.pop()
        elif isinstance(s, n.Switch):
            for case in s.cases:
                self.scopes.append({})
                for sub in case.body:
                    self.visit(sub)
                self.scopes.pop()

    def lookup(self, name: str) -> TypeValue | None:
        for scope in reversed(self.scopes):
            if name in scope:
                return scope[name]
        return None

    def type_of(self, e: n.Expr) -> TypeValue | None:
        if isinstance(e, n.IntLit):
            return PRIM_BY_NAME["int"]
        if isinstance(e, n.FloatLit):
            return PRIM_BY_NAME["float"]
        if isinstance(e, n.BoolLit):
            return BOOL
        if isinstance(e, n.VarRef):
            return self.lookup(e.name)
        if isinstance(e, n.Unary):
            if e.op == "!":
                return BOOL
            return self.type_of(e.operand)
        if isinstance(e, n.Incr):
            return self.type_of(e.target)
        if isinstance(e, n.Binary):
            if e.op in _COMPARISONS:
                return BOOL
            lhs = self.type_of(e.lhs)
            rhs = self.type_of(e.rhs)
            if lhs is None or rhs is None:
                return None
            return promote(lhs, rhs)
        if isinstance(e, n.Cond):
            lhs = self.type_of(e.then_expr)
            rhs = self.type_of(e.else_expr)
            if lhs is None or rhs is None:
                return None
            return promote(lhs, rhs)
        if isinstance(e, n.Subscript):
            base = self.type_of(e.base)
            if isinstance(base, (PointerTV, FixedArrayTV)):
                return base.elem
            return None
        if isinstance(e, n.Call):
            if self.callee_types is None:
                return None
            return self.callee_types(e.callee)
        return None


# ---------------------------------------------------------------------------
# Residualization


@dataclass
class RExpr:
    """Outcome of partially evaluating one expression."""

    value: Value | None  # set when fully static
    node: n.Expr | None  # set when residual
    tv: TypeValue | None  # best-effort type of the residual expression

    @property
    def is_static(self) -> bool:
        return self.node is None


def _static(v: Value) -> RExpr:
    return RExpr(v, None, type_of_value(v))


def _dyn(node: n.Expr, tv: TypeValue | None) -> RExpr:
    return RExpr(None, node, tv)


class _SpecCtx:
    def __init__(self, cache: SpecializationCache, env: Env,
                 base_dyn_scopes: list | None = None):
        self.cache = cache
        self.interp = cache.interp
        self.default = cache.staged.levels - 1
        self.env = env  # static values
        self.dyn: list[dict] = (base_dyn_scopes or []) + [{}]
        self.res_declared: list[set] = [set()]

    # scope plumbing --------------------------------------------------------

    def push_source(self) -> None:
        self.dyn.append({})
        self.env = self.env.child()

    def pop_source(self) -> None:
        self.dyn.pop()
        self.env = self.env.parent

    def push_residual(self) -> None:
        self.res_declared.append(set())

    def pop_residual(self) -> None:
        self.res_declared.pop()

    def declare_dyn(self, name: str, tv: TypeValue | None) -> str:
        declared = self.res_declared[-1]
        candidate = name
        suffix = 1
        while candidate in declared:
            suffix += 1
            candidate = f"{name}_{suffix}"
        declared.add(candidate)
        self.dyn[-1][name] = (candidate, tv)
        return candidate

    def lookup_dyn(self, name: str):
        for scope in reversed(self.dyn):
            if name in scope:
                return scope[name]
        return None


class _Specializer:
    def __init__(self, cache: SpecializationCache):
        self.cache = cache
        self.interp = cache.interp
        self.default = cache.staged.levels - 1

    # -- function specialization ------------------------------------------------

    def specialize_function(self, fn: n.FunctionDef,
                            static_args: list) -> ResidualFunction:
        key = SpecializationKey.for_function(fn.name, static_args)
        cached = self.cache.lookup(key)
        if cached is not None:
            if not isinstance(cached, ResidualFunction):
                raise TypeMismatch(f"'{fn.name}' is not a function", fn.span)
            return cached
        sparams = fn.static_params or []
        if len(static_args) != len(sparams):
            raise TypeMismatch(
                f"'{fn.name}' expects {len(sparams)} static argument(s), "
                f"got {len(static_args)}", fn.span)
        self.cache.guard.enter(fn.span)
        try:
            name = self.cache.reserve(key, fn.name)
            env = self.cache.globals.child()
            for p, a in zip(sparams, static_args):
                tv = self.interp.resolve_type(p.dtype, env, p.span)
                env.declare(p.name, Slot(coerce(a, tv, p.span), tv), p.span)
            ctx = _SpecCtx(self.cache, env,
                           base_dyn_scopes=[self.cache.global_dyn])
            params = []
            for p in fn.params:
                tv = self.interp.resolve_type(p.dtype, env, p.span)
                res_name = ctx.declare_dyn(p.name, tv)
                params.append((res_name, tv))
            body = self.stmts([*fn.body.stmts], ctx)
            rtype = infer_return_type(body, dict(params),
                                      self.cache.return_type_of)
            residual = ResidualFunction(name, rtype, params, body, key,
                                        comment=key_comment(key, static_args))
            self.cache.complete(key, residual)
            return residual
        finally:
            self.cache.guard.exit()

    # -- class specialization ---------------------------------------------------

    def specialize_class(self, cls: n.ClassDef,
                         static_args: list) -> ResidualClass:
        key = SpecializationKey.for_class(cls.name, static_args)
        cached = self.cache.lookup(key)
        if cached is not None:
            if not isinstance(cached, ResidualClass):
                raise TypeMismatch(f"'{cls.name}' is not a class", cls.span)
            return cached
        if len(static_args) != len(cls.static_params):
            raise TypeMismatch(
                f"class '{cls.name}' expects {len(cls.static_params)} static "
                f"argument(s), got {len(static_args)}", cls.span)
        self.cache.guard.enter(cls.span)
        try:
            name = self.cache.reserve(key, cls.name)
            env = self.cache.globals.child()
            for p, a in zip(cls.static_params, static_args):
                tv = self.interp.resolve_type(p.dtype, env, p.span)
                env.declare(p.name, Slot(coerce(a, tv, p.span), tv), p.span)
            # Static members first (unset slots unless initialized), so the
            # compile-time constructor can assign them before sizes resolve.
            static_names: list[str] = []
            dynamic_decls: list[tuple[str, n.VarDecl, n.Declarator]] = []
            visibility = "private"
            for item in cls.items:
                if isinstance(item, n.VisibilityLabel):
                    visibility = item.name
                    continue
                if not isinstance(item, n.VarDecl):
                    continue
                is_static = (n.annotation_count(item.dtype) >= self.default
                             or n.is_typename_type(item.dtype))
                for d in item.declarators:
                    if is_static:
                        static_names.append(d.name)
                        tv = self.interp.resolve_type(item.dtype, env,
                                                      item.span)
                        value = coerce(self.interp.eval_expr(d.init, env),
                                       tv, d.span) if d.init is not None \
                            else None
                        env.declare(d.name, Slot(value, tv), d.span)
                    else:
                        dynamic_decls.append((visibility, item, d))
            ctor = cls.static_ctor()
            if ctor is not None:
                self.interp.exec_block(ctor.body, env.child())
            members = []
            ctx = _SpecCtx(self.cache, env,
                           base_dyn_scopes=[self.cache.global_dyn])
            for visibility, decl, d in dynamic_decls:
                dtype = decl.dtype
                if d.array_size is not None:
                    dtype = n.ArrayType(dtype, d.array_size)
                tv = self.interp.resolve_type(dtype, env, decl.span)
                ctx.declare_dyn(d.name, tv)
                members.append((visibility, d.name, tv))
            ctor_body = None
            dyn_ctor = cls.dynamic_ctor()
            if dyn_ctor is not None:
                ctor_body = self.stmts([*dyn_ctor.body.stmts], ctx)
            static_members = {m: env.slots[m].value for m in static_names}
            residual = ResidualClass(name, members, static_members, ctor_body,
                                     key,
                                     comment=key_comment(key, static_args))
            self.cache.complete(key, residual)
            return residual
        finally:
            self.cache.guard.exit()

    def static_instance(self, cls: n.ClassDef, static_args: list,
                        span: Span | None):
        """The ``Name@(...) x;`` form: a fully compile-time instance.

        Requires every member (and hence the run-time constructor body) to
        be static; yields an instance value and no residual."""
        for decl in cls.member_decls():
            if n.annotation_count(decl.dtype) >= self.default or \
                    n.is_typename_type(decl.dtype):
                continue
            names = ", ".join(d.name for d in decl.declarators)
            raise TypeMismatch(
                f"'{cls.name}' cannot be instantiated at compile time: "
                f"member(s) {names} are dynamic", span)
        if len(static_args) != len(cls.static_params):
            raise TypeMismatch(
                f"class '{cls.name}' expects {len(cls.static_params)} static "
                f"argument(s), got {len(static_args)}", span)
        self.cache.guard.enter(span)
        try:
            env = self.cache.globals.child()
            for p, a in zip(cls.static_params, static_args):
                tv = self.interp.resolve_type(p.dtype, env, p.span)
                env.declare(p.name, Slot(coerce(a, tv, p.span), tv), p.span)
            member_names = []
            for decl in cls.member_decls():
                tv = self.interp.resolve_type(decl.dtype, env, decl.span)
                for d in decl.declarators:
                    member_names.append(d.name)
                    value = coerce(self.interp.eval_expr(d.init, env), tv,
                                   d.span) if d.init is not None else None
                    env.declare(d.name, Slot(value, tv), d.span)
            for ctor in (cls.static_ctor(), cls.dynamic_ctor()):
                if ctor is not None:
                    self.interp.exec_block(ctor.body, env.child())
            from .values import InstanceV
            name = mangle_name(cls.name, key_args(static_args))
            return InstanceV(name,
                             {m: env.slots[m].value for m in member_names})
        finally:
            self.cache.guard.exit()

    # -- statements -------------------------------------------------------------

    def stmts(self, source: list, ctx: _SpecCtx) -> list:
        out: list = []
        for s in source:
            self.stmt(s, ctx, out)
        return out

    def splice(self, body: n.Stmt, ctx: _SpecCtx, out: list) -> None:
        """Inline a selected/unrolled region into the current residual block."""
        ctx.push_source()
        if isinstance(body, n.Block):
            for s in body.stmts:
                self.stmt(s, ctx, out)
        else:
            self.stmt(body, ctx, out)
        ctx.pop_source()

    def sub_stmt(self, body: n.Stmt, ctx: _SpecCtx) -> n.Stmt:
        """Residualize the body of a residual control construct."""
        ctx.push_residual()
        out: list = []
        self.splice(body, ctx, out)
        ctx.pop_residual()
        if len(out) == 1:
            return out[0]
        return n.Block(out)

    def stmt(self, s: n.Stmt, ctx: _SpecCtx, out: list) -> None:
        if isinstance(s, n.VarDecl):
            self.var_decl(s, ctx, out)
        elif isinstance(s, n.Assign):
            self.assign(s, ctx, out)
        elif isinstance(s, n.ExprStmt):
            r = self.rexpr(s.expr, ctx)
            if not r.is_static:
                out.append(n.ExprStmt(r.node, span=s.span))
        elif isinstance(s, n.Return):
            if s.value is None:
                out.append(n.Return(None, span=s.span))
            else:
                r = self.rexpr(s.value, ctx)
                out.append(n.Return(self.as_node(r, s.span), span=s.span))
        elif isinstance(s, n.Block):
            ctx.push_residual()
            ctx.push_source()
            inner = self.stmts(s.stmts, ctx)
            ctx.pop_source()
            ctx.pop_residual()
            out.append(n.Block(inner, span=s.span))
        elif isinstance(s, n.If):
            self.if_stmt(s, ctx, out)
        elif isinstance(s, n.For):
            self.for_stmt(s, ctx, out)
        elif isinstance(s, n.Switch):
            self.switch_stmt(s, ctx, out)
        else:
            raise TypeMismatch(f"cannot specialize {type(s).__name__}",
                               s.span)

    def var_decl(self, s: n.VarDecl, ctx: _SpecCtx, out: list) -> None:
        if isinstance(s.dtype, n.ClassAppType) and s.dtype.ctime:
            cls = self.cache.classes.get(s.dtype.name)
            if cls is None:
                raise UnboundVariable(f"unknown class '{s.dtype.name}'",
                                      s.span)
            args = [self.static_value(a, ctx) for a in s.dtype.args]
            for d in s.declarators:
                inst = self.static_instance(cls, args, s.span)
                ctx.env.declare(d.name, Slot(inst, ClassTV(cls.name)), d.span)
            return
        k = n.annotation_count(s.dtype)
        if k >= self.default or n.is_typename_type(s.dtype):
            self.interp.exec_stmt(s, ctx.env)
            return
        if isinstance(s.dtype, n.ClassAppType):
            cls = self.cache.classes.get(s.dtype.name)
            if cls is None:
                raise UnboundVariable(f"unknown class '{s.dtype.name}'",
                                      s.span)
            args = [self.static_value(a, ctx) for a in s.dtype.args]
            rc = self.specialize_class(cls, args)
            for d in s.declarators:
                res_name = ctx.declare_dyn(d.name, ClassTV(cls.name,
                                                           key_args(args)))
                out.append(n.VarDecl(n.NamedType(rc.name),
                                     [n.Declarator(res_name, None, None)],
                                     span=s.span))
            return
        for d in s.declarators:
            dtype = s.dtype
            if d.array_size is not None:
                dtype = n.ArrayType(dtype, d.array_size)
            tv = self.interp.resolve_type(dtype, ctx.env, s.span)
            init_node = None
            if d.init is not None:
                r = self.rexpr(d.init, ctx)
                init_node = self.as_node(r, d.span)
            res_name = ctx.declare_dyn(d.name, tv)
            res_dtype, res_size = type_value_to_decl(tv)
            if 0 < k < self.default and \
                    isinstance(res_dtype, (n.PrimType, n.NamedType)):
                # deeper-staged declaration: the annotation run is relative,
                # so it carries into the (L-1)-level residual unchanged
                res_dtype.at_count = k
            out.append(n.VarDecl(res_dtype,
                                 [n.Declarator(res_name, res_size, init_node)],
                                 span=s.span))

    def assign(self, s: n.Assign, ctx: _SpecCtx, out: list) -> None:
        if isinstance(s.target, n.VarRef):
            slot = ctx.env.find(s.target.name)
            if slot is not None:
                value = self.static_value(s.value, ctx)
                if s.op != "=":
                    if slot.value is None:
                        raise UnboundVariable(
                            f"'{s.target.name}' read before assignment",
                            s.span)
                    value = arith(s.op[0], slot.value, value, s.span)
                slot.value = coerce(value, slot.tv, s.span)
                return
            entry = ctx.lookup_dyn(s.target.name)
            if entry is None:
                raise StageLeak(
                    f"assignment target '{s.target.name}' is neither static "
                    "nor residual", s.span)
            res_name, _tv = entry
            r = self.rexpr(s.value, ctx)
            out.append(n.Assign(n.VarRef(res_name), s.op,
                                self.as_node(r, s.span), span=s.span))
            return
        if isinstance(s.target, n.Subscript):
            base = self.rexpr(s.target.base, ctx)
            if base.is_static:
                idx = self.static_value(s.target.index, ctx)
                value = self.static_value(s.value, ctx)
                if not isinstance(base.value, ArrayV):
                    raise TypeMismatch(
                        f"cannot subscript {describe(base.value)}", s.span)
                if not isinstance(idx, IntV) or \
                        not (0 <= idx.value < len(base.value.cells)):
                    raise TypeMismatch("static subscript out of range",
                                       s.span)
                if s.op != "=":
                    value = arith(s.op[0], base.value.cells[idx.value], value,
                                  s.span)
                base.value.cells[idx.value] = coerce(value, base.value.elem,
                                                     s.span)
                return
            idx = self.rexpr(s.target.index, ctx)
            r = self.rexpr(s.value, ctx)
            out.append(n.Assign(
                n.Subscript(base.node, self.as_node(idx, s.span)), s.op,
                self.as_node(r, s.span), span=s.span))
            return
        raise TypeMismatch("invalid assignment target", s.span)

    def if_stmt(self, s: n.If, ctx: _SpecCtx, out: list) -> None:
        if s.at_count >= self.default:
            if truth(self.static_value(s.cond, ctx), s.span):
                self.splice(s.then_stmt, ctx, out)
            elif s.else_stmt is not None:
                self.splice(s.else_stmt, ctx, out)
            return
        cond = self.rexpr(s.cond, ctx)
        then_stmt = self.sub_stmt(s.then_stmt, ctx)
        else_stmt = self.sub_stmt(s.else_stmt, ctx) \
            if s.else_stmt is not None else None
        out.append(n.If(self.as_node(cond, s.span), then_stmt, else_stmt,
                        s.at_count, s.else_at_count, span=s.span))

    def for_stmt(self, s: n.For, ctx: _SpecCtx, out: list) -> None:
        if s.at_count >= self.default:
            ctx.push_source()
            if s.init is not None:
                discarded: list = []
                self.stmt(s.init, ctx, discarded)
                if discarded:
                    raise StageLeak("loop control of an annotated loop must "
                                    "be static", s.span)
            iterations = 0
            while True:
                if s.cond is not None and \
                        not truth(self.static_value(s.cond, ctx), s.span):
                    break
                iterations += 1
                if iterations > self.cache.limits.loop_cap:
                    from .errors import LoopLimitExceeded
                    raise LoopLimitExceeded(
                        f"loop iteration cap ({self.cache.limits.loop_cap}) "
                        "exceeded during unrolling", s.span)
                self.splice(s.body, ctx, out)
                if s.incr is not None:
                    discarded = []
                    self.stmt(s.incr, ctx, discarded)
                    if discarded:
                        raise StageLeak("loop control of an annotated loop "
                                        "must be static", s.span)
            ctx.pop_source()
            return
        ctx.push_residual()
        ctx.push_source()
        init_out: list = []
        if s.init is not None:
            self.stmt(s.init, ctx, init_out)
        init = init_out[0] if init_out else None
        cond = None
        if s.cond is not None:
            cond = self.as_node(self.rexpr(s.cond, ctx), s.span)
        incr_out: list = []
        if s.incr is not None:
            self.stmt(s.incr, ctx, incr_out)
        incr = incr_out[0] if incr_out else None
        body = self.sub_stmt(s.body, ctx)
        ctx.pop_source()
        ctx.pop_residual()
        out.append(n.For(init, cond, incr, body, s.at_count, span=s.span))

    def switch_stmt(self, s: n.Switch, ctx: _SpecCtx, out: list) -> None:
        if s.at_count >= self.default:
            subject = self.static_value(s.subject, ctx)
            default_case = None
            for case in s.cases:
                if case.label is None:
                    default_case = case
                    continue
                label = self.static_value(case.label, ctx)
                if truth(arith("==", subject, label, case.span), case.span):
                    self.splice(n.Block(case.body), ctx, out)
                    return
            if default_case is not None:
                self.splice(n.Block(default_case.body), ctx, out)
            return
        subject = self.as_node(self.rexpr(s.subject, ctx), s.span)
        cases = []
        for case in s.cases:
            ctx.push_residual()
            ctx.push_source()
            body = self.stmts(case.body, ctx)
            ctx.pop_source()
            ctx.pop_residual()
            label = None
            if case.label is not None:
                label = self.as_node(self.rexpr(case.label, ctx), case.span)
            cases.append(n.SwitchCase(label, body, span=case.span))
        out.append(n.Switch(subject, cases, s.at_count, span=s.span))

    # -- expressions --------------------------------------------------------

    def static_value(self, e: n.Expr, ctx: _SpecCtx) -> Value:
        r = self.rexpr(e, ctx)
        if not r.is_static:
            raise StageLeak(
                "dynamic value reached a static position (stage checking "
                "should have rejected this program)", e.span)
        return r.value

    def as_node(self, r: RExpr, span: Span | None) -> n.Expr:
        if r.is_static:
            return lift(r.value, span)
        return r.node

    def rexpr(self, e: n.Expr, ctx: _SpecCtx) -> RExpr:
        if isinstance(e, n.IntLit):
            return _static(IntV(e.value))
        if isinstance(e, n.FloatLit):
            return _static(FloatV(e.value))
        if isinstance(e, n.BoolLit):
            return _static(BoolV(e.value))
        if isinstance(e, n.StringLit):
            return _static(StrV(e.value))
        if isinstance(e, n.TypeLit):
            return _static(self.interp.resolve_type(e.type_expr, ctx.env,
                                                    e.span))
        if isinstance(e, n.VarRef):
            slot = ctx.env.find(e.name)
            if slot is not None:
                if slot.value is None:
                    raise UnboundVariable(
                        f"'{e.name}' read before assignment", e.span)
                return _static(slot.value)
            entry = ctx.lookup_dyn(e.name)
            if entry is not None:
                res_name, tv = entry
                return _dyn(n.VarRef(res_name, span=e.span), tv)
            raise StageLeak(f"variable '{e.name}' reached the specializer "
                            "unresolved", e.span)
        if isinstance(e, n.Unary):
            r = self.rexpr(e.operand, ctx)
            if r.is_static:
                if e.op == "!":
                    return _static(BoolV(not truth(r.value, e.span)))
                if isinstance(r.value, IntV):
                    return _static(arith("-", IntV(0), r.value, e.span))
                if isinstance(r.value, FloatV):
                    return _static(FloatV(-r.value.value))
                raise TypeMismatch(f"cannot negate {describe(r.value)}",
                                   e.span)
            tv = BOOL if e.op == "!" else r.tv
            return _dyn(n.Unary(e.op, r.node, span=e.span), tv)
        if isinstance(e, n.Incr):
            if not isinstance(e.target, n.VarRef):
                raise TypeMismatch(f"'{e.op}' needs a variable", e.span)
            slot = ctx.env.find(e.target.name)
            if slot is not None:
                return _static(self.interp.eval_expr(e, ctx.env))
            entry = ctx.lookup_dyn(e.target.name)
            if entry is None:
                raise StageLeak(f"variable '{e.target.name}' reached the "
                                "specializer unresolved", e.span)
            res_name, tv = entry
            return _dyn(n.Incr(e.op, n.VarRef(res_name), span=e.span), tv)
        if isinstance(e, n.Binary):
            return self.binary(e, ctx)
        if isinstance(e, n.Cond):
            c = self.rexpr(e.cond, ctx)
            if c.is_static:
                if truth(c.value, e.span):
                    return self.rexpr(e.then_expr, ctx)
                return self.rexpr(e.else_expr, ctx)
            t = self.rexpr(e.then_expr, ctx)
            f = self.rexpr(e.else_expr, ctx)
            tv = None
            if t.tv is not None and f.tv is not None:
                tv = promote(t.tv, f.tv)
            return _dyn(n.Cond(c.node, self.as_node(t, e.span),
                               self.as_node(f, e.span), span=e.span), tv)
        if isinstance(e, n.Subscript):
            base = self.rexpr(e.base, ctx)
            idx = self.rexpr(e.index, ctx)
            if base.is_static:
                if not idx.is_static:
                    raise LiftError(
                        "a static array cannot flow into dynamic code "
                        "(dynamic index into static data)", e.span)
                if not isinstance(base.value, ArrayV):
                    raise TypeMismatch(
                        f"cannot subscript {describe(base.value)}", e.span)
                if not isinstance(idx.value, IntV) or \
                        not (0 <= idx.value.value < len(base.value.cells)):
                    from .errors import OutOfBounds
                    raise OutOfBounds("static subscript out of range", e.span)
                return _static(base.value.cells[idx.value.value])
            elem = None
            if isinstance(base.tv, (PointerTV, FixedArrayTV)):
                elem = base.tv.elem
            return _dyn(n.Subscript(base.node, self.as_node(idx, e.span),
                                    span=e.span), elem)
        if isinstance(e, n.Call):
            return self.call(e, ctx)
        raise TypeMismatch(f"cannot specialize {type(e).__name__}", e.span)

    def binary(self, e: n.Binary, ctx: _SpecCtx) -> RExpr:
        if e.op in ("&&", "||"):
            lhs = self.rexpr(e.lhs, ctx)
            if lhs.is_static:
                decided = truth(lhs.value, e.span)
                if (e.op == "&&" and not decided) or \
                        (e.op == "||" and decided):
                    return _static(BoolV(decided))
                rhs = self.rexpr(e.rhs, ctx)
                if rhs.is_static:
                    return _static(BoolV(truth(rhs.value, e.span)))
                return _dyn(rhs.node, BOOL)
            rhs = self.rexpr(e.rhs, ctx)
            return _dyn(n.Binary(e.op, lhs.node, self.as_node(rhs, e.span),
                                 span=e.span), BOOL)
        lhs = self.rexpr(e.lhs, ctx)
        rhs = self.rexpr(e.rhs, ctx)
        if lhs.is_static and rhs.is_static:
            return _static(arith(e.op, lhs.value, rhs.value, e.span))
        if e.op in _COMPARISONS:
            tv = BOOL
        elif lhs.tv is not None and rhs.tv is not None:
            tv = promote(lhs.tv, rhs.tv)
        else:
            tv = None
        return _dyn(n.Binary(e.op, self.as_node(lhs, e.span),
                             self.as_node(rhs, e.span), span=e.span), tv)

    def call(self, e: n.Call, ctx: _SpecCtx) -> RExpr:
        if e.callee in BUILDERS:
            args = [self.static_value(a, ctx) for a in e.args]
            return _static(BUILDERS[e.callee](args, e.span))
        if e.static_args is not None:
            svals = [self.static_value(a, ctx) for a in e.static_args]
            defn = self.cache.functions.get((e.callee, len(svals)))
            if defn is None:
                raise UnboundVariable(
                    f"no definition of '{e.callee}' takes {len(svals)} "
                    "static argument(s)", e.span)
            rf = self.specialize_function(defn, svals)
            args = [self.as_node(self.rexpr(a, ctx), e.span) for a in e.args]
            return _dyn(n.Call(rf.name, args, span=e.span), rf.return_type)
        stage = self.default - e.at_count
        if e.at_count >= 1 and stage <= 0:
            defn = self.cache.functions.get((e.callee, 0))
            if defn is None:
                raise UnboundVariable(f"unknown function '{e.callee}'",
                                      e.span)
            args = [self.static_value(a, ctx) for a in e.args]
            return _static(self.interp.call_function(defn, args, e.span))
        if e.at_count >= 1:
            # multi-level: executes at a later (still static) stage
            args = [self.as_node(self.rexpr(a, ctx), e.span) for a in e.args]
            return _dyn(n.Call(e.callee, args, at_count=e.at_count,
                               span=e.span), None)
        defn = self.cache.functions.get((e.callee, 0))
        if defn is not None:
            key = SpecializationKey.for_function(e.callee, [])
            if self.cache.in_progress(key):
                name = self.cache.names_by_key[key]
                rtype = None
            else:
                rf = self.specialize_function(defn, [])
                name, rtype = rf.name, rf.return_type
            args = [self.as_node(self.rexpr(a, ctx), e.span) for a in e.args]
            return _dyn(n.Call(name, args, span=e.span), rtype)
        return self.inferred_call(e, ctx)

    def inferred_call(self, e: n.Call, ctx: _SpecCtx) -> RExpr:
        """Single-list call to a two-list function: infer typename statics
        from the element types of pointer-typed dynamic arguments."""
        rargs = [self.rexpr(a, ctx) for a in e.args]
        candidates = [fn for (name, arity), fn in self.cache.functions.items()
                      if name == e.callee and arity > 0]
        for fn in candidates:
            if len(fn.params) != len(rargs):
                continue
            if not all(n.is_typename_type(p.dtype)
                       for p in fn.static_params):
                continue
            inferred: dict[str, TypeValue] = {}
            for p, r in zip(fn.params, rargs):
                if isinstance(p.dtype, n.PointerType) and \
                        isinstance(p.dtype.base, n.NamedType):
                    tv = r.tv if r.node is not None else \
                        type_of_value(r.value)
                    if isinstance(tv, (PointerTV, FixedArrayTV)):
                        inferred.setdefault(p.dtype.base.name, tv.elem)
            try:
                svals = [inferred[p.name] for p in fn.static_params]
            except KeyError as missing:
                raise TypeMismatch(
                    f"cannot infer static parameter {missing} of "
                    f"'{e.callee}' from the call's argument types", e.span)
            rf = self.specialize_function(fn, svals)
            args = [self.as_node(r, e.span) for r in rargs]
            return _dyn(n.Call(rf.name, args, span=e.span), rf.return_type)
        raise UnboundVariable(f"unknown function '{e.callee}'", e.span)


def key_args(static_args: list) -> tuple:
    return tuple(canonical_key(v) for v in static_args)


# ---------------------------------------------------------------------------
# Public operations


def specialize_function(fn: n.FunctionDef, static_args: list,
                        cache: SpecializationCache) -> ResidualFunction:
    return _Specializer(cache).specialize_function(fn, list(static_args))


def specialize_class(cls: n.ClassDef, static_args: list,
                     cache: SpecializationCache) -> ResidualClass:
    return _Specializer(cache).specialize_class(cls, list(static_args))


def specialize_program(staged: StagedAST, entry: str | None = None,
                       entry_static_args: list | None = None,
                       limits: EvalLimits | None = None,
                       cache: SpecializationCache | None = None,
                       via_flatten: bool = False) -> ResidualProgram:
    """Specialize a whole program: global statements are processed in
    order (static ones evaluated, dynamic ones residualized), then the
    entry function is specialized with the given static arguments; the
    residual contains the transitive closure of needed specializations."""
    cache = cache or SpecializationCache(staged, limits)
    spec = _Specializer(cache)
    ctx = _SpecCtx(cache, cache.globals)
    ctx.dyn = [cache.global_dyn]
    top_res: list = []
    for item in staged.program.items:
        if isinstance(item, n.Stmt):
            spec.stmt(item, ctx, top_res)
    entry_name = None
    if entry is not None:
        static_args = list(entry_static_args or [])
        fn = cache.functions.get((entry, len(static_args)))
        if fn is not None:
            if via_flatten:
                from .flatten import specialize_via_flatten
                entry_name = specialize_via_flatten(fn, static_args,
                                                    cache).name
            else:
                entry_name = spec.specialize_function(fn, static_args).name
        elif entry in cache.classes:
            entry_name = spec.specialize_class(cache.classes[entry],
                                               static_args).name
        else:
            raise UnboundVariable(
                f"no function '{entry}' taking {len(static_args)} static "
                "argument(s) and no class of that name")
    provenance = {}
    comments = {}
    for unit in cache.order:
        provenance[unit.name] = unit.key
        comments[unit.name] = unit.comment
    bindings = [(name, slot.value)
                for name, slot in cache.globals.slots.items()]
    return ResidualProgram(list(cache.order), top_res, entry_name,
                           provenance, comments, bindings)


# ---------------------------------------------------------------------------
# Alpha-equivalence of residual functions


def alpha_equivalent(a: ResidualFunction, b: ResidualFunction) -> bool:
    """Equality up to renaming of bound (parameter and local) variables."""
    if a.name != b.name or a.return_type != b.return_type:
        return False
    if len(a.params) != len(b.params):
        return False
    fwd: dict[str, str] = {}
    rev: dict[str, str] = {}
    for (an, atv), (bn, btv) in zip(a.params, b.params):
        if atv != btv:
            return False
        fwd[an] = bn
        rev[bn] = an
    return _alpha_stmts(a.body, b.body, fwd, rev)


def _alpha_bind(x: str, y: str, fwd: dict, rev: dict) -> bool:
    if fwd.get(x, y) != y or rev.get(y, x) != x:
        return False
    fwd[x] = y
    rev[y] = x
    return True


def _alpha_stmts(xs: list, ys: list, fwd: dict, rev: dict) -> bool:
    if len(xs) != len(ys):
        return False
    return all(_alpha_stmt(x, y, fwd, rev) for x, y in zip(xs, ys))


def _alpha_stmt(x, y, fwd, rev) -> bool:
    if type(x) is not type(y):
        return False
    if isinstance(x, n.VarDecl):
        if n.strip_annotations(x.dtype) != n.strip_annotations(y.dtype):
            return False
        if len(x.declarators) != len(y.declarators):
            return False
        for dx, dy in zip(x.declarators, y.declarators):
            if not _alpha_bind(dx.name, dy.name, fwd, rev):
                return False
            if (dx.array_size is None) != (dy.array_size is None) or \
                    (dx.init is None) != (dy.init is None):
                return False
            if dx.array_size is not None and \
                    not _alpha_expr(dx.array_size, dy.array_size, fwd, rev):
                return False
            if dx.init is not None and \
                    not _alpha_expr(dx.init, dy.init, fwd, rev):
                return False
        return True
    if isinstance(x, n.Assign):
        return x.op == y.op and _alpha_expr(x.target, y.target, fwd, rev) \
            and _alpha_expr(x.value, y.value, fwd, rev)
    if isinstance(x, n.ExprStmt):
        return _alpha_expr(x.expr, y.expr, fwd, rev)
    if isinstance(x, n.Return):
        if (x.value is None) != (y.value is None):
            return False
        return x.value is None or _alpha_expr(x.value, y.value, fwd, rev)
    if isinstance(x, n.Block):
        return _alpha_stmts(x.stmts, y.stmts, fwd, rev)
    if isinstance(x, n.If):
        if x.at_count != y.at_count:
            return False
        if not _alpha_expr(x.cond, y.cond, fwd, rev):
            return False
        if not _alpha_stmt(x.then_stmt, y.then_stmt, fwd, rev):
            return False
        if (x.else_stmt is None) != (y.else_stmt is None):
            return False
        return x.else_stmt is None or \
            _alpha_stmt(x.else_stmt, y.else_stmt, fwd, rev)
    if isinstance(x, n.For):
        for attr in ("init", "incr"):
            xa, ya = getattr(x, attr), getattr(y, attr)
            if (xa is None) != (ya is None):
                return False
            if xa is not None and not _alpha_stmt(xa, ya, fwd, rev):
                return False
        if (x.cond is None) != (y.cond is None):
            return False
        if x.cond is not None and not _alpha_expr(x.cond, y.cond, fwd, rev):
            return False
        return _alpha_stmt(x.body, y.body, fwd, rev)
    if isinstance(x, n.Switch):
        if len(x.cases) != len(y.cases) or \
                not _alpha_expr(x.subject, y.subject, fwd, rev):
            return False
        for cx, cy in zip(x.cases, y.cases):
            if (cx.label is None) != (cy.label is None):
                return False
            if cx.label is not None and \
                    not _alpha_expr(cx.label, cy.label, fwd, rev):
                return False
            if not _alpha_stmts(cx.body, cy.body, fwd, rev):
                return False
        return True
    return False


def _alpha_expr(x, y, fwd, rev) -> bool:
    if type(x) is not type(y):
        return False
    if isinstance(x, n.VarRef):
        if x.name in fwd or y.name in rev:
            return fwd.get(x.name) == y.name and rev.get(y.name) == x.name
        # free names (residual globals, function references) match exactly
        return x.name == y.name
    if isinstance(x, (n.IntLit, n.FloatLit, n.BoolLit, n.StringLit)):
        return x == y
    if isinstance(x, n.TypeLit):
        return n.strip_annotations(x.type_expr) == \
            n.strip_annotations(y.type_expr)
    if isinstance(x, n.Unary):
        return x.op == y.op and _alpha_expr(x.operand, y.operand, fwd, rev)
    if isinstance(x, n.Incr):
        return x.op == y.op and _alpha_expr(x.target, y.target, fwd, rev)
    if isinstance(x, n.Binary):
        return x.op == y.op and _alpha_expr(x.lhs, y.lhs, fwd, rev) and \
            _alpha_expr(x.rhs, y.rhs, fwd, rev)
    if isinstance(x, n.Cond):
        return _alpha_expr(x.cond, y.cond, fwd, rev) and \
            _alpha_expr(x.then_expr, y.then_expr, fwd, rev) and \
            _alpha_expr(x.else_expr, y.else_expr, fwd, rev)
    if isinstance(x, n.Subscript):
        return _alpha_expr(x.base, y.base, fwd, rev) and \
            _alpha_expr(x.index, y.index, fwd, rev)
    if isinstance(x, n.Call):
        if x.callee != y.callee or x.at_count != y.at_count:
            return False
        if (x.static_args is None) != (y.static_args is None):
            return False
        if x.static_args is not None:
            if len(x.static_args) != len(y.static_args):
                return False
            if not all(_alpha_expr(a, b, fwd, rev)
                       for a, b in zip(x.static_args, y.static_args)):
                return False
        return len(x.args) == len(y.args) and \
            all(_alpha_expr(a, b, fwd, rev) for a, b in zip(x.args, y.args))
    return False
