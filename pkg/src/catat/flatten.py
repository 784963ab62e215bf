"""The flattening transform and the code-builder operation set.

Flattening rewrites a two-level function into a single-level *generator*:
static constructs are copied verbatim (annotations stripped), and each
dynamic construct is replaced by calls to builder functions that construct
its syntax tree.  Running the generator with concrete static arguments
yields a code value; ``materialize`` turns that code value into a residual
function indistinguishable from the specializer's output.

Builder suite: the five core constructors (make_lambda, make_varref,
make_vardecl, make_op, make_return) plus append/body for block plumbing,
and the extensions needed to cover every residual node kind: make_literal,
make_subscript, make_call, make_for, make_if, make_block, make_incr,
make_unary, make_ptr, make_arr.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import nodes as n
from .errors import (
    FlattenUnsupported, LiftError, MalformedFragment, Span, UserStaticError,
)
from .values import (
    ArrayV, BoolV, CodeV, FloatV, IntV, StrV, TypeValue, UNIT, Value,
    describe,
)

_ASSIGN_OPS = ("=", "+=", "-=", "*=", "/=", "%=")


# ---------------------------------------------------------------------------
# Fragments (the payload of CodeV)


@dataclass
class Frag:
    pass


@dataclass
class FragBlock(Frag):
    stmts: list = field(default_factory=list)


@dataclass
class FragFunc(Frag):
    params: list  # (name, TypeValue) pairs
    body: FragBlock


@dataclass
class FragVarRef(Frag):
    name: str


@dataclass
class FragLiteral(Frag):
    value: Value


@dataclass
class FragVarDecl(Frag):
    tv: TypeValue
    name: str
    init: object  # Frag | None


@dataclass
class FragOp(Frag):
    op: str
    lhs: Frag
    rhs: Frag


@dataclass
class FragUnary(Frag):
    op: str
    operand: Frag


@dataclass
class FragIncr(Frag):
    op: str
    target: Frag


@dataclass
class FragSubscript(Frag):
    base: Frag
    index: Frag


@dataclass
class FragReturn(Frag):
    value: Frag | None


@dataclass
class FragFor(Frag):
    init: Frag | None
    cond: Frag | None
    incr: Frag | None
    body: Frag


@dataclass
class FragIf(Frag):
    cond: Frag
    then_frag: Frag
    else_frag: Frag | None


@dataclass
class FragCall(Frag):
    callee: str
    static_args: list  # Values
    args: list  # Frags
    specializing: bool = False


# ---------------------------------------------------------------------------
# Builders (registered as compile-time builtins)


def _as_frag(v: Value, span: Span | None) -> Frag:
    if isinstance(v, CodeV):
        return v.frag
    if isinstance(v, (IntV, FloatV, BoolV)):
        return FragLiteral(v)
    raise MalformedFragment(
        f"{describe(v)} cannot appear in a code fragment", span)


def _need_str(v: Value, what: str, span: Span | None) -> str:
    if not isinstance(v, StrV):
        raise MalformedFragment(f"{what} must be a string, got {describe(v)}",
                                span)
    return v.value


def _need_type(v: Value, what: str, span: Span | None) -> TypeValue:
    if not isinstance(v, TypeValue):
        raise MalformedFragment(f"{what} must be a type value, got "
                                f"{describe(v)}", span)
    return v


def _need_count(args: list, lo: int, hi: int | None, name: str,
                span: Span | None) -> None:
    if len(args) < lo or (hi is not None and len(args) > hi):
        raise MalformedFragment(f"{name} called with {len(args)} argument(s)",
                                span)


def _b_make_lambda(args, span):
    if len(args) % 2 != 0:
        raise MalformedFragment(
            "make_lambda takes (name, type) pairs", span)
    params = []
    for i in range(0, len(args), 2):
        name = _need_str(args[i], "parameter name", span)
        tv = _need_type(args[i + 1], f"type of parameter '{name}'", span)
        params.append((name, tv))
    return CodeV(FragFunc(params, FragBlock([])))


def _b_body(args, span):
    _need_count(args, 1, 1, "body", span)
    v = args[0]
    if isinstance(v, CodeV) and isinstance(v.frag, FragFunc):
        return CodeV(v.frag.body)
    raise MalformedFragment("body expects a function shell", span)


def _b_append(args, span):
    _need_count(args, 2, 2, "append", span)
    block = args[0]
    if not (isinstance(block, CodeV) and isinstance(block.frag, FragBlock)):
        raise MalformedFragment("append target is not a block", span)
    stmt = args[1]
    if not isinstance(stmt, CodeV) or isinstance(stmt.frag, FragFunc):
        raise MalformedFragment("append expects a statement fragment", span)
    block.frag.stmts.append(stmt.frag)
    return UNIT


def _b_make_varref(args, span):
    _need_count(args, 1, 1, "make_varref", span)
    return CodeV(FragVarRef(_need_str(args[0], "variable name", span)))


def _b_make_literal(args, span):
    _need_count(args, 1, 1, "make_literal", span)
    v = args[0]
    if not isinstance(v, (IntV, FloatV, BoolV)):
        raise LiftError(f"{describe(v)} has no literal form", span)
    return CodeV(FragLiteral(v))


def _b_make_vardecl(args, span):
    _need_count(args, 2, 3, "make_vardecl", span)
    tv = _need_type(args[0], "declared type", span)
    name = _need_str(args[1], "declared name", span)
    init = _as_frag(args[2], span) if len(args) == 3 else None
    return CodeV(FragVarDecl(tv, name, init))


def _b_make_op(args, span):
    _need_count(args, 3, 3, "make_op", span)
    op = _need_str(args[0], "operator name", span)
    known = _ASSIGN_OPS + ("+", "-", "*", "/", "%", "==", "!=", "<", ">",
                           "<=", ">=", "&&", "||")
    if op not in known:
        raise MalformedFragment(f"unknown operator '{op}'", span)
    return CodeV(FragOp(op, _as_frag(args[1], span), _as_frag(args[2], span)))


def _b_make_unary(args, span):
    _need_count(args, 2, 2, "make_unary", span)
    op = _need_str(args[0], "operator name", span)
    if op not in ("!", "-"):
        raise MalformedFragment(f"unknown unary operator '{op}'", span)
    return CodeV(FragUnary(op, _as_frag(args[1], span)))


def _b_make_incr(args, span):
    _need_count(args, 2, 2, "make_incr", span)
    op = _need_str(args[0], "operator name", span)
    if op not in ("++", "--"):
        raise MalformedFragment(f"unknown step operator '{op}'", span)
    return CodeV(FragIncr(op, _as_frag(args[1], span)))


def _b_make_return(args, span):
    _need_count(args, 0, 1, "make_return", span)
    value = _as_frag(args[0], span) if args else None
    return CodeV(FragReturn(value))


def _b_make_subscript(args, span):
    _need_count(args, 2, 2, "make_subscript", span)
    return CodeV(FragSubscript(_as_frag(args[0], span),
                               _as_frag(args[1], span)))


def _b_make_for(args, span):
    _need_count(args, 4, 4, "make_for", span)
    parts = [None if isinstance(a, CodeV) and a.frag is None else a
             for a in args]
    init, cond, incr, body = parts
    return CodeV(FragFor(
        _as_frag(init, span) if init is not None else None,
        _as_frag(cond, span) if cond is not None else None,
        _as_frag(incr, span) if incr is not None else None,
        _as_frag(body, span)))


def _b_make_if(args, span):
    _need_count(args, 2, 3, "make_if", span)
    else_frag = _as_frag(args[2], span) if len(args) == 3 else None
    return CodeV(FragIf(_as_frag(args[0], span), _as_frag(args[1], span),
                        else_frag))


def _b_make_block(args, span):
    return CodeV(FragBlock([_as_frag(a, span) for a in args]))


def _b_make_call(args, span):
    _need_count(args, 2, None, "make_call", span)
    callee = _need_str(args[0], "callee name", span)
    if not isinstance(args[1], IntV) or args[1].value < 0:
        raise MalformedFragment(
            "make_call's second argument is the static argument count", span)
    nstatic = args[1].value
    if len(args) < 2 + nstatic:
        raise MalformedFragment("make_call is missing static arguments", span)
    statics = list(args[2:2 + nstatic])
    for v in statics:
        if isinstance(v, CodeV):
            raise MalformedFragment(
                "static arguments of make_call must be values", span)
    dyn = [_as_frag(a, span) for a in args[2 + nstatic:]]
    return CodeV(FragCall(callee, statics, dyn, specializing=nstatic > 0))


def _b_make_ptr(args, span):
    _need_count(args, 1, 1, "make_ptr", span)
    from .values import PointerTV
    return PointerTV(_need_type(args[0], "element type", span))


def _b_make_arr(args, span):
    _need_count(args, 2, 2, "make_arr", span)
    from .values import FixedArrayTV
    tv = _need_type(args[0], "element type", span)
    if not isinstance(args[1], IntV) or args[1].value < 0:
        raise MalformedFragment("array size must be a non-negative int", span)
    return FixedArrayTV(tv, args[1].value)


def _b_catat_error(args, span):
    _need_count(args, 1, 1, "Catat_error", span)
    msg = args[0]
    if not isinstance(msg, StrV):
        raise MalformedFragment("Catat_error expects a message string", span)
    raise UserStaticError(msg.value, span)


BUILDERS = {
    "make_lambda": _b_make_lambda,
    "body": _b_body,
    "append": _b_append,
    "make_varref": _b_make_varref,
    "make_literal": _b_make_literal,
    "make_vardecl": _b_make_vardecl,
    "make_op": _b_make_op,
    "make_unary": _b_make_unary,
    "make_incr": _b_make_incr,
    "make_return": _b_make_return,
    "make_subscript": _b_make_subscript,
    "make_for": _b_make_for,
    "make_if": _b_make_if,
    "make_block": _b_make_block,
    "make_call": _b_make_call,
    "make_ptr": _b_make_ptr,
    "make_arr": _b_make_arr,
    "Catat_error": _b_catat_error,
}

KNOWN_BUILTINS = frozenset(BUILDERS)


# ---------------------------------------------------------------------------
# The flattening transform


class _Flattener:
    def __init__(self, fn: n.FunctionDef, levels: int = 2):
        self.fn = fn
        self.default = levels - 1
        self.static_names = set()
        self.dynamic_names = set()
        self.used_names = set()
        self.ref_vars: dict[str, str] = {}
        if fn.static_params:
            for p in fn.static_params:
                self.static_names.add(p.name)
                self.used_names.add(p.name)
        for p in fn.params:
            self.dynamic_names.add(p.name)
            self.used_names.add(p.name)
        self._collect_names(fn.body)
        self.shell = self._fresh("func")

    def _collect_names(self, node) -> None:
        if isinstance(node, n.Block):
            for s in node.stmts:
                self._collect_names(s)
        elif isinstance(node, n.VarDecl):
            for d in node.declarators:
                self.used_names.add(d.name)
        elif isinstance(node, n.If):
            self._collect_names(node.then_stmt)
            if node.else_stmt is not None:
                self._collect_names(node.else_stmt)
        elif isinstance(node, n.For):
            if node.init is not None:
                self._collect_names(node.init)
            self._collect_names(node.body)
        elif isinstance(node, n.Switch):
            for case in node.cases:
                for s in case.body:
                    self._collect_names(s)

    def _fresh(self, base: str) -> str:
        name = base
        i = 1
        while name in self.used_names:
            i += 1
            name = f"{base}_{i}"
        self.used_names.add(name)
        return name

    # -- staticness ---------------------------------------------------------

    def is_static_expr(self, e: n.Expr) -> bool:
        if isinstance(e, (n.IntLit, n.FloatLit, n.BoolLit, n.StringLit,
                          n.TypeLit)):
            return True
        if isinstance(e, n.VarRef):
            if e.name in self.static_names:
                return True
            if e.name in self.dynamic_names:
                return False
            raise FlattenUnsupported(
                f"free variable '{e.name}' in flattened function", e.span)
        if isinstance(e, n.Unary):
            return self.is_static_expr(e.operand)
        if isinstance(e, n.Incr):
            return self.is_static_expr(e.target)
        if isinstance(e, n.Binary):
            return self.is_static_expr(e.lhs) and self.is_static_expr(e.rhs)
        if isinstance(e, n.Cond):
            return all(self.is_static_expr(x)
                       for x in (e.cond, e.then_expr, e.else_expr))
        if isinstance(e, n.Subscript):
            return self.is_static_expr(e.base) and \
                self.is_static_expr(e.index)
        if isinstance(e, n.Call):
            if e.callee in KNOWN_BUILTINS:
                return True
            if e.static_args is not None:
                return False
            return e.at_count >= self.default
        raise FlattenUnsupported(f"cannot flatten {type(e).__name__}", e.span)

    def decl_is_static(self, s: n.VarDecl) -> bool:
        if n.is_typename_type(s.dtype):
            return True
        if isinstance(s.dtype, n.ClassAppType):
            if s.dtype.ctime:
                return True
            raise FlattenUnsupported("class-typed declarations do not "
                                     "flatten", s.span)
        return n.annotation_count(s.dtype) >= self.default

    # -- generator construction ------------------------------------------------

    def flatten(self) -> n.FunctionDef:
        out: list[n.Stmt] = []
        lambda_args: list[n.Expr] = []
        for p in self.fn.params:
            lambda_args.append(n.StringLit(p.name))
            lambda_args.append(self.type_to_static_expr(p.dtype))
        out.append(n.VarDecl(
            n.PrimType("ASTree"),
            [n.Declarator(self.shell, None,
                          n.Call("make_lambda", lambda_args))]))
        for p in self.fn.params:
            ref = self._fresh(p.name) if p.name == self.shell else p.name
            self.ref_vars[p.name] = ref if ref != p.name else p.name
            out.append(n.VarDecl(
                n.PrimType("ASTree"),
                [n.Declarator(self.ref_vars[p.name], None,
                              n.Call("make_varref", [n.StringLit(p.name)]))]))
        target = n.Call("body", [n.VarRef(self.shell)])
        self.transform_region(self.fn.body.stmts, target, out, top=True)
        out.append(n.Return(n.VarRef(self.shell)))
        gen_params = []
        if self.fn.static_params:
            gen_params = [n.Param(p.name, n.strip_annotations(p.dtype))
                          for p in self.fn.static_params]
        return n.FunctionDef(self.fn.name + "_gen", None, gen_params,
                             n.Block(out), span=self.fn.span)

    def type_to_static_expr(self, t: n.TypeExpr) -> n.Expr:
        """A generator-time expression evaluating to the type value."""
        if isinstance(t, n.PrimType):
            return n.TypeLit(n.PrimType(t.name))
        if isinstance(t, n.NamedType):
            return n.VarRef(t.name)
        if isinstance(t, n.PointerType):
            return n.Call("make_ptr", [self.type_to_static_expr(t.base)])
        if isinstance(t, n.ArrayType):
            return n.Call("make_arr", [self.type_to_static_expr(t.base),
                                       n.strip_annotations(t.size)])
        raise FlattenUnsupported("class types do not flatten", t.span)

    def transform_region(self, stmts: list, target: n.Expr,
                         out: list, top: bool = False) -> None:
        for s in stmts:
            self.transform_stmt(s, target, out, top)

    def _append_stmt(self, target: n.Expr, frag_expr: n.Expr) -> n.Stmt:
        return n.ExprStmt(n.Call("append", [target, frag_expr]))

    def transform_stmt(self, s: n.Stmt, target: n.Expr, out: list,
                       top: bool) -> None:
        if isinstance(s, n.Block):
            self.transform_region(s.stmts, target, out)
            return
        if isinstance(s, n.VarDecl):
            if self.decl_is_static(s):
                for d in s.declarators:
                    self.static_names.add(d.name)
                out.append(n.strip_annotations(s))
                return
            for d in s.declarators:
                self.dynamic_names.add(d.name)
                dtype = s.dtype
                if d.array_size is not None:
                    dtype = n.ArrayType(dtype, d.array_size)
                args = [self.type_to_static_expr(dtype), n.StringLit(d.name)]
                if d.init is not None:
                    args.append(self.conv_expr(d.init))
                out.append(self._append_stmt(target,
                                             n.Call("make_vardecl", args)))
                if top:
                    ref = d.name if d.name not in (self.shell,) else \
                        self._fresh(d.name)
                    self.ref_vars[d.name] = ref
                    out.append(n.VarDecl(
                        n.PrimType("ASTree"),
                        [n.Declarator(ref, None,
                                      n.Call("make_varref",
                                             [n.StringLit(d.name)]))]))
            return
        if isinstance(s, n.Assign):
            target_static = self.is_static_expr(s.target)
            if target_static:
                out.append(n.strip_annotations(s))
                return
            frag = n.Call("make_op", [n.StringLit(s.op),
                                      self.conv_expr(s.target),
                                      self.conv_expr(s.value)])
            out.append(self._append_stmt(target, frag))
            return
        if isinstance(s, n.ExprStmt):
            if self.is_static_expr(s.expr):
                out.append(n.strip_annotations(s))
                return
            if isinstance(s.expr, n.Incr):
                frag = n.Call("make_incr", [n.StringLit(s.expr.op),
                                            self.conv_expr(s.expr.target)])
            else:
                frag = self.conv_expr(s.expr)
            out.append(self._append_stmt(target, frag))
            return
        if isinstance(s, n.Return):
            if s.value is None:
                frag = n.Call("make_return", [])
            else:
                frag = n.Call("make_return", [self.conv_expr(s.value)])
            out.append(self._append_stmt(target, frag))
            return
        if isinstance(s, n.If):
            if s.at_count >= self.default:
                branches = []
                for branch in (s.then_stmt, s.else_stmt):
                    if branch is None:
                        branches.append(None)
                        continue
                    inner: list = []
                    self.transform_stmt(branch, target, inner, top=False)
                    branches.append(self._as_block_or_single(inner))
                out.append(n.If(n.strip_annotations(s.cond), branches[0],
                                branches[1], 0, 0))
                return
            setup_then, then_frag = self.sub_to_frag(s.then_stmt, out)
            frag_args = [self.conv_expr(s.cond), then_frag]
            if s.else_stmt is not None:
                _, else_frag = self.sub_to_frag(s.else_stmt, out)
                frag_args.append(else_frag)
            out.append(self._append_stmt(target, n.Call("make_if", frag_args)))
            return
        if isinstance(s, n.For):
            if s.at_count >= self.default:
                if isinstance(s.init, n.VarDecl):
                    for d in s.init.declarators:
                        self.static_names.add(d.name)
                inner: list = []
                self.transform_stmt(s.body, target, inner, top=False)
                out.append(n.For(
                    n.strip_annotations(s.init) if s.init else None,
                    n.strip_annotations(s.cond) if s.cond else None,
                    n.strip_annotations(s.incr) if s.incr else None,
                    self._as_block_or_single(inner), 0))
                return
            init_frag = self.clause_to_frag(s.init)
            cond_frag = self.conv_expr(s.cond) if s.cond is not None \
                else n.Call("make_literal", [n.BoolLit(True)])
            incr_frag = self.clause_to_frag(s.incr)
            _, body_frag = self.sub_to_frag(s.body, out)
            out.append(self._append_stmt(
                target, n.Call("make_for",
                               [init_frag, cond_frag, incr_frag, body_frag])))
            return
        if isinstance(s, n.Switch):
            if s.at_count >= self.default:
                cases = []
                for case in s.cases:
                    inner = []
                    self.transform_region(case.body, target, inner)
                    cases.append(n.SwitchCase(
                        n.strip_annotations(case.label), inner))
                out.append(n.Switch(n.strip_annotations(s.subject), cases, 0))
                return
            raise FlattenUnsupported("dynamic switch does not flatten",
                                     s.span)
        raise FlattenUnsupported(f"cannot flatten {type(s).__name__}", s.span)

    def _as_block_or_single(self, stmts: list) -> n.Stmt:
        if len(stmts) == 1:
            return stmts[0]
        return n.Block(stmts)

    def clause_to_frag(self, clause: n.Stmt | None) -> n.Expr:
        if clause is None:
            return n.Call("make_block", [])
        if isinstance(clause, n.VarDecl):
            d = clause.declarators[0]
            args = [self.type_to_static_expr(clause.dtype),
                    n.StringLit(d.name)]
            self.dynamic_names.add(d.name)
            if d.init is not None:
                args.append(self.conv_expr(d.init))
            return n.Call("make_vardecl", args)
        if isinstance(clause, n.Assign):
            return n.Call("make_op", [n.StringLit(clause.op),
                                      self.conv_expr(clause.target),
                                      self.conv_expr(clause.value)])
        if isinstance(clause, n.ExprStmt) and isinstance(clause.expr, n.Incr):
            return n.Call("make_incr", [n.StringLit(clause.expr.op),
                                        self.conv_expr(clause.expr.target)])
        if isinstance(clause, n.ExprStmt):
            return self.conv_expr(clause.expr)
        raise FlattenUnsupported("unsupported loop clause", clause.span)

    def sub_to_frag(self, s: n.Stmt, out: list) -> tuple[None, n.Expr]:
        """Convert a dynamic control-construct body to a block fragment.

        Complex bodies are built imperatively through a temporary block
        variable emitted into ``out``."""
        simple = self._simple_frag(s)
        if simple is not None:
            return None, simple
        tmp = self._fresh("blk")
        out.append(n.VarDecl(n.PrimType("ASTree"),
                             [n.Declarator(tmp, None,
                                           n.Call("make_block", []))]))
        stmts = s.stmts if isinstance(s, n.Block) else [s]
        self.transform_region(stmts, n.VarRef(tmp), out)
        return None, n.VarRef(tmp)

    def _simple_frag(self, s: n.Stmt) -> n.Expr | None:
        if isinstance(s, n.Assign) and not self.is_static_expr(s.target):
            return n.Call("make_op", [n.StringLit(s.op),
                                      self.conv_expr(s.target),
                                      self.conv_expr(s.value)])
        if isinstance(s, n.ExprStmt) and not self.is_static_expr(s.expr):
            if isinstance(s.expr, n.Incr):
                return n.Call("make_incr", [n.StringLit(s.expr.op),
                                            self.conv_expr(s.expr.target)])
            return self.conv_expr(s.expr)
        if isinstance(s, n.Return):
            if s.value is None:
                return n.Call("make_return", [])
            return n.Call("make_return", [self.conv_expr(s.value)])
        return None

    # -- expressions -> builder expressions ------------------------------------

    def conv_expr(self, e: n.Expr) -> n.Expr:
        """Generator expression whose value is the fragment for ``e``.

        Static subexpressions are evaluated at generator run time (builders
        lift raw values to literal fragments)."""
        if self.is_static_expr(e):
            return n.strip_annotations(e)
        if isinstance(e, n.VarRef):
            if e.name in self.ref_vars:
                return n.VarRef(self.ref_vars[e.name])
            return n.Call("make_varref", [n.StringLit(e.name)])
        if isinstance(e, n.Binary):
            return n.Call("make_op", [n.StringLit(e.op),
                                      self.conv_expr(e.lhs),
                                      self.conv_expr(e.rhs)])
        if isinstance(e, n.Unary):
            return n.Call("make_unary", [n.StringLit(e.op),
                                         self.conv_expr(e.operand)])
        if isinstance(e, n.Incr):
            return n.Call("make_incr", [n.StringLit(e.op),
                                        self.conv_expr(e.target)])
        if isinstance(e, n.Subscript):
            return n.Call("make_subscript", [self.conv_expr(e.base),
                                             self.conv_expr(e.index)])
        if isinstance(e, n.Call):
            if e.static_args is not None:
                args = [n.StringLit(e.callee),
                        n.IntLit(len(e.static_args))]
                args.extend(n.strip_annotations(a) for a in e.static_args)
                args.extend(self.conv_expr(a) for a in e.args)
                return n.Call("make_call", args)
            args = [n.StringLit(e.callee), n.IntLit(0)]
            args.extend(self.conv_expr(a) for a in e.args)
            return n.Call("make_call", args)
        raise FlattenUnsupported(
            f"cannot flatten dynamic {type(e).__name__}", e.span)


def flatten_function(fn: n.FunctionDef, levels: int = 2) -> n.FunctionDef:
    """Rewrite a two-level function into its single-level generator."""
    return _Flattener(fn, levels).flatten()


# ---------------------------------------------------------------------------
# Materialization: code value -> residual function


def _frag_to_expr(f: Frag, resolve):
    from .specializer import lift

    if isinstance(f, FragVarRef):
        return n.VarRef(f.name)
    if isinstance(f, FragLiteral):
        return lift(f.value)
    if isinstance(f, FragOp):
        if f.op in _ASSIGN_OPS:
            raise MalformedFragment(
                f"assignment '{f.op}' used in expression position")
        return n.Binary(f.op, _frag_to_expr(f.lhs, resolve),
                        _frag_to_expr(f.rhs, resolve))
    if isinstance(f, FragUnary):
        return n.Unary(f.op, _frag_to_expr(f.operand, resolve))
    if isinstance(f, FragIncr):
        return n.Incr(f.op, _frag_to_expr(f.target, resolve))
    if isinstance(f, FragSubscript):
        return n.Subscript(_frag_to_expr(f.base, resolve),
                           _frag_to_expr(f.index, resolve))
    if isinstance(f, FragCall):
        name = resolve(f.callee, f.static_args)
        return n.Call(name, [_frag_to_expr(a, resolve) for a in f.args])
    raise MalformedFragment(
        f"{type(f).__name__} is not an expression fragment")


def _frag_to_stmt(f: Frag, resolve) -> n.Stmt:
    from .specializer import lift, type_value_to_decl

    if isinstance(f, FragVarDecl):
        dtype, size = type_value_to_decl(f.tv)
        init = _frag_to_expr(f.init, resolve) if f.init is not None else None
        return n.VarDecl(dtype, [n.Declarator(f.name, size, init)])
    if isinstance(f, FragOp) and f.op in _ASSIGN_OPS:
        target = _frag_to_expr(f.lhs, resolve)
        if not isinstance(target, (n.VarRef, n.Subscript)):
            raise MalformedFragment("invalid assignment target fragment")
        return n.Assign(target, f.op, _frag_to_expr(f.rhs, resolve))
    if isinstance(f, FragReturn):
        value = _frag_to_expr(f.value, resolve) if f.value is not None \
            else None
        return n.Return(value)
    if isinstance(f, FragFor):
        init = _frag_to_stmt(f.init, resolve) if f.init is not None else None
        cond = _frag_to_expr(f.cond, resolve) if f.cond is not None else None
        incr = _frag_to_stmt(f.incr, resolve) if f.incr is not None else None
        return n.For(init, cond, incr, _frag_to_stmt(f.body, resolve), 0)
    if isinstance(f, FragIf):
        else_stmt = _frag_to_stmt(f.else_frag, resolve) \
            if f.else_frag is not None else None
        return n.If(_frag_to_expr(f.cond, resolve),
                    _frag_to_stmt(f.then_frag, resolve), else_stmt, 0, 0)
    if isinstance(f, FragBlock):
        return n.Block([_frag_to_stmt(x, resolve) for x in f.stmts])
    if isinstance(f, FragIncr):
        return n.ExprStmt(_frag_to_expr(f, resolve))
    if isinstance(f, FragCall):
        return n.ExprStmt(_frag_to_expr(f, resolve))
    raise MalformedFragment(f"{type(f).__name__} is not a statement fragment")


def materialize(code: CodeV, name: str, static_args: list | None = None,
                cache=None):
    """Turn a completed function shell into a ResidualFunction.

    With a SpecializationCache the result is registered (memoized, ordered
    after its callees) exactly like a directly specialized function, and
    fragment calls may trigger nested specialization."""
    from . import specializer as spec

    if not isinstance(code, CodeV) or not isinstance(code.frag, FragFunc):
        raise MalformedFragment("materialize expects a function shell")
    static_args = list(static_args or [])

    def resolve(callee: str, statics: list) -> str:
        if cache is None:
            if statics:
                raise FlattenUnsupported(
                    "nested specializing calls need a specialization cache")
            return callee
        defn = cache.staged.functions_by_key().get((callee, len(statics)))
        if defn is None:
            raise MalformedFragment(
                f"no definition of '{callee}' with {len(statics)} static "
                "argument(s)")
        return spec.specialize_function(defn, statics, cache).name

    frag: FragFunc = code.frag
    if cache is not None:
        key = spec.SpecializationKey.for_function(name, static_args)
        cached = cache.lookup(key)
        if cached is not None:
            return cached
        residual_name = cache.reserve(key, name)
    else:
        key = spec.SpecializationKey.for_function(name, static_args)
        residual_name = spec.mangle(name, key)
    body = [_frag_to_stmt(f, resolve) for f in frag.body.stmts]
    params = list(frag.params)
    rtype = spec.infer_return_type(
        body, dict(params),
        (cache.return_type_of if cache is not None else None))
    residual = spec.ResidualFunction(
        residual_name, rtype, params, body, key,
        comment=spec.key_comment(key, static_args))
    if cache is not None:
        cache.complete(key, residual)
    return residual


def specialize_via_flatten(fn: n.FunctionDef, static_args: list, cache):
    """The generator pipeline: flatten, run the generator on the static
    arguments, materialize the resulting code value."""
    from . import specializer as spec
    key = spec.SpecializationKey.for_function(fn.name, static_args)
    key_hit = cache.lookup(key)
    if key_hit is not None:
        return key_hit
    generator = flatten_function(fn, cache.staged.levels)
    code = cache.interp.call_function(generator, list(static_args), fn.span)
    if not isinstance(code, CodeV):
        raise MalformedFragment(
            f"generator for '{fn.name}' did not produce a code value",
            fn.span)
    return materialize(code, fn.name, static_args, cache)
