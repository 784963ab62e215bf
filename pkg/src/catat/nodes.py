"""AST node definitions for Catat source programs.

Structural equality deliberately ignores source spans and checker-assigned
stages (``compare=False``), so two parses of the same text compare equal and
round-trip tests can use plain ``==``.

Annotation counts record the literal number of ``@`` characters lexed at
each position; 0 means unannotated.  Annotations are *relative*: a count of
k on a declaration in a scope whose default stage is s puts it at stage
s - k.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import Span


@dataclass
class Node:
    span: Span | None = field(default=None, compare=False, kw_only=True, repr=False)
    stage: int | None = field(default=None, compare=False, kw_only=True, repr=False)


# ---------------------------------------------------------------------------
# Type expressions

PRIM_TYPE_NAMES = ("int", "float", "char", "long int", "bool", "double",
                   "typename", "ASTree", "void")


@dataclass
class TypeExpr(Node):
    pass


@dataclass
class PrimType(TypeExpr):
    name: str = ""
    at_count: int = 0


@dataclass
class NamedType(TypeExpr):
    """Reference to a typename variable or a class name used as a type."""

    name: str = ""
    at_count: int = 0


@dataclass
class ClassAppType(TypeExpr):
    """``Name(args)`` or ``Name@(args)`` used as a type."""

    name: str = ""
    args: list = field(default_factory=list)
    ctime: bool = False  # True for the Name@(...) form
    at_count: int = 0


@dataclass
class PointerType(TypeExpr):
    base: TypeExpr = None


@dataclass
class ArrayType(TypeExpr):
    base: TypeExpr = None
    size: "Expr" = None


def annotation_count(t: TypeExpr) -> int:
    """Total ``@`` count attached to the base of a type expression."""
    while isinstance(t, (PointerType, ArrayType)):
        t = t.base
    if isinstance(t, (PrimType, NamedType, ClassAppType)):
        return t.at_count
    return 0


def is_typename_type(t: TypeExpr) -> bool:
    while isinstance(t, (PointerType, ArrayType)):
        t = t.base
    return isinstance(t, PrimType) and t.name == "typename"


# ---------------------------------------------------------------------------
# Expressions


@dataclass
class Expr(Node):
    pass


@dataclass
class IntLit(Expr):
    value: int = 0


@dataclass
class FloatLit(Expr):
    value: float = 0.0


@dataclass
class BoolLit(Expr):
    value: bool = False


@dataclass
class StringLit(Expr):
    value: str = ""


@dataclass
class TypeLit(Expr):
    """A type used as a first-class value (``return float;``, ``case int:``)."""

    type_expr: TypeExpr = None


@dataclass
class VarRef(Expr):
    name: str = ""


@dataclass
class Unary(Expr):
    op: str = ""  # "!" or "-"
    operand: Expr = None


@dataclass
class Incr(Expr):
    op: str = ""  # "++" or "--"
    target: Expr = None


@dataclass
class Binary(Expr):
    op: str = ""
    lhs: Expr = None
    rhs: Expr = None


@dataclass
class Cond(Expr):
    cond: Expr = None
    then_expr: Expr = None
    else_expr: Expr = None


@dataclass
class Subscript(Expr):
    base: Expr = None
    index: Expr = None


@dataclass
class Call(Expr):
    """Function invocation.

    Forms:
      * ``f(args)``        -> static_args is None, at_count 0
      * ``f@(args)``       -> static_args is None, at_count >= 1
      * ``f(s...)(d...)``  -> static_args holds the first list
    """

    callee: str = ""
    args: list = field(default_factory=list)
    static_args: list | None = None
    at_count: int = 0


# ---------------------------------------------------------------------------
# Statements


@dataclass
class Stmt(Node):
    pass


@dataclass
class Declarator(Node):
    name: str = ""
    array_size: Expr | None = None
    init: Expr | None = None


@dataclass
class VarDecl(Stmt):
    dtype: TypeExpr = None
    declarators: list = field(default_factory=list)
    static_kw: bool = False  # leading C++-style `static` on class members


@dataclass
class Assign(Stmt):
    target: Expr = None
    op: str = "="  # = += -= *= /= %=
    value: Expr = None


@dataclass
class ExprStmt(Stmt):
    expr: Expr = None


@dataclass
class Block(Stmt):
    stmts: list = field(default_factory=list)


@dataclass
class If(Stmt):
    cond: Expr = None
    then_stmt: Stmt = None
    else_stmt: Stmt | None = None
    at_count: int = 0
    else_at_count: int = 0


@dataclass
class For(Stmt):
    init: Stmt | None = None
    cond: Expr | None = None
    incr: Stmt | None = None
    body: Stmt = None
    at_count: int = 0


@dataclass
class SwitchCase(Node):
    label: Expr | None = None  # None for `default:`
    body: list = field(default_factory=list)


@dataclass
class Switch(Stmt):
    subject: Expr = None
    cases: list = field(default_factory=list)
    at_count: int = 0


@dataclass
class Return(Stmt):
    value: Expr | None = None


# ---------------------------------------------------------------------------
# Declarations


@dataclass
class Param(Node):
    name: str = ""
    dtype: TypeExpr = None

    @property
    def at_count(self) -> int:
        return annotation_count(self.dtype)


@dataclass
class FunctionDef(Node):
    """``function name(static...)(dynamic...) { ... }``

    ``static_params`` is None for single-list (stage-polymorphic)
    definitions.  ``declared_return`` is set only when the C-style
    ``type name(params)`` form was parsed (emitted residual programs).
    """

    name: str = ""
    static_params: list | None = None
    params: list = field(default_factory=list)
    body: Block = None
    declared_return: TypeExpr | None = None

    @property
    def static_arity(self) -> int:
        return len(self.static_params) if self.static_params is not None else 0

    @property
    def is_single_list(self) -> bool:
        return self.static_params is None


@dataclass
class VisibilityLabel(Node):
    name: str = ""  # "public" | "private"


@dataclass
class CtorDef(Node):
    at_count: int = 0  # >= 1 marks the compile-time constructor
    body: Block = None


@dataclass
class ClassDef(Node):
    """``class Name(static...) { items }``; items keep source order."""

    name: str = ""
    static_params: list = field(default_factory=list)
    items: list = field(default_factory=list)  # VisibilityLabel | VarDecl | CtorDef

    @property
    def static_arity(self) -> int:
        return len(self.static_params)

    def static_ctor(self) -> CtorDef | None:
        for it in self.items:
            if isinstance(it, CtorDef) and it.at_count >= 1:
                return it
        return None

    def dynamic_ctor(self) -> CtorDef | None:
        for it in self.items:
            if isinstance(it, CtorDef) and it.at_count == 0:
                return it
        return None

    def member_decls(self) -> list:
        return [it for it in self.items if isinstance(it, VarDecl)]


@dataclass
class Program(Node):
    """Top level: functions, classes, and ordinary statements in order."""

    items: list = field(default_factory=list)

    def functions(self) -> list:
        return [it for it in self.items if isinstance(it, FunctionDef)]

    def classes(self) -> list:
        return [it for it in self.items if isinstance(it, ClassDef)]

    def top_stmts(self) -> list:
        return [it for it in self.items if isinstance(it, Stmt)]


# ---------------------------------------------------------------------------
# Annotation erasure


def strip_annotations(node, merge_call_lists: bool = False):
    """Deep-copy a node with every ``@`` removed.

    ``merge_call_lists`` additionally folds two-list calls ``f(s)(d)`` into
    single-list calls ``f(s..., d...)`` (full stage erasure); without it the
    static argument list is preserved.
    """
    s = lambda x: strip_annotations(x, merge_call_lists)  # noqa: E731

    if node is None:
        return None
    if isinstance(node, PrimType):
        return PrimType(node.name, 0, span=node.span)
    if isinstance(node, NamedType):
        return NamedType(node.name, 0, span=node.span)
    if isinstance(node, ClassAppType):
        return ClassAppType(node.name, [s(a) for a in node.args], ctime=False,
                            span=node.span)
    if isinstance(node, PointerType):
        return PointerType(s(node.base), span=node.span)
    if isinstance(node, ArrayType):
        return ArrayType(s(node.base), s(node.size), span=node.span)
    if isinstance(node, (IntLit, FloatLit, BoolLit, StringLit, VarRef)):
        return type(node)(node.__dict__[
            "value" if not isinstance(node, VarRef) else "name"],
            span=node.span)
    if isinstance(node, TypeLit):
        return TypeLit(s(node.type_expr), span=node.span)
    if isinstance(node, Unary):
        return Unary(node.op, s(node.operand), span=node.span)
    if isinstance(node, Incr):
        return Incr(node.op, s(node.target), span=node.span)
    if isinstance(node, Binary):
        return Binary(node.op, s(node.lhs), s(node.rhs), span=node.span)
    if isinstance(node, Cond):
        return Cond(s(node.cond), s(node.then_expr), s(node.else_expr),
                    span=node.span)
    if isinstance(node, Subscript):
        return Subscript(s(node.base), s(node.index), span=node.span)
    if isinstance(node, Call):
        if node.static_args is not None and merge_call_lists:
            return Call(node.callee,
                        [s(a) for a in node.static_args] +
                        [s(a) for a in node.args], span=node.span)
        return Call(node.callee, [s(a) for a in node.args],
                    static_args=None if node.static_args is None
                    else [s(a) for a in node.static_args],
                    at_count=0, span=node.span)
    if isinstance(node, Declarator):
        return Declarator(node.name, s(node.array_size), s(node.init),
                          span=node.span)
    if isinstance(node, VarDecl):
        return VarDecl(s(node.dtype), [s(d) for d in node.declarators],
                       node.static_kw, span=node.span)
    if isinstance(node, Assign):
        return Assign(s(node.target), node.op, s(node.value), span=node.span)
    if isinstance(node, ExprStmt):
        return ExprStmt(s(node.expr), span=node.span)
    if isinstance(node, Block):
        return Block([s(x) for x in node.stmts], span=node.span)
    if isinstance(node, If):
        return If(s(node.cond), s(node.then_stmt), s(node.else_stmt), 0, 0,
                  span=node.span)
    if isinstance(node, For):
        return For(s(node.init), s(node.cond), s(node.incr), s(node.body), 0,
                   span=node.span)
    if isinstance(node, SwitchCase):
        return SwitchCase(s(node.label), [s(x) for x in node.body],
                          span=node.span)
    if isinstance(node, Switch):
        return Switch(s(node.subject), [s(c) for c in node.cases], 0,
                      span=node.span)
    if isinstance(node, Return):
        return Return(s(node.value), span=node.span)
    if isinstance(node, Param):
        return Param(node.name, s(node.dtype), span=node.span)
    raise TypeError(f"cannot strip {type(node).__name__}")
