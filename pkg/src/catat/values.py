"""Runtime and compile-time values.

One value domain serves both stages: the compile-time interpreter, the
specializer, and the reference interpreter for residual programs all share
this arithmetic so specialization cannot change numeric results.

Integers are 64-bit signed with a hard overflow error (no silent wrap);
``/`` and ``%`` truncate toward zero; mixing an integer with a float
promotes to float.  Types are first-class values (`TypeValue`), structural
equality included.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

from .errors import (
    DivisionByZero, IntegerOverflow, Span, TypeMismatch, UnboundVariable,
)

INT64_MIN = -(2 ** 63)
INT64_MAX = 2 ** 63 - 1


class Value:
    pass


@dataclass(frozen=True)
class IntV(Value):
    value: int


@dataclass(frozen=True)
class FloatV(Value):
    value: float


@dataclass(frozen=True)
class BoolV(Value):
    value: bool


@dataclass(frozen=True)
class StrV(Value):
    """Internal string value: legal only as a ``Catat_error@`` message or a
    code-builder argument."""

    value: str


@dataclass(frozen=True)
class UnitV(Value):
    pass


UNIT = UnitV()


@dataclass
class ArrayV(Value):
    """Fixed-size array; cells are mutable, element type is fixed."""

    elem: "TypeValue"
    cells: list

    def __len__(self) -> int:
        return len(self.cells)


@dataclass
class InstanceV(Value):
    class_name: str
    members: dict


@dataclass
class CodeV(Value):
    """A residual-syntax fragment built by the flattener's AST builders."""

    frag: object


# ---------------------------------------------------------------------------
# Type values


class TypeValue(Value):
    """A type as a first-class (always static) value."""


@dataclass(frozen=True)
class PrimTV(TypeValue):
    name: str


@dataclass(frozen=True)
class PointerTV(TypeValue):
    elem: TypeValue


@dataclass(frozen=True)
class FixedArrayTV(TypeValue):
    elem: TypeValue
    size: int


@dataclass(frozen=True)
class ClassTV(TypeValue):
    """A class applied to static arguments (canonical key tuples)."""

    name: str
    args: tuple = ()


INT = PrimTV("int")
FLOAT = PrimTV("float")
CHAR = PrimTV("char")
LONG_INT = PrimTV("long int")
BOOL = PrimTV("bool")
DOUBLE = PrimTV("double")
TYPENAME = PrimTV("typename")
ASTREE = PrimTV("ASTree")
VOID = PrimTV("void")

PRIM_BY_NAME = {t.name: t for t in
                (INT, FLOAT, CHAR, LONG_INT, BOOL, DOUBLE, TYPENAME, ASTREE,
                 VOID)}

_INTEGER_CLASS = frozenset({"int", "char", "long int"})
_FLOAT_CLASS = frozenset({"float", "double"})


def is_integer_type(tv: TypeValue) -> bool:
    return isinstance(tv, PrimTV) and tv.name in _INTEGER_CLASS


def is_float_type(tv: TypeValue) -> bool:
    return isinstance(tv, PrimTV) and tv.name in _FLOAT_CLASS


def is_numeric_type(tv: TypeValue) -> bool:
    return is_integer_type(tv) or is_float_type(tv)


def render_type(tv: TypeValue) -> str:
    """Surface-syntax spelling of a concrete type value."""
    if isinstance(tv, PrimTV):
        return tv.name
    if isinstance(tv, PointerTV):
        return render_type(tv.elem) + "*"
    if isinstance(tv, FixedArrayTV):
        return f"{render_type(tv.elem)}[{tv.size}]"
    if isinstance(tv, ClassTV):
        return mangle_name(tv.name, tv.args)
    raise TypeError(f"unknown type value {tv!r}")


def promote(a: TypeValue, b: TypeValue) -> TypeValue | None:
    """Numeric unification: int-class mixes with float-class as float.

    Returns None when the two types cannot be unified."""
    if a == b:
        return a
    if is_integer_type(a) and is_integer_type(b):
        return LONG_INT if LONG_INT in (a, b) else INT
    if is_float_type(a) and is_float_type(b):
        return DOUBLE
    if is_integer_type(a) and is_float_type(b):
        return b
    if is_float_type(a) and is_integer_type(b):
        return a
    return None


def type_of_value(v: Value) -> TypeValue:
    if isinstance(v, TypeValue):
        return TYPENAME
    if isinstance(v, IntV):
        return INT
    if isinstance(v, FloatV):
        return FLOAT
    if isinstance(v, BoolV):
        return BOOL
    if isinstance(v, ArrayV):
        return PointerTV(v.elem)
    if isinstance(v, InstanceV):
        return ClassTV(v.class_name)
    if isinstance(v, CodeV):
        return ASTREE
    if isinstance(v, UnitV):
        return VOID
    raise TypeError(f"untypable value {v!r}")


# ---------------------------------------------------------------------------
# Canonical keys (hashable forms for memoization and mangling)


def canonical_key(v: Value, span: Span | None = None):
    if isinstance(v, TypeValue):
        return ("type", v)
    if isinstance(v, IntV):
        return ("int", v.value)
    if isinstance(v, FloatV):
        return ("float", v.value)
    if isinstance(v, BoolV):
        return ("bool", v.value)
    if isinstance(v, StrV):
        return ("str", v.value)
    if isinstance(v, UnitV):
        return ("unit",)
    if isinstance(v, ArrayV):
        return ("array", v.elem, tuple(canonical_key(c) for c in v.cells))
    if isinstance(v, InstanceV):
        return ("instance", v.class_name,
                tuple((k, canonical_key(x)) for k, x in v.members.items()))
    raise TypeMismatch(f"{describe(v)} cannot be used as a static argument",
                       span)


def render_static_arg(v: Value) -> str:
    """Source-like rendering used in provenance comments."""
    if isinstance(v, TypeValue):
        return render_type(v)
    if isinstance(v, IntV):
        return str(v.value)
    if isinstance(v, FloatV):
        return repr(v.value)
    if isinstance(v, BoolV):
        return "true" if v.value else "false"
    if isinstance(v, ArrayV):
        return "[" + ", ".join(render_static_arg(c) for c in v.cells) + "]"
    if isinstance(v, StrV):
        return f'"{v.value}"'
    if isinstance(v, InstanceV):
        inner = ", ".join(f"{k} = {render_static_arg(x)}"
                          for k, x in v.members.items())
        return f"{v.class_name}({inner})"
    return "?"


def _mangle_part(key) -> str:
    tag = key[0]
    if tag == "int":
        return str(key[1]) if key[1] >= 0 else "m" + str(-key[1])
    if tag == "float":
        return repr(key[1]).replace("-", "m").replace(".", "_") \
                           .replace("+", "")
    if tag == "bool":
        return "true" if key[1] else "false"
    if tag == "type":
        return render_type(key[1]).replace(" ", "_").replace("*", "p") \
                                  .replace("[", "x").replace("]", "")
    if tag == "array":
        digest = hashlib.sha256(repr(key).encode()).hexdigest()[:8]
        return f"a{len(key[2])}x{digest}"
    if tag == "str":
        digest = hashlib.sha256(key[1].encode()).hexdigest()[:8]
        return f"s{digest}"
    digest = hashlib.sha256(repr(key).encode()).hexdigest()[:8]
    return f"{tag}{digest}"


def mangle_name(base: str, canonical_args: tuple) -> str:
    """Deterministic residual name: base + "__" + rendered static args.

    An empty argument tuple leaves the base name unchanged.  Injectivity
    across distinct keys is finished off by the specialization cache, which
    appends a numeric suffix on collision."""
    if not canonical_args:
        return base
    return base + "__" + "_".join(_mangle_part(k) for k in canonical_args)


# ---------------------------------------------------------------------------
# Arithmetic (shared by all stages)


def _check_int(value: int, span: Span | None) -> IntV:
    if not (INT64_MIN <= value <= INT64_MAX):
        raise IntegerOverflow("integer result out of 64-bit range", span)
    return IntV(value)


def trunc_div(a: int, b: int) -> int:
    q = abs(a) // abs(b)
    return q if (a >= 0) == (b >= 0) else -q


def trunc_mod(a: int, b: int) -> int:
    return a - b * trunc_div(a, b)


def describe(v: Value) -> str:
    if isinstance(v, TypeValue):
        return f"type value '{render_type(v)}'"
    return {IntV: "an int", FloatV: "a float", BoolV: "a bool",
            StrV: "a string", ArrayV: "an array", InstanceV: "an instance",
            CodeV: "a code value", UnitV: "void"}.get(type(v), repr(v))


def _numeric_pair(op: str, a: Value, b: Value, span: Span | None):
    if isinstance(a, IntV) and isinstance(b, IntV):
        return a.value, b.value, True
    av = a.value if isinstance(a, (IntV, FloatV)) else None
    bv = b.value if isinstance(b, (IntV, FloatV)) else None
    if av is None or bv is None:
        raise TypeMismatch(
            f"operator '{op}' cannot combine {describe(a)} and {describe(b)}",
            span)
    return float(av), float(bv), False


def arith(op: str, a: Value, b: Value, span: Span | None = None) -> Value:
    """Apply a binary arithmetic or comparison operator."""
    if op in ("==", "!="):
        if isinstance(a, (IntV, FloatV)) and isinstance(b, (IntV, FloatV)):
            result = a.value == b.value
        elif type(a) is type(b) or (isinstance(a, TypeValue)
                                    and isinstance(b, TypeValue)):
            result = a == b
        else:
            raise TypeMismatch(
                f"cannot compare {describe(a)} with {describe(b)}", span)
        return BoolV(result if op == "==" else not result)
    if op in ("<", ">", "<=", ">="):
        av, bv, _ = _numeric_pair(op, a, b, span)
        return BoolV({"<": av < bv, ">": av > bv,
                      "<=": av <= bv, ">=": av >= bv}[op])
    av, bv, both_int = _numeric_pair(op, a, b, span)
    if op == "+":
        return _check_int(av + bv, span) if both_int else FloatV(av + bv)
    if op == "-":
        return _check_int(av - bv, span) if both_int else FloatV(av - bv)
    if op == "*":
        return _check_int(av * bv, span) if both_int else FloatV(av * bv)
    if op == "/":
        if bv == 0:
            raise DivisionByZero("division by zero", span)
        return _check_int(trunc_div(av, bv), span) if both_int \
            else FloatV(av / bv)
    if op == "%":
        if not both_int:
            raise TypeMismatch("'%' requires integer operands", span)
        if bv == 0:
            raise DivisionByZero("modulo by zero", span)
        return _check_int(trunc_mod(av, bv), span)
    raise TypeMismatch(f"unknown operator '{op}'", span)


def truth(v: Value, span: Span | None = None) -> bool:
    if isinstance(v, BoolV):
        return v.value
    raise TypeMismatch(f"condition must be a bool, got {describe(v)}", span)


def coerce(v: Value, tv: TypeValue | None, span: Span | None = None) -> Value:
    """Conform a value to a declared type (loud on narrowing)."""
    if tv is None:
        return v
    if isinstance(tv, PrimTV):
        if tv.name in _INTEGER_CLASS:
            if isinstance(v, IntV):
                return v
            raise TypeMismatch(
                f"cannot initialize {tv.name} from {describe(v)}", span)
        if tv.name in _FLOAT_CLASS:
            if isinstance(v, FloatV):
                return v
            if isinstance(v, IntV):
                return FloatV(float(v.value))
            raise TypeMismatch(
                f"cannot initialize {tv.name} from {describe(v)}", span)
        if tv.name == "bool":
            if isinstance(v, BoolV):
                return v
            raise TypeMismatch(
                f"cannot initialize bool from {describe(v)}", span)
        if tv.name == "typename":
            if isinstance(v, TypeValue):
                return v
            raise TypeMismatch(
                f"cannot initialize a typename variable from {describe(v)}",
                span)
        if tv.name == "ASTree":
            if isinstance(v, CodeV):
                return v
            raise TypeMismatch(
                f"cannot initialize ASTree from {describe(v)}", span)
        if tv.name == "void":
            return v
    if isinstance(tv, (PointerTV, FixedArrayTV)):
        if isinstance(v, ArrayV):
            if v.elem == tv.elem:
                return v
            if is_float_type(tv.elem) and is_integer_type(v.elem):
                return ArrayV(tv.elem,
                              [FloatV(float(c.value)) for c in v.cells])
            raise TypeMismatch(
                f"array element type {render_type(v.elem)} does not match "
                f"{render_type(tv.elem)}", span)
        raise TypeMismatch(f"cannot bind {describe(v)} to an array", span)
    if isinstance(tv, ClassTV):
        if isinstance(v, InstanceV):
            return v
        raise TypeMismatch(
            f"cannot initialize {render_type(tv)} from {describe(v)}", span)
    return v


def zero_value(tv: TypeValue, span: Span | None = None) -> Value:
    """Default value for an uninitialized declaration (deterministic)."""
    if isinstance(tv, PrimTV):
        if tv.name in _INTEGER_CLASS:
            return IntV(0)
        if tv.name in _FLOAT_CLASS:
            return FloatV(0.0)
        if tv.name == "bool":
            return BoolV(False)
    if isinstance(tv, FixedArrayTV):
        return ArrayV(tv.elem, [zero_value(tv.elem, span)
                                for _ in range(tv.size)])
    raise TypeMismatch(
        f"declaration of type {render_type(tv)} requires an initializer",
        span)


# ---------------------------------------------------------------------------
# Environments


@dataclass
class Slot:
    value: Value | None
    tv: TypeValue | None = None
    stage: int = 0


class Env:
    """Lexically scoped frames: name -> (mutable value slot, type, stage)."""

    def __init__(self, parent: "Env | None" = None):
        self.parent = parent
        self.slots: dict[str, Slot] = {}

    def child(self) -> "Env":
        return Env(self)

    def declare(self, name: str, slot: Slot,
                span: Span | None = None) -> Slot:
        if name in self.slots:
            raise TypeMismatch(f"redeclaration of '{name}' in the same scope",
                               span)
        self.slots[name] = slot
        return slot

    def find(self, name: str) -> Slot | None:
        env: Env | None = self
        while env is not None:
            if name in env.slots:
                return env.slots[name]
            env = env.parent
        return None

    def lookup(self, name: str, span: Span | None = None) -> Slot:
        slot = self.find(name)
        if slot is None:
            raise UnboundVariable(f"unbound variable '{name}'", span)
        return slot

    def bindings(self) -> list[tuple[str, Value | None]]:
        return [(name, slot.value) for name, slot in self.slots.items()]
