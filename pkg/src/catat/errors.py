"""Error types shared across the toolchain.

Every error that can be attributed to a source position carries a span;
the CLI renders diagnostics as ``file:line:col: <category>: <message>``
and maps error families onto process exit codes (see cli.py).
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Span:
    """1-indexed source position (start of the offending construct)."""

    line: int
    col: int


class CatatError(Exception):
    category = "error"
    exit_code = 1

    def __init__(self, message: str, span: Span | None = None):
        super().__init__(message)
        self.message = message
        self.span = span

    def render(self, filename: str = "<input>") -> str:
        span = self.span or Span(0, 0)
        return f"{filename}:{span.line}:{span.col}: {self.category}: {self.message}"


class LexError(CatatError):
    category = "lex error"
    exit_code = 1


class ParseError(CatatError):
    category = "parse error"
    exit_code = 1


# Well-stagedness rule violations.  The kind string names the rule that
# failed and is part of the diagnostic text.
DYNAMIC_TO_STATIC_FLOW = "DynamicToStaticFlow"
STATIC_MUTATION_UNDER_DYNAMIC_CONTROL = "StaticMutationUnderDynamicControl"
STATIC_CONTROL_WITH_DYNAMIC_GUARD = "StaticControlWithDynamicGuard"
ANNOTATION_TOO_DEEP = "AnnotationTooDeep"
TYPENAME_DYNAMIC_BINDING = "TypenameDynamicBinding"
DYNAMIC_IN_STATIC_CONSTRUCTOR = "DynamicInStaticConstructor"


class StageError(CatatError):
    category = "stage error"
    exit_code = 2

    def __init__(self, kind: str, message: str, span: Span | None = None):
        super().__init__(f"{kind}: {message}", span)
        self.kind = kind


class UnboundVariable(CatatError):
    category = "stage error"
    exit_code = 2


class EvalError(CatatError):
    """Failure while evaluating static constructs (exit 3 at compile time;

    the CLI reports the same families as runtime errors with exit 5 when
    they occur while running a single-level program)."""

    category = "compile-time error"
    exit_code = 3


class TypeMismatch(EvalError):
    pass


class DivisionByZero(EvalError):
    pass


class IntegerOverflow(EvalError):
    pass


class OutOfBounds(EvalError):
    pass


class LiftError(EvalError):
    pass


class ReturnTypeMismatch(EvalError):
    pass


class MalformedFragment(EvalError):
    pass


class FlattenUnsupported(EvalError):
    category = "flatten error"


class UserStaticError(EvalError):
    """Raised by ``Catat_error@``; message is exactly the program's text."""

    def __init__(self, message: str, span: Span | None = None):
        Exception.__init__(self, message)
        self.message = message
        self.span = span


class StageLeak(CatatError):
    """Internal assertion: a dynamic value reached a static position.

    Indicates a staging bug in the toolchain, not a user error."""

    category = "internal stage leak"
    exit_code = 3


class DepthExceeded(CatatError):
    category = "depth error"
    exit_code = 4


class SelfRecursiveSpecialization(DepthExceeded):
    pass


class LoopLimitExceeded(CatatError):
    category = "loop error"
    exit_code = 4


class StepLimitExceeded(CatatError):
    category = "runtime error"
    exit_code = 5
