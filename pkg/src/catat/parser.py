"""Recursive-descent parser for Catat.

Grammar notes:

* ``function name(static...)(dynamic...) block`` declares a two-level
  function; a single parameter list means all parameters are dynamic.
  Static parameters must carry at least one ``@``; dynamic parameters
  carry none.
* ``type name(params) block`` (C-style) is accepted so emitted residual
  programs are valid input again; the return type is stored on
  ``declared_return``.
* A statement starting with an identifier is disambiguated by a tentative
  parse: if a type followed by another identifier parses, it is a
  declaration (this makes ``T* p;`` a declaration, as in C once ``T`` is
  known to be a type), otherwise it is re-parsed as an expression
  statement.
* Statements are allowed at the top level alongside declarations; scripts
  are ordinary programs.
"""

from __future__ import annotations

from .errors import ParseError, Span
from .lexer import AT, FLOAT, IDENT, INT, KEYWORD, PUNCT, STRING, Token, tokenize
from . import nodes as n

_TYPE_KEYWORDS = ("int", "float", "char", "bool", "long", "double",
                  "typename", "ASTree", "void", "const")
_ASSIGN_OPS = ("=", "+=", "-=", "*=", "/=", "%=")


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.toks = tokens
        self.pos = 0

    # -- token plumbing -----------------------------------------------------

    def peek(self, k: int = 0) -> Token | None:
        i = self.pos + k
        return self.toks[i] if i < len(self.toks) else None

    def at_end(self) -> bool:
        return self.pos >= len(self.toks)

    def span(self) -> Span:
        t = self.peek()
        if t is not None:
            return t.span
        if self.toks:
            last = self.toks[-1]
            return Span(last.line, last.col + len(last.text))
        return Span(1, 1)

    def error(self, message: str) -> ParseError:
        t = self.peek()
        found = f"'{t.text}'" if t is not None else "end of input"
        return ParseError(f"{message}, found {found}", self.span())

    def advance(self) -> Token:
        if self.at_end():
            raise self.error("unexpected end of input")
        t = self.toks[self.pos]
        self.pos += 1
        return t

    def check(self, kind: str, text: str | None = None, k: int = 0) -> bool:
        t = self.peek(k)
        return t is not None and t.kind == kind and (text is None or t.text == text)

    def check_punct(self, text: str, k: int = 0) -> bool:
        return self.check(PUNCT, text, k)

    def check_kw(self, text: str, k: int = 0) -> bool:
        return self.check(KEYWORD, text, k)

    def expect_punct(self, text: str) -> Token:
        if not self.check_punct(text):
            raise self.error(f"expected '{text}'")
        return self.advance()

    def expect_kw(self, text: str) -> Token:
        if not self.check_kw(text):
            raise self.error(f"expected '{text}'")
        return self.advance()

    def expect_ident(self) -> Token:
        if not self.check(IDENT):
            raise self.error("expected identifier")
        return self.advance()

    def take_at(self) -> int:
        if self.check(AT):
            return self.advance().at_count
        return 0

    # -- program ------------------------------------------------------------

    def parse_program(self) -> n.Program:
        items = []
        seen: set = set()
        while not self.at_end():
            item = self.parse_top_item()
            if isinstance(item, n.FunctionDef):
                key = ("fn", item.name, item.static_arity)
                if key in seen:
                    raise ParseError(
                        f"redefinition of function '{item.name}' with "
                        f"{item.static_arity} static parameter(s)", item.span)
                seen.add(key)
            elif isinstance(item, n.ClassDef):
                key = ("class", item.name)
                if key in seen:
                    raise ParseError(f"redefinition of class '{item.name}'",
                                     item.span)
                seen.add(key)
            items.append(item)
        return n.Program(items)

    def parse_top_item(self):
        if self.check_kw("function"):
            return self.parse_function()
        if self.check_kw("class"):
            return self.parse_class()
        # C-style definition: type ident ( ... ) { ... }
        if self.peek() is not None and self.peek().kind == KEYWORD and \
                self.peek().text in _TYPE_KEYWORDS:
            mark = self.pos
            try:
                rtype = self.parse_type()
                if self.check(IDENT) and self.check_punct("(", 1):
                    name_tok = self.advance()
                    self.expect_punct("(")
                    params = self.parse_param_list()
                    body = self.parse_block()
                    self._check_params(None, params)
                    return n.FunctionDef(name_tok.text, None, params, body,
                                         declared_return=rtype,
                                         span=name_tok.span)
            except ParseError:
                pass
            self.pos = mark
        return self.parse_stmt()

    # -- declarations -------------------------------------------------------

    def parse_function(self) -> n.FunctionDef:
        kw = self.expect_kw("function")
        name = self.expect_ident().text
        self.expect_punct("(")
        first = self.parse_param_list()
        static_params = None
        params = first
        if self.check_punct("("):
            self.advance()
            static_params = first
            params = self.parse_param_list()
        body = self.parse_block()
        self._check_params(static_params, params)
        return n.FunctionDef(name, static_params, params, body, span=kw.span)

    def _check_params(self, static_params, params) -> None:
        if static_params is not None:
            for p in static_params:
                if p.at_count < 1:
                    raise ParseError(
                        f"static parameter '{p.name}' must be annotated with @",
                        p.span)
        for p in params:
            if p.at_count >= 1:
                raise ParseError(
                    f"dynamic parameter '{p.name}' may not carry @", p.span)

    def parse_param_list(self) -> list:
        params = []
        if not self.check_punct(")"):
            while True:
                params.append(self.parse_param())
                if self.check_punct(","):
                    self.advance()
                    continue
                break
        self.expect_punct(")")
        return params

    def parse_param(self) -> n.Param:
        start = self.span()
        dtype = self.parse_type()
        name = self.expect_ident()
        if self.check_punct("["):
            self.advance()
            size = self.parse_expr()
            self.expect_punct("]")
            dtype = n.ArrayType(dtype, size, span=start)
        return n.Param(name.text, dtype, span=name.span)

    def parse_class(self) -> n.ClassDef:
        kw = self.expect_kw("class")
        name = self.expect_ident().text
        static_params: list = []
        if self.check_punct("("):
            self.advance()
            static_params = self.parse_param_list()
            for p in static_params:
                if p.at_count < 1:
                    raise ParseError(
                        f"static parameter '{p.name}' must be annotated with @",
                        p.span)
        self.expect_punct("{")
        items = []
        n_static_ctor = n_dynamic_ctor = 0
        while not self.check_punct("}"):
            if self.at_end():
                raise self.error("expected '}' to close class body")
            if (self.check_kw("public") or self.check_kw("private")) and \
                    self.check_punct(":", 1):
                tok = self.advance()
                self.advance()
                items.append(n.VisibilityLabel(tok.text, span=tok.span))
                continue
            # Constructor: ClassName [@...] ( )
            if self.check(IDENT) and self.peek().text == name:
                after = 1
                at = 0
                if self.check(AT, k=1):
                    at = self.peek(1).at_count
                    after = 2
                if self.check_punct("(", after) and self.check_punct(")", after + 1):
                    tok = self.advance()
                    if at:
                        self.advance()
                    self.advance()
                    self.advance()
                    body = self.parse_block()
                    if at >= 1:
                        n_static_ctor += 1
                    else:
                        n_dynamic_ctor += 1
                    items.append(n.CtorDef(at, body, span=tok.span))
                    continue
            items.append(self.parse_var_decl())
        self.advance()
        if n_static_ctor > 1 or n_dynamic_ctor > 1:
            raise ParseError(
                f"class '{name}' may have at most one static and one "
                "dynamic constructor", kw.span)
        return n.ClassDef(name, static_params, items, span=kw.span)

    # -- types --------------------------------------------------------------

    def looks_like_type_start(self) -> bool:
        t = self.peek()
        if t is None:
            return False
        if t.kind == KEYWORD and t.text in _TYPE_KEYWORDS:
            return True
        return t.kind == KEYWORD and t.text == "static"

    def parse_type(self) -> n.TypeExpr:
        start = self.span()
        const_count = 0
        while self.check_kw("const"):
            self.advance()
            const_count += 1
        t = self.peek()
        if t is None:
            raise self.error("expected a type")
        if t.kind == KEYWORD and t.text in _TYPE_KEYWORDS:
            self.advance()
            name = t.text
            if name == "long":
                self.expect_kw("int")
                name = "long int"
            base: n.TypeExpr = n.PrimType(name, self.take_at() + const_count,
                                          span=start)
        elif t.kind == IDENT:
            self.advance()
            at = self.take_at()
            if self.check_punct("("):
                self.advance()
                args = []
                if not self.check_punct(")"):
                    while True:
                        args.append(self.parse_expr())
                        if self.check_punct(","):
                            self.advance()
                            continue
                        break
                self.expect_punct(")")
                base = n.ClassAppType(t.text, args, ctime=at >= 1, span=start)
            else:
                base = n.NamedType(t.text, at + const_count, span=start)
        else:
            raise self.error("expected a type")
        while self.check_punct("*"):
            self.advance()
            base = n.PointerType(base, span=start)
        return base

    # -- statements ---------------------------------------------------------

    def parse_block(self) -> n.Block:
        start = self.span()
        self.expect_punct("{")
        stmts = []
        while not self.check_punct("}"):
            if self.at_end():
                raise self.error("expected '}'")
            stmts.append(self.parse_stmt())
        self.advance()
        return n.Block(stmts, span=start)

    def parse_stmt(self) -> n.Stmt:
        if self.check_punct("{"):
            return self.parse_block()
        if self.check_kw("return"):
            tok = self.advance()
            value = None
            if not self.check_punct(";"):
                value = self.parse_expr()
            self.expect_punct(";")
            return n.Return(value, span=tok.span)
        if self.check_kw("if"):
            return self.parse_if()
        if self.check_kw("for"):
            return self.parse_for()
        if self.check_kw("switch"):
            return self.parse_switch()
        if self.looks_like_type_start():
            return self.parse_var_decl()
        if self.check(IDENT):
            mark = self.pos
            try:
                dtype = self.parse_type()
                if self.check(IDENT):
                    return self.finish_var_decl(dtype, static_kw=False,
                                                consume_semi=True)
            except ParseError:
                pass
            self.pos = mark
        return self.parse_simple_stmt(consume_semi=True)

    def parse_var_decl(self, consume_semi: bool = True) -> n.VarDecl:
        static_kw = False
        if self.check_kw("static"):
            self.advance()
            static_kw = True
        dtype = self.parse_type()
        return self.finish_var_decl(dtype, static_kw, consume_semi)

    def finish_var_decl(self, dtype: n.TypeExpr, static_kw: bool,
                        consume_semi: bool) -> n.VarDecl:
        declarators = []
        while True:
            name = self.expect_ident()
            size = None
            if self.check_punct("["):
                self.advance()
                size = self.parse_expr()
                self.expect_punct("]")
            init = None
            if self.check_punct("="):
                self.advance()
                init = self.parse_expr()
            declarators.append(n.Declarator(name.text, size, init,
                                            span=name.span))
            if self.check_punct(","):
                self.advance()
                continue
            break
        if consume_semi:
            self.expect_punct(";")
        return n.VarDecl(dtype, declarators, static_kw,
                         span=declarators[0].span)

    def parse_simple_stmt(self, consume_semi: bool) -> n.Stmt:
        start = self.span()
        expr = self.parse_expr()
        stmt: n.Stmt
        if self.peek() is not None and self.peek().kind == PUNCT and \
                self.peek().text in _ASSIGN_OPS:
            op = self.advance().text
            if not isinstance(expr, (n.VarRef, n.Subscript)):
                raise ParseError("invalid assignment target", start)
            value = self.parse_expr()
            stmt = n.Assign(expr, op, value, span=start)
        else:
            stmt = n.ExprStmt(expr, span=start)
        if consume_semi:
            self.expect_punct(";")
        return stmt

    def parse_for_clause(self) -> n.Stmt | None:
        """init/increment position: declaration, assignment, or expression."""
        if self.check_punct(";") or self.check_punct(")"):
            return None
        if self.looks_like_type_start():
            return self.parse_var_decl(consume_semi=False)
        if self.check(IDENT):
            mark = self.pos
            try:
                dtype = self.parse_type()
                if self.check(IDENT):
                    return self.finish_var_decl(dtype, static_kw=False,
                                                consume_semi=False)
            except ParseError:
                pass
            self.pos = mark
        return self.parse_simple_stmt(consume_semi=False)

    def parse_if(self) -> n.If:
        tok = self.expect_kw("if")
        at = self.take_at()
        self.expect_punct("(")
        cond = self.parse_expr()
        self.expect_punct(")")
        then_stmt = self.parse_stmt()
        else_stmt = None
        else_at = 0
        if self.check_kw("else"):
            self.advance()
            else_at = self.take_at()
            else_stmt = self.parse_stmt()
        return n.If(cond, then_stmt, else_stmt, at, else_at, span=tok.span)

    def parse_for(self) -> n.For:
        tok = self.expect_kw("for")
        at = self.take_at()
        self.expect_punct("(")
        init = self.parse_for_clause()
        self.expect_punct(";")
        cond = None
        if not self.check_punct(";"):
            cond = self.parse_expr()
        self.expect_punct(";")
        incr = self.parse_for_clause()
        self.expect_punct(")")
        body = self.parse_stmt()
        return n.For(init, cond, incr, body, at, span=tok.span)

    def parse_switch(self) -> n.Switch:
        tok = self.expect_kw("switch")
        at = self.take_at()
        self.expect_punct("(")
        subject = self.parse_expr()
        self.expect_punct(")")
        self.expect_punct("{")
        cases = []
        while not self.check_punct("}"):
            if self.check_kw("case"):
                ctok = self.advance()
                label = self.parse_case_label()
                self.expect_punct(":")
                cases.append(n.SwitchCase(label, self.parse_case_body(),
                                          span=ctok.span))
            elif self.check_kw("default"):
                ctok = self.advance()
                self.expect_punct(":")
                cases.append(n.SwitchCase(None, self.parse_case_body(),
                                          span=ctok.span))
            else:
                raise self.error("expected 'case' or 'default'")
        self.advance()
        return n.Switch(subject, cases, at, span=tok.span)

    def parse_case_label(self) -> n.Expr:
        t = self.peek()
        if t is not None and t.kind == KEYWORD and t.text in _TYPE_KEYWORDS \
                and t.text != "const":
            start = self.span()
            return n.TypeLit(self.parse_type(), span=start)
        return self.parse_expr()

    def parse_case_body(self) -> list:
        stmts = []
        while not (self.check_punct("}") or self.check_kw("case")
                   or self.check_kw("default")):
            if self.at_end():
                raise self.error("expected '}'")
            stmts.append(self.parse_stmt())
        return stmts

    # -- expressions ----------------------------------------------------------

    def parse_expr(self) -> n.Expr:
        return self.parse_conditional()

    def parse_conditional(self) -> n.Expr:
        cond = self.parse_logical_or()
        if self.check_punct("?"):
            start = self.span()
            self.advance()
            then_e = self.parse_expr()
            self.expect_punct(":")
            else_e = self.parse_conditional()
            return n.Cond(cond, then_e, else_e, span=start)
        return cond

    def _binary_left(self, ops: tuple, sub) -> n.Expr:
        lhs = sub()
        while self.peek() is not None and self.peek().kind == PUNCT and \
                self.peek().text in ops:
            op = self.advance()
            rhs = sub()
            lhs = n.Binary(op.text, lhs, rhs, span=op.span)
        return lhs

    def parse_logical_or(self) -> n.Expr:
        return self._binary_left(("||",), self.parse_logical_and)

    def parse_logical_and(self) -> n.Expr:
        return self._binary_left(("&&",), self.parse_equality)

    def parse_equality(self) -> n.Expr:
        return self._binary_left(("==", "!="), self.parse_relational)

    def parse_relational(self) -> n.Expr:
        return self._binary_left(("<", ">", "<=", ">="), self.parse_additive)

    def parse_additive(self) -> n.Expr:
        return self._binary_left(("+", "-"), self.parse_multiplicative)

    def parse_multiplicative(self) -> n.Expr:
        return self._binary_left(("*", "/", "%"), self.parse_unary)

    def parse_unary(self) -> n.Expr:
        t = self.peek()
        if t is not None and t.kind == PUNCT and t.text in ("!", "-"):
            self.advance()
            return n.Unary(t.text, self.parse_unary(), span=t.span)
        if t is not None and t.kind == PUNCT and t.text in ("++", "--"):
            self.advance()
            return n.Incr(t.text, self.parse_unary(), span=t.span)
        return self.parse_postfix()

    def parse_postfix(self) -> n.Expr:
        expr = self.parse_primary()
        while self.check_punct("["):
            start = self.span()
            self.advance()
            index = self.parse_expr()
            self.expect_punct("]")
            expr = n.Subscript(expr, index, span=start)
        return expr

    def parse_call_args(self) -> list:
        self.expect_punct("(")
        args = []
        if not self.check_punct(")"):
            while True:
                args.append(self.parse_expr())
                if self.check_punct(","):
                    self.advance()
                    continue
                break
        self.expect_punct(")")
        return args

    def parse_primary(self) -> n.Expr:
        t = self.peek()
        if t is None:
            raise self.error("expected an expression")
        if t.kind == INT:
            self.advance()
            return n.IntLit(int(t.text), span=t.span)
        if t.kind == FLOAT:
            self.advance()
            return n.FloatLit(float(t.text), span=t.span)
        if t.kind == STRING:
            self.advance()
            return n.StringLit(t.text, span=t.span)
        if t.kind == KEYWORD and t.text in ("true", "false"):
            self.advance()
            return n.BoolLit(t.text == "true", span=t.span)
        if t.kind == KEYWORD and t.text in _TYPE_KEYWORDS and t.text != "const":
            return n.TypeLit(self.parse_type(), span=t.span)
        if t.kind == PUNCT and t.text == "(":
            self.advance()
            expr = self.parse_expr()
            self.expect_punct(")")
            return expr
        if t.kind == IDENT:
            self.advance()
            at = 0
            if self.check(AT) and self.check_punct("(", 1):
                at = self.advance().at_count
            if self.check_punct("("):
                args = self.parse_call_args()
                if at == 0 and self.check_punct("("):
                    dyn_args = self.parse_call_args()
                    return n.Call(t.text, dyn_args, static_args=args,
                                  span=t.span)
                return n.Call(t.text, args, at_count=at, span=t.span)
            return n.VarRef(t.text, span=t.span)
        raise self.error("expected an expression")


def parse(source: str) -> n.Program:
    """Parse Catat source text into a Program AST."""
    return _Parser(tokenize(source)).parse_program()


def parse_expression(source: str) -> n.Expr:
    """Parse a single expression (testing and tooling convenience)."""
    p = _Parser(tokenize(source))
    expr = p.parse_expr()
    if not p.at_end():
        raise p.error("unexpected tokens after expression")
    return expr
