"""Tokenizer for Catat source text.

Runs of consecutive ``@`` become a single at-sign-run token whose text
records the exact count.  ``//`` line comments and whitespace are skipped;
every other character must belong to a token.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import LexError, Span

KEYWORDS = frozenset({
    "function", "class", "return", "for", "if", "else", "switch", "case",
    "default", "int", "float", "char", "bool", "long", "double", "typename",
    "ASTree", "void", "const", "true", "false", "public", "private", "static",
})

# Longest match first.
PUNCTUATION = (
    "++", "--", "+=", "-=", "*=", "/=", "%=", "==", "!=", "<=", ">=",
    "&&", "||",
    "(", ")", "{", "}", "[", "]", ";", ",", ":", "?",
    "=", "<", ">", "+", "-", "*", "/", "%", "!",
)

IDENT = "identifier"
INT = "integer-literal"
FLOAT = "float-literal"
KEYWORD = "keyword"
PUNCT = "punctuation"
AT = "at-sign-run"
STRING = "string-literal"

INT64_MIN = -(2 ** 63)
INT64_MAX = 2 ** 63 - 1


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    col: int

    @property
    def span(self) -> Span:
        return Span(self.line, self.col)

    @property
    def at_count(self) -> int:
        return len(self.text) if self.kind == AT else 0


def tokenize(source: str) -> list[Token]:
    tokens: list[Token] = []
    i = 0
    line = 1
    col = 1
    n = len(source)

    def advance(k: int) -> None:
        nonlocal i, line, col
        for _ in range(k):
            if source[i] == "\n":
                line += 1
                col = 1
            else:
                col += 1
            i += 1

    while i < n:
        c = source[i]
        if c in " \t\r\n":
            advance(1)
            continue
        if c == "/" and i + 1 < n and source[i + 1] == "/":
            while i < n and source[i] != "\n":
                advance(1)
            continue
        start_line, start_col = line, col
        if c == "@":
            j = i
            while j < n and source[j] == "@":
                j += 1
            tokens.append(Token(AT, source[i:j], start_line, start_col))
            advance(j - i)
            continue
        if c == '"':
            j = i + 1
            buf = []
            while j < n and source[j] != '"':
                if source[j] == "\n":
                    raise LexError("unterminated string literal",
                                   Span(start_line, start_col))
                if source[j] == "\\" and j + 1 < n:
                    esc = source[j + 1]
                    buf.append({"n": "\n", "t": "\t", '"': '"', "\\": "\\"}
                               .get(esc, esc))
                    j += 2
                else:
                    buf.append(source[j])
                    j += 1
            if j >= n:
                raise LexError("unterminated string literal",
                               Span(start_line, start_col))
            tokens.append(Token(STRING, "".join(buf), start_line, start_col))
            advance(j + 1 - i)
            continue
        if c.isdigit():
            j = i
            while j < n and source[j].isdigit():
                j += 1
            is_float = False
            if j < n and source[j] == ".":
                if j + 1 >= n or not source[j + 1].isdigit():
                    raise LexError("malformed numeric literal",
                                   Span(start_line, start_col))
                is_float = True
                j += 1
                while j < n and source[j].isdigit():
                    j += 1
            if j < n and source[j] in "eE":
                k = j + 1
                if k < n and source[k] in "+-":
                    k += 1
                if k >= n or not source[k].isdigit():
                    raise LexError("malformed numeric literal",
                                   Span(start_line, start_col))
                is_float = True
                j = k
                while j < n and source[j].isdigit():
                    j += 1
            if j < n and (source[j].isalpha() or source[j] == "_"):
                raise LexError("malformed numeric literal",
                               Span(start_line, start_col))
            text = source[i:j]
            if not is_float and not (INT64_MIN <= int(text) <= INT64_MAX):
                raise LexError("integer literal out of 64-bit range",
                               Span(start_line, start_col))
            tokens.append(Token(FLOAT if is_float else INT, text,
                                start_line, start_col))
            advance(j - i)
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (source[j].isalnum() or source[j] == "_"):
                j += 1
            text = source[i:j]
            kind = KEYWORD if text in KEYWORDS else IDENT
            tokens.append(Token(kind, text, start_line, start_col))
            advance(j - i)
            continue
        for p in PUNCTUATION:
            if source.startswith(p, i):
                tokens.append(Token(PUNCT, p, start_line, start_col))
                advance(len(p))
                break
        else:
            raise LexError(f"illegal character {c!r}", Span(start_line, start_col))
    return tokens
