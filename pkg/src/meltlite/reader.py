"""Reader: DSL source text to located s-expressions.

Follows the usual Lisp lexical conventions (parenthesized forms,
``;`` comments, case-insensitive symbols, ``:keywords``) plus the
``#{ ... }#`` macro-string literal whose body mixes verbatim target
text with ``$symbol`` references.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field

from .errors import MeltReadError

# Symbol constituents: ASCII alphanumerics and a conservative set of
# punctuation found in operator names like +i, ==i, %iraw, each_in_*.
SYMBOL_PUNCT = "_+-*/<>=!?%."
LONG_MIN = -(2**63)
LONG_MAX = 2**63 - 1


def is_symbol_char(c: str) -> bool:
    return c.isascii() and (c.isalnum() or c in SYMBOL_PUNCT)


def is_symbol_start(c: str) -> bool:
    return is_symbol_char(c) and not c.isdigit()


def intern_symbol(name: str) -> str:
    """Case-insensitive interning: the lowercased, interned spelling is
    the symbol id. Insert-once by construction, so concurrent readers
    always agree on ids."""
    return sys.intern(name.lower())


@dataclass(frozen=True)
class Location:
    file: str
    line: int  # 1-based
    col: int  # 0-based

    def __post_init__(self):
        assert self.line >= 1 and self.col >= 0 and self.file

    def __str__(self):
        return f"{self.file}:{self.line}:{self.col}"


# --- s-expression nodes ---


@dataclass(frozen=True)
class SSymbol:
    loc: Location
    name: str  # interned, canonical (lowercase)


@dataclass(frozen=True)
class SKeyword:
    loc: Location
    name: str  # without the leading colon, canonical


@dataclass(frozen=True)
class SLong:
    loc: Location
    value: int


@dataclass(frozen=True)
class SString:
    loc: Location
    value: str


@dataclass(frozen=True)
class MsText:
    text: str


@dataclass(frozen=True)
class MsRef:
    name: str  # interned symbol id
    spelling: str  # as written after the $, for round-trips and mangling


@dataclass(frozen=True)
class SMacroString:
    loc: Location
    chunks: tuple


@dataclass(frozen=True)
class SList:
    loc: Location
    items: tuple

    def __len__(self):
        return len(self.items)

    def __getitem__(self, i):
        return self.items[i]


SExpr = object  # any of the node classes above

QUOTE_SUGAR = {"'": "quote", "`": "backquote", ",": "comma", "?": "question"}

_STRING_ESCAPES = {
    "n": "\n",
    "t": "\t",
    "r": "\r",
    "f": "\f",
    "v": "\v",
    "a": "\a",
    "b": "\b",
    "0": "\0",
    "\\": "\\",
    '"': '"',
    "'": "'",
}


class _Scanner:
    def __init__(self, source: str, origin: str):
        self.src = source
        self.origin = origin
        self.pos = 0
        self.line = 1
        self.col = 0

    def loc(self) -> Location:
        return Location(self.origin, self.line, self.col)

    def eof(self) -> bool:
        return self.pos >= len(self.src)

    def peek(self, ahead=0):
        p = self.pos + ahead
        return self.src[p] if p < len(self.src) else ""

    def advance(self) -> str:
        c = self.src[self.pos]
        self.pos += 1
        if c == "\n":
            self.line += 1
            self.col = 0
        else:
            self.col += 1
        return c

    def error(self, message, loc=None):
        raise MeltReadError(message, loc or self.loc())

    # -- token level --

    def skip_blanks(self):
        while not self.eof():
            c = self.peek()
            if c == ";":
                while not self.eof() and self.peek() != "\n":
                    self.advance()
            elif c in " \t\r\n\f":
                self.advance()
            else:
                return

    def read_expr(self):
        self.skip_blanks()
        if self.eof():
            return None
        loc = self.loc()
        c = self.peek()
        if c == "(":
            return self.read_list(loc)
        if c == ")":
            self.error("stray ')'", loc)
        if c in QUOTE_SUGAR:
            self.advance()
            inner = self.read_expr()
            if inner is None:
                self.error(f"end of input after '{c}'", loc)
            head = SSymbol(loc, intern_symbol(QUOTE_SUGAR[c]))
            return SList(loc, (head, inner))
        if c == '"':
            return self.read_string(loc)
        if c == "#":
            if self.peek(1) == "{":
                return self.read_macrostring_literal(loc)
            self.error("unexpected '#'", loc)
        if c == ":":
            return self.read_keyword(loc)
        if is_symbol_char(c):
            return self.read_atom(loc)
        self.error(f"unexpected character {c!r}", loc)

    def read_list(self, loc: Location):
        self.advance()  # (
        items = []
        while True:
            self.skip_blanks()
            if self.eof():
                self.error("unterminated list", loc)
            if self.peek() == ")":
                self.advance()
                return SList(loc, tuple(items))
            items.append(self.read_expr())

    def read_token(self) -> str:
        chars = []
        while not self.eof() and is_symbol_char(self.peek()):
            chars.append(self.advance())
        return "".join(chars)

    def read_atom(self, loc: Location):
        token = self.read_token()
        body = token[1:] if token[0] in "+-" else token
        if body and body.isdigit():
            value = int(token)
            if not LONG_MIN <= value <= LONG_MAX:
                self.error(f"integer literal {token} overflows 64-bit long", loc)
            return SLong(loc, value)
        if token[0].isdigit():
            self.error(f"token {token!r} starts with a digit but is not an integer", loc)
        return SSymbol(loc, intern_symbol(token))

    def read_keyword(self, loc: Location):
        self.advance()  # :
        if self.eof() or not is_symbol_start(self.peek()):
            self.error("':' not followed by a keyword name", loc)
        return SKeyword(loc, intern_symbol(self.read_token()))

    def read_string(self, loc: Location):
        self.advance()  # "
        chars = []
        while True:
            if self.eof():
                self.error("unterminated string", loc)
            c = self.advance()
            if c == '"':
                return SString(loc, "".join(chars))
            if c == "\\":
                if self.eof():
                    self.error("unterminated string", loc)
                at = self.loc()
                esc = self.advance()
                if esc not in _STRING_ESCAPES:
                    self.error(f"unknown string escape '\\{esc}'", at)
                chars.append(_STRING_ESCAPES[esc])
            else:
                chars.append(c)

    def read_macrostring_literal(self, loc: Location):
        self.advance()  # #
        self.advance()  # {
        body_loc = self.loc()
        start = self.pos
        while True:
            if self.eof():
                self.error("unterminated macro-string", loc)
            if self.peek() == "}" and self.peek(1) == "#":
                raw = self.src[start : self.pos]
                self.advance()
                self.advance()
                return SMacroString(loc, read_macrostring(raw, body_loc))
            self.advance()


def is_ref_char(c: str) -> bool:
    # '.' stays out of reference names so prose like "of $i." keeps the
    # final dot as text; symbols read from source may still contain it.
    return is_symbol_char(c) and c != "."


def read_macrostring(raw: str, at: Location) -> tuple:
    """Lex a macro-string body into Text/Ref chunks.

    ``$name`` becomes a Ref; a ``#`` directly after the name terminates
    it and is consumed; ``$$`` is a literal dollar; everything else
    (backslashes, quotes, newlines) is verbatim text.
    """
    chunks = []
    text = []
    line, col = at.line, at.col

    def here():
        return Location(at.file, line, col)

    def step(c):
        nonlocal line, col
        if c == "\n":
            line += 1
            col = 0
        else:
            col += 1

    def flush():
        if text:
            chunks.append(MsText("".join(text)))
            del text[:]

    i = 0
    n = len(raw)
    while i < n:
        c = raw[i]
        if c != "$":
            text.append(c)
            step(c)
            i += 1
            continue
        dollar_loc = here()
        step(c)
        i += 1
        if i < n and raw[i] == "$":
            text.append("$")
            step("$")
            i += 1
            continue
        if i >= n or not is_ref_char(raw[i]) or raw[i].isdigit():
            found = repr(raw[i]) if i < n else "end of macro-string"
            raise MeltReadError(f"'$' followed by {found}, expected a symbol", dollar_loc)
        j = i
        while j < n and is_ref_char(raw[j]):
            j += 1
        spelling = raw[i:j]
        if spelling == "_":
            raise MeltReadError("'$_' is not a valid macro-string reference", dollar_loc)
        for k in range(i, j):
            step(raw[k])
        i = j
        if i < n and raw[i] == "#":  # name terminator, consumed
            step("#")
            i += 1
        flush()
        chunks.append(MsRef(intern_symbol(spelling), spelling))
    flush()
    return tuple(chunks)


def emit_macrostring(chunks) -> str:
    """Inverse of read_macrostring: Text verbatim ($ escaped), Ref as $NAME,
    with a '#' terminator inserted where the following text would otherwise
    extend the reference name."""
    out = []
    for ix, ch in enumerate(chunks):
        if isinstance(ch, MsText):
            out.append(ch.text.replace("$", "$$"))
        else:
            out.append("$" + ch.spelling)
            nxt = chunks[ix + 1] if ix + 1 < len(chunks) else None
            if isinstance(nxt, MsText) and nxt.text and (
                is_symbol_char(nxt.text[0]) or nxt.text[0] == "#"
            ):
                out.append("#")
    return "".join(out)


def read_unit(source: str, origin: str) -> list:
    """Read all top-level s-expressions of one source unit."""
    sc = _Scanner(source, origin)
    exprs = []
    while True:
        e = sc.read_expr()
        if e is None:
            return exprs
        exprs.append(e)


def sexpr_to_text(e) -> str:
    """Printable rendering, mainly for diagnostics and tests."""
    if isinstance(e, SSymbol):
        return e.name
    if isinstance(e, SKeyword):
        return ":" + e.name
    if isinstance(e, SLong):
        return str(e.value)
    if isinstance(e, SString):
        return '"' + e.value.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(e, SMacroString):
        return "#{" + emit_macrostring(e.chunks) + "}#"
    if isinstance(e, SList):
        return "(" + " ".join(sexpr_to_text(x) for x in e.items) + ")"
    return repr(e)
