"""Verification harness: host-side value descriptions and a naive
pattern-matching oracle.

The oracle matches clause patterns top-down, first match wins, with no
graph compilation involved; equivalence suites compare it against the
decision-graph interpretation.  Descriptions live outside any runtime
heap so the suites run without the C components.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import matchc
from .errors import MeltMatchError
from .expander import (
    SCStringLit,
    SLongLit,
    SNil,
    SQuoteConst,
    SVar,
)

# --- value descriptions (identity semantics: default object identity) ---


@dataclass(eq=False)
class DBoxLong:
    num: int


@dataclass(eq=False)
class DBoxString:
    text: str


@dataclass(eq=False)
class DObj:
    cls: object  # ClassDef
    fields: list  # one slot per cls.all_fields()


@dataclass(eq=False)
class DTuple:
    items: list


@dataclass(eq=False)
class DClosure:
    tag: str = ""


@dataclass(eq=False)
class SStr:
    """Raw :cstring stuff; content equality is only used by matchers
    that ask for it (cstring_same), identity stays per-description."""

    text: str


# --- host IR descriptions (stuff; identity is description identity) ---


@dataclass(eq=False)
class HIdentifier:
    text: str
    ctext: object = None  # stable SStr, mirrors the single char* per node

    def __post_init__(self):
        if self.ctext is None:
            self.ctext = SStr(self.text)


@dataclass(eq=False)
class HIntegerCst:
    value: int


@dataclass(eq=False)
class HIntegerType:
    min_cst: object = None
    max_cst: object = None
    size_cst: object = None


@dataclass(eq=False)
class HArrayType:
    elem: object = None
    index_type: object = None


@dataclass(eq=False)
class HFieldDecl:
    name_node: object = None
    type_node: object = None
    next_field: object = None


@dataclass(eq=False)
class HRecordType:
    name_node: object = None
    first_field: object = None


@dataclass(eq=False)
class HVarDecl:
    name_node: object = None
    type_node: object = None


@dataclass(eq=False)
class HArrayRef:
    base: object = None
    index: object = None


@dataclass(eq=False)
class HComponentRef:
    base: object = None
    fld: object = None


@dataclass(eq=False)
class HAssign:
    lhs: object = None
    rhs: object = None


@dataclass(eq=False)
class HSeq:
    stmts: list = field(default_factory=list)


@dataclass(eq=False)
class HBB:
    index: int = 0
    seq: object = None


@dataclass(eq=False)
class HFun:
    name: str = ""
    decl: object = None
    locals: list = field(default_factory=list)
    bbs: list = field(default_factory=list)


def ident_eq(a, b) -> bool:
    """The C '==' on things: numeric equality for raw longs, pointer
    identity for everything else (nil is the null pointer)."""
    if a is None or b is None:
        return a is None and b is None
    if isinstance(a, int) and isinstance(b, int):
        return a == b
    return a is b


class AtomEval:
    """Evaluate atom expressions (literals and variables) to
    descriptions; quoted constants are pooled so repeated references
    stay identical."""

    def __init__(self, env=None):
        self.env = env or {}
        self._pool = {}

    def __call__(self, atom):
        if isinstance(atom, SLongLit):
            return atom.value
        if isinstance(atom, SCStringLit):
            return atom.value
        if isinstance(atom, SNil):
            return None
        if isinstance(atom, SQuoteConst):
            key = id(atom)
            if key not in self._pool:
                if atom.kind == "long":
                    self._pool[key] = DBoxLong(atom.value)
                elif atom.kind == "string":
                    self._pool[key] = DBoxString(atom.value)
                else:
                    self._pool[key] = DBoxString(str(atom.value))
            return self._pool[key]
        if isinstance(atom, SVar):
            if atom.name not in self.env:
                raise MeltMatchError(f"free variable {atom.name} in pattern expression")
            return self.env[atom.name]
        raise MeltMatchError(f"pattern expression is not an atom: {atom!r}")


@dataclass
class OracleResult:
    selected_clause: object  # int or None
    bindings: dict


def _match_pattern(pat, subject, bind, ev):
    if isinstance(pat, matchc.PWild):
        return True
    if isinstance(pat, matchc.PVar):
        if pat.name in bind:
            return ident_eq(bind[pat.name], subject)
        bind[pat.name] = subject
        return True
    if isinstance(pat, matchc.PConst):
        return ident_eq(ev(pat.expr), subject)
    if isinstance(pat, matchc.PMatcher):
        m = pat.matcher
        inputs = [ev(a) for a in pat.inputs]
        if getattr(m, "sem", None) is not None:  # fun-matcher
            outs = m.sem(subject, inputs)
            if outs is None:
                return False
        else:
            if m.sem_test is None:
                raise MeltMatchError(f"matcher {m.name} has no oracle semantics")
            if not m.sem_test(subject, inputs):
                return False
            outs = m.sem_fill(subject, inputs) if pat.subs else ()
        for sub, out in zip(pat.subs, outs):
            if not _match_pattern(sub, out, bind, ev):
                return False
        return True
    if isinstance(pat, matchc.PInstance):
        if not isinstance(subject, DObj) or not subject.cls.is_subclass_of(pat.cls):
            return False
        for fld, sub in pat.fields:
            if not _match_pattern(sub, subject.fields[fld.index], bind, ev):
                return False
        return True
    if isinstance(pat, matchc.PAnd):
        return all(_match_pattern(s, subject, bind, ev) for s in pat.subs)
    if isinstance(pat, matchc.POr):
        for s in pat.subs:
            trial = dict(bind)
            if _match_pattern(s, subject, trial, ev):
                bind.clear()
                bind.update(trial)
                return True
        return False
    raise MeltMatchError(f"unknown pattern {pat!r}")


def oracle_match(clauses, subject, env=None) -> OracleResult:
    """Naive reference matcher: clauses tried in sequence, each with
    freshly cleared pattern variables, first success wins."""
    ev = AtomEval(env)
    for i, pat in enumerate(clauses):
        bind = {}
        if _match_pattern(pat, subject, bind, ev):
            return OracleResult(i, bind)
    return OracleResult(None, {})
