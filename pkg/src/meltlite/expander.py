"""Macro-expansion: s-expressions to abstract syntax, environments, bindings.

One namespace (Lisp1): resolving a name yields a single Binding whose
kind decides how an application form is expanded (special form, macro,
primitive, c-iterator, selector send, plain apply).  Definition and
export forms are only legal at the top level of a module.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import matchc
from .errors import MeltExpandError
from .reader import (
    SKeyword,
    SList,
    SLong,
    SMacroString,
    SString,
    SSymbol,
    intern_symbol,
    sexpr_to_text,
)

# --- c-types ---


@dataclass(frozen=True)
class CType:
    """Descriptor of a thing kind: how it is declared, cleared, passed
    and tested in the generated target code."""

    name: str
    is_value: bool
    c_decl: str
    cleared_literal: str
    descr_char: str  # secondary-argument descriptor letter, '' for void
    union_member: str  # member of the argument union, '' for void
    truth_fmt: str  # condition text template, '' for void


CTYPE_VALUE = CType("value", True, "meltlite_value_t", "NULL", "v", "uv", "(%s != NULL)")
CTYPE_LONG = CType("long", False, "long", "0L", "l", "ul", "(%s != 0L)")
CTYPE_CSTRING = CType(
    "cstring", False, "const char *", "(const char *)0", "s", "us", "(%s != (const char *)0)"
)
CTYPE_VOID = CType("void", False, "void", "", "", "", "")
CTYPE_HNODE = CType("hnode", False, "hi_node_t", "NULL", "n", "up", "(%s != NULL)")
CTYPE_HSTMT = CType("hstmt", False, "hi_stmt_t", "NULL", "t", "up", "(%s != NULL)")
CTYPE_HSTMTSEQ = CType("hstmtseq", False, "hi_stmtseq_t", "NULL", "q", "up", "(%s != NULL)")
CTYPE_HBB = CType("hbb", False, "hi_bb_t", "NULL", "b", "up", "(%s != NULL)")

CTYPES = {
    c.name: c
    for c in [
        CTYPE_VALUE,
        CTYPE_LONG,
        CTYPE_CSTRING,
        CTYPE_VOID,
        CTYPE_HNODE,
        CTYPE_HSTMT,
        CTYPE_HSTMTSEQ,
        CTYPE_HBB,
    ]
}


# --- binding payloads ---


@dataclass(eq=False)
class Formal:
    name: str
    ctype: CType


@dataclass(eq=False)
class LocalSlot:
    """A routine-local variable: formal, let/letrec local, c-iterator
    local, multicall result, pattern variable, or fresh temporary."""

    name: str
    ctype: CType
    kind: str  # formal|local|temp|patvar|citerlocal|multilocal


@dataclass(eq=False)
class FunctionDef:
    name: str
    formals: list  # [LocalSlot]
    body: list = field(default_factory=list)
    doc: object = None
    origin: str = ""


@dataclass(eq=False)
class FieldDef:
    name: str
    owner: object = None  # ClassDef
    index: int = -1


@dataclass(eq=False)
class ClassDef:
    name: str
    super: object = None
    own_fields: list = field(default_factory=list)
    doc: object = None
    origin: str = ""
    predef_slot: int = 0

    def all_fields(self):
        chain = self.super.all_fields() if self.super else []
        return chain + self.own_fields

    def is_subclass_of(self, other) -> bool:
        c = self
        while c is not None:
            if c is other:
                return True
            c = c.super
        return False


@dataclass(eq=False)
class InstanceDef:
    name: str
    cls: ClassDef = None
    inits: list = field(default_factory=list)  # [(FieldDef, ast)]
    doc: object = None
    origin: str = ""


@dataclass(eq=False)
class PredefValue:
    """A runtime value installed by the runtime itself at a fixed slot
    of the predefined array (core discriminants and similar)."""

    name: str
    predef_slot: int
    origin: str = "runtime"


@dataclass(eq=False)
class SelectorDef:
    name: str
    formals: object = None
    inits: list = field(default_factory=list)
    cls: object = None
    doc: object = None
    origin: str = ""


@dataclass(eq=False)
class PrimitiveDef:
    name: str
    formals: list  # [Formal]
    result: CType = CTYPE_VOID
    expansion: tuple = ()
    doc: object = None
    origin: str = ""


@dataclass(eq=False)
class CIterDef:
    name: str
    start_formals: list = field(default_factory=list)
    state: str = ""
    local_formals: list = field(default_factory=list)
    before: tuple = ()
    after: tuple = ()
    doc: object = None
    origin: str = ""


@dataclass(eq=False)
class CMatcherDef:
    name: str
    match_formal: Formal = None
    in_formals: list = field(default_factory=list)
    out_formals: list = field(default_factory=list)
    state: str = ""
    test: tuple = ()
    fill: tuple = ()
    doc: object = None
    origin: str = ""
    sem_test: object = None  # python semantics over descriptions
    sem_fill: object = None


@dataclass(eq=False)
class FunMatcherDef:
    name: str
    in_formals: list = field(default_factory=list)  # first is the matched thing
    out_formals: list = field(default_factory=list)
    fn_expr: object = None  # expression ast giving the matching function
    doc: object = None
    origin: str = ""
    sem: object = None  # python semantics: (subject, inputs) -> None | tuple


@dataclass(eq=False)
class MacroDef:
    name: str
    expander: object  # callable(slist, env, expander) -> ast
    doc: object = None
    origin: str = ""


@dataclass(eq=False)
class PatMacroDef:
    name: str
    expander: object  # callable(slist, env, expander) -> pattern
    doc: object = None
    origin: str = ""


@dataclass(eq=False)
class Binding:
    name: str
    kind: str
    payload: object


# --- environments ---


class ModuleEnv:
    """Ordered name -> Binding map with parent fallthrough.

    The root environment additionally owns the c-type table, the global
    field registry and the predefined-slot map shared by all modules.
    """

    def __init__(self, parent=None, name="<env>"):
        self.parent = parent
        self.name = name
        self.bindings = {}
        self.exported = set()
        if parent is None:
            self.field_registry = {}
            self.predef_map = {}

    def root(self):
        e = self
        while e.parent is not None:
            e = e.parent
        return e

    def lookup(self, name):
        e = self
        while e is not None:
            b = e.bindings.get(name)
            if b is not None:
                return b
            e = e.parent
        return None

    def define(self, binding, loc=None):
        if binding.name in self.bindings:
            raise MeltExpandError(f"duplicate definition of {binding.name}", loc)
        self.bindings[binding.name] = binding
        return binding

    def export(self, name, loc=None):
        if name not in self.bindings:
            raise MeltExpandError(f"export of unbound name {name}", loc)
        self.exported.add(name)

    def export_view(self, name):
        """Environment a child module expands against: parent plus
        exactly the exported bindings."""
        view = ModuleEnv(self.parent, name=name)
        for n in self.bindings:
            if n in self.exported:
                view.bindings[n] = self.bindings[n]
                view.exported.add(n)
        return view

    def find_ctype(self, name):
        return CTYPES.get(name)


# --- abstract syntax ---


@dataclass(eq=False)
class Ast:
    pass


def _astnode(cls):
    return dataclass(eq=False)(cls)


@_astnode
class SNil(Ast):
    loc: object
    ctype: CType = None


@_astnode
class SLongLit(Ast):
    loc: object
    value: int = 0
    ctype: CType = None


@_astnode
class SCStringLit(Ast):
    loc: object
    value: str = ""
    ctype: CType = None


@_astnode
class SQuoteConst(Ast):
    loc: object
    kind: str = "symbol"  # symbol|keyword|long|string
    value: object = None
    ctype: CType = None


@_astnode
class SCleared(Ast):
    """The cleared thing of a given c-type (nil, 0L, null pointer...),
    synthesized while normalizing and/or/cond fall-through branches."""

    loc: object
    ctype: CType = None


@_astnode
class SVar(Ast):
    loc: object
    name: str = ""
    binding: object = None  # LocalSlot or global payload
    ctype: CType = None


@_astnode
class SApply(Ast):
    loc: object
    fn: Ast = None
    args: list = field(default_factory=list)
    ctype: CType = None


@_astnode
class SSend(Ast):
    loc: object
    recv: Ast = None
    sel: object = None  # SelectorDef
    args: list = field(default_factory=list)
    ctype: CType = None


@_astnode
class SSetq(Ast):
    loc: object
    slot: LocalSlot = None
    expr: Ast = None
    ctype: CType = None


@_astnode
class LetBinding:
    slot: LocalSlot
    init: Ast = None  # None: cleared


@_astnode
class SLet(Ast):
    loc: object
    bindings: list = field(default_factory=list)
    body: list = field(default_factory=list)
    ctype: CType = None


@_astnode
class SLetrec(Ast):
    loc: object
    bindings: list = field(default_factory=list)
    body: list = field(default_factory=list)
    ctype: CType = None


@_astnode
class SLambda(Ast):
    loc: object
    formals: list = field(default_factory=list)
    body: list = field(default_factory=list)
    name_hint: str = "lambda"
    ctype: CType = None


@_astnode
class SIf(Ast):
    loc: object
    cond: Ast = None
    then: Ast = None
    els: Ast = None
    ctype: CType = None


@_astnode
class SCond(Ast):
    loc: object
    clauses: list = field(default_factory=list)  # [(test ast | None for :else, [body])]
    ctype: CType = None


@_astnode
class SAnd(Ast):
    loc: object
    args: list = field(default_factory=list)
    ctype: CType = None


@_astnode
class SOr(Ast):
    loc: object
    args: list = field(default_factory=list)
    ctype: CType = None


@_astnode
class SProgn(Ast):
    loc: object
    body: list = field(default_factory=list)
    ctype: CType = None


@_astnode
class SForever(Ast):
    loc: object
    label: str = ""
    body: list = field(default_factory=list)
    ctype: CType = None


@_astnode
class SExit(Ast):
    loc: object
    label: str = ""
    body: list = field(default_factory=list)  # last expression is the loop result
    ctype: CType = None


@_astnode
class SReturn(Ast):
    loc: object
    primary: Ast = None
    secondaries: list = field(default_factory=list)
    ctype: CType = None


@_astnode
class SMulticall(Ast):
    loc: object
    formals: list = field(default_factory=list)  # [LocalSlot]
    call: Ast = None  # SApply or SSend
    body: list = field(default_factory=list)
    ctype: CType = None


@_astnode
class MatchClause:
    pattern: object
    body: list = field(default_factory=list)
    patvars: list = field(default_factory=list)  # [LocalSlot], set by normalizer


@_astnode
class SMatch(Ast):
    loc: object
    subject: Ast = None
    clauses: list = field(default_factory=list)
    graph: object = None  # MatchGraph, attached by compile_match
    ctype: CType = None


@_astnode
class SGetField(Ast):
    loc: object
    fld: FieldDef = None
    obj: Ast = None
    safe: bool = True
    ctype: CType = None


@_astnode
class SPutFields(Ast):
    loc: object
    obj: Ast = None
    assigns: list = field(default_factory=list)
    safe: bool = True
    ctype: CType = None


@_astnode
class SInstance(Ast):
    loc: object
    cls: ClassDef = None
    assigns: list = field(default_factory=list)
    ctype: CType = None


@_astnode
class STupleCtor(Ast):
    loc: object
    items: list = field(default_factory=list)
    ctype: CType = None


@_astnode
class SListCtor(Ast):
    loc: object
    items: list = field(default_factory=list)
    ctype: CType = None


@_astnode
class SCodeChunk(Ast):
    loc: object
    state: str = ""
    chunks: tuple = ()
    ctype: CType = None


@_astnode
class SDebugMsg(Ast):
    loc: object
    val: Ast = None
    msg: Ast = None
    ctype: CType = None


@_astnode
class SAssertMsg(Ast):
    loc: object
    msg: Ast = None
    cond: Ast = None
    ctype: CType = None


@_astnode
class SCompileWarning(Ast):
    loc: object
    msg: str = ""
    expr: Ast = None
    ctype: CType = None


@_astnode
class SCppIf(Ast):
    loc: object
    symbol: str = ""
    then: Ast = None
    els: Ast = None
    ctype: CType = None


@_astnode
class SHostIf(Ast):
    loc: object
    prefix: str = ""
    body: list = field(default_factory=list)
    ctype: CType = None


@_astnode
class SCurrentEnv(Ast):
    loc: object
    ctype: CType = None


@_astnode
class SParentEnv(Ast):
    loc: object
    ctype: CType = None


@_astnode
class SPrimCall(Ast):
    loc: object
    prim: PrimitiveDef = None
    args: list = field(default_factory=list)
    ctype: CType = None


@_astnode
class SCIter(Ast):
    loc: object
    citer: CIterDef = None
    inputs: list = field(default_factory=list)
    locals: list = field(default_factory=list)  # [LocalSlot]
    body: list = field(default_factory=list)
    ctype: CType = None


# --- top-level items ---


@dataclass(eq=False)
class TopExpr:
    loc: object
    ast: Ast


@dataclass(eq=False)
class Definition:
    loc: object
    kind: str  # defun|defclass|definstance|defselector|defprimitive|...
    name: str
    payload: object


@dataclass(eq=False)
class ExportDirective:
    loc: object
    kind: str  # values|class|macro|patmacro|synonym
    names: list


@dataclass(eq=False)
class Module:
    name: str
    items: list
    env: ModuleEnv  # full working environment (internal view)
    export_env: ModuleEnv


def iter_ast_children(node):
    """Child AST nodes (and pattern nodes) of one node, skipping binding
    payloads, which may contain reference cycles."""
    import dataclasses

    from . import matchc as _m

    walkable = (
        Ast,
        LetBinding,
        MatchClause,
        _m.PWild,
        _m.PVar,
        _m.PConst,
        _m.PMatcher,
        _m.PInstance,
        _m.PAnd,
        _m.POr,
    )
    if not (dataclasses.is_dataclass(node) and not isinstance(node, type)):
        return
    for f in dataclasses.fields(node):
        v = getattr(node, f.name)
        if isinstance(v, walkable):
            yield v
        elif isinstance(v, (list, tuple)):
            for item in v:
                if isinstance(item, walkable):
                    yield item
                elif isinstance(item, tuple):
                    for sub in item:
                        if isinstance(sub, walkable):
                            yield sub


TOPLEVEL_ONLY = {
    "defun",
    "defclass",
    "definstance",
    "defselector",
    "defprimitive",
    "defciterator",
    "defcmatcher",
    "defunmatcher",
    "export_values",
    "export_value",
    "export_class",
    "export_macro",
    "export_patmacro",
    "export_synonym",
}


def _head_name(e):
    if isinstance(e, SList) and e.items and isinstance(e.items[0], SSymbol):
        return e.items[0].name
    return None


class Expander:
    def __init__(self, env: ModuleEnv, module_name: str = "<module>", host_version: str = ""):
        self.env = env
        self.module_name = module_name
        self.host_version = host_version
        self.items = []
        self.warnings = []

    # -- helpers --

    def err(self, message, loc):
        raise MeltExpandError(message, loc)

    def need_symbol(self, e, what):
        if not isinstance(e, SSymbol):
            self.err(f"expected a symbol for {what}, got {sexpr_to_text(e)}", e.loc)
        return e.name

    def need_list(self, e, what):
        if not isinstance(e, SList):
            self.err(f"expected a list for {what}, got {sexpr_to_text(e)}", e.loc)
        return e

    def lookup(self, name, env):
        return env.lookup(name)

    # -- formals --

    def parse_formals(self, e, env, require_first_value=False, kind="formal"):
        lst = self.need_list(e, "formal list")
        formals = []
        cur = CTYPE_VALUE
        seen = set()
        for item in lst.items:
            if isinstance(item, SKeyword):
                ct = env.find_ctype(item.name)
                if ct is None:
                    self.err(f"unknown c-type keyword :{item.name}", item.loc)
                if ct is CTYPE_VOID:
                    self.err("formals may not be :void", item.loc)
                cur = ct
            elif isinstance(item, SSymbol):
                if item.name in seen:
                    self.err(f"duplicate formal {item.name}", item.loc)
                seen.add(item.name)
                formals.append(LocalSlot(item.name, cur, kind))
            else:
                self.err(f"bad formal {sexpr_to_text(item)}", item.loc)
        if require_first_value and formals and formals[0].ctype is not CTYPE_VALUE:
            self.err("the first formal must be a value", lst.loc)
        return formals

    def child_env(self, env, slots):
        child = ModuleEnv(env, name="<scope>")
        for slot in slots:
            child.bindings[slot.name] = Binding(slot.name, slot.kind, slot)
        return child

    # -- expressions --

    def expand_expr(self, e, env):
        if isinstance(e, SLong):
            return SLongLit(e.loc, e.value)
        if isinstance(e, SString):
            return SCStringLit(e.loc, e.value)
        if isinstance(e, SKeyword):
            return SQuoteConst(e.loc, "keyword", e.name)
        if isinstance(e, SMacroString):
            self.err("macro-string outside a template construct", e.loc)
        if isinstance(e, SSymbol):
            b = env.lookup(e.name)
            if b is None:
                self.err(f"unbound variable {e.name}", e.loc)
            if b.kind in ("primitive", "c-iterator", "c-matcher", "macro", "patmacro"):
                self.err(f"{b.kind} {e.name} is not a value", e.loc)
            return SVar(e.loc, e.name, b.payload)
        if isinstance(e, SList):
            if not e.items:
                return SNil(e.loc)
            return self.expand_form(e, env)
        self.err(f"cannot expand {e!r}", getattr(e, "loc", None))

    def expand_body(self, exprs, env):
        return [self.expand_expr(x, env) for x in exprs]

    def expand_form(self, e, env):
        head = e.items[0]
        if isinstance(head, SList):
            fn = self.expand_expr(head, env)
            return SApply(e.loc, fn, self.expand_body(e.items[1:], env))
        if isinstance(head, SKeyword):
            self.err("a keyword is not an operator", head.loc)
        name = self.need_symbol(head, "operator")
        special = _SPECIAL_FORMS.get(name)
        if special is not None:
            return special(self, e, env)
        if name in TOPLEVEL_ONLY:
            self.err(f"{name} is only allowed at the top level", e.loc)
        b = env.lookup(name)
        if b is None:
            self.err(f"unbound operator {name}", e.loc)
        if b.kind == "macro":
            return b.payload.expander(e, env, self)
        if b.kind == "patmacro":
            self.err(f"pattern macro {name} used outside a pattern", e.loc)
        if b.kind == "primitive":
            prim = b.payload
            args = self.expand_body(e.items[1:], env)
            if len(args) != len(prim.formals):
                self.err(
                    f"primitive {name} expects {len(prim.formals)} arguments, got {len(args)}",
                    e.loc,
                )
            return SPrimCall(e.loc, prim, args)
        if b.kind == "c-iterator":
            return self.expand_citer(b.payload, e, env)
        if b.kind in ("c-matcher", "fun-matcher"):
            self.err(f"matcher {name} used outside a pattern", e.loc)
        if b.kind == "selector":
            if len(e.items) < 2:
                self.err(f"send of {name} needs a receiver", e.loc)
            recv = self.expand_expr(e.items[1], env)
            args = self.expand_body(e.items[2:], env)
            return SSend(e.loc, recv, b.payload, args)
        # anything else is a value binding: plain application
        fn = SVar(head.loc, name, b.payload)
        return SApply(e.loc, fn, self.expand_body(e.items[1:], env))

    def expand_citer(self, citer, e, env):
        if len(e.items) < 3:
            self.err(
                f"c-iterator {citer.name} expects (inputs) (locals) body", e.loc
            )
        inputs_l = self.need_list(e.items[1], "c-iterator inputs")
        if len(inputs_l.items) != len(citer.start_formals):
            self.err(
                f"c-iterator {citer.name} expects {len(citer.start_formals)} inputs,"
                f" got {len(inputs_l.items)}",
                inputs_l.loc,
            )
        inputs = self.expand_body(inputs_l.items, env)
        locals_ = self.parse_formals(e.items[2], env, kind="citerlocal")
        if [f.ctype for f in locals_] != [f.ctype for f in citer.local_formals]:
            self.err(
                f"c-iterator {citer.name} local formals must be typed "
                + "("
                + " ".join(":" + f.ctype.name + " " + f.name for f in citer.local_formals)
                + ")",
                e.items[2].loc,
            )
        body_env = self.child_env(env, locals_)
        body = self.expand_body(e.items[3:], body_env)
        return SCIter(e.loc, citer, inputs, locals_, body)

    # -- patterns --

    def expand_pattern(self, e, env):
        if isinstance(e, SList) and len(e) == 2 and _head_name(e) == "question":
            inner = e.items[1]
            if isinstance(inner, SSymbol):
                if inner.name == "_":
                    return matchc.PWild(e.loc)
                return matchc.PVar(e.loc, inner.name)
            if isinstance(inner, SList) and inner.items:
                return self.expand_composite_pattern(inner, env)
            self.err(f"bad pattern {sexpr_to_text(e)}", e.loc)
        # expressions are degenerated (constant) patterns
        return matchc.PConst(e.loc, self.expand_expr(e, env))

    def expand_composite_pattern(self, e, env):
        name = self.need_symbol(e.items[0], "pattern operator")
        rest = e.items[1:]
        if name == "and":
            if not rest:
                self.err("(and) pattern needs sub-patterns", e.loc)
            return matchc.PAnd(e.loc, [self.expand_pattern(x, env) for x in rest])
        if name == "or":
            if not rest:
                self.err("(or) pattern needs sub-patterns", e.loc)
            subs = [self.expand_pattern(x, env) for x in rest]
            sets = [tuple(matchc.pattern_variables(s)) for s in subs]
            if len(set(sets)) != 1:
                self.err("all (or) pattern branches must bind the same variables", e.loc)
            return matchc.POr(e.loc, subs)
        if name == "instance":
            if not rest:
                self.err("(instance ...) pattern needs a class", e.loc)
            cls = self.class_binding(rest[0], env)
            fields = self.field_patterns(cls, rest[1:], env)
            return matchc.PInstance(e.loc, cls, fields)
        b = env.lookup(name)
        if b is None:
            self.err(f"unbound matcher {name}", e.loc)
        if b.kind == "patmacro":
            return b.payload.expander(e, env, self)
        if b.kind == "c-matcher":
            m = b.payload
            n_in = len(m.in_formals)
            n_out = len(m.out_formals)
        elif b.kind == "fun-matcher":
            m = b.payload
            n_in = len(m.in_formals) - 1
            n_out = len(m.out_formals)
        else:
            self.err(f"{name} is a {b.kind}, not a matcher", e.loc)
        if len(rest) != n_in + n_out:
            self.err(
                f"matcher {name} expects {n_in} inputs and {n_out} sub-patterns,"
                f" got {len(rest)} operands",
                e.loc,
            )
        inputs = [self.expand_expr(x, env) for x in rest[:n_in]]
        subs = [self.expand_pattern(x, env) for x in rest[n_in:]]
        return matchc.PMatcher(e.loc, m, inputs, subs)

    def class_binding(self, e, env):
        name = self.need_symbol(e, "class name")
        b = env.lookup(name)
        if b is None or b.kind != "class":
            self.err(f"{name} is not a class", e.loc)
        return b.payload

    def field_for_keyword(self, kw, env):
        if not isinstance(kw, SKeyword):
            self.err(f"expected a field keyword, got {sexpr_to_text(kw)}", kw.loc)
        fld = env.root().field_registry.get(kw.name)
        if fld is None:
            self.err(f"unknown field :{kw.name}", kw.loc)
        return fld

    def field_patterns(self, cls, items, env):
        if len(items) % 2 != 0:
            self.err("field patterns go in :field pattern pairs", items[0].loc)
        out = []
        for i in range(0, len(items), 2):
            fld = self.field_for_keyword(items[i], env)
            if not cls.is_subclass_of(fld.owner):
                self.err(
                    f"field :{fld.name} belongs to {fld.owner.name}, not {cls.name}",
                    items[i].loc,
                )
            out.append((fld, self.expand_pattern(items[i + 1], env)))
        return out

    # -- top level --

    def expand_unit(self, sexprs, parent_env):
        env = ModuleEnv(parent_env, name=self.module_name)
        self.items = []
        for e in sexprs:
            name = _head_name(e)
            if name in _DEFINITION_FORMS:
                _DEFINITION_FORMS[name](self, e, env)
            elif name in _EXPORT_FORMS:
                _EXPORT_FORMS[name](self, e, env)
            else:
                ast = self.expand_expr(e, env)
                self.items.append(TopExpr(e.loc, ast))
        export_env = env.export_view(self.module_name)
        return Module(self.module_name, self.items, env, export_env)


# --- special forms ---


def _sf_quote(x, e, env):
    if len(e.items) != 2:
        x.err("quote takes one operand", e.loc)
    q = e.items[1]
    if isinstance(q, SSymbol):
        return SQuoteConst(e.loc, "symbol", q.name)
    if isinstance(q, SKeyword):
        return SQuoteConst(e.loc, "keyword", q.name)
    if isinstance(q, SLong):
        return SQuoteConst(e.loc, "long", q.value)
    if isinstance(q, SString):
        return SQuoteConst(e.loc, "string", q.value)
    x.err(f"cannot quote {sexpr_to_text(q)}", e.loc)


def _sf_backquote(x, e, env):
    x.err("backquote has no expansion semantics", e.loc)


def _sf_question(x, e, env):
    x.err("'?' pattern outside a match", e.loc)


def _sf_setq(x, e, env):
    if len(e.items) != 3:
        x.err("setq takes a variable and an expression", e.loc)
    name = x.need_symbol(e.items[1], "setq variable")
    b = env.lookup(name)
    if b is None:
        x.err(f"unbound variable {name}", e.items[1].loc)
    if not isinstance(b.payload, LocalSlot):
        x.err(f"{name} is not an assignable local", e.items[1].loc)
    return SSetq(e.loc, b.payload, x.expand_expr(e.items[2], env))


def _parse_let_binding(x, e, env):
    lst = x.need_list(e, "let binding")
    items = list(lst.items)
    ct = CTYPE_VALUE
    if items and isinstance(items[0], SKeyword):
        ct = env.find_ctype(items[0].name)
        if ct is None:
            x.err(f"unknown c-type keyword :{items[0].name}", items[0].loc)
        if ct is CTYPE_VOID:
            x.err("a binding may not be :void", items[0].loc)
        items = items[1:]
    if not items or not isinstance(items[0], SSymbol):
        x.err(f"bad let binding {sexpr_to_text(e)}", lst.loc)
    name = items[0].name
    if len(items) > 2:
        x.err(f"bad let binding {sexpr_to_text(e)}", lst.loc)
    init = items[1] if len(items) == 2 else None
    return name, ct, init


def _sf_let(x, e, env):
    if len(e.items) < 2:
        x.err("let needs a binding list", e.loc)
    blist = x.need_list(e.items[1], "let bindings")
    bindings = []
    cur = env
    for be in blist.items:
        name, ct, init_e = _parse_let_binding(x, be, env)
        init = x.expand_expr(init_e, cur) if init_e is not None else None
        slot = LocalSlot(name, ct, "local")
        cur = x.child_env(cur, [slot])  # sequential: later inits see earlier names
        bindings.append(LetBinding(slot, init))
    body = x.expand_body(e.items[2:], cur)
    return SLet(e.loc, bindings, body)


def _sf_letrec(x, e, env):
    if len(e.items) < 2:
        x.err("letrec needs a binding list", e.loc)
    blist = x.need_list(e.items[1], "letrec bindings")
    parsed = [_parse_let_binding(x, be, env) for be in blist.items]
    slots = []
    for name, ct, _init in parsed:
        slots.append(LocalSlot(name, ct, "local"))
    inner = x.child_env(env, slots)
    bindings = []
    for slot, (name, _ct, init_e) in zip(slots, parsed):
        if init_e is None:
            x.err(f"letrec binding {name} needs a constructive expression", blist.loc)
        init = x.expand_expr(init_e, inner)
        if not isinstance(init, (SLambda, SInstance, STupleCtor, SListCtor)):
            x.err(
                f"letrec binding {name} must be constructive (lambda, instance, tuple, list)",
                init.loc,
            )
        bindings.append(LetBinding(slot, init))
    body = x.expand_body(e.items[2:], inner)
    return SLetrec(e.loc, bindings, body)


def _sf_lambda(x, e, env):
    if len(e.items) < 2:
        x.err("lambda needs a formal list", e.loc)
    formals = x.parse_formals(e.items[1], env, require_first_value=True)
    body_env = x.child_env(env, formals)
    body = x.expand_body(e.items[2:], body_env)
    return SLambda(e.loc, formals, body)


def _sf_if(x, e, env):
    if len(e.items) not in (3, 4):
        x.err("if takes a test, a then and an optional else", e.loc)
    cond = x.expand_expr(e.items[1], env)
    then = x.expand_expr(e.items[2], env)
    els = x.expand_expr(e.items[3], env) if len(e.items) == 4 else None
    return SIf(e.loc, cond, then, els)


def _sf_cond(x, e, env):
    clauses = []
    for i, ce in enumerate(e.items[1:]):
        cl = x.need_list(ce, "cond clause")
        if not cl.items:
            x.err("empty cond clause", cl.loc)
        head = cl.items[0]
        if isinstance(head, SKeyword) and head.name == "else":
            if i != len(e.items) - 2:
                x.err(":else must be the last cond clause", cl.loc)
            clauses.append((None, x.expand_body(cl.items[1:], env)))
        else:
            test = x.expand_expr(head, env)
            clauses.append((test, x.expand_body(cl.items[1:], env)))
    return SCond(e.loc, clauses)


def _sf_and(x, e, env):
    return SAnd(e.loc, x.expand_body(e.items[1:], env))


def _sf_or(x, e, env):
    return SOr(e.loc, x.expand_body(e.items[1:], env))


def _sf_progn(x, e, env):
    return SProgn(e.loc, x.expand_body(e.items[1:], env))


def _sf_forever(x, e, env):
    if len(e.items) < 2:
        x.err("forever needs a label", e.loc)
    label = x.need_symbol(e.items[1], "loop label")
    body = x.expand_body(e.items[2:], env)
    return SForever(e.loc, label, body)


def _sf_exit(x, e, env):
    if len(e.items) < 2:
        x.err("exit needs a label", e.loc)
    label = x.need_symbol(e.items[1], "loop label")
    body = x.expand_body(e.items[2:], env)
    return SExit(e.loc, label, body)


def _sf_return(x, e, env):
    args = x.expand_body(e.items[1:], env)
    primary = args[0] if args else None
    return SReturn(e.loc, primary, args[1:])


def _sf_multicall(x, e, env):
    if len(e.items) < 3:
        x.err("multicall needs formals and a call", e.loc)
    formals = x.parse_formals(e.items[1], env, require_first_value=True, kind="multilocal")
    call = x.expand_expr(e.items[2], env)
    if not isinstance(call, (SApply, SSend)):
        x.err("multicall needs an application or send", e.items[2].loc)
    body_env = x.child_env(env, formals)
    body = x.expand_body(e.items[3:], body_env)
    return SMulticall(e.loc, formals, call, body)


def _sf_match(x, e, env):
    if len(e.items) < 2:
        x.err("match needs a subject", e.loc)
    subject = x.expand_expr(e.items[1], env)
    clauses = []
    for ce in e.items[2:]:
        cl = x.need_list(ce, "match clause")
        if not cl.items:
            x.err("empty match clause", cl.loc)
        pat = x.expand_pattern(cl.items[0], env)
        patvars = [
            LocalSlot(n, None, "patvar") for n in matchc.pattern_variables(pat)
        ]
        body_env = x.child_env(env, patvars)
        body = x.expand_body(cl.items[1:], body_env)
        clause = MatchClause(pat, body)
        clause.patvars = patvars
        clauses.append(clause)
    return SMatch(e.loc, subject, clauses)


def _sf_get_field(x, e, env, safe=True):
    if len(e.items) != 3:
        x.err("get_field takes a field keyword and an expression", e.loc)
    fld = x.field_for_keyword(e.items[1], env)
    obj = x.expand_expr(e.items[2], env)
    return SGetField(e.loc, fld, obj, safe)


def _sf_unsafe_get_field(x, e, env):
    return _sf_get_field(x, e, env, safe=False)


def _field_assigns(x, items, env, cls=None, loc=None):
    if len(items) % 2 != 0:
        x.err("field updates go in :field expression pairs", loc)
    out = []
    for i in range(0, len(items), 2):
        fld = x.field_for_keyword(items[i], env)
        if cls is not None and not cls.is_subclass_of(fld.owner):
            x.err(f"field :{fld.name} does not belong to class {cls.name}", items[i].loc)
        out.append((fld, x.expand_expr(items[i + 1], env)))
    return out


def _sf_put_fields(x, e, env, safe=True):
    if len(e.items) < 2:
        x.err("put_fields needs an object expression", e.loc)
    obj = x.expand_expr(e.items[1], env)
    assigns = _field_assigns(x, e.items[2:], env, loc=e.loc)
    return SPutFields(e.loc, obj, assigns, safe)


def _sf_unsafe_put_fields(x, e, env):
    return _sf_put_fields(x, e, env, safe=False)


def _sf_instance(x, e, env):
    if len(e.items) < 2:
        x.err("instance needs a class", e.loc)
    cls = x.class_binding(e.items[1], env)
    assigns = _field_assigns(x, e.items[2:], env, cls=cls, loc=e.loc)
    return SInstance(e.loc, cls, assigns)


def _sf_tuple(x, e, env):
    return STupleCtor(e.loc, x.expand_body(e.items[1:], env))


def _sf_list(x, e, env):
    return SListCtor(e.loc, x.expand_body(e.items[1:], env))


def _sf_code_chunk(x, e, env):
    if len(e.items) != 3 or not isinstance(e.items[2], SMacroString):
        x.err("code_chunk takes a state symbol and a macro-string", e.loc)
    state = x.need_symbol(e.items[1], "state symbol")
    return SCodeChunk(e.loc, state, e.items[2].chunks)


def _sf_debug_msg(x, e, env):
    if len(e.items) != 3:
        x.err("debug_msg takes an expression and a message", e.loc)
    val = x.expand_expr(e.items[1], env)
    msg = x.expand_expr(e.items[2], env)
    return SDebugMsg(e.loc, val, msg)


def _sf_assert_msg(x, e, env):
    if len(e.items) != 3:
        x.err("assert_msg takes a message and a test", e.loc)
    msg = x.expand_expr(e.items[1], env)
    cond = x.expand_expr(e.items[2], env)
    return SAssertMsg(e.loc, msg, cond)


def _sf_compile_warning(x, e, env):
    if len(e.items) != 3 or not isinstance(e.items[1], SString):
        x.err("compile_warning takes a message string and an expression", e.loc)
    return SCompileWarning(e.loc, e.items[1].value, x.expand_expr(e.items[2], env))


def _sf_cppif(x, e, env):
    if len(e.items) not in (3, 4):
        x.err("cppif takes a symbol, a then and an optional else", e.loc)
    sym = e.items[1]
    if isinstance(sym, SSymbol):
        symbol = sym.name.upper()  # C preprocessor names are conventionally upper-case
    elif isinstance(sym, SString):
        symbol = sym.value
    else:
        x.err("cppif needs a preprocessor symbol", sym.loc)
    then = x.expand_expr(e.items[2], env)
    els = x.expand_expr(e.items[3], env) if len(e.items) == 4 else None
    return SCppIf(e.loc, symbol, then, els)


def _sf_hostif(x, e, env):
    if len(e.items) < 2 or not isinstance(e.items[1], SString):
        x.err("hostif needs a version prefix string", e.loc)
    body = x.expand_body(e.items[2:], env)
    return SHostIf(e.loc, e.items[1].value, body)


def _sf_current_env(x, e, env):
    return SCurrentEnv(e.loc)


def _sf_parent_env(x, e, env):
    return SParentEnv(e.loc)


_SPECIAL_FORMS = {
    "quote": _sf_quote,
    "backquote": _sf_backquote,
    "comma": _sf_backquote,
    "question": _sf_question,
    "setq": _sf_setq,
    "let": _sf_let,
    "letrec": _sf_letrec,
    "lambda": _sf_lambda,
    "if": _sf_if,
    "cond": _sf_cond,
    "and": _sf_and,
    "or": _sf_or,
    "progn": _sf_progn,
    "forever": _sf_forever,
    "exit": _sf_exit,
    "return": _sf_return,
    "multicall": _sf_multicall,
    "match": _sf_match,
    "get_field": _sf_get_field,
    "unsafe_get_field": _sf_unsafe_get_field,
    "put_fields": _sf_put_fields,
    "unsafe_put_fields": _sf_unsafe_put_fields,
    "instance": _sf_instance,
    "tuple": _sf_tuple,
    "list": _sf_list,
    "code_chunk": _sf_code_chunk,
    "debug_msg": _sf_debug_msg,
    "assert_msg": _sf_assert_msg,
    "compile_warning": _sf_compile_warning,
    "cppif": _sf_cppif,
    "gccif": _sf_hostif,
    "hostif": _sf_hostif,
    "current_module_environment_container": _sf_current_env,
    "parent_module_environment": _sf_parent_env,
}


# --- definition forms (top level only) ---


def _take_doc(x, items):
    """Strip an optional :doc macro-string pair from an operand list."""
    out = []
    doc = None
    i = 0
    while i < len(items):
        it = items[i]
        if isinstance(it, SKeyword) and it.name == "doc":
            if i + 1 >= len(items) or not isinstance(items[i + 1], SMacroString):
                x.err(":doc needs a macro-string", it.loc)
            doc = items[i + 1].chunks
            i += 2
        else:
            out.append(it)
            i += 1
    return out, doc


def _def_defun(x, e, env):
    if len(e.items) < 3:
        x.err("defun needs a name and formals", e.loc)
    name = x.need_symbol(e.items[1], "function name")
    rest, doc = _take_doc(x, list(e.items[2:]))
    if not rest:
        x.err("defun needs a formal list", e.loc)
    formals = x.parse_formals(rest[0], env, require_first_value=True)
    fn = FunctionDef(name, formals, doc=doc, origin=x.module_name)
    env.define(Binding(name, "function", fn), e.loc)
    body_env = x.child_env(env, formals)
    fn.body = x.expand_body(rest[1:], body_env)
    x.items.append(Definition(e.loc, "defun", name, fn))


def _def_defclass(x, e, env):
    if len(e.items) < 2:
        x.err("defclass needs a name", e.loc)
    name = x.need_symbol(e.items[1], "class name")
    rest, doc = _take_doc(x, list(e.items[2:]))
    super_cls = None
    fields_l = None
    i = 0
    while i < len(rest):
        kw = rest[i]
        if isinstance(kw, SKeyword) and kw.name == "super" and i + 1 < len(rest):
            super_cls = x.class_binding(rest[i + 1], env)
            i += 2
        elif isinstance(kw, SKeyword) and kw.name == "fields" and i + 1 < len(rest):
            fields_l = x.need_list(rest[i + 1], "field list")
            i += 2
        else:
            x.err(f"bad defclass operand {sexpr_to_text(kw)}", kw.loc)
    if super_cls is None:
        x.err("defclass needs a :super class", e.loc)
    cls = ClassDef(name, super_cls, doc=doc, origin=x.module_name)
    base = len(super_cls.all_fields())
    registry = env.root().field_registry
    own = []
    for j, fe in enumerate(fields_l.items if fields_l is not None else []):
        fname = x.need_symbol(fe, "field name")
        if fname in registry:
            other = registry[fname].owner
            x.err(
                f"field {fname} already belongs to class {other.name};"
                " field names are globally unique",
                fe.loc,
            )
        fld = FieldDef(fname, cls, base + j)
        registry[fname] = fld
        own.append(fld)
        env.define(Binding(fname, "field", fld), fe.loc)
    cls.own_fields = own
    env.define(Binding(name, "class", cls), e.loc)
    x.items.append(Definition(e.loc, "defclass", name, cls))


def _def_definstance(x, e, env):
    if len(e.items) < 3:
        x.err("definstance needs a name and a class", e.loc)
    name = x.need_symbol(e.items[1], "instance name")
    rest, doc = _take_doc(x, list(e.items[2:]))
    cls = x.class_binding(rest[0], env)
    inits = _field_assigns(x, rest[1:], env, cls=cls, loc=e.loc)
    inst = InstanceDef(name, cls, inits, doc=doc, origin=x.module_name)
    env.define(Binding(name, "instance", inst), e.loc)
    x.items.append(Definition(e.loc, "definstance", name, inst))


def _def_defselector(x, e, env):
    if len(e.items) < 3:
        x.err("defselector needs a name and a class", e.loc)
    name = x.need_symbol(e.items[1], "selector name")
    rest, doc = _take_doc(x, list(e.items[2:]))
    cls = x.class_binding(rest[0], env)
    formals = None
    i = 1
    inits = []
    while i < len(rest):
        kw = rest[i]
        if isinstance(kw, SKeyword) and kw.name == "formals" and i + 1 < len(rest):
            formals = x.parse_formals(rest[i + 1], env, require_first_value=True)
            i += 2
        elif isinstance(kw, SKeyword):
            inits.extend(_field_assigns(x, rest[i : i + 2], env, loc=kw.loc))
            i += 2
        else:
            x.err(f"bad defselector operand {sexpr_to_text(kw)}", kw.loc)
    sel = SelectorDef(name, formals, inits, cls, doc=doc, origin=x.module_name)
    env.define(Binding(name, "selector", sel), e.loc)
    x.items.append(Definition(e.loc, "defselector", name, sel))


def _parse_template_formals(x, e, env, kind):
    formals = []
    lst = x.need_list(e, "template formals")
    cur = CTYPE_VALUE
    for item in lst.items:
        if isinstance(item, SKeyword):
            ct = env.find_ctype(item.name)
            if ct is None:
                x.err(f"unknown c-type keyword :{item.name}", item.loc)
            if ct is CTYPE_VOID:
                x.err("formals may not be :void", item.loc)
            cur = ct
        elif isinstance(item, SSymbol):
            formals.append(Formal(item.name, cur))
        else:
            x.err(f"bad formal {sexpr_to_text(item)}", item.loc)
    return formals


def _template_refs(chunks):
    from .reader import MsRef

    return {c.name for c in chunks if isinstance(c, MsRef)}


def _check_template(x, chunks, allowed, what, loc):
    bad = _template_refs(chunks) - allowed
    if bad:
        x.err(f"{what} template references unknown names: {', '.join(sorted(bad))}", loc)


def _def_defprimitive(x, e, env):
    if len(e.items) < 4:
        x.err("defprimitive needs a name, formals, a result c-type and an expansion", e.loc)
    name = x.need_symbol(e.items[1], "primitive name")
    rest, doc = _take_doc(x, list(e.items[2:]))
    if len(rest) != 3:
        x.err("defprimitive needs formals, a result c-type and an expansion", e.loc)
    formals = _parse_template_formals(x, rest[0], env, "primitive")
    if not isinstance(rest[1], SKeyword):
        x.err("defprimitive result must be a c-type keyword", rest[1].loc)
    result = env.find_ctype(rest[1].name)
    if result is None:
        x.err(f"unknown c-type keyword :{rest[1].name}", rest[1].loc)
    if not isinstance(rest[2], SMacroString):
        x.err("defprimitive expansion must be a macro-string", rest[2].loc)
    _check_template(x, rest[2].chunks, {f.name for f in formals}, name, rest[2].loc)
    prim = PrimitiveDef(name, formals, result, rest[2].chunks, doc=doc, origin=x.module_name)
    env.define(Binding(name, "primitive", prim), e.loc)
    x.items.append(Definition(e.loc, "defprimitive", name, prim))


def _def_defciterator(x, e, env):
    if len(e.items) < 6:
        x.err(
            "defciterator needs start formals, a state symbol, local formals"
            " and two expansions",
            e.loc,
        )
    name = x.need_symbol(e.items[1], "c-iterator name")
    rest, doc = _take_doc(x, list(e.items[2:]))
    if len(rest) != 5:
        x.err("defciterator takes 5 operands after the name", e.loc)
    start = _parse_template_formals(x, rest[0], env, "c-iterator")
    state = x.need_symbol(rest[1], "state symbol")
    locs = _parse_template_formals(x, rest[2], env, "c-iterator")
    if not isinstance(rest[3], SMacroString) or not isinstance(rest[4], SMacroString):
        x.err("defciterator expansions must be macro-strings", e.loc)
    allowed = {f.name for f in start} | {f.name for f in locs} | {state}
    _check_template(x, rest[3].chunks, allowed, name, rest[3].loc)
    _check_template(x, rest[4].chunks, allowed, name, rest[4].loc)
    cit = CIterDef(name, start, state, locs, rest[3].chunks, rest[4].chunks, doc, x.module_name)
    env.define(Binding(name, "c-iterator", cit), e.loc)
    x.items.append(Definition(e.loc, "defciterator", name, cit))


def _def_defcmatcher(x, e, env):
    if len(e.items) < 6:
        x.err(
            "defcmatcher needs input formals, output formals, a state symbol"
            " and a test expansion",
            e.loc,
        )
    name = x.need_symbol(e.items[1], "c-matcher name")
    rest, doc = _take_doc(x, list(e.items[2:]))
    if len(rest) not in (4, 5):
        x.err("defcmatcher takes 4 or 5 operands after the name", e.loc)
    ins = _parse_template_formals(x, rest[0], env, "c-matcher")
    if not ins:
        x.err("a c-matcher needs at least the matched formal", rest[0].loc)
    outs = _parse_template_formals(x, rest[1], env, "c-matcher")
    state = x.need_symbol(rest[2], "state symbol")
    if not isinstance(rest[3], SMacroString):
        x.err("defcmatcher test expansion must be a macro-string", rest[3].loc)
    fill = ()
    if len(rest) == 5:
        if not isinstance(rest[4], SMacroString):
            x.err("defcmatcher fill expansion must be a macro-string", rest[4].loc)
        fill = rest[4].chunks
    if outs and not fill:
        x.err(f"c-matcher {name} has output formals but no fill expansion", e.loc)
    match_formal, in_rest = ins[0], ins[1:]
    test_ok = {match_formal.name} | {f.name for f in in_rest} | {state}
    _check_template(x, rest[3].chunks, test_ok, name, rest[3].loc)
    if fill:
        _check_template(x, fill, test_ok | {f.name for f in outs}, name, rest[4].loc)
    cm = CMatcherDef(
        name, match_formal, in_rest, outs, state, rest[3].chunks, fill, doc, x.module_name
    )
    env.define(Binding(name, "c-matcher", cm), e.loc)
    x.items.append(Definition(e.loc, "defcmatcher", name, cm))


def _def_defunmatcher(x, e, env):
    if len(e.items) < 5:
        x.err("defunmatcher needs input formals, output formals and a function", e.loc)
    name = x.need_symbol(e.items[1], "fun-matcher name")
    rest, doc = _take_doc(x, list(e.items[2:]))
    if len(rest) != 3:
        x.err("defunmatcher takes 3 operands after the name", e.loc)
    ins = _parse_template_formals(x, rest[0], env, "fun-matcher")
    if not ins:
        x.err("a fun-matcher needs at least the matched formal", rest[0].loc)
    outs = _parse_template_formals(x, rest[1], env, "fun-matcher")
    fn_expr = x.expand_expr(rest[2], env)
    fm = FunMatcherDef(name, ins, outs, fn_expr, doc=doc, origin=x.module_name)
    env.define(Binding(name, "fun-matcher", fm), e.loc)
    x.items.append(Definition(e.loc, "defunmatcher", name, fm))


_DEFINITION_FORMS = {
    "defun": _def_defun,
    "defclass": _def_defclass,
    "definstance": _def_definstance,
    "defselector": _def_defselector,
    "defprimitive": _def_defprimitive,
    "defciterator": _def_defciterator,
    "defcmatcher": _def_defcmatcher,
    "defunmatcher": _def_defunmatcher,
}


# --- export forms ---


def _exp_values(x, e, env):
    names = []
    for ne in e.items[1:]:
        name = x.need_symbol(ne, "exported name")
        env.export(name, ne.loc)
        names.append(name)
    x.items.append(ExportDirective(e.loc, "values", names))


def _exp_class(x, e, env):
    names = []
    for ne in e.items[1:]:
        name = x.need_symbol(ne, "exported class")
        b = env.lookup(name)
        if b is None or b.kind != "class":
            x.err(f"export_class of non-class {name}", ne.loc)
        env.export(name, ne.loc)
        names.append(name)
        for fld in b.payload.own_fields:
            if fld.name in env.bindings:
                env.export(fld.name, ne.loc)
                names.append(fld.name)
    x.items.append(ExportDirective(e.loc, "class", names))


def _exp_macro(x, e, env, kind="macro"):
    if len(e.items) != 3:
        x.err(f"export_{kind} takes a name and an expander", e.loc)
    name = x.need_symbol(e.items[1], "macro name")
    expander_name = x.need_symbol(e.items[2], "macro expander")
    b = env.lookup(expander_name)
    if b is None or b.kind != kind:
        x.err(
            f"export_{kind} expander must name a host-registered {kind}"
            f" ({expander_name} is not one)",
            e.items[2].loc,
        )
    if name != expander_name:
        env.define(Binding(name, kind, b.payload), e.loc)
    env.export(name, e.loc)
    x.items.append(ExportDirective(e.loc, kind, [name]))


def _exp_patmacro(x, e, env):
    _exp_macro(x, e, env, kind="patmacro")


def _exp_synonym(x, e, env):
    if len(e.items) != 3:
        x.err("export_synonym takes a new name and an existing name", e.loc)
    new = x.need_symbol(e.items[1], "synonym")
    old = x.need_symbol(e.items[2], "existing name")
    b = env.lookup(old)
    if b is None:
        x.err(f"export_synonym of unbound name {old}", e.items[2].loc)
    env.define(Binding(new, b.kind, b.payload), e.loc)
    env.export(new, e.loc)
    x.items.append(ExportDirective(e.loc, "synonym", [new, old]))


_EXPORT_FORMS = {
    "export_values": _exp_values,
    "export_value": _exp_values,
    "export_class": _exp_class,
    "export_macro": _exp_macro,
    "export_patmacro": _exp_patmacro,
    "export_synonym": _exp_synonym,
}


def expand_unit(sexprs, parent_env, module_name="<module>", host_version=""):
    """Expand one unit's s-expressions against a parent environment."""
    x = Expander(parent_env, module_name, host_version)
    return x.expand_unit(sexprs, parent_env)
