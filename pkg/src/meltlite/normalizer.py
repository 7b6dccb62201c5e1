"""A-normal form conversion with c-type checking.

Composite operands of applications, sends, primitive calls, matcher
inputs and field accesses move into fresh let-bound temporaries, so
every live intermediate value gets a frame slot the collector can see.
Every node comes out annotated with its checked c-type.
"""

from __future__ import annotations

from .errors import MeltTypeError
from .expander import (
    CTYPE_CSTRING,
    CTYPE_LONG,
    CTYPE_VALUE,
    CTYPE_VOID,
    Ast,
    CIterDef,
    CMatcherDef,
    Definition,
    FunMatcherDef,
    LetBinding,
    LocalSlot,
    MatchClause,
    Module,
    SAnd,
    SApply,
    SAssertMsg,
    SCIter,
    SCleared,
    SCodeChunk,
    SCompileWarning,
    SCond,
    SCppIf,
    SCStringLit,
    SCurrentEnv,
    SDebugMsg,
    SExit,
    SForever,
    SGetField,
    SHostIf,
    SIf,
    SInstance,
    SLambda,
    SLet,
    SLetrec,
    SListCtor,
    SLongLit,
    SMatch,
    SMulticall,
    SNil,
    SOr,
    SParentEnv,
    SPrimCall,
    SProgn,
    SPutFields,
    SQuoteConst,
    SReturn,
    SSend,
    SSetq,
    STupleCtor,
    SVar,
    TopExpr,
)
from . import matchc

ATOM_TYPES = (SVar, SNil, SLongLit, SCStringLit, SQuoteConst, SCleared)
CONSTRUCTIVE_TYPES = (SLambda, SInstance, STupleCtor, SListCtor)


def is_atom(node) -> bool:
    return isinstance(node, ATOM_TYPES)


def unify_ctypes(branches) -> object:
    """The common c-type of conditional branches: their shared c-type
    when they agree, :void (result discarded) otherwise."""
    assert branches
    first = branches[0]
    for ct in branches[1:]:
        if ct is not first:
            return CTYPE_VOID
    return first


class RoutineCtx:
    """Per-routine normalization state: fresh temporaries and the
    lexically enclosing loop labels."""

    def __init__(self, kind="function"):
        self.kind = kind  # function|init
        self.temps = []
        self.labels = []  # [(label, [exit result ctypes])]

    def new_temp(self, ctype) -> LocalSlot:
        slot = LocalSlot(f"$t{len(self.temps)}", ctype, "temp")
        slot.index = len(self.temps)
        self.temps.append(slot)
        return slot


class Normalizer:
    def __init__(self, host_version: str = ""):
        self.host_version = host_version

    def err(self, message, loc):
        raise MeltTypeError(message, loc)

    # -- positions --

    def norm_atom(self, e, ctx, prefix):
        """Operand position: yield an atom, let-binding composites."""
        node = self.norm_expr(e, ctx, prefix)
        if is_atom(node):
            return node
        if node.ctype is CTYPE_VOID:
            self.err("a :void expression cannot be an operand", node.loc)
        slot = ctx.new_temp(node.ctype)
        prefix.append(LetBinding(slot, node))
        return SVar(node.loc, slot.name, slot, ctype=node.ctype)

    def norm_result(self, e, ctx):
        """Result position: self-contained expression; composite
        primitive calls still go through a typed temporary."""
        prefix = []
        node = self.norm_expr(e, ctx, prefix)
        if isinstance(node, SPrimCall) and node.ctype is not CTYPE_VOID:
            slot = ctx.new_temp(node.ctype)
            prefix.append(LetBinding(slot, node))
            node = SVar(node.loc, slot.name, slot, ctype=node.ctype)
        if prefix:
            return SLet(node.loc, prefix, [node], ctype=node.ctype)
        return node

    def norm_statement(self, e, ctx):
        return self.norm_result(e, ctx)

    def norm_body(self, body, ctx, loc):
        """A body: side-effect statements plus a final result."""
        if not body:
            return [], CTYPE_VOID
        out = [self.norm_statement(b, ctx) for b in body]
        return out, out[-1].ctype

    # -- expression dispatch --

    def norm_expr(self, e, ctx, prefix):
        fn = getattr(self, "_n_" + type(e).__name__, None)
        if fn is None:
            self.err(f"cannot normalize {type(e).__name__}", getattr(e, "loc", None))
        return fn(e, ctx, prefix)

    # atoms

    def _n_SNil(self, e, ctx, prefix):
        e.ctype = CTYPE_VALUE
        return e

    def _n_SLongLit(self, e, ctx, prefix):
        e.ctype = CTYPE_LONG
        return e

    def _n_SCStringLit(self, e, ctx, prefix):
        e.ctype = CTYPE_CSTRING
        return e

    def _n_SQuoteConst(self, e, ctx, prefix):
        e.ctype = CTYPE_VALUE
        return e

    def _n_SCleared(self, e, ctx, prefix):
        assert e.ctype is not None
        return e

    def _n_SVar(self, e, ctx, prefix):
        b = e.binding
        if isinstance(b, LocalSlot):
            if b.ctype is None:
                self.err(f"variable {e.name} used before its type is known", e.loc)
            e.ctype = b.ctype
        else:
            e.ctype = CTYPE_VALUE  # module-level bindings are values
        return e

    def _n_SCurrentEnv(self, e, ctx, prefix):
        if ctx.kind != "init":
            self.err("the module environment is only visible at the top level", e.loc)
        e.ctype = CTYPE_VALUE
        return e

    def _n_SParentEnv(self, e, ctx, prefix):
        if ctx.kind != "init":
            self.err("the parent environment is only visible at the top level", e.loc)
        e.ctype = CTYPE_VALUE
        return e

    # calls

    def _n_SApply(self, e, ctx, prefix):
        fn = self.norm_atom(e.fn, ctx, prefix)
        if fn.ctype is not CTYPE_VALUE:
            self.err("only values can be applied", e.loc)
        args = [self.norm_atom(a, ctx, prefix) for a in e.args]
        if args and args[0].ctype is not CTYPE_VALUE:
            self.err("the first argument of an application must be a value", e.loc)
        e.fn, e.args = fn, args
        e.ctype = CTYPE_VALUE
        return e

    def _n_SSend(self, e, ctx, prefix):
        recv = self.norm_atom(e.recv, ctx, prefix)
        if recv.ctype is not CTYPE_VALUE:
            self.err("a message receiver must be a value", e.loc)
        e.recv = recv
        e.args = [self.norm_atom(a, ctx, prefix) for a in e.args]
        e.ctype = CTYPE_VALUE
        return e

    def _n_SPrimCall(self, e, ctx, prefix):
        args = []
        for a, f in zip(e.args, e.prim.formals):
            node = self.norm_atom(a, ctx, prefix)
            if node.ctype is not f.ctype:
                self.err(
                    f"primitive {e.prim.name} expects :{f.ctype.name} for {f.name},"
                    f" got :{node.ctype.name}",
                    node.loc,
                )
            args.append(node)
        e.args = args
        e.ctype = e.prim.result
        return e

    def _n_SCIter(self, e, ctx, prefix):
        inputs = []
        for a, f in zip(e.inputs, e.citer.start_formals):
            node = self.norm_atom(a, ctx, prefix)
            if node.ctype is not f.ctype:
                self.err(
                    f"c-iterator {e.citer.name} expects :{f.ctype.name} for {f.name},"
                    f" got :{node.ctype.name}",
                    node.loc,
                )
            inputs.append(node)
        e.inputs = inputs
        e.body = [self.norm_statement(b, ctx) for b in e.body]
        e.ctype = CTYPE_VOID
        return e

    def _n_SMulticall(self, e, ctx, prefix):
        inner = []
        call = self.norm_expr(e.call, ctx, inner)
        if inner:
            # operand temporaries of the call stay in front of the multicall
            prefix.extend(inner)
        e.call = call
        body, ct = self.norm_body(e.body, ctx, e.loc)
        e.body = body
        e.ctype = ct
        return e

    # binding forms

    def _n_SLet(self, e, ctx, prefix):
        out = []
        for b in e.bindings:
            if b.init is None:
                out.append(b)
                continue
            sub = []
            init = self.norm_expr(b.init, ctx, sub)
            out.extend(sub)
            if b.slot.ctype is None:  # synthesized binding adopts its initializer
                b.slot.ctype = init.ctype
            if init.ctype is not b.slot.ctype:
                self.err(
                    f"binding {b.slot.name} is :{b.slot.ctype.name} but its"
                    f" initializer is :{init.ctype.name}",
                    init.loc,
                )
            b.init = init
            out.append(b)
        e.bindings = out
        e.body, e.ctype = self.norm_body(e.body, ctx, e.loc)
        return e

    def _n_SLetrec(self, e, ctx, prefix):
        for b in e.bindings:
            sub = []
            init = self.norm_expr(b.init, ctx, sub)
            if sub:
                self.err(
                    f"letrec binding {b.slot.name} must stay constructive",
                    init.loc,
                )
            if not isinstance(init, CONSTRUCTIVE_TYPES):
                self.err(
                    f"letrec binding {b.slot.name} must be constructive", init.loc
                )
            if b.slot.ctype is not CTYPE_VALUE:
                self.err("letrec bindings are values", init.loc)
            b.init = init
        e.body, e.ctype = self.norm_body(e.body, ctx, e.loc)
        return e

    def _n_SSetq(self, e, ctx, prefix):
        sub = []
        node = self.norm_expr(e.expr, ctx, sub)
        prefix.extend(sub)
        if node.ctype is not e.slot.ctype:
            self.err(
                f"setq of :{e.slot.ctype.name} variable {e.slot.name} from"
                f" :{node.ctype.name}",
                e.loc,
            )
        e.expr = node
        e.ctype = CTYPE_VOID
        return e

    def _n_SLambda(self, e, ctx, prefix):
        inner = RoutineCtx("function")
        e.body, _ = self.norm_body(e.body, inner, e.loc)
        e.routine_temps = inner.temps
        e.ctype = CTYPE_VALUE
        return e

    # control

    def _truth_ok(self, node):
        if node.ctype is CTYPE_VOID:
            self.err("a :void expression cannot be a condition", node.loc)

    def _n_SIf(self, e, ctx, prefix):
        cond = self.norm_atom(e.cond, ctx, prefix)
        self._truth_ok(cond)
        then = self.norm_result(e.then, ctx)
        els = self.norm_result(e.els, ctx) if e.els is not None else None
        if els is None:
            ct = then.ctype
        else:
            ct = unify_ctypes([then.ctype, els.ctype])
        e.cond, e.then, e.els, e.ctype = cond, then, els, ct
        return e

    def _n_SProgn(self, e, ctx, prefix):
        e.body, e.ctype = self.norm_body(e.body, ctx, e.loc)
        return e

    def _n_SCond(self, e, ctx, prefix):
        node = self._desugar_cond(e.clauses, e.loc, ctx)
        return self.norm_expr(node, ctx, prefix)

    def _desugar_cond(self, clauses, loc, ctx):
        if not clauses:
            return SNil(loc)
        (test, body), rest = clauses[0], clauses[1:]
        if test is None:  # :else clause
            return SProgn(loc, list(body))
        if not body:
            # result is the satisfied test itself
            slot = LocalSlot("$cond", None, "local")
            return SLet(
                loc,
                [LetBinding(slot, test)],
                [
                    SIf(
                        loc,
                        SVar(loc, slot.name, slot),
                        SVar(loc, slot.name, slot),
                        self._desugar_cond(rest, loc, ctx),
                    )
                ],
            )
        return SIf(loc, test, SProgn(loc, list(body)), self._desugar_cond(rest, loc, ctx))

    def _n_SAnd(self, e, ctx, prefix):
        if not e.args:
            return self.norm_expr(SLongLit(e.loc, 1), ctx, prefix)
        node = e.args[-1]
        for test in reversed(e.args[:-1]):
            node = SIf(e.loc, test, node, None)
        # missing else branches clear to the then branch's c-type
        out = self.norm_expr(node, ctx, prefix)
        self._fill_and_else(out)
        return out

    def _fill_and_else(self, node):
        if isinstance(node, SIf) and node.els is None and node.ctype is not CTYPE_VOID:
            node.els = SCleared(node.loc, node.ctype)
            if isinstance(node.then, SIf):
                self._fill_and_else(node.then)

    def _n_SOr(self, e, ctx, prefix):
        if not e.args:
            return self.norm_expr(SNil(e.loc), ctx, prefix)
        if len(e.args) == 1:
            return self.norm_expr(e.args[0], ctx, prefix)
        # bind each alternative; the first true one is the result
        head = self.norm_atom(e.args[0], ctx, prefix)
        rest = self.norm_result(SOr(e.loc, e.args[1:]), ctx)
        ct = unify_ctypes([head.ctype, rest.ctype])
        then = head if ct is not CTYPE_VOID else SProgn(e.loc, [], ctype=CTYPE_VOID)
        node = SIf(e.loc, head, then, rest, ctype=ct)
        return node

    def _n_SForever(self, e, ctx, prefix):
        ctx.labels.append((e.label, []))
        e.body = [self.norm_statement(b, ctx) for b in e.body]
        _, exits = ctx.labels.pop()
        e.ctype = unify_ctypes(exits) if exits else CTYPE_VOID
        return e

    def _n_SExit(self, e, ctx, prefix):
        for label, exits in reversed(ctx.labels):
            if label == e.label:
                break
        else:
            self.err(f"exit label {e.label} is not lexically enclosed", e.loc)
        e.body, ct = self.norm_body(e.body, ctx, e.loc)
        exits.append(ct)
        e.result_ctype = ct
        e.ctype = CTYPE_VOID
        return e

    def _n_SReturn(self, e, ctx, prefix):
        if e.primary is not None:
            p = self.norm_atom(e.primary, ctx, prefix)
            if p.ctype is not CTYPE_VALUE:
                self.err("the primary result must be a value", e.loc)
            e.primary = p
        out = []
        for s in e.secondaries:
            node = self.norm_atom(s, ctx, prefix)
            if node.ctype is CTYPE_VOID:
                self.err("a :void expression cannot be a secondary result", node.loc)
            out.append(node)
        e.secondaries = out
        e.ctype = CTYPE_VOID
        return e

    # data forms

    def _n_SGetField(self, e, ctx, prefix):
        obj = self.norm_atom(e.obj, ctx, prefix)
        if obj.ctype is not CTYPE_VALUE:
            self.err("field access applies to values", e.loc)
        e.obj = obj
        e.ctype = CTYPE_VALUE
        return e

    def _n_SPutFields(self, e, ctx, prefix):
        obj = self.norm_atom(e.obj, ctx, prefix)
        if obj.ctype is not CTYPE_VALUE:
            self.err("field update applies to values", e.loc)
        e.obj = obj
        out = []
        for fld, v in e.assigns:
            node = self.norm_atom(v, ctx, prefix)
            if node.ctype is not CTYPE_VALUE:
                self.err("field contents are values", node.loc)
            out.append((fld, node))
        e.assigns = out
        e.ctype = CTYPE_VOID
        return e

    def _n_SInstance(self, e, ctx, prefix):
        out = []
        for fld, v in e.assigns:
            node = self.norm_atom(v, ctx, prefix)
            if node.ctype is not CTYPE_VALUE:
                self.err("field contents are values", node.loc)
            out.append((fld, node))
        e.assigns = out
        e.ctype = CTYPE_VALUE
        return e

    def _n_STupleCtor(self, e, ctx, prefix):
        e.items = [self._value_atom(i, ctx, prefix) for i in e.items]
        e.ctype = CTYPE_VALUE
        return e

    def _n_SListCtor(self, e, ctx, prefix):
        e.items = [self._value_atom(i, ctx, prefix) for i in e.items]
        e.ctype = CTYPE_VALUE
        return e

    def _value_atom(self, x, ctx, prefix):
        node = self.norm_atom(x, ctx, prefix)
        if node.ctype is not CTYPE_VALUE:
            self.err("aggregate components are values", node.loc)
        return node

    # templates and meta forms

    def _n_SCodeChunk(self, e, ctx, prefix):
        e.ctype = CTYPE_VOID
        return e

    def _n_SDebugMsg(self, e, ctx, prefix):
        val = self.norm_atom(e.val, ctx, prefix)
        if val.ctype is not CTYPE_VALUE:
            self.err("debug_msg shows a value", e.loc)
        msg = self.norm_atom(e.msg, ctx, prefix)
        if msg.ctype is not CTYPE_CSTRING:
            self.err("debug_msg message must be a raw string", e.loc)
        e.val, e.msg = val, msg
        e.ctype = CTYPE_VOID
        return e

    def _n_SAssertMsg(self, e, ctx, prefix):
        msg = self.norm_atom(e.msg, ctx, prefix)
        if msg.ctype is not CTYPE_CSTRING:
            self.err("assert_msg message must be a raw string", e.loc)
        cond = self.norm_atom(e.cond, ctx, prefix)
        self._truth_ok(cond)
        e.msg, e.cond = msg, cond
        e.ctype = CTYPE_VOID
        return e

    def _n_SCompileWarning(self, e, ctx, prefix):
        node = self.norm_result(e.expr, ctx)
        e.expr = node
        e.ctype = node.ctype
        return e

    def _n_SCppIf(self, e, ctx, prefix):
        then = self.norm_result(e.then, ctx)
        els = self.norm_result(e.els, ctx) if e.els is not None else None
        e.then, e.els = then, els
        e.ctype = unify_ctypes([then.ctype, els.ctype]) if els else then.ctype
        return e

    def _n_SHostIf(self, e, ctx, prefix):
        e.included = self.host_version.startswith(e.prefix)
        if e.included:
            e.body, e.ctype = self.norm_body(e.body, ctx, e.loc)
        else:
            e.body, e.ctype = [], CTYPE_VOID
        return e

    # pattern matching

    def _n_SMatch(self, e, ctx, prefix):
        subject = self.norm_atom(e.subject, ctx, prefix)
        if subject.ctype is CTYPE_VOID:
            self.err("cannot match a :void subject", e.loc)
        e.subject = subject
        body_cts = []
        for clause in e.clauses:
            slots = {s.name: s for s in clause.patvars}
            self._type_pattern(clause.pattern, subject.ctype, slots, ctx, prefix)
            for s in clause.patvars:
                if s.ctype is None:
                    s.ctype = CTYPE_VALUE
            clause.body = [self.norm_statement(b, ctx) for b in clause.body]
            body_cts.append(clause.body[-1].ctype if clause.body else CTYPE_VOID)
        e.ctype = unify_ctypes(body_cts) if body_cts else CTYPE_VOID
        return e

    def _type_pattern(self, pat, ctype, slots, ctx, prefix):
        if isinstance(pat, matchc.PWild):
            return
        if isinstance(pat, matchc.PVar):
            slot = slots[pat.name]
            if slot.ctype is None:
                slot.ctype = ctype
            elif slot.ctype is not ctype:
                self.err(
                    f"pattern variable {pat.name} is both :{slot.ctype.name}"
                    f" and :{ctype.name}",
                    pat.loc,
                )
            pat.slot = slot
            return
        if isinstance(pat, matchc.PConst):
            node = self.norm_atom(pat.expr, ctx, prefix)
            if node.ctype is not ctype:
                self.err(
                    f"constant pattern is :{node.ctype.name} but the matched"
                    f" position is :{ctype.name}",
                    pat.loc,
                )
            pat.expr = node
            return
        if isinstance(pat, matchc.PMatcher):
            m = pat.matcher
            if isinstance(m, CMatcherDef):
                subject_ct, ins, outs = m.match_formal.ctype, m.in_formals, m.out_formals
            else:
                subject_ct, ins, outs = (
                    m.in_formals[0].ctype,
                    m.in_formals[1:],
                    m.out_formals,
                )
            if subject_ct is not ctype:
                self.err(
                    f"matcher {m.name} matches :{subject_ct.name} things, not"
                    f" :{ctype.name}",
                    pat.loc,
                )
            inputs = []
            for a, f in zip(pat.inputs, ins):
                node = self.norm_atom(a, ctx, prefix)
                if node.ctype is not f.ctype:
                    self.err(
                        f"matcher {m.name} input {f.name} is :{f.ctype.name},"
                        f" got :{node.ctype.name}",
                        node.loc,
                    )
                inputs.append(node)
            pat.inputs = inputs
            for sub, f in zip(pat.subs, outs):
                self._type_pattern(sub, f.ctype, slots, ctx, prefix)
            return
        if isinstance(pat, matchc.PInstance):
            if ctype is not CTYPE_VALUE:
                self.err("instance patterns match values", pat.loc)
            for _fld, sub in pat.fields:
                self._type_pattern(sub, CTYPE_VALUE, slots, ctx, prefix)
            return
        if isinstance(pat, (matchc.PAnd, matchc.POr)):
            for sub in pat.subs:
                self._type_pattern(sub, ctype, slots, ctx, prefix)
            return
        self.err(f"unknown pattern {pat!r}", getattr(pat, "loc", None))


def normalize(ast, expected=None, host_version="", routine_kind="function"):
    """Normalize a single expression tree; mainly the test entry point."""
    n = Normalizer(host_version)
    ctx = RoutineCtx(routine_kind)
    node = n.norm_result(ast, ctx)
    if expected is not None and node.ctype is not expected:
        raise MeltTypeError(
            f"expected :{expected.name}, got :{node.ctype.name}", node.loc
        )
    return node


def normalize_module(module: Module, host_version="") -> Module:
    """Normalize every routine of an expanded module in place."""
    n = Normalizer(host_version)
    init_ctx = RoutineCtx("init")
    for item in module.items:
        if isinstance(item, TopExpr):
            item.ast = n.norm_statement(item.ast, init_ctx)
        elif isinstance(item, Definition):
            if item.kind == "defun":
                fctx = RoutineCtx("function")
                fn = item.payload
                fn.body, _ = n.norm_body(fn.body, fctx, item.loc)
                fn.routine_temps = fctx.temps
            elif item.kind in ("definstance", "defselector"):
                # field initializers run inside the start routine; their
                # operand temporaries are hoisted in front of the fills
                payload = item.payload
                prefix = []
                out = []
                for fld, v in payload.inits:
                    node = n.norm_atom(v, init_ctx, prefix)
                    if node.ctype is not CTYPE_VALUE:
                        n.err("instance fields hold values", item.loc)
                    out.append((fld, node))
                payload.inits = out
                payload.init_prefix = prefix
    module.init_temps = init_ctx.temps
    return module
