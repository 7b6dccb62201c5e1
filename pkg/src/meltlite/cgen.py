"""C99 emission for normalized, match-compiled modules.

Every module becomes one start routine plus one routine per function,
each with an explicit chained call frame zeroed on entry (the
collector's root set), template expansion for code chunks, primitives,
c-iterators and c-matchers, guarded #line directives, and splitting
into several units past a routine-count threshold.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import matchc
from .errors import MeltEmitError
from .expander import (
    CTYPE_CSTRING,
    CTYPE_LONG,
    CTYPE_VALUE,
    CTYPE_VOID,
    ClassDef,
    Definition,
    ExportDirective,
    FunctionDef,
    InstanceDef,
    LocalSlot,
    Module,
    PredefValue,
    SelectorDef,
    SApply,
    SAssertMsg,
    SCIter,
    SCleared,
    SCodeChunk,
    SCompileWarning,
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
from .reader import MsRef, MsText

LINE_GUARD = "MELTLITE_WITH_LINE"
FRAME_MAX_SLOTS = 1024


@dataclass
class EmitCtx:
    module_name: str = "module"
    line_directives: bool = True
    split_threshold: int = 64
    host_version: str = ""
    predefined_map: dict = field(default_factory=dict)
    line_guard: str = LINE_GUARD

    def __post_init__(self):
        self.state_counters = {}

    def next_state(self, name: str) -> int:
        n = self.state_counters.get(name, 0) + 1
        self.state_counters[name] = n
        return n


def mangle(name: str) -> str:
    out = []
    for c in name:
        out.append(c if c.isalnum() and c.isascii() else "_")
    text = "".join(out)
    if not text or text[0].isdigit():
        text = "_" + text
    return text


def c_string_literal(s: str) -> str:
    out = ['"']
    for ch in s:
        if ch == "\\":
            out.append("\\\\")
        elif ch == '"':
            out.append('\\"')
        elif ch == "\n":
            out.append("\\n")
        elif ch == "\t":
            out.append("\\t")
        elif ch == "\r":
            out.append("\\r")
        elif ord(ch) < 32 or ord(ch) > 126:
            out.append("\\%03o" % ord(ch))
        else:
            out.append(ch)
    out.append('"')
    return "".join(out)


def c_long_literal(v: int) -> str:
    if v == -(2**63):
        return "(-9223372036854775807L - 1L)"
    return f"{v}L"


def descr_string(formals) -> str:
    """Secondary-argument descriptor: one character per formal after the
    first (which is positional)."""
    return "".join(f.ctype.descr_char for f in formals[1:])


# --- template expansion ---


def expand_template(chunks, subst, state=None, where="template", loc=None):
    """Replace $refs in a macro-string: the state symbol expands to a
    unique NAME__n identifier, other refs to their access text."""
    out = []
    state_text = None
    for ch in chunks:
        if isinstance(ch, MsText):
            out.append(ch.text)
            continue
        if state is not None and ch.name == state[0]:
            if state_text is None:
                ctx = state[1]
                state_text = f"{ch.spelling}__{ctx.next_state(ch.name)}"
            out.append(state_text)
            continue
        if ch.name not in subst:
            raise MeltEmitError(
                f"{where} references unknown symbol {ch.name}", loc
            )
        out.append(subst[ch.name])
    return "".join(out)


# --- lambda lifting ---


@dataclass(eq=False)
class LiftedLambda:
    node: SLambda
    c_name: str
    captures: list  # [LocalSlot] in capture order


def free_value_slots(node, bound, acc, order):
    """Free LocalSlot references of a lambda body (values only)."""
    from .expander import iter_ast_children

    if isinstance(node, SVar):
        if isinstance(node.binding, LocalSlot):
            slot = node.binding
            if slot not in bound and slot not in acc:
                acc.add(slot)
                order.append(slot)
        return
    if isinstance(node, SLambda):
        inner_bound = set(bound) | set(node.formals) | _lambda_locals(node)
        for b in node.body:
            free_value_slots(b, inner_bound, acc, order)
        return
    for child in iter_ast_children(node):
        free_value_slots(child, bound, acc, order)


def _lambda_locals(node):
    """Slots bound anywhere inside a node (let, multicall, citers, patterns)."""
    from .expander import iter_ast_children

    out = set()

    def walk(n):
        if isinstance(n, (SLet, SLetrec)):
            for b in n.bindings:
                out.add(b.slot)
        elif isinstance(n, SMulticall):
            out.update(n.formals)
        elif isinstance(n, SCIter):
            out.update(n.locals)
        elif isinstance(n, SMatch):
            for c in n.clauses:
                out.update(c.patvars)
        for child in iter_ast_children(n):
            walk(child)

    walk(node)
    return out


# --- module emission ---


class ModuleEmitter:
    def __init__(self, module: Module, ctx: EmitCtx):
        self.module = module
        self.ctx = ctx
        self.mod_c = mangle(module.name)
        self.modvals = []  # (kind, payload/key, comment)
        self.modval_ix = {}  # key -> index
        self.lambdas = []  # LiftedLambda
        self.lambda_ix = {}
        self.routine_names = set()
        self.warnings = []

    # -- module value slots --

    def _modval(self, key, comment):
        if key in self.modval_ix:
            return self.modval_ix[key]
        ix = len(self.modvals)
        self.modval_ix[key] = ix
        self.modvals.append((key, comment))
        return ix

    def modval_text(self, ix):
        return f"meltlite_modvals_{self.mod_c}[{ix}]"

    def quote_slot(self, node: SQuoteConst) -> int:
        key = ("quote", node.kind, node.value)
        return self._modval(key, f"'{node.value}")

    def global_access(self, payload, loc=None) -> str:
        """Access text of a module-level value binding."""
        slot = getattr(payload, "predef_slot", 0)
        if slot:
            name = getattr(payload, "name", "?")
            macro = "MELTLITE_PREDEF_" + name.upper()
            return f"meltlite_predef ({macro})"
        if getattr(payload, "origin", None) == self.module.name:
            ix = self._modval(("def", id(payload)), payload.name)
            return self.modval_text(ix)
        # imported: resolved once from the parent environment
        ix = self._modval(("import", payload.name), f"import {payload.name}")
        return self.modval_text(ix)

    def lift_lambda(self, node: SLambda) -> LiftedLambda:
        if id(node) in self.lambda_ix:
            return self.lambda_ix[id(node)]
        hint = mangle(node.name_hint)
        c_name = f"meltlite_routlam_{self.mod_c}_{len(self.lambdas)}_{hint}"
        acc, order = set(), []
        bound = set(node.formals) | _lambda_locals(node)
        for b in node.body:
            free_value_slots(b, bound, acc, order)
        for slot in order:
            if slot.ctype is not CTYPE_VALUE:
                raise MeltEmitError(
                    f"cannot close over {slot.name}: only values are captured",
                    node.loc,
                )
        lifted = LiftedLambda(node, c_name, order)
        self.lambda_ix[id(node)] = lifted
        self.lambdas.append(lifted)
        return lifted

    # -- emission --

    def emit(self):
        """Emit all units; returns [(file name, text)].

        Function and lambda routines come first so the start routine's
        constant pool covers every module value they referenced; unit 0
        still opens with the start routine.
        """
        routines = []
        for item in self.module.items:
            if isinstance(item, Definition) and item.kind == "defun":
                fn = item.payload
                r = RoutineEmitter(
                    self,
                    f"meltlite_routfun_{self.mod_c}_{mangle(fn.name)}",
                    kind="function",
                    formals=fn.formals,
                    loc=item.loc,
                )
                r.emit_function(fn)
                routines.append(r)
        self._drain_lambdas(routines)
        first_loc = next(
            (it.loc for it in self.module.items if it.loc is not None), None
        )
        start = RoutineEmitter(
            self,
            f"meltlite_start_{self.mod_c}",
            kind="start",
            formals=[],
            loc=first_loc,
        )
        start.emit_start_body(self.module)
        self._drain_lambdas(routines)
        start.finalize_start()
        return self._write_units([start] + routines)

    def _drain_lambdas(self, routines):
        done = getattr(self, "_lambdas_done", 0)
        while done < len(self.lambdas):
            lifted = self.lambdas[done]
            done += 1
            r = RoutineEmitter(
                self,
                lifted.c_name,
                kind="lambda",
                formals=lifted.node.formals,
                loc=lifted.node.loc,
            )
            r.emit_lambda(lifted)
            routines.append(r)
        self._lambdas_done = done

    def routine_c_name_for(self, fn: FunctionDef) -> str:
        return f"meltlite_routfun_{self.mod_c}_{mangle(fn.name)}"

    def _write_units(self, routines):
        thr = max(1, self.ctx.split_threshold)
        chunks = [routines[i : i + thr] for i in range(0, len(routines), thr)] or [[]]
        decls = self._shared_decls(routines)
        units = []
        nmv = max(1, len(self.modvals))
        for uix, chunk in enumerate(chunks):
            lines = []
            lines.append(
                f"/* {self.module.name}+{uix:02d}.c : generated by meltlite"
                f" from {self.module.name} */"
            )
            lines.append('#include "meltlite_runtime.h"')
            lines.append('#include "meltlite_hostir.h"')
            lines.append("")
            if uix == 0:
                lines.append(f"/* module value roots ({len(self.modvals)} used) */")
                lines.append(
                    f"meltlite_value_t meltlite_modvals_{self.mod_c}[{nmv}];"
                )
            else:
                lines.append(
                    f"extern meltlite_value_t meltlite_modvals_{self.mod_c}[{nmv}];"
                )
            lines.append("")
            lines.extend(decls)
            lines.append("")
            for r in chunk:
                lines.extend(r.lines)
                lines.append("")
            units.append((f"{self.module.name}+{uix:02d}.c", "\n".join(lines) + "\n"))
        return units

    def _shared_decls(self, routines):
        out = ["/* routine declarations */"]
        for r in routines:
            if r.kind == "start":
                out.append(
                    f"meltlite_value_t {r.c_name} (meltlite_ctx_t *, meltlite_value_t);"
                )
            else:
                out.append(
                    f"meltlite_value_t {r.c_name} (meltlite_value_t, meltlite_value_t,"
                    " const char *, union meltlite_arg_un *,"
                    " const char *, union meltlite_arg_un *);"
                )
        return out


class RoutineEmitter:
    def __init__(self, mod: ModuleEmitter, c_name, kind, formals, loc):
        self.mod = mod
        self.ctx = mod.ctx
        self.c_name = c_name
        self.kind = kind  # start|function|lambda
        self.formals = formals
        self.loc = loc
        self.body_lines = []
        self.lines = []
        self.value_slots = []  # labels
        self.value_ix = {}  # id(slotobj) -> index
        self.stuff_members = []  # (member, ctype, label)
        self.stuff_ix = {}
        self.flag_members = {}
        self.captures = {}  # id(slot) -> closed index
        self.label_n = 0
        self.blk_n = 0
        self.cur_line = None
        self.names = [{}]  # template scope: name -> access text
        self.loop_env = []  # (label, end label, dest, ctype)
        self._funm_out_ids = {}

    # -- frame slots --

    def value_slot(self, obj, label) -> str:
        key = id(obj)
        if key not in self.value_ix:
            self.value_ix[key] = len(self.value_slots)
            self.value_slots.append(label)
        return f"meltfram__.mcfr_varptr[{self.value_ix[key]}]"

    def stuff_slot(self, obj, ctype, label) -> str:
        key = id(obj)
        if key not in self.stuff_ix:
            member = f"mcfn_{len(self.stuff_members)}_{mangle(label)}"
            self.stuff_ix[key] = member
            self.stuff_members.append((member, ctype, label))
        return f"meltfram__.{self.stuff_ix[key]}"

    def flag_slot(self, data_id) -> str:
        if data_id not in self.flag_members:
            self.flag_members[data_id] = f"mcfl_{len(self.flag_members)}"
        return f"meltfram__.{self.flag_members[data_id]}"

    def slot_access(self, slot: LocalSlot) -> str:
        if id(slot) in self.captures:
            return (
                f"meltlite_closure_closed (meltfram__.mcfr_clos,"
                f" {self.captures[id(slot)]})"
            )
        if slot.ctype is CTYPE_VALUE:
            return self.value_slot(slot, slot.name)
        return self.stuff_slot(slot, slot.ctype, slot.name)

    # -- output helpers --

    def out(self, text, loc=None):
        if loc is not None and self.ctx.line_directives:
            if self.cur_line != (loc.file, loc.line):
                self.cur_line = (loc.file, loc.line)
                self.body_lines.append(f"#ifdef {self.ctx.line_guard}")
                self.body_lines.append(f'#line {loc.line} {c_string_literal(loc.file)}')
                self.body_lines.append(f"#endif /*{self.ctx.line_guard}*/")
        for ln in text.split("\n"):
            self.body_lines.append(" " + ln if ln else ln)

    def fresh_label(self, base) -> str:
        self.label_n += 1
        return f"lab{base}_{self.label_n}_"

    def fresh_blk(self) -> str:
        self.blk_n += 1
        return f"_{self.blk_n}_"

    def err(self, message, loc=None):
        raise MeltEmitError(message, loc)

    # -- scope for template references --

    def push_names(self, slots):
        top = dict(self.names[-1])
        for s in slots:
            top[s.name] = self.slot_access(s)
        self.names.append(top)

    def pop_names(self):
        self.names.pop()

    def name_subst(self):
        return self.names[-1]

    # -- atoms --

    def atom(self, node) -> str:
        if isinstance(node, SVar):
            b = node.binding
            if isinstance(b, LocalSlot):
                return self.slot_access(b)
            return self.mod.global_access(b, node.loc)
        if isinstance(node, SNil):
            return "NULL"
        if isinstance(node, SLongLit):
            return c_long_literal(node.value)
        if isinstance(node, SCStringLit):
            return c_string_literal(node.value)
        if isinstance(node, SCleared):
            return node.ctype.cleared_literal or "NULL"
        if isinstance(node, SQuoteConst):
            return self.mod.modval_text(self.mod.quote_slot(node))
        if isinstance(node, SCurrentEnv):
            return self.curenv_text
        if isinstance(node, SParentEnv):
            return self.parentenv_text
        self.err(f"operand is not an atom: {type(node).__name__}", getattr(node, "loc", None))

    def truth(self, node) -> str:
        text = self.atom(node)
        fmt = node.ctype.truth_fmt or "(%s)"
        return fmt % text

    # -- expressions --

    def emit_expr(self, node, dest):
        """Emit statements computing node; store its result into the
        dest access text (None discards)."""
        fn = getattr(self, "_e_" + type(node).__name__, None)
        if fn is None:
            self.err(f"cannot emit {type(node).__name__}", getattr(node, "loc", None))
        fn(node, dest)

    def assign_atom(self, node, dest):
        if dest is not None:
            self.out(f"{dest} = {self.atom(node)};", node.loc)

    _e_SVar = assign_atom
    _e_SNil = assign_atom
    _e_SLongLit = assign_atom
    _e_SCStringLit = assign_atom
    _e_SCleared = assign_atom
    _e_SQuoteConst = assign_atom
    _e_SCurrentEnv = assign_atom
    _e_SParentEnv = assign_atom

    def _marshal_call(self, call, dest, resdescr="", restab="(union meltlite_arg_un *)0"):
        blk = self.fresh_blk()
        if isinstance(call, SApply):
            callee = self.atom(call.fn)
            args = call.args
            entry = "meltlite_apply"
            first = self.atom(args[0]) if args else "NULL"
            rest = args[1:]
        else:
            callee = self.mod.global_access(call.sel, call.loc)
            entry = "meltlite_send"
            first = self.atom(call.recv)
            rest = call.args
        descr = "".join(a.ctype.descr_char for a in rest)
        self.out("{", call.loc)
        if rest:
            self.out(f" union meltlite_arg_un argtab{blk}[{len(rest)}];")
            self.out(f" memset (argtab{blk}, 0, sizeof (argtab{blk}));")
            for i, a in enumerate(rest):
                self.out(f" argtab{blk}[{i}].{a.ctype.union_member} = {self.atom(a)};")
            argtab = f"argtab{blk}"
        else:
            argtab = "(union meltlite_arg_un *)0"
        target = f"{dest} = " if dest is not None else "(void) "
        self.out(
            f" {target}{entry} ({callee}, {first}, {c_string_literal(descr)},"
            f" {argtab}, {c_string_literal(resdescr) if resdescr else '(const char *)0'},"
            f" {restab});"
        )
        self.out("}")

    def _e_SApply(self, node, dest):
        self._marshal_call(node, dest)

    def _e_SSend(self, node, dest):
        self._marshal_call(node, dest)

    def _e_SMulticall(self, node, dest):
        blk = self.fresh_blk()
        primary = node.formals[0]
        secondaries = node.formals[1:]
        resdescr = "".join(f.ctype.descr_char for f in secondaries)
        self.push_names(node.formals)
        if secondaries:
            self.out("{", node.loc)
            self.out(f" union meltlite_arg_un restab{blk}[{len(secondaries)}];")
            self.out(f" memset (restab{blk}, 0, sizeof (restab{blk}));")
            self._marshal_call(node.call, self.slot_access(primary), resdescr, f"restab{blk}")
            for i, f in enumerate(secondaries):
                self.out(
                    f" {self.slot_access(f)} = restab{blk}[{i}].{f.ctype.union_member};"
                )
            self.out("}")
        else:
            self._marshal_call(node.call, self.slot_access(primary))
        self.emit_body(node.body, dest)
        self.pop_names()

    def _e_SPrimCall(self, node, dest):
        subst = {
            f.name: self.atom(a) for f, a in zip(node.prim.formals, node.args)
        }
        frag = expand_template(
            node.prim.expansion, subst, None, f"primitive {node.prim.name}", node.loc
        )
        if node.ctype is CTYPE_VOID:
            self.out(f"{frag};", node.loc)
        elif dest is not None:
            self.out(f"{dest} = {frag};", node.loc)
        else:
            self.out(f"(void) ({frag});", node.loc)

    def _e_SLet(self, node, dest):
        slots = [b.slot for b in node.bindings]
        for b in node.bindings:
            access = self.slot_access(b.slot)
            if b.init is not None:
                self.emit_expr(b.init, access)
            else:
                self.out(f"{access} = {b.slot.ctype.cleared_literal or 'NULL'};", node.loc)
        self.push_names(slots)
        self.emit_body(node.body, dest)
        self.pop_names()

    def _e_SLetrec(self, node, dest):
        slots = [b.slot for b in node.bindings]
        self.push_names(slots)
        patches = []
        for b in node.bindings:
            access = self.slot_access(b.slot)
            if isinstance(b.init, SLambda):
                lifted = self.mod.lift_lambda(b.init)
                self._make_closure(b.init, lifted, access, defer=slots, patches=patches)
            else:
                self.emit_expr(b.init, access)
        for clos_access, ix, slot in patches:
            self.out(
                f"meltlite_closure_set_closed ({clos_access}, {ix},"
                f" {self.slot_access(slot)});"
            )
        self.emit_body(node.body, dest)
        self.pop_names()

    def _make_closure(self, node, lifted, dest, defer=(), patches=None):
        self.out(
            f"{dest} = meltlite_new_closure ({lifted.c_name},"
            f" {c_string_literal(descr_string(node.formals))}, {len(lifted.captures)});",
            node.loc,
        )
        for ix, slot in enumerate(lifted.captures):
            if slot in defer:
                patches.append((dest, ix, slot))
            else:
                self.out(
                    f"meltlite_closure_set_closed ({dest}, {ix}, {self.slot_access(slot)});"
                )

    def _e_SLambda(self, node, dest):
        lifted = self.mod.lift_lambda(node)
        if dest is None:
            return
        self._make_closure(node, lifted, dest)

    def _e_SIf(self, node, dest):
        self.out(f"if ({self.truth(node.cond)}) {{", node.loc)
        branch_dest = dest if node.ctype is not CTYPE_VOID else None
        self.emit_expr(node.then, branch_dest if node.then.ctype is not CTYPE_VOID else None)
        if node.els is not None:
            self.out("} else {")
            self.emit_expr(node.els, branch_dest if node.els.ctype is not CTYPE_VOID else None)
        elif branch_dest is not None:
            self.out("} else {")
            self.out(f"{branch_dest} = {node.ctype.cleared_literal or 'NULL'};")
        self.out("}")

    def _e_SProgn(self, node, dest):
        self.emit_body(node.body, dest)

    def emit_body(self, body, dest):
        if not body:
            if dest is not None:
                self.out(f"{dest} = NULL;")
            return
        for stmt in body[:-1]:
            self.emit_expr(stmt, None)
        last = body[-1]
        self.emit_expr(last, dest if last.ctype is not CTYPE_VOID else None)

    def _e_SForever(self, node, dest):
        end = self.fresh_label("loopend")
        self.loop_env.append((node.label, end, dest, node.ctype))
        self.out("for (;;) {", node.loc)
        for stmt in node.body:
            self.emit_expr(stmt, None)
        self.out("}")
        self.out(f"{end}:;")
        self.loop_env.pop()

    def _e_SExit(self, node, dest):
        for label, end, loop_dest, loop_ct in reversed(self.loop_env):
            if label == node.label:
                break
        else:
            self.err(f"exit label {node.label} not in scope", node.loc)
        if node.body:
            for stmt in node.body[:-1]:
                self.emit_expr(stmt, None)
            last = node.body[-1]
            want = loop_dest if (loop_ct is not CTYPE_VOID and last.ctype is loop_ct) else None
            self.emit_expr(last, want)
        self.out(f"goto {end};", node.loc)

    def _e_SSetq(self, node, dest):
        self.emit_expr(node.expr, self.slot_access(node.slot))

    def _e_SReturn(self, node, dest):
        lab = self.fresh_label("retdone")
        if node.secondaries:
            self.out("if (xresdescr_ && xrestab_) {", node.loc)
            for i, s in enumerate(node.secondaries):
                ch = s.ctype.descr_char
                self.out(f" if (xresdescr_[{i}] != '{ch}') goto {lab};")
                self.out(f" xrestab_[{i}].{s.ctype.union_member} = {self.atom(s)};")
            self.out("}")
            self.out(f"{lab}:;")
        prim = self.atom(node.primary) if node.primary is not None else "NULL"
        self.out(f"retval_ = {prim};", node.loc)
        self.out("goto labend_;")

    def _e_SGetField(self, node, dest):
        obj = self.atom(node.obj)
        if node.safe:
            cls = self.mod.global_access(node.fld.owner, node.loc)
            text = f"meltlite_get_field_safe ({obj}, {cls}, {node.fld.index})"
        else:
            text = f"meltlite_ufield ({obj}, {node.fld.index})"
        if dest is not None:
            self.out(f"{dest} = {text};", node.loc)
        else:
            self.out(f"(void) ({text});", node.loc)

    def _e_SPutFields(self, node, dest):
        obj = self.atom(node.obj)
        for fld, v in node.assigns:
            if node.safe:
                cls = self.mod.global_access(fld.owner, node.loc)
                self.out(
                    f"meltlite_put_field_safe ({obj}, {cls}, {fld.index},"
                    f" {self.atom(v)});",
                    node.loc,
                )
            else:
                self.out(
                    f"meltlite_put_field_unsafe ({obj}, {fld.index}, {self.atom(v)});",
                    node.loc,
                )

    def _e_SInstance(self, node, dest):
        if dest is None:
            return
        cls = self.mod.global_access(node.cls, node.loc)
        self.out(f"{dest} = meltlite_new_instance ({cls});", node.loc)
        for fld, v in node.assigns:
            self.out(
                f"meltlite_put_field_unsafe ({dest}, {fld.index}, {self.atom(v)});"
            )

    def _e_STupleCtor(self, node, dest):
        if dest is None:
            return
        discr = self.predef_text("discr_multiple")
        self.out(
            f"{dest} = meltlite_new_tuple ({discr}, {len(node.items)});", node.loc
        )
        for i, v in enumerate(node.items):
            self.out(f"meltlite_tuple_put ({dest}, {i}, {self.atom(v)});")

    def _e_SListCtor(self, node, dest):
        if dest is None:
            return
        discr = self.predef_text("discr_list")
        self.out(f"{dest} = meltlite_new_list ({discr});", node.loc)
        for v in node.items:
            self.out(f"meltlite_list_append ({dest}, {self.atom(v)});")

    def predef_text(self, name):
        return f"meltlite_predef (MELTLITE_PREDEF_{name.upper()})"

    def _e_SCodeChunk(self, node, dest):
        frag = expand_template(
            node.chunks,
            self.name_subst(),
            (node.state, self.ctx),
            "code chunk",
            node.loc,
        )
        self.out(f"{frag};", node.loc)

    def _e_SDebugMsg(self, node, dest):
        loctext = c_string_literal(f"{node.loc.file}:{node.loc.line}" if node.loc else "?")
        self.out(
            f"if (meltlite_debug_enabled ()) meltlite_debug_msg ({loctext},"
            f" {self.atom(node.msg)}, {self.atom(node.val)});",
            node.loc,
        )

    def _e_SAssertMsg(self, node, dest):
        loctext = c_string_literal(f"{node.loc.file}:{node.loc.line}" if node.loc else "?")
        self.out(
            f"if (!{self.truth(node.cond)}) meltlite_assert_failed"
            f" ({self.atom(node.msg)}, {loctext});",
            node.loc,
        )

    def _e_SCompileWarning(self, node, dest):
        where = f"{node.loc.file}:{node.loc.line}" if node.loc else "?"
        self.mod.warnings.append(f"meltlite: warning: {node.msg} [{where}]")
        self.emit_expr(node.expr, dest)

    def _e_SCppIf(self, node, dest):
        self.body_lines.append(f"#if {node.symbol}")
        self.emit_expr(node.then, dest if node.then.ctype is not CTYPE_VOID else None)
        self.body_lines.append("#else")
        if node.els is not None:
            self.emit_expr(node.els, dest if node.els.ctype is not CTYPE_VOID else None)
        elif dest is not None:
            self.out(f"{dest} = {node.ctype.cleared_literal or 'NULL'};")
        self.body_lines.append(f"#endif /*{node.symbol}*/")

    def _e_SHostIf(self, node, dest):
        if getattr(node, "included", False):
            self.out(f"/* host version matches {node.prefix!r} */", node.loc)
            self.emit_body(node.body, dest)

    def _e_SCIter(self, node, dest):
        subst = dict(self.name_subst())
        for f, a in zip(node.citer.start_formals, node.inputs):
            subst[f.name] = self.atom(a)
        self.push_names(node.locals)
        for s in node.locals:
            subst[s.name] = self.slot_access(s)
            self.out(f"{self.slot_access(s)} = {s.ctype.cleared_literal or 'NULL'};")
        # one state number covers both expansions of this occurrence
        state = (node.citer.state, _FixedCtx(self.ctx.next_state(node.citer.state)))
        before = expand_template(
            node.citer.before, subst, state, f"c-iterator {node.citer.name}", node.loc
        )
        self.out(before, node.loc)
        for stmt in node.body:
            self.emit_expr(stmt, None)
        after = expand_template(
            node.citer.after, subst, state, f"c-iterator {node.citer.name}", node.loc
        )
        self.out(after)
        self.pop_names()

    # -- match emission --

    def _e_SMatch(self, node, dest):
        g = node.graph
        if g is None:
            self.err("match was not compiled to a graph", node.loc)
        mk = self.fresh_blk()
        subject_text = self.atom(node.subject)
        data_access = {g.root: subject_text}
        # pattern variables map onto their clause slots
        for ci, clause in enumerate(node.clauses):
            for slot in clause.patvars:
                d_id = g.clause_patvars[ci].get(slot.name)
                if d_id is not None:
                    data_access[d_id] = self.slot_access(slot)
        for d_id, d in g.data.items():
            if d_id in data_access:
                continue
            if d.role == "flag":
                data_access[d_id] = self.flag_slot(d_id)
            elif d.role in ("extracted", "patvar"):
                obj = d
                if d.ctype is CTYPE_VALUE:
                    data_access[d_id] = self.value_slot(obj, f"m{mk}d{d_id}")
                else:
                    data_access[d_id] = self.stuff_slot(obj, d.ctype, f"m{mk}d{d_id}")
        reachable = g.reachable()
        self.out(f"/* match{mk} on {subject_text} */", node.loc)
        # clear the match data and flags ahead of any clause
        for d_id in sorted(data_access):
            d = g.data[d_id]
            if d_id == g.root:
                continue
            if d.role == "flag":
                self.out(f"{data_access[d_id]} = 0;")
            else:
                self.out(
                    f"{data_access[d_id]} = {(d.ctype.cleared_literal if d.ctype else '') or 'NULL'};"
                )
        end_lab = f"labm{mk}end_"
        nomatch_lab = f"labm{mk}fail_"
        used_nomatch = [False]

        def target(t):
            if t is None:
                used_nomatch[0] = True
                return nomatch_lab
            return f"labm{mk}s{t}_"

        if g.entry is not None:
            self.out(f"goto {target(g.entry)};")
        else:
            used_nomatch[0] = True
            self.out(f"goto {nomatch_lab};")
        for sid in sorted(reachable):
            step = g.steps[sid]
            self.out(f"labm{mk}s{sid}_:;")
            if isinstance(step, matchc.TestStep):
                cond = self._pred_text(step.pred, data_access, node.loc)
                self.out(f"if ({cond}) goto {target(step.then)};")
                self.out(f"goto {target(step.els)};")
            elif isinstance(step, matchc.FillStep):
                self._fill_text(step.action, data_access, node.loc)
                self.out(f"goto {target(step.next)};")
            elif isinstance(step, matchc.SetFlagStep):
                self.out(f"{data_access[step.flag]} = 1;")
                self.out(f"goto {target(step.next)};")
            elif isinstance(step, matchc.FlagConjStep):
                conj = " && ".join(data_access[f] for f in step.flags)
                self.out(f"{data_access[step.flag]} = ({conj});")
                self.out(f"goto {target(step.next)};")
            elif isinstance(step, matchc.SuccessStep):
                clause = node.clauses[step.clause]
                self.out(f"/* clause {step.clause} */")
                self.push_names(clause.patvars)
                body_dest = dest if node.ctype is not CTYPE_VOID else None
                self.emit_body(clause.body, body_dest)
                self.pop_names()
                self.out(f"goto {end_lab};")
        if used_nomatch[0]:
            self.out(f"{nomatch_lab}:;")
            if dest is not None and node.ctype is not CTYPE_VOID:
                self.out(f"{dest} = {node.ctype.cleared_literal or 'NULL'};")
        self.out(f"{end_lab}:;")

    def _pred_text(self, p, data, loc):
        if isinstance(p, matchc.PredMatcher):
            m = p.matcher
            if hasattr(m, "test"):  # c-matcher
                subst = {m.match_formal.name: data[p.data]}
                for f, a in zip(m.in_formals, p.inputs):
                    subst[f.name] = self.atom(a)
                return (
                    "("
                    + expand_template(
                        m.test, subst, (m.state, self.ctx), f"c-matcher {m.name}", loc
                    )
                    + ")"
                )
            return self._funmatcher_call(m, p, data, loc)
        if isinstance(p, matchc.PredIsInstance):
            cls = self.mod.global_access(p.cls, loc)
            return f"meltlite_is_instance ({data[p.data]}, {cls})"
        if isinstance(p, matchc.PredIdentData):
            return f"({data[p.data]} == {data[p.other]})"
        if isinstance(p, matchc.PredIdentConst):
            return f"({data[p.data]} == {self.atom(p.atom)})"
        if isinstance(p, matchc.PredFlag):
            return f"({data[p.flag]})"
        self.err(f"unknown predicate {p!r}", loc)

    def _funmatcher_call(self, m, p, data, loc):
        """Apply the matching function; secondaries land in the output
        data slots, the primary decides the test."""
        blk = self.fresh_blk()
        if not hasattr(self, "_funm_scratch"):
            self._funm_scratch = object()
        scratch = self.value_slot(self._funm_scratch, "funmres_")
        fnatom = self.atom(m.fn_expr)
        ins = [data[p.data]] + [self.atom(a) for a in p.inputs]
        in_descr = "".join(f.ctype.descr_char for f in m.in_formals)
        outs = self._funm_out_ids.get((id(m), p.data), [])
        out_descr = "".join(f.ctype.descr_char for f in m.out_formals)
        # marshaling needs statements: emit a helper block before the test
        self.out("{")
        self.out(f" union meltlite_arg_un fmarg{blk}[{max(1, len(ins))}];")
        self.out(f" union meltlite_arg_un fmres{blk}[{max(1, len(outs))}];")
        self.out(f" memset (fmarg{blk}, 0, sizeof (fmarg{blk}));")
        self.out(f" memset (fmres{blk}, 0, sizeof (fmres{blk}));")
        for i, (text, f) in enumerate(zip(ins, m.in_formals)):
            self.out(f" fmarg{blk}[{i}].{f.ctype.union_member} = {text};")
        self.out(
            f" {scratch} = meltlite_apply ({fnatom}, {fnatom},"
            f" {c_string_literal(in_descr)}, fmarg{blk},"
            f" {c_string_literal(out_descr)}, fmres{blk});"
        )
        for i, (d_id, f) in enumerate(zip(outs, m.out_formals)):
            self.out(f" {data[d_id]} = fmres{blk}[{i}].{f.ctype.union_member};")
        self.out("}")
        return f"({scratch} != NULL)"

    def _fill_text(self, a, data, loc):
        if isinstance(a, matchc.FillMatcher):
            m = a.matcher
            if hasattr(m, "fill"):  # c-matcher
                if not m.fill:
                    self.out(";")
                    return
                subst = {m.match_formal.name: data[a.data]}
                for f, x in zip(m.in_formals, a.inputs):
                    subst[f.name] = self.atom(x)
                for f, d_id in zip(m.out_formals, a.outs):
                    subst[f.name] = data[d_id]
                frag = expand_template(
                    m.fill, subst, (m.state, self.ctx), f"c-matcher {m.name}", loc
                )
                self.out(frag)
            else:
                self.out(f"/* fun-matcher {m.name} filled during its test */;")
            return
        if isinstance(a, matchc.FillFields):
            for fld, d_id in a.fields:
                self.out(f"{data[d_id]} = meltlite_ufield ({data[a.data]}, {fld.index});")
            return
        if isinstance(a, matchc.FillCopy):
            self.out(f"{data[a.dst]} = {data[a.src]};")
            return
        self.err(f"unknown fill {a!r}", loc)

    # -- routines --

    def frame_prologue(self, loc, nbvar_note=True):
        nv = max(1, len(self.value_slots))
        lines = []
        lines.append(" struct {")
        lines.append("  int mcfr_nbvar;")
        lines.append("  const char *mcfr_flocs;")
        lines.append("  meltlite_value_t mcfr_clos;")
        lines.append("  struct meltlite_callframe_st *mcfr_prev;")
        note = " ".join(f"{i}:{n}" for i, n in enumerate(self.value_slots))
        lines.append(
            f"  meltlite_value_t mcfr_varptr[{nv}];"
            + (f" /* {note} */" if note else "")
        )
        for member, ctype, label in self.stuff_members:
            lines.append(f"  {ctype.c_decl} {member}; /* {label} */")
        for d_id in sorted(self.flag_members):
            lines.append(f"  char {self.flag_members[d_id]};")
        lines.append(" } meltfram__;")
        locstr = f"{loc.file}:{loc.line}" if loc else self.c_name
        lines.append(" memset ((void *) &meltfram__, 0, sizeof (meltfram__));")
        lines.append(f" meltfram__.mcfr_nbvar = ({len(self.value_slots)});")
        lines.append(f" meltfram__.mcfr_flocs = {c_string_literal(locstr)};")
        lines.append(" meltfram__.mcfr_prev = meltlite_topframe;")
        lines.append(" meltlite_topframe = (struct meltlite_callframe_st *) &meltfram__;")
        return lines

    def check_frame_size(self):
        total = len(self.value_slots) + len(self.stuff_members) + len(self.flag_members)
        if total > FRAME_MAX_SLOTS:
            self.err(
                f"routine {self.c_name} needs {total} frame slots"
                f" (maximum {FRAME_MAX_SLOTS})",
                self.loc,
            )

    def emit_function(self, fn: FunctionDef):
        self._funm_out_ids = {}
        self._collect_funm_outs(fn.body)
        for f in self.formals:
            self.slot_access(f)
        self.push_names(self.formals)
        # argument fetch per the descriptor agreement rule
        if self.formals:
            self.out(f"{self.slot_access(self.formals[0])} = firstargv_;")
        secondaries = self.formals[1:]
        if secondaries:
            endargs = self.fresh_label("endargs")
            self.out("if (xargdescr_ && xargtab_) {")
            for i, f in enumerate(secondaries):
                ch = f.ctype.descr_char
                self.out(f" if (xargdescr_[{i}] != '{ch}') goto {endargs};")
                self.out(
                    f" {self.slot_access(f)} = xargtab_[{i}].{f.ctype.union_member};"
                )
            self.out("}")
            self.out(f"{endargs}:;")
        self.emit_routine_body(fn.body)
        self.pop_names()
        self.finish_function()

    def emit_lambda(self, lifted: LiftedLambda):
        for ix, slot in enumerate(lifted.captures):
            self.captures[id(slot)] = ix
        self.emit_function(
            FunctionDef(lifted.node.name_hint, self.formals, lifted.node.body)
        )

    def emit_routine_body(self, body):
        if body:
            for stmt in body[:-1]:
                self.emit_expr(stmt, None)
            last = body[-1]
            if last.ctype is CTYPE_VALUE:
                self.out("retval_ = NULL;")
                self.emit_expr(last, "retval_")
            else:
                self.emit_expr(last, None)

    def finish_function(self):
        self.check_frame_size()
        head = [
            "meltlite_value_t",
            f"{self.c_name} (meltlite_value_t closv_, meltlite_value_t firstargv_,",
            "    const char *xargdescr_, union meltlite_arg_un *xargtab_,",
            "    const char *xresdescr_, union meltlite_arg_un *xrestab_)",
            "{",
            " meltlite_value_t retval_ = NULL;",
        ]
        head.extend(self.frame_prologue(self.loc))
        head.append(" meltfram__.mcfr_clos = closv_;")
        head.append(" (void) firstargv_; (void) xargdescr_; (void) xargtab_;")
        head.append(" (void) xresdescr_; (void) xrestab_;")
        tail = [
            "labend_:;",
            " meltlite_topframe = (struct meltlite_callframe_st *) meltfram__.mcfr_prev;",
            " return retval_;",
            "}",
        ]
        self.lines = head + self.body_lines + [" goto labend_;"] + tail

    # -- start routine --

    def emit_start_body(self, module: Module):
        self._funm_out_ids = {}
        for item in module.items:
            if isinstance(item, TopExpr):
                self._collect_funm_outs([item.ast])
        parent_slot = LocalSlot("parentenv", CTYPE_VALUE, "local")
        env_slot = LocalSlot("curenv", CTYPE_VALUE, "local")
        self.parentenv_text = self.slot_access(parent_slot)
        self.curenv_text = self.slot_access(env_slot)
        self.out(f"{self.parentenv_text} = parentenv_;")
        self.out(f"{self.curenv_text} = meltlite_new_env ({self.parentenv_text});")
        # constant pool and imports fill lazily; remember where to splice
        self._splice_at = len(self.body_lines)
        for item in module.items:
            if isinstance(item, TopExpr):
                self.emit_expr(item.ast, None)
            elif isinstance(item, Definition):
                self.emit_definition(item)
            elif isinstance(item, ExportDirective):
                self.emit_export(item)
        self.out(f"retval_ = {self.curenv_text};")

    def finalize_start(self):
        pool = self._emit_pool_lines()
        self.body_lines[self._splice_at : self._splice_at] = pool
        self.check_frame_size()
        head = [
            "meltlite_value_t",
            f"{self.c_name} (meltlite_ctx_t *mlctx_, meltlite_value_t parentenv_)",
            "{",
            " meltlite_value_t retval_ = NULL;",
        ]
        head.extend(self.frame_prologue(self.loc))
        head.append(
            f" meltlite_register_module_roots (mlctx_, meltlite_modvals_{self.mod.mod_c},"
            f" {max(1, len(self.mod.modvals))});"
        )
        tail = [
            "labend_:;",
            " meltlite_topframe = (struct meltlite_callframe_st *) meltfram__.mcfr_prev;",
            " return retval_;",
            "}",
        ]
        self.lines = head + self.body_lines + [" goto labend_;"] + tail

    def _emit_pool_lines(self):
        lines = []
        for key, comment in self.mod.modvals:
            ix = self.mod.modval_ix[key]
            text = self.mod.modval_text(ix)
            if key[0] == "quote":
                _q, kind, value = key
                if kind == "symbol":
                    lines.append(f" {text} = meltlite_intern ({c_string_literal(value)});")
                elif kind == "keyword":
                    lines.append(
                        f" {text} = meltlite_intern_keyword ({c_string_literal(value)});"
                    )
                elif kind == "long":
                    discr = self.predef_text("discr_constant_integer")
                    lines.append(
                        f" {text} = meltlite_box_long ({discr}, {c_long_literal(value)});"
                    )
                else:
                    discr = self.predef_text("discr_string")
                    lines.append(
                        f" {text} = meltlite_box_string ({discr}, {c_string_literal(value)});"
                    )
            elif key[0] == "import":
                lines.append(
                    f" {text} = meltlite_env_lookup ({self.parentenv_text},"
                    f" meltlite_intern ({c_string_literal(key[1])}));"
                )
        if lines:
            lines.insert(0, " /* constant pool and imported bindings */")
        return lines

    def emit_definition(self, item: Definition):
        payload = item.payload
        if item.kind == "defun":
            ix = self.mod._modval(("def", id(payload)), payload.name)
            cname = self.mod.routine_c_name_for(payload)
            self.out(
                f"{self.mod.modval_text(ix)} = meltlite_new_closure ({cname},"
                f" {c_string_literal(descr_string(payload.formals))}, 0);",
                item.loc,
            )
        elif item.kind == "defclass":
            ix = self.mod._modval(("def", id(payload)), payload.name)
            sup = (
                self.mod.global_access(payload.super, item.loc)
                if payload.super
                else "NULL"
            )
            self.out(
                f"{self.mod.modval_text(ix)} = meltlite_new_class"
                f" ({c_string_literal(payload.name)}, {sup},"
                f" {len(payload.all_fields())});",
                item.loc,
            )
        elif item.kind == "definstance":
            ix = self.mod._modval(("def", id(payload)), payload.name)
            text = self.mod.modval_text(ix)
            for b in getattr(payload, "init_prefix", []):
                self.emit_expr(b.init, self.slot_access(b.slot))
            cls = self.mod.global_access(payload.cls, item.loc)
            self.out(f"{text} = meltlite_new_instance ({cls});", item.loc)
            for fld, v in payload.inits:
                self.out(
                    f"meltlite_put_field_unsafe ({text}, {fld.index}, {self.atom(v)});"
                )
        elif item.kind == "defselector":
            ix = self.mod._modval(("def", id(payload)), payload.name)
            text = self.mod.modval_text(ix)
            for b in getattr(payload, "init_prefix", []):
                self.emit_expr(b.init, self.slot_access(b.slot))
            self.out(
                f"{text} = meltlite_new_selector ({c_string_literal(payload.name)});",
                item.loc,
            )
            for fld, v in payload.inits:
                self.out(
                    f"meltlite_put_field_unsafe ({text}, {fld.index}, {self.atom(v)});"
                )
        # template definitions (defprimitive etc.) carry no runtime state

    RUNTIME_KINDS = (FunctionDef, ClassDef, InstanceDef, SelectorDef)

    def emit_export(self, item: ExportDirective):
        env = self.mod.module.env
        for name in item.names:
            b = env.lookup(name)
            if b is None or not isinstance(b.payload, self.RUNTIME_KINDS):
                continue
            access = self.mod.global_access(b.payload, item.loc)
            self.out(
                f"meltlite_env_bind ({self.curenv_text},"
                f" meltlite_intern ({c_string_literal(name)}), {access});",
                item.loc,
            )

    # -- fun-matcher output data discovery --

    def _collect_funm_outs(self, body):
        """Map (matcher, subject data) to out data ids for every graph in
        the routine, so tests can deposit secondaries directly."""
        from .expander import iter_ast_children

        def walk(n):
            if isinstance(n, SMatch) and n.graph is not None:
                for step in n.graph.steps.values():
                    if isinstance(step, matchc.FillStep) and isinstance(
                        step.action, matchc.FillMatcher
                    ):
                        a = step.action
                        if not hasattr(a.matcher, "test"):
                            self._funm_out_ids[(id(a.matcher), a.data)] = list(a.outs)
            for child in iter_ast_children(n):
                walk(child)

        for n in body:
            walk(n)


class _FixedCtx:
    """State counter view pinned to one occurrence number, so a
    c-iterator's start and end expansions agree."""

    def __init__(self, n):
        self.n = n

    def next_state(self, name):
        return self.n


def emit_module(module: Module, ctx: EmitCtx):
    """Emit target units for a normalized, match-compiled module."""
    em = ModuleEmitter(module, ctx)
    units = em.emit()
    for w in em.warnings:
        import sys

        print(w, file=sys.stderr)
    return units


def compile_all_matches(module: Module, env=None, share=True):
    """Attach decision graphs to every match node of a module; returns
    the graphs in a deterministic order for dump mode."""
    from .expander import iter_ast_children

    graphs = []

    def walk(n):
        if isinstance(n, SMatch):
            graphs.append(matchc.compile_match(n, env, share=share))
        for child in iter_ast_children(n):
            walk(child)

    for item in module.items:
        if isinstance(item, TopExpr):
            walk(item.ast)
        elif isinstance(item, Definition) and item.kind == "defun":
            for b in item.payload.body:
                walk(b)
    return graphs
