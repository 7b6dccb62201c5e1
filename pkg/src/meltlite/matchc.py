"""Pattern representation and match compilation to a decision graph.

A match form's clauses compile into a directed acyclic graph of
elementary steps (tests, fills, flag operations, clause successes)
over shared data nodes, which codegen turns into labeled blocks and
the dump mode renders as Graphviz dot.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import MeltMatchError

# --- pattern nodes (built by the expander) ---


@dataclass(eq=False)
class PWild:
    loc: object


@dataclass(eq=False)
class PVar:
    loc: object
    name: str
    slot: object = None  # LocalSlot, attached by the normalizer


@dataclass(eq=False)
class PConst:
    loc: object
    expr: object  # expression ast; an atom after normalization


@dataclass(eq=False)
class PMatcher:
    loc: object
    matcher: object  # CMatcherDef or FunMatcherDef payload
    inputs: list
    subs: list


@dataclass(eq=False)
class PInstance:
    loc: object
    cls: object  # ClassDef payload
    fields: list  # [(FieldDef, pattern)]


@dataclass(eq=False)
class PAnd:
    loc: object
    subs: list


@dataclass(eq=False)
class POr:
    loc: object
    subs: list


def pattern_variables(pat, acc=None):
    """Pattern variable names in first-occurrence order."""
    if acc is None:
        acc = []
    if isinstance(pat, PVar):
        if pat.name not in acc:
            acc.append(pat.name)
    elif isinstance(pat, PMatcher):
        for s in pat.subs:
            pattern_variables(s, acc)
    elif isinstance(pat, PInstance):
        for _f, s in pat.fields:
            pattern_variables(s, acc)
    elif isinstance(pat, (PAnd, POr)):
        for s in pat.subs:
            pattern_variables(s, acc)
    return acc


# --- decision graph ---


@dataclass(eq=False)
class MatchData:
    id: int
    role: str  # root|extracted|patvar|flag
    ctype: object = None  # None for flags
    label: str = ""
    atom: object = None  # root only: the subject atom expression


@dataclass(eq=False)
class PredMatcher:
    matcher: object
    data: int
    inputs: tuple  # atom expressions

    def key(self):
        return ("m", id(self.matcher), self.data, tuple(map(atom_key, self.inputs)))


@dataclass(eq=False)
class PredIsInstance:
    data: int
    cls: object

    def key(self):
        return ("i", self.data, id(self.cls))


@dataclass(eq=False)
class PredIdentData:
    data: int
    other: int

    def key(self):
        return ("d", self.data, self.other)


@dataclass(eq=False)
class PredIdentConst:
    data: int
    atom: object

    def key(self):
        return ("c", self.data, atom_key(self.atom))


@dataclass(eq=False)
class PredFlag:
    flag: int

    def key(self):
        return ("f", self.flag)


@dataclass(eq=False)
class FillMatcher:
    matcher: object
    data: int
    inputs: tuple
    outs: tuple  # data ids

    def key(self):
        return ("fm", id(self.matcher), self.data, tuple(map(atom_key, self.inputs)), self.outs)


@dataclass(eq=False)
class FillFields:
    data: int
    fields: tuple  # ((FieldDef, data id), ...)

    def key(self):
        return ("ff", self.data, tuple((id(f), d) for f, d in self.fields))


@dataclass(eq=False)
class FillCopy:
    src: int  # source data id
    dst: int

    def key(self):
        return ("fc", self.src, self.dst)


@dataclass(eq=False)
class TestStep:
    __test__ = False  # not a pytest class
    id: int
    pred: object
    then: object  # step id or None (no-match exit)
    els: object


@dataclass(eq=False)
class FillStep:
    id: int
    action: object
    next: object


@dataclass(eq=False)
class SetFlagStep:
    id: int
    flag: int
    next: object


@dataclass(eq=False)
class FlagConjStep:
    id: int
    flags: tuple
    flag: int
    next: object


@dataclass(eq=False)
class SuccessStep:
    id: int
    clause: int


def atom_key(atom):
    """Canonical key of an atom expression for step memoization."""
    kind = type(atom).__name__
    if kind == "SVar":
        return ("var", id(atom.binding))
    if kind == "SLongLit":
        return ("long", atom.value)
    if kind == "SCStringLit":
        return ("str", atom.value)
    if kind == "SNil":
        return ("nil",)
    if kind == "SQuoteConst":
        return ("quote", id(atom))
    if kind == "SCleared":
        return ("cleared", atom.ctype.name)
    raise MeltMatchError(f"not an atom: {atom!r}")


class MatchGraph:
    def __init__(self, subject_atom, subject_ctype, nclauses):
        self.steps = {}
        self.data = {}
        self.entry = None
        self.nclauses = nclauses
        self.clause_patvars = [dict() for _ in range(nclauses)]
        self._memo_steps = {}
        self._memo_data = {}
        self.share = True
        root = self._new_data("root", subject_ctype, "subject")
        root.atom = subject_atom
        self.root = root.id

    # -- construction --

    def _new_data(self, role, ctype, label=""):
        d = MatchData(len(self.data), role, ctype, label)
        self.data[d.id] = d
        return d

    def data_node(self, key, role, ctype, label=""):
        if key in self._memo_data:
            return self._memo_data[key]
        d = self._new_data(role, ctype, label)
        self._memo_data[key] = d.id
        return d.id

    def _add(self, kind, key, build):
        if self.share and key in self._memo_steps:
            return self._memo_steps[key]
        step = build(len(self.steps))
        self.steps[step.id] = step
        if self.share:
            self._memo_steps[key] = step.id
        return step.id

    def add_test(self, pred, then, els):
        key = ("test", pred.key(), then, els)
        return self._add("test", key, lambda i: TestStep(i, pred, then, els))

    def add_fill(self, action, nxt):
        key = ("fill", action.key(), nxt)
        return self._add("fill", key, lambda i: FillStep(i, action, nxt))

    def add_setflag(self, flag, nxt):
        key = ("setflag", flag, nxt)
        return self._add("setflag", key, lambda i: SetFlagStep(i, flag, nxt))

    def add_conj(self, flags, flag, nxt):
        key = ("conj", tuple(flags), flag, nxt)
        return self._add("conj", key, lambda i: FlagConjStep(i, tuple(flags), flag, nxt))

    def add_success(self, clause):
        key = ("success", clause)
        return self._add("success", key, lambda i: SuccessStep(i, clause))

    # -- queries --

    def reachable(self):
        seen = set()
        work = [self.entry]
        while work:
            s = work.pop()
            if s is None or s in seen:
                continue
            seen.add(s)
            step = self.steps[s]
            if isinstance(step, TestStep):
                work.extend([step.then, step.els])
            elif isinstance(step, (FillStep, SetFlagStep, FlagConjStep)):
                work.append(step.next)
        return seen

    def step_reads(self, step):
        """Data ids a step reads, for the dot rendering."""
        if isinstance(step, TestStep):
            p = step.pred
            if isinstance(p, PredMatcher):
                return [p.data]
            if isinstance(p, PredIsInstance):
                return [p.data]
            if isinstance(p, PredIdentData):
                return [p.data, p.other]
            if isinstance(p, PredIdentConst):
                return [p.data]
            if isinstance(p, PredFlag):
                return [p.flag]
        if isinstance(step, FillStep):
            a = step.action
            if isinstance(a, FillMatcher):
                return [a.data]
            if isinstance(a, FillFields):
                return [a.data]
            if isinstance(a, FillCopy):
                return [a.src]
        if isinstance(step, FlagConjStep):
            return list(step.flags)
        return []

    def step_writes(self, step):
        if isinstance(step, FillStep):
            a = step.action
            if isinstance(a, FillMatcher):
                return list(a.outs)
            if isinstance(a, FillFields):
                return [d for _f, d in a.fields]
            if isinstance(a, FillCopy):
                return [a.dst]
        if isinstance(step, SetFlagStep):
            return [step.flag]
        if isinstance(step, FlagConjStep):
            return [step.flag]
        return []


class _Compiler:
    def __init__(self, graph: MatchGraph):
        from .expander import CTYPE_VALUE

        self.g = graph
        self.value_ctype = CTYPE_VALUE

    def patvar_data(self, clause_ix, slot):
        key = ("patvar", clause_ix, slot.name)
        d = self.g.data_node(key, "patvar", slot.ctype, slot.name)
        self.g.clause_patvars[clause_ix].setdefault(slot.name, d)
        return d

    def compile_clause(self, clause_ix, pattern, fail):
        succ = self.g.add_success(clause_ix)
        return self.compile_pat(
            pattern, self.g.root, clause_ix, frozenset(), lambda bound: succ, fail
        )

    def compile_pat(self, pat, d, ci, bound, then_k, els):
        g = self.g
        if isinstance(pat, PWild):
            return then_k(bound)
        if isinstance(pat, PVar):
            vd = self.patvar_data(ci, pat.slot)
            if pat.name in bound:
                return g.add_test(PredIdentData(d, vd), then_k(bound), els)
            nxt = then_k(bound | {pat.name})
            return g.add_fill(FillCopy(d, vd), nxt)
        if isinstance(pat, PConst):
            return g.add_test(PredIdentConst(d, pat.expr), then_k(bound), els)
        if isinstance(pat, PMatcher):
            return self.compile_matcher(pat, d, ci, bound, then_k, els)
        if isinstance(pat, PInstance):
            return self.compile_instance(pat, d, ci, bound, then_k, els)
        if isinstance(pat, PAnd):
            return self.compile_and(pat, d, ci, bound, then_k, els)
        if isinstance(pat, POr):
            return self.compile_or(pat, d, ci, bound, then_k, els)
        raise MeltMatchError(f"unknown pattern {pat!r}", getattr(pat, "loc", None))

    def _sub_chain(self, subs, datas, ci, bound, then_k, els):
        def chain(k, b):
            if k == len(subs):
                return then_k(b)
            return self.compile_pat(
                subs[k], datas[k], ci, b, lambda b2: chain(k + 1, b2), els
            )

        return chain(0, bound)

    def compile_matcher(self, pat, d, ci, bound, then_k, els):
        g = self.g
        m = pat.matcher
        inputs = tuple(pat.inputs)
        in_keys = tuple(map(atom_key, inputs))
        if hasattr(m, "out_formals"):
            out_formals = m.out_formals
        else:
            out_formals = []
        outs = tuple(
            g.data_node(
                ("out", id(m), d, in_keys, ix),
                "extracted",
                f.ctype,
                f"{m.name}.{f.name}",
            )
            for ix, f in enumerate(out_formals)
        )
        if pat.subs:
            fill_next = self._sub_chain(pat.subs, outs, ci, bound, then_k, els)
            after_test = g.add_fill(FillMatcher(m, d, inputs, outs), fill_next)
        else:
            after_test = then_k(bound)
        return g.add_test(PredMatcher(m, d, inputs), after_test, els)

    def compile_instance(self, pat, d, ci, bound, then_k, els):
        g = self.g
        fields = tuple(
            (fld, g.data_node(("field", d, id(fld)), "extracted", self.value_ctype, fld.name))
            for fld, _sub in pat.fields
        )
        subs = [sub for _fld, sub in pat.fields]
        datas = [fd for _fld, fd in fields]
        if fields:
            fill_next = self._sub_chain(subs, datas, ci, bound, then_k, els)
            after_test = g.add_fill(FillFields(d, fields), fill_next)
        else:
            after_test = then_k(bound)
        return g.add_test(PredIsInstance(d, pat.cls), after_test, els)

    def compile_and(self, pat, d, ci, bound, then_k, els):
        g = self.g
        arm_flags = [
            g.data_node(("flag", id(pat), ix), "flag", None, f"and{ix}")
            for ix in range(len(pat.subs))
        ]
        conj = g.data_node(("flag", id(pat), "conj"), "flag", None, "conj")
        bound_all = set(bound)
        for sub in pat.subs:
            bound_all.update(pattern_variables(sub))
        bound_all = frozenset(bound_all)
        conj_step = g.add_conj(
            arm_flags,
            conj,
            g.add_test(PredFlag(conj), then_k(bound_all), els),
        )
        entry = conj_step
        running = set(bound)
        arm_bounds = []
        for sub in pat.subs:
            arm_bounds.append(frozenset(running))
            running.update(pattern_variables(sub))
        for ix in range(len(pat.subs) - 1, -1, -1):
            nxt = entry
            set_step = g.add_setflag(arm_flags[ix], nxt)
            entry = self.compile_pat(
                pat.subs[ix], d, ci, arm_bounds[ix], lambda b, s=set_step: s, nxt
            )
        return entry

    def compile_or(self, pat, d, ci, bound, then_k, els):
        vars_all = frozenset(bound) | set(pattern_variables(pat))

        def branch(k):
            if k == len(pat.subs):
                return els
            return self.compile_pat(
                pat.subs[k], d, ci, bound, lambda b: then_k(frozenset(vars_all)), branch(k + 1)
            )

        return branch(0)


def compile_match(m, env=None, share=True) -> MatchGraph:
    """Compile a normalized match form into its decision graph; clauses
    keep their source order, identical steps over the same data merge."""
    graph = MatchGraph(m.subject, m.subject.ctype, len(m.clauses))
    graph.share = share
    comp = _Compiler(graph)
    entry = None
    for ci in range(len(m.clauses) - 1, -1, -1):
        entry = comp.compile_clause(ci, m.clauses[ci].pattern, entry)
    graph.entry = entry
    m.graph = graph
    return graph


# --- graph interpretation (the compiled artifact's reference executor) ---


def interpret_graph(graph: MatchGraph, subject, env=None):
    """Run a decision graph over a description subject; returns
    (clause index or None, bindings by pattern variable name)."""
    from .normcheck import AtomEval, DObj, ident_eq

    ev = AtomEval(env)
    data = {graph.root: subject}
    pending = {}
    cur = graph.entry
    while cur is not None:
        step = graph.steps[cur]
        if isinstance(step, TestStep):
            p = step.pred
            if isinstance(p, PredMatcher):
                m = p.matcher
                subj = data.get(p.data)
                ins = [ev(a) for a in p.inputs]
                if getattr(m, "sem", None) is not None:
                    outs = m.sem(subj, ins)
                    ok = outs is not None
                    pending[("funm", id(m), p.data)] = outs or ()
                else:
                    if m.sem_test is None:
                        raise MeltMatchError(f"matcher {m.name} has no oracle semantics")
                    ok = bool(m.sem_test(subj, ins))
            elif isinstance(p, PredIsInstance):
                v = data.get(p.data)
                ok = isinstance(v, DObj) and v.cls.is_subclass_of(p.cls)
            elif isinstance(p, PredIdentData):
                ok = ident_eq(data.get(p.data), data.get(p.other))
            elif isinstance(p, PredIdentConst):
                ok = ident_eq(data.get(p.data), ev(p.atom))
            elif isinstance(p, PredFlag):
                ok = bool(data.get(p.flag))
            else:
                raise MeltMatchError(f"unknown predicate {p!r}")
            cur = step.then if ok else step.els
        elif isinstance(step, FillStep):
            a = step.action
            if isinstance(a, FillMatcher):
                m = a.matcher
                subj = data.get(a.data)
                if getattr(m, "sem", None) is not None:
                    outs = pending.get(("funm", id(m), a.data), ())
                else:
                    outs = m.sem_fill(subj, [ev(x) for x in a.inputs])
                for d_id, val in zip(a.outs, outs):
                    data[d_id] = val
            elif isinstance(a, FillFields):
                obj = data.get(a.data)
                for fld, d_id in a.fields:
                    data[d_id] = obj.fields[fld.index]
            elif isinstance(a, FillCopy):
                data[a.dst] = data.get(a.src)
            cur = step.next
        elif isinstance(step, SetFlagStep):
            data[step.flag] = True
            cur = step.next
        elif isinstance(step, FlagConjStep):
            data[step.flag] = all(bool(data.get(f)) for f in step.flags)
            cur = step.next
        elif isinstance(step, SuccessStep):
            binds = {}
            for name, d_id in graph.clause_patvars[step.clause].items():
                binds[name] = data.get(d_id)
            return step.clause, binds
        else:
            raise MeltMatchError(f"unknown step {step!r}")
    return None, {}


# --- dot rendering ---


def _dot_escape(s: str) -> str:
    return s.replace("\\", "\\\\").replace('"', '\\"')


def _pred_label(g, p):
    if isinstance(p, PredMatcher):
        return f"test {p.matcher.name}(d{p.data})"
    if isinstance(p, PredIsInstance):
        return f"is {p.cls.name}(d{p.data})"
    if isinstance(p, PredIdentData):
        return f"d{p.data} == d{p.other}"
    if isinstance(p, PredIdentConst):
        return f"d{p.data} == const"
    if isinstance(p, PredFlag):
        return f"flag d{p.flag}"
    return "test"


def _fill_label(g, a):
    if isinstance(a, FillMatcher):
        outs = ",".join(f"d{o}" for o in a.outs)
        return f"fill {a.matcher.name}(d{a.data}) -> {outs}"
    if isinstance(a, FillFields):
        outs = ",".join(f"{f.name}->d{d}" for f, d in a.fields)
        return f"fill fields(d{a.data}): {outs}"
    if isinstance(a, FillCopy):
        return f"fill d{a.dst} := d{a.src}"
    return "fill"


def emit_dot(graph: MatchGraph, name: str = "match") -> str:
    """Graphviz rendering: tests as diamonds, fills and flag steps as
    boxes, data as ellipses, successes as double circles."""
    out = [f"digraph {name} {{"]
    reachable = graph.reachable()
    used_data = set()
    for sid in sorted(reachable):
        step = graph.steps[sid]
        used_data.update(graph.step_reads(step))
        used_data.update(graph.step_writes(step))
    if graph.entry is not None:
        used_data.add(graph.root)
    for did in sorted(used_data):
        d = graph.data[did]
        label = _dot_escape(f"d{did} {d.role}" + (f" {d.label}" if d.label else ""))
        out.append(f'  d{did} [shape=ellipse, label="{label}"];')
    emitted_fail = False
    for sid in sorted(reachable):
        step = graph.steps[sid]
        if isinstance(step, TestStep):
            label = _dot_escape(_pred_label(graph, step.pred))
            out.append(f'  s{sid} [shape=diamond, label="{label}"];')
        elif isinstance(step, FillStep):
            label = _dot_escape(_fill_label(graph, step.action))
            out.append(f'  s{sid} [shape=box, label="{label}"];')
        elif isinstance(step, SetFlagStep):
            out.append(f'  s{sid} [shape=box, label="set d{step.flag}"];')
        elif isinstance(step, FlagConjStep):
            flags = " & ".join(f"d{f}" for f in step.flags)
            out.append(f'  s{sid} [shape=box, label="d{step.flag} := {flags}"];')
        elif isinstance(step, SuccessStep):
            out.append(f'  s{sid} [shape=doublecircle, label="success {step.clause}"];')
    def edge_target(t):
        nonlocal emitted_fail
        if t is None:
            emitted_fail = True
            return "nomatch"
        return f"s{t}"

    edges = []
    for sid in sorted(reachable):
        step = graph.steps[sid]
        if isinstance(step, TestStep):
            edges.append(f'  s{sid} -> {edge_target(step.then)} [label="then"];')
            edges.append(f'  s{sid} -> {edge_target(step.els)} [label="else"];')
        elif isinstance(step, (FillStep, SetFlagStep, FlagConjStep)):
            edges.append(f"  s{sid} -> {edge_target(step.next)};")
        for did in graph.step_reads(step):
            edges.append(f"  d{did} -> s{sid} [style=dashed];")
        for did in graph.step_writes(step):
            edges.append(f"  s{sid} -> d{did} [style=dashed];")
    if emitted_fail:
        out.append('  nomatch [shape=octagon, label="(no match)"];')
    out.extend(edges)
    out.append("}")
    return "\n".join(out) + "\n"
