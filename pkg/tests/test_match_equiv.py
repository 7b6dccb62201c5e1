"""Randomized equivalence: decision-graph interpretation against the
naive oracle matcher, plus the field-declaration match scale check."""

from __future__ import annotations

import random

import pytest

from meltlite import expander as xp
from meltlite import normcheck as nc
from meltlite.matchc import compile_match, emit_dot, interpret_graph
from meltlite.normalizer import normalize
from meltlite.normcheck import oracle_match
from meltlite.reader import read_unit
from meltlite.stdlib import load_stdlib


@pytest.fixture(scope="module")
def stdenv():
    return load_stdlib()


ENV_DECLS = (
    "(e0) (e1) (:hnode ne0) (:hnode ne1) (:cstring cs0 \"envstr\")"
    " (:long nl0 4)"
)


def compile_clauses(subject_decl, clause_texts, env, share=True):
    body = " ".join(f"({p} ())" for p in clause_texts)
    text = f"(let ({subject_decl} {ENV_DECLS}) (match subj {body}))"
    sexprs = read_unit(text, "<gen>")
    x = xp.Expander(env, "<gen>")
    ast = normalize(x.expand_expr(sexprs[0], env))
    m = _find_match(ast)
    return m, compile_match(m, env, share=share)


def _find_match(node):
    import dataclasses

    stack = [node]
    while stack:
        n = stack.pop()
        if isinstance(n, xp.SMatch):
            return n
        if dataclasses.is_dataclass(n) and not isinstance(n, type):
            for f in dataclasses.fields(n):
                v = getattr(n, f.name)
                if isinstance(v, (list, tuple)):
                    stack.extend(i for i in v if dataclasses.is_dataclass(i))
                elif dataclasses.is_dataclass(v) and not isinstance(v, type):
                    stack.append(v)
    raise AssertionError("no match")


class Gen:
    """Random patterns (as source text) and matching/near-miss subjects."""

    def __init__(self, rng, stdenv):
        self.rng = rng
        self.env = stdenv
        self.classes = [
            stdenv.lookup(n).payload
            for n in ("class_root", "class_named", "class_symbol", "class_container")
        ]
        self.var_ix = 0

    # -- pattern text --

    def pattern(self, ctype, depth):
        r = self.rng
        if depth <= 0:
            return r.choice(self.leaf_choices(ctype))()
        choices = self.leaf_choices(ctype) + self.deep_choices(ctype, depth)
        return r.choice(choices)()

    def leaf_choices(self, ctype):
        mk = []
        mk.append(lambda: "?_")
        mk.append(lambda: f"?pv_{ctype}{self.rng.randint(0, 1)}")
        if ctype == "long":
            mk.append(lambda: str(self.rng.randint(0, 3)))
            mk.append(lambda: "nl0")
        if ctype == "value":
            mk.append(lambda: self.rng.choice(["e0", "e1", "()"]))
        if ctype == "cstring":
            mk.append(lambda: f'?(cstring_same "{self.rng.choice(["aa", "bb"])}")')
        if ctype == "hnode":
            mk.append(lambda: self.rng.choice(["ne0", "ne1"]))
        return mk

    def deep_choices(self, ctype, depth):
        r = self.rng
        mk = []

        def sub(ct):
            return self.pattern(ct, depth - 1)

        if ctype == "value":
            def inst():
                cls = r.choice(["class_symbol", "class_container", "class_named"])
                if cls == "class_container":
                    return f"?(instance class_container :container_value {sub('value')})"
                if r.random() < 0.5:
                    return f"?(instance {cls})"
                return f"?(instance {cls} :named_name {sub('value')})"

            mk.append(inst)
            mk.append(lambda: f"?(integerbox_of {sub('long')})")
        if ctype == "long":
            mk.append(lambda: f"?(isbiggereven {r.randint(0, 4)} {sub('long')})")
        if ctype == "hstmt":
            mk.append(lambda: f"?(assign_single {sub('hnode')} {sub('hnode')})")
        if ctype == "hnode":
            mk.append(lambda: f"?(node_identifier {sub('cstring')})")
            mk.append(lambda: f"?(node_integer_cst {sub('long')})")
            mk.append(lambda: f"?(node_array_ref {sub('hnode')} {sub('hnode')})")
            mk.append(lambda: f"?(node_component_ref {sub('hnode')} {sub('hnode')})")
            mk.append(lambda: f"?(node_var_decl {sub('hnode')} {sub('cstring')} ?_)")
        # conjunction everywhere; disjunction with variable-free branches
        mk.append(lambda: f"?(and {sub(ctype)} {sub(ctype)})")
        mk.append(
            lambda: f"?(or {self.varfree(ctype, depth - 1)} {self.varfree(ctype, depth - 1)})"
        )
        return mk

    def varfree(self, ctype, depth):
        for _ in range(8):
            p = self.pattern(ctype, depth)
            if "?pv_" not in p:
                return p
        return "?_"

    # -- description env and subjects --

    def make_env(self):
        shared_ident = nc.HIdentifier("shid")
        env = {
            "e0": nc.DBoxLong(11),
            "e1": nc.DObj(self.env.lookup("class_symbol").payload, [nc.DBoxString("e1"), None]),
            "ne0": shared_ident,
            "ne1": nc.HIntegerCst(9),
            "cs0": nc.SStr("envstr"),
            "nl0": 4,
        }
        return env

    def subject(self, ctype, env, depth=3):
        r = self.rng
        if ctype == "long":
            return r.randint(-4, 9)
        if ctype == "cstring":
            return r.choice([None, nc.SStr("aa"), nc.SStr("bb"), env["cs0"]])
        if ctype == "hstmt":
            if r.random() < 0.2:
                return None
            return nc.HAssign(self.subject("hnode", env, depth - 1),
                              self.subject("hnode", env, depth - 1))
        if ctype == "hnode":
            if depth <= 0 or r.random() < 0.2:
                return r.choice([None, env["ne0"], env["ne1"], nc.HIdentifier(r.choice(["aa", "bb", "zz"]))])
            kind = r.choice(["ident", "cst", "aref", "cref", "var"])
            if kind == "ident":
                return nc.HIdentifier(r.choice(["aa", "bb", "zz"]))
            if kind == "cst":
                return nc.HIntegerCst(r.randint(0, 3))
            if kind == "aref":
                return nc.HArrayRef(self.subject("hnode", env, depth - 1),
                                    self.subject("hnode", env, depth - 1))
            if kind == "cref":
                return nc.HComponentRef(self.subject("hnode", env, depth - 1),
                                        self.subject("hnode", env, depth - 1))
            return nc.HVarDecl(nc.HIdentifier(r.choice(["aa", "bb"])),
                               self.subject("hnode", env, depth - 1))
        # value
        if depth <= 0 or r.random() < 0.25:
            return r.choice([None, env["e0"], env["e1"], nc.DBoxLong(r.randint(0, 12)),
                             nc.DBoxString(r.choice(["aa", "x"]))])
        cls = r.choice(self.classes[1:])
        nfields = len(cls.all_fields())
        fields = [
            self.subject("value", env, depth - 1) if r.random() < 0.7 else None
            for _ in range(nfields)
        ]
        return nc.DObj(cls, fields)


SUBJECT_DECLS = {
    "value": "(subj)",
    "long": "(:long subj 0)",
    "cstring": "(:cstring subj)",
    "hnode": "(:hnode subj)",
    "hstmt": "(:hstmt subj)",
}


def test_randomized_graph_oracle_equivalence(stdenv):
    rng = random.Random(464646)
    n_cases = 2000
    hits = 0
    total_subjects = 0
    for case in range(n_cases):
        gen = Gen(rng, stdenv)
        ctype = rng.choice(list(SUBJECT_DECLS))
        nclauses = rng.randint(1, 3)
        clause_texts = [gen.pattern(ctype, rng.randint(1, 3)) for _ in range(nclauses)]
        m, graph = compile_clauses(SUBJECT_DECLS[ctype], clause_texts, stdenv)
        _m2, unshared = compile_clauses(
            SUBJECT_DECLS[ctype], clause_texts, stdenv, share=False
        )
        env = gen.make_env()
        patterns = [c.pattern for c in m.clauses]
        for _ in range(4):
            subject = gen.subject(ctype, env)
            total_subjects += 1
            want = oracle_match(patterns, subject, env)
            got_clause, got_binds = interpret_graph(graph, subject, env)
            assert got_clause == want.selected_clause, (clause_texts, subject)
            if want.selected_clause is not None:
                hits += 1
                for name, val in want.bindings.items():
                    assert nc.ident_eq(got_binds[name], val), (clause_texts, name)
            raw_clause, raw_binds = interpret_graph(unshared, subject, env)
            assert raw_clause == got_clause
            if got_clause is not None:
                for name in got_binds:
                    assert nc.ident_eq(raw_binds[name], got_binds[name])
    # the generator should produce a healthy share of actual matches
    assert hits >= total_subjects // 10, (hits, total_subjects)


FIELD_DECL_MATCH_CLAUSES = [
    """?(node_field_decl
         ?(node_identifier ?(cstring_same "mcfr_varptr"))
         ?(node_array_type ?telemtype
                           ?(node_integer_type_bounded ?tindextype
                                                       ?(node_integer_cst 0)
                                                       ?(node_integer_cst ?lmax)
                                                       ?tsize)))""",
    "?_",
]


def _field_decl_subject(lmax=9, name="mcfr_varptr"):
    itype = nc.HIntegerType(nc.HIntegerCst(0), nc.HIntegerCst(lmax), nc.HIntegerCst(64))
    atype = nc.HArrayType(nc.HIdentifier("voidptr"), itype)
    return nc.HFieldDecl(nc.HIdentifier(name), atype)


def test_field_decl_match_scale_and_equivalence(stdenv):
    m, graph = compile_clauses("(:hnode subj)", FIELD_DECL_MATCH_CLAUSES, stdenv)
    reachable = graph.reachable()
    assert len(reachable) >= 15, len(reachable)
    used_data = set()
    for sid in reachable:
        step = graph.steps[sid]
        used_data.update(graph.step_reads(step))
        used_data.update(graph.step_writes(step))
    assert len(used_data) >= 10, len(used_data)
    assert reachable == set(graph.steps)

    _m2, unshared = compile_clauses(
        "(:hnode subj)", FIELD_DECL_MATCH_CLAUSES, stdenv, share=False
    )
    patterns = [c.pattern for c in m.clauses]
    subjects = [
        _field_decl_subject(),
        _field_decl_subject(lmax=3),
        _field_decl_subject(name="other_field"),
        nc.HFieldDecl(nc.HIdentifier("mcfr_varptr"), nc.HIdentifier("notarray")),
        nc.HIdentifier("mcfr_varptr"),
        None,
    ]
    for s in subjects:
        want = oracle_match(patterns, s, {})
        got_clause, got_binds = interpret_graph(graph, s, {})
        raw_clause, _ = interpret_graph(unshared, s, {})
        assert got_clause == want.selected_clause == raw_clause
        if want.selected_clause == 0:
            assert got_binds["lmax"] == want.bindings["lmax"]
    ok = interpret_graph(graph, _field_decl_subject(lmax=9), {})
    assert ok[0] == 0 and ok[1]["lmax"] == 9
    # and the rendering stays parsable
    text = emit_dot(graph)
    assert text.startswith("digraph") and text.endswith("}\n")
