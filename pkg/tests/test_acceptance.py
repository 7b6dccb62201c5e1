"""Primary acceptance criteria, one test per criterion.

Run with ``pytest tests/test_acceptance.py -v -s`` to see one PASS/FAIL
line per criterion; each runs at its stated tolerance and time budget.
"""

from __future__ import annotations

import random
import re
import time
from contextlib import contextmanager
from pathlib import Path

import pytest

from meltlite import expander as xp
from meltlite import matchc, normcheck as nc
from meltlite.driver import Config, translate_source
from meltlite.matchc import (
    FillCopy,
    FillStep,
    FlagConjStep,
    PredIdentData,
    PredIsInstance,
    SuccessStep,
    TestStep,
    compile_match,
    emit_dot,
    interpret_graph,
)
from meltlite.normalizer import is_atom, normalize
from meltlite.normcheck import oracle_match
from meltlite.reader import MsRef, MsText, read_unit
from meltlite.stdlib import load_stdlib, stdlib_sources

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="module")
def stdenv():
    return load_stdlib()


@contextmanager
def criterion(name, budget_s):
    t0 = time.time()
    try:
        yield
    except BaseException:
        print(f"{name} FAIL ({time.time() - t0:.2f}s)")
        raise
    dt = time.time() - t0
    assert dt < budget_s, f"{name} exceeded its {budget_s}s budget: {dt:.2f}s"
    print(f"{name} PASS ({dt:.2f}s)")


def expand(text, env):
    x = xp.Expander(env, "<acc>")
    return x.expand_expr(read_unit(text, "<acc>")[0], env)


def find_match(node):
    from meltlite.expander import iter_ast_children

    stack = [node]
    while stack:
        n = stack.pop()
        if isinstance(n, xp.SMatch):
            return n
        stack.extend(iter_ast_children(n))
    raise AssertionError("no match node")


def compile_text(text, env, share=True):
    ast = normalize(expand(text, env))
    m = find_match(ast)
    return m, compile_match(m, env, share=share)


def test_a1_macrostring_decomposition():
    with criterion("A1 macro-string decomposition", 1.0):
        raw = '#{/*$P#A*/printf("a=%d\\n", $a);}#'
        [e] = read_unit(raw, "<a1>")
        # exactly the 5 elements, byte-exact chunk texts: strings
        # "/*", "A*/printf(\"a=%d\\n\", ", ");" and symbols p, a
        assert e.chunks == (
            MsText("/*"),
            MsRef("p", "P"),
            MsText('A*/printf("a=%d\\n", '),
            MsRef("a", "a"),
            MsText(");"),
        )
        assert len(e.chunks) == 5


def test_a2_helloworld_translation(stdenv):
    with criterion("A2 helloworld translation", 1.0):
        src = (DATA / "helloworld.melt").read_text()
        module, units, _ = translate_source(
            src, "helloworld.melt", stdenv, "helloworld", Config()
        )
        assert len(units) == 1 and units[0][0] == "helloworld+00.c"
        golden = (DATA / "helloworld_00.golden.c").read_text()
        assert units[0][1] == golden
        stripped = [ln.strip() for ln in units[0][1].splitlines()]
        assert "int i=0; /* our HELLOWORLDCHUNK__1 */" in stripped
        assert (
            'HELLOWORLDCHUNK__1_label: printf("hello world from MELT\\n");'
            in stripped
        )
        assert "if (i++ < 3) goto HELLOWORLDCHUNK__1_label; ;" in stripped


def _temp_bindings(node, acc):
    from meltlite.expander import iter_ast_children

    if isinstance(node, (xp.SLet, xp.SLetrec)):
        for b in node.bindings:
            if b.slot.kind == "temp":
                acc.append(b)
    for child in iter_ast_children(node):
        _temp_bindings(child, acc)
    return acc


def _assert_atomic(node):
    from meltlite.expander import iter_ast_children

    if isinstance(node, (xp.SApply, xp.SSend)):
        parts = list(node.args) + [
            node.fn if isinstance(node, xp.SApply) else node.recv
        ]
        for a in parts:
            assert is_atom(a)
    if isinstance(node, xp.SPrimCall):
        for a in node.args:
            assert is_atom(a)
    if isinstance(node, xp.SMatch):
        assert is_atom(node.subject)
    for child in iter_ast_children(node):
        _assert_atomic(child)


def _ast_equal(a, b):
    import dataclasses

    if type(a) is not type(b):
        return False
    if isinstance(a, xp.LocalSlot):
        if a.kind == "temp" == b.kind:
            return getattr(a, "index", None) == getattr(b, "index", None) and (
                a.ctype is b.ctype
            )
        return a is b
    if dataclasses.is_dataclass(a) and not isinstance(a, type):
        return all(
            _ast_equal(getattr(a, f.name), getattr(b, f.name))
            for f in dataclasses.fields(a)
            if f.name != "loc"
        )
    if isinstance(a, (list, tuple)):
        return len(a) == len(b) and all(_ast_equal(x, y) for x, y in zip(a, b))
    return a is b or a == b


def test_a3_normalization(stdenv):
    with criterion("A3 normalization", 10.0):
        # (+i (negi x) 1): exactly two fresh temporaries bound in sequence
        ast = normalize(expand("(let ((:long x 5)) (+i (negi x) 1))", stdenv))
        temps = _temp_bindings(ast, [])
        assert len(temps) == 2
        t0, t1 = temps
        assert t0.init.prim.name == "negi" and t1.init.prim.name == "+i"
        assert t1.init.args[0].binding is t0.slot

        # property suite over 1,000 random small trees
        rng = random.Random(3411)
        from test_normalizer import RandomAstGen  # reuse the generator

        for _ in range(1000):
            gen = RandomAstGen(rng, stdenv)
            text = gen.source(depth=rng.randint(1, 3))
            src_ast = expand(text, stdenv)
            normed = normalize(src_ast)
            _assert_atomic(normed)
            again = normalize(normed)
            assert _ast_equal(again, normed), text


A4_EXAMPLE = """
(let ((v))
  (match v
    (?(instance class_symbol :named_name ?synam) synam)
    (?(instance class_container :container_value ?(and ?cval ?(integerbox_of ?_)))
      cval)))
"""


def test_a4_match_graph_equivalence(stdenv):
    with criterion("A4 match-graph equivalence", 30.0):
        from test_match_equiv import ENV_DECLS, Gen, SUBJECT_DECLS, compile_clauses

        rng = random.Random(99173)
        for _case in range(2000):
            gen = Gen(rng, stdenv)
            ctype = rng.choice(list(SUBJECT_DECLS))
            clause_texts = [
                gen.pattern(ctype, rng.randint(1, 3))
                for _ in range(rng.randint(1, 3))
            ]
            m, graph = compile_clauses(SUBJECT_DECLS[ctype], clause_texts, stdenv)
            env = gen.make_env()
            patterns = [c.pattern for c in m.clauses]
            subject = gen.subject(ctype, env)
            want = oracle_match(patterns, subject, env)
            got_clause, got_binds = interpret_graph(graph, subject, env)
            assert got_clause == want.selected_clause, (clause_texts, subject)
            for name, val in want.bindings.items():
                assert nc.ident_eq(got_binds[name], val)

        # the two-clause example: shared matched-root data node under
        # both class tests, and parsable dot output
        _m, g = compile_text(A4_EXAMPLE, stdenv)
        class_tests = [
            g.steps[s]
            for s in g.reachable()
            if isinstance(g.steps[s], TestStep)
            and isinstance(g.steps[s].pred, PredIsInstance)
        ]
        assert len(class_tests) == 2
        assert {t.pred.data for t in class_tests} == {g.root}
        from test_matchc import parse_dot

        nodes, edges = parse_dot(emit_dot(g))
        assert nodes and edges


def test_a5_nonlinearity(stdenv):
    with criterion("A5 non-linear patterns", 1.0):
        _m, g = compile_text(
            "(let ((:hstmt g)) (match g (?(assign_single ?v ?v) ())))", stdenv
        )
        fills_of_patvar = [
            s
            for s in g.reachable()
            if isinstance(g.steps[s], FillStep)
            and isinstance(g.steps[s].action, FillCopy)
            and g.data[g.steps[s].action.dst].role == "patvar"
        ]
        ident_tests = [
            s
            for s in g.reachable()
            if isinstance(g.steps[s], TestStep)
            and isinstance(g.steps[s].pred, PredIdentData)
        ]
        assert len(fills_of_patvar) == 1
        assert len(ident_tests) == 1


def test_a6_stdlib_translation_throughput():
    with criterion("A6 stdlib translation throughput", 5.0):
        from meltlite.stdlib import make_root_env
        from meltlite.normalizer import normalize_module
        from meltlite.cgen import EmitCtx, compile_all_matches, emit_module
        from meltlite.stdlib import expand_stdlib

        total_lines = sum(
            len(p.read_text().splitlines()) for p in stdlib_sources()
        )
        root = make_root_env()
        module, _env = expand_stdlib(root)
        normalize_module(module)
        compile_all_matches(module, module.env)
        units = emit_module(
            module, EmitCtx(module_name="meltstd", predefined_map=root.predef_map)
        )
        assert units and units[0][0].startswith("meltstd+")
        print(f"  ({total_lines} stdlib source lines)", end=" ")
