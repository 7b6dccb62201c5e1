"""Oracle matcher examples."""

from __future__ import annotations

import pytest

from meltlite import matchc, normcheck as nc
from meltlite.normcheck import oracle_match
from meltlite.stdlib import load_stdlib


@pytest.fixture(scope="module")
def stdenv():
    return load_stdlib()


def test_wildcard_clause_any_subject():
    res = oracle_match([matchc.PWild(None)], nc.DBoxLong(3))
    assert res.selected_clause == 0 and res.bindings == {}


def test_symbol_instance_binds_name(stdenv):
    cls = stdenv.lookup("class_symbol").payload
    named_name = stdenv.root().field_registry["named_name"]
    pat = matchc.PInstance(None, cls, [(named_name, matchc.PVar(None, "synam"))])
    name = nc.DBoxString("x")
    res = oracle_match([pat], nc.DObj(cls, [name, None]))
    assert res.selected_clause == 0
    assert res.bindings["synam"] is name


def test_no_clause_matches(stdenv):
    cls = stdenv.lookup("class_symbol").payload
    pat = matchc.PInstance(None, cls, [])
    res = oracle_match([pat], nc.DBoxLong(1))
    assert res.selected_clause is None and res.bindings == {}


def test_nonlinear_identity(stdenv):
    sub = matchc.PVar(None, "v")
    m = stdenv.lookup("assign_single").payload
    node = nc.HIdentifier("a")
    pat = matchc.PMatcher(None, m, [], [matchc.PVar(None, "v"), matchc.PVar(None, "v")])
    same = nc.HAssign(node, node)
    diff = nc.HAssign(node, nc.HIdentifier("a"))
    assert oracle_match([pat], same).selected_clause == 0
    assert oracle_match([pat], diff).selected_clause is None


def test_deterministic(stdenv):
    m = stdenv.lookup("isbiggereven").payload
    pat = matchc.PMatcher(None, m, [], [matchc.PVar(None, "h")])
    # isbiggereven takes one input; reuse through env evaluation
    from meltlite.expander import SLongLit

    pat.inputs = [SLongLit(None, 3)]
    r1 = oracle_match([pat], 8)
    r2 = oracle_match([pat], 8)
    assert r1.selected_clause == r2.selected_clause == 0
    assert r1.bindings == r2.bindings == {"h": 4}
    assert oracle_match([pat], 7).selected_clause is None
    assert oracle_match([pat], 2).selected_clause is None
