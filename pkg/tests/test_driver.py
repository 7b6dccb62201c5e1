"""Driver tests: translate and doc modes, diagnostics, atomic writes."""

from __future__ import annotations

from pathlib import Path

import pytest

from meltlite.driver import Config, cmd_doc, cmd_translate, main

DATA = Path(__file__).parent / "data"


def test_translate_helloworld_writes_unit(tmp_path):
    cfg = Config(work_dir=tmp_path)
    written = cmd_translate([DATA / "helloworld.melt"], cfg)
    names = [p.name for p in written]
    assert names == ["helloworld+00.c"]
    assert (tmp_path / "helloworld+00.c").read_text().startswith("/* helloworld+00.c")


def test_translate_error_has_position_and_status(tmp_path, capsys):
    bad = tmp_path / "bad.melt"
    bad.write_text("(defun f (x) (nowhere x))\n")
    status = main(["translate", str(bad), "--work-dir", str(tmp_path)])
    err = capsys.readouterr().err
    assert status == 1
    assert "bad.melt:1:13" in err  # 0-based column of the offending form
    assert not list(tmp_path.glob("bad+*.c"))  # nothing partial on error


def test_no_partial_units_on_late_error(tmp_path):
    # second file fails; the first file's units stay, no bad+*.c appears
    good = tmp_path / "good.melt"
    good.write_text("(defun f (x) x)\n")
    bad = tmp_path / "zbad.melt"
    bad.write_text("(unbound_operator 1)\n")
    status = main(["translate", str(good), str(bad), "--work-dir", str(tmp_path)])
    assert status == 1
    assert (tmp_path / "good+00.c").exists()
    assert not list(tmp_path.glob("zbad+*.c"))
    assert not list(tmp_path.glob("*.tmp*"))


def test_translate_chains_environments(tmp_path):
    first = tmp_path / "first.melt"
    first.write_text("(defun fone (x) x)\n(export_values fone)\n")
    second = tmp_path / "second.melt"
    second.write_text("(defun ftwo (x) (fone x))\n")
    cfg = Config(work_dir=tmp_path)
    written = cmd_translate([first, second], cfg)
    assert [p.name for p in written] == ["first+00.c", "second+00.c"]


def test_unexported_name_invisible_downstream(tmp_path):
    first = tmp_path / "first.melt"
    first.write_text("(defun hidden (x) x)\n")
    second = tmp_path / "second.melt"
    second.write_text("(defun g (x) (hidden x))\n")
    status = main(["translate", str(first), str(second), "--work-dir", str(tmp_path)])
    assert status == 1


def test_dump_match_writes_dot_files(tmp_path):
    src = tmp_path / "mm.melt"
    src.write_text(
        "(defun f (v) (match v (?_ v)))\n"
        "(defun g (v) (match v (?(instance class_symbol) v) (?_ ())))\n"
    )
    status = main(
        ["translate", str(src), "--work-dir", str(tmp_path), "--dump-match"]
    )
    assert status == 0
    dots = sorted(p.name for p in tmp_path.glob("mm_match*.dot"))
    assert dots == ["mm_match0.dot", "mm_match1.dot"]
    text = (tmp_path / "mm_match1.dot").read_text()
    assert text.startswith("digraph match1 {")


def test_split_flag(tmp_path):
    src = tmp_path / "many.melt"
    src.write_text("\n".join(f"(defun f{i} (x) x)" for i in range(5)))
    status = main(["translate", str(src), "--work-dir", str(tmp_path), "--split", "3"])
    assert status == 0
    assert (tmp_path / "many+00.c").exists() and (tmp_path / "many+01.c").exists()


# --- doc mode ---


def test_doc_negi_entry(tmp_path):
    src = tmp_path / "prims.melt"
    src.write_text(
        "(defprimitive mynegi (:long i) :long\n"
        "  :doc #{Integer unary negation of $i.}#\n"
        "  #{(-($i))}#)\n"
    )
    out = cmd_doc([src], Config(work_dir=tmp_path))
    text = out.read_text()
    assert "@deffn {primitive} mynegi (:long i) -> :long" in text
    assert "Integer unary negation of @var{i}." in text
    assert "@end deffn" in text


def test_doc_without_docstrings(tmp_path):
    src = tmp_path / "plain.melt"
    src.write_text("(defun f (x) x)\n")
    out = cmd_doc([src], Config(work_dir=tmp_path))
    text = out.read_text()
    assert "@deffn {un} f (:value x)" in text or "@deffn {un} f" in text


def test_doc_merges_inputs_in_order(tmp_path):
    a = tmp_path / "a.melt"
    a.write_text("(defun fa (x) x)\n(export_values fa)\n")
    b = tmp_path / "b.melt"
    b.write_text("(defun fb (x) (fa x))\n")
    out = cmd_doc([a, b], Config(work_dir=tmp_path))
    text = out.read_text()
    assert text.index("fa") < text.index("fb")


def test_doc_class_signature(tmp_path):
    src = tmp_path / "cls.melt"
    src.write_text("(defclass class_z :super class_root :fields (z_val))\n")
    out = cmd_doc([src], Config(work_dir=tmp_path))
    assert "@deffn {class} class_z :super class_root :fields (z_val)" in out.read_text()


def test_cli_doc_output_option(tmp_path, capsys):
    src = tmp_path / "one.melt"
    src.write_text("(defun f (x) x)\n")
    outfile = tmp_path / "docs.texi"
    status = main(["doc", str(src), "-o", str(outfile), "--work-dir", str(tmp_path)])
    assert status == 0
    assert outfile.exists()
