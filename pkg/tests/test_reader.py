"""Reader tests: lexical conventions, sugar, macro-strings, locations."""

from __future__ import annotations

import random

import pytest

from meltlite.errors import MeltReadError
from meltlite.reader import (
    Location,
    MsRef,
    MsText,
    SKeyword,
    SList,
    SLong,
    SMacroString,
    SString,
    SSymbol,
    emit_macrostring,
    read_macrostring,
    read_unit,
)


def read1(text):
    exprs = read_unit(text, "<test>")
    assert len(exprs) == 1
    return exprs[0]


def test_quote_sugar_is_a_list():
    e = read1("'a")
    assert isinstance(e, SList)
    assert [x.name for x in e.items] == ["quote", "a"]


def test_question_sugar_is_a_list():
    e = read1("?b")
    assert [x.name for x in e.items] == ["question", "b"]


def test_backquote_and_comma_sugar():
    assert read1("`x").items[0].name == "backquote"
    assert read1(",x").items[0].name == "comma"


def test_empty_list_is_nil():
    e = read1("()")
    assert isinstance(e, SList) and e.items == ()


def test_keyword_token():
    e = read1(":long")
    assert isinstance(e, SKeyword) and e.name == "long"


def test_case_insensitive_interning():
    a = read1("FOO")
    b = read1("foo")
    assert isinstance(a, SSymbol) and a.name is b.name


def test_operator_symbols():
    for tok in ["+i", "==i", "%iraw", "each_in_gimpleseq", "-", "<=i", "null?"]:
        e = read1(tok)
        assert isinstance(e, SSymbol) and e.name == tok.lower()


def test_long_literals():
    assert read1("23").value == 23
    assert read1("-1").value == -1
    assert read1("+7").value == 7


def test_long_overflow_is_error():
    with pytest.raises(MeltReadError):
        read1(str(2**63))
    assert read1(str(-(2**63))).value == -(2**63)


def test_token_starting_with_digit_is_error():
    with pytest.raises(MeltReadError):
        read1("1x")


def test_string_escapes():
    assert read1(r'"a\n\"b\\"').value == 'a\n"b\\'


def test_unknown_escape_is_error():
    with pytest.raises(MeltReadError):
        read1(r'"\q"')


def test_comments_skipped():
    exprs = read_unit("; a comment\n(f x) ; trailing\n", "<t>")
    assert len(exprs) == 1


def test_locations_track_lines_and_columns():
    exprs = read_unit("(a\n  bcd)\n", "u.melt")
    lst = exprs[0]
    assert lst.loc == Location("u.melt", 1, 0)
    a, bcd = lst.items
    assert a.loc == Location("u.melt", 1, 1)
    assert bcd.loc == Location("u.melt", 2, 2)


def test_every_location_within_source_bounds():
    src = "(f (g 1) \"s\" :k ?x 'y)\n(h)\n"
    lines = src.split("\n")

    def walk(e):
        assert 1 <= e.loc.line <= len(lines)
        assert 0 <= e.loc.col <= len(lines[e.loc.line - 1])
        if isinstance(e, SList):
            for sub in e.items:
                walk(sub)

    for e in read_unit(src, "b.melt"):
        walk(e)


def test_stray_close_paren_positioned():
    with pytest.raises(MeltReadError) as ei:
        read_unit("  )", "x.melt")
    assert ei.value.loc == Location("x.melt", 1, 2)


def test_unterminated_list_error():
    with pytest.raises(MeltReadError) as ei:
        read_unit("(a (b c)", "x.melt")
    assert ei.value.loc.col == 0


def test_unterminated_string_and_macrostring():
    with pytest.raises(MeltReadError):
        read_unit('"abc', "x.melt")
    with pytest.raises(MeltReadError):
        read_unit("#{abc", "x.melt")


# --- macro-strings ---


def test_macrostring_five_element_example():
    # #{/*$P#A*/printf("a=%d\n", $a);}# reads as a 5-chunk list; the
    # backslash stays literal inside macro-strings.
    e = read1('#{/*$P#A*/printf("a=%d\\n", $a);}#'.replace("\\\\", "\\"))
    assert isinstance(e, SMacroString)
    assert e.chunks == (
        MsText("/*"),
        MsRef("p", "P"),
        MsText('A*/printf("a=%d\\n", '),
        MsRef("a", "a"),
        MsText(");"),
    )


def test_macrostring_no_refs():
    e = read1("#{abc}#")
    assert e.chunks == (MsText("abc"),)


def test_macrostring_state_label_example():
    e = read1("#{$sta#_lab: goto $sta#_lab;}#")
    assert e.chunks == (
        MsRef("sta", "sta"),
        MsText("_lab: goto "),
        MsRef("sta", "sta"),
        MsText("_lab;"),
    )


def test_macrostring_ref_spelling_preserved():
    e = read1("#{$HELLOWORLDCHUNK#_label}#")
    ref = e.chunks[0]
    assert ref.name == "helloworldchunk"
    assert ref.spelling == "HELLOWORLDCHUNK"


def test_macrostring_dollar_dollar():
    e = read1("#{cost: $$3 and $x}#")
    assert e.chunks == (MsText("cost: $3 and "), MsRef("x", "x"))


def test_macrostring_backslash_literal():
    e = read1('#{printf("\\n");}#')
    assert e.chunks == (MsText('printf("\\n");'),)


def test_macrostring_bad_dollar():
    with pytest.raises(MeltReadError):
        read1("#{oops $ 3}#")
    with pytest.raises(MeltReadError):
        read1("#{oops $_}#")
    with pytest.raises(MeltReadError):
        read1("#{oops $}#")


def test_macrostring_hash_without_ref_is_literal():
    e = read1("#{a # b}#")
    assert e.chunks == (MsText("a # b"),)


def test_adjacent_text_chunks_merged():
    chunks = read_macrostring("ab$$cd", Location("m", 1, 0))
    assert chunks == (MsText("ab$cd"),)


def _random_chunks(rng):
    chunks = []
    want_text = rng.random() < 0.5
    for _ in range(rng.randint(1, 6)):
        if want_text:
            body = "".join(rng.choice("abz {}();$*/\n") for _ in range(rng.randint(1, 8)))
            chunks.append(MsText(body))
        else:
            name = "".join(rng.choice("abcxyz_") for _ in range(rng.randint(1, 5)))
            if name != "_":
                chunks.append(MsRef(name, name))
        want_text = not want_text
    merged = []
    for c in chunks:
        if isinstance(c, MsText) and not c.text:
            continue
        if merged and isinstance(c, MsText) and isinstance(merged[-1], MsText):
            merged[-1] = MsText(merged[-1].text + c.text)
        else:
            merged.append(c)
    return merged


def test_macrostring_roundtrip_random():
    rng = random.Random(42)
    for _ in range(300):
        chunks = _random_chunks(rng)
        if not chunks:
            continue
        text = emit_macrostring(chunks)
        back = read_macrostring(text, Location("rt", 1, 0))
        assert list(back) == chunks, (text, chunks, back)


def test_macrostring_error_position_spans_lines():
    with pytest.raises(MeltReadError) as ei:
        read_unit("#{line one\nxx $ yy}#", "m.melt")
    assert ei.value.loc.line == 2
    assert ei.value.loc.col == 3


def test_reading_is_total_on_noise():
    rng = random.Random(7)
    alphabet = "()'`,?:;#{}$\"\\abc123 \n\t"
    for _ in range(400):
        text = "".join(rng.choice(alphabet) for _ in range(rng.randint(0, 40)))
        try:
            read_unit(text, "<fuzz>")
        except MeltReadError as err:
            assert err.loc is not None
