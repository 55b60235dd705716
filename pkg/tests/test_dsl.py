from pathlib import Path

import pytest

from kflow.dsl import ParseError, parse, parse_file, render
from kflow.protocols import BUILTINS

SPECS = Path(__file__).resolve().parent.parent / "specs"


@pytest.mark.parametrize("name", sorted(BUILTINS))
def test_shipped_file_equals_builtin(name):
    assert parse_file(SPECS / f"{name}.kf") == BUILTINS[name]()


@pytest.mark.parametrize("name", sorted(BUILTINS))
def test_round_trip(name):
    spec = BUILTINS[name]()
    assert parse(render(spec)) == spec
    assert render(parse(render(spec))) == render(spec)


def test_clause_order_and_comments_do_not_matter():
    text = """
    # reordered
    protocol t {
      theorem th: exists A . honest(A), knows(A);
      rule b: premises {} conclude I where honest(I);
      rule a: premises {I} conclude enc(key=I, plain={I});
      options PublicKeyCryptography IdentitiesAreKeys;
      roles I;
    }
    """
    spec = parse(text)
    assert [s.label for s in spec.schemas] == ["a", "b"]
    assert spec.options == ("IdentitiesAreKeys", "PublicKeyCryptography")
    assert parse(render(spec)) == spec


def test_empty_document():
    with pytest.raises(ParseError) as e:
        parse("")
    assert e.value.codes == ["SyntaxError"]
    assert "header" in e.value.diagnostics[0].message


def test_unbound_variable_has_span():
    text = "protocol x {\n  roles I;\n  rule r: premises {} conclude enc(key=I, plain={Q});\n  theorem t: exists . ;\n}\n"
    with pytest.raises(ParseError) as e:
        parse(text, file="x.kf")
    (d,) = e.value.diagnostics
    assert d.code == "UnboundVariable"
    assert (d.span.file, d.span.line, d.span.start, d.span.end) == ("x.kf", 3, 50, 51)


def test_unknown_primitive_and_duplicate_label():
    text = """protocol x { primitives nope; roles I;
      rule a: premises {} conclude I; rule a: premises {} conclude I;
      theorem t: exists . ; }"""
    with pytest.raises(ParseError) as e:
        parse(text)
    assert sorted(e.value.codes) == ["DuplicateRuleLabel", "UnknownPrimitive"]


@pytest.mark.parametrize(
    "text",
    [
        "protocol x { roles I; theorem t: exists A . honest(A, A); }",
        "protocol x { roles I; theorem t: exists A . bogus(A); }",
        "protocol x { roles i; theorem t: exists . ; }",
        "protocol x { roles I; theorem t: exists . ; } trailing",
        "protocol x { roles I; rule r: premises {} conclude enc(key=I); theorem t: exists . ; }",
        "protocol x { roles I; }",
        "protocol x { options Nope; theorem t: exists . ; }",
        "protocol x { theorem t: exists A . knows(foo); }",
        "protocol x { theorem t: exists A . kind(A, banana); }",
        "protocol x { roles I; theorem t: exists . ; ",
        "protocol x { roles I; theorem t: exists . ; @ }",
        "protocol x { roles I; rule r: premises {} conclude " + "puf(" * 100 + "I" + ")" * 100 + "; theorem t: exists . ; }",
    ],
)
def test_syntax_errors(text):
    with pytest.raises(ParseError) as e:
        parse(text)
    assert e.value.diagnostics
    for d in e.value.diagnostics:
        assert d.span.start <= d.span.end


def test_invalid_utf8():
    with pytest.raises(ParseError) as e:
        parse(b"protocol \xff")
    assert "UTF-8" in e.value.diagnostics[0].message


def test_minimal_render():
    from kflow.engine import TheoremSpec
    from kflow.protocols import ProtocolSpec

    spec = ProtocolSpec.make("m", (), (), (), (), TheoremSpec("t", (), ()))
    assert render(spec) == "protocol m {\n\n  theorem t:\n    exists .\n      ;\n}\n"
    assert parse(render(spec)) == spec
