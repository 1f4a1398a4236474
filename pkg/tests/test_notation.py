import pytest

from orclayout.notation import (COLUMN, HFLOW, PIVOT, ROW, VFLOW, AltPosition, LayoutNode, ParseError, SizeSpec,
                                container, expand_pivot, parse, serialize, transpose, validate, widget)


def test_parse_nested_structure():
    root = parse("Column(HorizontalFlow(a,b,c), Row(VerticalFlow(d,e), TextBox))")
    assert root.kind == COLUMN
    assert len(root.children) == 2
    hf = root.children[0]
    assert hf.kind == HFLOW and [c.name for c in hf.children] == ["a", "b", "c"]
    assert root.children[1].children[0].kind == VFLOW


def test_parse_attributes_and_defaults():
    root = parse("Row(a[min=10x5, pref=100x50, max=200x80, weight=2, optional=true, priority=3], b)")
    a, b = root.children
    assert a.size == SizeSpec(10, 100, 200, 5, 50, 80, 2.0, True, 3.0)
    assert b.size == SizeSpec()
    assert b.size.max_w == 1e7 and b.size.pref_w == 100 and b.size.pref_h == 30


def test_aliases_and_flow_attributes():
    root = parse("Row(HF(a, b)[group=g], VF(c, d)[group=g], HF(e, f, g2, h)[balanced=true],"
                 " HF(i)[hole=40x20@5:10])")
    assert [c.kind for c in root.children] == [HFLOW, VFLOW, HFLOW, HFLOW]
    assert root.children[2].balanced
    assert root.children[3].hole.w == 40 and root.children[3].hole.y == 10
    assert validate(root) == []


@pytest.mark.parametrize("text", ["Row(a", "Row(a b)", "Row(a[pref=10])", "Row(a[bogus=1])",
                                  "Row(a[min=-1x2])", "Row(a)[id=1x2]", ")"])
def test_parse_errors_carry_location(text):
    with pytest.raises(ParseError) as err:
        parse(text)
    assert err.value.line >= 1 and err.value.col >= 1


def test_min_above_max_rejected_with_location():
    with pytest.raises(ParseError) as err:
        parse("Row(\n  ok,\n  bad[min=200x40, pref=150x40, max=100x40])")
    assert (err.value.line, err.value.col) == (3, 3)
    assert "min <= pref <= max" in err.value.message
    built = container("Row", widget("ok"), widget("bad", min_w=200, pref_w=150, max_w=100))
    diags = validate(built)
    assert len(diags) == 1 and diags[0].location == "root/1"


def test_validate_collects_several_problems():
    root = container("Row", widget("a"), widget("a"), container("Pivot", widget("x")),
                     container("HF", container("Row", widget("y"))))
    messages = " | ".join(d.message for d in validate(root))
    assert "duplicate widget name" in messages
    assert "Pivot child must be a Row or Column" in messages
    assert "flow children must be widgets" in messages


def test_validate_alt_target_rules():
    ok = container("Column", LayoutNode("Widget", name="t", alt=AltPosition("body")),
                   container("Row", widget("m"), node_id="body"))
    assert validate(ok) == []
    missing = container("Column", LayoutNode("Widget", name="t", alt=AltPosition("nowhere")), widget("m"))
    assert any("not found" in d.message for d in validate(missing))
    inside = container("Row", LayoutNode("Widget", name="t", alt=AltPosition("body")), widget("m"),
                       node_id="body")
    assert any("outside" in d.message for d in validate(inside))


def test_connected_group_needs_two_flows():
    root = container("Row", container("HF", widget("a"), group="g"))
    assert any("exactly 2 flows" in d.message for d in validate(root))


def test_transpose_swaps_container_and_flow_children_only():
    inner = container("Row", container("HF", widget("z")))
    col = container("Column", container("HF", widget("a")), inner)
    t = transpose(col)
    assert t.kind == ROW
    assert t.children[0].kind == VFLOW
    assert t.children[1] == inner  # deeper nesting untouched


def test_expand_pivot_gives_declared_then_transposed():
    piv = container("Pivot", container("Column", container("HF", widget("a")), widget("b")))
    first, second = expand_pivot(piv)
    assert first.kind == COLUMN and second.kind == ROW
    assert second.children[0].kind == VFLOW
    with pytest.raises(ValueError):
        expand_pivot(widget("a"))


def test_round_trip_fixture(fixtures):
    for name in ("fig4.orc", "teaser.orc"):
        root = parse((fixtures / name).read_text())
        assert parse(serialize(root)) == root


def test_pivot_kind_constant():
    assert parse("Pivot(Row(a, b))").kind == PIVOT
