import json
import os
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from samem.action_parse import (
    DEFAULT_VOCABULARY,
    Action,
    ActionPlan,
    CoTBlock,
    ParseError,
    parse_output,
    render_output,
    render_plan,
)

from conftest import FIXTURES

GOLDEN = os.path.join(FIXTURES, "golden")


def test_cot_less():
    out = parse_output("MOVE_FORWARD\nTURN_LEFT\nSTOP")
    assert out.cot is None
    assert out.plan.actions == (Action.MOVE_FORWARD, Action.TURN_LEFT, Action.STOP)


def test_actions_after_stop_dropped():
    assert parse_output("STOP\nMOVE_FORWARD").plan.actions == ("STOP",)


def test_no_actions():
    with pytest.raises(ParseError, match="no actions"):
        parse_output("Environment Perception: a room.\nNothing else.")


def test_truncates_to_five():
    out = parse_output("\n".join(["TURN_LEFT"] * 7))
    assert out.truncated and len(out.plan.actions) == 5


@pytest.mark.parametrize("text", [
    "move_forward", "Move Forward", "move-forward", "  MOVE_FORWARD. ", "**MOVE_FORWARD**", "1) move_forward",
    "`MOVE_FORWARD`", "[MOVE_FORWARD]",
])
def test_lenient_token_forms(text):
    assert parse_output(text).plan.actions == ("MOVE_FORWARD",)


def test_prose_line_is_not_a_plan():
    text = "Environment Perception: I will move forward into the room.\nTURN_LEFT"
    out = parse_output(text)
    assert out.plan.actions == ("TURN_LEFT",)
    assert "move forward" in out.cot.perception


def test_custom_vocabulary():
    vocab = DEFAULT_VOCABULARY + ("LOOK_UP", "LOOK_DOWN")
    assert parse_output("look up\nSTOP", vocab).plan.actions == ("LOOK_UP", "STOP")
    with pytest.raises(ParseError):
        parse_output("LOOK_UP")


def test_plan_invariants():
    with pytest.raises(ValueError):
        ActionPlan(())
    with pytest.raises(ValueError):
        ActionPlan(("STOP", "MOVE_FORWARD"))
    with pytest.raises(ValueError):
        ActionPlan(("TURN_LEFT",) * 6)


@pytest.mark.parametrize("name", ["full_cot", "markdown_cot", "no_cot", "long_plan"])
def test_golden(name):
    with open(os.path.join(GOLDEN, name + ".txt"), encoding="utf-8") as fh:
        out = parse_output(fh.read())
    with open(os.path.join(GOLDEN, name + ".json"), encoding="utf-8") as fh:
        expected = json.load(fh)
    assert list(out.plan.actions) == expected["actions"]
    assert out.truncated == expected["truncated"]
    if expected["cot"] is None:
        assert out.cot is None
    else:
        assert out.cot == CoTBlock(**expected["cot"])


plans = st.lists(st.sampled_from([a.value for a in Action if a is not Action.STOP]), min_size=0, max_size=4).flatmap(
    lambda xs: st.sampled_from([tuple(xs) + ("STOP",), tuple(xs)]).filter(bool))
section_text = st.text(alphabet=st.characters(whitelist_categories=("Ll", "Lu", "Nd", "Zs"), whitelist_characters=".,;"),
                       max_size=60).map(str.strip)


@given(plans)
def test_plan_round_trip(actions):
    plan = ActionPlan(actions)
    assert parse_output(render_plan(plan)).plan == plan


@given(plans, section_text, section_text, section_text)
def test_output_round_trip(actions, a, b, c):
    cot = CoTBlock(a, b, c)
    out = parse_output(render_output(cot, ActionPlan(actions)))
    assert out.plan == ActionPlan(actions)
    assert out.cot == cot


@given(st.binary(max_size=300))
def test_arbitrary_bytes_never_crash(blob):
    try:
        parse_output(blob)
    except ParseError:
        pass


@given(st.text(max_size=300))
def test_arbitrary_text_never_crash(text):
    try:
        parse_output(text)
    except ParseError:
        pass
