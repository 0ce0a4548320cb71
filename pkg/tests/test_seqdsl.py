import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dnss import SpinSystemParams, seqdsl
from dnss.errors import (
    InvalidPreset, NegativeDuration, SequenceSyntaxError, UnboundParameter,
)
from dnss.seqdsl import (
    BinOp, Name, Neg, Num, Pi, Pulse, Repeat, Wait, compile_program, format_program, parse,
    preset, realize,
)

CPMG_TEXT = "repeat 2 { wait tau/2; pulse pi x; wait tau; pulse pi x; wait tau/2; }"


def durations_ns(seg):
    return [round(s.duration_s * 1e9, 9) for s in seg.period]


def test_parse_cpmg_shape():
    prog = parse(CPMG_TEXT)
    assert len(prog.body) == 1
    rep = prog.body[0]
    assert isinstance(rep, Repeat) and rep.count == 2
    assert [type(s) for s in rep.body] == [Wait, Pulse, Wait, Pulse, Wait]
    assert rep.body[0].duration == BinOp("/", Name("tau"), Num(2.0))
    assert rep.body[1] == Pulse(Pi(), "x")


def test_pulse_with_bound_eps():
    prog = parse("param eps = 0; pulse pi+eps x; wait tau;")
    seg = compile_program(prog, {"tau": 1e-7, "tp": 0.0, "eps": 0.05})
    assert math.isclose(seg.period[0].angle_rad, math.pi + 0.05)
    assert seg.period[0].phase_rad == 0.0


def test_bad_axis_reports_token():
    with pytest.raises(SequenceSyntaxError) as exc:
        parse("pulse pi z q")
    assert exc.value.token == "q"
    assert (exc.value.line, exc.value.col) == (1, 12)


def test_unknown_axis():
    with pytest.raises(SequenceSyntaxError) as exc:
        parse("wait tau;\npulse pi z;")
    assert exc.value.token == "z" and exc.value.line == 2


@pytest.mark.parametrize("text", [
    "wait tau", "repeat 0 { wait tau; }", "repeat 2.5 { wait tau; }", "repeat 2 { }",
    "pulse pi;", "wait (tau;", "param = 3;", "", "wait tau; }", "wait tau $;",
])
def test_syntax_errors(text):
    with pytest.raises(SequenceSyntaxError):
        parse(text)


def test_unbound_name_location():
    with pytest.raises(UnboundParameter) as exc:
        parse("wait tau;\n  wait gamma;")
    assert exc.value.name == "gamma" and (exc.value.line, exc.value.col) == (2, 8)


def test_comments_and_whitespace():
    a = parse("# header\nrepeat 3 {  # period\n wait tau/2 ; pulse pi x;wait tau/2;}\n")
    b = parse("repeat 3 { wait tau/2; pulse pi x; wait tau/2; }")
    assert a == b


def test_precedence():
    prog = parse("param a = 1 - 2 - 3; param b = 2 * (3 + 4) / 7; param c = -2 * 3; wait tau;")
    env = seqdsl.resolve_bindings(prog, {})
    assert env["a"] == -4 and env["b"] == 2 and env["c"] == -6


def test_cpmg_delta_timing():
    seg = realize(preset("cpmg"), SpinSystemParams(larmor_hz=2.1e6), 238e-9)
    assert durations_ns(seg) == [119, 0, 238, 0, 119]
    assert [s.kind for s in seg.period] == ["free", "pulse", "free", "pulse", "free"]
    assert math.isclose(seg.period_duration_s, 476e-9)


def test_cpmg_center_timing_with_width():
    p = SpinSystemParams(larmor_hz=2.1e6, pulse_width_s=40e-9)
    seg = realize(preset("cpmg"), p, 238e-9)
    assert durations_ns(seg) == [99, 40, 198, 40, 99]
    assert math.isclose(seg.period_duration_s, 476e-9)
    assert math.isclose(seg.period[1].rabi_rad_s * 40e-9, math.pi)


def test_edge_timing_keeps_waits():
    p = SpinSystemParams(larmor_hz=2.1e6, pulse_width_s=40e-9)
    seg = realize(preset("cpmg"), p, 238e-9, timing="edge")
    assert durations_ns(seg) == [119, 40, 238, 40, 119]
    with pytest.raises(ValueError):
        realize(preset("cpmg"), p, 238e-9, timing="middle")


def test_negative_duration():
    p = SpinSystemParams(larmor_hz=2.1e6, pulse_width_s=40e-9)
    with pytest.raises(NegativeDuration) as exc:
        realize(preset("cpmg"), p, 30e-9)
    assert exc.value.line == 1
    with pytest.raises(NegativeDuration):
        realize(preset("cpmg"), p, 40e-9)
    with pytest.raises(NegativeDuration):
        compile_program(parse("wait tau - 1;"), {"tau": 0.5, "tp": 0.0})


def test_presets():
    p = SpinSystemParams(larmor_hz=2.1e6)
    one = preset("cpmg", n_pulses=2)
    assert one.default_repetitions == 1
    seg = realize(one, p, 238e-9)
    assert seg.pulses_per_period == 2 and seg.repetitions == 1
    assert preset("cpmg", n_pulses=336).default_repetitions == 168
    xy8 = realize(preset("xy8"), p, 238e-9)
    phases = [s.phase_rad for s in xy8.period if s.kind == "pulse"]
    h = math.pi / 2
    assert phases == [0, h, 0, h, h, 0, h, 0]


def test_flip_zero_eps_equals_cpmg():
    p = SpinSystemParams(larmor_hz=2.1e6, pulse_width_s=20e-9)
    a = realize(preset("dnss_flip", p, eps=0.0), p, 250e-9)
    b = realize(preset("cpmg", p), p, 250e-9)
    assert a == b


def test_preset_errors():
    with pytest.raises(InvalidPreset):
        preset("udd")
    with pytest.raises(InvalidPreset):
        preset("cpmg", n_pulses=3)
    with pytest.raises(InvalidPreset):
        preset("xy8", n_pulses=4)
    with pytest.raises(InvalidPreset):
        preset("dnss_detuned", SpinSystemParams(larmor_hz=1e6, pulse_width_s=40e-9))
    with pytest.raises(InvalidPreset):
        preset("dnss_flip", SpinSystemParams(larmor_hz=1e6, detuning_hz=1e5))


def test_with_repetitions():
    prog = preset("cpmg", n_pulses=4).with_repetitions(7)
    assert prog.default_repetitions == 7
    assert prog.period_block == preset("cpmg").period_block


def test_body_without_top_repeat_is_one_period():
    prog = parse("wait tau/2; pulse pi x; wait tau/2;")
    seg = compile_program(prog, {"tau": 1e-7, "tp": 0.0})
    assert seg.repetitions == 1 and seg.pulses_per_period == 1


# --- round trip -------------------------------------------------------------

names = st.sampled_from(["tau", "tp", "a", "b"])
nums = st.floats(0, 1e6, allow_nan=False, allow_infinity=False).map(Num)
leaves = st.one_of(nums, st.just(Pi()), names.map(Name))
exprs = st.recursive(
    leaves,
    lambda inner: st.one_of(
        inner.map(Neg),
        st.builds(BinOp, st.sampled_from("+-*/"), inner, inner),
    ),
    max_leaves=8,
)
statements = st.recursive(
    st.one_of(exprs.map(Wait), st.builds(Pulse, exprs, st.sampled_from(["x", "y"]))),
    lambda inner: st.builds(Repeat, st.integers(1, 20), st.lists(inner, min_size=1, max_size=3).map(tuple)),
    max_leaves=6,
)
programs = st.builds(
    seqdsl.SequenceProgram,
    st.just((seqdsl.Param("a", Num(1.0)), seqdsl.Param("b", BinOp("*", Name("a"), Pi())))),
    st.lists(statements, min_size=1, max_size=4).map(tuple),
)


@settings(max_examples=300, deadline=None)
@given(programs)
def test_round_trip(prog):
    text = format_program(prog)
    again = parse(text)
    assert again == prog
    assert format_program(again) == text


def test_round_trip_presets():
    for name in seqdsl.PRESETS:
        prog = preset(name, n_pulses=8)
        text = format_program(prog)
        assert parse(text) == prog
        assert format_program(parse(text)) == text
