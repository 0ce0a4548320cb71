"""A small text language for dynamical-decoupling pulse sequences.

Example (one CPMG period repeated 168 times)::

    # CPMG-2Np with Np = 168
    repeat 168 {
        wait tau/2; pulse pi x; wait tau; pulse pi x; wait tau/2;
    }

Statements end with ``;``. ``param name = expr;`` declares a default that
compile-time bindings may override. Pulse axes are ``x`` or ``y``.
Expressions use ``+ - * /``, parentheses, numbers, ``pi`` and parameter
names. ``tau`` (pulse-centre spacing) and ``tp`` (pulse width) are always
supplied by the caller.

When the program body is a single top-level ``repeat``, its block is the
Floquet period and its count is the default number of repetitions.
"""

import dataclasses
import math
import re
from typing import Optional

from .errors import (
    InvalidParams,
    InvalidPreset,
    NegativeDuration,
    SequenceSyntaxError,
    UnboundParameter,
)
from .spinsys import Segment

EXTERNAL_NAMES = ("tau", "tp")
AXES = {"x": 0.0, "y": math.pi / 2}
KEYWORDS = {"wait", "pulse", "repeat", "param"}
TIMING_CONVENTIONS = ("center", "edge")


@dataclasses.dataclass(frozen=True)
class Loc:
    line: int
    col: int


# --- expressions ------------------------------------------------------------

@dataclasses.dataclass(frozen=True)
class Num:
    value: float
    loc: Optional[Loc] = dataclasses.field(default=None, compare=False)


@dataclasses.dataclass(frozen=True)
class Pi:
    loc: Optional[Loc] = dataclasses.field(default=None, compare=False)


@dataclasses.dataclass(frozen=True)
class Name:
    id: str
    loc: Optional[Loc] = dataclasses.field(default=None, compare=False)


@dataclasses.dataclass(frozen=True)
class Neg:
    operand: object
    loc: Optional[Loc] = dataclasses.field(default=None, compare=False)


@dataclasses.dataclass(frozen=True)
class BinOp:
    op: str
    left: object
    right: object
    loc: Optional[Loc] = dataclasses.field(default=None, compare=False)


# --- statements -------------------------------------------------------------

@dataclasses.dataclass(frozen=True)
class Wait:
    duration: object
    loc: Optional[Loc] = dataclasses.field(default=None, compare=False)


@dataclasses.dataclass(frozen=True)
class Pulse:
    angle: object
    axis: str
    loc: Optional[Loc] = dataclasses.field(default=None, compare=False)


@dataclasses.dataclass(frozen=True)
class Repeat:
    count: int
    body: tuple
    loc: Optional[Loc] = dataclasses.field(default=None, compare=False)


@dataclasses.dataclass(frozen=True)
class Param:
    name: str
    value: object
    loc: Optional[Loc] = dataclasses.field(default=None, compare=False)


@dataclasses.dataclass(frozen=True)
class SequenceProgram:
    params: tuple
    body: tuple
    source: Optional[str] = dataclasses.field(default=None, compare=False)

    @property
    def period_block(self):
        if len(self.body) == 1 and isinstance(self.body[0], Repeat):
            return self.body[0].body
        return self.body

    @property
    def default_repetitions(self):
        if len(self.body) == 1 and isinstance(self.body[0], Repeat):
            return self.body[0].count
        return 1

    def with_repetitions(self, count):
        """Same period, repeated ``count`` times at top level."""
        return SequenceProgram(self.params, (Repeat(int(count), tuple(self.period_block)),))

    def param_defaults(self):
        return {p.name: p.value for p in self.params}


@dataclasses.dataclass(frozen=True)
class SegmentList:
    period: tuple
    period_duration_s: float
    pulses_per_period: int
    repetitions: int = 1
    timing: str = "center"


# --- tokenizer --------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>\#[^\n]*)
  | (?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<punct>[;{}()+\-*/=])
    """,
    re.VERBOSE,
)


@dataclasses.dataclass(frozen=True)
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(source):
    toks = []
    line, line_start, pos = 1, 0, 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        col = pos - line_start + 1
        if m is None:
            raise SequenceSyntaxError(
                f"unexpected character {source[pos]!r}", line, col, source[pos], "a token"
            )
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind not in ("ws", "comment"):
            toks.append(_Tok(kind, m.group(), line, col))
        pos = m.end()
    col = pos - line_start + 1
    toks.append(_Tok("eof", "", line, col))
    return toks


# --- parser -----------------------------------------------------------------

class _Parser:
    def __init__(self, source):
        self.toks = _tokenize(source)
        self.i = 0

    @property
    def tok(self):
        return self.toks[self.i]

    def advance(self):
        t = self.toks[self.i]
        self.i += 1
        return t

    def fail(self, expected):
        t = self.tok
        shown = t.text if t.kind != "eof" else "end of input"
        raise SequenceSyntaxError(f"expected {expected}, got {shown!r}", t.line, t.col, t.text, expected)

    def expect(self, text):
        if self.tok.text != text or self.tok.kind == "eof":
            self.fail(repr(text))
        return self.advance()

    def program(self):
        params, body = [], []
        while self.tok.kind != "eof":
            if self.tok.text == "param":
                params.append(self.param())
            else:
                body.append(self.statement())
        return SequenceProgram(tuple(params), tuple(body))

    def block(self):
        stmts = []
        while self.tok.text != "}":
            if self.tok.kind == "eof":
                self.fail("'}'")
            stmts.append(self.statement())
        return tuple(stmts)

    def param(self):
        start = self.advance()
        if self.tok.kind != "ident" or self.tok.text in KEYWORDS or self.tok.text == "pi":
            self.fail("parameter name")
        name = self.advance().text
        self.expect("=")
        value = self.expr()
        self.expect(";")
        return Param(name, value, Loc(start.line, start.col))

    def statement(self):
        t = self.tok
        loc = Loc(t.line, t.col)
        if t.text == "wait":
            self.advance()
            d = self.expr()
            self.expect(";")
            return Wait(d, loc)
        if t.text == "pulse":
            self.advance()
            angle = self.expr()
            if self.tok.kind != "ident":
                self.fail("pulse axis")
            axis_tok = self.advance()
            self.expect(";")
            return Pulse(angle, axis_tok.text, Loc(axis_tok.line, axis_tok.col))
        if t.text == "repeat":
            self.advance()
            if self.tok.kind != "num" or not re.fullmatch(r"\d+", self.tok.text):
                self.fail("integer repeat count")
            count_tok = self.advance()
            count = int(count_tok.text)
            if count < 1:
                raise SequenceSyntaxError(
                    "repeat count must be positive", count_tok.line, count_tok.col,
                    count_tok.text, "positive integer",
                )
            self.expect("{")
            body = self.block()
            self.expect("}")
            if self.tok.text == ";":
                self.advance()
            if not body:
                raise SequenceSyntaxError("empty repeat block", t.line, t.col, t.text, "statement")
            return Repeat(count, body, loc)
        self.fail("'wait', 'pulse', 'repeat' or 'param'")

    def expr(self):
        left = self.term()
        while self.tok.text in ("+", "-") and self.tok.kind == "punct":
            op = self.advance()
            left = BinOp(op.text, left, self.term(), Loc(op.line, op.col))
        return left

    def term(self):
        left = self.factor()
        while self.tok.text in ("*", "/") and self.tok.kind == "punct":
            op = self.advance()
            left = BinOp(op.text, left, self.factor(), Loc(op.line, op.col))
        return left

    def factor(self):
        t = self.tok
        loc = Loc(t.line, t.col)
        if t.kind == "num":
            self.advance()
            return Num(float(t.text), loc)
        if t.kind == "ident" and t.text not in KEYWORDS:
            self.advance()
            return Pi(loc) if t.text == "pi" else Name(t.text, loc)
        if t.text == "(":
            self.advance()
            e = self.expr()
            self.expect(")")
            return e
        if t.text == "-":
            self.advance()
            return Neg(self.factor(), loc)
        self.fail("expression")


def _names_in(expr):
    if isinstance(expr, Name):
        yield expr
    elif isinstance(expr, Neg):
        yield from _names_in(expr.operand)
    elif isinstance(expr, BinOp):
        yield from _names_in(expr.left)
        yield from _names_in(expr.right)


def _walk(stmts):
    for s in stmts:
        yield s
        if isinstance(s, Repeat):
            yield from _walk(s.body)


def check_names(prog, external=EXTERNAL_NAMES):
    """Raise ``UnboundParameter`` for any name neither declared nor external."""
    known = set(external)
    for p in prog.params:
        for n in _names_in(p.value):
            if n.id not in known:
                raise UnboundParameter(n.id, n.loc.line if n.loc else None, n.loc.col if n.loc else None)
        known.add(p.name)
    for s in _walk(prog.body):
        exprs = [s.duration] if isinstance(s, Wait) else [s.angle] if isinstance(s, Pulse) else []
        for e in exprs:
            for n in _names_in(e):
                if n.id not in known:
                    raise UnboundParameter(n.id, n.loc.line if n.loc else None, n.loc.col if n.loc else None)


def parse(source, external=EXTERNAL_NAMES):
    """Parse program text. ``external`` lists names the caller will bind."""
    prog = _Parser(source).program()
    for s in _walk(prog.body):
        if isinstance(s, Pulse) and s.axis not in AXES:
            raise SequenceSyntaxError(
                f"unknown pulse axis {s.axis!r}", s.loc.line, s.loc.col, s.axis, "'x' or 'y'"
            )
    if not prog.body:
        raise SequenceSyntaxError("program has no statements", 1, 1, "", "statement")
    check_names(prog, external)
    return dataclasses.replace(prog, source=source)


# --- pretty printer ---------------------------------------------------------

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def format_expr(e, parent_prec=0, right=False):
    if isinstance(e, Num):
        return repr(e.value)
    if isinstance(e, Pi):
        return "pi"
    if isinstance(e, Name):
        return e.id
    if isinstance(e, Neg):
        inner = format_expr(e.operand, 3)
        return "-" + inner
    prec = _PREC[e.op]
    text = f"{format_expr(e.left, prec)} {e.op} {format_expr(e.right, prec, right=True)}"
    if prec < parent_prec or (right and prec == parent_prec):
        return f"({text})"
    return text


def format_program(prog, indent="    "):
    lines = [f"param {p.name} = {format_expr(p.value)};" for p in prog.params]

    def emit(stmts, depth):
        pad = indent * depth
        for s in stmts:
            if isinstance(s, Wait):
                lines.append(f"{pad}wait {format_expr(s.duration)};")
            elif isinstance(s, Pulse):
                lines.append(f"{pad}pulse {format_expr(s.angle)} {s.axis};")
            else:
                lines.append(f"{pad}repeat {s.count} {{")
                emit(s.body, depth + 1)
                lines.append(f"{pad}}}")

    emit(prog.body, 0)
    return "\n".join(lines) + "\n"


# --- compiler ---------------------------------------------------------------

def evaluate(expr, env):
    if isinstance(expr, Num):
        return expr.value
    if isinstance(expr, Pi):
        return math.pi
    if isinstance(expr, Name):
        try:
            return float(env[expr.id])
        except KeyError:
            loc = expr.loc
            raise UnboundParameter(expr.id, loc.line if loc else None, loc.col if loc else None) from None
    if isinstance(expr, Neg):
        return -evaluate(expr.operand, env)
    a, b = evaluate(expr.left, env), evaluate(expr.right, env)
    if expr.op == "+":
        return a + b
    if expr.op == "-":
        return a - b
    if expr.op == "*":
        return a * b
    if b == 0:
        raise InvalidParams("division by zero in sequence expression")
    return a / b


def resolve_bindings(prog, bindings):
    env = dict(bindings)
    for p in prog.params:
        if p.name not in env:
            env[p.name] = evaluate(p.value, env)
    return env


def _flatten(stmts, env, out):
    for s in stmts:
        if isinstance(s, Repeat):
            for _ in range(s.count):
                _flatten(s.body, env, out)
        elif isinstance(s, Wait):
            d = evaluate(s.duration, env)
            if not math.isfinite(d):
                raise InvalidParams("wait duration is not finite")
            if d < 0:
                loc = s.loc
                raise NegativeDuration(
                    f"wait evaluates to {d:g} s", loc.line if loc else None, loc.col if loc else None
                )
            out.append(["wait", d, s.loc])
        else:
            a = evaluate(s.angle, env)
            if not math.isfinite(a) or a < 0:
                raise InvalidParams(f"pulse angle must be finite and >= 0, got {a}")
            out.append(["pulse", a, AXES[s.axis], s.loc])


def compile_program(prog, bindings, timing="center", rabi_for_angle=None):
    """Compile one Floquet period of ``prog`` into timed segments.

    ``bindings`` must provide ``tau`` and ``tp`` (seconds) and may override
    declared params. With ``timing="center"`` tau is the pulse-centre to
    pulse-centre spacing, so each wait touching a pulse loses ``tp/2`` per
    neighbouring pulse; ``"edge"`` leaves waits untouched. ``rabi_for_angle``
    maps a nominal pulse angle to an angular drive strength; by default the
    drive is ``angle / tp``.
    """
    if timing not in TIMING_CONVENTIONS:
        raise ValueError(f"timing must be one of {TIMING_CONVENTIONS}, got {timing!r}")
    env = resolve_bindings(prog, bindings)
    tp = float(env.get("tp", 0.0))
    if tp < 0:
        raise InvalidParams("tp must be >= 0")
    items = []
    _flatten(prog.period_block, env, items)
    if not items:
        raise InvalidParams("period block is empty")
    if timing == "center" and tp > 0:
        n = len(items)
        for i, it in enumerate(items):
            if it[0] != "pulse":
                continue
            for j in ((i - 1) % n, (i + 1) % n):
                if items[j][0] == "wait":
                    items[j][1] -= tp / 2
        for it in items:
            if it[0] == "wait" and it[1] <= 0:
                loc = it[2]
                raise NegativeDuration(
                    f"pulse width tp={tp:g} s leaves wait of {it[1]:g} s (need tau > tp)",
                    loc.line if loc else None, loc.col if loc else None,
                )
    segments = []
    for it in items:
        if it[0] == "wait":
            segments.append(Segment("free", it[1]))
        else:
            angle, phase = it[1], it[2]
            if tp == 0:
                segments.append(Segment("pulse", 0.0, phase_rad=phase, angle_rad=angle))
            else:
                rabi = rabi_for_angle(angle) if rabi_for_angle else angle / tp
                segments.append(Segment("pulse", tp, phase_rad=phase, rabi_rad_s=rabi, angle_rad=angle))
    total = math.fsum(s.duration_s for s in segments)
    npulse = sum(1 for s in segments if s.kind == "pulse")
    return SegmentList(tuple(segments), total, npulse, prog.default_repetitions, timing)


def realize(prog, params, tau, bindings=None, timing="center"):
    """Compile ``prog`` at pulse spacing ``tau`` for the system ``params``."""
    env = dict(bindings or {})
    env["tau"] = tau
    env["tp"] = params.pulse_width_s
    return compile_program(prog, env, timing=timing, rabi_for_angle=params.rabi_for_angle)


# --- presets ----------------------------------------------------------------

_PERIODS = {
    "cpmg": "wait tau/2; pulse pi x; wait tau; pulse pi x; wait tau/2;",
    "dnss_detuned": "wait tau/2; pulse pi x; wait tau; pulse pi x; wait tau/2;",
    "dnss_flip": "wait tau/2; pulse pi+eps x; wait tau; pulse pi+eps x; wait tau/2;",
    "xy8": (
        "wait tau/2; pulse pi x; wait tau; pulse pi y; wait tau; pulse pi x; wait tau; "
        "pulse pi y; wait tau; pulse pi y; wait tau; pulse pi x; wait tau; pulse pi y; "
        "wait tau; pulse pi x; wait tau/2;"
    ),
}
_PULSES_PER_PERIOD = {"cpmg": 2, "dnss_detuned": 2, "dnss_flip": 2, "xy8": 8}
PRESETS = tuple(_PERIODS)


def pulses_per_period(name):
    return _PULSES_PER_PERIOD[name]


def preset(name, params=None, n_pulses=None, eps=0.0):
    """Built-in sequence ``name`` with ``n_pulses`` pulses in total.

    ``n_pulses`` defaults to a single period. ``dnss_detuned`` requires a
    non-zero detuning and finite pulse width in ``params``; ``dnss_flip``
    requires zero detuning and adds ``eps`` radians to every pi pulse.
    """
    if name not in _PERIODS:
        raise InvalidPreset(f"unknown preset {name!r}; choose from {PRESETS}")
    per = _PULSES_PER_PERIOD[name]
    n_pulses = per if n_pulses is None else int(n_pulses)
    if n_pulses < per or n_pulses % per:
        raise InvalidPreset(f"{name} needs a positive multiple of {per} pulses, got {n_pulses}")
    if name == "dnss_detuned" and params is not None:
        if params.detuning_hz == 0 or params.pulse_width_s <= 0:
            raise InvalidPreset("dnss_detuned needs detuning_hz != 0 and pulse_width_s > 0")
    if name == "dnss_flip":
        if params is not None and params.detuning_hz != 0:
            raise InvalidPreset("dnss_flip is defined at zero detuning")
        if not math.isfinite(eps):
            raise InvalidPreset("eps must be finite")
    header = f"param eps = {float(eps)!r};\n" if name == "dnss_flip" else ""
    source = f"{header}repeat {n_pulses // per} {{ {_PERIODS[name]} }}\n"
    return parse(source)
