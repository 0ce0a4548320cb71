# %% [markdown]
# # Writing pulse sequences
#
# Sequences are short text programs. A single top-level `repeat` marks the
# Floquet period and its count.

# %%
from dnss import SpinSystemParams, compile_program, format_program, parse, preset, realize
from dnss.errors import NegativeDuration, SequenceSyntaxError

src = """
# CPMG with an over-rotated pi pulse
param eps = 0.02;
repeat 84 {
    wait tau/2; pulse pi + eps x; wait tau; pulse pi + eps x; wait tau/2;
}
"""
prog = parse(src)
print(format_program(prog))

# %% [markdown]
# `tau` is measured between pulse centres. With 40 ns pulses every wait
# next to a pulse gives up half a pulse width.

# %%
p = SpinSystemParams(larmor_hz=2.1e6, pulse_width_s=40e-9)
seg = realize(preset("cpmg"), p, 238e-9)
print([(s.kind, round(s.duration_s * 1e9, 3)) for s in seg.period])
seg = realize(preset("cpmg"), p, 238e-9, timing="edge")
print([(s.kind, round(s.duration_s * 1e9, 3)) for s in seg.period])

# %%
seg = compile_program(prog, {"tau": 250e-9, "tp": 0.0, "eps": 0.05})
print("pulse angle", seg.period[1].angle_rad, "repetitions", seg.repetitions)

# %%
try:
    realize(preset("cpmg"), p, 30e-9)
except NegativeDuration as exc:
    print("NegativeDuration:", exc)
try:
    parse("pulse pi z q")
except SequenceSyntaxError as exc:
    print("SyntaxError at token", repr(exc.token), "col", exc.col)

# %%
xy8 = realize(preset("xy8"), p, 238e-9)
print("xy8 phases:", [round(s.phase_rad, 4) for s in xy8.period if s.kind == "pulse"])
