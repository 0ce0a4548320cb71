# %% [markdown]
# # How the dip pair opens with detuning
#
# For each detuning we compare the measured separation of the up and down
# dips with the prediction 2|theta|/wL. Beyond about 2.5 MHz the pulse error
# axis tilts away from x and the predictor declines to answer.

# %%
import numpy as np

from dnss import SpinSystemParams, coherence_trace, predict_dips, preset
from dnss.dynamics import dip_center
from dnss.errors import OutOfRegime

tau = np.linspace(200e-9, 280e-9, 1601)
prog = preset("cpmg", n_pulses=336)

# %%
for delta in np.arange(0, 4.01, 0.5) * 1e6:
    p = SpinSystemParams(larmor_hz=2.1e6, a_perp_hz=44e3, detuning_hz=delta, pulse_width_s=40e-9)
    try:
        d = predict_dips(p, prog)
        pred = f"{(d.tau_plus_s - d.tau_minus_s) * 1e9:7.3f} ns"
    except OutOfRegime:
        pred = "    n/a   "
    try:
        up = dip_center(tau, coherence_trace(p, prog, tau, initial=("xplus", "up")).coherence)
        dn = dip_center(tau, coherence_trace(p, prog, tau, initial=("xplus", "down")).coherence)
        meas = f"{abs(up - dn) * 1e9:7.3f} ns"
    except ValueError:
        meas = "   no dip"
    print(f"detuning {delta / 1e6:3.1f} MHz  predicted {pred}  measured {meas}")

# %% [markdown]
# The same map is written to CSV by `dnss run --preset fig2c`, for
# 0, 20 and 40 ns pulses.
