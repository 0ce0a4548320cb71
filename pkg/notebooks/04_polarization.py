# %% [markdown]
# # Polarizing a 13C nucleus in one gate
#
# At an avoided crossing the electron superposition and the nuclear state
# swap. Starting from |X+> and a fully mixed nucleus, one block of N pulses
# leaves the nucleus polarized. The run uses the `fig3c` preset: 400 G,
# A_perp = 10 kHz, 0.5 MHz detuning, 60 ns pulses, and tau refined to the
# gap minimum of the tau- crossing.

# %%
import numpy as np

from dnss import experiments, nuclear_gate_fidelity, pulse_number_scan

cfg = experiments.figure_config("fig3c")
tau, info = experiments.resolve_tau(cfg)
print(f"larmor {cfg.params.larmor_hz / 1e3:.2f} kHz, tau {tau * 1e9:.3f} ns "
      f"(predicted {info['tau_predicted_s'] * 1e9:.3f} ns), gap {info['avoided_gap_rad']:.4f} rad")

# %%
scan = pulse_number_scan(cfg.params, cfg.program, tau, 300)
for n in range(0, 301, 20):
    i = np.searchsorted(scan.pulse_counts, n)
    print(f"N {scan.pulse_counts[i]:3d}  P {scan.polarization[i]:+.4f}  L {scan.coherence[i]:+.4f}")
print("N_I =", scan.n_init, " flip fidelity =", round(scan.fidelity, 5))

# %%
for target in ("polarize_up", "polarize_down"):
    f = nuclear_gate_fidelity(cfg.params, cfg.program, tau, scan.n_init, target)
    print(target, round(f, 5))
