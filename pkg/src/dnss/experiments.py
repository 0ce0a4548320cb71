"""Run configurations and the built-in figure experiments.

A configuration is INI-style text with the sections ``system``,
``sequence``, ``bindings``, ``experiment``, ``grids`` and ``output``.
Unknown sections and keys are rejected. Example::

    [system]
    larmor_hz = 2.1e6
    a_perp_hz = 44e3
    detuning_hz = 1e6
    pulse_width_s = 40e-9

    [sequence]
    preset = dnss_detuned
    n_pulses = 336

    [experiment]
    kind = trace
    initial_nuclear = mixed, up, down

    [grids]
    tau = 200e-9, 280e-9, 801

    [output]
    path = trace.csv
"""

import configparser
import dataclasses
import difflib
import math
import os

import numpy as np

from . import csvio, dynamics, floquet, seqdsl
from .errors import (
    ConfigError,
    DNSSError,
    NegativeDuration,
    SequenceSyntaxError,
    UnboundParameter,
)
from .spinsys import SYMMETRY_STATES, SpinSystemParams

SCHEMA = {
    "system": {
        "larmor_hz": float, "a_perp_hz": float, "a_par_hz": float, "detuning_hz": float,
        "rabi_hz": float, "pulse_width_s": float, "bz_gauss": float, "species": str,
        "gamma_hz_per_gauss": float,
    },
    "sequence": {"preset": str, "file": str, "n_pulses": int, "eps": float, "timing": str},
    "bindings": None,
    "experiment": {
        "kind": str, "initial_electron": str, "initial_nuclear": str, "harmonic": int,
        "tau": str, "n_max": int, "tp_list": str, "spectrum": str,
    },
    "grids": {"tau": str, "tau_larmor": str, "detuning_hz": str},
    "output": {"path": str, "plot_script": bool},
}
KINDS = ("trace", "sweep", "spectrum", "theta", "dips", "polarize")
HZ_KEYS = ("larmor_hz", "a_perp_hz", "a_par_hz", "detuning_hz", "rabi_hz")

# Detuning and pulse width for the fig3c polarization run are free choices.
# These come from a coarse (detuning, tp) scan that maximizes the nuclear
# flip fidelity at N <= 300 for the 13C system at 400 G.
FIG3C_DETUNING_HZ = 0.5e6
FIG3C_PULSE_WIDTH_S = 60e-9

FIGURE_PRESETS = {
    "fig2b": {
        "system": {"larmor_hz": "2.1e6", "a_perp_hz": "44e3", "detuning_hz": "1e6",
                   "pulse_width_s": "40e-9"},
        "sequence": {"preset": "dnss_detuned", "n_pulses": "336"},
        "experiment": {"kind": "spectrum", "spectrum": "full"},
        "grids": {"tau": "200e-9, 280e-9, 4001"},
        "output": {"path": "fig2b_spectrum.csv"},
    },
    "fig2c": {
        "system": {"larmor_hz": "2.1e6", "a_perp_hz": "44e3"},
        "sequence": {"preset": "cpmg", "n_pulses": "336"},
        "experiment": {"kind": "sweep", "tp_list": "0, 20e-9, 40e-9"},
        "grids": {"tau": "150e-9, 330e-9, 361", "detuning_hz": "0, 5e6, 51"},
        "output": {"path": "fig2c_sweep.csv"},
    },
    "fig3a": {
        "system": {"larmor_hz": "2.1e6", "a_perp_hz": "44e3", "detuning_hz": "1e6",
                   "pulse_width_s": "40e-9"},
        "sequence": {"preset": "dnss_detuned", "n_pulses": "336"},
        "experiment": {"kind": "trace", "initial_electron": "xplus",
                       "initial_nuclear": "mixed, up, down"},
        "grids": {"tau_larmor": "0.8, 3.4, 2601"},
        "output": {"path": "fig3a_traces.csv"},
    },
    "fig3b": {
        "system": {"larmor_hz": "2.1e6", "a_perp_hz": "44e3", "detuning_hz": "1e6",
                   "pulse_width_s": "40e-9"},
        "sequence": {"preset": "dnss_detuned", "n_pulses": "336"},
        "experiment": {"kind": "spectrum", "spectrum": "unperturbed"},
        "grids": {"tau": "200e-9, 280e-9, 801"},
        "output": {"path": "fig3b_spectrum.csv"},
    },
    "fig3c": {
        "system": {"species": "C13", "bz_gauss": "400", "a_perp_hz": "10e3", "a_par_hz": "0",
                   "detuning_hz": repr(FIG3C_DETUNING_HZ),
                   "pulse_width_s": repr(FIG3C_PULSE_WIDTH_S)},
        "sequence": {"preset": "dnss_detuned", "n_pulses": "300"},
        "experiment": {"kind": "polarize", "tau": "minus", "n_max": "300",
                       "initial_electron": "xplus", "initial_nuclear": "mixed"},
        "output": {"path": "fig3c_polarization.csv"},
    },
}


@dataclasses.dataclass
class RunConfig:
    params: SpinSystemParams
    program: seqdsl.SequenceProgram
    sequence_name: str
    bindings: dict
    timing: str
    n_pulses: int
    kind: str
    experiment: dict
    grids: dict
    output_path: str
    plot_script: bool
    frequency_convention: str = "ordinary"


def _nearest(key, options):
    match = difflib.get_close_matches(key, list(options), n=1, cutoff=0.0)
    return f" (did you mean {match[0]!r}?)" if match else ""


def _convert(section, key, raw, kind, errors):
    try:
        if kind is bool:
            low = raw.strip().lower()
            if low not in ("true", "false", "yes", "no", "1", "0"):
                raise ValueError(raw)
            return low in ("true", "yes", "1")
        if kind is int:
            return int(raw)
        if kind is float:
            v = float(raw)
            if not math.isfinite(v):
                raise ValueError(raw)
            return v
        return raw.strip()
    except ValueError:
        errors.append(f"[{section}] {key}: cannot read {raw!r} as {kind.__name__}")
        return None


def _grid(spec, name, errors):
    parts = [x.strip() for x in spec.split(",")]
    try:
        start, stop, points = float(parts[0]), float(parts[1]), int(parts[2])
        if len(parts) != 3:
            raise ValueError
    except (ValueError, IndexError):
        errors.append(f"[grids] {name}: expected 'start, stop, points', got {spec!r}")
        return None
    if points < 2 or not start < stop:
        errors.append(f"[grids] {name}: need points >= 2 and start < stop")
        return None
    return np.linspace(start, stop, points)


def load_sections(text=None, path=None):
    parser = configparser.ConfigParser(interpolation=None, delimiters=("=",))
    parser.optionxform = str
    try:
        if path is not None:
            with open(path, encoding="utf-8") as fh:
                parser.read_file(fh, source=path)
        else:
            parser.read_string(text or "")
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    return {s: dict(parser[s]) for s in parser.sections()}


def build_config(sections, frequency_convention="ordinary", timing=None, base_dir="."):
    """Type-check ``sections`` and assemble a :class:`RunConfig`.

    Every problem found is collected; a single :class:`ConfigError` lists them all.
    """
    errors = []
    typed = {}
    for sec, items in sections.items():
        if sec not in SCHEMA:
            errors.append(f"unknown section [{sec}]{_nearest(sec, SCHEMA)}")
            continue
        schema = SCHEMA[sec]
        typed[sec] = {}
        for key, raw in items.items():
            if schema is None:
                typed[sec][key] = _convert(sec, key, raw, float, errors)
            elif key not in schema:
                errors.append(f"[{sec}] unknown key {key!r}{_nearest(key, schema)}")
            else:
                typed[sec][key] = _convert(sec, key, raw, schema[key], errors)

    system = {k: v for k, v in typed.get("system", {}).items() if v is not None}
    if frequency_convention == "angular":
        for k in HZ_KEYS:
            if k in system:
                system[k] = system[k] / (2 * math.pi)
    elif frequency_convention != "ordinary":
        errors.append(f"unknown frequency convention {frequency_convention!r}")
    params = None
    try:
        params = SpinSystemParams(**system)
    except (DNSSError, TypeError) as exc:
        errors.append(f"[system] {exc}")

    seq = typed.get("sequence", {})
    timing = timing or seq.get("timing") or "center"
    if timing not in seqdsl.TIMING_CONVENTIONS:
        errors.append(f"[sequence] timing must be one of {seqdsl.TIMING_CONVENTIONS}, got {timing!r}")
    program, name = None, None
    n_pulses = seq.get("n_pulses")
    if seq.get("preset") and seq.get("file"):
        errors.append("[sequence] give either preset or file, not both")
    elif seq.get("preset"):
        name = seq["preset"]
        try:
            program = seqdsl.preset(name, params, n_pulses=n_pulses, eps=seq.get("eps") or 0.0)
        except DNSSError as exc:
            errors.append(f"[sequence] {exc}")
    elif seq.get("file"):
        name = seq["file"]
        path = os.path.join(base_dir, name)
        try:
            with open(path, encoding="utf-8") as fh:
                src = fh.read()
            program = seqdsl.parse(src, external=seqdsl.EXTERNAL_NAMES + tuple(typed.get("bindings", {})))
            if n_pulses is None:
                n_pulses = program.default_repetitions * sum(
                    1 for s in seqdsl._walk(program.period_block) if isinstance(s, seqdsl.Pulse)
                )
        except OSError as exc:
            errors.append(f"[sequence] cannot read {path}: {exc}")
        except SequenceSyntaxError as exc:
            errors.append(f"{name}:{exc.line}:{exc.col}: {exc}")
        except UnboundParameter as exc:
            errors.append(f"{name}: {exc}")
    else:
        errors.append("[sequence] needs 'preset' or 'file'")

    bindings = {k: v for k, v in typed.get("bindings", {}).items() if v is not None}
    if program is not None:
        declared = {p.name for p in program.params}
        for b in bindings:
            if b not in declared:
                errors.append(f"[bindings] {b!r} is not a parameter of the sequence{_nearest(b, declared)}")

    exp = typed.get("experiment", {})
    kind = exp.get("kind")
    if kind not in KINDS:
        errors.append(f"[experiment] kind must be one of {KINDS}, got {kind!r}")

    grids = {}
    for gname, spec in typed.get("grids", {}).items():
        if spec is None:
            continue
        g = _grid(spec, gname, errors)
        if g is not None:
            if gname == "tau_larmor":
                if params is not None and params.larmor_hz:
                    grids["tau"] = g * math.pi / abs(params.omega_l)
            elif gname == "detuning_hz" and frequency_convention == "angular":
                grids[gname] = g / (2 * math.pi)
            else:
                grids[gname] = g
    if kind in ("trace", "sweep", "spectrum", "theta") and "tau" not in grids:
        errors.append(f"[grids] experiment {kind!r} needs a tau or tau_larmor grid")
    if kind == "sweep" and "detuning_hz" not in grids:
        errors.append("[grids] sweep needs a detuning_hz grid")
    if kind == "polarize" and exp.get("tau") is None:
        errors.append("[experiment] polarize needs tau = plus | minus | <seconds>")
    if kind == "sweep" and exp.get("tp_list"):
        try:
            exp["tp_list"] = [float(x) for x in exp["tp_list"].split(",")]
        except ValueError:
            errors.append(f"[experiment] tp_list must be comma-separated numbers")

    # compile once to surface timing errors with their source location
    if program is not None and params is not None and timing in seqdsl.TIMING_CONVENTIONS:
        probe = []
        if "tau" in grids:
            probe.append(grids["tau"][0])
        if exp.get("tau") not in (None, "plus", "minus"):
            try:
                probe.append(float(exp["tau"]))
            except ValueError:
                errors.append(f"[experiment] tau must be plus, minus or a number")
        widths = exp.get("tp_list") if kind == "sweep" and isinstance(exp.get("tp_list"), list) else [params.pulse_width_s]
        for t in probe:
            for tp in widths:
                try:
                    seqdsl.realize(program, params.replace(pulse_width_s=tp), t, bindings, timing)
                except NegativeDuration as exc:
                    loc = f"{name}:{exc.line}:{exc.col}: " if exc.line is not None else ""
                    errors.append(f"{loc}NegativeDuration: {exc} (tau={t:g} s)")
                except DNSSError as exc:
                    errors.append(f"[sequence] {exc}")

    out = typed.get("output", {})
    if errors:
        raise ConfigError("\n".join(errors))
    return RunConfig(
        params=params, program=program, sequence_name=name, bindings=bindings, timing=timing,
        n_pulses=n_pulses, kind=kind, experiment=exp, grids=grids,
        output_path=out.get("path") or f"{kind}.csv", plot_script=bool(out.get("plot_script")),
        frequency_convention=frequency_convention,
    )


def load_config(path, **kw):
    return build_config(load_sections(path=path), base_dir=os.path.dirname(os.path.abspath(path)), **kw)


def figure_config(name, **kw):
    if name not in FIGURE_PRESETS:
        raise ConfigError(f"unknown figure preset {name!r}{_nearest(name, FIGURE_PRESETS)}")
    return build_config(FIGURE_PRESETS[name], **kw)


# --- running ----------------------------------------------------------------

def _common_meta(cfg, **extra):
    meta = {"experiment": cfg.kind, "sequence_name": cfg.sequence_name,
            "input_frequency_convention": cfg.frequency_convention,
            "frequency_convention": "ordinary", "timing": cfg.timing, "n_pulses": cfg.n_pulses}
    meta.update(cfg.params.metadata())
    meta.update({f"bind_{k}": v for k, v in cfg.bindings.items()})
    meta["sequence"] = " ".join(seqdsl.format_program(cfg.program).split())
    meta.update(extra)
    return meta


def _gnuplot(csv_path, xcol, ycols, xlabel, ylabel):
    name = os.path.basename(csv_path)
    plots = ", ".join(f"'{name}' using {xcol}:{c} with lines title columnhead({c})" for c in ycols)
    text = (
        "set datafile separator ','\nset datafile commentschars '#'\n"
        f"set key autotitle columnhead\nset xlabel '{xlabel}'\nset ylabel '{ylabel}'\n"
        f"plot {plots}\n"
    )
    path = csv_path.rsplit(".", 1)[0] + ".gp"
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
    return path


def resolve_tau(cfg):
    """Polarization pulse spacing: a number, or the Floquet-refined dip ``plus``/``minus``."""
    choice = cfg.experiment.get("tau")
    if choice not in ("plus", "minus"):
        return float(choice), {}
    p = cfg.params
    k = cfg.experiment.get("harmonic") or 1
    dips = floquet.predict_dips(p, cfg.program, k, cfg.bindings, cfg.timing)
    guess = dips.tau_plus_s if choice == "plus" else dips.tau_minus_s
    # The opposite-symmetry pair that closes at this dip
    pair = ("X+down", "X-up") if (choice == "plus") == (dips.theta_at_dip_rad >= 0) else ("X+up", "X-down")
    half = 0.25 * max(dips.tau_plus_s - dips.tau_minus_s, 1e-3 * guess)
    best = None
    for cand in (pair, pair[::-1], ("X+up", "X-down"), ("X+down", "X-up")):
        g = floquet.measure_gap(p, cfg.program, guess - half, guess + half, cand, cfg.bindings, cfg.timing)
        if best is None or g.gap_rad < best.gap_rad:
            best = g
    return best.tau_s, {"tau_choice": choice, "tau_predicted_s": guess,
                        "tau_refined_s": best.tau_s, "avoided_gap_rad": best.gap_rad}


def run_config(cfg, out_dir=".", jobs=1):
    """Execute ``cfg`` and write its CSV artifacts; returns the written paths."""
    os.makedirs(out_dir, exist_ok=True)
    out = os.path.join(out_dir, cfg.output_path)
    written = []
    p, prog, b, timing = cfg.params, cfg.program, cfg.bindings, cfg.timing
    exp = cfg.experiment

    if cfg.kind == "trace":
        electron = exp.get("initial_electron") or "xplus"
        nuclei = [x.strip() for x in (exp.get("initial_nuclear") or "mixed").split(",")]
        cols = [("tau_s", cfg.grids["tau"])]
        for nuc in nuclei:
            tr = dynamics.coherence_trace(p, prog, cfg.grids["tau"], cfg.n_pulses, (electron, nuc), b, timing)
            cols.append((f"coherence_{nuc}", tr.coherence))
        csvio.write_csv(out, cols, _common_meta(cfg, initial_electron=electron))
        written.append(out)
        if cfg.plot_script:
            written.append(_gnuplot(out, 1, range(2, len(cols) + 1), "tau (s)", "L"))

    elif cfg.kind == "sweep":
        tps = exp.get("tp_list") or [p.pulse_width_s]
        maps = dynamics.detuning_sweep(p, prog, cfg.grids["tau"], cfg.grids["detuning_hz"],
                                       cfg.n_pulses, tps, ("xplus", "mixed"), b, timing, jobs)
        stem = out.rsplit(".", 1)[0]
        for i, (tp, tr) in enumerate(zip(tps, maps)):
            path = f"{stem}_tp{i}.csv"
            nd, nt = tr.coherence.shape
            cols = [("detuning_hz", np.repeat(tr.detuning_hz, nt)),
                    ("tau_s", np.tile(tr.tau_s, nd)),
                    ("coherence", tr.coherence.ravel())]
            meta = _common_meta(cfg, layout="row-major over detuning_hz then tau_s")
            meta["pulse_width_s"] = tp
            csvio.write_csv(path, cols, meta)
            written.append(path)
            if cfg.plot_script:
                written.append(_gnuplot(path, 2, [3], "tau (s)", "L"))

    elif cfg.kind == "spectrum":
        which = exp.get("spectrum") or "full"
        fn = floquet.full_spectrum if which == "full" else floquet.unperturbed_spectrum
        spec = fn(p, prog, cfg.grids["tau"], b, timing)
        cols = [("tau_s", spec.tau_s)]
        cols += [(f"phase_{n}", spec.phases[:, i]) for i, n in enumerate(spec.names)]
        cols += [(f"label_{n}", spec.labels[:, i]) for i, n in enumerate(spec.names)]
        gaps = np.min([spec.gap(i, j) for i in range(4) for j in range(i + 1, 4)], axis=0)
        cols.append(("gap_min_rad", gaps))
        csvio.write_csv(out, cols, _common_meta(cfg, spectrum=which))
        written.append(out)
        if cfg.plot_script:
            written.append(_gnuplot(out, 1, range(2, 6), "tau (s)", "Floquet phase (rad)"))

    elif cfg.kind == "theta":
        tc = floquet.theta_curve(p, prog, cfg.grids["tau"], b, timing)
        cols = [("tau_s", tc.tau_s), ("theta_rad", tc.theta_rad),
                ("in_regime", tc.in_regime), ("axis_x2", tc.axis_x2)]
        csvio.write_csv(out, cols, _common_meta(cfg))
        written.append(out)
        if cfg.plot_script:
            written.append(_gnuplot(out, 1, [2], "tau (s)", "theta (rad)"))

    elif cfg.kind == "dips":
        d = floquet.predict_dips(p, prog, exp.get("harmonic") or 1, b, timing)
        cols = [(k, [v]) for k, v in d._asdict().items()]
        csvio.write_csv(out, cols, _common_meta(cfg))
        written.append(out)

    elif cfg.kind == "polarize":
        tau, extra = resolve_tau(cfg)
        initial = (exp.get("initial_electron") or "xplus", exp.get("initial_nuclear") or "mixed")
        scan = dynamics.pulse_number_scan(p, prog, tau, exp.get("n_max") or 300, initial, b, timing)
        marker = (scan.pulse_counts == scan.n_init).astype(int)
        cols = [("pulse_count", scan.pulse_counts), ("polarization", scan.polarization),
                ("coherence", scan.coherence), ("n_init_marker", marker)]
        meta = _common_meta(cfg, tau_s=tau, n_init=scan.n_init, flip_fidelity=scan.fidelity,
                            n_init_rule=scan.metadata["n_init_rule"], **extra)
        csvio.write_csv(out, cols, meta)
        written.append(out)
        if cfg.plot_script:
            written.append(_gnuplot(out, 1, [2, 3], "pulse number N", "P, L"))
    return written


def dips_line(d):
    """One machine-readable line of ``key=value`` pairs."""
    return (f"harmonic={d.harmonic_k} tau_plus={d.tau_plus_s:.6e} tau_minus={d.tau_minus_s:.6e} "
            f"theta={d.theta_at_dip_rad:.6e} converged={'true' if d.converged else 'false'} "
            f"iterations={d.iterations}")


__all__ = [
    "FIGURE_PRESETS", "RunConfig", "build_config", "dips_line", "figure_config",
    "load_config", "load_sections", "resolve_tau", "run_config", "SYMMETRY_STATES",
]
