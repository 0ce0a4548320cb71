"""Command-line front end.

Subcommands: ``run``, ``dips``, ``spectrum``, ``theta`` and ``validate``.
Exit codes: 0 success, 1 non-converged dip search, 2 any other error.
"""

import argparse
import os
import sys

from . import experiments, floquet
from .errors import ConfigError, DNSSError

SYSTEM_FLAGS = ("larmor_hz", "a_perp_hz", "a_par_hz", "detuning_hz", "rabi_hz",
                "pulse_width_s", "bz_gauss", "gamma_hz_per_gauss")


def _add_conventions(sp):
    sp.add_argument("--timing-convention", choices=("center", "edge"), default=None,
                    help="how waits relate to pulses (default: center-to-center)")
    sp.add_argument("--frequency-convention", choices=("ordinary", "angular"),
                    default="ordinary", help="unit of *_hz inputs: Hz or rad/s")


def _add_system(sp):
    g = sp.add_argument_group("system")
    for name in SYSTEM_FLAGS:
        g.add_argument("--" + name.replace("_", "-"), dest=name, metavar="X")
    g.add_argument("--species", help="C13, H1, N15 or custom")


def _add_sequence(sp):
    g = sp.add_argument_group("sequence")
    src = g.add_mutually_exclusive_group()
    src.add_argument("--sequence", default="cpmg", help="embedded preset name (default: cpmg)")
    src.add_argument("--seq-file", help="path to a .seq file")
    g.add_argument("--eps", help="extra rotation for dnss_flip (rad)")
    g.add_argument("--n-pulses", help="total pulse count")
    g.add_argument("--bind", action="append", default=[], metavar="NAME=VALUE",
                   help="bind a sequence parameter; may repeat")


def _sections_from_flags(args, kind):
    system = {k: getattr(args, k) for k in SYSTEM_FLAGS if getattr(args, k) is not None}
    if args.species:
        system["species"] = args.species
    seq = {}
    if args.seq_file:
        seq["file"] = os.path.abspath(args.seq_file)
    else:
        seq["preset"] = args.sequence
    if args.eps is not None:
        seq["eps"] = args.eps
    if args.n_pulses is not None:
        seq["n_pulses"] = args.n_pulses
    bindings = {}
    for item in args.bind:
        name, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--bind expects NAME=VALUE, got {item!r}")
        bindings[name.strip()] = value.strip()
    sections = {"system": system, "sequence": seq, "experiment": {"kind": kind}}
    if bindings:
        sections["bindings"] = bindings
    return sections


def _config(args):
    kw = dict(frequency_convention=args.frequency_convention, timing=args.timing_convention)
    if args.config and args.preset:
        raise ConfigError("give either --config or --preset, not both")
    if args.config:
        return experiments.load_config(args.config, **kw)
    if args.preset:
        return experiments.figure_config(args.preset, **kw)
    raise ConfigError("one of --config or --preset is required")


def cmd_run(args):
    cfg = _config(args)
    if args.plot_script:
        cfg.plot_script = True
    for path in experiments.run_config(cfg, args.out, args.jobs):
        print(path)
    return 0


def cmd_validate(args):
    _config(args)
    print("ok")
    return 0


def cmd_dips(args):
    sections = _sections_from_flags(args, "dips")
    cfg = experiments.build_config(sections, args.frequency_convention, args.timing_convention)
    d = floquet.predict_dips(cfg.params, cfg.program, args.harmonic, cfg.bindings, cfg.timing)
    print(experiments.dips_line(d))
    return 0 if d.converged else 1


def _grid_cmd(args, kind, extra):
    sections = _sections_from_flags(args, kind)
    sections["experiment"].update(extra)
    sections["grids"] = {"tau_larmor" if args.tau_larmor else "tau": args.tau_larmor or args.tau}
    sections["output"] = {"path": args.output, "plot_script": str(args.plot_script)}
    cfg = experiments.build_config(sections, args.frequency_convention, args.timing_convention)
    for path in experiments.run_config(cfg, args.out, 1):
        print(path)
    return 0


def cmd_spectrum(args):
    return _grid_cmd(args, "spectrum", {"spectrum": args.kind})


def cmd_theta(args):
    return _grid_cmd(args, "theta", {})


def build_parser():
    ap = argparse.ArgumentParser(prog="dnss", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    for name, helptext in (("run", "run a config file or figure preset"),
                           ("validate", "check a config without running it")):
        sp = sub.add_parser(name, help=helptext)
        sp.add_argument("--config", help="INI run configuration")
        sp.add_argument("--preset", help=f"figure preset: {', '.join(experiments.FIGURE_PRESETS)}")
        _add_conventions(sp)
        if name == "run":
            sp.add_argument("--out", default=".", help="output directory")
            sp.add_argument("--jobs", type=int, default=1, help="worker processes for sweeps")
            sp.add_argument("--plot-script", action="store_true",
                            help="also write a gnuplot script per CSV")

    sp = sub.add_parser("dips", help="predict the dip pair of one harmonic")
    _add_system(sp)
    _add_sequence(sp)
    _add_conventions(sp)
    sp.add_argument("--harmonic", type=int, default=1, help="harmonic k >= 1")

    for name, helptext in (("spectrum", "export Floquet eigenphases over tau"),
                           ("theta", "export the pulse-error angle over tau")):
        sp = sub.add_parser(name, help=helptext)
        _add_system(sp)
        _add_sequence(sp)
        _add_conventions(sp)
        grid = sp.add_mutually_exclusive_group(required=True)
        grid.add_argument("--tau", help="START,STOP,POINTS in seconds")
        grid.add_argument("--tau-larmor", help="START,STOP,POINTS in units of pi/omega_L")
        if name == "spectrum":
            sp.add_argument("--kind", choices=("full", "unperturbed"), default="full")
        sp.add_argument("--out", default=".", help="output directory")
        sp.add_argument("--output", default=f"{name}.csv", help="CSV file name")
        sp.add_argument("--plot-script", action="store_true")
    return ap


COMMANDS = {"run": cmd_run, "validate": cmd_validate, "dips": cmd_dips,
            "spectrum": cmd_spectrum, "theta": cmd_theta}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DNSSError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
