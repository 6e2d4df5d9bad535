"""Command-line front end.

    cavityga optimize CONFIG   run the genetic algorithm, write a result bundle
    cavityga evaluate BUNDLE   re-propagate, export fidelity/waveform/witness traces
    cavityga noise BUNDLE      fidelity under cavity decay, dephasing and qubit decay
    cavityga validate CONFIG   check a config (and optionally a chromosome file)
    cavityga show NAME         print a bundled config (ghz.cfg, dicke.cfg, cluster.cfg)

Exit codes: 0 ok, 2 configuration error, 3 propagation failure, 4 corrupt bundle.
The output root defaults to $CAVITYGA_OUT, else ./runs.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import config as cfgmod
from .analysis import SCENARIOS, evaluate_schedule, noise_study
from .bundle import (
    BundleError, control_names, fmt, read_bundle, read_chromosome, report_section,
    write_bundle, write_csv, write_ini,
)
from .config import HARDWARE_NOISE, ConfigError
from .dynamics import NoiseConfig, PropagationError
from .evolver import run
from .pulses import check_chromosome
from .witnesses import DEFAULT_THRESHOLDS, DICKE_SPIN_BOUND

EXIT_OK, EXIT_CONFIG, EXIT_PROPAGATION, EXIT_BUNDLE = 0, 2, 3, 4
OUT_ENV = "CAVITYGA_OUT"

log = logging.getLogger("cavityga")


def output_root() -> Path:
    return Path(os.environ.get(OUT_ENV, "runs"))


def cmd_optimize(args) -> int:
    manifest = cfgmod.load(args.config)
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.generations is not None:
        changes["max_generations"] = args.generations
    if changes:
        try:
            manifest = manifest.with_ga(**changes)
        except ValueError as exc:
            raise ConfigError([(None, "ga", str(exc))], str(args.config)) from None
    manifest = cfgmod.stamp(manifest)
    out = Path(args.out) if args.out else output_root() / f"{manifest.name}-seed{manifest.ga.seed}"

    def progress(rec):
        if rec.generation % args.log_every == 0:
            log.info("generation %d  best %.6f  mean %.6f  fidelity %.6f",
                     rec.generation, rec.best_total, rec.mean_total, rec.best_fidelity)

    result = run(manifest.problem(), manifest.ga, threads=args.threads, observer=progress)
    write_bundle(out, manifest, result)
    rep = result.best_report
    print(f"{manifest.name} seed={result.seed} generations={result.generations} "
          f"fidelity={rep.fidelity_at_tmax:.6f} t_max={rep.t_max:.4g}ns total={rep.total:.6f} "
          f"bundle={out}")
    return EXIT_OK


def _thresholds(manifest, extra) -> dict[str, float]:
    th = dict(DEFAULT_THRESHOLDS[manifest.target_label])
    for c in extra or []:
        th[f"c{c:g}"] = c
    return th


def cmd_evaluate(args) -> int:
    bundle = read_bundle(args.bundle)
    m = bundle.manifest
    ev = evaluate_schedule(bundle.schedule, m.problem(), _thresholds(m, args.witness),
                           args.spin_witness, args.samples_per_interval)
    out = Path(args.out) if args.out else bundle.path / "evaluate"
    out.mkdir(parents=True, exist_ok=True)

    names = list(ev.fidelity_witness)
    header = ["time_ns", "fidelity"] + [f"witness_{n}" for n in names]
    cols = [ev.times, ev.fidelity] + [ev.fidelity_witness[n][1] for n in names]
    if ev.spin_witness is not None:
        header.append("spin_witness")
        cols.append(ev.spin_witness[1])
    write_csv(out / "fidelity.csv", header, np.column_stack(cols).tolist())
    write_csv(out / "waveforms.csv",
              ["time_ns"] + [f"{c}_rad_per_ns" for c in control_names(m.system.n_qubits)],
              np.column_stack([ev.waveform_times, ev.waveforms.T]).tolist())
    write_csv(out / "regions.csv", ["kind", "threshold", "start_ns", "end_ns"],
              ([k, float(c), float(a), float(b)] for k, c, a, b in ev.regions))
    thresholds = {n: fmt(c) for n, (c, _) in ev.fidelity_witness.items()}
    if ev.spin_witness is not None:
        thresholds["spin"] = fmt(ev.spin_witness[0])
    write_ini(out / "evaluate.cfg", {"result": report_section(ev.report), "thresholds": thresholds})

    recorded = bundle.recorded.get("fidelity_at_tmax")
    line = f"fidelity={ev.report.fidelity_at_tmax:.6f} t_max={ev.report.t_max:.4g}ns"
    if recorded is not None:
        line += f" recorded={recorded:.6f} diff={abs(recorded - ev.report.fidelity_at_tmax):.1e}"
    print(line + f" regions={len(ev.regions)} out={out}")
    return EXIT_OK


def _noise_from_args(args, n_qubits: int, default: NoiseConfig | None) -> NoiseConfig:
    rates = dict(HARDWARE_NOISE) if args.hardware_noise else {}
    if default is not None and not args.hardware_noise:
        gamma, gamma_phi = default.per_qubit(n_qubits)
        rates = {"kappa": default.kappa, "gamma": gamma, "gamma_phi": gamma_phi}
    for key in ("kappa", "gamma", "gamma_phi"):
        val = getattr(args, key)
        if val is not None:
            rates[key] = val
    try:
        gamma = rates.get("gamma", 0.0)
        gamma_phi = rates.get("gamma_phi", 0.0)
        return NoiseConfig(
            rates.get("kappa", 0.0),
            tuple(gamma) if isinstance(gamma, tuple) else (gamma,) * n_qubits,
            tuple(gamma_phi) if isinstance(gamma_phi, tuple) else (gamma_phi,) * n_qubits,
        )
    except ValueError as exc:
        raise ConfigError([(None, "noise", str(exc))], "command line") from None


def cmd_noise(args) -> int:
    bundle = read_bundle(args.bundle)
    m = bundle.manifest
    noise = _noise_from_args(args, m.system.n_qubits, m.noise)
    rep = noise_study(bundle.schedule, m.problem(), noise)
    out = Path(args.out) if args.out else bundle.path / "noise"
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "noise.csv", ["time_ns", "fidelity_noiseless"] + [f"fidelity_{s}" for s in SCENARIOS],
              np.column_stack([rep.times, rep.noiseless] + [rep.traces[s] for s in SCENARIOS]).tolist())
    gamma, gamma_phi = noise.per_qubit(m.system.n_qubits)
    sections = {
        "rates_rad_per_ns": {"kappa": fmt(noise.kappa), "gamma": ", ".join(map(fmt, gamma)),
                             "gamma_phi": ", ".join(map(fmt, gamma_phi))},
        "noiseless": {"max_fidelity": fmt(rep.noiseless_max),
                      "t_max_ns": fmt(rep.times[int(np.argmax(rep.noiseless))])},
    }
    for s in SCENARIOS:
        sections[s] = {"max_fidelity": fmt(rep.maximum(s)), "t_max_ns": fmt(rep.time_of_max(s)),
                       "drop": fmt(rep.drop(s))}
    write_ini(out / "noise_report.cfg", sections)
    print(f"noiseless={rep.noiseless_max:.6f} " + " ".join(
        f"{s}={rep.maximum(s):.6f}(-{rep.drop(s):.2e})" for s in SCENARIOS) + f" out={out}")
    return EXIT_OK


def cmd_validate(args) -> int:
    manifest = cfgmod.load(args.config)
    if args.chromosome:
        try:
            genes = read_chromosome(Path(args.chromosome))
            check_chromosome(genes, manifest.system)
        except (OSError, ValueError) as exc:
            raise ConfigError([(None, "chromosome", str(exc))], str(args.chromosome)) from None
    sys.stdout.write(cfgmod.to_text(manifest))
    return EXIT_OK


def cmd_show(args) -> int:
    path = cfgmod.bundled_path(args.name if args.name.endswith(".cfg") else args.name + ".cfg")
    if not path.exists():
        raise ConfigError([(None, "name", f"no bundled config {args.name!r}; have {cfgmod.BUNDLED}")])
    sys.stdout.write(path.read_text(encoding="utf-8"))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, help="override the configured GA seed")
    common.add_argument("--threads", type=int, default=os.cpu_count() or 1,
                        help="parallel evaluation workers (results do not depend on this)")
    common.add_argument("--out", help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="cavityga", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    o = sub.add_parser("optimize", parents=[common], help="run the genetic algorithm")
    o.add_argument("config")
    o.add_argument("--generations", type=int, help="override max_generations")
    o.add_argument("--log-every", type=int, default=50)
    o.set_defaults(func=cmd_optimize)

    e = sub.add_parser("evaluate", parents=[common], help="export traces for a bundle")
    e.add_argument("bundle")
    e.add_argument("--witness", type=float, action="append", metavar="C_N",
                   help="extra fidelity-witness threshold (repeatable)")
    e.add_argument("--spin-witness", type=float, nargs="?", const=DICKE_SPIN_BOUND, metavar="B_S",
                   help=f"collective-spin witness bound (default {DICKE_SPIN_BOUND})")
    e.add_argument("--samples-per-interval", type=int, default=0,
                   help="waveform samples per interval (default: integration grid)")
    e.set_defaults(func=cmd_evaluate)

    n = sub.add_parser("noise", parents=[common], help="evaluate a bundle under decoherence")
    n.add_argument("bundle")
    n.add_argument("--paper-noise", "--hardware-noise", dest="hardware_noise", action="store_true",
                   help="kappa = 2pi x 5 kHz, gamma_phi = 2pi x 300 kHz, gamma = 2pi x 5 MHz")
    n.add_argument("--kappa", type=float, help="cavity decay rate, rad/ns")
    n.add_argument("--gamma", type=float, help="qubit decay rate, rad/ns")
    n.add_argument("--gamma-phi", dest="gamma_phi", type=float, help="qubit dephasing rate, rad/ns")
    n.set_defaults(func=cmd_noise)

    v = sub.add_parser("validate", parents=[common], help="check a configuration file")
    v.add_argument("config")
    v.add_argument("--chromosome", help="also check a chromosome file against the config")
    v.set_defaults(func=cmd_validate)

    s = sub.add_parser("show", help="print a bundled configuration")
    s.add_argument("name")
    s.set_defaults(func=cmd_show)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        for line in exc.lines():
            print(f"config error: {line}", file=sys.stderr)
        return EXIT_CONFIG
    except BundleError as exc:
        print(f"bundle error: {exc}", file=sys.stderr)
        return EXIT_BUNDLE
    except PropagationError as exc:
        print(f"propagation failure: {exc}", file=sys.stderr)
        return EXIT_PROPAGATION


if __name__ == "__main__":
    sys.exit(main())
