"""Result bundles: one directory per optimization run.

    manifest.cfg    run configuration (see :mod:`cavityga.config`)
    chromosome.txt  best chromosome, one gene per line
    schedule.csv    decoded node values, rad/ns
    trace.csv       fidelity and top cavity level population on the integration grid
    history.csv     per-generation best/mean fitness
    result.cfg      scalar fitness report of the best chromosome

Numbers are written with ``repr`` (shortest exact round trip, always a '.'
decimal point), so files are byte-stable across runs and locales.
"""

from __future__ import annotations

import configparser
import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .config import ConfigError, RunManifest
from .evolver import OptimizationResult
from .fitness import FitnessReport
from .pulses import ControlSchedule, check_chromosome, decode_chromosome


class BundleError(Exception):
    """Missing or unreadable bundle content."""


def fmt(x) -> str:
    return repr(float(x))


def write_csv(path: Path, header: list[str], rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, str) else fmt(v) if isinstance(v, float) else v for v in row])


def read_csv(path: Path) -> tuple[list[str], np.ndarray]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise BundleError(f"{path.name} is empty")
    return rows[0], np.array(rows[1:], dtype=float)


def control_names(n_qubits: int) -> list[str]:
    return [f"g{j + 1}" for j in range(n_qubits)] + ["xi"]


def write_chromosome(path: Path, genes):
    path.write_text("".join(fmt(g) + "\n" for g in genes), encoding="utf-8")


def read_chromosome(path: Path) -> np.ndarray:
    text = Path(path).read_text(encoding="utf-8")
    values = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    return np.array([float(v) for v in values], dtype=float)


def write_schedule(path: Path, schedule: ControlSchedule, n_qubits: int):
    header = ["time_ns"] + [f"{c}_rad_per_ns" for c in control_names(n_qubits)]
    rows = [[float(t)] + [float(v) for v in schedule.node_values[:, i]]
            for i, t in enumerate(schedule.node_times())]
    write_csv(path, header, rows)


def write_trace(path: Path, report: FitnessReport):
    write_csv(path, ["time_ns", "fidelity", "top_level_population"],
              ([float(t), float(f), float(p)] for t, f, p in
               zip(report.times, report.fidelity_trace, report.top_level_trace)))


def report_section(report: FitnessReport) -> dict[str, str]:
    return {
        "total": fmt(report.total),
        "fidelity_at_tmax": fmt(report.fidelity_at_tmax),
        "t_max_ns": fmt(report.t_max),
        "phi1": fmt(report.phi1),
        "phi2": fmt(report.phi2),
    }


def write_ini(path: Path, sections: dict[str, dict[str, str]]):
    lines = []
    for name, items in sections.items():
        lines.append(f"[{name}]")
        lines.extend(f"{k} = {v}" for k, v in items.items())
        lines.append("")
    path.write_text("\n".join(lines), encoding="utf-8")


def read_ini(path: Path) -> configparser.ConfigParser:
    p = configparser.ConfigParser(interpolation=None)
    p.read_string(Path(path).read_text(encoding="utf-8"), source=str(path))
    return p


def write_bundle(out: Path, manifest: RunManifest, result: OptimizationResult) -> Path:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    cfg = manifest.system
    (out / "manifest.cfg").write_text(cfgmod.to_text(manifest), encoding="utf-8")
    write_chromosome(out / "chromosome.txt", result.best_chromosome)
    write_schedule(out / "schedule.csv", decode_chromosome(result.best_chromosome, cfg, manifest.shape),
                   cfg.n_qubits)
    write_trace(out / "trace.csv", result.best_report)
    write_csv(out / "history.csv", ["generation", "best_total", "mean_total", "best_fidelity"],
              ([h.generation, h.best_total, h.mean_total, h.best_fidelity] for h in result.history))
    write_ini(out / "result.cfg", {
        "result": report_section(result.best_report),
        "run": {"seed": str(result.seed), "generations": str(result.generations),
                "stop_reason": result.stop_reason},
    })
    return out


@dataclass
class Bundle:
    path: Path
    manifest: RunManifest
    chromosome: np.ndarray
    recorded: dict[str, float]

    @property
    def schedule(self) -> ControlSchedule:
        return decode_chromosome(self.chromosome, self.manifest.system, self.manifest.shape)


def read_bundle(path) -> Bundle:
    path = Path(path)
    if not path.is_dir():
        raise BundleError(f"{path} is not a bundle directory")
    try:
        manifest = cfgmod.load(path / "manifest.cfg")
        genes = check_chromosome(read_chromosome(path / "chromosome.txt"), manifest.system)
        recorded = {}
        if (path / "result.cfg").exists():
            sec = read_ini(path / "result.cfg")["result"]
            recorded = {k: float(v) for k, v in sec.items()}
    except (ConfigError, OSError, ValueError, KeyError, configparser.Error) as exc:
        raise BundleError(f"corrupt bundle {path}: {exc}") from exc
    return Bundle(path, manifest, genes, recorded)
