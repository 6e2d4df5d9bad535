"""Run configuration files and manifests.

The format is INI-style ``key = value`` text read with :mod:`configparser`.
Schema version 1 sections::

    [meta]     schema, name
    [system]   n_qubits, cavity_dim, g_max, xi_max (rad/ns), tau (ns),
               n_intervals, substeps_per_interval
    [pulse]    window
    [fitness]  target, target_amplitudes, initial_qubits, initial_fock,
               nu, mu, m_hold
    [ga]       n_pop, n_survive, n_parent_pairs, alpha, section_swap_prob,
               blend_prob, max_generations, fitness_target, fidelity_target, seed
    [noise]    kappa, gamma, gamma_phi (rad/ns; per-qubit lists allowed)

A manifest is the same file plus ``version`` and ``timestamp`` in [meta].
Floats are written with ``repr`` so a manifest round-trips exactly.
"""

from __future__ import annotations

import configparser
import os
import re
import time
from dataclasses import dataclass, fields, replace
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .dynamics import NoiseConfig
from .evolver import GAConfig
from .fitness import FitnessConfig, Problem
from .hilbert import SystemConfig, TargetLabel, basis_state, make_target
from .pulses import PulseShape

SCHEMA_VERSION = 1
TWO_PI = 2.0 * np.pi
# rates from superconducting hardware: cavity 2pi x 5 kHz, dephasing 2pi x 300 kHz, decay 2pi x 5 MHz
HARDWARE_NOISE = {"kappa": TWO_PI * 5e-6, "gamma_phi": TWO_PI * 3e-4, "gamma": TWO_PI * 5e-3}
BUNDLED = ("ghz.cfg", "dicke.cfg", "cluster.cfg")


class ConfigError(ValueError):
    """Invalid configuration; ``problems`` holds (line, field, message) triples."""

    def __init__(self, problems: list[tuple[Optional[int], str, str]], source: str = "<config>"):
        self.problems = problems
        self.source = source
        super().__init__("\n".join(self.lines()))

    def lines(self) -> list[str]:
        out = []
        for line, name, msg in self.problems:
            where = f"{self.source}:{line}" if line else self.source
            out.append(f"{where}: {name}: {msg}")
        return out


@dataclass(frozen=True)
class InitialState:
    qubits: str = "000"
    fock: int = 0


@dataclass(frozen=True)
class RunManifest:
    name: str
    system: SystemConfig
    fitness: FitnessConfig
    shape: PulseShape
    ga: GAConfig
    initial: InitialState
    target_label: TargetLabel
    target_amplitudes: Optional[tuple[complex, ...]] = None
    noise: Optional[NoiseConfig] = None
    version: str = __version__
    timestamp: str = ""

    def problem(self) -> Problem:
        return Problem(self.system, self.fitness, self.shape)

    def with_ga(self, **changes) -> "RunManifest":
        return replace(self, ga=replace(self.ga, **changes))

    def __eq__(self, other):
        if not isinstance(other, RunManifest):
            return NotImplemented
        return to_text(self) == to_text(other)


def _line_index(text: str) -> dict[tuple[str, str], int]:
    index, section = {}, None
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        m = re.match(r"\[([^\]]+)\]", line)
        if m:
            section = m.group(1).strip()
            index[(section, "")] = no
            continue
        m = re.match(r"([A-Za-z_][\w]*)\s*[=:]", line)
        if m and section:
            index[(section, m.group(1).lower())] = no
    return index


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, complex):
        return repr(value).strip("()")
    if isinstance(value, (tuple, list)):
        return ", ".join(_fmt(v) for v in value)
    if isinstance(value, TargetLabel):
        return value.value
    return str(value)


class _Reader:
    def __init__(self, parser: configparser.ConfigParser, lines: dict, source: str):
        self.parser, self.lines, self.source = parser, lines, source
        self.problems: list[tuple[Optional[int], str, str]] = []

    def fail(self, section, key, msg):
        line = self.lines.get((section, key)) or self.lines.get((section, ""))
        self.problems.append((line, f"{section}.{key}" if key else section, msg))

    def get(self, section, key, conv, default=None, required=False):
        if not self.parser.has_option(section, key):
            if required:
                self.fail(section, key, "missing required field")
            return default
        raw = self.parser.get(section, key).strip()
        if raw == "":
            return default
        try:
            return conv(raw)
        except (TypeError, ValueError) as exc:
            self.fail(section, key, f"cannot parse {raw!r} ({exc})")
            return default


def _int(raw):
    return int(raw, 0) if raw.lower().startswith("0x") else int(raw)


def _floats(raw):
    return tuple(float(x) for x in raw.replace(",", " ").split())


def _complexes(raw):
    return tuple(complex(x.replace(" ", "")) for x in raw.split(","))


def _build(reader: _Reader, make, section: str, kwargs: dict):
    """Construct a config object, mapping constructor errors back to fields."""
    try:
        return make(**{k: v for k, v in kwargs.items() if v is not None})
    except ValueError as exc:
        msg = str(exc)
        key = next((k for k in sorted(kwargs, key=len, reverse=True) if msg.startswith(k)), "")
        reader.fail(section, key, msg)
        return None


def parse_text(text: str, source: str = "<config>") -> RunManifest:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        line = getattr(exc, "lineno", None)
        raise ConfigError([(line, "syntax", str(exc).splitlines()[0])], source) from None
    r = _Reader(parser, _line_index(text), source)

    known = {"meta", "system", "pulse", "fitness", "ga", "noise"}
    for sec in parser.sections():
        if sec not in known:
            r.fail(sec, "", "unknown section")

    schema = r.get("meta", "schema", _int, SCHEMA_VERSION)
    if schema != SCHEMA_VERSION:
        r.fail("meta", "schema", f"unsupported schema version {schema} (expected {SCHEMA_VERSION})")
    name = r.get("meta", "name", str, Path(source).stem)
    version = r.get("meta", "version", str, __version__)
    timestamp = r.get("meta", "timestamp", str, "")

    sd = SystemConfig()
    sys_kw = {
        "n_qubits": r.get("system", "n_qubits", _int, required=True),
        "cavity_dim": r.get("system", "cavity_dim", _int, sd.cavity_dim),
        "g_max": r.get("system", "g_max", float, sd.g_max),
        "xi_max": r.get("system", "xi_max", float, sd.xi_max),
        "tau": r.get("system", "tau", float, required=True),
        "n_intervals": r.get("system", "n_intervals", _int, required=True),
        "substeps_per_interval": r.get("system", "substeps_per_interval", _int, sd.substeps_per_interval),
    }
    system = _build(r, SystemConfig, "system", sys_kw) if None not in sys_kw.values() else None

    shape = _build(r, PulseShape, "pulse", {"window": r.get("pulse", "window", float, 2.5)})

    label = r.get("fitness", "target", TargetLabel, required=True)
    amplitudes = r.get("fitness", "target_amplitudes", _complexes)
    qubits = r.get("fitness", "initial_qubits", str, None)
    fock = r.get("fitness", "initial_fock", _int, 0)
    target = initial_state = None
    if system is not None:
        qubits = qubits if qubits is not None else "0" * system.n_qubits
        if label is not None:
            try:
                target = make_target(label, system.n_qubits, amplitudes)
            except ValueError as exc:
                r.fail("fitness", "target", str(exc))
        if not re.fullmatch(r"[01]+", qubits):
            r.fail("fitness", "initial_qubits", f"expected a bit string, got {qubits!r}")
        else:
            try:
                initial_state = basis_state([int(b) for b in qubits], fock, system)
            except ValueError as exc:
                key = "initial_fock" if "fock" in str(exc) else "initial_qubits"
                r.fail("fitness", key, str(exc))
    fit_kw = {
        "nu": r.get("fitness", "nu", float, 0.1),
        "mu": r.get("fitness", "mu", float, 0.5),
        "m_hold": r.get("fitness", "m_hold", _int, 2),
    }
    fitness = None
    if target is not None and initial_state is not None:
        fitness = _build(r, lambda **kw: FitnessConfig(target, initial_state, **kw), "fitness", fit_kw)

    gd = GAConfig()
    ga_kw = {
        "n_pop": r.get("ga", "n_pop", _int, gd.n_pop),
        "n_survive": r.get("ga", "n_survive", _int, gd.n_survive),
        "n_parent_pairs": r.get("ga", "n_parent_pairs", _int),
        "alpha": r.get("ga", "alpha", float, gd.alpha),
        "section_swap_prob": r.get("ga", "section_swap_prob", float, gd.section_swap_prob),
        "blend_prob": r.get("ga", "blend_prob", float, gd.blend_prob),
        "max_generations": r.get("ga", "max_generations", _int, gd.max_generations),
        "fitness_target": r.get("ga", "fitness_target", float),
        "fidelity_target": r.get("ga", "fidelity_target", float),
        "seed": r.get("ga", "seed", _int, gd.seed),
    }
    ga = _build(r, GAConfig, "ga", ga_kw)

    noise = None
    if parser.has_section("noise"):
        noise = _build(r, NoiseConfig, "noise", {
            "kappa": r.get("noise", "kappa", float, 0.0),
            "gamma": r.get("noise", "gamma", _floats, ()),
            "gamma_phi": r.get("noise", "gamma_phi", _floats, ()),
        })
        if noise is not None and system is not None:
            try:
                noise.per_qubit(system.n_qubits)
            except ValueError as exc:
                r.fail("noise", "gamma", str(exc))

    if r.problems:
        raise ConfigError(r.problems, source)
    return RunManifest(
        name=name, system=system, fitness=fitness, shape=shape, ga=ga,
        initial=InitialState(qubits, fock), target_label=label,
        target_amplitudes=amplitudes, noise=noise, version=version, timestamp=timestamp,
    )


def bundled_path(name: str) -> Path:
    return Path(str(resources.files("cavityga") / "data" / name))


def resolve_config_path(path) -> Path:
    p = Path(path)
    if not p.exists() and p.name in BUNDLED and len(p.parts) == 1:
        return bundled_path(p.name)
    return p


def load(path) -> RunManifest:
    p = resolve_config_path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError([(None, "file", str(exc))], str(path)) from None
    return parse_text(text, str(path))


def to_text(m: RunManifest) -> str:
    def section(title, items):
        body = "\n".join(f"{k} = {_fmt(v)}" for k, v in items)
        return f"[{title}]\n{body}\n"

    parts = [section("meta", [("schema", SCHEMA_VERSION), ("name", m.name), ("version", m.version),
                              ("timestamp", m.timestamp)])]
    parts.append(section("system", [(f.name, getattr(m.system, f.name)) for f in fields(SystemConfig)]))
    parts.append(section("pulse", [("window", m.shape.window)]))
    fit = [("target", m.target_label)]
    if m.target_amplitudes is not None:
        fit.append(("target_amplitudes", tuple(complex(a) for a in m.target_amplitudes)))
    fit += [("initial_qubits", m.initial.qubits), ("initial_fock", m.initial.fock),
            ("nu", m.fitness.nu), ("mu", m.fitness.mu), ("m_hold", m.fitness.m_hold)]
    parts.append(section("fitness", fit))
    parts.append(section("ga", [(f.name, getattr(m.ga, f.name)) for f in fields(GAConfig)]))
    if m.noise is not None:
        parts.append(section("noise", [("kappa", m.noise.kappa), ("gamma", m.noise.gamma),
                                       ("gamma_phi", m.noise.gamma_phi)]))
    return "\n".join(parts)


def stamp(m: RunManifest) -> RunManifest:
    """Set version and timestamp; honours SOURCE_DATE_EPOCH for reproducible output."""
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    when = datetime.fromtimestamp(int(epoch) if epoch else time.time(), tz=timezone.utc)
    return replace(m, version=__version__, timestamp=when.strftime("%Y-%m-%dT%H:%M:%SZ"))
