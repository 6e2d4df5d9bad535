"""End-to-end acceptance checks, one PASS/FAIL line per criterion.

The three optimization reproductions run up to five seeds each and stop at
the first seed whose best fidelity clears the bar. They dominate the runtime
(tens of minutes on one core); everything else takes seconds.
"""

import os
from dataclasses import replace

import numpy as np
import pytest

from cavityga import config as cfgmod
from cavityga.analysis import noise_study, reduced_qubit_states
from cavityga.bundle import read_bundle, write_bundle
from cavityga.config import HARDWARE_NOISE
from cavityga.dynamics import NoiseConfig, evolve_closed, evolve_lindblad
from cavityga.evolver import GAConfig, mate, run
from cavityga.fitness import evaluate_fitness
from cavityga.hilbert import (
    SystemConfig, basis_state, fidelity, make_target, partial_trace_qubits, pure_density,
)
from cavityga.pulses import ControlSchedule, PulseShape, decode_chromosome
from cavityga.witnesses import (
    DEFAULT_THRESHOLDS, WitnessKind, WitnessSpec, collective_spin_witness_value,
    fidelity_witness_value, gme_regions,
)

SEEDS = (1, 2, 3, 4, 5)
THREADS = os.cpu_count() or 1
REPRODUCTIONS = {
    1: ("ghz.cfg", 0.96, 2000, "GHZ fidelity >= 0.96 within 2000 generations, best of 5 seeds"),
    2: ("dicke.cfg", 0.97, 2000, "Dicke fidelity >= 0.97 within 2000 generations, best of 5 seeds"),
    3: ("cluster.cfg", 0.94, 4000, "box-cluster fidelity >= 0.94 within 4000 generations, best of 5 seeds"),
}

_runs: dict[str, dict] = {}


def reproduce(name, bar, generations, root):
    """Run seeds in order until one clears ``bar``; keep every bundle."""
    if name in _runs:
        return _runs[name]
    base = cfgmod.stamp(cfgmod.load(name))
    out = {"fidelities": {}, "monotone": True, "bundles": {}}
    for seed in SEEDS:
        manifest = base.with_ga(seed=seed, max_generations=generations, fidelity_target=bar)
        result = run(manifest.problem(), manifest.ga, threads=THREADS)
        best = [h.best_total for h in result.history]
        out["monotone"] &= all(a <= b for a, b in zip(best, best[1:]))
        path = write_bundle(root / f"{name[:-4]}-seed{seed}", manifest, result)
        out["fidelities"][seed] = result.best_report.fidelity_at_tmax
        out["bundles"][seed] = path
        if result.best_report.fidelity_at_tmax >= bar:
            break
    out["best_seed"] = max(out["fidelities"], key=out["fidelities"].get)
    _runs[name] = out
    return out


@pytest.fixture(scope="session")
def bundle_root(tmp_path_factory):
    return tmp_path_factory.mktemp("acceptance-bundles")


@pytest.mark.slow
@pytest.mark.parametrize("number", [1, 2, 3])
def test_reproduction(number, bundle_root, acceptance):
    name, bar, generations, title = REPRODUCTIONS[number]
    res = reproduce(name, bar, generations, bundle_root)
    best = res["fidelities"][res["best_seed"]]
    detail = f"best {best:.4f} at seed {res['best_seed']}; per seed " + ", ".join(
        f"{s}:{f:.4f}" for s, f in res["fidelities"].items())
    assert acceptance(number, title, best >= bar, detail), detail


def random_density(rng, dim):
    rank = int(rng.integers(1, dim + 1))
    m = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = m @ m.conj().T
    return rho / np.trace(rho).real


def test_witness_algebra(acceptance):
    rng = np.random.default_rng(2024)
    worst = 0.0
    cases = [("GHZ3", 3), ("Dicke3_2", 3), ("BoxCluster4", 4)]
    for k in range(1000):
        label, n = cases[k % 3]
        target = make_target(label, n)
        for c in DEFAULT_THRESHOLDS[target.label].values():
            rho = random_density(rng, 2**n)
            spec = WitnessSpec(WitnessKind.FIDELITY, c, target)
            worst = max(worst, abs(fidelity_witness_value(rho, spec) + fidelity(rho, target) - c))

    cfg = SystemConfig(n_qubits=3, cavity_dim=6)
    target = make_target("GHZ3", 3)
    regions_ok = True
    for seed in range(5):
        sched = decode_chromosome(np.random.default_rng(seed).uniform(-1, 1, cfg.n_var), cfg, PulseShape())
        traj = evolve_closed(basis_state([0, 1, 0], 0, cfg), sched, cfg)
        fid = np.array([fidelity(r, target) for r in reduced_qubit_states(traj.states, cfg)])
        for c in (0.5, 0.75, float(np.median(fid))):
            covered = np.zeros(fid.size, bool)
            for a, b in gme_regions(traj.times, fid, c):
                covered[np.searchsorted(traj.times, a):np.searchsorted(traj.times, b) + 1] = True
            regions_ok &= bool(np.array_equal(covered, fid > c))
    ok = worst <= 1e-12 and regions_ok
    assert acceptance(4, "fidelity witness + fidelity = c_n; regions equal the F > c_n set",
                      ok, f"max residual {worst:.1e}, regions exact: {regions_ok}")


def spin_oracle(n):
    dim = 2**n
    jx = np.zeros((dim, dim), complex)
    jy = np.zeros((dim, dim), complex)
    for k in range(dim):
        for j in range(n):
            shift = n - 1 - j
            bit = (k >> shift) & 1
            jx[k ^ (1 << shift), k] += 0.5
            jy[k ^ (1 << shift), k] += 0.5j * (-1) ** bit
    return jx @ jx + jy @ jy


def test_collective_spin_witness(acceptance):
    dicke = pure_density(make_target("Dicke3_2", 3).state)
    ground = pure_density(np.eye(8)[0])
    w_d = collective_spin_witness_value(dicke, 3.12, 3)
    w_g = collective_spin_witness_value(ground, 3.12, 3)
    op = spin_oracle(3)
    o_d = 3.12 - np.trace(dicke @ op).real
    o_g = 3.12 - np.trace(ground @ op).real
    ok = all(abs(v - -0.38) <= 1e-10 for v in (w_d, o_d)) and all(abs(v - 1.62) <= 1e-10 for v in (w_g, o_g))
    assert acceptance(5, "collective-spin witness: Dicke -0.38, |000> +1.62",
                      ok, f"Dicke {w_d:.12f} (oracle {o_d:.12f}), |000> {w_g:.12f} (oracle {o_g:.12f})")


def constant_schedule(cfg, values):
    nodes = np.repeat(np.asarray(values, float)[:, None], cfg.n_intervals + 1, axis=1)
    return ControlSchedule(nodes, PulseShape(), cfg.tau)


def rabi_run(substeps, g):
    cfg = SystemConfig(n_qubits=1, cavity_dim=3, tau=1.0, n_intervals=10, substeps_per_interval=substeps)
    traj = evolve_closed(basis_state([1], 0, cfg), constant_schedule(cfg, [g, 0.0]), cfg)
    return traj, cfg


def test_integrator_oracle(acceptance):
    g = 2 * np.pi * 0.2
    traj, cfg = rabi_run(100, g)
    p_e = np.abs(traj.states[:, 1 * cfg.cavity_dim]) ** 2
    rabi_err = float(np.max(np.abs(p_e - np.cos(g * traj.times) ** 2)))

    def final_error(substeps):
        t, c = rabi_run(substeps, g)
        exact = np.zeros(c.dim, complex)
        exact[1 * c.cavity_dim] = np.cos(g * 10.0)
        exact[1] = -1j * np.sin(g * 10.0)
        return np.linalg.norm(t.final - exact)

    errs = [final_error(n) for n in (5, 10, 20, 40)]
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    ok = rabi_err <= 1e-6 and bool(np.all(orders >= 3.5))
    assert acceptance(6, "vacuum Rabi within 1e-6 over 10 ns; RK4 order >= 3.5",
                      ok, f"max |P_e - cos^2| {rabi_err:.1e}, orders {np.round(orders, 2).tolist()}")


def zero_rate_gap(cfg, amp, seed):
    sched = decode_chromosome(amp * np.random.default_rng(seed).uniform(-1, 1, cfg.n_var), cfg, PulseShape())
    psi0 = basis_state([0, 1, 0], 0, cfg)
    closed = evolve_closed(psi0, sched, cfg).states
    gaps = []

    def compare(rho, step=iter(range(cfg.n_steps + 1))):
        k = next(step)
        gaps.append(np.linalg.norm(rho - np.outer(closed[k], closed[k].conj())))
        return np.zeros(1)

    evolve_lindblad(pure_density(psi0), sched, NoiseConfig(), cfg, reduce=compare)
    return max(gaps)


def test_open_system_oracles(acceptance):
    kappa = 0.2
    cfg = SystemConfig(n_qubits=1, cavity_dim=4, tau=1.0, n_intervals=10)
    traj = evolve_lindblad(pure_density(basis_state([0], 1, cfg)), constant_schedule(cfg, [0.0, 0.0]),
                           NoiseConfig(kappa), cfg, reduce=lambda r: partial_trace_qubits(r, cfg))
    decay_err = float(np.max(np.abs(traj.states[:, 1, 1].real - np.exp(-kappa * traj.times))))

    # default grid at moderate amplitude, and full amplitude on a finer grid
    gap_default = zero_rate_gap(SystemConfig(n_qubits=3, cavity_dim=6), 0.5, 0)
    gap_fine = zero_rate_gap(SystemConfig(n_qubits=3, cavity_dim=6, substeps_per_interval=400), 1.0, 0)

    cfg = SystemConfig(n_qubits=3, cavity_dim=6)
    sched = decode_chromosome(np.random.default_rng(1).uniform(-1, 1, cfg.n_var), cfg, PulseShape())
    noise = NoiseConfig.uniform(3, 0.05, 0.05, 0.05)
    traces = evolve_lindblad(pure_density(basis_state([0, 1, 0], 0, cfg)), sched, noise, cfg,
                             reduce=lambda r: np.trace(r))
    trace_err = float(np.max(np.abs(traces.states - 1.0)))

    ok = decay_err <= 1e-6 and gap_default <= 1e-8 and gap_fine <= 1e-8 and trace_err <= 1e-7
    assert acceptance(7, "Fock-1 decay, zero-rate closed limit, trace preservation", ok,
                      f"decay err {decay_err:.1e}; closed-limit gap {gap_default:.1e} (100 substeps, "
                      f"half amplitude), {gap_fine:.1e} (400 substeps, full amplitude); trace err {trace_err:.1e}")


@pytest.mark.slow
def test_noise_robustness(bundle_root, acceptance):
    noise = NoiseConfig(HARDWARE_NOISE["kappa"], (HARDWARE_NOISE["gamma"],), (HARDWARE_NOISE["gamma_phi"],))
    ok, parts = True, []
    for number in (1, 2, 3):
        name, bar, generations, _ = REPRODUCTIONS[number]
        res = reproduce(name, bar, generations, bundle_root)
        bundle = read_bundle(res["bundles"][res["best_seed"]])
        rep = noise_study(bundle.schedule, bundle.manifest.problem(), noise)
        quiet = rep.drop("cavity_dephasing")
        decay = rep.drop("decay")
        ok &= quiet <= 0.01 and decay > quiet
        parts.append(f"{name[:-4]}: noiseless {rep.noiseless_max:.4f}, kappa+dephasing drop {quiet:.2e}, "
                     f"decay drop {decay:.2e}, all {rep.maximum('all'):.4f}")
    assert acceptance(8, "kappa+dephasing within 0.01 of noiseless; decay drop exceeds it",
                      ok, "; ".join(parts))


def test_ga_properties(tmp_path, monkeypatch, acceptance):
    rng = np.random.default_rng(99)
    ga = GAConfig()
    worst = 0.0
    for _ in range(100_000):
        p1, p2 = rng.uniform(-1, 1, 44), rng.uniform(-1, 1, 44)
        c1, c2 = mate(p1, p2, 4, 11, ga, rng)
        worst = max(worst, float(np.max(np.abs(c1 + c2 - p1 - p2))))

    monkeypatch.setenv("SOURCE_DATE_EPOCH", "1700000000")
    manifest = cfgmod.stamp(cfgmod.load("ghz.cfg")).with_ga(max_generations=40, seed=7)
    paths = []
    histories_monotone = True
    for k, threads in enumerate((1, 4, 1)):
        result = run(manifest.problem(), manifest.ga, threads=threads)
        best = [h.best_total for h in result.history]
        histories_monotone &= all(a <= b for a, b in zip(best, best[1:]))
        paths.append(write_bundle(tmp_path / f"run{k}", manifest, result))
    names = sorted(p.name for p in paths[0].iterdir())
    identical = all((paths[0] / f).read_bytes() == (p / f).read_bytes() for p in paths[1:] for f in names)
    for res in _runs.values():
        histories_monotone &= res["monotone"]
    ok = worst <= 1e-15 and identical and histories_monotone
    assert acceptance(9, "elitist monotone history, mating sum conservation, byte-identical bundles",
                      ok, f"max |c1+c2-p1-p2| {worst:.1e} over 1e5 matings; bundles identical at 1/4/1 "
                          f"threads: {identical}; monotone: {histories_monotone}")


def test_fitness_accounting(acceptance):
    m = cfgmod.load("ghz.cfg")
    cfg = m.system
    problem = m.problem()
    fcfg = problem.fitness
    problem = replace(problem, fitness=replace(fcfg, initial_state=basis_state([0, 0, 0], 0, cfg)))
    rep = evaluate_fitness(np.zeros(cfg.n_var), problem)
    ok = abs(rep.total - 0.75) <= 1e-9
    assert acceptance(10, "zero schedule, GHZ from |000>: total 0.75",
                      ok, f"F {rep.fidelity_at_tmax:.12f} + phi1 {rep.phi1:.1e} + phi2 {rep.phi2:.12f} "
                          f"= {rep.total:.12f}")
