import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cavityga.analysis import reduced_qubit_states
from cavityga.dynamics import evolve_closed
from cavityga.fitness import (
    FitnessConfig, Problem, evaluate_fitness, evaluate_population, fidelity_trace,
    phi1_from_trace, phi2_bonus, report_from_traces, top_level_trace,
)
from cavityga.hilbert import SystemConfig, basis_state, make_target
from cavityga.pulses import PulseShape, decode_chromosome

GHZ_CFG = SystemConfig(n_qubits=3, cavity_dim=6, tau=1.0, n_intervals=10)


def ghz_problem(bits=(0, 1, 0), cfg=GHZ_CFG):
    return Problem(cfg, FitnessConfig(make_target("GHZ3", 3), basis_state(list(bits), 0, cfg)))


def test_zero_schedule_total():
    rep = evaluate_fitness(np.zeros(GHZ_CFG.n_var), ghz_problem((0, 0, 0)))
    assert rep.fidelity_at_tmax == pytest.approx(0.5, abs=1e-15)
    assert rep.t_max == 0.0
    assert rep.phi1 == 0.0
    assert rep.phi2 == pytest.approx(0.25, abs=1e-12)
    assert rep.total == pytest.approx(0.75, abs=1e-9)


def loop_trapezoid(y, t):
    return sum(0.5 * (y[i] + y[i + 1]) * (t[i + 1] - t[i]) for i in range(len(t) - 1))


def test_phi1_is_normalized_trapezoid():
    rng = np.random.default_rng(0)
    t = GHZ_CFG.time_grid()
    top = rng.uniform(0, 0.2, t.size)
    assert phi1_from_trace(top, t, 0.1) == pytest.approx(-0.1 / 10.0 * loop_trapezoid(top, t), rel=1e-12)
    assert phi1_from_trace(np.full(t.size, 0.3), t, 0.1) == pytest.approx(-0.03, rel=1e-12)


def fcfg(mu=0.5, m=2):
    return FitnessConfig(make_target("GHZ3", 3), basis_state([0, 0, 0], 0, GHZ_CFG), mu=mu, m_hold=m)


def test_phi2_saturates_at_mu():
    fid = np.ones(GHZ_CFG.n_steps + 1)
    assert phi2_bonus(fid, 3.0, fcfg(), GHZ_CFG) == pytest.approx(0.5, rel=1e-12)


def test_phi2_window_clipped_keeps_normalizer():
    fid = np.ones(GHZ_CFG.n_steps + 1)
    assert phi2_bonus(fid, 9.0, fcfg(), GHZ_CFG) == pytest.approx(0.25, rel=1e-12)
    assert phi2_bonus(fid, 10.0, fcfg(), GHZ_CFG) == 0.0


def test_phi2_matches_loop_integral():
    rng = np.random.default_rng(1)
    fid = rng.uniform(0, 1, GHZ_CFG.n_steps + 1)
    t = GHZ_CFG.time_grid()
    lo, hi = 250, 450
    expect = 0.5 / 2.0 * loop_trapezoid(fid[lo:hi + 1], t[lo:hi + 1])
    assert phi2_bonus(fid, t[lo], fcfg(), GHZ_CFG) == pytest.approx(expect, rel=1e-12)
    with pytest.raises(ValueError):
        phi2_bonus(fid, 2.5003, fcfg(), GHZ_CFG)


def test_earliest_maximum_wins():
    n = GHZ_CFG.n_steps + 1
    fid = np.zeros(n)
    fid[[200, 700]] = 0.9
    rep = report_from_traces(fid, np.zeros(n), fcfg(), GHZ_CFG)
    assert rep.t_max == pytest.approx(2.0)
    assert rep.total == pytest.approx(rep.fidelity_at_tmax + rep.phi1 + rep.phi2)


def test_batch_report_matches_state_trajectory():
    rng = np.random.default_rng(2)
    prob = ghz_problem()
    genes = rng.uniform(-1, 1, GHZ_CFG.n_var)
    rep = evaluate_fitness(genes, prob)
    traj = evolve_closed(prob.fitness.initial_state, decode_chromosome(genes, GHZ_CFG, prob.shape), GHZ_CFG)
    ref = report_from_traces(fidelity_trace(traj, prob.fitness.target, GHZ_CFG),
                             top_level_trace(traj, GHZ_CFG), prob.fitness, GHZ_CFG)
    assert rep.t_max == ref.t_max
    for k in ("total", "fidelity_at_tmax", "phi1", "phi2"):
        assert getattr(rep, k) == pytest.approx(getattr(ref, k), abs=1e-12)


def test_population_evaluation_is_deterministic_and_order_free():
    rng = np.random.default_rng(3)
    prob = ghz_problem()
    genes = rng.uniform(-1, 1, (6, GHZ_CFG.n_var))
    a = evaluate_population(genes, prob)
    b = evaluate_population(genes[::-1], prob)[::-1]
    assert all(x.same_as(y) for x, y in zip(a, b))


def test_problem_rejects_mismatched_dimensions():
    with pytest.raises(ValueError):
        Problem(GHZ_CFG, FitnessConfig(make_target("BoxCluster4", 4), basis_state([0, 0, 0], 0, GHZ_CFG)))
    with pytest.raises(ValueError):
        FitnessConfig(make_target("GHZ3", 3), basis_state([0, 0, 0], 0, GHZ_CFG), m_hold=0)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-1, 1), min_size=44, max_size=44))
def test_fitness_components_in_range(genes):
    rep = evaluate_fitness(np.array(genes), ghz_problem())
    assert -1e-12 <= rep.fidelity_at_tmax <= 1 + 1e-9
    assert -0.1 - 1e-12 <= rep.phi1 <= 0.0
    assert -1e-12 <= rep.phi2 <= 0.5 + 1e-9
    assert rep.fidelity_at_tmax == pytest.approx(rep.fidelity_trace.max())


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_reduced_state_stays_real(seed):
    # real Hamiltonian and a real initial ket keep the qubit-register state real
    rng = np.random.default_rng(seed)
    prob = ghz_problem()
    traj = evolve_closed(prob.fitness.initial_state,
                         decode_chromosome(rng.uniform(-1, 1, GHZ_CFG.n_var), GHZ_CFG, PulseShape()), GHZ_CFG)
    rho = reduced_qubit_states(traj.states[::50], GHZ_CFG)
    assert np.max(np.abs(rho.imag)) < 1e-14
