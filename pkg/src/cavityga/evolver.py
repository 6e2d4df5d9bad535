"""Continuous genetic algorithm over chromosomes in [-1, 1]^n_var.

One generation: evaluate new or changed members, keep the best ``n_survive``,
draw rank-weighted parent pairs, mate each pair into two complementary
offspring, then mutate every member except the fittest.

Randomness comes from one master seed. Each (generation, purpose) pair gets
its own derived stream, so evaluation order and thread count cannot shift the
random sequence.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Callable, Optional

import numpy as np

from .fitness import ChromosomeEvaluationError, FitnessReport, Problem, evaluate_population

log = logging.getLogger(__name__)

INIT, PAIRING, MATING, MUTATION = range(4)


@dataclass(frozen=True)
class GAConfig:
    n_pop: int = 48
    n_survive: int = 24
    n_parent_pairs: Optional[int] = None
    alpha: float = 0.2
    section_swap_prob: float = 0.5
    blend_prob: float = 0.5
    max_generations: int = 2000
    fitness_target: Optional[float] = None
    fidelity_target: Optional[float] = None
    seed: int = 0

    def __post_init__(self):
        if self.n_pop < 3:
            raise ValueError("n_pop must be >= 3")
        if not 2 <= self.n_survive < self.n_pop:
            raise ValueError("n_survive must satisfy 2 <= n_survive < n_pop")
        if (self.n_pop - self.n_survive) % 2:
            raise ValueError("n_pop - n_survive must be even")
        if self.n_parent_pairs is not None and self.n_parent_pairs != self.pairs_needed:
            raise ValueError(
                f"n_parent_pairs must equal (n_pop - n_survive) / 2 = {self.pairs_needed}")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        for name in ("section_swap_prob", "blend_prob"):
            if not 0 <= getattr(self, name) <= 1:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.max_generations < 0:
            raise ValueError("max_generations must be >= 0")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    @property
    def pairs_needed(self) -> int:
        return math.ceil((self.n_pop - self.n_survive) / 2)


@dataclass
class Population:
    members: np.ndarray
    reports: list[Optional[FitnessReport]]
    generation: int = 0

    @property
    def evaluated(self) -> bool:
        return all(r is not None for r in self.reports)

    def totals(self) -> np.ndarray:
        if not self.evaluated:
            raise RuntimeError("population has unevaluated members")
        return np.array([r.total for r in self.reports])


@dataclass(frozen=True)
class GenerationRecord:
    generation: int
    best_total: float
    mean_total: float
    best_fidelity: float


@dataclass
class OptimizationResult:
    best_chromosome: np.ndarray
    best_report: FitnessReport
    history: list[GenerationRecord]
    seed: int
    config: GAConfig
    stop_reason: str = "max_generations"

    @property
    def generations(self) -> int:
        return self.history[-1].generation


def stream(seed: int, generation: int, purpose: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(generation, purpose)))


def init_population(ga: GAConfig, n_var: int, rng: np.random.Generator) -> Population:
    if n_var < 1:
        raise ValueError("n_var must be >= 1")
    members = rng.uniform(-1.0, 1.0, size=(ga.n_pop, n_var))
    return Population(members, [None] * ga.n_pop, 0)


def select_survivors(pop: Population, n_survive: int) -> list[int]:
    """Indices of the ``n_survive`` best members, best first; ties go to the lower index."""
    totals = pop.totals()
    order = np.lexsort((np.arange(len(totals)), -totals))
    return [int(i) for i in order[:n_survive]]


def rank_weights(n_survivors: int) -> np.ndarray:
    w = np.arange(n_survivors, 0, -1, dtype=float)
    return w / w.sum()


def sample_parent_pairs(n_survivors: int, rng: np.random.Generator, n_pairs: int) -> list[tuple[int, int]]:
    """Rank-weighted pairs of survivor positions; rank r (0 = best) has weight n_s - r."""
    if n_survivors < 2:
        raise ValueError("need at least 2 survivors to form pairs")
    p = rank_weights(n_survivors)
    pairs = []
    for _ in range(n_pairs):
        first = int(rng.choice(n_survivors, p=p))
        second = first
        while second == first:
            second = int(rng.choice(n_survivors, p=p))
        pairs.append((first, second))
    return pairs


def mate(p1: np.ndarray, p2: np.ndarray, n_controls: int, nodes_per_control: int,
         ga: GAConfig, rng: np.random.Generator, beta: Optional[np.ndarray] = None):
    """Two complementary offspring; ``c1 + c2 == p1 + p2`` up to rounding.

    Whole control sections are swapped between the copies with probability
    ``section_swap_prob``; then each gene is blended with probability
    ``blend_prob`` as c1 <- b c1 + (1-b) c2, c2 <- (1-b) c1 + b c2.
    ``beta`` overrides the random blend coefficients (one per gene).
    """
    n_var = n_controls * nodes_per_control
    if p1.shape != (n_var,) or p2.shape != (n_var,):
        raise ValueError(f"parents must have length {n_var}")
    c1 = p1.reshape(n_controls, nodes_per_control).copy()
    c2 = p2.reshape(n_controls, nodes_per_control).copy()
    swap = rng.random(n_controls) < ga.section_swap_prob
    c1[swap], c2[swap] = p2.reshape(n_controls, -1)[swap], p1.reshape(n_controls, -1)[swap]
    c1, c2 = c1.ravel(), c2.ravel()

    blend = rng.random(n_var) < ga.blend_prob
    b = rng.random(n_var) if beta is None else np.broadcast_to(np.asarray(beta, float), (n_var,))
    b = np.where(blend, b, 1.0)
    o1 = b * c1 + (1.0 - b) * c2
    o2 = (1.0 - b) * c1 + b * c2
    return np.clip(o1, -1.0, 1.0), np.clip(o2, -1.0, 1.0)


def mutation_count(ga: GAConfig, n_var: int) -> int:
    return int(math.floor(ga.alpha * (ga.n_pop - 1) * n_var + 0.5))


def mutate(members: np.ndarray, elite_index: int, ga: GAConfig, rng: np.random.Generator):
    """Replace randomly chosen genes outside the elite with fresh uniform draws.

    Returns the new member array and the sorted indices of touched members.
    """
    n_pop, n_var = members.shape
    if not 0 <= elite_index < n_pop:
        raise ValueError(f"elite index {elite_index} out of range")
    count = mutation_count(ga, n_var)
    out = members.copy()
    if count == 0:
        return out, []
    slots = rng.choice((n_pop - 1) * n_var, size=count, replace=False)
    rows = slots // n_var
    rows = rows + (rows >= elite_index)
    cols = slots % n_var
    out[rows, cols] = rng.uniform(-1.0, 1.0, size=count)
    return out, sorted(set(int(r) for r in rows))


def _chunks(indices: list[int], n: int) -> list[list[int]]:
    n = max(1, min(n, len(indices)))
    size = math.ceil(len(indices) / n)
    return [indices[i:i + size] for i in range(0, len(indices), size)]


def evaluate_missing(pop: Population, problem: Problem, threads: int = 1):
    todo = [i for i, r in enumerate(pop.reports) if r is None]
    if not todo:
        return

    def work(idx):
        try:
            return idx, evaluate_population(pop.members[idx], problem)
        except ChromosomeEvaluationError as err:
            member = idx[err.member] if err.member is not None else None
            raise ChromosomeEvaluationError(
                f"generation {pop.generation}, member {member}: {err}", err.time, member) from err

    batches = _chunks(todo, threads)
    if len(batches) == 1:
        results = [work(batches[0])]
    else:
        with ThreadPoolExecutor(max_workers=len(batches)) as pool:
            results = list(pool.map(work, batches))
    for idx, reports in results:
        for i, rep in zip(idx, reports):
            pop.reports[i] = rep


def next_generation(pop: Population, ga: GAConfig, n_controls: int) -> Population:
    gen = pop.generation + 1
    n_var = pop.members.shape[1]
    survivors = select_survivors(pop, ga.n_survive)
    pairs = sample_parent_pairs(len(survivors), stream(ga.seed, gen, PAIRING), ga.pairs_needed)

    mating_rng = stream(ga.seed, gen, MATING)
    offspring = []
    for i, j in pairs:
        a, b = pop.members[survivors[i]], pop.members[survivors[j]]
        offspring.extend(mate(a, b, n_controls, n_var // n_controls, ga, mating_rng))
    offspring = offspring[: ga.n_pop - ga.n_survive]

    members = np.vstack([pop.members[survivors]] + [np.asarray(offspring)])
    reports = [pop.reports[s] for s in survivors] + [None] * len(offspring)
    members, touched = mutate(members, 0, ga, stream(ga.seed, gen, MUTATION))
    for t in touched:
        reports[t] = None
    assert np.all(np.abs(members) <= 1.0)
    return Population(members, reports, gen)


def _record(pop: Population) -> GenerationRecord:
    totals = pop.totals()
    best = int(np.argmax(totals))
    return GenerationRecord(pop.generation, float(totals[best]), float(totals.mean()),
                            pop.reports[best].fidelity_at_tmax)


def _target_reached(rec: GenerationRecord, ga: GAConfig) -> Optional[str]:
    if ga.fitness_target is not None and rec.best_total >= ga.fitness_target:
        return "fitness_target"
    if ga.fidelity_target is not None and rec.best_fidelity >= ga.fidelity_target:
        return "fidelity_target"
    return None


def run(problem: Problem, ga: GAConfig, threads: int = 1,
        observer: Optional[Callable[[GenerationRecord], None]] = None) -> OptimizationResult:
    """Optimize until ``max_generations`` or a target is reached.

    Generation 0 is the evaluated random population, so the history has
    ``generations + 1`` rows. The result is a pure function of
    ``(problem, ga)``; ``threads`` only changes wall-clock time.
    """
    cfg = problem.system
    pop = init_population(ga, cfg.n_var, stream(ga.seed, 0, INIT))
    evaluate_missing(pop, problem, threads)
    history = [_record(pop)]
    if observer:
        observer(history[-1])
    reason = _target_reached(history[-1], ga) or "max_generations"

    while pop.generation < ga.max_generations and reason == "max_generations":
        pop = next_generation(pop, ga, cfg.n_controls)
        evaluate_missing(pop, problem, threads)
        rec = _record(pop)
        if rec.best_total < history[-1].best_total:
            raise AssertionError("elitism violated: best fitness decreased")
        history.append(rec)
        if observer:
            observer(rec)
        reason = _target_reached(rec, ga) or reason

    best = int(np.argmax(pop.totals()))
    log.info("stopped after %d generations (%s), best total %.6f",
             pop.generation, reason, pop.reports[best].total)
    return OptimizationResult(pop.members[best].copy(), pop.reports[best], history,
                              ga.seed, ga, reason)


def config_dict(ga: GAConfig) -> dict:
    return asdict(ga)
