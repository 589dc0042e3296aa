"""Local evolutionary engines: GA, GAD, DE and self-adjusting PSO.

Every individual is an orientation assignment for the fixed input
permutation. GA and GAD evolve sign vectors (int8, entries +1/-1); DE and PSO
evolve real vectors that are decoded into signs at evaluation time. Fitness is
the signed reversal distance, so lower is better everywhere.

Populations are stored column-wise in :class:`Population` (a gene matrix and
a fitness vector). All randomness comes from the ``rng`` argument, which makes
a step a deterministic function of (population, params, rng state).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from .distance import signed_reversal_distance
from .perm import ContractError, check_unsigned, real_to_signs

SIGN = "sign"
REAL = "real"


class EngineKind(str, enum.Enum):
    GA = "GA"
    GAD = "GAD"
    DE = "DE"
    PSO = "PSO"

    @property
    def family(self) -> str:
        return SIGN if self in (EngineKind.GA, EngineKind.GAD) else REAL

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class GaParams:
    crossover_prob: float
    mutation_prob: float
    selection_pct: float
    replacement_pct: float

    def __post_init__(self):
        for name in ("crossover_prob", "mutation_prob"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ContractError(f"{name} must lie in [0, 1]")
        for name in ("selection_pct", "replacement_pct"):
            if not 0.0 < getattr(self, name) <= 100.0:
                raise ContractError(f"{name} must lie in (0, 100]")


@dataclass(frozen=True)
class DeParams:
    crossover_prob: float
    mutation_factor: float

    def __post_init__(self):
        if not 0.0 <= self.crossover_prob <= 1.0:
            raise ContractError("crossover_prob must lie in [0, 1]")
        if self.mutation_factor < 0.0:
            raise ContractError("mutation_factor must be non-negative")


@dataclass(frozen=True)
class PsoParams:
    """Self-adjustment schedule for PSO.

    Inertia decays linearly from ``inertia_start`` to ``inertia_end`` over the
    run. After each generation, if more than ``success_threshold`` of the
    particles improved their personal best, the global coefficient grows by
    ``coef_step`` and the individual one shrinks by the same amount (the
    reverse otherwise); both stay inside ``[coef_min, coef_max]``.

    This schedule is a reconstruction, not a reference implementation of a
    published self-adjusting PSO; the constants are defaults only.
    """

    inertia_start: float = 0.9
    inertia_end: float = 0.4
    c_individual: float = 2.0
    c_global: float = 2.0
    coef_step: float = 0.05
    success_threshold: float = 0.2
    coef_min: float = 0.5
    coef_max: float = 2.5


EngineParams = GaParams | DeParams | PsoParams


class Individual(NamedTuple):
    """Immutable snapshot of one individual, used for migration."""

    genes: np.ndarray
    fitness: int


class Problem:
    """Fitness evaluator for one unsigned permutation.

    Sign-vector fitnesses are memoised; the distance is a pure function of the
    orientation, so the cache never changes results.
    """

    def __init__(self, perm):
        self.perm = check_unsigned(perm)
        self.n = len(self.perm)
        self._perm_arr = np.asarray(self.perm, dtype=np.int64)
        self._cache: dict[bytes, int] = {}
        self.evaluations = 0

    def evaluate_signs(self, signs: np.ndarray) -> int:
        self.evaluations += 1
        signs = np.asarray(signs, dtype=np.int8)
        key = signs.tobytes()
        d = self._cache.get(key)
        if d is None:
            d = signed_reversal_distance(tuple((signs * self._perm_arr).tolist()))
            self._cache[key] = d
        return d

    def evaluate(self, genes: np.ndarray, rng: np.random.Generator) -> int:
        genes = np.asarray(genes)
        if genes.dtype.kind == "f":
            return self.evaluate_signs(real_to_signs(genes, rng))
        return self.evaluate_signs(genes)

    def evaluate_many(self, genes: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        return np.array([self.evaluate(g, rng) for g in genes], dtype=np.int64)


@dataclass
class Population:
    genes: np.ndarray
    fitness: np.ndarray
    family: str

    def __post_init__(self):
        if self.genes.ndim != 2 or self.genes.shape[0] != self.fitness.shape[0]:
            raise ContractError("genes must be (size, n) matching fitness")

    @property
    def size(self) -> int:
        return self.genes.shape[0]

    def copy(self) -> "Population":
        return Population(self.genes.copy(), self.fitness.copy(), self.family)

    def best_index(self) -> int:
        return int(np.argmin(self.fitness))

    def best(self) -> Individual:
        i = self.best_index()
        return self.individual(i)

    def individual(self, i: int) -> Individual:
        g = self.genes[i].copy()
        g.flags.writeable = False
        return Individual(g, int(self.fitness[i]))

    def ranking(self) -> np.ndarray:
        """Indices sorted best first; ties keep index order."""
        return np.argsort(self.fitness, kind="stable")


def random_genes(family: str, count: int, n: int, rng: np.random.Generator) -> np.ndarray:
    if family == SIGN:
        return rng.choice(np.array([-1, 1], dtype=np.int8), size=(count, n))
    return rng.random((count, n))


def random_population(family: str, size: int, problem: Problem, rng) -> Population:
    genes = random_genes(family, size, problem.n, rng)
    return Population(genes, problem.evaluate_many(genes, rng), family)


# ---------------------------------------------------------------------------
# Crossover operators


def one_point_crossover(a, b, cut: int):
    """Exchange the tails after position ``cut`` (1 <= cut < n)."""
    a, b = np.asarray(a), np.asarray(b)
    n = len(a)
    if len(b) != n:
        raise ContractError("parents differ in length")
    if not 1 <= cut < n:
        raise ContractError(f"cut {cut} out of range for n={n}")
    return (
        np.concatenate([a[:cut], b[cut:]]),
        np.concatenate([b[:cut], a[cut:]]),
    )


def double_point_crossover(a, b, cut1: int, cut2: int):
    """Exchange the middle segment ``cut1+1..cut2`` (1-based)."""
    a, b = np.asarray(a), np.asarray(b)
    n = len(a)
    if len(b) != n:
        raise ContractError("parents differ in length")
    if not 1 <= cut1 < cut2 < n:
        raise ContractError(f"cuts ({cut1}, {cut2}) out of range for n={n}")
    c1, c2 = a.copy(), b.copy()
    c1[cut1:cut2] = b[cut1:cut2]
    c2[cut1:cut2] = a[cut1:cut2]
    return c1, c2


def _pct_count(pct: float, size: int) -> int:
    return max(1, math.floor(pct * size / 100.0 + 1e-9))


def _breed(pop: Population, p: GaParams, rng, double: bool) -> np.ndarray:
    """Produce ``2 * ceil(n_children / 2)`` children from the selected pool."""
    m, n = pop.genes.shape
    pool = pop.ranking()[: min(m, _pct_count(p.selection_pct, m))]
    n_children = _pct_count(p.replacement_pct, m)
    children = []
    for _ in range((n_children + 1) // 2):
        if len(pool) >= 2:
            i, j = rng.choice(pool, size=2, replace=False)
        else:
            i = j = pool[0]
        a, b = pop.genes[i], pop.genes[j]
        if rng.random() < p.crossover_prob:
            if double and n >= 3:
                c1, c2 = np.sort(rng.choice(np.arange(1, n), size=2, replace=False))
                a, b = double_point_crossover(a, b, int(c1), int(c2))
            elif n >= 2:
                a, b = one_point_crossover(a, b, int(rng.integers(1, n)))
        for child in (a, b):
            child = child.copy()
            flips = rng.random(n) < p.mutation_prob
            child[flips] = -child[flips]
            children.append(child)
    return np.array(children, dtype=np.int8).reshape(-1, n)


def ga_step(pop: Population, p: GaParams, problem: Problem, rng) -> Population:
    """One GA breeding cycle.

    The best ``selection_pct`` individuals form the parent pool, random pairs
    produce children through one-point crossover and per-gene sign-flip
    mutation, and the best children replace the worst ``replacement_pct`` of
    the population. The current best individual is never evicted.
    """
    m = pop.size
    kids = _breed(pop, p, rng, double=False)
    kid_fit = problem.evaluate_many(kids, rng)
    n_rep = min(_pct_count(p.replacement_pct, m), len(kids))
    order = np.argsort(kid_fit, kind="stable")[:n_rep]
    out = pop.copy()
    if m == 1:
        if kid_fit[order[0]] <= out.fitness[0]:
            out.genes[0], out.fitness[0] = kids[order[0]], kid_fit[order[0]]
        return out
    n_rep = min(n_rep, m - 1)
    worst = pop.ranking()[::-1][:n_rep]
    out.genes[worst] = kids[order[:n_rep]]
    out.fitness[worst] = kid_fit[order[:n_rep]]
    return out


def gad_step(pop: Population, p: GaParams, problem: Problem, rng) -> Population:
    """GA variant with double-point crossover and replacement at random slots."""
    m = pop.size
    kids = _breed(pop, p, rng, double=True)
    kid_fit = problem.evaluate_many(kids, rng)
    n_rep = min(_pct_count(p.replacement_pct, m), len(kids), m)
    order = np.argsort(kid_fit, kind="stable")[:n_rep]
    slots = rng.choice(m, size=n_rep, replace=False)
    out = pop.copy()
    out.genes[slots] = kids[order]
    out.fitness[slots] = kid_fit[order]
    return out


def de_step(pop: Population, p: DeParams, problem: Problem, rng) -> Population:
    """One DE generation (rand/1 mutation, binomial crossover).

    Each member spawns a trial vector. Trials, best first, replace residents,
    worst first, for as long as the trial is strictly better.
    """
    m, n = pop.genes.shape
    if m < 4:
        raise ContractError("DE needs a population of at least 4")
    x = pop.genes
    trials = np.empty_like(x)
    for i in range(m):
        others = np.delete(np.arange(m), i)
        r1, r2, r3 = rng.choice(others, size=3, replace=False)
        mutant = x[r1] + p.mutation_factor * (x[r2] - x[r3])
        mask = rng.random(n) < p.crossover_prob
        mask[rng.integers(n)] = True
        trials[i] = np.where(mask, mutant, x[i])
    trial_fit = problem.evaluate_many(trials, rng)

    out = pop.copy()
    best_trials = np.argsort(trial_fit, kind="stable")
    worst_residents = pop.ranking()[::-1]
    for t, r in zip(best_trials, worst_residents):
        if trial_fit[t] >= pop.fitness[r]:
            break
        out.genes[r] = trials[t]
        out.fitness[r] = trial_fit[t]
    return out


@dataclass
class PsoState:
    velocity: np.ndarray
    pbest: np.ndarray
    pbest_fit: np.ndarray
    gbest: np.ndarray
    gbest_fit: int
    c_individual: float
    c_global: float
    inertia: float
    iteration: int
    max_it: int
    params: PsoParams

    def copy(self) -> "PsoState":
        return replace(
            self,
            velocity=self.velocity.copy(),
            pbest=self.pbest.copy(),
            pbest_fit=self.pbest_fit.copy(),
            gbest=self.gbest.copy(),
        )

    def reset_particles(self, idx, pop: Population):
        """Forget the history of particles whose position was overwritten."""
        idx = np.asarray(idx, dtype=np.int64)
        self.velocity[idx] = 0.0
        self.pbest[idx] = pop.genes[idx]
        self.pbest_fit[idx] = pop.fitness[idx]
        self._refresh_gbest()

    def _refresh_gbest(self):
        b = int(np.argmin(self.pbest_fit))
        if self.pbest_fit[b] < self.gbest_fit:
            self.gbest = self.pbest[b].copy()
            self.gbest_fit = int(self.pbest_fit[b])


def init_pso_state(pop: Population, max_it: int, params: PsoParams | None = None,
                   iteration: int = 0) -> PsoState:
    params = params or PsoParams()
    b = pop.best_index()
    state = PsoState(
        velocity=np.zeros_like(pop.genes, dtype=float),
        pbest=pop.genes.astype(float).copy(),
        pbest_fit=pop.fitness.copy(),
        gbest=pop.genes[b].astype(float).copy(),
        gbest_fit=int(pop.fitness[b]),
        c_individual=params.c_individual,
        c_global=params.c_global,
        inertia=params.inertia_start,
        iteration=iteration,
        max_it=max(1, max_it),
        params=params,
    )
    return state


def pso_step(pop: Population, state: PsoState, problem: Problem, rng):
    """One PSO iteration; returns the moved population and the new state."""
    m, n = pop.genes.shape
    st = state.copy()
    prm = st.params
    frac = min(1.0, st.iteration / st.max_it)
    st.inertia = prm.inertia_start - (prm.inertia_start - prm.inertia_end) * frac
    x = pop.genes
    r1 = rng.random((m, n))
    r2 = rng.random((m, n))
    st.velocity = (
        st.inertia * st.velocity
        + st.c_individual * r1 * (st.pbest - x)
        + st.c_global * r2 * (st.gbest - x)
    )
    new_x = x + st.velocity
    fit = problem.evaluate_many(new_x, rng)

    improved = fit < st.pbest_fit
    st.pbest[improved] = new_x[improved]
    st.pbest_fit[improved] = fit[improved]
    st._refresh_gbest()

    if improved.mean() > prm.success_threshold:
        st.c_global += prm.coef_step
        st.c_individual -= prm.coef_step
    else:
        st.c_global -= prm.coef_step
        st.c_individual += prm.coef_step
    st.c_global = float(np.clip(st.c_global, prm.coef_min, prm.coef_max))
    st.c_individual = float(np.clip(st.c_individual, prm.coef_min, prm.coef_max))
    st.iteration += 1
    return Population(new_x, fit, REAL), st


# ---------------------------------------------------------------------------
# Representation conversion

SIGN_TO_REAL = {-1: 0.25, 1: 0.75}


def convert_genes(genes: np.ndarray, fitness: np.ndarray, src_family: str,
                  dst_family: str, problem: Problem, rng):
    """Map gene rows between the sign and real families.

    Signs become 0.25 / 0.75; reals are decoded with the interval rule. Fitness
    is kept when the mapping is deterministic, otherwise re-evaluated.
    """
    genes = np.atleast_2d(genes)
    fitness = np.asarray(fitness, dtype=np.int64).copy()
    if src_family == dst_family:
        return genes.copy(), fitness
    if src_family == SIGN:
        return np.where(genes < 0, SIGN_TO_REAL[-1], SIGN_TO_REAL[1]), fitness
    out = np.empty(genes.shape, dtype=np.int8)
    for i, g in enumerate(genes):
        in_range = bool(np.all((g >= 0.0) & (g <= 1.0)))
        out[i] = real_to_signs(g, rng)
        if not in_range:
            fitness[i] = problem.evaluate_signs(out[i])
    return out, fitness


def convert_population(pop: Population, src: EngineKind, dst: EngineKind,
                       problem: Problem, rng) -> Population:
    src, dst = EngineKind(src), EngineKind(dst)
    if pop.family != src.family:
        raise ContractError(f"population family {pop.family} does not match {src}")
    genes, fit = convert_genes(pop.genes, pop.fitness, src.family, dst.family, problem, rng)
    return Population(genes, fit, dst.family)


# ---------------------------------------------------------------------------
# Uniform driver


def engine_step(kind: EngineKind, pop: Population, params, problem: Problem, rng,
                state: PsoState | None = None):
    """Advance ``pop`` one generation with engine ``kind``.

    Returns ``(population, state)``; ``state`` is only meaningful for PSO.
    """
    if kind is EngineKind.GA:
        return ga_step(pop, params, problem, rng), None
    if kind is EngineKind.GAD:
        return gad_step(pop, params, problem, rng), None
    if kind is EngineKind.DE:
        return de_step(pop, params, problem, rng), None
    if state is None:
        raise ContractError("PSO step needs a PsoState")
    return pso_step(pop, state, problem, rng)


@dataclass
class SequentialResult:
    best_fitness: int
    best: Individual
    history: list[int]
    population: Population


def run_sequential(kind: EngineKind, params, problem: Problem, pop_size: int,
                   max_it: int, rng) -> SequentialResult:
    """Run one engine on its own for ``max_it`` generations.

    ``history[g]`` is the best fitness seen up to generation ``g`` (entry 0 is
    the initial population).
    """
    kind = EngineKind(kind)
    pop = random_population(kind.family, pop_size, problem, rng)
    state = init_pso_state(pop, max_it) if kind is EngineKind.PSO else None
    best = pop.best()
    history = [best.fitness]
    for _ in range(max_it):
        pop, state = engine_step(kind, pop, params, problem, rng, state)
        cand = pop.best()
        if cand.fitness < best.fitness:
            best = cand
        history.append(best.fitness)
    return SequentialResult(best.fitness, best, history, pop)
