"""Island-model runtime.

Islands evolve independently and exchange individuals at migration
boundaries. Two topologies are supported: a static bidirectional binary tree
and a dynamic complete graph whose pairs are recomputed at every migration
event by the good/bad/medium (gbmm) ranking. Reconfigurable models also make
the worst island adopt the engine of the best island every ``RF`` percent of
the run.

``run_model`` offers two execution modes:

* ``"deterministic"``: islands are stepped round-robin with a barrier at each
  event boundary. Output is a pure function of (config, permutation, seed).
* ``"async"``: one thread per island. Emigrants are posted to per-island
  mailboxes without blocking and drained at the receiver's next boundary; a
  coordinator computes gbmm pairs and reconfigurations from stats snapshots.
"""

from __future__ import annotations

import enum
import logging
import math
import queue
import threading
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .engines import (
    EngineKind,
    Individual,
    Population,
    Problem,
    PsoState,
    convert_genes,
    convert_population,
    engine_step,
    init_pso_state,
    random_genes,
    random_population,
)
from .perm import ContractError

log = logging.getLogger(__name__)


class ConfigError(ValueError):
    pass


class Emi(enum.IntEnum):
    BEST = 1
    WORST = 2
    RANDOM = 3


class Ep(enum.IntEnum):
    CLONE = 1
    REMOVE = 2


class Imi(enum.IntEnum):
    WORST = 1
    RANDOM = 2
    SIMILAR = 3


class TopologyKind(str, enum.Enum):
    STATIC_TREE = "tree"
    DYNAMIC_COMPLETE = "gbmm"


class ModelKind(str, enum.Enum):
    HOPIM = "HoPIM"
    HEPIM = "HePIM"
    RECHEPIM = "RecHePIM"


class IslandClass(str, enum.Enum):
    GOOD = "good"
    MEDIUM = "medium"
    BAD = "bad"


@dataclass(frozen=True)
class MigrationParams:
    """Migration policy: how many (IN), which (EMI/IMI), how (EP), how often (MI, %)."""

    IN: int
    EMI: Emi
    EP: Ep
    IMI: Imi
    MI: float

    def __post_init__(self):
        object.__setattr__(self, "EMI", Emi(self.EMI))
        object.__setattr__(self, "EP", Ep(self.EP))
        object.__setattr__(self, "IMI", Imi(self.IMI))
        if self.IN < 0:
            raise ConfigError("IN must be >= 0")
        if not 0 < self.MI <= 100:
            raise ConfigError("MI must lie in (0, 100]")


@dataclass(frozen=True)
class Topology:
    kind: TopologyKind
    n_islands: int
    edges: frozenset = frozenset()

    def neighbours(self, island_id: int) -> list[int]:
        out = []
        for a, b in self.edges:
            if a == island_id:
                out.append(b)
            elif b == island_id:
                out.append(a)
        return sorted(out)


def heap_tree_edges(n_islands: int) -> frozenset:
    return frozenset(
        (i, c) for i in range(1, n_islands + 1) for c in (2 * i, 2 * i + 1) if c <= n_islands
    )


def build_topology(kind, n_islands: int = 12, edges=None) -> Topology:
    """Static tree (heap-indexed unless ``edges`` overrides it) or gbmm marker."""
    kind = TopologyKind(kind)
    if kind is TopologyKind.DYNAMIC_COMPLETE:
        return Topology(kind, n_islands)
    if edges is None:
        edges = heap_tree_edges(n_islands)
    edges = frozenset(tuple(sorted(map(int, e))) for e in edges)
    _check_tree(edges, n_islands)
    return Topology(kind, n_islands, edges)


def _check_tree(edges, n_islands):
    if len(edges) != n_islands - 1:
        raise ConfigError(f"a tree on {n_islands} islands needs {n_islands - 1} edges")
    adj = {i: set() for i in range(1, n_islands + 1)}
    for a, b in edges:
        if a not in adj or b not in adj or a == b:
            raise ConfigError(f"bad tree edge ({a}, {b})")
        adj[a].add(b)
        adj[b].add(a)
    seen, stack = {1}, [1]
    while stack:
        for nb in adj[stack.pop()]:
            if nb not in seen:
                seen.add(nb)
                stack.append(nb)
    if len(seen) != n_islands:
        raise ConfigError("tree edges do not connect all islands")


# ---------------------------------------------------------------------------
# Islands


@dataclass
class Island:
    id: int
    engine: EngineKind
    params: object
    population: Population
    rng: np.random.Generator
    max_it: int
    generation: int = 0
    pso_state: PsoState | None = None

    def __post_init__(self):
        if self.engine is EngineKind.PSO and self.pso_state is None:
            self.pso_state = init_pso_state(self.population, self.max_it, iteration=self.generation)

    @property
    def stats(self) -> tuple[float, float]:
        """Fitness mean and (population) variance of the current population."""
        f = self.population.fitness.astype(float)
        return float(f.mean()), float(f.var())

    def step(self, problem: Problem):
        self.population, state = engine_step(
            self.engine, self.population, self.params, problem, self.rng, self.pso_state
        )
        if self.engine is EngineKind.PSO:
            self.pso_state = state
        self.generation += 1

    def replaced(self, idx):
        """Keep PSO memory consistent after an external overwrite of ``idx``."""
        if self.pso_state is not None and len(idx):
            self.pso_state.reset_particles(idx, self.population)


def island_score(island) -> tuple:
    """Ranking key, smaller is better: lower mean, then higher variance, then id."""
    if island.population.size == 0:
        raise ContractError("island has an empty population")
    mean, var = island.stats
    return (mean, -var, island.id)


def rank_gbmm(islands):
    """Classify 12 islands and pair them good-bad (rank aligned) and medium-medium."""
    if len(islands) != 12:
        raise ContractError(f"gbmm ranking needs exactly 12 islands, got {len(islands)}")
    order = [isl.id for isl in sorted(islands, key=island_score)]
    good, medium, bad = order[:4], order[4:8], order[8:]
    classes = {i: IslandClass.GOOD for i in good}
    classes.update({i: IslandClass.MEDIUM for i in medium})
    classes.update({i: IslandClass.BAD for i in bad})
    pairs = [(g, b) for g, b in zip(good, bad)]
    pairs += [(medium[0], medium[1]), (medium[2], medium[3])]
    return classes, pairs


# ---------------------------------------------------------------------------
# Migration primitives


def select_emigrants(pop: Population, emi, count: int, rng, ep=Ep.CLONE, problem=None):
    """Pick ``count`` emigrants.

    Returns ``(emigrants, population, refilled_indices)``. Under ``Ep.REMOVE``
    the emigrants' slots are refilled with fresh random individuals so the
    island keeps its size; this needs ``problem``.
    """
    emi, ep = Emi(emi), Ep(ep)
    if count > pop.size:
        raise ContractError(f"cannot send {count} emigrants from {pop.size} individuals")
    if count <= 0:
        return [], pop, np.empty(0, dtype=np.int64)
    if emi is Emi.BEST:
        idx = pop.ranking()[:count]
    elif emi is Emi.WORST:
        idx = _worst_first(pop.fitness)[:count]
    else:
        idx = rng.choice(pop.size, size=count, replace=False)
    idx = np.asarray(idx, dtype=np.int64)
    emigrants = [pop.individual(int(i)) for i in idx]
    if ep is Ep.CLONE:
        return emigrants, pop, np.empty(0, dtype=np.int64)
    if problem is None:
        raise ContractError("Ep.REMOVE needs a problem to build replacements")
    out = pop.copy()
    fresh = random_genes(pop.family, count, pop.genes.shape[1], rng)
    out.genes[idx] = fresh
    out.fitness[idx] = problem.evaluate_many(fresh, rng)
    return emigrants, out, idx


def _worst_first(fitness):
    # descending fitness, ties by ascending index
    return np.lexsort((np.arange(len(fitness)), -np.asarray(fitness)))


def integrate_immigrants(pop: Population, immigrants, imi, rng):
    """Overwrite residents with ``immigrants`` (already in ``pop``'s family).

    Returns ``(population, replaced_indices)``.
    """
    imi = Imi(imi)
    k = len(immigrants)
    if k > pop.size:
        raise ContractError(f"{k} immigrants exceed population of {pop.size}")
    if k == 0:
        return pop, np.empty(0, dtype=np.int64)
    out = pop.copy()
    if imi is Imi.WORST:
        slots = _worst_first(pop.fitness)[:k]
    elif imi is Imi.RANDOM:
        slots = rng.choice(pop.size, size=k, replace=False)
    else:
        slots = _similar_slots(pop, immigrants, rng)
    slots = np.asarray(slots, dtype=np.int64)
    for s, ind in zip(slots, immigrants):
        out.genes[s] = ind.genes
        out.fitness[s] = ind.fitness
    return out, slots


def _similar_slots(pop: Population, immigrants, rng):
    """Each immigrant takes a random resident of its own half of the ranking."""
    m = pop.size
    ranking = pop.ranking()
    cut = math.ceil(m / 2)
    best_half, worst_half = list(ranking[:cut]), list(ranking[cut:])
    median = float(np.median(pop.fitness))
    slots = []
    for ind in immigrants:
        pool = best_half if ind.fitness <= median else worst_half
        if not pool:
            pool = best_half or worst_half
        j = int(rng.integers(len(pool)))
        slots.append(pool.pop(j))
    return slots


def _to_family(island: Island, immigrants, problem: Problem):
    fam = island.population.family
    out = []
    for ind in immigrants:
        src = "real" if ind.genes.dtype.kind == "f" else "sign"
        if src == fam:
            out.append(ind)
            continue
        g, f = convert_genes(ind.genes[None, :], [ind.fitness], src, fam, problem, island.rng)
        out.append(Individual(g[0], int(f[0])))
    return out


def _emigrate(island: Island, params: MigrationParams, problem: Problem):
    emigrants, island.population, refilled = select_emigrants(
        island.population, params.EMI, params.IN, island.rng, params.EP, problem
    )
    island.replaced(refilled)
    return emigrants


def _immigrate(island: Island, immigrants, params: MigrationParams, problem: Problem):
    immigrants = _to_family(island, immigrants, problem)
    island.population, slots = integrate_immigrants(
        island.population, immigrants, params.IMI, island.rng
    )
    island.replaced(slots)


def migration_event(islands, topology: Topology, params: MigrationParams, problem: Problem):
    """Synchronous migration: every send is taken from the pre-event populations.

    Each incoming batch is integrated on its own, in sender-id order. Returns
    the list of (sender, receiver) links used.
    """
    by_id = {isl.id: isl for isl in islands}
    if params.IN == 0:
        return []
    if topology.kind is TopologyKind.STATIC_TREE:
        links = [(a, b) for a, b in sorted(topology.edges)] + [(b, a) for a, b in sorted(topology.edges)]
    else:
        _, pairs = rank_gbmm(islands)
        links = [(a, b) for a, b in pairs] + [(b, a) for a, b in pairs]
    senders = sorted({a for a, _ in links})
    outbox = {i: _emigrate(by_id[i], params, problem) for i in senders}
    for receiver in sorted(by_id):
        for sender in sorted(a for a, b in links if b == receiver):
            _immigrate(by_id[receiver], outbox[sender], params, problem)
    return sorted(links)


@dataclass(frozen=True)
class ReconfigRecord:
    event_index: int
    island_id: int
    old_engine: EngineKind
    new_engine: EngineKind


def reconfiguration_event(islands, engine_params: dict, problem: Problem, event_index: int = 0):
    """The worst island (by :func:`island_score`) adopts the best island's engine."""
    if len(islands) < 2:
        worst = islands[0]
        return ReconfigRecord(event_index, worst.id, worst.engine, worst.engine)
    ranked = sorted(islands, key=island_score)
    best, worst = ranked[0], ranked[-1]
    old = worst.engine
    if best.engine is not old:
        _switch_engine(worst, best.engine, engine_params[best.engine], problem)
    return ReconfigRecord(event_index, worst.id, old, worst.engine)


def _switch_engine(island: Island, new: EngineKind, params, problem: Problem):
    island.population = convert_population(island.population, island.engine, new, problem, island.rng)
    island.engine = new
    island.params = params
    island.pso_state = None
    if new is EngineKind.PSO:
        island.pso_state = init_pso_state(island.population, island.max_it, iteration=island.generation)


# ---------------------------------------------------------------------------
# Models


def default_pop_size(n: int) -> int:
    if n < 2:
        return 4
    return max(4, math.floor(24 * n * math.log2(n) / 12))


ROUND_ROBIN = (EngineKind.GA, EngineKind.GAD, EngineKind.DE, EngineKind.PSO)


@dataclass
class ModelConfig:
    name: str
    kind: ModelKind
    topology: TopologyKind
    migration: MigrationParams
    engine_params: dict
    max_it: int
    pop_size: int
    layout: list = field(default_factory=list)
    rf: float | None = None
    n_islands: int = 12
    tree_edges: list | None = None

    def __post_init__(self):
        self.kind = ModelKind(self.kind)
        self.topology = TopologyKind(self.topology)
        self.layout = [EngineKind(e) for e in self.layout]
        self.engine_params = {EngineKind(k): v for k, v in self.engine_params.items()}

    def validate(self):
        if self.n_islands < 1:
            raise ConfigError("need at least one island")
        if len(self.layout) != self.n_islands:
            raise ConfigError(f"layout has {len(self.layout)} entries for {self.n_islands} islands")
        if self.max_it < 0 or self.pop_size < 1:
            raise ConfigError("max_it must be >= 0 and pop_size >= 1")
        if self.migration.IN > self.pop_size:
            raise ConfigError(f"IN={self.migration.IN} exceeds population size {self.pop_size}")
        if self.topology is TopologyKind.DYNAMIC_COMPLETE and self.n_islands != 12:
            raise ConfigError("the gbmm topology is defined for 12 islands")
        engines = set(self.layout)
        if self.kind is ModelKind.HOPIM and len(engines) != 1:
            raise ConfigError("a HoPIM runs one engine on every island")
        if self.kind is not ModelKind.HOPIM and self.n_islands == 12:
            for e in EngineKind:
                if self.layout.count(e) != 3:
                    raise ConfigError("a 12-island HePIM runs each engine on exactly 3 islands")
        needed = engines | (set(EngineKind) if self.kind is ModelKind.RECHEPIM else set())
        missing = needed - set(self.engine_params)
        if missing:
            raise ConfigError(f"no parameters for engines {sorted(map(str, missing))}")
        if self.kind is ModelKind.RECHEPIM:
            if self.rf is None or not 0 < self.rf <= 100:
                raise ConfigError("RecHePIM needs RF in (0, 100]")
        elif self.rf is not None:
            raise ConfigError("RF only applies to RecHePIM")
        if any(e is EngineKind.DE for e in needed) and self.pop_size < 4:
            raise ConfigError("DE islands need at least 4 individuals")
        build_topology(self.topology, self.n_islands, self.tree_edges)


def event_generations(pct: float, max_it: int) -> list[int]:
    """Generations after which a periodic event fires.

    Event ``k`` (1-based) fires once ``k * pct`` percent of ``max_it`` has
    elapsed, for ``k = 1 .. floor(100 / pct)``.
    """
    p = Fraction(str(pct))
    count = math.floor(Fraction(100) / p)
    return [math.ceil(k * p * max_it / 100) for k in range(1, count + 1)]


def island_rng(seed: int, island_id: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(island_id,)))


@dataclass
class RunResult:
    best_fitness: int
    best_genes: np.ndarray
    final_best: int
    generations: int
    timeline: list
    initial_layout: list
    final_layout: list
    history: list
    populations: list
    evaluations: int = 0

    @property
    def reconfigurations(self) -> int:
        return len(self.timeline)


class _BestTracker:
    def __init__(self):
        self.fitness = None
        self.genes = None
        self.lock = threading.Lock()

    def offer(self, pop: Population):
        i = pop.best_index()
        f = int(pop.fitness[i])
        with self.lock:
            if self.fitness is None or f < self.fitness:
                self.fitness = f
                self.genes = pop.genes[i].copy()


def _init_islands(config: ModelConfig, problem: Problem, seed: int):
    islands = []
    for i, kind in enumerate(config.layout, start=1):
        rng = island_rng(seed, i)
        pop = random_population(kind.family, config.pop_size, problem, rng)
        islands.append(
            Island(i, kind, config.engine_params[kind], pop, rng, config.max_it)
        )
    return islands


def run_model(config: ModelConfig, perm, seed: int, mode: str = "deterministic") -> RunResult:
    """Run one island model on one permutation.

    The reported ``best_fitness`` is the best value seen at any point of the
    run; ``final_best`` is the best over the final populations.
    """
    config.validate()
    problem = Problem(perm)
    if mode == "deterministic":
        return _run_deterministic(config, problem, seed)
    if mode == "async":
        return _AsyncRun(config, problem, seed).run()
    raise ConfigError(f"unknown mode {mode!r}")


def _result(config, problem, islands, tracker, timeline, initial, history):
    pops = [isl.population for isl in islands]
    return RunResult(
        best_fitness=tracker.fitness,
        best_genes=tracker.genes,
        final_best=min(int(p.fitness.min()) for p in pops),
        generations=config.max_it,
        timeline=timeline,
        initial_layout=initial,
        final_layout=[isl.engine for isl in islands],
        history=history,
        populations=pops,
        evaluations=problem.evaluations,
    )


def _run_deterministic(config: ModelConfig, problem: Problem, seed: int) -> RunResult:
    topology = build_topology(config.topology, config.n_islands, config.tree_edges)
    islands = _init_islands(config, problem, seed)
    initial = [isl.engine for isl in islands]
    tracker = _BestTracker()
    for isl in islands:
        tracker.offer(isl.population)
    history = [tracker.fitness]
    migrations = event_generations(config.migration.MI, config.max_it)
    reconfigs = (
        event_generations(config.rf, config.max_it) if config.kind is ModelKind.RECHEPIM else []
    )
    timeline = []
    for g in range(1, config.max_it + 1):
        for isl in islands:
            isl.step(problem)
            tracker.offer(isl.population)
        for _ in range(migrations.count(g)):
            migration_event(islands, topology, config.migration, problem)
            for isl in islands:
                tracker.offer(isl.population)
        for _ in range(reconfigs.count(g)):
            rec = reconfiguration_event(islands, config.engine_params, problem, len(timeline) + 1)
            timeline.append(rec)
            for isl in islands:
                tracker.offer(isl.population)
        history.append(tracker.fitness)
    return _result(config, problem, islands, tracker, timeline, initial, history)


class _AsyncRun:
    """Thread-per-island execution with mailboxes and a stats coordinator."""

    def __init__(self, config: ModelConfig, problem: Problem, seed: int):
        self.config = config
        self.problem = problem
        self.topology = build_topology(config.topology, config.n_islands, config.tree_edges)
        self.islands = _init_islands(config, problem, seed)
        self.by_id = {isl.id: isl for isl in self.islands}
        self.initial = [isl.engine for isl in self.islands]
        self.mailboxes = {isl.id: queue.Queue() for isl in self.islands}
        self.commands = {isl.id: queue.Queue() for isl in self.islands}
        self.migrations = event_generations(config.migration.MI, config.max_it)
        self.reconfigs = (
            event_generations(config.rf, config.max_it) if config.kind is ModelKind.RECHEPIM else []
        )
        self.tracker = _BestTracker()
        self.snapshots = {}
        self.lock = threading.Lock()
        self.pairings = {}
        self.timeline = []
        self.reconfig_done = set()
        self.errors = []

    # coordinator -----------------------------------------------------------

    def _publish(self, isl: Island):
        snap = _Snapshot(isl.id, isl.engine, Population(
            isl.population.genes.copy(), isl.population.fitness.copy(), isl.population.family))
        with self.lock:
            self.snapshots[isl.id] = snap
        self.tracker.offer(snap.population)

    def _partners(self, event: int, island_id: int) -> list[int]:
        if self.topology.kind is TopologyKind.STATIC_TREE:
            return self.topology.neighbours(island_id)
        with self.lock:
            if event not in self.pairings:
                _, pairs = rank_gbmm(list(self.snapshots.values()))
                self.pairings[event] = pairs
            pairs = self.pairings[event]
        return [b if a == island_id else a for a, b in pairs if island_id in (a, b)]

    def _maybe_reconfigure(self, event: int):
        with self.lock:
            if event in self.reconfig_done:
                return
            self.reconfig_done.add(event)
            ranked = sorted(self.snapshots.values(), key=island_score)
            best, worst = ranked[0], ranked[-1]
            rec = ReconfigRecord(len(self.timeline) + 1, worst.id, worst.engine, best.engine)
            self.timeline.append(rec)
        if best.engine is not worst.engine:
            self.commands[worst.id].put(best.engine)

    # islands ---------------------------------------------------------------

    def _apply_commands(self, isl: Island):
        while True:
            try:
                new = self.commands[isl.id].get_nowait()
            except queue.Empty:
                return
            if new is not isl.engine:
                _switch_engine(isl, new, self.config.engine_params[new], self.problem)
            self._publish(isl)

    def _drain(self, isl: Island):
        while True:
            try:
                batch = self.mailboxes[isl.id].get_nowait()
            except queue.Empty:
                return
            _immigrate(isl, batch, self.config.migration, self.problem)

    def _island_main(self, isl: Island):
        try:
            cfg = self.config
            for g in range(1, cfg.max_it + 1):
                self._apply_commands(isl)
                isl.step(self.problem)
                self._publish(isl)
                for k, gen in enumerate(self.migrations, start=1):
                    if gen != g or cfg.migration.IN == 0:
                        continue
                    targets = self._partners(k, isl.id)
                    emigrants = _emigrate(isl, cfg.migration, self.problem)
                    for t in targets:
                        self.mailboxes[t].put(emigrants)
                    self._drain(isl)
                    self._publish(isl)
                for k, gen in enumerate(self.reconfigs, start=1):
                    if gen == g:
                        self._maybe_reconfigure(k)
            self._drain(isl)
            self._apply_commands(isl)
            self._publish(isl)
        except Exception as exc:  # surfaced in run()
            log.exception("island %d failed", isl.id)
            self.errors.append(exc)

    def run(self) -> RunResult:
        for isl in self.islands:
            self._publish(isl)
        history = [self.tracker.fitness]
        threads = [
            threading.Thread(target=self._island_main, args=(isl,), name=f"island-{isl.id}")
            for isl in self.islands
        ]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        if self.errors:
            raise self.errors[0]
        # late messages and commands are applied before reporting
        for isl in self.islands:
            self._drain(isl)
            self._apply_commands(isl)
            self.tracker.offer(isl.population)
        history.append(self.tracker.fitness)
        return _result(self.config, self.problem, self.islands, self.tracker,
                       self.timeline, self.initial, history)


@dataclass
class _Snapshot:
    """Immutable view of an island, enough for ranking."""

    id: int
    engine: EngineKind
    population: Population

    @property
    def stats(self):
        f = self.population.fitness.astype(float)
        return float(f.mean()), float(f.var())
