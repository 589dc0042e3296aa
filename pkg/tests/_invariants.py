"""Randomised operation sequences over a small archipelago with invariant checks."""

from collections import Counter

import numpy as np

from rechepim.archipelago import (
    Emi,
    Ep,
    Imi,
    Island,
    MigrationParams,
    TopologyKind,
    build_topology,
    event_generations,
    island_rng,
    island_score,
    migration_event,
    rank_gbmm,
    reconfiguration_event,
)
from rechepim.engines import EngineKind, Problem, random_population
from rechepim.params import ISLAND_ENGINE_PARAMS, TREE

ENGINES = list(EngineKind)


def _archipelago(problem, seed, pop_size, layout):
    islands = []
    for i, kind in enumerate(layout, start=1):
        rng = island_rng(seed, i)
        pop = random_population(kind.family, pop_size, problem, rng)
        islands.append(Island(i, kind, ISLAND_ENGINE_PARAMS[TREE][kind], pop, rng, 50))
    return islands


def check_islands(islands, problem, pop_size):
    bad = []
    n = problem.n
    for isl in islands:
        pop = isl.population
        if pop.size != pop_size or pop.genes.shape != (pop_size, n):
            bad.append(f"island {isl.id}: shape {pop.genes.shape}")
        if pop.family != isl.engine.family:
            bad.append(f"island {isl.id}: family {pop.family} under {isl.engine}")
        if pop.family == "sign":
            if pop.genes.dtype != np.int8 or not np.all(np.abs(pop.genes) == 1):
                bad.append(f"island {isl.id}: bad sign genes")
        elif pop.genes.dtype.kind != "f":
            bad.append(f"island {isl.id}: real genes of dtype {pop.genes.dtype}")
        if np.any(pop.fitness < 0) or np.any(pop.fitness > n + 1):
            bad.append(f"island {isl.id}: fitness out of range")
        for g, f in zip(pop.genes, pop.fitness):
            if pop.family == "sign" or np.all((g >= 0) & (g <= 1)):
                if problem.evaluate(g, isl.rng) != f:
                    bad.append(f"island {isl.id}: stale fitness")
                    break
        if isl.engine is EngineKind.PSO:
            st = isl.pso_state
            if st is None or st.pbest.shape != pop.genes.shape:
                bad.append(f"island {isl.id}: PSO state missing or misshapen")
            elif st.gbest_fit > st.pbest_fit.min():
                bad.append(f"island {isl.id}: gbest worse than a pbest")
        elif isl.pso_state is not None:
            bad.append(f"island {isl.id}: PSO state on {isl.engine}")
    return bad


def run_invariant_suite(iterations, seed=2024, n=10, pop_size=6):
    """Apply ``iterations`` random operations; return the list of violations."""
    rng = np.random.default_rng(seed)
    violations = []
    islands = problem = None
    for it in range(iterations):
        if it % 200 == 0:
            problem = Problem(tuple(int(x) for x in rng.permutation(n) + 1))
            hetero = bool(rng.integers(2))
            layout = [ENGINES[i % 4] for i in range(12)] if hetero else \
                [ENGINES[int(rng.integers(4))]] * 12
            islands = _archipelago(problem, int(rng.integers(1 << 30)), pop_size, layout)
        op = rng.random()
        before = [isl.engine for isl in islands]
        if op < 0.4:
            isl = islands[int(rng.integers(12))]
            isl.step(problem)
        elif op < 0.85:
            params = MigrationParams(
                IN=int(rng.integers(0, pop_size + 1)),
                EMI=Emi(int(rng.integers(1, 4))),
                EP=Ep(int(rng.integers(1, 3))),
                IMI=Imi(int(rng.integers(1, 4))),
                MI=10,
            )
            kind = TopologyKind.STATIC_TREE if rng.random() < 0.5 else TopologyKind.DYNAMIC_COMPLETE
            topo = build_topology(kind, 12)
            links = migration_event(islands, topo, params, problem)
            if params.IN and kind is TopologyKind.STATIC_TREE:
                want = sorted(topo.edges | {(b, a) for a, b in topo.edges})
                if links != want:
                    violations.append(f"it {it}: tree links {links}")
            if params.IN and kind is TopologyKind.DYNAMIC_COMPLETE:
                members = Counter(x for link in links for x in link)
                if set(members) != set(range(1, 13)) or set(members.values()) != {2}:
                    violations.append(f"it {it}: gbmm links do not pair every island once")
            if [isl.engine for isl in islands] != before:
                violations.append(f"it {it}: migration changed an engine")
        else:
            ranked = sorted(islands, key=island_score)
            rec = reconfiguration_event(islands, ISLAND_ENGINE_PARAMS[TREE], problem, it)
            after = [isl.engine for isl in islands]
            changed = [i for i, (a, b) in enumerate(zip(before, after)) if a is not b]
            if len(changed) > 1:
                violations.append(f"it {it}: {len(changed)} islands changed engine")
            if rec.island_id != ranked[-1].id or rec.new_engine is not ranked[0].engine:
                violations.append(f"it {it}: reconfiguration did not copy best to worst")
            if changed and islands[changed[0]].id != rec.island_id:
                violations.append(f"it {it}: wrong island reconfigured")
        violations += [f"it {it}: {v}" for v in check_islands(islands, problem, pop_size)]
        if it % 50 == 0:
            classes, pairs = rank_gbmm(islands)
            counts = Counter(classes.values())
            if sorted(counts.values()) != [4, 4, 4] or len(pairs) != 6:
                violations.append(f"it {it}: bad gbmm classes")
            pct = float(rng.choice([5, 10, 12, 14, 22, 24, 30, 33.3, 100]))
            max_it = int(rng.integers(1, 400))
            gens = event_generations(pct, max_it)
            if len(gens) != int(100 // pct) or gens != sorted(gens) or gens[-1] > max_it or gens[0] < 1:
                violations.append(f"it {it}: event schedule {pct}% of {max_it}")
    return violations
