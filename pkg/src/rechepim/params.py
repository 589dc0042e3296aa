"""Tuned parameter settings and the named model catalogue.

Model ids:

* sequential engines: ``GA``, ``GAD``, ``DE``, ``PSO``
* homogeneous island models: ``HoPIM-<engine>-Tr12A`` / ``HoPIM-<engine>-gbmm12A``
* heterogeneous: ``HePIM-Tr12A``, ``HePIM-gbmm12A``
* reconfigurable: ``RecHePIM-Tr12A``, ``RecHePIM-gbmm12A``
"""

from __future__ import annotations

from .archipelago import (
    ROUND_ROBIN,
    ConfigError,
    MigrationParams,
    ModelConfig,
    ModelKind,
    TopologyKind,
)
from .engines import DeParams, EngineKind, GaParams, PsoParams

GA, GAD, DE, PSO = EngineKind.GA, EngineKind.GAD, EngineKind.DE, EngineKind.PSO
TREE, GBMM = "Tr12A", "gbmm12A"

SEQUENTIAL_PARAMS = {
    GA: GaParams(crossover_prob=0.90, mutation_prob=0.02, selection_pct=60, replacement_pct=60),
    GAD: GaParams(crossover_prob=0.92, mutation_prob=0.01, selection_pct=98, replacement_pct=90),
    DE: DeParams(crossover_prob=0.74, mutation_factor=0.01),
    PSO: PsoParams(),
}

# Breeding parameters of each engine inside the island models, per topology.
ISLAND_ENGINE_PARAMS = {
    TREE: {
        GA: GaParams(0.98, 0.015, 92, 70),
        GAD: GaParams(0.98, 0.01, 98, 80),
        DE: DeParams(0.72, 0.014),
        PSO: PsoParams(),
    },
    GBMM: {
        GA: GaParams(0.96, 0.011, 94, 70),
        GAD: GaParams(0.98, 0.01, 94, 90),
        DE: DeParams(0.78, 0.01),
        PSO: PsoParams(),
    },
}

HOPIM_MIGRATION = {
    TREE: {
        GA: MigrationParams(IN=9, EMI=1, EP=2, IMI=1, MI=30),
        GAD: MigrationParams(IN=12, EMI=1, EP=2, IMI=1, MI=14),
        DE: MigrationParams(IN=3, EMI=1, EP=1, IMI=1, MI=14),
        PSO: MigrationParams(IN=6, EMI=3, EP=2, IMI=1, MI=12),
    },
    GBMM: {
        GA: MigrationParams(IN=5, EMI=1, EP=2, IMI=1, MI=30),
        GAD: MigrationParams(IN=5, EMI=1, EP=1, IMI=1, MI=12),
        DE: MigrationParams(IN=5, EMI=1, EP=2, IMI=1, MI=12),
        PSO: MigrationParams(IN=5, EMI=3, EP=2, IMI=2, MI=22),
    },
}

HETERO_MIGRATION = {
    TREE: MigrationParams(IN=3, EMI=1, EP=2, IMI=3, MI=10),
    GBMM: MigrationParams(IN=6, EMI=3, EP=1, IMI=3, MI=14),
}

RECONFIG_FREQUENCY = {TREE: 14, GBMM: 24}

TOPOLOGY_KIND = {TREE: TopologyKind.STATIC_TREE, GBMM: TopologyKind.DYNAMIC_COMPLETE}


def model_ids() -> list[str]:
    ids = [str(e) for e in EngineKind]
    for topo in (TREE, GBMM):
        ids += [f"HoPIM-{e}-{topo}" for e in EngineKind]
    for topo in (TREE, GBMM):
        ids += [f"HePIM-{topo}", f"RecHePIM-{topo}"]
    return ids


def _parse(model_id: str):
    parts = model_id.split("-")
    if len(parts) == 1 and parts[0] in EngineKind.__members__:
        return "SEQ", EngineKind(parts[0]), None
    if len(parts) == 3 and parts[0] == "HoPIM" and parts[1] in EngineKind.__members__ \
            and parts[2] in (TREE, GBMM):
        return "HoPIM", EngineKind(parts[1]), parts[2]
    if len(parts) == 2 and parts[0] in ("HePIM", "RecHePIM") and parts[1] in (TREE, GBMM):
        return parts[0], None, parts[1]
    raise ConfigError(f"unknown model id {model_id!r}; known: {', '.join(model_ids())}")


def load_builtin_params(model_id: str):
    """Tuned ``(engine_params, migration, rf)`` for a named model.

    ``engine_params`` maps each engine the model may run to its parameters;
    ``migration`` and ``rf`` are ``None`` where they do not apply.
    """
    family, engine, topo = _parse(model_id)
    if family == "SEQ":
        return {engine: SEQUENTIAL_PARAMS[engine]}, None, None
    if family == "HoPIM":
        return {engine: ISLAND_ENGINE_PARAMS[topo][engine]}, HOPIM_MIGRATION[topo][engine], None
    rf = RECONFIG_FREQUENCY[topo] if family == "RecHePIM" else None
    return dict(ISLAND_ENGINE_PARAMS[topo]), HETERO_MIGRATION[topo], rf


def is_sequential(model_id: str) -> bool:
    return _parse(model_id)[0] == "SEQ"


def builtin_model(model_id: str, max_it: int, pop_size: int, **overrides) -> ModelConfig:
    """A ready-to-run :class:`ModelConfig` for a named island model."""
    family, engine, topo = _parse(model_id)
    if family == "SEQ":
        raise ConfigError(f"{model_id} is a sequential engine, not an island model")
    engine_params, migration, rf = load_builtin_params(model_id)
    n_islands = overrides.pop("n_islands", 12)
    if family == "HoPIM":
        kind, layout = ModelKind.HOPIM, [engine] * n_islands
    else:
        kind = ModelKind.RECHEPIM if family == "RecHePIM" else ModelKind.HEPIM
        layout = [ROUND_ROBIN[i % 4] for i in range(n_islands)]
    cfg = dict(
        name=model_id,
        kind=kind,
        topology=TOPOLOGY_KIND[topo],
        migration=migration,
        engine_params=engine_params,
        max_it=max_it,
        pop_size=pop_size,
        layout=layout,
        rf=rf,
        n_islands=n_islands,
    )
    cfg.update(overrides)
    return ModelConfig(**cfg)
