"""Plan files.

A plan is an INI document with one ``[plan]`` section and optional
``[model NAME]`` sections::

    [plan]
    dataset = perms_n30.txt        ; relative to this file
    output = results.csv
    timeline = timeline.csv        ; optional
    runs = 5
    seed = 1
    pop_size = 20                  ; per island
    max_it = 30                    ; defaults to n
    models = HoPIM-DE-Tr12A, HePIM-Tr12A, rec-small

    [model rec-small]
    base = RecHePIM-Tr12A
    RF = 20
    IN = 2

Model sections accept ``base`` (a built-in model id, required) and the
overrides ``IN EMI EP IMI MI RF n_islands layout tree_edges pop_size max_it``.
Unknown sections or keys are rejected.
"""

from __future__ import annotations

import configparser
from pathlib import Path

from .archipelago import ConfigError, MigrationParams
from .experiment import ExperimentPlan, ModelSpec
from .params import load_builtin_params, model_ids

PLAN_KEYS = {
    "dataset", "output", "timeline", "runs", "seed", "pop_size", "sequential_pop_size",
    "max_it", "models", "threads", "deterministic",
}
MODEL_KEYS = {
    "base", "in", "emi", "ep", "imi", "mi", "rf", "n_islands", "layout", "tree_edges",
    "pop_size", "max_it",
}


def _split(value: str) -> list[str]:
    return [v.strip() for v in value.replace("\n", ",").split(",") if v.strip()]


def _model_spec(name: str, section) -> ModelSpec:
    unknown = set(section) - MODEL_KEYS
    if unknown:
        raise ConfigError(f"[model {name}]: unknown keys {sorted(unknown)}")
    if "base" not in section:
        raise ConfigError(f"[model {name}]: 'base' is required")
    base = section["base"].strip()
    engine_params, migration, rf = load_builtin_params(base)
    overrides = {}
    mig = {}
    for key in ("in", "emi", "ep", "imi"):
        if key in section:
            mig[key.upper()] = section.getint(key)
    if "mi" in section:
        mig["MI"] = section.getfloat("mi")
    if mig:
        if migration is None:
            raise ConfigError(f"[model {name}]: sequential models have no migration")
        fields = {k: getattr(migration, k) for k in ("IN", "EMI", "EP", "IMI", "MI")}
        fields.update(mig)
        overrides["migration"] = MigrationParams(**fields)
    if "rf" in section:
        overrides["rf"] = section.getfloat("rf")
    for key in ("n_islands", "pop_size", "max_it"):
        if key in section:
            overrides[key] = section.getint(key)
    if "layout" in section:
        overrides["layout"] = _split(section["layout"])
    if "tree_edges" in section:
        edges = []
        for tok in _split(section["tree_edges"]):
            a, _, b = tok.partition("-")
            edges.append((int(a), int(b)))
        overrides["tree_edges"] = edges
    return ModelSpec(name, base, overrides)


def load_plan(path, **cli_overrides) -> ExperimentPlan:
    path = Path(path)
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    with open(path) as fh:
        cp.read_file(fh)
    sections = {}
    for sec in cp.sections():
        if sec == "plan":
            continue
        kind, _, name = sec.partition(" ")
        if kind != "model" or not name.strip():
            raise ConfigError(f"unknown section [{sec}]")
        sections[name.strip()] = cp[sec]
    if "plan" not in cp:
        raise ConfigError("missing [plan] section")
    plan = cp["plan"]
    unknown = set(plan) - PLAN_KEYS
    if unknown:
        raise ConfigError(f"[plan]: unknown keys {sorted(unknown)}")
    for key in ("dataset", "output", "models"):
        if key not in plan:
            raise ConfigError(f"[plan]: '{key}' is required")

    specs = []
    known = set(model_ids())
    for name in _split(plan["models"]):
        if name in sections:
            specs.append(_model_spec(name, sections[name]))
        elif name in known:
            specs.append(ModelSpec(name, name))
        else:
            raise ConfigError(f"model {name!r} is neither built in nor defined in a section")
    unused = set(sections) - {s.name for s in specs}
    if unused:
        raise ConfigError(f"model sections not listed in plan.models: {sorted(unused)}")

    base = path.parent
    values = dict(
        models=specs,
        dataset=base / plan["dataset"],
        output=base / plan["output"],
        timeline=base / plan["timeline"] if "timeline" in plan else None,
        runs=plan.getint("runs", 1),
        seed=plan.getint("seed", 0),
        max_it=plan.getint("max_it") if "max_it" in plan else None,
        pop_size=plan.getint("pop_size", 20),
        sequential_pop_size=plan.getint("sequential_pop_size") if "sequential_pop_size" in plan else None,
        threads=plan.getint("threads", 1),
        deterministic=plan.getboolean("deterministic", True),
    )
    values.update({k: v for k, v in cli_overrides.items() if v is not None})
    return ExperimentPlan(**values)
