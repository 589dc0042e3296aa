"""Datasets, experiment orchestration and result aggregation.

File formats
------------
dataset
    One unsigned permutation per line, space separated, LF endings.
results CSV
    ``model,n,perm_id,run,best_fitness,generations,wall_ms``; append-only.
timeline CSV
    ``model,n,perm_id,run,event_index,island_id,old_engine,new_engine``. Rows
    with ``event_index`` 0 record the initial layout (``old_engine`` empty), so
    the final engine of every island can be replayed from this file alone.
"""

from __future__ import annotations

import csv
import logging
import math
import os
import time
import zlib
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .archipelago import ConfigError, ModelConfig, run_model
from .engines import EngineKind, Problem, run_sequential
from .params import builtin_model, is_sequential, load_builtin_params
from .perm import format_permutation, parse_permutation, random_unsigned_permutation

log = logging.getLogger(__name__)

RESULT_FIELDS = ["model", "n", "perm_id", "run", "best_fitness", "generations", "wall_ms"]
TIMELINE_FIELDS = ["model", "n", "perm_id", "run", "event_index", "island_id",
                   "old_engine", "new_engine"]


class ResultsParseError(ValueError):
    def __init__(self, path, line, msg):
        super().__init__(f"{path}:{line}: {msg}")
        self.line = line


def gen_dataset(n: int, count: int, seed: int, path) -> Path:
    if n < 1 or count < 1:
        raise ValueError("n and count must be >= 1")
    rng = np.random.default_rng(seed)
    path = Path(path)
    with open(path, "w", newline="\n") as fh:
        for _ in range(count):
            fh.write(format_permutation(random_unsigned_permutation(n, rng)) + "\n")
    return path


def load_dataset(path) -> list[tuple[int, ...]]:
    perms = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                perms.append(parse_permutation(line))
            except ValueError as exc:
                raise ResultsParseError(path, lineno, str(exc)) from None
    if not perms:
        raise ValueError(f"{path}: empty dataset")
    return perms


@dataclass
class ModelSpec:
    """A model entry of a plan: a built-in id plus optional overrides."""

    name: str
    base: str
    overrides: dict = field(default_factory=dict)

    @property
    def sequential(self) -> bool:
        return is_sequential(self.base)


@dataclass
class ExperimentPlan:
    models: list
    dataset: Path
    runs: int
    seed: int
    output: Path
    timeline: Path | None = None
    max_it: int | None = None
    pop_size: int = 20
    sequential_pop_size: int | None = None
    deterministic: bool = True
    threads: int = 1

    def __post_init__(self):
        if self.runs < 1:
            raise ConfigError("runs must be >= 1")
        if not self.models:
            raise ConfigError("plan has no models")
        names = [m.name for m in self.models]
        if len(set(names)) != len(names):
            raise ConfigError("duplicate model names in plan")

    def model_config(self, spec: ModelSpec, n: int) -> ModelConfig:
        opts = dict(spec.overrides)
        max_it = opts.pop("max_it", self.max_it if self.max_it is not None else n)
        pop_size = opts.pop("pop_size", self.pop_size)
        cfg = builtin_model(spec.base, max_it, pop_size, **opts)
        cfg.name = spec.name
        cfg.validate()
        return cfg


def cell_seed(root: int, model: str, perm_id: int, run: int) -> int:
    """Independent seed per (model, permutation, run) cell."""
    ss = np.random.SeedSequence([root, zlib.crc32(model.encode()), perm_id, run])
    return int(ss.generate_state(1, np.uint64)[0])


def run_cell(plan: ExperimentPlan, spec: ModelSpec, perm, perm_id: int, run: int):
    """Execute one cell; returns ``(result_row, timeline_rows)``."""
    n = len(perm)
    seed = cell_seed(plan.seed, spec.name, perm_id, run)
    t0 = time.perf_counter()
    timeline = []
    if spec.sequential:
        kind = EngineKind(spec.base)
        params = load_builtin_params(spec.base)[0][kind]
        max_it = spec.overrides.get("max_it", plan.max_it if plan.max_it is not None else n)
        pop = spec.overrides.get("pop_size", plan.sequential_pop_size or 12 * plan.pop_size)
        rng = np.random.default_rng(seed)
        res = run_sequential(kind, params, Problem(perm), pop, max_it, rng)
        best, gens = res.best_fitness, max_it
    else:
        cfg = plan.model_config(spec, n)
        res = run_model(cfg, perm, seed, mode="deterministic" if plan.deterministic else "async")
        best, gens = res.best_fitness, res.generations
        for island_id, eng in enumerate(res.initial_layout, start=1):
            timeline.append([spec.name, n, perm_id, run, 0, island_id, "", str(eng)])
        for rec in res.timeline:
            timeline.append([spec.name, n, perm_id, run, rec.event_index, rec.island_id,
                             str(rec.old_engine), str(rec.new_engine)])
    wall_ms = 0 if plan.deterministic else int(round((time.perf_counter() - t0) * 1000))
    return [spec.name, n, perm_id, run, best, gens, wall_ms], timeline


def _completed_cells(path: Path) -> set:
    done = set()
    if not path.exists() or path.stat().st_size == 0:
        return done
    for row in read_results(path):
        done.add((row["model"], row["perm_id"], row["run"]))
    return done


def _open_append(path: Path, header):
    fresh = not path.exists() or path.stat().st_size == 0
    fh = open(path, "a", newline="")
    writer = csv.writer(fh, lineterminator="\n")
    if fresh:
        writer.writerow(header)
    return fh, writer


def _cell_job(args):
    plan, spec, perm, perm_id, run = args
    return run_cell(plan, spec, perm, perm_id, run)


def run_experiment(plan: ExperimentPlan) -> Path:
    """Run every (model, permutation, run) cell not yet present in ``plan.output``.

    Rows are appended and flushed as cells finish, so an interrupted run can be
    resumed by calling this again with the same plan.
    """
    perms = load_dataset(plan.dataset)
    for spec in plan.models:
        if not spec.sequential:
            plan.model_config(spec, len(perms[0]))
    done = _completed_cells(plan.output)
    jobs = [
        (plan, spec, perm, perm_id, run)
        for spec in plan.models
        for perm_id, perm in enumerate(perms)
        for run in range(plan.runs)
        if (spec.name, perm_id, run) not in done
    ]
    log.info("%d cells to run (%d already done)", len(jobs), len(done))
    res_fh, res_w = _open_append(plan.output, RESULT_FIELDS)
    tl = _open_append(plan.timeline, TIMELINE_FIELDS) if plan.timeline else None
    try:
        if plan.threads > 1:
            with ProcessPoolExecutor(max_workers=plan.threads) as pool:
                outputs = pool.map(_cell_job, jobs)
                _write_outputs(outputs, res_fh, res_w, tl)
        else:
            _write_outputs(map(_cell_job, jobs), res_fh, res_w, tl)
    finally:
        res_fh.close()
        if tl:
            tl[0].close()
    return plan.output


def _write_outputs(outputs, res_fh, res_w, tl):
    for row, timeline in outputs:
        if tl:
            tl[1].writerows(timeline)
            tl[0].flush()
        res_w.writerow(row)
        res_fh.flush()
        os.fsync(res_fh.fileno())


# ---------------------------------------------------------------------------
# Reading and aggregation


def _read_csv(path, fields, types):
    path = Path(path)
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != fields:
            raise ResultsParseError(path, 1, f"expected header {','.join(fields)}")
        for row in reader:
            lineno = reader.line_num
            if not row:
                continue
            if len(row) != len(fields):
                raise ResultsParseError(path, lineno, f"expected {len(fields)} columns, got {len(row)}")
            rec = {}
            for name, value, conv in zip(fields, row, types):
                try:
                    rec[name] = conv(value.strip())
                except ValueError:
                    raise ResultsParseError(path, lineno, f"bad {name} value {value!r}") from None
            rows.append(rec)
    return rows


def read_results(path) -> list[dict]:
    return _read_csv(path, RESULT_FIELDS, [str, int, int, int, float, int, int])


def read_timeline(path) -> list[dict]:
    return _read_csv(path, TIMELINE_FIELDS, [str, int, int, int, int, int, str, str])


def per_permutation_means(rows) -> dict:
    """``{(model, n, perm_id): mean best fitness over runs}``."""
    acc = defaultdict(list)
    for r in rows:
        acc[(r["model"], r["n"], r["perm_id"])].append(r["best_fitness"])
    return {k: float(np.mean(v)) for k, v in sorted(acc.items())}


def model_means(rows) -> dict:
    """``{(model, n): mean of the per-permutation averages}``."""
    acc = defaultdict(list)
    for (model, n, _), v in per_permutation_means(rows).items():
        acc[(model, n)].append(v)
    return {k: float(np.mean(v)) for k, v in sorted(acc.items())}


def final_distribution(timeline_rows) -> dict:
    """Share (percent) of islands running each engine at the end of the runs."""
    runs = defaultdict(dict)
    seen = set()
    for r in sorted(timeline_rows, key=lambda r: r["event_index"]):
        key = (r["model"], r["n"], r["perm_id"], r["run"], r["event_index"], r["island_id"])
        if key in seen:
            continue
        seen.add(key)
        runs[(r["model"], r["n"], r["perm_id"], r["run"])][r["island_id"]] = r["new_engine"]
    counts = defaultdict(lambda: dict.fromkeys([str(e) for e in EngineKind], 0))
    for (model, *_), layout in runs.items():
        for eng in layout.values():
            counts[model][eng] += 1
    out = {}
    for model, c in sorted(counts.items()):
        total = sum(c.values())
        out[model] = {e: 100.0 * v / total for e, v in c.items()}
    return out


def _round_to_total(values, total):
    """Integer rounding that preserves ``total`` (largest remainder)."""
    floors = [math.floor(v) for v in values]
    short = total - sum(floors)
    order = sorted(range(len(values)), key=lambda i: (floors[i] - values[i], i))
    for i in order[:short]:
        floors[i] += 1
    return floors


def aggregate(results_path, out_dir, timeline_path=None) -> dict:
    """Write ``means.csv``, ``radar.csv`` and (with a timeline) ``distribution.csv``."""
    rows = read_results(results_path)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    means = model_means(rows)
    paths = {}

    paths["means"] = out_dir / "means.csv"
    with open(paths["means"], "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["model", "n", "mean_best_fitness"])
        for (model, n), v in means.items():
            w.writerow([model, n, f"{v:.6f}"])

    sizes = sorted({n for _, n in means})
    models = sorted({m for m, _ in means})
    paths["radar"] = out_dir / "radar.csv"
    with open(paths["radar"], "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["model"] + [str(n) for n in sizes])
        for m in models:
            w.writerow([m] + [f"{means[(m, n)]:.6f}" if (m, n) in means else "" for n in sizes])

    if timeline_path is not None:
        dist = final_distribution(read_timeline(timeline_path))
        paths["distribution"] = out_dir / "distribution.csv"
        engines = [str(e) for e in EngineKind]
        with open(paths["distribution"], "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["model"] + engines)
            for model, shares in dist.items():
                cents = _round_to_total([shares[e] * 100 for e in engines], 10000)
                w.writerow([model] + [f"{c / 100:.2f}" for c in cents])
    return paths


HOLM_FIELDS = ["L", "control", "i", "algorithm", "p_value", "alpha_over_i", "rejected"]


def statistics_tables(results_path, alpha: float = 0.05, models=None):
    """Friedman + Holm per permutation size ``n`` (the ``L`` column).

    Blocks are permutations; cells are per-permutation averages over runs.
    Permutations missing a model are skipped.
    """
    from .stats import compare_to_control

    per_perm = per_permutation_means(read_results(results_path))
    by_n = defaultdict(lambda: defaultdict(dict))
    for (model, n, pid), v in per_perm.items():
        if models is None or model in models:
            by_n[n][pid][model] = v
    tables = []
    for n, blocks in sorted(by_n.items()):
        names = sorted({m for b in blocks.values() for m in b}) if models is None else list(models)
        complete = [pid for pid, b in sorted(blocks.items()) if all(m in b for m in names)]
        matrix = [[blocks[pid][m] for m in names] for pid in complete]
        fr, rows = compare_to_control(matrix, names, alpha)
        tables.append((n, fr, rows))
    return tables


def holm_csv_rows(tables):
    yield HOLM_FIELDS
    for n, fr, rows in tables:
        for r in rows:
            yield [n, fr.control, r.i, r.algorithm, repr(r.p_value),
                   f"{r.threshold:.6g}", str(r.rejected).lower()]


def write_holm_csv(tables, path):
    with open(path, "w", newline="") as fh:
        csv.writer(fh, lineterminator="\n").writerows(holm_csv_rows(tables))
