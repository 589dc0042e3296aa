"""Friedman test and Holm step-down post-hoc comparison against a control.

Values are minimised: rank 1 goes to the smallest value in a block, and the
control algorithm is the one with the lowest mean rank.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .perm import ContractError


@dataclass
class FriedmanResult:
    statistic: float
    p_value: float
    mean_ranks: dict
    control: str
    tied_best: tuple
    n_blocks: int


@dataclass
class HolmRow:
    i: int
    algorithm: str
    p_value: float
    threshold: float
    rejected: bool
    z: float | None = None


def block_ranks(values) -> np.ndarray:
    """Rank each row ascending; ties get the average of their ranks."""
    values = np.asarray(values, dtype=float)
    ranks = np.empty_like(values)
    for b, row in enumerate(values):
        order = np.argsort(row, kind="stable")
        r = np.empty(len(row))
        i = 0
        while i < len(row):
            j = i
            while j + 1 < len(row) and row[order[j + 1]] == row[order[i]]:
                j += 1
            r[order[i : j + 1]] = (i + j) / 2.0 + 1.0
            i = j + 1
        ranks[b] = r
    return ranks


def chi2_sf(x: float, df: int) -> float:
    """Upper tail of the chi-square distribution via the regularised gamma Q."""
    if x <= 0:
        return 1.0
    return float(special.gammaincc(df / 2.0, x / 2.0))


def friedman_test(matrix, algorithms=None) -> FriedmanResult:
    """Friedman rank test over ``matrix`` (rows = blocks, columns = algorithms).

    ``chi2_F = 12 B / (k (k+1)) * sum_j (R_j - (k+1)/2)^2``, with ``R_j`` the mean
    rank of algorithm ``j`` over ``B`` blocks, referred to chi-square with
    ``k - 1`` degrees of freedom.
    """
    m = np.asarray(matrix, dtype=float)
    if m.ndim != 2 or m.shape[0] < 2 or m.shape[1] < 2:
        raise ContractError("need at least 2 blocks and 2 algorithms")
    if not np.all(np.isfinite(m)):
        raise ContractError("matrix contains non-finite values")
    n_blocks, k = m.shape
    if algorithms is None:
        algorithms = [f"A{j + 1}" for j in range(k)]
    algorithms = list(algorithms)
    if len(algorithms) != k:
        raise ContractError("one name per column is required")
    mean_ranks = block_ranks(m).mean(axis=0)
    stat = 12.0 * n_blocks / (k * (k + 1)) * float(np.sum((mean_ranks - (k + 1) / 2.0) ** 2))
    if stat < 1e-12:
        stat = 0.0
    best = mean_ranks.min()
    tied = tuple(a for a, r in zip(algorithms, mean_ranks) if math.isclose(r, best, abs_tol=1e-12))
    return FriedmanResult(
        statistic=stat,
        p_value=chi2_sf(stat, k - 1),
        mean_ranks=dict(zip(algorithms, mean_ranks.tolist())),
        control=tied[0],
        tied_best=tied,
        n_blocks=n_blocks,
    )


def normal_two_sided_p(z: float) -> float:
    return float(math.erfc(abs(z) / math.sqrt(2.0)))


def rank_z_tests(mean_ranks: dict, control: str, n_blocks: int) -> dict:
    """z statistic and two-sided p-value of each algorithm against ``control``.

    ``z = (R_j - R_control) / sqrt(k (k+1) / (6 B))``.
    """
    k = len(mean_ranks)
    se = math.sqrt(k * (k + 1) / (6.0 * n_blocks))
    out = {}
    for name, r in mean_ranks.items():
        if name == control:
            continue
        z = (r - mean_ranks[control]) / se
        out[name] = (z, normal_two_sided_p(z))
    return out


def holm_posthoc(pvalues: dict, alpha: float = 0.05, z_values: dict | None = None) -> list[HolmRow]:
    """Holm step-down procedure over the comparisons with a control.

    ``pvalues`` maps algorithm name to p-value. With ``m`` comparisons the
    sorted p-values are checked against ``alpha / m, alpha / (m-1), ...``;
    the first retained hypothesis retains every later one.
    """
    if not pvalues:
        raise ContractError("no comparisons given")
    if not 0 < alpha < 1:
        raise ContractError("alpha must lie in (0, 1)")
    for name, p in pvalues.items():
        if not 0 <= p <= 1:
            raise ContractError(f"p-value of {name} outside [0, 1]")
    items = sorted(pvalues.items(), key=lambda kv: kv[1])
    m = len(items)
    rows = []
    still_rejecting = True
    for j, (name, p) in enumerate(items):
        i = m - j
        threshold = alpha / i
        still_rejecting = still_rejecting and p <= threshold
        z = None if z_values is None else z_values.get(name)
        rows.append(HolmRow(i, name, float(p), threshold, still_rejecting, z))
    return rows


def compare_to_control(matrix, algorithms, alpha: float = 0.05):
    """Friedman test, then Holm on rank z-tests against the selected control."""
    fr = friedman_test(matrix, algorithms)
    tests = rank_z_tests(fr.mean_ranks, fr.control, fr.n_blocks)
    rows = holm_posthoc(
        {a: p for a, (_, p) in tests.items()}, alpha, {a: z for a, (z, _) in tests.items()}
    )
    return fr, rows
