"""Reversal distances.

``signed_reversal_distance`` is the fitness engine. It evaluates the
Hannenhalli-Pevzner formula ``d = n + 1 - c + h + f`` on the breakpoint graph
of the framed permutation, where ``c`` counts cycles, ``h`` hurdles and ``f``
flags a fortress.

The ``brute_force_*`` functions are exact breadth-first oracles. They build a
full distance table for a given ``n`` once (vectorised with numpy) and then
answer lookups from it.
"""

from __future__ import annotations

from functools import lru_cache
from itertools import permutations
from math import factorial

import numpy as np

from .perm import (
    ContractError,
    check_signed,
    check_unsigned,
    decode_real_vector,
    sign_vector_to_signed,
)

MAX_SRD_ORACLE_N = 8
MAX_URD_ORACLE_N = 7


def _extended(sigma):
    """Framed unsigned image of ``sigma``: 0, (2x-1, 2x) or (2x, 2x-1), 2n+1."""
    n = len(sigma)
    p = [0] * (2 * n + 2)
    for i, x in enumerate(sigma):
        if x > 0:
            p[2 * i + 1] = 2 * x - 1
            p[2 * i + 2] = 2 * x
        else:
            p[2 * i + 1] = -2 * x
            p[2 * i + 2] = -2 * x - 1
    p[-1] = 2 * n + 1
    return p


def breakpoint_graph_summary(sigma):
    """Return ``(cycles, hurdles, fortress)`` for a signed permutation."""
    sigma = tuple(sigma)
    n = len(sigma)
    p = _extended(sigma)
    m = len(p)
    pos = [0] * m
    for q, v in enumerate(p):
        pos[v] = q

    # Positions 2i, 2i+1 share a black edge; values 2i, 2i+1 share a gray edge.
    cyc = [-1] * m
    c = 0
    for start in range(0, m, 2):
        if cyc[start] >= 0:
            continue
        q = start
        while cyc[q] < 0:
            cyc[q] = c
            q2 = q ^ 1
            cyc[q2] = c
            q = pos[p[q2] ^ 1]
        c += 1
    if c == n + 1:
        return c, 0, 0

    n_edges = n + 1
    lo = [0] * n_edges
    hi = [0] * n_edges
    oriented = [False] * n_edges
    trivial = [False] * n_edges
    cycle_has_oriented = [False] * c
    for i in range(n_edges):
        a, b = pos[2 * i], pos[2 * i + 1]
        if a > b:
            a, b = b, a
        lo[i], hi[i] = a, b
        if (b - a) % 2 == 0:
            oriented[i] = True
            cycle_has_oriented[cyc[a]] = True
        elif b - a == 1 and a % 2 == 0:
            trivial[i] = True

    # Without an unoriented non-trivial cycle every component is oriented.
    if not any(
        not cycle_has_oriented[cyc[lo[i]]] and not trivial[i] for i in range(n_edges)
    ):
        return c, 0, 0

    parent = list(range(n_edges))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(x, y):
        rx, ry = find(x), find(y)
        if rx != ry:
            parent[ry] = rx

    first_of_cycle = [-1] * c
    for i in range(n_edges):
        k = cyc[lo[i]]
        if first_of_cycle[k] < 0:
            first_of_cycle[k] = i
        else:
            union(first_of_cycle[k], i)
    for i in range(n_edges):
        a, b = lo[i], hi[i]
        for q in range(a + 1, b):
            j = p[q] >> 1
            if hi[j] > b:
                union(i, j)

    comp_oriented = {}
    comp_size = {}
    for i in range(n_edges):
        r = find(i)
        comp_oriented[r] = comp_oriented.get(r, False) or oriented[i]
        comp_size[r] = comp_size.get(r, 0) + 1
    unoriented = {
        r
        for r, o in comp_oriented.items()
        if not o and not (comp_size[r] == 1 and trivial[r])
    }
    if not unoriented:
        return c, 0, 0

    # Circular order of positions, restricted to unoriented components.
    runs = []
    for q in range(m):
        r = find(p[q] >> 1)
        if r in unoriented and (not runs or runs[-1] != r):
            runs.append(r)
    if len(runs) > 1 and runs[0] == runs[-1]:
        runs.pop()
    counts = {}
    for r in runs:
        counts[r] = counts.get(r, 0) + 1
    hurdle_slots = [t for t, r in enumerate(runs) if counts[r] == 1]
    h = len(hurdle_slots)

    f = 0
    if h % 2 == 1 and len(runs) >= 3:
        n_runs = len(runs)
        all_super = True
        for t in hurdle_slots:
            before, after = runs[t - 1], runs[(t + 1) % n_runs]
            if not (before == after and counts[before] == 2):
                all_super = False
                break
        f = 1 if all_super else 0
    return c, h, f


def signed_reversal_distance(sigma) -> int:
    """Minimum number of signed reversals turning ``sigma`` into ``(+1, ..., +n)``."""
    sigma = check_signed(sigma)
    c, h, f = breakpoint_graph_summary(sigma)
    return len(sigma) + 1 - c + h + f


# --------------------------------------------------------------------------
# Brute-force oracles


@lru_cache(maxsize=None)
def _lehmer_lut(n: int) -> np.ndarray:
    """Lehmer rank of every permutation of 0..n-1, indexed by its base-n digits."""
    perms = np.array(list(permutations(range(n))), dtype=np.int64)
    lut = np.full(n**n, -1, dtype=np.int32)
    lut[perms @ (n ** np.arange(n, dtype=np.int64))] = np.arange(len(perms), dtype=np.int32)
    return lut


def _encode(states: np.ndarray, signed: bool) -> np.ndarray:
    """Perfect hash: sign bits * n! + Lehmer rank of the magnitudes."""
    n = states.shape[1]
    mags = np.abs(states).astype(np.int64) - 1
    digits = mags @ (n ** np.arange(n, dtype=np.int64))
    rank = _lehmer_lut(n)[digits].astype(np.int64)
    if not signed:
        return rank
    bits = (states < 0).astype(np.int64) @ (1 << np.arange(n, dtype=np.int64))
    return bits * factorial(n) + rank


@lru_cache(maxsize=None)
def _bfs_table(n: int, signed: bool) -> np.ndarray:
    size = (2**n if signed else 1) * factorial(n)
    dist = np.full(size, -1, dtype=np.int8)
    stamp = np.zeros(size, dtype=np.int64)
    frontier = np.arange(1, n + 1, dtype=np.int8).reshape(1, n)
    dist[_encode(frontier, signed)] = 0
    reversals = [(j, k) for j in range(n) for k in range(j, n)]
    level = 0
    while frontier.shape[0]:
        level += 1
        found = []
        for j, k in reversals:
            nxt = frontier.copy()
            seg = frontier[:, j : k + 1][:, ::-1]
            nxt[:, j : k + 1] = -seg if signed else seg
            idx = _encode(nxt, signed)
            fresh = np.flatnonzero(dist[idx] < 0)
            if not fresh.size:
                continue
            idx = idx[fresh]
            # keep one representative per new state
            stamp[idx] = fresh
            keep = fresh[stamp[idx] == fresh]
            dist[idx] = level
            found.append(nxt[keep])
        frontier = np.concatenate(found) if found else np.empty((0, n), dtype=np.int8)
    return dist


def brute_force_srd(sigma) -> int:
    """Exact signed reversal distance by exhaustive BFS (``n <= 8``)."""
    sigma = check_signed(sigma)
    n = len(sigma)
    if n > MAX_SRD_ORACLE_N:
        raise ContractError(f"brute_force_srd refuses n={n} > {MAX_SRD_ORACLE_N}")
    table = _bfs_table(n, True)
    return int(table[_encode(np.array([sigma], dtype=np.int8), True)[0]])


def brute_force_urd(pi) -> int:
    """Exact unsigned reversal distance by exhaustive BFS (``n <= 7``)."""
    pi = check_unsigned(pi)
    n = len(pi)
    if n > MAX_URD_ORACLE_N:
        raise ContractError(f"brute_force_urd refuses n={n} > {MAX_URD_ORACLE_N}")
    table = _bfs_table(n, False)
    return int(table[_encode(np.array([pi], dtype=np.int8), False)[0]])


def srd_table(n: int) -> np.ndarray:
    """Full BFS distance table, indexed like ``encode_signed``."""
    if not 1 <= n <= MAX_SRD_ORACLE_N:
        raise ContractError(f"srd_table needs 1 <= n <= {MAX_SRD_ORACLE_N}")
    return _bfs_table(n, True)


def encode_signed(states) -> np.ndarray:
    return _encode(np.atleast_2d(np.asarray(states, dtype=np.int8)), True)


def fitness(representation, pi, rng=None) -> int:
    """Signed reversal distance of ``pi`` oriented by ``representation``.

    Integer arrays/tuples are read as sign vectors; floating arrays as real
    vectors, decoded with :func:`~rechepim.perm.decode_real_vector` (``rng`` is
    needed only when a coordinate falls outside ``[0, 1]``).
    """
    rep = np.asarray(representation)
    if rep.dtype.kind == "f":
        if rng is None:
            rng = np.random.default_rng()
        return signed_reversal_distance(decode_real_vector(rep, pi, rng))
    return signed_reversal_distance(sign_vector_to_signed(tuple(int(x) for x in rep), pi))
