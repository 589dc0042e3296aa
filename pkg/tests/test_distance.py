import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rechepim.distance import (
    breakpoint_graph_summary,
    brute_force_srd,
    brute_force_urd,
    encode_signed,
    fitness,
    signed_reversal_distance,
    srd_table,
)
from rechepim.perm import ContractError, apply_reversal, apply_unsigned_reversal


def all_signed(n):
    for p in itertools.permutations(range(1, n + 1)):
        for s in itertools.product((1, -1), repeat=n):
            yield tuple(a * b for a, b in zip(s, p))


def reversal_neighbours(sigma):
    n = len(sigma)
    for j in range(1, n + 1):
        for k in range(j, n + 1):
            yield apply_reversal(sigma, j, k)


def naive_bfs(start, neighbours, target):
    # plain dictionary BFS, independent of the vectorised tables
    dist = {start: 0}
    frontier = [start]
    while frontier:
        nxt = []
        for s in frontier:
            if s == target:
                return dist[s]
            for t in neighbours(s):
                if t not in dist:
                    dist[t] = dist[s] + 1
                    nxt.append(t)
        frontier = nxt
    raise AssertionError("unreachable")


def unsigned_neighbours(pi):
    n = len(pi)
    for j in range(1, n + 1):
        for k in range(j + 1, n + 1):
            yield apply_unsigned_reversal(pi, j, k)


@pytest.mark.parametrize(
    "sigma,expected",
    [
        ((1,), 0),
        ((-1,), 1),
        ((2, 1), 3),
        ((-2, -1), 1),
        ((1, -2, 3), 1),
        ((3, 2, 1), 3),
        ((-3, -2, -1), 1),
    ],
)
def test_hand_examples(sigma, expected):
    assert signed_reversal_distance(sigma) == expected


def test_identity_and_single_reversals():
    for n in range(1, 9):
        ident = tuple(range(1, n + 1))
        assert signed_reversal_distance(ident) == 0
        for nb in reversal_neighbours(ident):
            assert signed_reversal_distance(nb) == 1


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_bfs_table_matches_naive_bfs(n):
    ident = tuple(range(1, n + 1))
    for sigma in all_signed(n):
        assert brute_force_srd(sigma) == naive_bfs(sigma, reversal_neighbours, ident)


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
def test_unsigned_oracle_matches_naive_bfs(n):
    ident = tuple(range(1, n + 1))
    for pi in itertools.permutations(ident):
        assert brute_force_urd(pi) == naive_bfs(pi, unsigned_neighbours, ident)


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5, 6])
def test_formula_exhaustive(n):
    table = srd_table(n)
    perms = np.array(list(all_signed(n)), dtype=np.int8)
    expected = table[encode_signed(perms)]
    got = np.array([signed_reversal_distance(tuple(p.tolist())) for p in perms])
    assert np.array_equal(got, expected)


def test_known_urd_values():
    assert brute_force_urd((1, 2, 3)) == 0
    assert brute_force_urd((3, 2, 1)) == 1
    assert brute_force_urd((2, 4, 1, 3)) == 3
    # the unsigned optimum is the best orientation
    pi = (3, 1, 4, 2, 5)
    best = min(
        signed_reversal_distance(tuple(s * g for s, g in zip(signs, pi)))
        for signs in itertools.product((1, -1), repeat=len(pi))
    )
    assert best == brute_force_urd(pi)


def test_oracles_refuse_large_inputs():
    with pytest.raises(ContractError):
        brute_force_srd(tuple(range(1, 10)))
    with pytest.raises(ContractError):
        brute_force_urd(tuple(range(1, 9)))
    with pytest.raises(ContractError):
        signed_reversal_distance((1, 2, 2))


FORTRESS_BLOCK = (1, 3, 5, 4, 6, 2, 7)


def fortress():
    n = len(FORTRESS_BLOCK)
    return tuple(x + k * n for k in range(3) for x in FORTRESS_BLOCK)


def test_fortress_structure():
    sigma = fortress()
    c, h, f = breakpoint_graph_summary(sigma)
    assert (h, f) == (3, 1)
    assert signed_reversal_distance(sigma) == len(sigma) + 1 - c + h + f


def test_fortress_distance_is_locally_consistent():
    # A true distance drops by exactly one along some reversal and never by more.
    sigma = fortress()
    d = signed_reversal_distance(sigma)
    near = [signed_reversal_distance(t) for t in reversal_neighbours(sigma)]
    assert min(near) == d - 1
    assert all(abs(x - d) <= 1 for x in near)


def test_fortress_greedy_path_reaches_identity_in_d_steps():
    sigma = fortress()
    d = signed_reversal_distance(sigma)
    steps = 0
    while signed_reversal_distance(sigma) > 0:
        cur = signed_reversal_distance(sigma)
        sigma = next(t for t in reversal_neighbours(sigma) if signed_reversal_distance(t) == cur - 1)
        steps += 1
    assert steps == d
    assert sigma == tuple(range(1, 22))


def test_single_block_hurdles_without_fortress():
    c, h, f = breakpoint_graph_summary(FORTRESS_BLOCK)
    assert f == 0
    assert signed_reversal_distance(FORTRESS_BLOCK) == brute_force_srd(FORTRESS_BLOCK)


@st.composite
def signed_perms(draw, min_n=9, max_n=40):
    n = draw(st.integers(min_n, max_n))
    p = draw(st.permutations(range(1, n + 1)))
    signs = draw(st.lists(st.sampled_from([-1, 1]), min_size=n, max_size=n))
    return tuple(s * g for s, g in zip(signs, p))


@settings(max_examples=40)
@given(signed_perms())
def test_metric_properties_beyond_oracle_range(sigma):
    d = signed_reversal_distance(sigma)
    assert 0 <= d <= len(sigma) + 1
    near = [signed_reversal_distance(t) for t in reversal_neighbours(sigma)]
    assert all(abs(x - d) <= 1 for x in near)
    if d > 0:
        assert min(near) == d - 1


@settings(max_examples=60)
@given(signed_perms(min_n=1, max_n=30))
def test_inverse_symmetry(sigma):
    inv = [0] * len(sigma)
    for i, x in enumerate(sigma, start=1):
        inv[abs(x) - 1] = i if x > 0 else -i
    assert signed_reversal_distance(tuple(inv)) == signed_reversal_distance(sigma)


def test_fitness_dispatch(rng):
    pi = (3, 1, 2)
    assert fitness(np.array([1, 1, 1], dtype=np.int8), pi) == signed_reversal_distance((3, 1, 2))
    assert fitness((-1, 1, -1), pi) == signed_reversal_distance((-3, 1, -2))
    assert fitness(np.array([0.2, 0.7, 0.1]), pi, rng) == signed_reversal_distance((-3, 1, -2))
