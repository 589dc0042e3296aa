import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rechepim.distance import brute_force_urd, signed_reversal_distance
from rechepim.engines import (
    DeParams,
    EngineKind,
    GaParams,
    Population,
    Problem,
    PsoParams,
    convert_genes,
    convert_population,
    de_step,
    double_point_crossover,
    engine_step,
    ga_step,
    gad_step,
    init_pso_state,
    one_point_crossover,
    pso_step,
    random_population,
    run_sequential,
)
from rechepim.perm import ContractError
from rechepim.params import SEQUENTIAL_PARAMS

GA_P = GaParams(0.9, 0.02, 60, 60)


def test_one_point_crossover_example():
    a = np.array([1, 1, 1, 1], dtype=np.int8)
    b = np.array([-1, -1, -1, -1], dtype=np.int8)
    c1, c2 = one_point_crossover(a, b, 1)
    assert c1.tolist() == [1, -1, -1, -1]
    assert c2.tolist() == [-1, 1, 1, 1]
    with pytest.raises(ContractError):
        one_point_crossover(a, b, 4)


def test_double_point_crossover_example():
    a = np.arange(1, 7)
    b = -np.arange(1, 7)
    c1, c2 = double_point_crossover(a, b, 2, 4)
    assert c1.tolist() == [1, 2, -3, -4, 5, 6]
    assert c2.tolist() == [-1, -2, 3, 4, -5, -6]
    with pytest.raises(ContractError):
        double_point_crossover(a, b, 3, 3)


@given(st.integers(2, 20), st.data())
def test_crossover_preserves_genes_per_position(n, data):
    a = np.array(data.draw(st.lists(st.sampled_from([-1, 1]), min_size=n, max_size=n)))
    b = np.array(data.draw(st.lists(st.sampled_from([-1, 1]), min_size=n, max_size=n)))
    cut = data.draw(st.integers(1, n - 1))
    c1, c2 = one_point_crossover(a, b, cut)
    assert sorted(zip(c1, c2)) == sorted(
        (x, y) if i < cut else (y, x) for i, (x, y) in enumerate(zip(a, b))
    )


def test_problem_memoises_but_counts():
    prob = Problem((3, 1, 2))
    s = np.array([1, 1, 1], dtype=np.int8)
    assert prob.evaluate_signs(s) == signed_reversal_distance((3, 1, 2))
    prob.evaluate_signs(s)
    assert prob.evaluations == 2
    assert len(prob._cache) == 1


def test_params_validation():
    with pytest.raises(ContractError):
        GaParams(1.5, 0.1, 50, 50)
    with pytest.raises(ContractError):
        GaParams(0.5, 0.1, 0, 50)
    with pytest.raises(ContractError):
        DeParams(0.5, -1)


def _pop(kind, m, perm, seed=0):
    prob = Problem(perm)
    rng = np.random.default_rng(seed)
    return random_population(EngineKind(kind).family, m, prob, rng), prob, rng


@pytest.mark.parametrize("step,params", [(ga_step, GA_P), (gad_step, SEQUENTIAL_PARAMS[EngineKind.GAD])])
def test_ga_steps_keep_shape_and_fitness(step, params):
    pop, prob, rng = _pop("GA", 11, (5, 2, 7, 1, 3, 8, 4, 6))
    for _ in range(20):
        pop = step(pop, params, prob, rng)
        assert pop.genes.shape == (11, 8) and pop.genes.dtype == np.int8
        assert set(np.unique(pop.genes)) <= {-1, 1}
        assert all(prob.evaluate_signs(g) == f for g, f in zip(pop.genes, pop.fitness))


def test_ga_never_loses_best():
    pop, prob, rng = _pop("GA", 10, (6, 3, 9, 1, 7, 2, 8, 4, 10, 5))
    best = pop.fitness.min()
    for _ in range(30):
        pop = ga_step(pop, GaParams(1.0, 0.5, 100, 100), prob, rng)
        assert pop.fitness.min() <= best
        best = pop.fitness.min()


def test_ga_single_individual():
    pop, prob, rng = _pop("GA", 1, (2, 1, 3))
    for _ in range(10):
        f0 = pop.fitness[0]
        pop = ga_step(pop, GA_P, prob, rng)
        assert pop.fitness[0] <= f0


def test_de_is_elitist_and_needs_four():
    pop, prob, rng = _pop("DE", 8, (4, 1, 6, 2, 7, 3, 5))
    prev = np.sort(pop.fitness)
    for _ in range(15):
        pop = de_step(pop, DeParams(0.7, 0.5), prob, rng)
        cur = np.sort(pop.fitness)
        # sorted fitness never gets worse position by position
        assert np.all(cur <= prev)
        prev = cur
    small, prob, rng = _pop("DE", 3, (2, 1, 3))
    with pytest.raises(ContractError):
        de_step(small, DeParams(0.7, 0.5), prob, rng)


def test_pso_schedule():
    pop, prob, rng = _pop("PSO", 6, (3, 1, 4, 2, 5))
    state = init_pso_state(pop, max_it=10)
    prm = PsoParams()
    inertias = []
    for _ in range(10):
        c_sum = state.c_individual + state.c_global
        pop, state = pso_step(pop, state, prob, rng)
        inertias.append(state.inertia)
        assert prm.coef_min <= state.c_individual <= prm.coef_max
        assert prm.coef_min <= state.c_global <= prm.coef_max
        assert abs(state.c_individual + state.c_global - c_sum) <= 2 * prm.coef_step + 1e-12
        assert state.gbest_fit == min(state.gbest_fit, int(state.pbest_fit.min()))
    assert inertias[0] == pytest.approx(0.9)
    assert inertias[-1] == pytest.approx(0.9 - 0.5 * 0.9)
    assert all(a > b for a, b in zip(inertias, inertias[1:]))


def test_pso_state_copy_is_independent():
    pop, prob, rng = _pop("PSO", 5, (2, 3, 1))
    s0 = init_pso_state(pop, 5)
    snap = s0.copy()
    pso_step(pop, s0, prob, rng)
    assert np.array_equal(s0.velocity, snap.velocity)


def test_conversion_roundtrip():
    pop, prob, rng = _pop("GA", 7, (4, 2, 5, 1, 3))
    real = convert_population(pop, EngineKind.GA, EngineKind.PSO, prob, rng)
    assert set(np.unique(real.genes)) <= {0.25, 0.75}
    assert np.array_equal(real.fitness, pop.fitness)
    back = convert_population(real, EngineKind.DE, EngineKind.GAD, prob, rng)
    assert np.array_equal(back.genes, pop.genes)
    assert np.array_equal(back.fitness, pop.fitness)
    with pytest.raises(ContractError):
        convert_population(pop, EngineKind.DE, EngineKind.GA, prob, rng)


def test_conversion_reevaluates_out_of_range():
    prob = Problem((2, 1, 3))
    rng = np.random.default_rng(1)
    genes, fit = convert_genes(np.array([[1.7, -3.0, 0.9]]), [99], "real", "sign", prob, rng)
    assert fit[0] == prob.evaluate_signs(genes[0])


def test_engine_step_requires_pso_state():
    pop, prob, rng = _pop("PSO", 4, (2, 1))
    with pytest.raises(ContractError):
        engine_step(EngineKind.PSO, pop, PsoParams(), prob, rng)


@pytest.mark.parametrize("kind", list(EngineKind))
def test_each_engine_solves_tiny_instance(kind):
    prob = Problem((3, 1, 2))
    res = run_sequential(kind, SEQUENTIAL_PARAMS[kind], prob, 20, 30, np.random.default_rng(0))
    assert res.best_fitness == brute_force_urd((3, 1, 2))
    assert res.history[0] >= res.history[-1]
    assert all(a >= b for a, b in zip(res.history, res.history[1:]))


@settings(max_examples=15)
@given(st.permutations(range(1, 7)), st.sampled_from(list(EngineKind)), st.integers(0, 1000))
def test_sequential_never_beats_the_optimum(perm, kind, seed):
    res = run_sequential(kind, SEQUENTIAL_PARAMS[kind], Problem(perm), 8, 5, np.random.default_rng(seed))
    assert res.best_fitness >= brute_force_urd(tuple(perm))


def test_sequential_is_seed_deterministic():
    a = run_sequential("DE", SEQUENTIAL_PARAMS[EngineKind.DE], Problem((4, 2, 5, 1, 3)), 10, 10,
                       np.random.default_rng(5))
    b = run_sequential("DE", SEQUENTIAL_PARAMS[EngineKind.DE], Problem((4, 2, 5, 1, 3)), 10, 10,
                       np.random.default_rng(5))
    assert a.history == b.history
    assert np.array_equal(a.population.genes, b.population.genes)


def test_population_shape_check():
    with pytest.raises(ContractError):
        Population(np.zeros((3, 2)), np.zeros(4), "real")
