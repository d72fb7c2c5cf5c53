import numpy as np
import pytest
from hypothesis import given, strategies as st

from qgames.correlation import (MU_MAPS, ConditionalDistribution, MixedSolution, PureSolution,
                                canonicalize, check_canonical_nash, check_membership_local,
                                check_nonsignalling, deterministic_distribution,
                                induce_distribution, local_distance, nash_functionals,
                                uniform_distribution)
from qgames.errors import NormalizationError, SchemaError
from qgames.game_model import GameFamily, bitstrings, build_game
from qgames.quantum_sim import (born_distribution, deviated_solution, pseudo_telepathic_solution,
                                random_quantum_solution)

IDF = np.tile(np.arange(2), (3, 1))
IDG = np.tile(np.arange(2)[None, :], (3, 2, 1))


def random_dist(rng, n, inputs=None):
    inputs = tuple(inputs) if inputs is not None else tuple(bitstrings(n))
    t = rng.random((len(inputs), 2 ** n))
    return ConditionalDistribution(n, inputs, t / t.sum(axis=1, keepdims=True))


def brute_force_gains(game, P):
    """Gain of every canonical deviation straight from the defining sums."""
    n = game.n
    out = {}
    for i in range(n):
        for t_i in (0, 1):
            for r_i in (0, 1):
                for name, mu in MU_MAPS.items():
                    honest = dev = 0.0
                    for k, t in enumerate(game.questions):
                        if int(t[i]) != t_i:
                            continue
                        src = t[:i] + str(r_i) + t[i + 1:]
                        for a in game.answers:
                            u = game.utility[i, k, int(a, 2)] * game.prior[k]
                            honest += u * P.value(a, t)
                            a_dev = a[:i] + str(mu[int(a[i])]) + a[i + 1:]
                            dev += game.utility[i, k, int(a_dev, 2)] * game.prior[k] * P.value(a, src)
                    out[(i, t_i, r_i, name)] = dev - honest
    return out


def test_identity_solution_returns_correlation(rng):
    C = random_dist(rng, 3)
    P = induce_distribution(PureSolution(IDF, IDG, C))
    assert np.allclose(P.table, C.table, atol=1e-15)


def test_flipping_outputs_of_constant_advice():
    C = deterministic_distribution(3, [(0, 0)] * 3)
    flip = 1 - IDG
    P = induce_distribution(PureSolution(IDF, flip, C))
    assert np.all(P.table[:, 7] == 1.0)


def test_mixture_is_mean_of_pure_inductions(rng):
    C = random_dist(rng, 3)
    f1, g1 = IDF, IDG
    f2 = 1 - IDF
    g2 = np.tile(np.array([[1, 0], [0, 0]])[None], (3, 1, 1))
    P1 = induce_distribution(PureSolution(f1, g1, C)).table
    # player 1 randomises between the two strategies, the others between identical copies
    pi = (np.array([0.5, 0.5]),) + (np.array([1.0]),) * 2
    f = (np.stack([f1[0], f2[0]], axis=1), f1[1][:, None], f1[2][:, None])
    g = (np.stack([g1[0], g2[0]], axis=-1), g1[1][..., None], g1[2][..., None])
    Pm = induce_distribution(MixedSolution(pi, f, g, C)).table
    f_alt = f1.copy()
    f_alt[0] = f2[0]
    g_alt = g1.copy()
    g_alt[0] = g2[0]
    P_alt = induce_distribution(PureSolution(f_alt, g_alt, C)).table
    assert np.allclose(Pm, 0.5 * (P1 + P_alt), atol=1e-15)


def test_canonicalize_fixed_point_and_identity_maps(rng):
    C = random_dist(rng, 3)
    can = canonicalize(PureSolution(IDF, IDG, C))
    assert np.array_equal(can.f, IDF) and np.array_equal(can.g, IDG)
    assert np.allclose(can.C.table, C.table)


def test_canonical_deviated_correlation_wraps_born_table():
    g = build_game("NC_C3", 0.5, 1.5)
    C = born_distribution(deviated_solution(1.7), g)
    can = canonicalize(PureSolution(IDF, IDG, C))
    assert np.allclose(can.C.table, C.table, atol=1e-15)


@given(st.integers(0, 2 ** 32 - 1))
def test_canonicalize_preserves_induced_distribution(seed):
    rng = np.random.default_rng(seed)
    C = random_dist(rng, 3)
    f = rng.integers(0, 2, (3, 2))
    g = rng.integers(0, 2, (3, 2, 2))
    sol = PureSolution(f, g, C)
    a = induce_distribution(sol).table
    b = induce_distribution(canonicalize(sol)).table
    assert np.abs(a - b).max() <= 1e-12


@pytest.mark.parametrize("v0,v1", [(1, 1), (0.5, 1.5), (1.9, 0.1), (0.05, 1.95)])
def test_pt_distribution_is_equilibrium(v0, v1):
    g = build_game("NC_C3", v0, v1)
    P = born_distribution(pseudo_telepathic_solution("NC_C3"), g)
    rep = check_canonical_nash(g, P)
    assert rep.is_equilibrium and rep.skipped == 0


def test_deviated_witness_point_is_equilibrium():
    g = build_game("NC_C3", 0.5, 1.5)
    assert check_canonical_nash(g, born_distribution(deviated_solution(1.7), g)).is_equilibrium


@pytest.mark.parametrize("v0", [0.1, 1.0, 3.0])
def test_always_one_is_not_equilibrium(v0):
    g = build_game("NC_C3", v0, 1.0)
    rep = check_canonical_nash(g, deterministic_distribution(3, [(1, 1)] * 3))
    assert not rep.is_equilibrium
    # answering 0 on type 0 wins 010 and 001: gain 2 v0 / 4
    assert rep.worst_violation == pytest.approx(v0 / 2, abs=1e-14)
    assert rep.witness.t_i == 0 and MU_MAPS[rep.witness.mu][1] == 0


def test_nash_functionals_row_count_c3():
    devs, K = nash_functionals(build_game("NC_C3", 1, 1))
    assert len(devs) == 42 <= 48
    assert K.shape == (42, 8, 8)


@pytest.mark.parametrize("family", list(GameFamily))
def test_functionals_match_brute_force(family, rng):
    g = build_game(family, 0.7, 1.3)
    P = random_dist(rng, g.n, g.inputs)
    devs, K = nash_functionals(g)
    ref = brute_force_gains(g, P)
    gains = np.einsum("dra,ra->d", K, P.table)
    for d, gain in zip(devs, gains):
        assert gain == pytest.approx(ref[(d.player, d.t_i, d.r_i, d.mu)], abs=1e-12)


@given(st.integers(0, 2 ** 32 - 1), st.floats(0.1, 3), st.floats(0.1, 3), st.floats(0.2, 5))
def test_verdict_and_witness_scale_free(seed, v0, v1, c):
    rng = np.random.default_rng(seed)
    g = build_game("NC_C3", v0, v1)
    P = random_dist(rng, 3, g.inputs)
    a = check_canonical_nash(g, P)
    b = check_canonical_nash(g.with_payoffs(c * v0, c * v1), P)
    assert a.is_equilibrium == b.is_equilibrium
    assert a.witness == b.witness
    assert b.worst_violation == pytest.approx(c * a.worst_violation, rel=1e-9, abs=1e-15)


def test_rows_outside_questions_are_skipped_when_missing():
    g = build_game("NC_C3", 1, 1)
    full = born_distribution(pseudo_telepathic_solution("NC_C3"), g)
    only_q = ConditionalDistribution(3, g.questions, full.table[:4])
    rep = check_canonical_nash(g, only_q)
    assert rep.skipped > 0
    assert rep.is_equilibrium


def test_unnormalised_input_rejected():
    g = build_game("NC_C3", 1, 1)
    with pytest.raises(NormalizationError):
        check_canonical_nash(g, ConditionalDistribution(3, g.inputs, np.full((8, 8), 0.3)))


def test_product_distribution_nonsignalling(rng):
    n = 3
    marg = [rng.dirichlet(np.ones(2), size=2) for _ in range(n)]  # marg[i][r_i] over s_i
    inputs = bitstrings(n)
    table = np.zeros((8, 8))
    for k, r in enumerate(inputs):
        for a in range(8):
            bits = [(a >> (n - 1 - i)) & 1 for i in range(n)]
            table[k, a] = np.prod([marg[i][int(r[i])][bits[i]] for i in range(n)])
    ok, worst = check_nonsignalling(ConditionalDistribution(n, inputs, table))
    assert ok and worst <= 1e-15


def test_signalling_table_detected():
    # party 1 outputs r_2; others output 0
    inputs = bitstrings(3)
    table = np.zeros((8, 8))
    for k, r in enumerate(inputs):
        table[k, int(r[1] + "00", 2)] = 1.0
    ok, worst = check_nonsignalling(ConditionalDistribution(3, inputs, table))
    assert not ok and worst == pytest.approx(1.0)


def test_born_distributions_nonsignalling():
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(2, 4))
        d = int(rng.integers(2, 4))
        sol = random_quantum_solution(n, rng, d)
        _, w = check_nonsignalling(born_distribution(sol, bitstrings(n)))
        worst = max(worst, w)
    assert worst <= 1e-9


def test_vertex_is_local():
    assert check_membership_local(deterministic_distribution(3, [(0, 1), (1, 1), (1, 0)]))


def test_uniform_is_local():
    assert check_membership_local(uniform_distribution(3))


def test_pt_distribution_not_local():
    g = build_game("NC_C3", 1, 1)
    P = born_distribution(pseudo_telepathic_solution("NC_C3"), g)
    assert not check_membership_local(P)
    # the best local strategy wins 3 of 4 questions, so the distance is bounded away from 0
    assert local_distance(P) > 1e-3


def test_local_implies_nonsignalling(rng):
    from qgames.correlation import local_vertices
    V = local_vertices(3, bitstrings(3))
    for _ in range(10):
        w = rng.dirichlet(np.ones(len(V)) * 0.1)
        P = ConditionalDistribution(3, tuple(bitstrings(3)), np.einsum("v,vra->ra", w, V))
        assert check_membership_local(P)
        assert check_nonsignalling(P)[0]


def test_json_round_trip(rng):
    P = random_dist(rng, 3)
    Q = ConditionalDistribution.from_json(P.to_json())
    assert Q.inputs == P.inputs and np.array_equal(Q.table, P.table)
    with pytest.raises(SchemaError):
        ConditionalDistribution.from_json({"n": 3, "questions": ["000"], "table": [[1.0]]})


def test_tiny_negatives_clamped():
    t = np.eye(8)
    t[0, 1] = -1e-13
    P = ConditionalDistribution(3, tuple(bitstrings(3)), t)
    assert P.value("001", "000") == 0.0
