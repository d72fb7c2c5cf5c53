import numpy as np
import pytest

from qgames.correlation import check_canonical_nash
from qgames.equilibrium import best_response, payoff_operators
from qgames.game_model import CustomFamily, build_game, game_at_ratio
from qgames.npa import npa_upper_bound
from qgames.quantum_sim import (QuantumSolution, born_distribution, graph_state,
                                pseudo_telepathic_solution, quantum_welfare)
from qgames.game_model import CYCLE_EDGES, GameFamily
from qgames.seesaw import (SeesawConfig, povm_step, random_solution, seesaw_optimize, state_step,
                           welfare_operator, welfare_run, with_player_effects)


def test_identity_welfare_operator_is_degenerate(rng):
    # one question that every answer wins with equal payoffs: W = I
    g = build_game(CustomFamily(3, ("000",), (("000", "000", 0),)), 1, 1)
    sol = random_solution(g, 2, 1)
    assert np.allclose(welfare_operator(g, sol.povms), np.eye(8))
    a, va = state_step(g, sol.povms)
    b, vb = state_step(g, sol.povms)
    assert va == pytest.approx(1.0) and np.array_equal(a.rho, b.rho)


def test_state_step_recovers_graph_state():
    g = build_game("NC_C3", 1, 1)
    pt = pseudo_telepathic_solution("NC_C3")
    state, value = state_step(g, pt.povms)
    assert value == pytest.approx(1.0, abs=1e-12)
    ref = graph_state(3, CYCLE_EDGES[GameFamily.NC_C3])
    assert np.allclose(state.rho, ref.rho, atol=1e-10)
    w = np.linalg.eigvalsh(welfare_operator(g, pt.povms))
    assert w[-1] - w[-2] > 1e-3


@pytest.mark.filterwarnings("ignore:Solution may be inaccurate")
def test_state_step_matches_sdp_oracle():
    cp = pytest.importorskip("cvxpy")
    g = game_at_ratio("NC_C3", 0.3)
    sol = random_solution(g, 2, 5)
    W = welfare_operator(g, sol.povms)
    rho = cp.Variable((8, 8), hermitian=True)
    ref = cp.Problem(cp.Maximize(cp.real(cp.trace(rho @ W))), [rho >> 0, cp.trace(rho) == 1])
    ref.solve(solver="CLARABEL")
    _, value = state_step(g, sol.povms)
    assert value == pytest.approx(ref.value, abs=1e-6)


def test_state_step_never_worse(rng):
    g = game_at_ratio("NC01_C5", 0.3)
    for s in range(5):
        sol = random_solution(g, 2, s)
        state, value = state_step(g, sol.povms)
        assert value >= quantum_welfare(g, sol) - 1e-12
        assert quantum_welfare(g, QuantumSolution(state, sol.povms)) == pytest.approx(value, abs=1e-12)


def test_own_payoff_step_matches_best_response():
    g = game_at_ratio("NC_C3", 0.2)
    for s in range(10):
        sol = random_solution(g, 2, s)
        i = s % 3
        eff = povm_step(g, sol, i, "own_payoff")
        B = payoff_operators(g, sol, i)
        value, _ = best_response(g, sol, i, B)
        got = float(np.einsum("tacd,tadc->", eff, B).real)
        assert got == pytest.approx(value, abs=1e-6)


def test_welfare_step_keeps_pt_optimum():
    g = build_game("NC_C3", 1, 1)
    sol = pseudo_telepathic_solution("NC_C3")
    before = quantum_welfare(g, sol)
    for i in range(3):
        after = quantum_welfare(g, with_player_effects(sol, i, povm_step(g, sol, i, "welfare")))
        assert abs(after - before) <= 1e-8


def test_zero_payoff_game():
    g = build_game(CustomFamily(3, ("111",), (("111", "111", 0), ("111", "111", 1))), 1, 1)
    sol = random_solution(g, 2, 0)
    eff = povm_step(g, sol, 0, "welfare")
    assert quantum_welfare(g, with_player_effects(sol, 0, eff)) == 0.0


def test_welfare_step_never_decreases():
    g = game_at_ratio("NC_C3", 0.35)
    for s in range(10):
        sol = random_solution(g, 2, s)
        for i in range(3):
            new = with_player_effects(sol, i, povm_step(g, sol, i, "welfare"))
            assert quantum_welfare(g, new) >= quantum_welfare(g, sol) - 1e-12
            sol = new


def test_random_solution_deterministic_and_valid():
    g = build_game("NC_C3", 1, 1)
    a, b = random_solution(g, 2, 42), random_solution(g, 2, 42)
    a.validate()
    assert np.array_equal(a.state.rho, b.state.rho)
    for x, y in zip(a.povms.ops, b.povms.ops):
        assert np.array_equal(x, y)
    with pytest.raises(ValueError):
        random_solution(g, 1, 0)


def test_random_solution_seeds_differ():
    g = build_game("NC_C3", 1, 1)
    for s in range(20):
        a, b = random_solution(g, 2, 2 * s), random_solution(g, 2, 2 * s + 1)
        assert np.abs(a.state.rho - b.state.rho).max() > 1e-6


@pytest.mark.parametrize("family,ratio", [("NC_C3", 0.3), ("NC_C3", 0.7), ("NC00_C5", 0.4)])
def test_welfare_traces_monotone(family, ratio):
    g = game_at_ratio(family, ratio)
    for s in range(3):
        _, trace, _ = welfare_run(g, random_solution(g, 2, s), 200, 1e-9)
        assert np.all(np.diff(trace) >= -1e-9)


def test_welfare_mode_symmetric_point():
    res = seesaw_optimize(build_game("NC_C3", 1, 1), SeesawConfig(restarts=2))
    assert res.sw == pytest.approx(1.0, abs=1e-6)
    for run in res.runs:
        assert np.all(np.diff(run.trace) >= -1e-9)


@pytest.mark.parametrize("ratio", [0.2, 0.45])
def test_seesaw_below_unconstrained_npa(ratio):
    g = game_at_ratio("NC_C3", ratio)
    bound = npa_upper_bound(g, with_nash=False).value
    for mode in ("welfare", "q_refine"):
        res = seesaw_optimize(g, SeesawConfig(restarts=2, mode=mode, seed=3))
        assert res.sw <= bound + 1e-6


def test_q_refine_outputs_pass_canonical_check():
    g = game_at_ratio("NC_C3", 0.3)
    for s in range(15):
        res = seesaw_optimize(g, SeesawConfig(restarts=1, mode="q_refine", seed=s,
                                              pt_seed=False, classical_seed=False))
        if res.certified:
            assert res.quantum.is_equilibrium
            assert check_canonical_nash(g, born_distribution(res.solution, g)).is_equilibrium


def test_qcorr_refine_outputs_pass_canonical_check():
    g = game_at_ratio("NC_C3", 0.4)
    res = seesaw_optimize(g, SeesawConfig(restarts=2, mode="qcorr_refine", seed=1))
    assert res.certified
    assert check_canonical_nash(g, born_distribution(res.solution, g)).is_equilibrium
    assert res.nash.is_equilibrium


def test_q_refine_result_reports():
    g = game_at_ratio("NC_C3", 0.13)
    res = seesaw_optimize(g, SeesawConfig(restarts=2, mode="q_refine"))
    assert res.certified and res.quantum.is_equilibrium
    assert len(res.runs) == 3  # two restarts plus the classical seed
    js = res.to_json()
    assert js["mode"] == "q_refine" and len(js["runs"]) == 3


def test_config_validation():
    with pytest.raises(ValueError):
        SeesawConfig(restarts=0)
    with pytest.raises(ValueError):
        SeesawConfig(dim=1)
    with pytest.raises(ValueError):
        SeesawConfig(mode="greedy")
    with pytest.raises(ValueError):
        SeesawConfig(qcorr_schedule="sometimes")


def test_parallel_restarts_match_serial():
    g = game_at_ratio("NC_C3", 0.3)
    a = seesaw_optimize(g, SeesawConfig(restarts=3, seed=9, workers=1))
    b = seesaw_optimize(g, SeesawConfig(restarts=3, seed=9, workers=2))
    assert a.sw == b.sw and a.best_run == b.best_run
    assert [r.trace for r in a.runs] == [r.trace for r in b.runs]
