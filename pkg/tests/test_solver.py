import numpy as np
import pytest

from qgames import solver
from qgames.solver import CONST, ConicProblem, solve, solve_lp_highs


def _box_lp(rng, n=8, m=20):
    A = rng.normal(size=(m, n))
    x0 = rng.normal(size=n)
    h = A @ x0 + rng.uniform(0.1, 1, size=m)
    p = ConicProblem(n, "max")
    p.objective = rng.normal(size=n)
    blk = p.add_block("nonneg", m + 2 * n)
    for i in range(m):
        p.add_inequality(blk, i, -A[i], h[i])
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        p.add_inequality(blk, m + 2 * i, -e, 10.0)
        p.add_inequality(blk, m + 2 * i + 1, e, 10.0)
    p.add_equality(np.ones(n), x0.sum())
    return p


def test_max_x_with_upper_bound():
    p = ConicProblem(1)
    p.objective[:] = 1.0
    b = p.add_block("psd", 1)
    p.add_entries(b, 0, 0, 0, 1.0)
    lin = p.add_block("nonneg", 1)
    p.add_inequality(lin, 0, {0: -1.0}, 1.0)
    res = solve(p)
    assert res.status == solver.OPTIMAL
    assert res.value == pytest.approx(1.0, abs=1e-7)


def test_contradictory_bounds_infeasible():
    p = ConicProblem(1)
    p.objective[:] = 1.0
    lin = p.add_block("nonneg", 2)
    p.add_inequality(lin, 0, {0: 1.0}, -2.0)
    p.add_inequality(lin, 1, {0: -1.0}, 1.0)
    assert solve(p).status == solver.INFEASIBLE


def test_unbounded():
    p = ConicProblem(1)
    p.objective[:] = 1.0
    b = p.add_block("psd", 1)
    p.add_entries(b, 0, 0, 0, 1.0)
    assert solve(p).status == solver.UNBOUNDED


def test_inconsistent_equalities_infeasible():
    p = ConicProblem(2)
    p.add_block("nonneg", 1)
    p.add_equality(np.array([1.0, 1.0]), 1.0)
    p.add_equality(np.array([1.0, 1.0]), 2.0)
    assert solve(p).status == solver.INFEASIBLE


@pytest.mark.parametrize("seed", range(5))
def test_lp_matches_highs_and_diagonal_sdp(seed):
    p = _box_lp(np.random.default_rng(seed))
    r1, r2, r3 = solve(p), solve_lp_highs(p), solve(p.as_diagonal_sdp())
    assert r1.optimal and r2.optimal and r3.optimal
    assert r1.value == pytest.approx(r2.value, abs=1e-7)
    assert r3.value == pytest.approx(r2.value, abs=1e-7)


def test_optimal_result_residuals_recomputed():
    p = _box_lp(np.random.default_rng(11))
    res = solve(p)
    again = p.residuals(res.x)
    assert again["cone"] <= 1e-8 and again["equality"] <= 1e-8
    assert res.gap <= 1e-7 * (1 + abs(res.value))


def test_min_eigenvalue_sdp(rng):
    # max y s.t. C - y I >= 0 has value lambda_min(C)
    s = 7
    B = rng.normal(size=(s, s))
    C = B + B.T
    p = ConicProblem(1)
    p.objective[:] = 1.0
    blk = p.add_block("psd", s)
    iu = np.triu_indices(s)
    p.add_entries(blk, CONST, iu[0], iu[1], C[iu])
    p.add_entries(blk, 0, np.arange(s), np.arange(s), -1.0)
    res = solve(p)
    assert res.optimal
    assert res.value == pytest.approx(np.linalg.eigvalsh(C)[0], abs=1e-7)


@pytest.mark.parametrize("seed", range(3))
def test_random_sdp_matches_clarabel(seed):
    cp = pytest.importorskip("cvxpy")
    rng = np.random.default_rng(100 + seed)
    s, m = 6, 5
    As = [(lambda B: B + B.T)(rng.normal(size=(s, s))) for _ in range(m)]
    C = 3 * np.eye(s)
    b = rng.normal(size=m)
    p = ConicProblem(m)
    p.objective = b
    blk = p.add_block("psd", s)
    iu = np.triu_indices(s)
    p.add_entries(blk, CONST, iu[0], iu[1], C[iu])
    for k in range(m):
        p.add_entries(blk, k, iu[0], iu[1], -As[k][iu])
    res = solve(p)
    y = cp.Variable(m)
    ref = cp.Problem(cp.Maximize(b @ y), [C - sum(y[k] * As[k] for k in range(m)) >> 0])
    ref.solve(solver="CLARABEL")
    assert res.optimal
    assert res.value == pytest.approx(ref.value, abs=1e-6)


def test_validation_errors():
    p = ConicProblem(2)
    with pytest.raises(solver.ValidationError):
        p.add_block("cone", 3)
    b = p.add_block("nonneg", 2)
    with pytest.raises(solver.ValidationError):
        p.add_entries(b, 5, 0, 0, 1.0)
    with pytest.raises(solver.ValidationError):
        p.add_entries(b, 0, 0, 1, 1.0)
    with pytest.raises(solver.ValidationError):
        ConicProblem(1, sense="maximise")


def test_sdpa_round_trip(tmp_path, rng):
    s = 4
    p = ConicProblem(3, "max")
    p.objective = rng.normal(size=3)
    p.offset = 0.25
    blk = p.add_block("psd", s)
    iu = np.triu_indices(s)
    p.add_entries(blk, CONST, iu[0], iu[1], np.eye(s)[iu])
    for k in range(3):
        B = rng.normal(size=(s, s))
        p.add_entries(blk, k, iu[0], iu[1], (B + B.T)[iu])
    lin = p.add_block("nonneg", 2)
    p.add_inequality(lin, 0, {0: 1.0, 1: -1.0}, 2.0)
    p.add_inequality(lin, 1, {2: -1.0}, 1.0)
    path = tmp_path / "p.dat-s"
    solver.write_sdpa(p, path)
    q = solver.read_sdpa(path)
    assert q.sense == "max" and q.offset == 0.25
    for k in range(2):
        assert np.allclose(q.block_matrix(k).toarray(), p.block_matrix(k).toarray())
    assert solve(q).value == pytest.approx(solve(p).value, abs=1e-7)
