"""Moment-matrix relaxation of quantum correlations with canonical Nash constraints.

Each party has two binary measurements; only the answer-0 projector of each
is kept as a symbol, so a monomial is a word of (party, type) letters.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from . import solver
from .correlation import nash_functionals
from .errors import LevelTooLowError
from .game_model import GameSpec
from .quantum_sim import QuantumSolution

Letter = tuple[int, int]  # (party, type), 0-based party
Word = tuple[Letter, ...]

LEVELS = ("1", "intermediate")


def _level(level: Union[str, int]) -> str:
    level = str(level).lower()
    if level in ("one",):
        level = "1"
    if level not in LEVELS:
        raise ValueError(f"unsupported level {level!r}; choose from {LEVELS}")
    return level


def build_monomial_basis(n: int, level: Union[str, int] = "intermediate") -> list[Word]:
    """Identity plus single projectors (level 1) or all one-projector-per-party products."""
    level = _level(level)
    if level == "1":
        return [()] + [((i, t),) for i in range(n) for t in (0, 1)]
    out = []
    for choice in itertools.product((None, 0, 1), repeat=n):
        out.append(tuple((i, t) for i, t in enumerate(choice) if t is not None))
    out.sort(key=lambda w: (len(w), w))
    return out


def _reduce(word) -> Word:
    # parties commute: stable sort keeps each party's own order, then P P = P
    word = sorted(word, key=lambda x: x[0])
    out: list[Letter] = []
    for letter in word:
        if out and out[-1] == letter:
            continue
        out.append(letter)
    return tuple(out)


def canonical_moment(u: Word, v: Word) -> Word:
    """Canonical word of u^dagger v; a word and its adjoint share one representative."""
    w = _reduce(tuple(reversed(u)) + tuple(v))
    w_adj = _reduce(tuple(reversed(w)))
    return min(w, w_adj)


@dataclass
class NPAProblem:
    game: GameSpec
    level: str
    basis: list[Word]
    moment_index: dict  # canonical word -> variable id, identity -> solver.CONST
    conic: solver.ConicProblem
    prob_const: np.ndarray  # (len(inputs), 2**n)
    prob_map: np.ndarray  # (len(inputs) * 2**n, n_vars)
    with_nash: bool
    n_nash: int = 0
    n_matrix_moments: int = 0  # variables that are entries of the moment matrix
    extra_moments: list = field(default_factory=list)  # free moments outside the matrix

    def probabilities(self, x: np.ndarray) -> np.ndarray:
        return self.prob_const + (self.prob_map @ x).reshape(self.prob_const.shape)


def _prob_expansion(n: int, a: int, t: str) -> list[tuple[float, Word]]:
    """Inclusion-exclusion terms of P(a|t) over products of answer-0 projectors."""
    zeros = [i for i in range(n) if not (a >> (n - 1 - i)) & 1]
    ones = [i for i in range(n) if (a >> (n - 1 - i)) & 1]
    terms = []
    for k in range(len(ones) + 1):
        for S in itertools.combinations(ones, k):
            parties = sorted(zeros + list(S))
            terms.append(((-1.0) ** k, tuple((i, int(t[i])) for i in parties)))
    return terms


def moments_to_probabilities(problem: NPAProblem, allow_missing: bool = False):
    """Affine map moments -> P(a|t) as ``(const, matrix)`` over ``game.inputs``.

    Raises :class:`LevelTooLowError` when a needed moment is not an entry of
    the moment matrix, unless ``allow_missing`` (then the caller must have
    registered it in ``moment_index``).
    """
    game = problem.game
    n = game.n
    A = 2 ** n
    inputs = game.inputs
    const = np.zeros((len(inputs), A))
    M = np.zeros((len(inputs) * A, problem.conic.n_vars))
    for r, t in enumerate(inputs):
        for a in range(A):
            for sign, word in _prob_expansion(n, a, t):
                key = canonical_moment((), word)
                if key not in problem.moment_index:
                    raise LevelTooLowError(
                        f"moment {key} is not available at level {problem.level}")
                j = problem.moment_index[key]
                if j == solver.CONST:
                    const[r, a] += sign
                else:
                    M[r * A + a, j] += sign
    if not allow_missing and problem.extra_moments:
        missing = [w for w in problem.extra_moments]
        raise LevelTooLowError(f"{len(missing)} moments lie outside the moment matrix")
    return const, M


def build_npa_problem(game: GameSpec, level: Union[str, int] = "intermediate",
                      with_nash: bool = True) -> NPAProblem:
    level = _level(level)
    n = game.n
    basis = build_monomial_basis(n, level)
    entries: dict[Word, list[tuple[int, int]]] = {}
    for r, u in enumerate(basis):
        for c in range(r, len(basis)):
            entries.setdefault(canonical_moment(u, basis[c]), []).append((r, c))
    words = sorted(entries, key=lambda w: (len(w), w))
    index = {(): solver.CONST}
    for w in words:
        if w != ():
            index[w] = len(index) - 1
    n_matrix = len(index) - 1
    # moments needed for probabilities but absent from the matrix (level one)
    extra = []
    for t in game.inputs:
        for a in range(2 ** n):
            for _, word in _prob_expansion(n, a, t):
                key = canonical_moment((), word)
                if key not in index:
                    index[key] = len(index) - 1
                    extra.append(key)
    conic = solver.ConicProblem(len(index) - 1, sense="max")
    blk = conic.add_block("psd", len(basis))
    for w, pos in entries.items():
        rc = np.array(pos)
        conic.add_entries(blk, index[w], rc[:, 0], rc[:, 1], 1.0)
    problem = NPAProblem(game, level, basis, index, conic, np.zeros(0), np.zeros(0),
                         with_nash, n_matrix_moments=n_matrix, extra_moments=extra)
    const, M = moments_to_probabilities(problem, allow_missing=True)
    problem.prob_const, problem.prob_map = const, M
    A = 2 ** n
    Q = len(game.questions)
    w = game.welfare_weights.ravel()
    conic.objective[:] = w @ M[:Q * A]
    conic.offset = float(w @ const[:Q].ravel())
    rows = []
    if with_nash:
        _, K = nash_functionals(game)
        for Kd in K.reshape(len(K), -1):
            # gain = Kd . P <= 0
            rows.append((-(Kd @ M), -float(Kd @ const.ravel())))
        problem.n_nash = len(rows)
    if extra:
        # entries outside the matrix get no implied positivity; impose P >= 0 directly
        for k in range(len(M)):
            rows.append((M[k], float(const.ravel()[k])))
    if rows:
        nb = conic.add_block("nonneg", len(rows))
        for k, (coefs, c0) in enumerate(rows):
            conic.add_inequality(nb, k, coefs, c0)
    return problem


@dataclass
class NPAResult:
    value: float
    status: str
    problem: NPAProblem
    result: solver.SolverResult

    def probabilities(self) -> np.ndarray:
        return self.problem.probabilities(self.result.x)


def npa_upper_bound(game: GameSpec, level: Union[str, int] = "intermediate",
                    with_nash: bool = True, tol: float = 1e-8) -> NPAResult:
    """Upper bound on the welfare of quantum-correlated equilibria (or of all quantum
    correlations when ``with_nash`` is false)."""
    problem = build_npa_problem(game, level, with_nash)
    res = solver.solve(problem.conic, tol=tol)
    if res.status == solver.INFEASIBLE:
        raise solver.SolverError("moment relaxation reported infeasible; the uniform table "
                                 "is always feasible, so this is a numerical anomaly", res)
    if not res.optimal:
        raise solver.SolverError(f"moment relaxation ended with status {res.status}", res)
    return NPAResult(float(res.value), res.status, problem, res)


def word_operator(solution: QuantumSolution, word: Word) -> np.ndarray:
    """Operator of a word of answer-0 projectors (party-local products tensored)."""
    dims = solution.state.dims
    per_party = [np.eye(d, dtype=complex) for d in dims]
    for party, t in word:
        per_party[party] = per_party[party] @ solution.povms.ops[party][t, 0]
    out = per_party[0]
    for op in per_party[1:]:
        out = np.kron(out, op)
    return out


def solution_moments(problem: NPAProblem, solution: QuantumSolution) -> np.ndarray:
    """Real parts of every registered moment evaluated on an explicit solution."""
    rho = solution.state.rho
    x = np.zeros(problem.conic.n_vars)
    for w, j in problem.moment_index.items():
        if j != solver.CONST:
            x[j] = np.trace(rho @ word_operator(solution, w)).real
    return x


def export_sdpa(problem: NPAProblem, path) -> None:
    solver.write_sdpa(problem.conic, path)
