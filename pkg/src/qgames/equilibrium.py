"""Quantum-equilibrium verification: payoff operators and per-player best responses."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import solver
from .game_model import GameSpec
from .quantum_sim import _LETTERS, POVMSet, QuantumSolution, _rho_tensor, player_payoff

ZERO_EIG = 1e-10


def payoff_operators(game: GameSpec, solution: QuantumSolution, player: int) -> np.ndarray:
    """B[t_i, a_i] on player ``player``'s space.

    The player's expected payoff under effects N is
    sum_{t_i, a_i} tr(N[t_i, a_i] B[t_i, a_i]); the prior is folded in.
    """
    weights = game.utility[player] * game.prior_array[:, None]
    return linear_operators(game, solution, player, weights)


def linear_operators(game: GameSpec, solution: QuantumSolution, player: int,
                     weights: np.ndarray) -> np.ndarray:
    """Operators B[t_i, a_i] representing sum_{t in questions, a} weights[t, a] P(a|t)
    as a linear function of player ``player``'s effects, everything else fixed."""
    n = game.n
    if solution.n != n:
        raise solver.ValidationError(f"game has {n} players, solution has {solution.n}")
    i = player
    R = _rho_tensor(solution.state)
    d = solution.state.dims[i]
    B = np.zeros((2, 2, d, d), dtype=complex)
    for k, t in enumerate(game.questions):
        u = np.asarray(weights[k]).reshape((2,) * n)
        if not u.any():
            continue
        X = open_contraction(R, solution, i, t)
        u = np.moveaxis(u, i, 0)
        B[int(t[i])] += np.tensordot(u, X, axes=(list(range(1, n)), list(range(n - 1))))
    return (B + np.conj(np.swapaxes(B, -1, -2))) / 2


def open_contraction(R: np.ndarray, solution: QuantumSolution, player: int, t: str) -> np.ndarray:
    """X[a_{-i}..., r, c] with P(a|t) = tr(N_{a_i|t_i} X[a_{-i}]) for the given input ``t``."""
    n = solution.n
    i = player
    rows_l = _LETTERS[:n]
    cols_l = _LETTERS[n:2 * n]
    outs_l = _LETTERS[2 * n:3 * n]
    others = [j for j in range(n) if j != i]
    subs = ",".join(f"{outs_l[j]}{cols_l[j]}{rows_l[j]}" for j in others)
    # the player's own indices stay open, ordered so that P = tr(N X)
    expr = (f"{rows_l}{cols_l},{subs}->"
            + "".join(outs_l[j] for j in others) + rows_l[i] + cols_l[i])
    ops = [solution.povms.ops[j][int(t[j])] for j in others]
    return np.einsum(expr, R, *ops, optimize="greedy")


def _pairing(effects: np.ndarray, B: np.ndarray) -> float:
    # sum_{t,a} tr(N[t,a] B[t,a])
    return float(np.einsum("tacd,tadc->", effects, B).real)


def best_response(game: GameSpec, solution: QuantumSolution, player: int,
                  B: np.ndarray | None = None) -> tuple[float, np.ndarray]:
    """Spectral best response: for each type, project onto the nonnegative part of B0 - B1.

    Returns ``(value, effects)`` with ``effects`` of shape (2, 2, d, d).
    """
    if B is None:
        B = payoff_operators(game, solution, player)
    d = B.shape[-1]
    value = 0.0
    effects = np.zeros_like(B)
    for t in range(2):
        w, V = np.linalg.eigh(B[t, 0] - B[t, 1])
        keep = w > -ZERO_EIG
        N0 = V[:, keep] @ V[:, keep].conj().T
        effects[t, 0] = N0
        effects[t, 1] = np.eye(d) - N0
        value += float(np.trace(B[t, 1]).real + w[w > 0].sum())
    return value, effects


def _hermitian_basis(d: int) -> list[np.ndarray]:
    basis = []
    for r in range(d):
        E = np.zeros((d, d), dtype=complex)
        E[r, r] = 1.0
        basis.append(E)
    for r in range(d):
        for c in range(r + 1, d):
            E = np.zeros((d, d), dtype=complex)
            E[r, c] = E[c, r] = 1.0
            basis.append(E)
            E = np.zeros((d, d), dtype=complex)
            E[r, c], E[c, r] = -1j, 1j
            basis.append(E)
    return basis


def _embed(H: np.ndarray) -> np.ndarray:
    """Real symmetric embedding [[Re, -Im], [Im, Re]]; PSD iff H is."""
    return np.block([[H.real, -H.imag], [H.imag, H.real]])


def add_hermitian_psd(prob: solver.ConicProblem, var_offset: int, basis, constant=None,
                      sign: float = 1.0) -> int:
    """Add the block ``constant + sign * sum_k x_k basis_k`` (embedded) as a PSD block."""
    d = basis[0].shape[0]
    blk = prob.add_block("psd", 2 * d)
    for k, E in enumerate(basis):
        M = _embed(E) * sign
        r, c = np.nonzero(np.triu(M))
        prob.add_entries(blk, var_offset + k, r, c, M[r, c])
    if constant is not None:
        M = _embed(np.asarray(constant, dtype=complex))
        r, c = np.nonzero(np.triu(M))
        prob.add_entries(blk, solver.CONST, r, c, M[r, c])
    return blk


def best_response_sdp(game: GameSpec, solution: QuantumSolution, player: int,
                      B: np.ndarray | None = None, tol: float = 1e-9) -> tuple[float, np.ndarray]:
    """Same optimum as :func:`best_response`, solved as an SDP over the answer-0 effects."""
    if B is None:
        B = payoff_operators(game, solution, player)
    d = B.shape[-1]
    basis = _hermitian_basis(d)
    m = len(basis)
    prob = solver.ConicProblem(2 * m, sense="max")
    eye = np.eye(d)
    for t in range(2):
        D = B[t, 0] - B[t, 1]
        prob.objective[t * m:(t + 1) * m] = [np.trace(E @ D).real for E in basis]
        prob.offset += float(np.trace(B[t, 1]).real)
        add_hermitian_psd(prob, t * m, basis)
        add_hermitian_psd(prob, t * m, basis, constant=eye, sign=-1.0)
    res = solver.solve(prob, tol=tol)
    if not res.optimal:
        raise solver.SolverError(f"best-response SDP ended with status {res.status}", res)
    effects = np.zeros_like(B)
    for t in range(2):
        N0 = sum(x * E for x, E in zip(res.x[t * m:(t + 1) * m], basis))
        effects[t, 0] = N0
        effects[t, 1] = eye - N0
    return float(res.value), effects


@dataclass
class PlayerReport:
    honest: float
    best: float

    @property
    def improvement(self) -> float:
        return self.best - self.honest


@dataclass
class EquilibriumReport:
    players: list[PlayerReport]
    is_equilibrium: bool
    tolerance: float
    worst_player: int
    witness: np.ndarray  # best-response effects of the worst player

    @property
    def max_improvement(self) -> float:
        return max(p.improvement for p in self.players)

    def to_json(self) -> dict:
        return {"is_equilibrium": self.is_equilibrium, "tolerance": self.tolerance,
                "max_improvement": self.max_improvement,
                "worst_player": self.worst_player + 1,
                "players": [{"honest": p.honest, "best_response": p.best,
                             "improvement": p.improvement} for p in self.players]}


def check_quantum_equilibrium(game: GameSpec, solution: QuantumSolution,
                              tol: float = 1e-7) -> EquilibriumReport:
    """Equilibrium iff no player's best response improves by more than tol * max(v0, v1)."""
    reports, witnesses = [], []
    for i in range(game.n):
        B = payoff_operators(game, solution, i)
        honest = _pairing(solution.povms.ops[i], B)
        best, eff = best_response(game, solution, i, B)
        reports.append(PlayerReport(honest, best))
        witnesses.append(eff)
    worst = int(np.argmax([r.improvement for r in reports]))
    thresh = tol * game.vmax
    return EquilibriumReport(reports, reports[worst].improvement <= thresh, thresh, worst,
                             witnesses[worst])


def with_player_effects(solution: QuantumSolution, player: int, effects) -> QuantumSolution:
    ops = list(solution.povms.ops)
    ops[player] = np.asarray(effects, dtype=complex)
    return QuantumSolution(solution.state, POVMSet(tuple(ops)))


__all__ = ["payoff_operators", "best_response", "best_response_sdp", "check_quantum_equilibrium",
           "EquilibriumReport", "PlayerReport", "with_player_effects", "player_payoff",
           "linear_operators", "open_contraction"]
