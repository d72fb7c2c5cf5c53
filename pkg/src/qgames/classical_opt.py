"""Classical baselines: pure Nash enumeration and equilibrium LPs over advice families."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from . import solver
from .correlation import ConditionalDistribution, nash_functionals
from .game_model import GameSpec

# deterministic maps T_i -> A_i as (answer on type 0, answer on type 1)
MAP_NAMES = ("0", "1", "id", "not")
MAPS = {"0": (0, 0), "1": (1, 1), "id": (0, 1), "not": (1, 0)}


@dataclass(frozen=True)
class PureProfile:
    maps: tuple[str, ...]

    def answer(self, question: str) -> str:
        return "".join(str(MAPS[m][int(c)]) for m, c in zip(self.maps, question))

    def __str__(self) -> str:
        return "(" + ", ".join(self.maps) + ")"


@dataclass
class LPValueReport:
    value: float
    status: str
    optimizer: np.ndarray | None = None  # weights over profiles or flattened P table
    distribution: ConditionalDistribution | None = None
    active: dict = field(default_factory=dict)
    label: str = ""

    def to_json(self) -> dict:
        out = {"label": self.label, "value": self.value, "status": self.status,
               "active": self.active}
        if self.distribution is not None:
            out["distribution"] = self.distribution.to_json()
        return out


def all_profiles(n: int) -> list[PureProfile]:
    return [PureProfile(p) for p in itertools.product(MAP_NAMES, repeat=n)]


def profile_payoffs(game: GameSpec) -> np.ndarray:
    """U[profile, player]: expected payoff of every pure profile (profiles in ``all_profiles`` order)."""
    n = game.n
    ans = np.zeros((4 ** n, len(game.questions)), dtype=int)
    for p, prof in enumerate(itertools.product(range(4), repeat=n)):
        for k, t in enumerate(game.questions):
            a = 0
            for i in range(n):
                a = (a << 1) | MAPS[MAP_NAMES[prof[i]]][int(t[i])]
            ans[p, k] = a
    k_idx = np.arange(len(game.questions))
    # utility[i, k, a] gathered at a = ans[p, k]
    per_q = game.utility[:, k_idx[None, :], ans]  # (n, profiles, |T|)
    return np.einsum("ipk,k->pi", per_q, game.prior_array)


def _replace(p: int, i: int, m: int, n: int) -> int:
    shift = 2 * (n - 1 - i)
    return (p & ~(3 << shift)) | (m << shift)


def enumerate_pure_nash(game: GameSpec, tol: float = 1e-12) -> tuple[list[tuple[PureProfile, float]], float]:
    """All deterministic profiles no player can improve by switching map; and their best welfare."""
    n = game.n
    U = profile_payoffs(game)
    profiles = all_profiles(n)
    out = []
    for p in range(4 ** n):
        stable = True
        for i in range(n):
            cur = (p >> (2 * (n - 1 - i))) & 3
            for m in range(4):
                if m != cur and U[_replace(p, i, m, n), i] > U[p, i] + tol:
                    stable = False
                    break
            if not stable:
                break
        if stable:
            out.append((profiles[p], float(U[p].mean())))
    best = max((sw for _, sw in out), default=float("nan"))
    return out, best


def profile_distribution(game: GameSpec, weights) -> ConditionalDistribution:
    """P(a|t) over ``game.inputs`` induced by a mixture of pure profiles."""
    n = game.n
    inputs = game.inputs
    table = np.zeros((len(inputs), 2 ** n))
    for p, prof in enumerate(all_profiles(n)):
        w = weights[p]
        if w <= 0:
            continue
        for k, t in enumerate(inputs):
            table[k, int(prof.answer(t), 2)] += w
    return ConditionalDistribution(n, inputs, table)


def _solve_lp(prob: solver.ConicProblem, what: str, backend: str) -> solver.SolverResult:
    res = solver.solve_lp_highs(prob) if backend == "highs" else solver.solve(prob)
    if not res.optimal:
        raise solver.SolverError(f"{what} LP ended with status {res.status}", res)
    return res


def correlated_equilibrium_lp(game: GameSpec, backend: str = "ipm") -> LPValueReport:
    """Best welfare over correlated distributions on pure profiles obeying every recommendation.

    For each player i, recommended map m and alternative m', the expected
    gain of playing m' whenever m is recommended must be nonpositive.
    """
    n = game.n
    U = profile_payoffs(game)
    P = 4 ** n
    prob = solver.ConicProblem(P, sense="max")
    prob.objective[:] = U.mean(axis=1)
    rows = []
    for i in range(n):
        shift = 2 * (n - 1 - i)
        for m in range(4):
            sel = [p for p in range(P) if (p >> shift) & 3 == m]
            for m2 in range(4):
                if m2 == m:
                    continue
                row = np.zeros(P)
                for p in sel:
                    row[p] = U[p, i] - U[_replace(p, i, m2, n), i]
                rows.append(((i, MAP_NAMES[m], MAP_NAMES[m2]), row))
    blk = prob.add_block("nonneg", P + len(rows))
    idx = np.arange(P)
    prob.add_entries(blk, idx, idx, idx, 1.0)
    for k, (_, row) in enumerate(rows):
        prob.add_inequality(blk, P + k, row)
    prob.add_equality(np.ones(P), 1.0)
    res = _solve_lp(prob, "correlated-equilibrium", backend)
    q = np.clip(res.x, 0.0, None)
    q /= q.sum()
    slack = {f"player {i + 1}: {m}->{m2}": float(row @ q) for (i, m, m2), row in rows
             if abs(row @ q) <= 1e-7 and np.any(row[q > 1e-9])}
    return LPValueReport(float(res.value), res.status, q, profile_distribution(game, q),
                         active=slack, label="classical baseline (correlated-equilibrium LP)")


def _advice_lp(game: GameSpec, nonsignalling: bool, backend: str) -> LPValueReport:
    n = game.n
    A = 2 ** n
    R = len(game.inputs)
    nv = R * A
    prob = solver.ConicProblem(nv, sense="max")
    Q = len(game.questions)
    prob.objective[:Q * A] = game.welfare_weights.ravel()
    _, K = nash_functionals(game)
    K = K.reshape(len(K), nv)
    blk = prob.add_block("nonneg", nv + len(K))
    idx = np.arange(nv)
    prob.add_entries(blk, idx, idx, idx, 1.0)
    for d in range(len(K)):
        prob.add_inequality(blk, nv + d, -K[d])
    for r in range(R):
        row = np.zeros(nv)
        row[r * A:(r + 1) * A] = 1.0
        prob.add_equality(row, 1.0)
    if nonsignalling:
        in_idx = {t: k for k, t in enumerate(game.inputs)}
        bits = game.answer_bits
        for j in range(n):
            for t in game.inputs:
                if t[j] == "1":
                    continue
                t1 = t[:j] + "1" + t[j + 1:]
                r0, r1 = in_idx[t], in_idx[t1]
                for a in range(A):
                    if bits[a, j]:
                        continue
                    # marginal of the other players, summed over a_j
                    a1 = a | (1 << (n - 1 - j))
                    row = np.zeros(nv)
                    row[r0 * A + a] += 1.0
                    row[r0 * A + a1] += 1.0
                    row[r1 * A + a] -= 1.0
                    row[r1 * A + a1] -= 1.0
                    prob.add_equality(row, 0.0)
    res = _solve_lp(prob, "advice-equilibrium", backend)
    table = np.clip(res.x.reshape(R, A), 0.0, None)
    table /= table.sum(axis=1, keepdims=True)
    dist = ConditionalDistribution(n, game.inputs, table)
    label = "non-signalling equilibrium LP" if nonsignalling else "communication equilibrium LP"
    return LPValueReport(float(res.value), res.status, res.x, dist, label=label)


def nonsignalling_equilibrium_lp(game: GameSpec, backend: str = "ipm") -> LPValueReport:
    """Best welfare over non-signalling tables satisfying every canonical deviation constraint."""
    return _advice_lp(game, True, backend)


def communication_equilibrium_lp(game: GameSpec, backend: str = "ipm") -> LPValueReport:
    """As :func:`nonsignalling_equilibrium_lp` without the non-signalling equalities."""
    return _advice_lp(game, False, backend)
