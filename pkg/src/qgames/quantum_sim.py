"""Qubit states, two-outcome measurements per player, Born statistics and payoff operators.

Tensor factor order follows the player order: player 1 is the leftmost
(most significant) factor, matching the bit-string conventions of the
game tables.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .correlation import ConditionalDistribution
from .errors import DimensionError, NormalizationError, SchemaError, UnsupportedFamilyError
from .game_model import CYCLE_EDGES, GameFamily, GameSpec

PSD_TOL = 1e-9
POVM_TOL = 1e-9

_LETTERS = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"


@dataclass(frozen=True, eq=False)
class QuantumState:
    """Density operator on ``len(dims)`` subsystems."""

    rho: np.ndarray
    dims: tuple[int, ...]

    def __post_init__(self):
        rho = np.asarray(self.rho, dtype=complex)
        dims = tuple(int(d) for d in self.dims)
        D = int(np.prod(dims))
        if rho.shape != (D, D):
            raise DimensionError(f"state of shape {rho.shape} does not match dims {dims}")
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "dims", dims)

    @classmethod
    def from_vector(cls, psi, dims) -> "QuantumState":
        psi = np.asarray(psi, dtype=complex).ravel()
        return cls(np.outer(psi, psi.conj()), dims)

    @property
    def n(self) -> int:
        return len(self.dims)

    def validate(self, tol: float = PSD_TOL) -> None:
        rho = self.rho
        if np.abs(rho - rho.conj().T).max() > tol:
            raise NormalizationError("state is not Hermitian")
        if abs(np.trace(rho) - 1.0) > tol:
            raise NormalizationError(f"state trace is {np.trace(rho).real:.6g}")
        low = np.linalg.eigvalsh((rho + rho.conj().T) / 2).min()
        if low < -tol:
            raise NormalizationError(f"state has negative eigenvalue {low:.3g}")

    def to_json(self) -> dict:
        return {"dims": list(self.dims), "rho": _cplx_to_json(self.rho)}

    @classmethod
    def from_json(cls, data: dict) -> "QuantumState":
        try:
            return cls(_cplx_from_json(data["rho"]), tuple(data["dims"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"bad state JSON: {exc!r}") from None


@dataclass(frozen=True, eq=False)
class POVMSet:
    """``ops[i][t, a]`` is player i's effect for answer ``a`` given type ``t``."""

    ops: tuple[np.ndarray, ...]

    def __post_init__(self):
        ops = tuple(np.asarray(o, dtype=complex) for o in self.ops)
        for i, o in enumerate(ops):
            if o.ndim != 4 or o.shape[:2] != (2, 2) or o.shape[2] != o.shape[3]:
                raise DimensionError(f"player {i + 1}: effects must have shape (2, 2, d, d)")
        object.__setattr__(self, "ops", ops)

    @classmethod
    def from_effects(cls, zero_effects) -> "POVMSet":
        """Build two-outcome measurements from the answer-0 effects ``N[i][t]``."""
        ops = []
        for N in zero_effects:
            N = np.asarray(N, dtype=complex)
            eye = np.eye(N.shape[-1])
            ops.append(np.stack([np.stack([N[t], eye - N[t]]) for t in range(2)]))
        return cls(tuple(ops))

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(o.shape[-1] for o in self.ops)

    def validate(self, tol: float = POVM_TOL) -> None:
        for i, o in enumerate(self.ops):
            eye = np.eye(o.shape[-1])
            for t in range(2):
                if np.abs(o[t].sum(axis=0) - eye).max() > tol:
                    raise NormalizationError(f"player {i + 1}, type {t}: effects do not sum to I")
                for a in range(2):
                    E = o[t, a]
                    if np.abs(E - E.conj().T).max() > tol:
                        raise NormalizationError(f"player {i + 1}: effect not Hermitian")
                    if np.linalg.eigvalsh((E + E.conj().T) / 2).min() < -tol:
                        raise NormalizationError(f"player {i + 1}: effect not positive")

    def to_json(self) -> dict:
        return {"ops": [_cplx_to_json(o) for o in self.ops]}

    @classmethod
    def from_json(cls, data: dict) -> "POVMSet":
        try:
            return cls(tuple(_cplx_from_json(o) for o in data["ops"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"bad measurement JSON: {exc!r}") from None


@dataclass(frozen=True, eq=False)
class QuantumSolution:
    state: QuantumState
    povms: POVMSet

    def __post_init__(self):
        if self.state.dims != self.povms.dims:
            raise DimensionError(f"state dims {self.state.dims} do not match "
                                 f"measurement dims {self.povms.dims}")

    @property
    def n(self) -> int:
        return self.state.n

    def validate(self) -> None:
        self.state.validate()
        self.povms.validate()

    def to_json(self) -> dict:
        return {"state": self.state.to_json(), "povms": self.povms.to_json()}

    @classmethod
    def from_json(cls, data: dict | str) -> "QuantumSolution":
        if isinstance(data, str):
            data = json.loads(data)
        try:
            return cls(QuantumState.from_json(data["state"]), POVMSet.from_json(data["povms"]))
        except KeyError as exc:
            raise SchemaError(f"bad solution JSON: missing {exc}") from None


def _cplx_to_json(a: np.ndarray):
    return np.stack([a.real, a.imag], axis=-1).tolist()


def _cplx_from_json(data) -> np.ndarray:
    arr = np.asarray(data, dtype=float)
    if arr.shape[-1] != 2:
        raise ValueError("complex arrays are stored as trailing [re, im] pairs")
    return arr[..., 0] + 1j * arr[..., 1]


# ---------------------------------------------------------------------------
# contractions
# ---------------------------------------------------------------------------

def _rho_tensor(state: QuantumState) -> np.ndarray:
    return state.rho.reshape(state.dims + state.dims)


def born_distribution(solution: QuantumSolution, game_or_inputs) -> ConditionalDistribution:
    """P(a|t) = tr[rho (x)_i N^i_{a_i|t_i}].

    Given a game, rows cover every input bit-string (questions first) so the
    result can be fed straight to the canonical deviation check; otherwise
    rows follow the given input list.
    """
    n = solution.n
    if isinstance(game_or_inputs, GameSpec):
        if game_or_inputs.n != n:
            raise DimensionError(f"game has {game_or_inputs.n} players, solution has {n}")
        inputs = game_or_inputs.inputs
    else:
        inputs = game_or_inputs
    R = _rho_tensor(solution.state)
    # per player, effects indexed by 2*t + a, contracted in one pass
    rows_l = _LETTERS[:n]
    cols_l = _LETTERS[n:2 * n]
    outs_l = _LETTERS[2 * n:3 * n]
    subs = ",".join(f"{outs_l[i]}{cols_l[i]}{rows_l[i]}" for i in range(n))
    expr = f"{rows_l}{cols_l},{subs}->{outs_l}"
    ops = [o.reshape(4, o.shape[-1], o.shape[-1]) for o in solution.povms.ops]
    full = np.einsum(expr, R, *ops, optimize="greedy").real  # (4,)*n
    inputs = tuple(inputs)
    for t in inputs:
        if len(t) != n:
            raise DimensionError(f"input {t!r} does not have {n} bits")
    table = np.zeros((len(inputs), 2 ** n))
    for k, t in enumerate(inputs):
        sel = tuple(slice(2 * int(c), 2 * int(c) + 2) for c in t)
        table[k] = full[sel].ravel()
    return ConditionalDistribution(n, inputs, table)


def player_payoff(game: GameSpec, solution: QuantumSolution, player: int) -> float:
    P = born_distribution(solution, game.questions)
    return float(np.sum(game.utility[player] * game.prior_array[:, None] * P.table))


def quantum_welfare(game: GameSpec, solution: QuantumSolution) -> float:
    P = born_distribution(solution, game.questions)
    return float(np.sum(game.welfare_weights * P.table))


# ---------------------------------------------------------------------------
# named solutions
# ---------------------------------------------------------------------------

def graph_vector(n: int, edges) -> np.ndarray:
    """Amplitudes (-1)^{sum_edges a_u a_v} / sqrt(2^n); edges use 1-based players."""
    bits = (np.arange(2 ** n)[:, None] >> (n - 1 - np.arange(n))[None, :]) & 1
    phase = np.zeros(2 ** n, dtype=int)
    for u, v in edges:
        if not (1 <= u <= n and 1 <= v <= n) or u == v:
            raise ValueError(f"invalid edge {(u, v)} for {n} players")
        phase += bits[:, u - 1] * bits[:, v - 1]
    return ((-1.0) ** phase) / np.sqrt(2 ** n)


def graph_state(n: int, edges) -> QuantumState:
    """CZ along every edge applied to |+>^n."""
    return QuantumState.from_vector(graph_vector(n, edges), (2,) * n)


_Z_BASIS = np.array([np.diag([1.0, 0.0]), np.diag([0.0, 1.0])], dtype=complex)
_X_BASIS = np.array([[[0.5, 0.5], [0.5, 0.5]], [[0.5, -0.5], [-0.5, 0.5]]], dtype=complex)


def _family(game_or_family):
    if isinstance(game_or_family, GameSpec):
        try:
            return GameFamily(game_or_family.name)
        except ValueError:
            raise UnsupportedFamilyError(f"no named solution for game {game_or_family.name!r}") from None
    try:
        return GameFamily(game_or_family)
    except ValueError:
        raise UnsupportedFamilyError(f"no named solution for {game_or_family!r}") from None


def pseudo_telepathic_solution(game_or_family) -> QuantumSolution:
    """Cycle graph state; type 0 measures Z, type 1 measures X (outcome 0 is |+>)."""
    fam = _family(game_or_family)
    n = 3 if fam is GameFamily.NC_C3 else 5
    psi = graph_vector(n, CYCLE_EDGES[fam])
    ops = tuple(np.stack([_Z_BASIS, _X_BASIS]) for _ in range(n))
    return QuantumSolution(QuantumState.from_vector(psi, (2,) * n), POVMSet(ops))


def deviated_solution(theta: float) -> QuantumSolution:
    """Three-qubit family: CZ on every triangle edge applied to |psi_theta>^3.

    Type 0 measures in the computational basis; type 1 measures
    {|psi_theta>, |psi_theta^perp>} with outcome 0 on |psi_theta>.
    """
    n = 3
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    single = np.array([c, s])
    psi = single
    for _ in range(n - 1):
        psi = np.kron(psi, single)
    psi = psi * graph_vector(n, CYCLE_EDGES[GameFamily.NC_C3]) * np.sqrt(2 ** n)
    perp = np.array([-s, c])
    tilted = np.stack([np.outer(single, single), np.outer(perp, perp)])
    ops = tuple(np.stack([_Z_BASIS, tilted]).astype(complex) for _ in range(n))
    return QuantumSolution(QuantumState.from_vector(psi, (2,) * n), POVMSet(ops))


def pwin_table(game: GameSpec, solution: QuantumSolution) -> np.ndarray:
    """p[i, a_i, t_i]: winning probability given player i holds type t_i and answers a_i.

    Cells whose conditioning event has probability below 1e-12 are NaN.
    """
    P = born_distribution(solution, game.questions).table
    return conditional_win_table(game, P)


def conditional_win_table(game: GameSpec, P: np.ndarray) -> np.ndarray:
    n = game.n
    joint = game.prior_array[:, None] * np.clip(P, 0.0, None)  # (|T|, 2**n)
    out = np.full((n, 2, 2), np.nan)
    bits = game.answer_bits
    for i in range(n):
        for t_i in (0, 1):
            qs = np.array([int(t[i]) == t_i for t in game.questions])
            for a_i in (0, 1):
                cell = joint[qs][:, bits[:, i] == a_i]
                mass = cell.sum()
                if mass >= 1e-12:
                    out[i, a_i, t_i] = (cell * game.win[qs][:, bits[:, i] == a_i]).sum() / mass
    return out


@dataclass
class DevReport:
    is_equilibrium: bool
    margin: float  # smallest slack p v_a - (1 - p) v_{1-a} over defined cells
    pwin: np.ndarray  # (n, 2, 2) indexed [player, a_i, t_i]
    undefined_cells: list[tuple[int, int, int]]


def check_dev_equilibrium(game: GameSpec, theta: float, tol: float | None = None) -> DevReport:
    """Cell-wise test that following the advice beats flipping it, for the deviated family.

    A cell (a_i, t_i) passes when (1 - p) v_{1-a_i} <= p v_{a_i}, i.e. the
    ratio form (1 - p)/p <= v_{a_i}/v_{1-a_i} without dividing by p.
    """
    if game.n != 3:
        raise UnsupportedFamilyError("the deviated family is defined for three players")
    tol = 1e-7 * game.vmax if tol is None else tol
    p = pwin_table(game, deviated_solution(theta))
    v = (game.v0, game.v1)
    margin = np.inf
    undefined = []
    for i in range(game.n):
        for a in (0, 1):
            for t in (0, 1):
                if np.isnan(p[i, a, t]):
                    undefined.append((i, a, t))
                    continue
                margin = min(margin, p[i, a, t] * v[a] - (1 - p[i, a, t]) * v[1 - a])
    return DevReport(bool(margin >= -tol), float(margin), p, undefined)


# ---------------------------------------------------------------------------
# random instances
# ---------------------------------------------------------------------------

def random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    Z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    Q, R = np.linalg.qr(Z)
    ph = np.diag(R) / np.abs(np.diag(R))
    return Q * ph[None, :]


def random_pure_state(dims, rng: np.random.Generator) -> QuantumState:
    D = int(np.prod(dims))
    v = rng.standard_normal(D) + 1j * rng.standard_normal(D)
    return QuantumState.from_vector(v / np.linalg.norm(v), dims)


def random_projective_povms(n: int, rng: np.random.Generator, d: int = 2) -> POVMSet:
    ops = []
    for _ in range(n):
        per_type = []
        for _t in range(2):
            U = random_unitary(d, rng)
            k = int(rng.integers(0, d + 1)) if d > 2 else 1
            P0 = U[:, :k] @ U[:, :k].conj().T
            per_type.append(np.stack([P0, np.eye(d) - P0]))
        ops.append(np.stack(per_type))
    return POVMSet(tuple(ops))


def random_quantum_solution(n: int, rng: np.random.Generator, d: int = 2) -> QuantumSolution:
    return QuantumSolution(random_pure_state((d,) * n, rng), random_projective_povms(n, rng, d))
