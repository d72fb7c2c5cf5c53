"""Conditional distributions, solutions that induce them, and equilibrium tests."""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import solver
from .errors import NormalizationError, SchemaError
from .game_model import GameSpec, bitstrings

NEG_TOL = 1e-12
NORM_TOL = 1e-9

# deterministic output maps A_i -> A_i as (image of 0, image of 1)
MU_MAPS = {"id": (0, 1), "not": (1, 0), "0": (0, 0), "1": (1, 1)}


@dataclass(frozen=True, eq=False)
class ConditionalDistribution:
    """Table C(s|r): one row per input bit-string, answers in lexicographic order."""

    n: int
    inputs: tuple[str, ...]
    table: np.ndarray

    def __post_init__(self):
        table = np.asarray(self.table, dtype=float)
        if table.shape != (len(self.inputs), 2 ** self.n):
            raise SchemaError(f"table shape {table.shape} does not match "
                              f"{len(self.inputs)} inputs x {2 ** self.n} answers")
        for r in self.inputs:
            if len(r) != self.n or set(r) - {"0", "1"}:
                raise SchemaError(f"input {r!r} is not a bit-string of length {self.n}")
        object.__setattr__(self, "inputs", tuple(self.inputs))
        object.__setattr__(self, "table", table)
        object.__setattr__(self, "_index", {r: k for k, r in enumerate(self.inputs)})

    def __contains__(self, r: str) -> bool:
        return r in self._index

    def index(self, r: str) -> int:
        return self._index[r]

    def normalization_error(self) -> float:
        err = np.abs(self.table.sum(axis=1) - 1.0).max(initial=0.0)
        return max(float(err), float(-self.table.min(initial=0.0)) - NEG_TOL)

    def validate(self, tol: float = NORM_TOL) -> None:
        if self.table.min(initial=0.0) < -max(NEG_TOL, tol):
            raise NormalizationError(f"negative probability {self.table.min():.3g}")
        err = np.abs(self.table.sum(axis=1) - 1.0).max(initial=0.0)
        if err > tol:
            raise NormalizationError(f"rows not normalised (max deviation {err:.3g})")

    def rows(self, inputs, tol: float | None = NORM_TOL) -> np.ndarray:
        """Rows for ``inputs`` with tiny negatives clamped to zero."""
        if tol is not None:
            self.validate(tol)
        try:
            idx = [self._index[r] for r in inputs]
        except KeyError as exc:
            raise KeyError(f"distribution has no row for input {exc.args[0]!r}") from None
        return np.clip(self.table[idx], 0.0, None)

    def value(self, s: str, r: str) -> float:
        return float(max(self.table[self._index[r], int(s, 2)], 0.0))

    def to_json(self) -> dict:
        return {"n": self.n, "questions": list(self.inputs), "answers_order": "lexicographic",
                "table": self.table.tolist()}

    @classmethod
    def from_json(cls, data: dict | str) -> "ConditionalDistribution":
        if isinstance(data, str):
            data = json.loads(data)
        try:
            if data.get("answers_order", "lexicographic") != "lexicographic":
                raise SchemaError("only lexicographic answer order is supported")
            return cls(int(data["n"]), tuple(data["questions"]), np.asarray(data["table"], dtype=float))
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, SchemaError):
                raise
            raise SchemaError(f"bad distribution JSON: {exc!r}") from None


def uniform_distribution(n: int, inputs=None) -> ConditionalDistribution:
    inputs = tuple(inputs) if inputs is not None else tuple(bitstrings(n))
    return ConditionalDistribution(n, inputs, np.full((len(inputs), 2 ** n), 2.0 ** -n))


def deterministic_distribution(n: int, maps, inputs=None) -> ConditionalDistribution:
    """Point-mass table where player i answers ``maps[i][t_i]``."""
    inputs = tuple(inputs) if inputs is not None else tuple(bitstrings(n))
    table = np.zeros((len(inputs), 2 ** n))
    for k, t in enumerate(inputs):
        a = "".join(str(maps[i][int(t[i])]) for i in range(n))
        table[k, int(a, 2)] = 1.0
    return ConditionalDistribution(n, inputs, table)


# ---------------------------------------------------------------------------
# solutions
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PureSolution:
    """f[i][t_i] -> r_i, g[i][t_i][s_i] -> a_i, shared correlation C."""

    f: np.ndarray  # (n, 2)
    g: np.ndarray  # (n, 2, 2)
    C: ConditionalDistribution

    def __post_init__(self):
        object.__setattr__(self, "f", np.asarray(self.f, dtype=int))
        object.__setattr__(self, "g", np.asarray(self.g, dtype=int))
        n = self.C.n
        if self.f.shape != (n, 2) or self.g.shape != (n, 2, 2):
            raise SchemaError("strategy maps must be total on binary types and advice")


@dataclass(frozen=True, eq=False)
class MixedSolution:
    """Per-player latent distributions pi[i] over Lambda_i; f[i][t, l], g[i][t, s, l]."""

    pi: tuple[np.ndarray, ...]
    f: tuple[np.ndarray, ...]
    g: tuple[np.ndarray, ...]
    C: ConditionalDistribution

    def __post_init__(self):
        pi = tuple(np.asarray(p, dtype=float) for p in self.pi)
        f = tuple(np.asarray(x, dtype=int) for x in self.f)
        g = tuple(np.asarray(x, dtype=int) for x in self.g)
        n = self.C.n
        if not (len(pi) == len(f) == len(g) == n):
            raise SchemaError("one latent distribution and map pair per player")
        for p, fi, gi in zip(pi, f, g):
            if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
                raise NormalizationError("latent distribution not normalised")
            if fi.shape != (2, len(p)) or gi.shape != (2, 2, len(p)):
                raise SchemaError("maps must be total on types, advice and latent values")
        object.__setattr__(self, "pi", pi)
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "g", g)


def _as_mixed(sol) -> MixedSolution:
    if isinstance(sol, MixedSolution):
        return sol
    n = sol.C.n
    return MixedSolution(tuple(np.ones(1) for _ in range(n)),
                         tuple(sol.f[i][:, None] for i in range(n)),
                         tuple(sol.g[i][:, :, None] for i in range(n)), sol.C)


def induce_distribution(solution, inputs=None) -> ConditionalDistribution:
    """P(a|t) = sum_{l,s} C(s|f(t,l)) pi(l) [g(t,s,l) = a] for every ``t`` in ``inputs``.

    ``inputs`` defaults to the input list of the shared correlation.
    """
    sol = _as_mixed(solution)
    C = sol.C
    n = C.n
    inputs = tuple(inputs) if inputs is not None else C.inputs
    bits = (np.arange(2 ** n)[:, None] >> (n - 1 - np.arange(n))[None, :]) & 1
    weights = (2 ** (n - 1 - np.arange(n)))
    table = np.zeros((len(inputs), 2 ** n))
    lat_ranges = [range(len(p)) for p in sol.pi]
    for lam in itertools.product(*lat_ranges):
        w = np.prod([sol.pi[i][lam[i]] for i in range(n)])
        if w == 0.0:
            continue
        for k, t in enumerate(inputs):
            tb = [int(c) for c in t]
            r = "".join(str(sol.f[i][tb[i], lam[i]]) for i in range(n))
            if r not in C:
                raise ValueError(f"correlation has no row for mediator input {r!r}")
            row = np.clip(C.table[C.index(r)], 0.0, None)
            out_bits = np.stack([sol.g[i][tb[i], bits[:, i], lam[i]] for i in range(n)], axis=1)
            np.add.at(table[k], out_bits @ weights, w * row)
    return ConditionalDistribution(n, inputs, table)


def canonicalize(solution, inputs=None) -> PureSolution:
    """(id_T, id_A, P) with P the distribution induced by ``solution``."""
    P = induce_distribution(solution, inputs)
    n = P.n
    f = np.tile(np.arange(2), (n, 1))
    g = np.tile(np.arange(2)[None, :], (n, 2, 1))
    return PureSolution(f, g, P)


# ---------------------------------------------------------------------------
# canonical Nash conditions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Deviation:
    player: int  # 0-based
    t_i: int
    r_i: int
    mu: str  # key of MU_MAPS

    def describe(self) -> str:
        return f"player {self.player + 1}, type {self.t_i}, sends {self.r_i}, outputs {self.mu}"


@dataclass
class NashReport:
    is_equilibrium: bool
    worst_violation: float
    witness: Deviation | None
    tolerance: float
    skipped: int = 0  # deviations whose mediator input has no row

    def to_json(self) -> dict:
        w = self.witness
        return {"is_equilibrium": self.is_equilibrium, "worst_violation": self.worst_violation,
                "tolerance": self.tolerance, "skipped": self.skipped,
                "witness": None if w is None else
                {"player": w.player + 1, "t_i": w.t_i, "r_i": w.r_i, "mu": w.mu}}


def default_tolerance(game: GameSpec) -> float:
    return 1e-7 * game.vmax


@lru_cache(maxsize=64)
def nash_functionals(game: GameSpec) -> tuple[tuple[Deviation, ...], np.ndarray]:
    """Linear functionals of P for every unilateral canonical deviation.

    Returns ``(deviations, K)`` with ``K`` of shape (n_dev, 2**n inputs in
    ``game.inputs`` order, 2**n answers) such that ``sum(K[d] * P)`` is the
    deviator's payoff gain.  Rows with r_i = t_i and the identity output map
    are omitted (gain is identically zero).
    """
    n = game.n
    A = 2 ** n
    inputs = game.inputs
    in_idx = {r: k for k, r in enumerate(inputs)}
    bits = game.answer_bits
    devs, rows = [], []
    for i in range(n):
        shift = n - 1 - i
        for t_i in (0, 1):
            qs = [k for k, t in enumerate(game.questions) if int(t[i]) == t_i]
            for r_i in (0, 1):
                for name, mu in MU_MAPS.items():
                    if r_i == t_i and name == "id":
                        continue
                    K = np.zeros((len(inputs), A))
                    mapped = np.array([mu[b] for b in bits[:, i]])
                    a_dev = (np.arange(A) & ~(1 << shift)) | (mapped << shift)
                    for k in qs:
                        t = game.questions[k]
                        pr = game.prior_array[k]
                        u = game.utility[i, k]
                        K[in_idx[t]] -= pr * u
                        src = t[:i] + str(r_i) + t[i + 1:]
                        K[in_idx[src]] += pr * u[a_dev]
                    devs.append(Deviation(i, t_i, r_i, name))
                    rows.append(K)
    K = np.stack(rows) if rows else np.zeros((0, len(inputs), A))
    K.setflags(write=False)
    return tuple(devs), K


def check_canonical_nash(game: GameSpec, dist: ConditionalDistribution,
                         tol: float | None = None) -> NashReport:
    """Exhaustive unilateral-deviation test of the canonical solution (id, id, dist).

    Deviations whose mediator input is absent from ``dist`` are skipped and
    counted in ``NashReport.skipped``.
    """
    tol = default_tolerance(game) if tol is None else tol
    dist.validate()
    devs, K = nash_functionals(game)
    P = np.zeros((len(game.inputs), 2 ** game.n))
    present = np.zeros(len(game.inputs), dtype=bool)
    for k, r in enumerate(game.inputs):
        if r in dist:
            P[k] = np.clip(dist.table[dist.index(r)], 0.0, None)
            present[k] = True
    if not present[:len(game.questions)].all():
        missing = [q for q, ok in zip(game.questions, present) if not ok]
        raise KeyError(f"distribution has no row for question(s) {missing}")
    usable = ~np.any(np.abs(K[:, ~present, :]) > 0, axis=(1, 2))
    gains = np.einsum("dra,ra->d", K, P)
    gains = np.where(usable, gains, -np.inf)
    if not usable.any():
        return NashReport(True, -np.inf, None, tol, skipped=len(devs))
    j = int(np.argmax(gains))
    worst = float(gains[j])
    return NashReport(worst <= tol, worst, devs[j], tol, skipped=int((~usable).sum()))


# ---------------------------------------------------------------------------
# correlation families
# ---------------------------------------------------------------------------

def check_nonsignalling(dist: ConditionalDistribution, tol: float = 1e-9) -> tuple[bool, float]:
    """Marginal-equality test over every split I | J of the parties.

    For each subset I, the marginal on s_I must not depend on r_J.  Only
    pairs of inputs present in the table are compared.
    """
    n = dist.n
    T = dist.table.reshape((len(dist.inputs),) + (2,) * n)
    worst = 0.0
    for size in range(1, n):
        for I in itertools.combinations(range(n), size):
            J = tuple(j for j in range(n) if j not in I)
            marg = T.sum(axis=tuple(1 + j for j in J))
            groups: dict[str, list[int]] = {}
            for k, r in enumerate(dist.inputs):
                groups.setdefault("".join(r[i] for i in I), []).append(k)
            for ks in groups.values():
                if len(ks) > 1:
                    block = marg[ks]
                    worst = max(worst, float(np.abs(block - block[0]).max()))
    return worst <= tol, worst


def local_vertices(n: int, inputs) -> np.ndarray:
    """(4**n, len(inputs), 2**n) point-mass tables of deterministic local maps."""
    maps = list(itertools.product(range(4), repeat=n))  # map code m -> (m>>1 on 0, m&1 on 1)
    out = np.zeros((len(maps), len(inputs), 2 ** n))
    for v, code in enumerate(maps):
        for k, r in enumerate(inputs):
            a = 0
            for i in range(n):
                m = code[i]
                bit = (m >> 1) & 1 if r[i] == "0" else m & 1
                a = (a << 1) | bit
            out[v, k, a] = 1.0
    return out


def local_distance(dist: ConditionalDistribution) -> float:
    """Smallest max-norm distance from ``dist`` to the local polytope (an LP)."""
    n = dist.n
    V = local_vertices(n, dist.inputs).reshape(4 ** n, -1).T  # (rows*answers, 4**n)
    P = dist.table.ravel()
    nv = V.shape[1]
    prob = solver.ConicProblem(nv + 1, sense="min")
    prob.objective[nv] = 1.0
    eps = nv
    blk = prob.add_block("nonneg", nv + 2 * len(P))
    idx = np.arange(nv)
    prob.add_entries(blk, idx, idx, idx, 1.0)
    rows, cols = np.nonzero(V)
    base = nv
    # eps - (P - Vq) >= 0 and eps + (P - Vq) >= 0
    prob.add_entries(blk, cols, base + rows, base + rows, 1.0)
    prob.add_entries(blk, eps, base + np.arange(len(P)), base + np.arange(len(P)), 1.0)
    prob.add_entries(blk, solver.CONST, base + np.arange(len(P)), base + np.arange(len(P)), -P)
    base2 = nv + len(P)
    prob.add_entries(blk, cols, base2 + rows, base2 + rows, -1.0)
    prob.add_entries(blk, eps, base2 + np.arange(len(P)), base2 + np.arange(len(P)), 1.0)
    prob.add_entries(blk, solver.CONST, base2 + np.arange(len(P)), base2 + np.arange(len(P)), P)
    ones = np.zeros(nv + 1)
    ones[:nv] = 1.0
    prob.add_equality(ones, 1.0)
    res = solver.solve(prob)
    if not res.optimal:
        raise solver.SolverError(f"local membership LP ended with status {res.status}", res)
    return max(float(res.value), 0.0)


def check_membership_local(dist: ConditionalDistribution, tol: float = 1e-7) -> bool:
    return local_distance(dist) <= tol
