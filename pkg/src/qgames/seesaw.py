"""See-saw lower bounds: alternate exact maximisations over the state and each player's POVMs.

Three modes:

* ``welfare``: unconstrained social-welfare ascent (state step is a top
  eigenvector, POVM step is a spectral projection).
* ``qcorr_refine``: after (or instead of) the welfare phase, every step is an
  SDP that also imposes the canonical deviation constraints on the induced
  table, made elastic with penalised slacks so an infeasible incumbent can
  still move.
* ``q_refine``: after the welfare phase, players best-respond with their own
  payoff as objective until the solution is a quantum equilibrium.
"""
from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from . import solver
from .classical_opt import MAPS, enumerate_pure_nash
from .correlation import NashReport, check_canonical_nash, nash_functionals
from .equilibrium import (EquilibriumReport, best_response, check_quantum_equilibrium,
                          linear_operators, open_contraction, with_player_effects)
from .game_model import GameFamily, GameSpec
from .quantum_sim import (POVMSet, QuantumSolution, QuantumState, _rho_tensor,
                          born_distribution, pseudo_telepathic_solution, quantum_welfare,
                          random_projective_povms, random_pure_state)

log = logging.getLogger(__name__)

MODES = ("welfare", "qcorr_refine", "q_refine")
SCHEDULES = ("after_welfare", "from_start")


@dataclass
class SeesawConfig:
    dim: int = 2
    restarts: int = 5
    max_iter: int = 500
    threshold: float = 1e-9
    mode: str = "welfare"
    seed: int = 0
    qcorr_schedule: str = "after_welfare"
    refine_max_iter: int = 100  # constrained sweeps (qcorr) or best-response sweeps (q)
    refine_threshold: float = 1e-8  # SW change that ends the constrained phase
    penalty: float = 100.0  # slack price, in units of max(v0, v1)
    tol: float = 1e-7  # equilibrium tolerance, relative to max(v0, v1)
    pt_seed: bool = True
    classical_seed: bool = True
    workers: int = 1

    def __post_init__(self):
        if self.restarts < 1:
            raise ValueError("restarts must be at least 1")
        if self.dim < 2:
            raise ValueError("local dimension must be at least 2")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.qcorr_schedule not in SCHEDULES:
            raise ValueError(f"qcorr_schedule must be one of {SCHEDULES}")


@dataclass
class RunRecord:
    label: str
    sw: float
    trace: list[float]
    capped: bool
    certified: bool
    error: str = ""


@dataclass
class SeesawResult:
    solution: QuantumSolution | None
    sw: float
    mode: str
    runs: list[RunRecord]
    nash: NashReport | None
    quantum: EquilibriumReport | None
    certified: bool  # the returned solution passes the check its mode targets
    best_run: int = -1

    @property
    def traces(self) -> list[list[float]]:
        return [r.trace for r in self.runs]

    def to_json(self) -> dict:
        return {"mode": self.mode, "sw": self.sw, "certified": self.certified,
                "best_run": self.best_run,
                "runs": [asdict(r) for r in self.runs],
                "nash": None if self.nash is None else self.nash.to_json(),
                "quantum": None if self.quantum is None else self.quantum.to_json(),
                "solution": None if self.solution is None else self.solution.to_json()}


# ---------------------------------------------------------------------------
# exact steps
# ---------------------------------------------------------------------------

def welfare_operator(game: GameSpec, povms: POVMSet) -> np.ndarray:
    """W with SW = tr(rho W) for the given measurements."""
    n = game.n
    dims = povms.dims
    D = int(np.prod(dims))
    W = np.zeros((D, D), dtype=complex)
    letters = "abcdefghijklmnopqrstuvwxyz"
    outs, rows, cols = letters[:n], letters[n:2 * n], letters[2 * n:3 * n]
    expr = outs + "," + ",".join(f"{outs[j]}{rows[j]}{cols[j]}" for j in range(n)) \
        + "->" + rows + cols
    for k, t in enumerate(game.questions):
        w = game.welfare_weights[k].reshape((2,) * n)
        if not w.any():
            continue
        ops = [povms.ops[j][int(t[j])] for j in range(n)]
        W += np.einsum(expr, w, *ops, optimize="greedy").reshape(D, D)
    return (W + W.conj().T) / 2


def _fix_phase(v: np.ndarray) -> np.ndarray:
    k = int(np.argmax(np.abs(v) > np.abs(v).max() - 1e-12))
    return v * (abs(v[k]) / v[k])


def state_step(game: GameSpec, povms: POVMSet) -> tuple[QuantumState, float]:
    """Top eigenvector of the welfare operator and its eigenvalue."""
    W = welfare_operator(game, povms)
    w, V = np.linalg.eigh(W)
    return QuantumState.from_vector(_fix_phase(V[:, -1]), povms.dims), float(w[-1])


def povm_step(game: GameSpec, sol: QuantumSolution, player: int,
              objective: str = "welfare") -> np.ndarray:
    """Optimal effects (2, 2, d, d) for one player, everything else fixed.

    The optimum over two-outcome POVMs of a linear objective is the
    projector onto the nonnegative eigenspace of B0 - B1, per type.
    """
    if objective == "welfare":
        B = linear_operators(game, sol, player, game.welfare_weights)
    elif objective == "own_payoff":
        B = linear_operators(game, sol, player,
                             game.utility[player] * game.prior_array[:, None])
    else:
        raise ValueError(f"unknown objective {objective!r}")
    return best_response(game, sol, player, B)[1]


# ---------------------------------------------------------------------------
# constrained (SDP) steps
# ---------------------------------------------------------------------------

def _herm_index(d: int):
    iu, ju = np.triu_indices(d, 1)
    return np.arange(d), iu, ju


def _herm_coeffs(X: np.ndarray) -> np.ndarray:
    """tr(E_k X) for the Hermitian basis of :func:`_herm_from_params`, last axis k."""
    d = X.shape[-1]
    di, iu, ju = _herm_index(d)
    diag = X[..., di, di]
    sym = X[..., iu, ju] + X[..., ju, iu]
    anti = 1j * (X[..., iu, ju] - X[..., ju, iu])
    out = np.concatenate([diag, np.stack([sym, anti], axis=-1).reshape(*X.shape[:-2], -1)],
                         axis=-1)
    return out.real


def _herm_from_params(x: np.ndarray, d: int) -> np.ndarray:
    di, iu, ju = _herm_index(d)
    H = np.zeros((d, d), dtype=complex)
    H[di, di] = x[:d]
    pairs = x[d:].reshape(-1, 2)
    # basis: E_sym has ones at (r,c),(c,r); E_anti has -i at (r,c), +i at (c,r)
    H[iu, ju] = pairs[:, 0] - 1j * pairs[:, 1]
    H[ju, iu] = pairs[:, 0] + 1j * pairs[:, 1]
    return H


def _add_herm_psd(prob: solver.ConicProblem, offset: int, d: int, constant=None,
                  sign: float = 1.0) -> None:
    """PSD block for constant + sign * H(x) through the real embedding [[Re, -Im], [Im, Re]]."""
    blk = prob.add_block("psd", 2 * d)
    di, iu, ju = _herm_index(d)
    var, r, c, v = [], [], [], []
    for k in range(d):
        var += [offset + k] * 2
        r += [k, d + k]
        c += [k, d + k]
        v += [sign, sign]
    for p, (a, b) in enumerate(zip(iu, ju)):
        ks = offset + d + 2 * p
        # real part 1 at (a,b): Re block entries
        var += [ks, ks]
        r += [a, d + a]
        c += [b, d + b]
        v += [sign, sign]
        # imaginary part of H[a,b] is -x, H[b,a] is +x; Im block sits bottom-left
        var += [ks + 1, ks + 1]
        r += [a, b]
        c += [d + b, d + a]
        v += [sign, -sign]
    prob.add_entries(blk, var, r, c, v)
    if constant is not None:
        C = np.asarray(constant, dtype=complex)
        M = np.block([[C.real, -C.imag], [C.imag, C.real]])
        rr, cc = np.nonzero(np.triu(M))
        prob.add_entries(blk, solver.CONST, rr, cc, M[rr, cc])


def _elastic_problem(game: GameSpec, P0: np.ndarray, L: np.ndarray, n_params: int,
                     penalty: float, margin: float) -> solver.ConicProblem:
    """max SW(P0 + L x) - penalty * sum(s)  s.t.  gain_d(P0 + L x) <= s_d - margin, s >= 0."""
    _, K = nash_functionals(game)
    K = K.reshape(len(K), -1)
    nd = len(K)
    A = 2 ** game.n
    QA = len(game.questions) * A
    w = game.welfare_weights.ravel()
    prob = solver.ConicProblem(n_params + nd, sense="max")
    prob.objective[:n_params] = w @ L[:QA]
    prob.objective[n_params:] = -penalty
    prob.offset = float(w @ P0[:QA])
    blk = prob.add_block("nonneg", 2 * nd)
    s_idx = n_params + np.arange(nd)
    prob.add_entries(blk, s_idx, np.arange(nd), np.arange(nd), 1.0)
    KL = K @ L
    KP = K @ P0
    for d in range(nd):
        coefs = np.zeros(n_params + nd)
        coefs[:n_params] = -KL[d]
        coefs[n_params + d] = 1.0
        prob.add_inequality(blk, nd + d, coefs, -KP[d] - margin)
    return prob


def _all_input_ops(game: GameSpec, povms: POVMSet) -> np.ndarray:
    """(len(inputs) * 2**n, D, D) product effects for every input and answer."""
    n = game.n
    out = []
    for t in game.inputs:
        per = [povms.ops[j][int(t[j])] for j in range(n)]
        for a in range(2 ** n):
            M = per[0][(a >> (n - 1)) & 1]
            for j in range(1, n):
                M = np.kron(M, per[j][(a >> (n - 1 - j)) & 1])
            out.append(M)
    return np.array(out)


def constrained_state_step(game: GameSpec, sol: QuantumSolution, penalty: float,
                           margin: float) -> QuantumSolution:
    """Best state (possibly mixed) under elastic canonical deviation constraints."""
    D = int(np.prod(sol.state.dims))
    Ops = _all_input_ops(game, sol.povms)
    L = _herm_coeffs(Ops)
    npar = D * D
    P0 = np.zeros(L.shape[0])
    prob = _elastic_problem(game, P0, L, npar, penalty, margin)
    _add_herm_psd(prob, 0, D)
    trace_row = np.zeros(prob.n_vars)
    trace_row[:D] = 1.0
    prob.add_equality(trace_row, 1.0)
    res = solver.solve(prob)
    if not res.optimal:
        raise solver.SolverError(f"state SDP ended with status {res.status}", res)
    rho = _herm_from_params(res.x[:npar], D)
    return QuantumSolution(QuantumState(rho, sol.state.dims), sol.povms)


def constrained_povm_step(game: GameSpec, sol: QuantumSolution, player: int, penalty: float,
                          margin: float) -> QuantumSolution:
    """Best effects for one player under elastic canonical deviation constraints."""
    n = game.n
    i = player
    d = sol.state.dims[i]
    R = _rho_tensor(sol.state)
    A = 2 ** n
    npar = d * d
    inputs = game.inputs
    P0 = np.zeros(len(inputs) * A)
    L = np.zeros((len(inputs) * A, 2 * npar))
    shift = n - 1 - i
    for r, t in enumerate(inputs):
        X = open_contraction(R, sol, i, t)  # (2,)*(n-1) + (d, d)
        X = X.reshape(-1, d, d)
        coef = _herm_coeffs(X)
        tr = np.trace(X, axis1=-2, axis2=-1).real
        ti = int(t[i])
        for m in range(A // 2):
            hi, lo = m >> shift, m & ((1 << shift) - 1)
            a0 = (hi << (shift + 1)) | lo
            a1 = a0 | (1 << shift)
            L[r * A + a0, ti * npar:(ti + 1) * npar] = coef[m]
            L[r * A + a1, ti * npar:(ti + 1) * npar] = -coef[m]
            P0[r * A + a1] = tr[m]
    prob = _elastic_problem(game, P0, L, 2 * npar, penalty, margin)
    eye = np.eye(d)
    for t in range(2):
        _add_herm_psd(prob, t * npar, d)
        _add_herm_psd(prob, t * npar, d, constant=eye, sign=-1.0)
    res = solver.solve(prob)
    if not res.optimal:
        raise solver.SolverError(f"POVM SDP ended with status {res.status}", res)
    eff = np.zeros((2, 2, d, d), dtype=complex)
    for t in range(2):
        N0 = _herm_from_params(res.x[t * npar:(t + 1) * npar], d)
        eff[t, 0] = N0
        eff[t, 1] = eye - N0
    return with_player_effects(sol, i, eff)


# ---------------------------------------------------------------------------
# runs
# ---------------------------------------------------------------------------

def random_solution(game: GameSpec, dim: int = 2, seed=0) -> QuantumSolution:
    """Random pure state and random projective measurements; reproducible from ``seed``."""
    if dim < 2:
        raise ValueError("local dimension must be at least 2")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    state = random_pure_state((dim,) * game.n, rng)
    return QuantumSolution(state, random_projective_povms(game.n, rng, dim))


def classical_solution(game: GameSpec, maps, dim: int = 2) -> QuantumSolution:
    """Deterministic profile embedded as |0...0> with trivial or computational effects."""
    n = game.n
    e0 = np.zeros(dim ** n)
    e0[0] = 1.0
    ops = []
    for m in maps:
        per_type = []
        for t in range(2):
            N0 = np.eye(dim) if MAPS[m][t] == 0 else np.zeros((dim, dim))
            per_type.append(np.stack([N0, np.eye(dim) - N0]))
        ops.append(np.stack(per_type))
    return QuantumSolution(QuantumState.from_vector(e0, (dim,) * n), POVMSet(tuple(ops)))


def _pt_seed(game: GameSpec, dim: int) -> QuantumSolution | None:
    try:
        GameFamily(game.name)
    except ValueError:
        return None
    if dim != 2:
        return None
    return pseudo_telepathic_solution(game)


def welfare_run(game: GameSpec, sol: QuantumSolution, max_iter: int, threshold: float):
    trace = [quantum_welfare(game, sol)]
    capped = True
    for _ in range(max_iter):
        state, _ = state_step(game, sol.povms)
        sol = QuantumSolution(state, sol.povms)
        for i in range(game.n):
            sol = with_player_effects(sol, i, povm_step(game, sol, i, "welfare"))
        trace.append(quantum_welfare(game, sol))
        if abs(trace[-1] - trace[-2]) < threshold:
            capped = False
            break
    return sol, trace, capped


def _max_gain(game: GameSpec, sol: QuantumSolution) -> float:
    _, K = nash_functionals(game)
    P = born_distribution(sol, game).table
    return float(np.einsum("dra,ra->d", K, P).max())


def qcorr_run(game: GameSpec, sol: QuantumSolution, cfg: SeesawConfig):
    trace = [quantum_welfare(game, sol)]
    pen = cfg.penalty * game.vmax
    margin = 0.1 * cfg.tol * game.vmax
    capped = True
    for _ in range(cfg.refine_max_iter):
        sol = constrained_state_step(game, sol, pen, margin)
        for i in range(game.n):
            sol = constrained_povm_step(game, sol, i, pen, margin)
        trace.append(quantum_welfare(game, sol))
        if abs(trace[-1] - trace[-2]) < cfg.refine_threshold and \
                _max_gain(game, sol) <= cfg.tol * game.vmax:
            capped = False
            break
    return sol, trace, capped


def q_run(game: GameSpec, sol: QuantumSolution, cfg: SeesawConfig):
    """Own-payoff best-response rounds on the fixed state until no player can improve.

    The state is not re-optimised here: a welfare state step after the
    players' responses would undo the equilibrium they are moving towards.
    """
    trace = [quantum_welfare(game, sol)]
    for _ in range(cfg.refine_max_iter):
        if check_quantum_equilibrium(game, sol, cfg.tol).is_equilibrium:
            return sol, trace, False
        for i in range(game.n):
            sol = with_player_effects(sol, i, povm_step(game, sol, i, "own_payoff"))
        trace.append(quantum_welfare(game, sol))
    return sol, trace, not check_quantum_equilibrium(game, sol, cfg.tol).is_equilibrium


def _certify(game: GameSpec, sol: QuantumSolution, mode: str, tol: float) -> bool:
    if mode == "qcorr_refine":
        return check_canonical_nash(game, born_distribution(sol, game), tol * game.vmax).is_equilibrium
    if mode == "q_refine":
        return check_quantum_equilibrium(game, sol, tol).is_equilibrium
    return True


def _one_run(args):
    game, cfg, label, sol = args
    try:
        trace: list[float] = []
        capped = False
        # the classical seed is already an equilibrium; ascending welfare first would lose that
        skip_welfare = label == "classical" or (
            cfg.mode == "qcorr_refine" and cfg.qcorr_schedule == "from_start")
        if not skip_welfare:
            sol, trace, capped = welfare_run(game, sol, cfg.max_iter, cfg.threshold)
        if cfg.mode == "qcorr_refine":
            sol, t2, capped = qcorr_run(game, sol, cfg)
            trace += t2[1:]
        elif cfg.mode == "q_refine":
            sol, t2, capped = q_run(game, sol, cfg)
            trace += t2[1:]
        sw = quantum_welfare(game, sol)
        return sol, RunRecord(label, sw, trace, capped, _certify(game, sol, cfg.mode, cfg.tol))
    except (solver.SolverError, np.linalg.LinAlgError) as exc:
        log.warning("see-saw run %s failed: %s", label, exc)
        return None, RunRecord(label, float("nan"), [], False, False, error=str(exc))


def initial_solutions(game: GameSpec, cfg: SeesawConfig) -> list[tuple[str, QuantumSolution]]:
    """Seeds: restart 0 is the computational/Hadamard seed when available, then random ones,
    plus the best pure Nash profile when ``classical_seed`` is set."""
    seeds = []
    pt = _pt_seed(game, cfg.dim) if cfg.pt_seed else None
    for r in range(cfg.restarts):
        if r == 0 and pt is not None:
            seeds.append(("pt", pt))
        else:
            rng = np.random.default_rng([cfg.seed, r])
            seeds.append((f"random{r}", random_solution(game, cfg.dim, rng)))
    if cfg.classical_seed and cfg.mode != "welfare":
        profiles, best = enumerate_pure_nash(game)
        if profiles:
            maps = next(p for p, sw in profiles if sw == best).maps
            seeds.append(("classical", classical_solution(game, maps, cfg.dim)))
    return seeds


def seesaw_optimize(game: GameSpec, config: SeesawConfig | None = None) -> SeesawResult:
    cfg = config or SeesawConfig()
    jobs = [(game, cfg, label, sol) for label, sol in initial_solutions(game, cfg)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as ex:
            outs = list(ex.map(_one_run, jobs))
    else:
        outs = [_one_run(j) for j in jobs]
    runs = [rec for _, rec in outs]
    # prefer certified runs, then higher welfare, then lower run index
    order = sorted((k for k, (s, _) in enumerate(outs) if s is not None),
                   key=lambda k: (not runs[k].certified, -runs[k].sw, k))
    if not order:
        return SeesawResult(None, float("nan"), cfg.mode, runs, None, None, False)
    k = order[0]
    sol = outs[k][0]
    nash = check_canonical_nash(game, born_distribution(sol, game), cfg.tol * game.vmax)
    quantum = check_quantum_equilibrium(game, sol, cfg.tol)
    return SeesawResult(sol, runs[k].sw, cfg.mode, runs, nash, quantum, runs[k].certified, k)
