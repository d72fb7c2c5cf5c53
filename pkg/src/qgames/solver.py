"""Block-structured LP/SDP solving.

Problems are stated in linear-matrix-inequality form over free real
variables ``x``::

    optimize   c @ x + offset
    subject to F_b(x) = F_b0 + sum_i x_i F_bi  >= 0    for every block b
               A_eq @ x == b_eq

where a block is either a symmetric PSD block or a nonnegative vector block
(a diagonal LP block).  This is the layout of the SDPA sparse format, which
:func:`write_sdpa` / :func:`read_sdpa` speak.

The back end is a homogeneous self-dual primal-dual interior-point method
with the HKM search direction and Mehrotra predictor-corrector steps.  The
Schur complement is assembled from the sparse constraint columns, which keeps
moment-matrix problems with a few thousand variables and 243x243 blocks
within desktop memory.  Equality constraints are eliminated up front through
an orthonormal null-space basis.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

log = logging.getLogger(__name__)

CONST = -1  # variable index addressing the constant term F_b0

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
NUMERICAL_FAILURE = "numerical_failure"
ITERATION_LIMIT = "iteration_limit"


class ValidationError(ValueError):
    """Malformed conic problem."""


class SolverError(RuntimeError):
    """Raised by callers when a solve did not reach an optimal status."""

    def __init__(self, message: str, result: "SolverResult | None" = None):
        super().__init__(message)
        self.result = result


@dataclass(frozen=True)
class Block:
    kind: str  # "psd" or "nonneg"
    size: int


class ConicProblem:
    """Sparse LMI-form conic problem.

    Entries are accumulated with :meth:`add_entries`; an entry ``(var, row,
    col, value)`` adds ``value`` to position ``(row, col)`` and its mirror of
    the coefficient matrix of ``var`` in the given block.  Use ``var=CONST``
    for the constant matrix.
    """

    def __init__(self, n_vars: int, sense: str = "max"):
        if sense not in ("max", "min"):
            raise ValidationError(f"sense must be 'max' or 'min', got {sense!r}")
        if n_vars < 0:
            raise ValidationError("n_vars must be nonnegative")
        self.n_vars = int(n_vars)
        self.sense = sense
        self.objective = np.zeros(self.n_vars)
        self.offset = 0.0
        self.blocks: list[Block] = []
        self._entries: list[list[tuple[np.ndarray, ...]]] = []
        self._eq_rows: list[np.ndarray] = []
        self._eq_rhs: list[float] = []

    # -- construction -----------------------------------------------------
    def add_block(self, kind: str, size: int) -> int:
        if kind not in ("psd", "nonneg"):
            raise ValidationError(f"unknown block kind {kind!r}")
        if size < 1:
            raise ValidationError("block size must be positive")
        self.blocks.append(Block(kind, int(size)))
        self._entries.append([])
        return len(self.blocks) - 1

    def add_entries(self, block: int, var, row, col, value) -> None:
        var, row, col, value = np.broadcast_arrays(
            np.asarray(var, dtype=np.int64),
            np.asarray(row, dtype=np.int64),
            np.asarray(col, dtype=np.int64),
            np.asarray(value, dtype=float),
        )
        if not 0 <= block < len(self.blocks):
            raise ValidationError(f"block {block} does not exist")
        b = self.blocks[block]
        var, row, col, value = (a.ravel().copy() for a in (var, row, col, value))
        if var.size == 0:
            return
        if np.any(var < CONST) or np.any(var >= self.n_vars):
            raise ValidationError("entry references a nonexistent variable")
        if np.any(row < 0) or np.any(col < 0) or np.any(row >= b.size) or np.any(col >= b.size):
            raise ValidationError(f"entry outside block {block} of size {b.size}")
        if b.kind == "nonneg" and np.any(row != col):
            raise ValidationError("nonnegative blocks only take diagonal entries")
        if not np.all(np.isfinite(value)):
            raise ValidationError("non-finite coefficient")
        lo, hi = np.minimum(row, col), np.maximum(row, col)
        self._entries[block].append((var, lo, hi, value))

    def add_inequality(self, block: int, row: int, coefs: dict[int, float] | np.ndarray,
                       constant: float = 0.0) -> None:
        """Convenience for nonneg blocks: ``constant + coefs @ x >= 0`` in ``row``."""
        if isinstance(coefs, dict):
            idx = np.fromiter(coefs.keys(), dtype=np.int64, count=len(coefs))
            val = np.fromiter(coefs.values(), dtype=float, count=len(coefs))
        else:
            coefs = np.asarray(coefs, dtype=float)
            idx = np.flatnonzero(coefs)
            val = coefs[idx]
        self.add_entries(block, idx, row, row, val)
        if constant:
            self.add_entries(block, CONST, row, row, constant)

    def add_equality(self, coefs: dict[int, float] | np.ndarray, rhs: float) -> None:
        row = np.zeros(self.n_vars)
        if isinstance(coefs, dict):
            for k, v in coefs.items():
                if not 0 <= k < self.n_vars:
                    raise ValidationError("equality references a nonexistent variable")
                row[k] += v
        else:
            coefs = np.asarray(coefs, dtype=float)
            if coefs.shape != (self.n_vars,):
                raise ValidationError("equality coefficient vector has wrong length")
            row += coefs
        self._eq_rows.append(row)
        self._eq_rhs.append(float(rhs))

    # -- views ------------------------------------------------------------
    def block_matrix(self, block: int) -> sp.csc_matrix:
        """Sparse map ``[1, x] -> vec(F_b(x))``.

        PSD blocks are vectorised row-major over the full square (both
        triangles); nonneg blocks map to their diagonal.
        """
        b = self.blocks[block]
        if self._entries[block]:
            var, r, c, v = (np.concatenate(a) for a in zip(*self._entries[block]))
        else:
            var = r = c = np.zeros(0, dtype=np.int64)
            v = np.zeros(0)
        if b.kind == "nonneg":
            return sp.csc_matrix((v, (r, var + 1)), shape=(b.size, self.n_vars + 1))
        off = r != c
        rows = np.concatenate([r * b.size + c, (c * b.size + r)[off]])
        cols = np.concatenate([var, var[off]]) + 1
        vals = np.concatenate([v, v[off]])
        return sp.csc_matrix((vals, (rows, cols)), shape=(b.size * b.size, self.n_vars + 1))

    @property
    def equalities(self) -> tuple[np.ndarray, np.ndarray]:
        if not self._eq_rows:
            return np.zeros((0, self.n_vars)), np.zeros(0)
        return np.vstack(self._eq_rows), np.asarray(self._eq_rhs)

    def evaluate_blocks(self, x: np.ndarray) -> list[np.ndarray]:
        z = np.concatenate([[1.0], np.asarray(x, dtype=float)])
        out = []
        for k, b in enumerate(self.blocks):
            vec = self.block_matrix(k) @ z
            out.append(vec.reshape(b.size, b.size) if b.kind == "psd" else vec)
        return out

    def residuals(self, x: np.ndarray) -> dict[str, float]:
        """Constraint violations of ``x``, recomputed from the problem data alone."""
        cone = 0.0
        for b, val in zip(self.blocks, self.evaluate_blocks(x)):
            low = np.linalg.eigvalsh(val).min() if b.kind == "psd" else val.min()
            cone = max(cone, -float(low))
        A, rhs = self.equalities
        eq = float(np.abs(A @ x - rhs).max()) if len(rhs) else 0.0
        return {"cone": cone, "equality": eq}

    def as_diagonal_sdp(self) -> "ConicProblem":
        """Copy with every nonneg block re-expressed as 1x1 PSD blocks."""
        out = ConicProblem(self.n_vars, self.sense)
        out.objective = self.objective.copy()
        out.offset = self.offset
        for k, b in enumerate(self.blocks):
            if b.kind == "psd":
                nb = out.add_block("psd", b.size)
                for ent in self._entries[k]:
                    out.add_entries(nb, *ent)
                continue
            first = len(out.blocks)
            for _ in range(b.size):
                out.add_block("psd", 1)
            for var, r, _, v in self._entries[k]:
                for j in np.unique(r):
                    sel = r == j
                    out.add_entries(first + int(j), var[sel], 0, 0, v[sel])
        for row, rhs in zip(self._eq_rows, self._eq_rhs):
            out.add_equality(row, rhs)
        return out


@dataclass
class SolverResult:
    status: str
    value: float = float("nan")
    x: np.ndarray | None = None
    blocks: list[np.ndarray] = field(default_factory=list)
    duals: list[np.ndarray] = field(default_factory=list)
    residuals: dict[str, float] = field(default_factory=dict)
    gap: float = float("nan")
    iterations: int = 0

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


# ---------------------------------------------------------------------------
# interior point core
# ---------------------------------------------------------------------------

_DENSE_SCHUR_MAX = 24  # PSD blocks up to this size use the Kronecker form


class _PSDData:
    def __init__(self, C: np.ndarray, A: sp.csc_matrix):
        self.s = C.shape[0]
        self.C = C
        self.A = A  # (s*s, m), columns are vec(A_k)
        self.AT = A.T.tocsr()
        self.dense = self.s <= _DENSE_SCHUR_MAX
        self.Adense = A.toarray() if self.dense else None
        nnz = np.diff(A.indptr)
        self.active = np.flatnonzero(nnz)

    def adj(self, y):
        return (self.A @ y).reshape(self.s, self.s)

    def op(self, X):
        return self.AT @ X.ravel()

    def schur(self, X, Zi):
        m = self.A.shape[1]
        if self.dense:
            K = np.kron(X, Zi)
            return self.Adense.T @ K @ self.Adense
        M = np.zeros((m, m))
        A = self.A
        s = self.s
        batch = max(1, min(256, int(2e7 // (s * s))))
        act = self.active
        for start in range(0, len(act), batch):
            ks = act[start:start + batch]
            T = np.empty((s * s, len(ks)))
            for j, k in enumerate(ks):
                sl = slice(A.indptr[k], A.indptr[k + 1])
                pos = A.indices[sl]
                r, c = np.divmod(pos, s)
                T[:, j] = (X[:, r] @ (A.data[sl][:, None] * Zi[c, :])).ravel()
            M[:, ks] = self.AT @ T
        return M


def _max_step(X, dX):
    try:
        L = np.linalg.cholesky(X)
    except np.linalg.LinAlgError:
        return 0.0
    Li = sla.solve_triangular(L, np.eye(len(X)), lower=True)
    lam = np.linalg.eigvalsh(Li @ dX @ Li.T).min()
    return np.inf if lam >= 0 else -1.0 / lam


def _max_step_vec(x, dx):
    neg = dx < 0
    return np.inf if not neg.any() else float(np.min(-x[neg] / dx[neg]))


def _hsd(psd: list[_PSDData], h, G, b, tol, max_iter, verbose):
    """Maximise b@y s.t. C_b - A_b^*(y) >= 0, h - G y >= 0."""
    m = len(b)
    p = len(h)
    Xs = [np.eye(d.s) for d in psd]
    Zs = [np.eye(d.s) for d in psd]
    x = np.ones(p)
    z = np.ones(p)
    y = np.zeros(m)
    tau = kappa = 1.0
    nu = sum(d.s for d in psd) + p + 1
    normb = 1.0 + np.linalg.norm(b)
    normC = 1.0 + np.sqrt(sum(np.sum(d.C ** 2) for d in psd) + h @ h)
    stall = 0
    status = ITERATION_LIMIT
    met = False  # contract tolerance reached at some iterate
    target = 0.1 * tol

    def Aop(Ms, v):
        out = G.T @ v if p else np.zeros(m)
        for d, Mb in zip(psd, Ms):
            out = out + d.op(Mb)
        return out

    def cdot(Ms, v):
        return sum(float(np.sum(d.C * Mb)) for d, Mb in zip(psd, Ms)) + float(h @ v)

    it = 0
    for it in range(1, max_iter + 1):
        rp = Aop(Xs, x) - tau * b
        rds = [d.adj(y) + Zb - tau * d.C for d, Zb in zip(psd, Zs)]
        rdl = G @ y + z - tau * h
        cx = cdot(Xs, x)
        by = float(b @ y)
        rg = cx - by + kappa
        mu = (sum(float(np.sum(Xb * Zb)) for Xb, Zb in zip(Xs, Zs)) + x @ z + tau * kappa) / nu

        nrd = np.sqrt(sum(np.sum(r ** 2) for r in rds) + rdl @ rdl)
        pres = np.linalg.norm(rp) / tau / normb
        dres = nrd / tau / normC
        gap = abs(cx - by) / tau / (1.0 + abs(cx / tau) + abs(by / tau))
        if verbose:
            log.info("it %3d pobj %+.9e dobj %+.9e pres %.1e dres %.1e gap %.1e tau %.1e kap %.1e",
                     it, cx / tau, by / tau, pres, dres, gap, tau, kappa)
        if pres <= target and dres <= target and gap <= target:
            status = OPTIMAL
            break
        if pres <= tol and dres <= tol and gap <= tol:
            met = True
            best = (y.copy(), [X.copy() for X in Xs], [Z.copy() for Z in Zs], x.copy(),
                    z.copy(), tau, kappa, gap, pres, dres)
        if by > 0:
            cert = np.sqrt(sum(np.sum((r + tau * d.C) ** 2) for r, d in zip(rds, psd))
                           + np.sum((rdl + tau * h) ** 2)) / by
            if cert <= tol and tau < kappa:
                status = UNBOUNDED  # primal (multiplier) side infeasible
                break
        if cx < 0:
            cert = np.linalg.norm(rp + tau * b) / -cx
            if cert <= tol and tau < kappa:
                status = INFEASIBLE
                break

        try:
            Zis = [sla.cho_solve(sla.cho_factor(Zb), np.eye(len(Zb))) for Zb in Zs]
        except np.linalg.LinAlgError:
            status = NUMERICAL_FAILURE
            break
        Zis = [(Zi + Zi.T) / 2 for Zi in Zis]
        dlp = x / z
        M = np.zeros((m, m))
        for d, Xb, Zi in zip(psd, Xs, Zis):
            M += d.schur(Xb, Zi)
        if p:
            Gd = G.multiply(dlp[:, None]) if sp.issparse(G) else G * dlp[:, None]
            M += np.asarray(G.T @ Gd)
        M = (M + M.T) / 2
        reg = 0.0
        for _ in range(6):
            try:
                fac = sla.cho_factor(M + reg * np.eye(m), check_finite=False)
                break
            except (np.linalg.LinAlgError, sla.LinAlgError):
                reg = max(reg * 100, 1e-14 * max(1.0, np.abs(np.diag(M)).max()))
        else:
            status = NUMERICAL_FAILURE
            break

        def msolve(r):
            return sla.cho_solve(fac, r, check_finite=False)

        XCZ = [Xb @ d.C @ Zi for d, Xb, Zi in zip(psd, Xs, Zis)]
        v = Aop(XCZ, x * h / z)
        ccc = sum(float(np.sum(d.C * W)) for d, W in zip(psd, XCZ)) + float(h @ (h * dlp))
        q = msolve(v + b)

        def direction(RcZ, rcz, rs, eta):
            Ws = [R + eta * Xb @ r @ Zi for R, Xb, r, Zi in zip(RcZ, Xs, rds, Zis)]
            wl = rcz + eta * x * rdl / z
            r1 = -eta * rp - Aop(Ws, wl)
            r2 = -eta * rg - cdot(Ws, wl) - rs / tau
            pp = msolve(r1)
            den = (v - b) @ q - ccc - kappa / tau
            dtau = (r2 - (v - b) @ pp) / den
            dy = pp + dtau * q
            dZs = [-eta * r - d.adj(dy) + dtau * d.C for d, r in zip(psd, rds)]
            dXs = []
            for R, Xb, dZ, Zi in zip(RcZ, Xs, dZs, Zis):
                dX = R - Xb @ dZ @ Zi
                dXs.append((dX + dX.T) / 2)
            dz = -eta * rdl - G @ dy + dtau * h
            dx = rcz - x * dz / z
            dkap = (rs - kappa * dtau) / tau
            return dXs, dy, dZs, dx, dz, dtau, dkap

        def steplen(d):
            dXs, dy, dZs, dx, dz, dtau, dkap = d
            a = np.inf
            for Xb, dX in zip(Xs, dXs):
                a = min(a, _max_step(Xb, dX))
            for Zb, dZ in zip(Zs, dZs):
                a = min(a, _max_step(Zb, dZ))
            if p:
                a = min(a, _max_step_vec(x, dx), _max_step_vec(z, dz))
            if dtau < 0:
                a = min(a, -tau / dtau)
            if dkap < 0:
                a = min(a, -kappa / dkap)
            return a

        aff = direction([-Xb for Xb in Xs], -x, -tau * kappa, 1.0)
        a_aff = min(1.0, steplen(aff))
        dXa, _, dZa, dxa, dza, dta, dka = aff
        mu_aff = (sum(float(np.sum((Xb + a_aff * dX) * (Zb + a_aff * dZ)))
                      for Xb, dX, Zb, dZ in zip(Xs, dXa, Zs, dZa))
                  + (x + a_aff * dxa) @ (z + a_aff * dza)
                  + (tau + a_aff * dta) * (kappa + a_aff * dka)) / nu
        sigma = min(1.0, max(0.0, (mu_aff / mu) ** 3))
        RcZ = [sigma * mu * Zi - Xb - dX @ dZ @ Zi for Zi, Xb, dX, dZ in zip(Zis, Xs, dXa, dZa)]
        rcz = (sigma * mu - x * z - dxa * dza) / z
        rs = sigma * mu - tau * kappa - dta * dka
        cor = direction(RcZ, rcz, rs, 1.0 - sigma)
        amax = steplen(cor)
        alpha = min(1.0, 0.98 * amax) if np.isfinite(amax) else 1.0
        if alpha < 1e-10:
            stall += 1
            if stall >= 3:
                status = NUMERICAL_FAILURE
                break
        else:
            stall = 0
        dXs, dy, dZs, dx, dz, dtau, dkap = cor
        Xs = [Xb + alpha * dX for Xb, dX in zip(Xs, dXs)]
        Zs = [Zb + alpha * dZ for Zb, dZ in zip(Zs, dZs)]
        Xs = [(Xb + Xb.T) / 2 for Xb in Xs]
        Zs = [(Zb + Zb.T) / 2 for Zb in Zs]
        x = x + alpha * dx
        z = z + alpha * dz
        y = y + alpha * dy
        tau += alpha * dtau
        kappa += alpha * dkap
        # keep the homogeneous scale bounded
        scale = max(tau, kappa)
        if scale > 1e6 or scale < 1e-6:
            Xs = [Xb / scale for Xb in Xs]
            Zs = [Zb / scale for Zb in Zs]
            x, z, y = x / scale, z / scale, y / scale
            tau, kappa = tau / scale, kappa / scale
    if status in (NUMERICAL_FAILURE, ITERATION_LIMIT) and met:
        y, Xs, Zs, x, z, tau, kappa, gap, pres, dres = best
        status = OPTIMAL
    return dict(y=y, Xs=Xs, Zs=Zs, x=x, z=z, tau=tau, kappa=kappa, status=status,
                iterations=it, gap=gap, pres=pres, dres=dres)


def _null_space_param(A: np.ndarray, rhs: np.ndarray, n: int):
    """x = x0 + N z parametrisation of {A x = rhs}; None if inconsistent."""
    if A.shape[0] == 0:
        return np.zeros(n), np.eye(n)
    U, s, Vt = np.linalg.svd(A, full_matrices=True)
    scale = s[0] if s.size and s[0] > 0 else 1.0
    rank = int(np.sum(s > 1e-11 * scale))
    x0 = Vt[:rank].T @ ((U[:, :rank].T @ rhs) / s[:rank])
    if np.abs(A @ x0 - rhs).max() > 1e-9 * (1.0 + np.abs(rhs).max()):
        return None
    return x0, Vt[rank:].T


def solve(problem: ConicProblem, tol: float = 1e-8, max_iter: int = 200,
          verbosity: int = 0) -> SolverResult:
    """Solve ``problem``; see :class:`SolverResult` for status semantics."""
    n = problem.n_vars
    if problem.objective.shape != (n,):
        raise ValidationError("objective has wrong length")
    if not np.all(np.isfinite(problem.objective)):
        raise ValidationError("non-finite objective")
    A_eq, b_eq = problem.equalities
    par = _null_space_param(A_eq, b_eq, n)
    if par is None:
        return SolverResult(status=INFEASIBLE)
    x0, N = par
    nz = N.shape[1]
    T = np.zeros((n + 1, nz + 1))
    T[0, 0] = 1.0
    T[1:, 0] = x0
    T[1:, 1:] = N
    T = sp.csr_matrix(T) if nz != n or np.any(x0) else sp.identity(n + 1, format="csr")
    sign = 1.0 if problem.sense == "max" else -1.0
    b = sign * (N.T @ problem.objective)
    const_obj = float(problem.objective @ x0) + problem.offset

    psd, lp_parts = [], []
    for k, blk in enumerate(problem.blocks):
        E = (problem.block_matrix(k) @ T).tocsc()
        C0 = np.asarray(E[:, 0].todense()).ravel()
        A = -E[:, 1:]
        if blk.kind == "psd":
            psd.append(_PSDData(C0.reshape(blk.size, blk.size), sp.csc_matrix(A)))
        else:
            lp_parts.append((C0, A))
    if lp_parts:
        h = np.concatenate([c for c, _ in lp_parts])
        G = sp.vstack([a for _, a in lp_parts]).tocsr()
        if G.shape[0] * G.shape[1] <= 4_000_000:
            G = G.toarray()
    else:
        h = np.zeros(0)
        G = np.zeros((0, nz))

    if nz == 0:
        xu = x0
        res = problem.residuals(xu)
        ok = res["cone"] <= tol
        return SolverResult(status=OPTIMAL if ok else INFEASIBLE,
                            value=const_obj if ok else float("nan"),
                            x=xu if ok else None, residuals=res, gap=0.0,
                            blocks=problem.evaluate_blocks(xu) if ok else [])

    raw = _hsd(psd, h, G, b, tol, max_iter, verbosity > 0)
    status = raw["status"]
    tau = raw["tau"]
    zsol = raw["y"] / tau
    xu = x0 + N @ zsol
    value = float(problem.objective @ xu) + problem.offset
    result = SolverResult(status=status, x=xu, gap=raw["gap"], iterations=raw["iterations"])
    duals = [Xb / tau for Xb in raw["Xs"]]
    if len(h):
        duals.append(raw["x"] / tau)
    result.duals = duals
    if status in (OPTIMAL, NUMERICAL_FAILURE, ITERATION_LIMIT):
        result.value = value
        result.blocks = problem.evaluate_blocks(xu)
        result.residuals = problem.residuals(xu)
    elif status == UNBOUNDED:
        result.value = sign * np.inf
        result.x = None
    elif status == INFEASIBLE:
        result.x = None
    return result


def solve_lp_highs(problem: ConicProblem) -> SolverResult:
    """Solve a problem with only nonneg blocks through scipy's HiGHS.

    Independent LP route used to cross-check the interior-point back end.
    """
    from scipy.optimize import linprog

    if any(b.kind != "nonneg" for b in problem.blocks):
        raise ValidationError("HiGHS route only handles nonneg blocks")
    rows, rhs = [], []
    for k in range(len(problem.blocks)):
        E = problem.block_matrix(k).toarray()
        rows.append(-E[:, 1:])  # -F x <= F0
        rhs.append(E[:, 0])
    A_ub = np.vstack(rows) if rows else None
    b_ub = np.concatenate(rhs) if rhs else None
    A_eq, b_eq = problem.equalities
    sign = -1.0 if problem.sense == "max" else 1.0
    res = linprog(sign * problem.objective, A_ub=A_ub, b_ub=b_ub,
                  A_eq=A_eq if len(b_eq) else None, b_eq=b_eq if len(b_eq) else None,
                  bounds=[(None, None)] * problem.n_vars, method="highs")
    status = {0: OPTIMAL, 2: INFEASIBLE, 3: UNBOUNDED, 1: ITERATION_LIMIT}.get(res.status, NUMERICAL_FAILURE)
    out = SolverResult(status=status, iterations=int(getattr(res, "nit", 0)))
    if status == OPTIMAL:
        out.x = res.x
        out.value = float(problem.objective @ res.x) + problem.offset
        out.residuals = problem.residuals(res.x)
        out.blocks = problem.evaluate_blocks(res.x)
        out.gap = 0.0
    return out


# ---------------------------------------------------------------------------
# SDPA sparse interchange
# ---------------------------------------------------------------------------

def write_sdpa(problem: ConicProblem, path) -> None:
    """Write ``problem`` in SDPA sparse format.

    SDPA minimises ``c @ x`` subject to ``sum_i x_i F_i - F_0 >= 0``, so the
    constant block data are negated and a maximisation objective is flipped.
    Equality constraints are not representable and must have been eliminated.
    The objective offset and sense travel in comment lines.
    """
    A_eq, _ = problem.equalities
    if A_eq.shape[0]:
        raise ValidationError("SDPA export does not support equality constraints")
    sign = -1.0 if problem.sense == "max" else 1.0
    lines = [f"\"sense {problem.sense}", f"\"offset {float(problem.offset)!r}",
             str(problem.n_vars), str(len(problem.blocks)),
             " ".join(str(b.size if b.kind == "psd" else -b.size) for b in problem.blocks),
             " ".join(repr(float(v)) for v in sign * problem.objective)]
    for k, blk in enumerate(problem.blocks):
        E = problem.block_matrix(k).tocoo()
        for pos, col, val in zip(E.row, E.col, E.data):
            if val == 0.0:
                continue
            if blk.kind == "psd":
                r, c = divmod(int(pos), blk.size)
                if r > c:
                    continue
            else:
                r = c = int(pos)
            mat = int(col)  # 0 is F_0
            v = -val if mat == 0 else val
            lines.append(f"{mat} {k + 1} {r + 1} {c + 1} {float(v)!r}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_sdpa(path) -> ConicProblem:
    """Inverse of :func:`write_sdpa` (plain SDPA files read as minimisation)."""
    sense, offset = "min", 0.0
    body = []
    with open(path) as fh:
        for raw in fh:
            line = raw.strip()
            if not line:
                continue
            if line[0] in '"*':
                toks = line[1:].split()
                if len(toks) == 2 and toks[0] == "sense":
                    sense = toks[1]
                elif len(toks) == 2 and toks[0] == "offset":
                    offset = float(toks[1])
                continue
            body.append(line.replace(",", " ").replace("{", " ").replace("}", " ")
                        .replace("(", " ").replace(")", " "))
    try:
        m = int(body[0].split()[0])
        nblocks = int(body[1].split()[0])
        sizes = [int(t) for t in body[2].split()[:nblocks]]
        c = np.array([float(t) for t in body[3].split()[:m]])
    except (IndexError, ValueError) as exc:
        raise ValidationError(f"malformed SDPA header: {exc}") from None
    prob = ConicProblem(m, sense)
    prob.objective = c if sense == "min" else -c
    prob.offset = offset
    for s in sizes:
        prob.add_block("psd" if s > 0 else "nonneg", abs(s))
    for lineno, line in enumerate(body[4:], start=5):
        toks = line.split()
        if len(toks) != 5:
            raise ValidationError(f"malformed SDPA entry on data line {lineno}: {line!r}")
        mat, blk, r, cc = (int(t) for t in toks[:4])
        val = float(toks[4])
        if mat == 0:
            prob.add_entries(blk - 1, CONST, r - 1, cc - 1, -val)
        else:
            prob.add_entries(blk - 1, mat - 1, r - 1, cc - 1, val)
    return prob
