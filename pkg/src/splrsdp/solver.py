"""ADMM solvers for the block problem and a dense reference oracle.

The block solver works on a consensus vector over the union of block entry
positions (off-diagonal entries scaled by sqrt(2) so inner products are dot
products).  Each iteration solves a prefactored least-squares system for the
consensus, projects every block onto its null-constrained PSD face, clips
row values into their interval bounds, and updates scaled duals.  The dense
reference solver runs the same scheme on the full matrix of the original
problem and shares no conversion code, which makes it usable as an
independent cross-check.
"""

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .completion_rank import _psd_factor, _svec, _sym, _unsvec

__all__ = [
    "AdmmParams",
    "SolveStats",
    "AdmmDivergence",
    "project_null_psd",
    "admm_solve",
    "dense_reference_solve",
]


@dataclass
class AdmmParams:
    """Knobs for both ADMM loops."""

    rho: float = 1.0
    max_iter: int = 5000
    tol_primal: float = 1e-6
    tol_dual: float = 1e-6
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        if self.rho <= 0:
            raise ValueError("rho must be positive")
        if self.tol_primal <= 0 or self.tol_dual <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")


@dataclass
class SolveStats:
    iterations: int
    primal_residual: float
    dual_residual: float
    objective: float
    block_ranks: dict
    rho: float
    converged: bool
    history: list = field(default_factory=list, repr=False)


class AdmmDivergence(RuntimeError):
    """Raised when residuals blow up; carries the stats so far."""

    def __init__(self, message, stats):
        super().__init__(message)
        self.stats = stats


def _psd_clip(M):
    w, V = np.linalg.eigh(_sym(M))
    w = np.maximum(w, 0.0)
    return (V * w) @ V.T


def project_null_psd(M, null_vectors, tol=1e-10):
    """Project onto {Y PSD : Y a = 0 for each null vector a}.

    PSD plus a^T Y a = 0 forces Y a = 0, so the set is Q S+ Q^T for Q an
    orthonormal basis of the vectors' orthogonal complement, and the
    projection is Q clip(Q^T M Q) Q^T.
    """
    M = _sym(np.asarray(M, dtype=float))
    d = M.shape[0]
    A = np.asarray(null_vectors, dtype=float)
    if A.size == 0:
        return _psd_clip(M)
    A = A.reshape(d, -1)
    U, s, _ = np.linalg.svd(A, full_matrices=True)
    r = int(np.sum(s > tol * s[0])) if s.size else 0
    if r < A.shape[1]:
        warnings.warn("null vectors are linearly dependent; projecting onto "
                      "the span of %d of %d" % (r, A.shape[1]))
    Q = U[:, r:]
    return Q @ _psd_clip(Q.T @ M @ Q) @ Q.T


def _row_vector(bs, pair_index, data):
    """Sparse consensus-space coefficients of one data row."""
    vec = {}
    for t, C in data.items():
        idx = bs.blocks[t]
        for a in range(len(idx)):
            for b in range(a, len(idx)):
                v = C[a, b]
                if v != 0.0:
                    g = pair_index[(idx[a], idx[b])]
                    vec[g] = vec.get(g, 0.0) + (v if a == b else np.sqrt(2.0) * v)
    return vec


def admm_solve(bs, params=None):
    """Solve the coupled block problem; returns ({t: Y_t}, SolveStats).

    Divergence (combined residual growing past 1e6 times its starting value)
    raises AdmmDivergence.
    """
    params = params or AdmmParams()
    order = sorted(bs.blocks)
    sizes = {t: len(bs.blocks[t]) for t in order}

    pair_index = {}
    for t in order:
        idx = bs.blocks[t]
        for a in range(len(idx)):
            for b in range(a, len(idx)):
                pair_index.setdefault((idx[a], idx[b]), len(pair_index))
    N = len(pair_index)
    sel = {}
    for t in order:
        idx = bs.blocks[t]
        sel[t] = np.array([pair_index[(idx[a], idx[b])]
                           for a in range(len(idx))
                           for b in range(a, len(idx))], dtype=int)
    counts = np.zeros(N)
    for t in order:
        np.add.at(counts, sel[t], 1.0)

    m = len(bs.constraints)
    rows_ij, rows_v = ([], []), []
    for r, data in enumerate(bs.constraints):
        for g, v in sorted(_row_vector(bs, pair_index, data).items()):
            rows_ij[0].append(r)
            rows_ij[1].append(g)
            rows_v.append(v)
    A = sp.csr_matrix((rows_v, rows_ij), shape=(m, N))
    c = np.zeros(N)
    for g, v in _row_vector(bs, pair_index, bs.objective).items():
        c[g] += v
    lo = np.array([b[0] for b in bs.bounds], dtype=float)
    hi = np.array([b[1] for b in bs.bounds], dtype=float)

    solve = spla.factorized((sp.diags(counts) + (A.T @ A)).tocsc())

    faces = {}
    for t in order:
        At = bs.null_mats[t]
        if At.shape[1] == 0:
            faces[t] = None
        else:
            U, s, _ = np.linalg.svd(At, full_matrices=True)
            r = int(np.sum(s > 1e-10 * s[0])) if s.size else 0
            if r < At.shape[1]:
                warnings.warn("block %d has dependent null vectors" % t)
            faces[t] = U[:, r:]

    def project_block(t, v):
        Mt = _unsvec(v, sizes[t])
        Q = faces[t]
        if Q is None:
            return _svec(_psd_clip(Mt))
        return _svec(Q @ _psd_clip(Q.T @ Mt @ Q) @ Q.T)

    rho = params.rho
    # identity times a seed-dependent scale, so reruns with other seeds probe
    # different basins while staying reproducible
    scale0 = float(2.0 ** np.random.default_rng(params.seed).uniform(-1.0, 1.0))
    x = np.zeros(N)
    y = {t: _svec(scale0 * np.eye(sizes[t])) for t in order}
    lam = {t: np.zeros_like(y[t]) for t in order}
    z = np.clip(np.zeros(m), lo, hi)
    w = np.zeros(m)

    pool = ThreadPoolExecutor(params.threads) if params.threads > 1 else None
    history = []
    it = 0
    converged = False
    first_combined = None
    try:
        for it in range(1, params.max_iter + 1):
            rhs = -c / rho + A.T @ (z - w)
            for t in order:
                np.add.at(rhs, sel[t], y[t] - lam[t])
            x = solve(rhs)
            Ax = A @ x

            y_old = y
            if pool is not None:
                futs = {t: pool.submit(project_block, t, x[sel[t]] + lam[t])
                        for t in order}
                y = {t: futs[t].result() for t in order}
            else:
                y = {t: project_block(t, x[sel[t]] + lam[t]) for t in order}
            z_old = z
            z = np.clip(Ax + w, lo, hi)

            for t in order:
                lam[t] = lam[t] + x[sel[t]] - y[t]
            w = w + Ax - z

            pri2 = float(sum(np.sum((x[sel[t]] - y[t]) ** 2) for t in order)
                         + np.sum((Ax - z) ** 2))
            den_pri = max(1.0,
                          np.sqrt(float(sum(np.sum(x[sel[t]] ** 2) for t in order)
                                        + np.sum(Ax ** 2))),
                          np.sqrt(float(sum(np.sum(y[t] ** 2) for t in order)
                                        + np.sum(z ** 2))))
            dvec = A.T @ (z - z_old)
            for t in order:
                np.add.at(dvec, sel[t], y[t] - y_old[t])
            uvec = A.T @ w
            for t in order:
                np.add.at(uvec, sel[t], lam[t])
            pri = np.sqrt(pri2) / den_pri
            dua = rho * np.linalg.norm(dvec) / max(1.0, rho * np.linalg.norm(uvec))
            history.append((pri, dua))

            combined = pri + dua
            if first_combined is None:
                first_combined = combined
            if pri <= params.tol_primal and dua <= params.tol_dual:
                converged = True
                break
            if combined > 1e6 * max(first_combined, 1.0):
                stats = _block_stats(it, pri, dua, float(c @ x), y, sizes,
                                     order, rho, False, history)
                raise AdmmDivergence("residuals diverged at iteration %d" % it,
                                     stats)
            if it % 25 == 0:
                if pri > 10.0 * dua and rho < 1e6:
                    rho *= 2.0
                    for t in order:
                        lam[t] /= 2.0
                    w /= 2.0
                elif dua > 10.0 * pri and rho > 1e-6:
                    rho /= 2.0
                    for t in order:
                        lam[t] *= 2.0
                    w *= 2.0
    finally:
        if pool is not None:
            pool.shutdown()

    blocks = {t: _unsvec(y[t], sizes[t]) for t in order}
    stats = _block_stats(it, history[-1][0] if history else 0.0,
                         history[-1][1] if history else 0.0,
                         float(c @ x), y, sizes, order, rho, converged, history)
    return blocks, stats


def _block_stats(it, pri, dua, obj, y, sizes, order, rho, converged, history):
    ranks = {}
    for t in order:
        Yt = _unsvec(y[t], sizes[t])
        w = np.linalg.eigvalsh(_sym(Yt))
        top = max(w[-1], 0.0) if w.size else 0.0
        ranks[t] = int(np.sum(w > 1e-8 * top)) if top > 0 else 0
    return SolveStats(iterations=it, primal_residual=float(pri),
                      dual_residual=float(dua), objective=float(obj),
                      block_ranks=ranks, rho=float(rho),
                      converged=bool(converged), history=history)


def dense_reference_solve(p, params=None):
    """Plain dense ADMM on the original problem; the cross-check oracle.

    Splits the variable into a data copy (interval rows) and a PSD copy.
    Returns (FactoredSolution, SolveStats); check stats.converged before
    trusting tight tolerances.  Residual blow-up raises AdmmDivergence, and
    infeasible instances show up as a primal residual that stalls high.
    """
    from .sdp_model import FactoredSolution

    params = params or AdmmParams()
    n = p.n
    C = p.objective.dense(p.factor)
    mats = [cn.term.dense(p.factor) for cn in p.constraints]
    c = _svec(C)
    dim = c.size
    m = len(mats)
    A = (np.array([_svec(M) for M in mats]) if m else np.zeros((0, dim)))
    lo = np.array([cn.lower for cn in p.constraints], dtype=float)
    hi = np.array([cn.upper for cn in p.constraints], dtype=float)

    import scipy.linalg as sla
    cho = sla.cho_factor(np.eye(dim) + A.T @ A)

    rho = params.rho
    scale0 = float(2.0 ** np.random.default_rng(params.seed).uniform(-1.0, 1.0))
    x = np.zeros(dim)
    S = scale0 * np.eye(n)
    s_v = _svec(S)
    lam = np.zeros(dim)
    z = np.clip(np.zeros(m), lo, hi)
    w = np.zeros(m)
    history = []
    converged = False
    first_combined = None
    it = 0
    for it in range(1, params.max_iter + 1):
        rhs = -c / rho + (s_v - lam) + A.T @ (z - w)
        x = sla.cho_solve(cho, rhs)
        Ax = A @ x

        s_old = s_v
        S = _psd_clip(_unsvec(x + lam, n))
        s_v = _svec(S)
        z_old = z
        z = np.clip(Ax + w, lo, hi)

        lam = lam + x - s_v
        w = w + Ax - z

        pri = np.sqrt(float(np.sum((x - s_v) ** 2) + np.sum((Ax - z) ** 2)))
        pri /= max(1.0, np.linalg.norm(x), np.linalg.norm(s_v))
        dvec = (s_v - s_old) + A.T @ (z - z_old)
        uvec = lam + A.T @ w
        dua = rho * np.linalg.norm(dvec) / max(1.0, rho * np.linalg.norm(uvec))
        history.append((pri, dua))
        combined = pri + dua
        if first_combined is None:
            first_combined = combined
        if pri <= params.tol_primal and dua <= params.tol_dual:
            converged = True
            break
        if combined > 1e6 * max(first_combined, 1.0):
            stats = SolveStats(iterations=it, primal_residual=pri,
                               dual_residual=dua, objective=float(c @ x),
                               block_ranks={}, rho=rho, converged=False,
                               history=history)
            raise AdmmDivergence("dense solve diverged at iteration %d" % it,
                                 stats)
        if it % 25 == 0:
            if pri > 10.0 * dua and rho < 1e6:
                rho *= 2.0
                lam /= 2.0
                w /= 2.0
            elif dua > 10.0 * pri and rho > 1e-6:
                rho /= 2.0
                lam *= 2.0
                w *= 2.0
    stats = SolveStats(iterations=it,
                       primal_residual=history[-1][0] if history else 0.0,
                       dual_residual=history[-1][1] if history else 0.0,
                       objective=float(c @ x), block_ranks={}, rho=rho,
                       converged=converged, history=history)
    return FactoredSolution(_psd_factor(S)), stats
