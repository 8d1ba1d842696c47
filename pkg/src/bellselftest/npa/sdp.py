"""Dense primal-dual interior-point SDP solver on the homogeneous self-dual
embedding.

Solves  min <c, x>  s.t.  A x = b,  x in K,  with K a product of a nonnegative
orthant and dense PSD blocks (symmetric vectorization with sqrt(2)-scaled
off-diagonals).  The self-dual embedding makes infeasibility detection a
first-class outcome: primal infeasibility returns a Farkas certificate
(y, s) with A^T y + s = 0, s in K, b^T y = 1, which the membership test turns
into a separating functional.

The search direction is Nesterov-Todd scaled with a Mehrotra
predictor-corrector; each iteration factors the dense Schur complement
A H^{-1} A^T by Cholesky (with a small ridge fallback for rank-deficient
constraint sets).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.linalg import cho_factor, cho_solve, cholesky, svd


class Status(Enum):
    OPTIMAL = "Optimal"
    PRIMAL_INFEASIBLE = "PrimalInfeasible"
    DUAL_INFEASIBLE = "DualInfeasible"
    MAX_ITERATIONS = "MaxIterations"
    NUMERICAL_TROUBLE = "NumericalTrouble"


@dataclass(frozen=True)
class SolverConfig:
    tol_feas: float = 1e-8
    tol_gap: float = 1e-8
    max_iter: int = 200
    step_fraction: float = 0.99
    verbose: bool = False


@dataclass
class ConicSolution:
    status: Status
    x: np.ndarray | None = None
    y: np.ndarray | None = None
    s: np.ndarray | None = None
    primal_value: float = np.nan
    dual_value: float = np.nan
    primal_residual: float = np.nan
    dual_residual: float = np.nan
    gap: float = np.nan
    iterations: int = 0
    certificate: np.ndarray | None = None  # Farkas y for infeasible problems


# ------------------------------------------------------------- vectorization

_SQRT2 = np.sqrt(2.0)


def svec(mat: np.ndarray) -> np.ndarray:
    """Upper-triangle (row-major) vectorization with sqrt(2) off-diagonals, so
    that <X, Y> = svec(X) . svec(Y)."""
    n = mat.shape[0]
    out = np.empty(n * (n + 1) // 2)
    k = 0
    for i in range(n):
        out[k] = mat[i, i]
        k += 1
        row = mat[i, i + 1:n]
        out[k:k + n - i - 1] = row * _SQRT2
        k += n - i - 1
    return out


def smat(vec: np.ndarray, n: int) -> np.ndarray:
    out = np.zeros((n, n))
    k = 0
    inv = 1.0 / _SQRT2
    for i in range(n):
        out[i, i] = vec[k]
        k += 1
        row = vec[k:k + n - i - 1] * inv
        out[i, i + 1:n] = row
        out[i + 1:n, i] = row
        k += n - i - 1
    return out


def svec_dim(n: int) -> int:
    return n * (n + 1) // 2


class Cone:
    """Product cone: nonnegative orthant of size n_lin, then PSD blocks."""

    def __init__(self, n_lin: int, block_sizes):
        self.n_lin = int(n_lin)
        self.blocks = [int(n) for n in block_sizes]
        self.offsets = []
        off = self.n_lin
        for n in self.blocks:
            self.offsets.append(off)
            off += svec_dim(n)
        self.dim = off
        self.nu = self.n_lin + sum(self.blocks)

    def identity(self) -> np.ndarray:
        e = np.zeros(self.dim)
        e[:self.n_lin] = 1.0
        for n, off in zip(self.blocks, self.offsets):
            e[off:off + svec_dim(n)] = svec(np.eye(n))
        return e

    def mats(self, x: np.ndarray) -> list:
        return [smat(x[off:off + svec_dim(n)], n)
                for n, off in zip(self.blocks, self.offsets)]

    def min_eig(self, x: np.ndarray) -> float:
        vals = [x[:self.n_lin].min()] if self.n_lin else []
        for m in self.mats(x):
            vals.append(float(np.linalg.eigvalsh(m)[0]))
        return min(vals) if vals else 0.0


def _factor_psd(mat: np.ndarray) -> np.ndarray:
    """Square-root factor F with F F^T = mat; eigen fallback near singularity."""
    try:
        return cholesky(mat, lower=True)
    except np.linalg.LinAlgError:
        vals, vecs = np.linalg.eigh(mat)
        floor = max(float(vals.max()), 1.0) * 1e-15
        return vecs @ np.diag(np.sqrt(np.clip(vals, floor, None)))


class _Scaling:
    """Nesterov-Todd scaling point for the current (x, s)."""

    def __init__(self, cone: Cone, x: np.ndarray, s: np.ndarray):
        self.cone = cone
        nl = cone.n_lin
        self.w_lin = np.sqrt(x[:nl] / s[:nl]) if nl else np.zeros(0)
        self.lam_lin = np.sqrt(x[:nl] * s[:nl]) if nl else np.zeros(0)
        self.G = []
        self.Ginv = []
        self.W = []
        self.lam = []
        for xm, sm in zip(cone.mats(x), cone.mats(s)):
            lx = _factor_psd(xm)
            ls = _factor_psd(sm)
            u, sig, vt = svd(ls.T @ lx)
            sig = np.clip(sig, 1e-150, None)
            g = lx @ vt.T @ np.diag(sig ** -0.5)
            ginv = np.diag(sig ** -0.5) @ u.T @ ls.T
            self.G.append(g)
            self.Ginv.append(ginv)
            self.W.append(g @ g.T)
            self.lam.append(sig)

    def apply_hinv(self, v: np.ndarray) -> np.ndarray:
        """H^{-1} v: multiply by x/s on the orthant, W (.) W on PSD blocks."""
        out = np.empty_like(v)
        c = self.cone
        out[:c.n_lin] = (self.w_lin ** 2) * v[:c.n_lin]
        for k, (n, off) in enumerate(zip(c.blocks, c.offsets)):
            m = smat(v[off:off + svec_dim(n)], n)
            out[off:off + svec_dim(n)] = svec(self.W[k] @ m @ self.W[k])
        return out

    def scaled_pair(self, dx: np.ndarray, ds: np.ndarray):
        """Scaled directions (orthant values, PSD matrices) for the corrector."""
        c = self.cone
        nl = c.n_lin
        lx = dx[:nl] / self.w_lin if nl else np.zeros(0)
        ls = ds[:nl] * self.w_lin if nl else np.zeros(0)
        mats_x, mats_s = [], []
        for k, (n, off) in enumerate(zip(c.blocks, c.offsets)):
            mx = smat(dx[off:off + svec_dim(n)], n)
            ms = smat(ds[off:off + svec_dim(n)], n)
            mats_x.append(self.Ginv[k] @ mx @ self.Ginv[k].T)
            mats_s.append(self.G[k].T @ ms @ self.G[k])
        return lx, ls, mats_x, mats_s

    def vr(self, tgt_lin: np.ndarray, tgt_mats: list) -> np.ndarray:
        """Unscaled image of the complementarity target: the ds solving
        lambda o (dxbar + dsbar) = tgt at dx = 0."""
        c = self.cone
        out = np.empty(c.dim)
        if c.n_lin:
            out[:c.n_lin] = (tgt_lin / self.lam_lin) / self.w_lin
        for k, (n, off) in enumerate(zip(c.blocks, c.offsets)):
            lam = self.lam[k]
            r = tgt_mats[k] / (0.5 * (lam[:, None] + lam[None, :]))
            m = self.Ginv[k].T @ r @ self.Ginv[k]
            out[off:off + svec_dim(n)] = svec(0.5 * (m + m.T))
        return out


def _max_step(cone: Cone, x: np.ndarray, dx: np.ndarray) -> float:
    """Largest alpha keeping x + alpha dx in the cone."""
    alpha = np.inf
    nl = cone.n_lin
    if nl:
        neg = dx[:nl] < 0
        if neg.any():
            alpha = min(alpha, float(np.min(-x[:nl][neg] / dx[:nl][neg])))
    for (n, off), xm, dm in zip(zip(cone.blocks, cone.offsets),
                                cone.mats(x), cone.mats(dx)):
        l = _factor_psd(xm)
        linv = np.linalg.inv(l)
        m = linv @ dm @ linv.T
        lmin = float(np.linalg.eigvalsh(0.5 * (m + m.T))[0])
        if lmin < 0:
            alpha = min(alpha, -1.0 / lmin)
    return alpha


def solve_conic(a_mat: np.ndarray, b: np.ndarray, c: np.ndarray, cone: Cone,
                config: SolverConfig | None = None) -> ConicSolution:
    """Homogeneous self-dual interior-point solve of min c.x, Ax=b, x in K.

    Rows of A are equilibrated to unit norm and c is scaled to unit magnitude
    before the interior-point loop; solutions, certificates and reported
    residuals refer to the original data.
    """
    cfg = config or SolverConfig()
    a_mat = np.ascontiguousarray(a_mat, dtype=float)
    b = np.asarray(b, dtype=float)
    c = np.asarray(c, dtype=float)
    m, n = a_mat.shape
    if cone.dim != n:
        raise ValueError(f"cone dimension {cone.dim} != variable count {n}")

    row_norms = np.linalg.norm(a_mat, axis=1) if m else np.zeros(0)
    d = 1.0 / np.where(row_norms > 1e-12, row_norms, 1.0)
    sigma_c = max(1.0, float(np.linalg.norm(c, np.inf)))
    sol = _solve_core(a_mat * d[:, None], b * d, c / sigma_c, cone, cfg)

    bn = 1.0 + float(np.linalg.norm(b, np.inf)) if m else 1.0
    cn = 1.0 + float(np.linalg.norm(c, np.inf))
    if sol.status in (Status.OPTIMAL, Status.MAX_ITERATIONS) and sol.x is not None:
        x = sol.x
        y = sigma_c * d * sol.y if sol.y is not None else None
        s = sigma_c * sol.s if sol.s is not None else None
        pres = float(np.linalg.norm(a_mat @ x - b, np.inf)) / bn if m else 0.0
        dres = float(np.linalg.norm(a_mat.T @ y + s - c, np.inf)) / cn \
            if y is not None and s is not None else np.nan
        pobj, dobj = float(c @ x), float(b @ y) if y is not None else np.nan
        gap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
        status = sol.status
        if status is Status.OPTIMAL and not (
                pres <= 10 * cfg.tol_feas and dres <= 10 * cfg.tol_feas):
            status = Status.MAX_ITERATIONS  # scaling hid a residual; be honest
        return ConicSolution(status=status, x=x, y=y, s=s, primal_value=pobj,
                             dual_value=dobj, primal_residual=pres,
                             dual_residual=dres, gap=gap,
                             iterations=sol.iterations)
    if sol.status is Status.PRIMAL_INFEASIBLE:
        y = d * sol.y
        by = float(b @ y)
        y, s = y / by, sol.s / by
        return ConicSolution(status=sol.status, y=y, s=s, certificate=y,
                             iterations=sol.iterations,
                             dual_residual=float(
                                 np.linalg.norm(a_mat.T @ y + s, np.inf)))
    if sol.status is Status.DUAL_INFEASIBLE:
        x = sol.x / sigma_c
        return ConicSolution(status=sol.status, x=x, certificate=x,
                             iterations=sol.iterations,
                             primal_residual=float(
                                 np.linalg.norm(a_mat @ x, np.inf)))
    return sol


def _solve_core(a_mat: np.ndarray, b: np.ndarray, c: np.ndarray, cone: Cone,
                cfg: SolverConfig) -> ConicSolution:
    m, n = a_mat.shape

    x = cone.identity()
    s = cone.identity()
    y = np.zeros(m)
    tau, kappa = 1.0, 1.0
    bn = 1.0 + float(np.linalg.norm(b, np.inf)) if m else 1.0
    cn = 1.0 + float(np.linalg.norm(c, np.inf))

    best = None        # (metric, solution) over iterates, for stall exits
    stall = 0
    it = 0
    for it in range(cfg.max_iter):
        rp = a_mat @ x - b * tau
        rd = -a_mat.T @ y + c * tau - s
        rg = float(b @ y - c @ x - kappa)
        mu = (float(x @ s) + tau * kappa) / (cone.nu + 1)

        xt, yt, st = x / tau, y / tau, s / tau
        pres = float(np.linalg.norm(a_mat @ xt - b, np.inf)) / bn if m else 0.0
        dres = float(np.linalg.norm(a_mat.T @ yt + st - c, np.inf)) / cn
        pobj = float(c @ xt)
        dobj = float(b @ yt)
        gap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
        if cfg.verbose:
            print(f"  it {it:3d}  mu {mu:9.2e}  pres {pres:8.1e}  dres {dres:8.1e}"
                  f"  gap {gap:8.1e}  tau {tau:8.1e}  kappa {kappa:8.1e}")

        if pres <= cfg.tol_feas and dres <= cfg.tol_feas and gap <= cfg.tol_gap:
            return ConicSolution(status=Status.OPTIMAL, x=xt, y=yt, s=st,
                                 primal_value=pobj, dual_value=dobj,
                                 primal_residual=pres, dual_residual=dres,
                                 gap=gap, iterations=it)
        metric = max(pres, dres, gap)
        if best is None or metric < 0.9 * best[0]:
            best = (metric, ConicSolution(
                status=Status.MAX_ITERATIONS, x=xt, y=yt, s=st,
                primal_value=pobj, dual_value=dobj, primal_residual=pres,
                dual_residual=dres, gap=gap, iterations=it))
            stall = 0
        else:
            stall += 1
            if stall >= 12:
                return best[1]  # numerical floor reached; report best iterate
        by = float(b @ y)
        if by > 0:
            yc, sc = y / by, s / by
            if float(np.linalg.norm(a_mat.T @ yc + sc, np.inf)) <= cfg.tol_feas:
                return ConicSolution(status=Status.PRIMAL_INFEASIBLE, y=yc, s=sc,
                                     iterations=it, certificate=yc)
        cx = float(c @ x)
        if -cx > 0:
            xc = x / (-cx)
            if float(np.linalg.norm(a_mat @ xc, np.inf)) <= cfg.tol_feas \
                    and cone.min_eig(xc) >= -cfg.tol_feas:
                return ConicSolution(status=Status.DUAL_INFEASIBLE, x=xc,
                                     iterations=it, certificate=xc)

        try:
            scal = _Scaling(cone, x, s)
        except np.linalg.LinAlgError:
            return ConicSolution(status=Status.NUMERICAL_TROUBLE, iterations=it)

        ahi = np.empty((m, n))
        for i in range(m):
            ahi[i] = scal.apply_hinv(a_mat[i])
        schur = ahi @ a_mat.T
        schur = 0.5 * (schur + schur.T)
        ridge = 0.0
        fact = None
        for _ in range(8):
            try:
                fact = cho_factor(schur + ridge * np.eye(m), lower=True)
                break
            except np.linalg.LinAlgError:
                base = (abs(np.trace(schur)) / max(m, 1) + 1.0)
                ridge = max(1e-14 * base, ridge * 100.0)
        if fact is None:
            return ConicSolution(status=Status.NUMERICAL_TROUBLE, iterations=it)

        def apply_h(vec: np.ndarray) -> np.ndarray:
            out = np.empty_like(vec)
            nl = cone.n_lin
            out[:nl] = vec[:nl] / (scal.w_lin ** 2)
            for k, (nb, off) in enumerate(zip(cone.blocks, cone.offsets)):
                m = smat(vec[off:off + svec_dim(nb)], nb)
                winv = scal.Ginv[k].T @ scal.Ginv[k]
                out[off:off + svec_dim(nb)] = svec(winv @ m @ winv)
            return out

        def solve_kkt(f: np.ndarray, g: np.ndarray):
            """H u - A^T v = f,  A u = g, with one round of refinement (the
            Schur complement is badly conditioned near degenerate optima)."""
            v = cho_solve(fact, g - ahi @ f)
            u = scal.apply_hinv(f + a_mat.T @ v)
            rf = f - (apply_h(u) - a_mat.T @ v)
            rg = g - a_mat @ u
            dv = cho_solve(fact, rg - ahi @ rf)
            du = scal.apply_hinv(rf + a_mat.T @ dv)
            return u + du, v + dv

        u2, v2 = solve_kkt(-c, b)
        denom = float(b @ v2 - c @ u2) + kappa / tau

        def direction(eta: float, sigma_mu: float, corr=None):
            nl = cone.n_lin
            tgt_lin = sigma_mu - scal.lam_lin ** 2 if nl else np.zeros(0)
            tgt_mats = [sigma_mu * np.eye(nb) - np.diag(scal.lam[k] ** 2)
                        for k, nb in enumerate(cone.blocks)]
            tgt_tk = sigma_mu - tau * kappa
            if corr is not None:
                corr_lin, corr_mats, corr_tk = corr
                if nl:
                    tgt_lin = tgt_lin - corr_lin
                tgt_mats = [t - cm for t, cm in zip(tgt_mats, corr_mats)]
                tgt_tk -= corr_tk
            f0 = -eta * rd + scal.vr(tgt_lin, tgt_mats)
            g0 = -eta * rp
            u1, v1 = solve_kkt(f0, g0)
            dtau = (-eta * rg - float(b @ v1) + float(c @ u1) + tgt_tk / tau) / denom
            dx = u1 + dtau * u2
            dy = v1 + dtau * v2
            # recover ds from the dual row; numerically stabler near the optimum
            ds = -a_mat.T @ dy + c * dtau + eta * rd
            dkappa = (tgt_tk - kappa * dtau) / tau
            return dx, dy, ds, dtau, dkappa

        # predictor
        dx, dy, ds, dtau, dkappa = direction(1.0, 0.0)
        alpha = min(_max_step(cone, x, dx), _max_step(cone, s, ds),
                    np.inf if dtau >= 0 else -tau / dtau,
                    np.inf if dkappa >= 0 else -kappa / dkappa)
        alpha = min(1.0, cfg.step_fraction * alpha)
        mu_aff = ((x + alpha * dx) @ (s + alpha * ds)
                  + (tau + alpha * dtau) * (kappa + alpha * dkappa)) / (cone.nu + 1)
        sigma = float(np.clip(mu_aff / mu, 0.0, 1.0)) ** 3

        # corrector
        lx, ls, mats_x, mats_s = scal.scaled_pair(dx, ds)
        corr_lin = lx * ls
        corr_mats = [0.5 * (mx @ ms + ms @ mx) for mx, ms in zip(mats_x, mats_s)]
        corr = (corr_lin, corr_mats, dtau * dkappa)
        dx, dy, ds, dtau, dkappa = direction(1.0 - sigma, sigma * mu, corr)
        alpha = min(_max_step(cone, x, dx), _max_step(cone, s, ds),
                    np.inf if dtau >= 0 else -tau / dtau,
                    np.inf if dkappa >= 0 else -kappa / dkappa)
        alpha = min(1.0, cfg.step_fraction * alpha)
        if not np.isfinite(alpha) or alpha <= 0:
            return ConicSolution(status=Status.NUMERICAL_TROUBLE, iterations=it)

        x = x + alpha * dx
        y = y + alpha * dy
        s = s + alpha * ds
        tau += alpha * dtau
        kappa += alpha * dkappa

    xt = x / tau if tau > 0 else x
    return ConicSolution(status=Status.MAX_ITERATIONS, x=xt, y=y / tau if tau > 0 else y,
                         primal_value=float(c @ xt), iterations=cfg.max_iter)
