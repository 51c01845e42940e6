"""Dense interior-point engine for standard-form conic programs.

Solves  min <C,X>  s.t.  A(X) = b,  X in S^{t_1}_+ x ... x S^{t_k}_+ x R^q_+
through the homogeneous self-dual embedding in (X, y, S, tau, kappa), driven
by an infeasible-start path-follower with Nesterov-Todd scaling, a Mehrotra
predictor-corrector and a dense Schur-complement factorization.

Optimality, primal infeasibility (dual improving ray) and dual infeasibility
(primal improving ray, i.e. an unbounded objective) are all read off the
embedding: tau stays bounded away from zero on solvable problems and the
ratio of tau to the iterate norms collapses on infeasible ones.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla


class Status(enum.Enum):
    OPTIMAL = "optimal"
    PRIMAL_INFEASIBLE = "primal_infeasible"
    DUAL_INFEASIBLE = "dual_infeasible"
    NUMERICAL_FAILURE = "numerical_failure"


@dataclass
class StandardConic:
    psd_dims: list[int]
    lp_dim: int
    A_psd: list[np.ndarray]  # per block: (m, t, t), symmetric slices
    A_lp: np.ndarray         # (m, q)
    b: np.ndarray            # (m,)
    C_psd: list[np.ndarray]
    c_lp: np.ndarray

    @property
    def m(self) -> int:
        return len(self.b)


@dataclass
class RawResult:
    status: Status
    Xp: list[np.ndarray]
    Xl: np.ndarray
    y: np.ndarray
    Sp: list[np.ndarray]
    Sl: np.ndarray
    tau: float
    kappa: float
    iterations: int
    info: dict = field(default_factory=dict)


# -- block-vector helpers ----------------------------------------------------


def _inner(Up, ul, Vp, vl) -> float:
    v = float(ul @ vl) if ul.size else 0.0
    for U, V in zip(Up, Vp):
        v += float(np.tensordot(U, V))
    return v


def _norm(Up, ul) -> float:
    return math.sqrt(max(_inner(Up, ul, Up, ul), 0.0))


def _apply_A(sc: StandardConic, Up, ul) -> np.ndarray:
    out = sc.A_lp @ ul if sc.lp_dim else np.zeros(sc.m)
    for A, U in zip(sc.A_psd, Up):
        out = out + np.tensordot(A, U, axes=([1, 2], [0, 1]))
    return out

def _apply_At(sc: StandardConic, y: np.ndarray):
    Up = [np.tensordot(y, A, axes=(0, 0)) for A in sc.A_psd]
    ul = sc.A_lp.T @ y if sc.lp_dim else np.zeros(0)
    return Up, ul


def _chol_psd(M: np.ndarray) -> np.ndarray:
    """Cholesky with an eigenvalue-clipping fallback for near-singular input."""
    try:
        return np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        w, V = np.linalg.eigh((M + M.T) / 2.0)
        floor = max(np.abs(w).max(), 1.0) * 1e-14
        w = np.maximum(w, floor)
        return np.linalg.cholesky((V * w) @ V.T)


@dataclass
class _Scaling:
    R: list[np.ndarray]
    Rinv: list[np.ndarray]
    lam: list[np.ndarray]      # per-block scaled spectra
    w_lp: np.ndarray           # sqrt(x/s)
    lam_lp: np.ndarray         # sqrt(x*s)


def _nt_scaling(Xp, Sp, Xl, Sl) -> _Scaling:
    Rs, Rinvs, lams = [], [], []
    for X, S in zip(Xp, Sp):
        Lx = _chol_psd(X)
        Ls = _chol_psd(S)
        U, lam, Vt = np.linalg.svd(Ls.T @ Lx)
        lam = np.maximum(lam, 1e-150)
        R = (Lx @ Vt.T) * (lam ** -0.5)[None, :]
        Rinv = (R.T @ S) / lam[:, None]
        Rs.append(R)
        Rinvs.append(Rinv)
        lams.append(lam)
    w = np.sqrt(Xl / Sl) if Xl.size else np.zeros(0)
    lam_lp = np.sqrt(Xl * Sl) if Xl.size else np.zeros(0)
    return _Scaling(Rs, Rinvs, lams, w, lam_lp)


def _hmap(sc: StandardConic, scal: _Scaling, Up, ul):
    """W U W per PSD block and w^2 * u on the LP part."""
    outp = []
    for R, U in zip(scal.R, Up):
        outp.append(R @ (R.T @ U @ R) @ R.T)
    outl = scal.w_lp**2 * ul if ul.size else np.zeros(0)
    return outp, outl


@dataclass
class _Direction:
    dXp: list[np.ndarray]
    dXl: np.ndarray
    dy: np.ndarray
    dSp: list[np.ndarray]
    dSl: np.ndarray
    dtau: float
    dkappa: float
    dXhat: list[np.ndarray]
    dShat: list[np.ndarray]
    dxl_hat: np.ndarray
    dsl_hat: np.ndarray


def _direction(sc, scal, solver, q2, hCp, hCl, g, cHc, tau, kappa,
               Rp, Rdp, Rdl, Rg, eta, Rc, rc_lp, rc_tk) -> _Direction:
    # Dc = R (Gamma o Rc) R^T;  Gamma_ij = 2/(lam_i + lam_j)
    Dcp, GRc = [], []
    for R, lam, Rcb in zip(scal.R, scal.lam, Rc):
        G = 2.0 / np.add.outer(lam, lam)
        GRcb = G * Rcb
        GRc.append(GRcb)
        Dcp.append(R @ GRcb @ R.T)
    GRc_lp = rc_lp / scal.lam_lp if rc_lp.size else np.zeros(0)
    Dcl = scal.w_lp * GRc_lp if rc_lp.size else np.zeros(0)

    hRdp, hRdl = _hmap(sc, scal, Rdp, Rdl)
    r1 = -eta * Rp - _apply_A(sc, Dcp, Dcl) - eta * _apply_A(sc, hRdp, hRdl)
    q1 = solver(r1)

    c_dot_Dc = _inner(sc.C_psd, sc.c_lp, Dcp, Dcl)
    c_dot_hRd = _inner(sc.C_psd, sc.c_lp, hRdp, hRdl)
    e1 = -eta * Rg + c_dot_Dc + eta * c_dot_hRd + rc_tk / tau
    v = sc.b - g
    denom = float(v @ q2) + cHc + kappa / tau
    dtau = (e1 - float(v @ q1)) / denom
    dy = q1 + dtau * q2

    Atdyp, Atdyl = _apply_At(sc, dy)
    dSp = [-eta * Rd - Atdy + dtau * C
           for Rd, Atdy, C in zip(Rdp, Atdyp, sc.C_psd)]
    dSl = -eta * Rdl - Atdyl + dtau * sc.c_lp

    dShat = [R.T @ dS @ R for R, dS in zip(scal.R, dSp)]
    dXhat = [GRcb - dSh for GRcb, dSh in zip(GRc, dShat)]
    dXp = [R @ dXh @ R.T for R, dXh in zip(scal.R, dXhat)]
    dXp = [(D + D.T) / 2.0 for D in dXp]

    dsl_hat = scal.w_lp * dSl if dSl.size else np.zeros(0)
    dxl_hat = GRc_lp - dsl_hat
    dXl = scal.w_lp * dxl_hat if dxl_hat.size else np.zeros(0)

    dkappa = (rc_tk - kappa * dtau) / tau
    return _Direction(dXp, dXl, dy, dSp, dSl, float(dtau), float(dkappa),
                      dXhat, dShat, dxl_hat, dsl_hat)


def _max_step(scal: _Scaling, d: _Direction, tau, kappa) -> float:
    alpha = math.inf

    def bound(lams, Mhat):
        T = Mhat / np.sqrt(lams)[:, None] / np.sqrt(lams)[None, :]
        emin = float(np.linalg.eigvalsh((T + T.T) / 2.0)[0])
        return math.inf if emin >= 0.0 else 1.0 / (-emin)

    for lam, dXh, dSh in zip(scal.lam, d.dXhat, d.dShat):
        alpha = min(alpha, bound(lam, dXh), bound(lam, dSh))
    for lam, dh in ((scal.lam_lp, d.dxl_hat), (scal.lam_lp, d.dsl_hat)):
        if lam.size:
            neg = dh < 0
            if np.any(neg):
                alpha = min(alpha, float(np.min(lam[neg] / -dh[neg])))
    if d.dtau < 0:
        alpha = min(alpha, tau / -d.dtau)
    if d.dkappa < 0:
        alpha = min(alpha, kappa / -d.dkappa)
    return alpha


def solve_standard(sc: StandardConic, opts) -> RawResult:
    dims = sc.psd_dims
    m = sc.m
    nu = sum(dims) + sc.lp_dim
    if nu == 0:
        # no cone variables: the problem is about y alone; not meaningful here
        return RawResult(Status.OPTIMAL, [], np.zeros(0), np.zeros(m),
                         [], np.zeros(0), 1.0, 0.0, 0, {})

    Xp = [np.eye(t) for t in dims]
    Sp = [np.eye(t) for t in dims]
    Xl = np.ones(sc.lp_dim)
    Sl = np.ones(sc.lp_dim)
    y = np.zeros(m)
    tau, kappa = 1.0, 1.0

    norm_b = 1.0 + float(np.linalg.norm(sc.b))
    norm_C = 1.0 + _norm(sc.C_psd, sc.c_lp)

    trace: list[dict] = []
    info: dict = {}
    status = Status.NUMERICAL_FAILURE
    inf_count = 0
    stall = 0
    floor_count = 0
    it = 0
    mu = 1.0

    for it in range(1, opts.max_iter + 1):
        Atyp, Atyl = _apply_At(sc, y)
        Rp = _apply_A(sc, Xp, Xl) - tau * sc.b
        Rdp = [Aty + S - tau * C for Aty, S, C in zip(Atyp, Sp, sc.C_psd)]
        Rdl = Atyl + Sl - tau * sc.c_lp
        cx = _inner(sc.C_psd, sc.c_lp, Xp, Xl)
        by = float(sc.b @ y)
        Rg = by - cx - kappa
        xs = _inner(Xp, Xl, Sp, Sl)
        mu = (xs + tau * kappa) / (nu + 1)

        pobj = cx / tau
        dobj = by / tau
        rel_p = float(np.linalg.norm(Rp)) / (tau * norm_b)
        rel_d = _norm(Rdp, Rdl) / (tau * norm_C)
        cgap = xs / tau**2
        if opts.trace or opts.verbose:
            rec = dict(it=it, mu=mu, pobj=pobj, dobj=dobj, rel_p=rel_p,
                       rel_d=rel_d, tau=tau, kappa=kappa)
            trace.append(rec)
            if opts.verbose:
                print(f"[ipm] {it:3d} mu={mu:9.2e} p={pobj:+.6e} d={dobj:+.6e} "
                      f"rp={rel_p:7.1e} rd={rel_d:7.1e} tau={tau:7.1e}")

        gap_ok = cgap <= opts.gap_tol * (1.0 + abs(pobj) + abs(dobj))
        if rel_p <= opts.feas_tol and rel_d <= opts.feas_tol and gap_ok:
            status = Status.OPTIMAL
            break
        # numerical floor: residual reduction has stopped while everything
        # sits within a small factor of its target
        near = max(rel_p / opts.feas_tol, rel_d / opts.feas_tol,
                   cgap / (opts.gap_tol * (1.0 + abs(pobj) + abs(dobj))))
        floor_count = floor_count + 1 if near <= 50.0 else 0
        if floor_count >= 8:
            status = Status.OPTIMAL
            info["stalled_near_tolerance"] = near
            break

        iter_norm = max(1.0, _norm(Xp, Xl) + _norm(Sp, Sl)
                        + float(np.linalg.norm(y)) + kappa)
        inf_count = inf_count + 1 if tau <= opts.inf_tol * iter_norm else 0
        if inf_count >= opts.inf_consecutive:
            if by > 0.0:
                status = Status.PRIMAL_INFEASIBLE
                info["ray_y"] = y / by
                info["ray_Sp"] = [S / by for S in Sp]
                info["ray_Sl"] = Sl / by
            elif cx < 0.0:
                status = Status.DUAL_INFEASIBLE
                info["ray_Xp"] = [X / -cx for X in Xp]
                info["ray_Xl"] = Xl / -cx
            else:
                status = Status.NUMERICAL_FAILURE
            break

        try:
            scal = _nt_scaling(Xp, Sp, Xl, Sl)
        except np.linalg.LinAlgError:
            status = Status.NUMERICAL_FAILURE
            break

        # Schur complement M = A W A^T over both cone parts
        M = np.zeros((m, m))
        if m:
            for R, A in zip(scal.R, sc.A_psd):
                T = R.T[None, :, :] @ A @ R[None, :, :]
                V = np.ascontiguousarray(T.reshape(m, -1))
                M += sla.blas.dsyrk(1.0, V, lower=1)
            if sc.lp_dim:
                M += (sc.A_lp * scal.w_lp[None, :] ** 2) @ sc.A_lp.T
            M = np.tril(M) + np.tril(M, -1).T

        solver = None
        if m:
            jitter = 0.0
            base = max(np.trace(M) / m, 1.0)
            for attempt in range(4):
                try:
                    cf = sla.cho_factor(M + jitter * np.eye(m), lower=True)

                    def solver(r, cf=cf, M=M):
                        # one pass of iterative refinement counters the
                        # Schur conditioning near degenerate optima
                        q = sla.cho_solve(cf, r)
                        q += sla.cho_solve(cf, r - M @ q)
                        return q

                    break
                except np.linalg.LinAlgError:
                    jitter = base * 10.0 ** (-14 + 2 * attempt)
            if solver is None:
                status = Status.NUMERICAL_FAILURE
                break
        else:
            solver = lambda r: r

        hCp, hCl = _hmap(sc, scal, sc.C_psd, sc.c_lp)
        g = _apply_A(sc, hCp, hCl)
        cHc = _inner(sc.C_psd, sc.c_lp, hCp, hCl)
        q2 = solver(g + sc.b)

        # predictor
        Rc_aff = [-np.diag(lam**2) for lam in scal.lam]
        rc_lp_aff = -scal.lam_lp**2
        d_aff = _direction(sc, scal, solver, q2, hCp, hCl, g, cHc, tau, kappa,
                           Rp, Rdp, Rdl, Rg, 1.0, Rc_aff, rc_lp_aff,
                           -tau * kappa)
        a_aff = min(1.0, _max_step(scal, d_aff, tau, kappa))
        gap_aff = 0.0
        for lam, dXh, dSh in zip(scal.lam, d_aff.dXhat, d_aff.dShat):
            Lh = np.diag(lam)
            gap_aff += float(np.tensordot(Lh + a_aff * dXh, Lh + a_aff * dSh))
        if scal.lam_lp.size:
            gap_aff += float((scal.lam_lp + a_aff * d_aff.dxl_hat)
                             @ (scal.lam_lp + a_aff * d_aff.dsl_hat))
        gap_aff += (tau + a_aff * d_aff.dtau) * (kappa + a_aff * d_aff.dkappa)
        mu_aff = max(gap_aff, 0.0) / (nu + 1)
        sigma = min(1.0, max((mu_aff / mu) ** 3, 0.0))

        # corrector
        Rc = []
        for lam, dXh, dSh in zip(scal.lam, d_aff.dXhat, d_aff.dShat):
            cross = (dXh @ dSh + dSh @ dXh) / 2.0
            Rc.append(sigma * mu * np.eye(len(lam)) - np.diag(lam**2) - cross)
        rc_lp = (sigma * mu - scal.lam_lp**2 - d_aff.dxl_hat * d_aff.dsl_hat
                 if scal.lam_lp.size else np.zeros(0))
        rc_tk = sigma * mu - tau * kappa - d_aff.dtau * d_aff.dkappa
        d = _direction(sc, scal, solver, q2, hCp, hCl, g, cHc, tau, kappa,
                       Rp, Rdp, Rdl, Rg, 1.0 - sigma, Rc, rc_lp, rc_tk)
        alpha = min(1.0, opts.step_frac * _max_step(scal, d, tau, kappa))

        if not math.isfinite(alpha) or alpha <= 1e-10:
            stall += 1
            if stall >= 3:
                status = Status.NUMERICAL_FAILURE
                break
            alpha = max(alpha, 0.0)
        else:
            stall = 0

        Xp = [(X + alpha * dX + (X + alpha * dX).T) / 2.0
              for X, dX in zip(Xp, d.dXp)]
        Sp = [(S + alpha * dS + (S + alpha * dS).T) / 2.0
              for S, dS in zip(Sp, d.dSp)]
        if sc.lp_dim:
            Xl = Xl + alpha * d.dXl
            Sl = Sl + alpha * d.dSl
        y = y + alpha * d.dy
        tau += alpha * d.dtau
        kappa += alpha * d.dkappa
    else:
        status = Status.NUMERICAL_FAILURE

    info["mu"] = mu
    info["trace"] = trace
    info["final"] = dict(tau=tau, kappa=kappa)
    return RawResult(status, Xp, Xl, y, Sp, Sl, tau, kappa, it, info)
