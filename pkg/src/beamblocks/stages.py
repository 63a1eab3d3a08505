"""Staged block-inversion iteration on the resonance band.

Stage k+1 refreshes every operator at the current iterate (f-band component,
coupling symbol, para split, conjugation), activates the dyadic shells up to
k+1, and solves

    (L + eps V_D) w_{k+1} = eps S_{k+1}[ W* Rt u_k + R1 w_k + W* f_eff ]

cluster by cluster, damping each shell-k' block inverse by (1 - psi_k') so
that excluded frequencies are never inverted near a resonance.  The new
iterate is u_{k+1} = W w_{k+1}.  The smoothing remainder Rt, the conjugation
remainder R1 and the f-band coupling all enter through the lagged right-hand
side, which is what makes each stage a plain linear solve.

f_eff = f1 + P_H(g u2) folds the cross-band coupling into the forcing slot:
at a fixed point, u = W w solves the exact h-band equation with the f band
eliminated, and the terminal re-solve plus shared-residual evaluation report
the defect of the *full* equation, not a surrogate.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .beam import multiplier_vector
from .errors import CutoffInconsistencyError, ExcludedFrequencyError, StagnationError
from .fields import (FourierField, analyze, grid_sizes, project_h,
                     sobolev_norm, synthesize)
from .nonlin import pde_residual
from .problem import Workspace
from .reduction import f_band_residual, reduce_at, reduced_residual
from .screening import BlockFamily, CutoffFamily, build_shell_cutoff

#: geometric decay exponent below which an unconverged run counts as stalled
STALL_EXPONENT = 0.1


def rhs_H(u_vec: np.ndarray, w_vec: np.ndarray, k_next: int, conj, Rt: np.ndarray,
          f_eff_vec: np.ndarray, basis) -> np.ndarray:
    """Stage right-hand side H_{k+1}, truncated to the active shells."""
    Wstar = conj.W.conj().T
    H = Wstar @ (Rt @ u_vec + f_eff_vec) + conj.R1 @ w_vec
    return np.where(basis.stage_mask(k_next), H, 0.0)


def block_solve_stage(H_vec: np.ndarray, family: BlockFamily, cutoffs: CutoffFamily,
                      k_next: int, delta: float, zeta: float, eps: float,
                      omega: float) -> np.ndarray:
    """w_{k+1}: damped per-cluster solves of the active blocks.

    A block is only inverted when its damping factor is positive, and then a
    consistency check re-screens it: inverting a block whose smallest
    |eigenvalue| undercuts delta <n(alpha)>^(-2 zeta) while psi claims the
    frequency is usable is a logic error, not a numerical issue.
    """
    basis = family.basis
    w = np.zeros_like(H_vec)
    for a in family.clusters():
        k_a = family.shell(a)
        if k_a > k_next:
            continue
        damp = cutoffs.damping(k_a, omega)
        if damp <= 0.0:
            continue
        min_abs = family.min_abs_eig(a, omega)
        thr = delta * family.rep_weight(a) ** (-2.0 * zeta)
        if min_abs < thr * (1.0 - 1e-9):
            raise CutoffInconsistencyError(
                f"cluster {a} (shell {k_a}) has min |eig| = {min_abs:.3e} below the "
                f"screen threshold {thr:.3e} at omega={omega}, yet its damping "
                f"factor is {damp:.3f} > 0")
        s = basis.slices[a]
        w[s] = damp * eps * family.solve_block(a, omega, H_vec[s])
    return w


def recover_u(w_vec: np.ndarray, conj) -> np.ndarray:
    """u = (Id + eps Q) w."""
    return conj.W @ w_vec


@dataclass
class StageRecord:
    k: int
    dw_norm: float
    du_norm: float
    residual: float


@dataclass
class SolverState:
    """Everything a finished (or aborted) run leaves behind."""

    cfg: object
    converged: bool
    k_final: int
    u: FourierField                 # h-band component
    rp: object                      # terminal ReducedProblem (holds u2)
    f: FourierField
    history: list
    cutoffs: CutoffFamily
    full_residual: float            # L2 norm of the full-equation residual
    full_residual_sigma: float      # same in the working Sobolev norm
    h_residual: float
    f_residual: float
    decay_rate: float | None
    diagnostics: dict = field(default_factory=dict)

    def full_field(self) -> FourierField:
        return self.rp.full_field()


def _coupling_forcing(ws: Workspace, sp, f1: FourierField, u2: FourierField) -> FourierField:
    """f_eff = f1 + P_H(g u2), with the product dealiased exactly."""
    cfg = ws.cfg
    Mt, Mx = grid_sizes(cfg.J_max, cfg.N_max, ws.spec.pad)
    gv = synthesize(sp.g_wide, Mt, Mx)
    u2v = synthesize(u2, Mt, Mx)
    prod = analyze(gv * u2v, cfg.J_max, cfg.N_max)
    out = project_h(prod, ws.bs)
    out.coeffs = f1.coeffs + out.coeffs
    return out


def _vec_norm(vec: np.ndarray, basis, sigma: float) -> float:
    w = (1.0 + basis.jarr.astype(float) ** 2 + basis.spatial_norm2() ** 2) ** (sigma / 2.0)
    return float(np.sqrt(np.sum((w * np.abs(vec)) ** 2)))


def run(ws: Workspace, f: FourierField | None = None) -> SolverState:
    """Execute the staged iteration until the step norm reaches tol_step.

    Refuses immediately (ExcludedFrequencyError) if omega falls inside a
    resonant interval of any shell as it activates.  An unconverged run whose
    step norms decay slower than 2^(-0.1) per stage raises StagnationError
    with the fitted exponent.
    """
    cfg = ws.cfg
    if f is None:
        f = ws.forcing()
    f.assert_real(1e-9)
    basis = ws.hbasis
    L = multiplier_vector(ws.sym, basis)
    eps, omega, delta, zeta = cfg.eps, cfg.omega, cfg.delta, cfg.zeta

    u_h = ws.zeros()
    w_vec = np.zeros(basis.size, dtype=complex)
    cutoffs = CutoffFamily(delta=delta, zeta=zeta, C0=ws.C0)
    history = []
    shells_present = sorted(set(int(s) for s in basis.shell)) if basis.size else []
    max_shell = min(shells_present[-1], cfg.k_max) if shells_present else 0

    rp = reduce_at(u_h, f, ws.sym, ws.bs, ws.spec, eps)
    converged = False
    k_final = 0
    for k_next in range(1, cfg.k_max + 1):
        u2 = rp.u2()
        U = u_h.copy()
        U.coeffs = u_h.coeffs + u2.coeffs
        sp = ws.split_at(U)
        conj = ws.conjugation_at(U, sp)
        fam = ws.family_at(U, conj=conj, sp=sp)

        for k_sh in shells_present:
            if k_sh <= k_next and k_sh not in cutoffs.shells:
                sc = build_shell_cutoff(fam, k_sh, delta, zeta, ws.C0)
                cutoffs.shells[k_sh] = sc
                iv = sc.contains(omega)
                if iv is not None:
                    raise ExcludedFrequencyError(omega, k_sh, iv)

        f_eff = _coupling_forcing(ws, sp, rp.f1, u2)
        H = rhs_H(basis.gather(u_h), w_vec, k_next, conj, sp.Rt,
                  basis.gather(f_eff), basis)
        w_next = block_solve_stage(H, fam, cutoffs, k_next, delta, zeta, eps, omega)
        w_next = basis.symmetrize_vec(w_next)
        u_next_vec = basis.symmetrize_vec(recover_u(w_next, conj))
        u_next = basis.scatter(u_next_vec)
        u_next.assert_real(1e-9)

        dw = _vec_norm(w_next - w_vec, basis, cfg.sigma)
        du = _vec_norm(u_next_vec - basis.gather(u_h), basis, cfg.sigma)
        rp = reduce_at(u_next, f, ws.sym, ws.bs, ws.spec, eps, w_init=rp.w2)
        res_field = pde_residual(rp.full_field(), ws.sym, ws.spec, eps, f)
        res = sobolev_norm(res_field, 0.0)
        history.append(StageRecord(k=k_next, dw_norm=dw, du_norm=du, residual=res))

        u_h, w_vec = u_next, w_next
        k_final = k_next
        if dw <= cfg.tol_step and (k_next >= max_shell or res <= cfg.tol_step):
            converged = True
            break

    dws = [r.dw_norm for r in history]
    decay = _fit_decay(dws)
    if not converged:
        if decay is None or decay < STALL_EXPONENT:
            raise StagnationError(
                f"staged iteration stalled: fitted per-stage decay exponent "
                f"{decay if decay is not None else float('nan'):.3f} < {STALL_EXPONENT} "
                f"after {k_final} stages (last step {dws[-1]:.3e})")

    res_field = pde_residual(rp.full_field(), ws.sym, ws.spec, eps, f)
    return SolverState(
        cfg=cfg, converged=converged, k_final=k_final, u=u_h, rp=rp, f=f,
        history=history, cutoffs=cutoffs,
        full_residual=sobolev_norm(res_field, 0.0),
        full_residual_sigma=sobolev_norm(res_field, cfg.sigma),
        h_residual=reduced_residual(rp), f_residual=f_band_residual(rp),
        decay_rate=decay,
        diagnostics={"conjugation_steps": cfg.N_diag})


def _fit_decay(dws) -> float | None:
    """Least-squares exponent q with dw_k ~ 2^(-q k), over positive steps."""
    pts = [(k, np.log2(v)) for k, v in enumerate(dws) if v > 0]
    if len(pts) < 2:
        return None
    x = np.array([p[0] for p in pts], dtype=float)
    y = np.array([p[1] for p in pts], dtype=float)
    x -= x.mean()
    slope = float(np.sum(x * (y - y.mean())) / np.sum(x * x))
    return -slope
