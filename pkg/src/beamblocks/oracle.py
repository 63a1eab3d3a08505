"""Brute-force Newton solver on the full truncated mode set.

This is the independent check on the staged machinery: no clustering, no
band split, no conjugation — just G(u) = 0 solved by damped Newton with the
exact Hermitian Jacobian L - eps M(d2F).  Both solvers call the shared
pde_residual routine, so agreement between them is agreement about the same
equation, not about two private discretizations.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .beam import multiplier_vector
from .errors import OracleError
from .fields import FourierField, sobolev_norm
from .nonlin import mult_matrix, pde_residual, second_derivative_field
from .problem import Workspace

_SINGULAR_REL = 1e-10
_MIN_DAMPING = 1e-8


@dataclass
class NewtonInfo:
    residuals: list = field(default_factory=list)
    steps: list = field(default_factory=list)       # damping factor used per step
    final_residual: float = np.inf
    iterations: int = 0


def _residual_vec(u: FourierField, ws: Workspace, f: FourierField) -> np.ndarray:
    r = pde_residual(u, ws.sym, ws.spec, ws.cfg.eps, f)
    return ws.allbasis.gather(r)


def _jacobian(u: FourierField, ws: Workspace, L: np.ndarray) -> np.ndarray:
    d2 = second_derivative_field(u, ws.spec)
    J = np.diag(L.astype(complex)) - ws.cfg.eps * mult_matrix(d2, ws.allbasis)
    return J


def newton_solve(ws: Workspace, f: FourierField, u_init: FourierField | None = None,
                 tol: float = 1e-12, max_iter: int = 50):
    """Damped Newton on the gathered coefficient vector.

    Returns (u, NewtonInfo).  Raises OracleError when the Jacobian is
    numerically singular (reporting the offending smallest eigenvalue) or
    when line-search damping shrinks below 1e-8 without reducing |G|.
    """
    basis = ws.allbasis
    L = multiplier_vector(ws.sym, basis)
    u = ws.zeros() if u_init is None else u_init.copy()
    u = u.symmetrized()
    info = NewtonInfo()

    g = _residual_vec(u, ws, f)
    ng = float(np.linalg.norm(g))
    info.residuals.append(ng)
    for it in range(max_iter):
        if ng <= tol:
            break
        J = _jacobian(u, ws, L)
        evs = np.abs(scipy.linalg.eigvalsh(J))
        if evs.min() < _SINGULAR_REL * max(evs.max(), 1.0):
            raise OracleError(
                f"Jacobian numerically singular at Newton step {it}: "
                f"min |eig| = {evs.min():.3e} (max {evs.max():.3e})")
        step = scipy.linalg.solve(J, -g, assume_a="her")
        t = 1.0
        while True:
            trial = u.copy()
            trial.coeffs = u.coeffs + t * basis.scatter(step).coeffs
            trial = trial.symmetrized()
            g_trial = _residual_vec(trial, ws, f)
            ng_trial = float(np.linalg.norm(g_trial))
            if ng_trial <= (1.0 - 1e-4 * t) * ng:
                break
            t *= 0.5
            if t < _MIN_DAMPING:
                raise OracleError(
                    f"Newton line search failed at step {it}: residual {ng:.3e} "
                    f"not reduced even at damping {2*t:.1e}")
        u, g, ng = trial, g_trial, ng_trial
        info.residuals.append(ng)
        info.steps.append(t)
        info.iterations = it + 1
    else:
        raise OracleError(
            f"Newton did not reach |G| <= {tol:.1e} in {max_iter} iterations "
            f"(final {ng:.3e})")

    info.final_residual = ng
    return u, info


def oracle_residual(u: FourierField, ws: Workspace, f: FourierField,
                    sigma: float = 0.0) -> float:
    return sobolev_norm(pde_residual(u, ws.sym, ws.spec, ws.cfg.eps, f), sigma)


def jacobian_fd_check(ws: Workspace, f: FourierField, u: FourierField,
                      n_dirs: int = 5, h: float = 1e-6, seed: int = 0) -> float:
    """Max relative error of J v against a central difference of G, over
    random real directions v.  Analytic Jacobian bug -> this blows up."""
    basis = ws.allbasis
    L = multiplier_vector(ws.sym, basis)
    J = _jacobian(u, ws, L)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_dirs):
        v = basis.symmetrize_vec(
            rng.standard_normal(basis.size) + 1j * rng.standard_normal(basis.size))
        vf = basis.scatter(v).symmetrized()
        v = basis.gather(vf)
        up, um = u.copy(), u.copy()
        up.coeffs = u.coeffs + h * vf.coeffs
        um.coeffs = u.coeffs - h * vf.coeffs
        fd = (_residual_vec(up, ws, f) - _residual_vec(um, ws, f)) / (2.0 * h)
        Jv = J @ v
        denom = max(float(np.linalg.norm(Jv)), 1e-14)
        worst = max(worst, float(np.linalg.norm(fd - Jv)) / denom)
    return worst
