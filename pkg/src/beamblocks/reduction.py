"""Finite-band reduction: solve the coercive modes, leave the resonant band.

On the f modes the beam operator is boundedly invertible uniformly in omega,
so given any h-band iterate u1 the f-band component is recovered by a small
fixed point: writing u2 = eps L^-1 f2 + eps w2, the f-band equation becomes

    w2 = L^-1 P_F  d_z F(., u1 + eps L^-1 f2 + eps w2)

whose Picard map contracts with factor O(eps).  The h-band equation with u2
eliminated is what the block reduction then solves; reduced_residual measures
exactly that remaining h-band defect through the shared equation routine.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .beam import BeamSymbol, invert_on_f
from .errors import NonContractionError
from .fields import BandSplit, FourierField, project_f, project_h, sobolev_norm
from .nonlin import Nonlinearity, grad_phi2, pde_residual

#: consecutive Picard ratio threshold that counts as "not contracting"
RATIO_LIMIT = 0.95
RATIO_STRIKES = 5


def split_forcing(f: FourierField, bs: BandSplit):
    """(f1, f2): h-band and f-band parts of the forcing."""
    return project_h(f, bs), project_f(f, bs)


def solve_f_band(u1: FourierField, f2: FourierField, sym: BeamSymbol,
                 bs: BandSplit, spec: Nonlinearity, eps: float,
                 tol: float = 1e-13, max_iter: int = 60,
                 w_init: FourierField | None = None):
    """Picard-solve the f-band fixed point; returns (w2, contraction ratios).

    Raises NonContractionError when the update ratio stays above 0.95 for
    five consecutive sweeps or the iteration budget is exhausted before the
    update norm reaches tol.
    """
    Lf2 = invert_on_f(sym, bs, f2)
    w = w_init.copy() if w_init is not None else FourierField.zeros(u1.d, u1.J_max, u1.N_max)
    ratios = []
    prev_step = None
    strikes = 0
    for _ in range(max_iter):
        u_full = u1.copy()
        u_full.coeffs = u1.coeffs + eps * Lf2.coeffs + eps * w.coeffs
        w_new = invert_on_f(sym, bs, project_f(grad_phi2(u_full, spec, eps), bs))
        step_field = FourierField(w.d, w.J_max, w.N_max, w_new.coeffs - w.coeffs)
        step = sobolev_norm(step_field, 0.0)
        if prev_step is not None and prev_step > 0:
            r = step / prev_step
            ratios.append(r)
            strikes = strikes + 1 if r >= RATIO_LIMIT else 0
            if strikes >= RATIO_STRIKES:
                raise NonContractionError(
                    f"f-band fixed point not contracting: last ratios "
                    f"{[f'{x:.3f}' for x in ratios[-RATIO_STRIKES:]]}")
        w = w_new
        prev_step = step
        if step <= tol:
            return w, ratios
    raise NonContractionError(
        f"f-band fixed point missed tol={tol:.1e} in {max_iter} sweeps "
        f"(last update {prev_step:.3e})")


@dataclass
class ReducedProblem:
    """The h-band problem with the f band eliminated at iterate u1."""

    u1: FourierField
    f1: FourierField
    f2: FourierField
    G_state: FourierField          # the solved fixed-point state w2
    eps: float
    omega: float
    sym: BeamSymbol = field(repr=False, default=None)
    bs: BandSplit = field(repr=False, default=None)
    spec: Nonlinearity = field(repr=False, default=None)
    ratios: list = field(default_factory=list)

    @property
    def w2(self) -> FourierField:
        return self.G_state

    def u2(self) -> FourierField:
        """Recovered f-band component: eps L^-1 f2 + eps w2."""
        Lf2 = invert_on_f(self.sym, self.bs, self.f2)
        out = Lf2.copy()
        out.coeffs = self.eps * (Lf2.coeffs + self.G_state.coeffs)
        return out

    def full_field(self) -> FourierField:
        out = self.u1.copy()
        out.coeffs = self.u1.coeffs + self.u2().coeffs
        return out


def reduce_at(u1: FourierField, f: FourierField, sym: BeamSymbol, bs: BandSplit,
              spec: Nonlinearity, eps: float, tol: float = 1e-13,
              max_iter: int = 60, w_init: FourierField | None = None) -> ReducedProblem:
    """Split the forcing and solve the f band at the h-band iterate u1."""
    f1, f2 = split_forcing(f, bs)
    w2, ratios = solve_f_band(u1, f2, sym, bs, spec, eps,
                              tol=tol, max_iter=max_iter, w_init=w_init)
    return ReducedProblem(u1=u1, f1=f1, f2=f2, G_state=w2, eps=eps,
                          omega=sym.omega, sym=sym, bs=bs, spec=spec, ratios=ratios)


def reduced_residual(rp: ReducedProblem) -> float:
    """H^0 norm of the h-band equation residual at u1 + u2(u1).

    Uses the same pde_residual routine as every other solver; at an exact
    solution of the full equation this vanishes to the f-band solve tolerance.
    """
    f = rp.f1.copy()
    f.coeffs = rp.f1.coeffs + rp.f2.coeffs
    r = pde_residual(rp.full_field(), rp.sym, rp.spec, rp.eps, f)
    return sobolev_norm(project_h(r, rp.bs), 0.0)


def f_band_residual(rp: ReducedProblem) -> float:
    """H^0 norm of the f-band equation residual (the solved part)."""
    f = rp.f1.copy()
    f.coeffs = rp.f1.coeffs + rp.f2.coeffs
    r = pde_residual(rp.full_field(), rp.sym, rp.spec, rp.eps, f)
    return sobolev_norm(project_f(r, rp.bs), 0.0)
