"""Composition nonlinearities, their averaged potential, and para splitting.

The forcing-side nonlinearity F(t, x, z) enters the equation through the
gradient of the space-time average Phi2(u) = integral of F(t, x, u(t,x)).
Every catalog entry vanishes to third order at z = 0 and factors exactly as

    d_z F(t, x, z) = g(t, x, z) * z ,

so the linearized coupling around an iterate u is the multiplication operator
by the "symbol" g(., u).  Its matrix on a mode basis splits into

  * a spatially quasi-diagonal part (|n - n'| <= (|n| + |n'|)/10), which is
    the potential V fed to the block reduction (with the sign that moves it
    to the left-hand side of the equation), and
  * a smoothing remainder Rt whose coefficients live far off the spatial
    diagonal and which gains derivatives (checked by smoothing_decay).

Compositions are evaluated on padded uniform grids sized so that every
product analyzed back onto the working window is alias-free, i.e. the
computed coefficients are exact up to roundoff.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import svdvals

from .beam import BeamSymbol, apply_beam
from .fields import (FourierField, ModeBasis, TWO_PI, analyze, grid_sizes,
                     norm_const, sobolev_weight_array, synthesize)

#: fraction of (|n| + |n'|) below which a coupling counts as para/quasi-diagonal
PARA_FRACTION = 0.1


@dataclass(frozen=True)
class Nonlinearity:
    """A catalog entry.  The callables receive broadcastable angle grids
    (t, xs) and the field values z; pad is the dealiasing factor that makes
    every composition used by the pipeline exact on the padded grid."""

    name: str
    pad: int
    F: callable
    dF: callable
    d2F: callable
    gfactor: callable  # d_z F = gfactor * z, exactly


def _catalog() -> dict:
    z4 = Nonlinearity(
        name="z4", pad=2,
        F=lambda t, xs, z: 0.25 * z**4,
        dF=lambda t, xs, z: z**3,
        d2F=lambda t, xs, z: 3.0 * z**2,
        gfactor=lambda t, xs, z: z**2,
    )
    z5 = Nonlinearity(
        name="z5", pad=3,
        F=lambda t, xs, z: 0.2 * z**5,
        dF=lambda t, xs, z: z**4,
        d2F=lambda t, xs, z: 4.0 * z**3,
        gfactor=lambda t, xs, z: z**3,
    )

    def _amp(t, xs):
        return np.cos(t) * np.cos(xs[0])

    cos_z3 = Nonlinearity(
        name="cos_z3", pad=2,
        F=lambda t, xs, z: _amp(t, xs) * z**3 / 3.0,
        dF=lambda t, xs, z: _amp(t, xs) * z**2,
        d2F=lambda t, xs, z: 2.0 * _amp(t, xs) * z,
        gfactor=lambda t, xs, z: _amp(t, xs) * z,
    )
    return {f.name: f for f in (z4, z5, cos_z3)}


CATALOG = _catalog()


def get_nonlinearity(name: str) -> Nonlinearity:
    try:
        return CATALOG[name]
    except KeyError:
        raise ValueError(
            f"unknown nonlinearity {name!r}; available: {sorted(CATALOG)}") from None


def angle_grids(d: int, Mt: int, Mx: int):
    """Broadcastable uniform angle grids (t, [x_1, .., x_d])."""
    t = (TWO_PI * np.arange(Mt) / Mt).reshape((-1,) + (1,) * d)
    xs = []
    for ax in range(d):
        sh = [1] * (d + 1)
        sh[ax + 1] = Mx
        xs.append((TWO_PI * np.arange(Mx) / Mx).reshape(sh))
    return t, xs


def _padded_values(u: FourierField, spec: Nonlinearity):
    Mt, Mx = grid_sizes(u.J_max, u.N_max, spec.pad)
    t, xs = angle_grids(u.d, Mt, Mx)
    return t, xs, synthesize(u, Mt, Mx)


def phi2_value(u: FourierField, spec: Nonlinearity, eps: float = 0.0) -> float:
    """Phi2(u) = integral of F(t, x, u) over T^(d+1), by exact quadrature."""
    t, xs, z = _padded_values(u, spec)
    return float(TWO_PI ** (u.d + 1) * np.mean(spec.F(t, xs, z)))


def grad_phi2(u: FourierField, spec: Nonlinearity, eps: float = 0.0) -> FourierField:
    """L2 gradient of Phi2 at u: the field d_z F(., u), truncated to u's window.

    eps is accepted for interface uniformity; the catalog entries do not
    depend on it.
    """
    t, xs, z = _padded_values(u, spec)
    return analyze(spec.dF(t, xs, z), u.J_max, u.N_max)


def multiplier_field(u: FourierField, spec: Nonlinearity, eps: float = 0.0) -> FourierField:
    """Exact coefficients of the symbol g(., u) on the doubled window.

    The doubled window (2 J_max, 2 N_max) covers every frequency difference
    between two truncated modes, which is all a multiplication matrix reads.
    """
    t, xs, z = _padded_values(u, spec)
    return analyze(spec.gfactor(t, xs, z), 2 * u.J_max, 2 * u.N_max)


def second_derivative_field(u: FourierField, spec: Nonlinearity, eps: float = 0.0) -> FourierField:
    """Exact coefficients of d2_z F(., u) on the doubled window (for Jacobians)."""
    t, xs, z = _padded_values(u, spec)
    return analyze(spec.d2F(t, xs, z), 2 * u.J_max, 2 * u.N_max)


def mult_matrix(gw: FourierField, rows: ModeBasis, cols: ModeBasis | None = None) -> np.ndarray:
    """Dense matrix of multiplication by the symbol with coefficients gw.

    Entry (p, q) is gw_hat(j_p - j_q, n_p - n_q) / (2 pi)^((d+1)/2); frequency
    differences outside gw's window contribute zero.  Hermitian whenever gw is
    the coefficient table of a real function and rows is cols.
    """
    cols = rows if cols is None else cols
    dj = rows.jarr[:, None] - cols.jarr[None, :]
    ok = np.abs(dj) <= gw.J_max
    idx = [np.clip(dj, -gw.J_max, gw.J_max) + gw.J_max]
    for ax in range(gw.d):
        dn = rows.narr[:, ax][:, None] - cols.narr[:, ax][None, :]
        ok &= np.abs(dn) <= gw.N_max
        idx.append(np.clip(dn, -gw.N_max, gw.N_max) + gw.N_max)
    flat = np.ravel_multi_index(tuple(i.ravel() for i in idx), gw.coeffs.shape)
    M = gw.coeffs.ravel()[flat].reshape(dj.shape).copy()
    M[~ok] = 0.0
    return M / norm_const(gw.d)


@dataclass
class SplitPotential:
    """Para/remainder splitting of the linearized coupling at an iterate.

    V is minus the quasi-diagonal part of the multiplication matrix (so the
    working equation reads (L + eps V) u = eps Rt u + eps f), Rt the far
    off-diagonal remainder; (-V) + Rt reassembles the full matrix exactly.
    """

    V: np.ndarray
    Rt: np.ndarray
    basis: ModeBasis
    g_wide: FourierField
    para_mask: np.ndarray


def para_split(u: FourierField, spec: Nonlinearity, eps: float,
               basis: ModeBasis) -> SplitPotential:
    """Split the coupling symbol at u into potential and smoothing remainder."""
    gw = multiplier_field(u, spec, eps)
    M = mult_matrix(gw, basis)
    absn = np.sqrt(basis.spatial_norm2())
    dn = np.sqrt(np.sum((basis.narr[:, None, :] - basis.narr[None, :, :]).astype(float) ** 2,
                        axis=2))
    mask = dn <= PARA_FRACTION * (absn[:, None] + absn[None, :])
    V = np.where(mask, -M, 0.0)
    Rt = np.where(mask, 0.0, M)
    return SplitPotential(V=V, Rt=Rt, basis=basis, g_wide=gw, para_mask=mask)


def smoothing_decay(Rt: np.ndarray, basis: ModeBasis, pairs) -> dict:
    """Operator norms of Rt from H^s to H^(s+r) for each (s, r) in pairs.

    Computed exactly as the largest singular value of W_(s+r) Rt W_s^-1 with
    the anisotropic Sobolev weights on the basis rows.  For a genuinely
    smoothing remainder these norms stay bounded as r grows through the
    gain window.
    """
    w = {}
    base = 1.0 + basis.jarr.astype(float) ** 2 + basis.spatial_norm2() ** 2
    out = {}
    for s, r in pairs:
        for sig in (s, s + r):
            if sig not in w:
                w[sig] = base ** (sig / 2.0)
        A = (w[s + r][:, None] * Rt) / w[s][None, :]
        sv = svdvals(A)
        out[(s, r)] = float(sv[0]) if sv.size else 0.0
    return out


def pde_residual(u: FourierField, sym: BeamSymbol, spec: Nonlinearity,
                 eps: float, f: FourierField) -> FourierField:
    """G(u) = (omega^2 d_tt + Delta^2 + m) u - eps d_z F(., u) - eps f.

    This single routine defines "the equation" for every solver in the
    package (staged reduction, finite-band fixed point, Newton oracle), so
    their residuals are comparable bit for bit.
    """
    out = apply_beam(sym, u)
    grad = grad_phi2(u, spec, eps)
    out.coeffs = out.coeffs - eps * grad.coeffs - eps * f.coeffs
    return out
