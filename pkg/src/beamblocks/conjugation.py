"""Block diagonalization of the potential by near-identity conjugation.

Couplings between different clusters are removed order by order in eps: each
step solves a homological equation against the spatial operator Delta^2 + m,
whose divisors |n|^4 - |n'|^4 are uniformly bounded below across distinct
clusters that the step actually couples (asserted, never assumed).  Only
cross-cluster couplings within the window |n - n'| <= c0 (|n| + |n'|)^rho are
solved for; the complement R_cut is far off-diagonal and is left to the
smoothing remainder.

The conjugated operator is re-expanded exactly:

    (Id + eps Q)^* (L + eps V) (Id + eps Q)  =  L + eps V_D - eps R1

with V_D the cluster-diagonal part.  V_D and R1 are *defined* by that
identity (no truncated expansions), so the bookkeeping error is pure
roundoff and is what the tests measure.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import HomologicalDivisorError
from .fields import ModeBasis

#: kept couplings whose spatial divisor is below this bound abort the solve
DIVISOR_FLOOR = 1e-6

#: default spatial width constant of the homological window
DEFAULT_C0 = 0.5


def cluster_block_mask(basis: ModeBasis) -> np.ndarray:
    """Boolean (B, B) mask of within-cluster entries."""
    ids = basis.cluster_ids
    return ids[:, None] == ids[None, :]


def split_diag(A: np.ndarray, basis: ModeBasis):
    """Split a matrix into its cluster-diagonal blocks and the rest."""
    mask = cluster_block_mask(basis)
    A_D = np.where(mask, A, 0.0)
    A_ND = np.where(mask, 0.0, A)
    return A_D, A_ND


def homological_window(basis: ModeBasis, c0: float, rho: float) -> np.ndarray:
    """Cross-cluster entries close enough in n to be solved for."""
    absn = np.sqrt(basis.spatial_norm2())
    dn = np.sqrt(np.sum(
        (basis.narr[:, None, :] - basis.narr[None, :, :]).astype(float) ** 2, axis=2))
    near = dn <= c0 * (absn[:, None] + absn[None, :]) ** rho
    return near & ~cluster_block_mask(basis)


def solve_homological(A_ND: np.ndarray, basis: ModeBasis, c0: float, rho: float):
    """Solve (Delta^2 + m) B - B (Delta^2 + m) = A_kept for B, splitting off R_cut.

    A_ND must vanish on cluster-diagonal blocks.  Entries inside the
    homological window are divided by the spatial divisor |n_p|^4 - |n_q|^4;
    entries outside it form R_cut.  Divisors of kept entries are checked
    against a hard floor — a kept pair with (near-)equal |n| is a partition
    defect and raises naming the pair.  For Hermitian input B is exactly
    anti-Hermitian (B^* == -B bit for bit).
    """
    mask_diag = cluster_block_mask(basis)
    if np.any(A_ND[mask_diag] != 0):
        raise ValueError("A_ND has nonzero within-cluster entries; split_diag it first")
    kept = homological_window(basis, c0, rho)
    n4 = basis.spatial_norm2() ** 2
    div = n4[:, None] - n4[None, :]
    bad = kept & (np.abs(div) < DIVISOR_FLOOR) & (A_ND != 0)
    if np.any(bad):
        i, jj = np.argwhere(bad)[0]
        raise HomologicalDivisorError(
            f"kept coupling between modes {basis.modes[i]} and {basis.modes[jj]} has "
            f"spatial divisor {div[i, jj]:.3e} below {DIVISOR_FLOOR:.0e}; "
            "these clusters are not divisor-separated")
    B = np.zeros_like(A_ND)
    active = kept & (A_ND != 0)
    B[active] = A_ND[active] / div[active]
    R_cut = np.where(kept, 0.0, A_ND)
    return B, R_cut


@dataclass
class StepDiagnostics:
    step: int
    offdiag_before: float
    offdiag_after: float
    cutoff_mass: float
    min_divisor: float


@dataclass
class ConjugationResult:
    """Outcome of N_diag conjugation steps.

    W = Id + eps Q is the accumulated transformation; V_D (cluster diagonal)
    and R1 (cluster off-diagonal) satisfy
    W^* (L + eps V) W == L + eps V_D - eps R1 up to roundoff, by definition.
    """

    basis: ModeBasis
    eps: float
    N_diag: int
    c0: float
    rho: float
    W: np.ndarray
    Q: np.ndarray
    V_D: np.ndarray
    R1: np.ndarray
    diagnostics: list

    def conjugated(self, L_vec: np.ndarray, V: np.ndarray) -> np.ndarray:
        """Recompute W^* (L + eps V) W (for independent bookkeeping checks)."""
        op = np.diag(L_vec.astype(complex)) + self.eps * V
        T = self.W.conj().T @ op @ self.W
        return 0.5 * (T + T.conj().T)


def _frob_offdiag(A: np.ndarray, mask_diag: np.ndarray) -> float:
    return float(np.linalg.norm(np.where(mask_diag, 0.0, A)))


def conjugate_once(L_vec: np.ndarray, V: np.ndarray, eps: float, basis: ModeBasis,
                   c0: float = DEFAULT_C0, rho: float | None = None):
    """One conjugation step; returns (B, V_next, diagnostics).

    B is the anti-Hermitian generator (the transformation is Id - eps B ...
    precisely Id + eps Q1 with Q1 = -B), V_next the full potential of the
    conjugated operator, so that L + eps V_next == (Id+eps Q1)^* (L+eps V)(Id+eps Q1).
    """
    res = diagonalize(L_vec, V, eps, 1, basis, c0=c0, rho=rho)
    V_next = res.V_D - res.R1  # full potential: T = L + eps(V_D - R1)
    d = res.diagnostics[0]
    return res.Q, V_next, d


def diagonalize(L_vec: np.ndarray, V: np.ndarray, eps: float, N_diag: int,
                basis: ModeBasis, c0: float = DEFAULT_C0,
                rho: float | None = None) -> ConjugationResult:
    """Run N_diag conjugation steps and return exact bookkeeping.

    Each step solves the homological equation for the *current* conjugated
    potential (recomputed from the original V with the accumulated W, not by
    truncated expansion), then multiplies the accumulated transformation.
    eps = 0 or N_diag = 0 degenerate to W = Id with V_D/R1 read off V itself.
    """
    if rho is None:
        rho = basis_rho(basis)
    B = basis.size
    mask_diag = cluster_block_mask(basis)
    L = np.diag(L_vec.astype(complex))
    W = np.eye(B, dtype=complex)
    diagnostics = []
    off_before = _frob_offdiag(eps * V, mask_diag)
    if eps != 0.0:
        for step in range(1, N_diag + 1):
            T = W.conj().T @ (L + eps * V) @ W
            T = 0.5 * (T + T.conj().T)
            V_cur = (T - L) / eps
            _, V_nd = split_diag(V_cur, basis)
            Bgen, R_cut = solve_homological(V_nd, basis, c0, rho)
            # generator scaled by eps: [Delta^2+m, -eps*Bgen] = -eps*(kept part)
            step_W = np.eye(B, dtype=complex) - eps * Bgen
            W = W @ step_W
            T_after = W.conj().T @ (L + eps * V) @ W
            T_after = 0.5 * (T_after + T_after.conj().T)
            kept = homological_window(basis, c0, rho)
            n4 = basis.spatial_norm2() ** 2
            div = np.abs(n4[:, None] - n4[None, :])
            active = kept & (V_nd != 0)
            min_div = float(div[active].min()) if active.any() else np.inf
            diagnostics.append(StepDiagnostics(
                step=step,
                offdiag_before=_frob_offdiag(eps * V_cur, mask_diag),
                offdiag_after=_frob_offdiag(T_after, mask_diag),
                cutoff_mass=float(np.linalg.norm(R_cut)),
                min_divisor=min_div,
            ))
    T = W.conj().T @ (L + eps * V) @ W
    T = 0.5 * (T + T.conj().T)
    if eps != 0.0:
        V_full = (T - L) / eps
    else:
        V_full = V
    V_D, V_nd = split_diag(V_full, basis)
    R1 = -V_nd
    Q = (W - np.eye(B)) / eps if eps != 0.0 else np.zeros_like(W)
    if not diagnostics:
        diagnostics.append(StepDiagnostics(
            step=0, offdiag_before=off_before,
            offdiag_after=_frob_offdiag(eps * V_full, mask_diag),
            cutoff_mass=0.0, min_divisor=np.inf))
    return ConjugationResult(basis=basis, eps=eps, N_diag=N_diag, c0=c0, rho=rho,
                             W=W, Q=Q, V_D=V_D, R1=R1, diagnostics=diagnostics)


def basis_rho(basis: ModeBasis) -> float:
    """Separation exponent certified for the partition the basis was built on."""
    return float(basis.p.rho)
