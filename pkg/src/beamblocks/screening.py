"""Small-divisor screening: cluster blocks, resonance margins, excluded sets.

After conjugation the operator is cluster-block-diagonal up to controlled
remainders, so invertibility reduces to the smallest |eigenvalue| of each
finite Hermitian block

    A_alpha(omega) = P_alpha (L_omega + eps V_D) P_alpha .

Because L_omega is affine in omega^2 and the conjugation is
omega-independent, every block is Ta + omega^2 Tb with fixed Hermitian parts;
its sorted eigenvalue branches are continuous and strictly decreasing in
omega on the h band (j /= 0), which is what makes interval location by
bisection rigorous — and is asserted, not assumed.

A frequency omega is screened against threshold delta <n(alpha)>^(-2 zeta).
For each dyadic shell k the resonant set O_k collects omegas where some
shell-k block has an eigenvalue inside (-tau_k, tau_k) with
tau_k = 2 delta 2^(-2 k zeta); a smooth damping weight psi_k equals 1 on O_k
and decays to 0 within half the erosion margin
delta/(128 C0) 2^(-2k(zeta+2)).  The iteration multiplies every shell-k block
inverse by (1 - psi_k), so excluded frequencies are never touched.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .beam import BeamSymbol, multiplier_vector
from .errors import CutoffResolutionError
from .fields import ModeBasis

#: bisection tolerance for interval endpoints (in omega)
ENDPOINT_TOL = 1e-13

#: omega window inside which everything is certified
OMEGA_LO, OMEGA_HI = 1.0, 2.0


# ----------------------------------------------------------------------
# blocks
# ----------------------------------------------------------------------

def assemble_block(alpha: int, sym: BeamSymbol, V_D: np.ndarray,
                   basis: ModeBasis, eps: float) -> np.ndarray:
    """Hermitian block of cluster alpha: beam multipliers plus eps V_D."""
    s = basis.slices[alpha]
    mu = multiplier_vector(sym, basis)[s]
    A = np.diag(mu.astype(complex)) + eps * V_D[s, s]
    return 0.5 * (A + A.conj().T)


def block_eigs(A: np.ndarray) -> np.ndarray:
    """Eigenvalues sorted ascending (A is Hermitian)."""
    if A.size == 0:
        return np.array([])
    return np.linalg.eigvalsh(A)


@dataclass
class BlockFamily:
    """All cluster blocks as an exact affine family A_alpha(omega) = Ta + omega^2 Tb.

    Built either from a conjugation transform W (blocks of W^*(L+eps V)W) or
    from a frozen cluster-diagonal potential with W = Id.  Exact in omega for
    a single conjugation step; for deeper conjugations W is frozen at the
    omega it was built at.
    """

    basis: ModeBasis
    m: float
    eps: float
    Ta: np.ndarray
    Tb: np.ndarray

    def block_at(self, alpha: int, omega: float) -> np.ndarray:
        s = self.basis.slices[alpha]
        return self.Ta[s, s] + omega**2 * self.Tb[s, s]

    def eigs_at(self, alpha: int, omega: float) -> np.ndarray:
        return block_eigs(self.block_at(alpha, omega))

    def min_abs_eig(self, alpha: int, omega: float) -> float:
        e = self.eigs_at(alpha, omega)
        return float(np.min(np.abs(e))) if e.size else np.inf

    def solve_block(self, alpha: int, omega: float, rhs: np.ndarray) -> np.ndarray:
        A = self.block_at(alpha, omega)
        evals, evecs = np.linalg.eigh(A)
        return evecs @ ((evecs.conj().T @ rhs) / evals)

    def clusters(self):
        return self.basis.cluster_order

    def rep_weight(self, alpha: int) -> float:
        return float(self.basis.p.rep_weights[alpha])

    def shell(self, alpha: int) -> int:
        return int(np.floor(np.log2(self.rep_weight(alpha))))


def build_block_family(basis: ModeBasis, m: float, eps: float,
                       V: np.ndarray | None = None,
                       W: np.ndarray | None = None) -> BlockFamily:
    """Assemble the affine family from an optional potential and transform."""
    B = basis.size
    n4 = basis.spatial_norm2() ** 2
    Da = np.diag((n4 + m).astype(complex))
    Db = np.diag((-basis.jarr.astype(float) ** 2).astype(complex))
    if V is not None:
        Da = Da + eps * V
    if W is not None:
        Da = W.conj().T @ Da @ W
        Db = W.conj().T @ Db @ W
    Da = 0.5 * (Da + Da.conj().T)
    Db = 0.5 * (Db + Db.conj().T)
    return BlockFamily(basis=basis, m=m, eps=eps, Ta=Da, Tb=Db)


def eig_omega_derivative(family: BlockFamily, alpha: int, omega: float,
                         h: float = 1e-5) -> np.ndarray:
    """Central-difference omega-derivatives of the sorted eigenvalue branches.

    Sorted-order matching is exact away from branch crossings; when the
    spectrum at omega has gaps comparable to the step, the stencil is
    narrowed and the difference retried.
    """
    for attempt in range(4):
        lo = np.clip(omega - h, OMEGA_LO, OMEGA_HI)
        hi = np.clip(omega + h, OMEGA_LO, OMEGA_HI)
        e_lo = family.eigs_at(alpha, lo)
        e_hi = family.eigs_at(alpha, hi)
        if e_lo.size == 0:
            return np.array([])
        deriv = (e_hi - e_lo) / (hi - lo)
        gaps = np.diff(np.sort(np.concatenate([e_lo, e_hi])))
        move = float(np.max(np.abs(e_hi - e_lo)))
        tight = gaps[gaps > 0]
        if tight.size == 0 or move < 0.5 * float(tight.min()) or attempt == 3:
            return deriv
        h /= 8.0
    return deriv


# ----------------------------------------------------------------------
# screening at a single frequency
# ----------------------------------------------------------------------

@dataclass
class ResonanceRecord:
    omega: float
    delta: float
    zeta: float
    margins: dict          # cluster id -> min|eig| * <n(alpha)>^(2 zeta)
    resonant: list         # flagged cluster ids
    min_margin: float
    worst_cluster: int


def screen(omega: float, delta: float, zeta: float, family: BlockFamily) -> ResonanceRecord:
    """Flag clusters whose block eigenvalues undercut the shell-weighted margin."""
    margins = {}
    resonant = []
    worst, worst_a = np.inf, -1
    for a in family.clusters():
        w = family.rep_weight(a)
        margin = family.min_abs_eig(a, omega) * w ** (2.0 * zeta)
        margins[a] = margin
        if margin < delta:
            resonant.append(a)
        if margin < worst:
            worst, worst_a = margin, a
    return ResonanceRecord(omega=omega, delta=delta, zeta=zeta, margins=margins,
                           resonant=resonant, min_margin=float(worst),
                           worst_cluster=worst_a)


# ----------------------------------------------------------------------
# excluded sets, erosion, damping weights
# ----------------------------------------------------------------------

def _merge_intervals(intervals):
    out = []
    for a, b in sorted(intervals):
        if out and a <= out[-1][1]:
            out[-1] = (out[-1][0], max(out[-1][1], b))
        else:
            out.append((a, b))
    return out


@dataclass
class ShellCutoff:
    """Resonant intervals and damping data of one dyadic shell."""

    k: int
    tau: float
    margin: float
    intervals: list  # merged closed intervals [a, b] within [OMEGA_LO, OMEGA_HI]

    def psi(self, omega: float) -> float:
        """1 on the resonant set, smoothstep down to 0 within margin/2 outside."""
        ramp = 0.5 * self.margin
        best = np.inf
        for a, b in self.intervals:
            if a <= omega <= b:
                return 1.0
            best = min(best, a - omega if omega < a else omega - b)
        if best >= ramp or not self.intervals:
            return 0.0
        s = best / ramp
        return 1.0 - (3.0 * s**2 - 2.0 * s**3)

    def contains(self, omega: float):
        for iv in self.intervals:
            if iv[0] <= omega <= iv[1]:
                return iv
        return None

    @property
    def measure(self) -> float:
        return sum(b - a for a, b in self.intervals)


@dataclass
class CutoffFamily:
    delta: float
    zeta: float
    C0: float
    shells: dict = field(default_factory=dict)  # k -> ShellCutoff

    def psi(self, k: int, omega: float) -> float:
        sc = self.shells.get(k)
        return sc.psi(omega) if sc is not None else 0.0

    def damping(self, k: int, omega: float) -> float:
        return 1.0 - self.psi(k, omega)

    def excluded_at(self, omega: float):
        """(shell, interval) of the first resonant interval containing omega."""
        for k in sorted(self.shells):
            iv = self.shells[k].contains(omega)
            if iv is not None:
                return k, iv
        return None

    def union_intervals(self) -> list:
        ivs = [iv for sc in self.shells.values() for iv in sc.intervals]
        return _merge_intervals(ivs)


def shell_tau(delta: float, zeta: float, k: int) -> float:
    return 2.0 * delta * 2.0 ** (-2.0 * k * zeta)


def shell_margin(delta: float, zeta: float, C0: float, k: int) -> float:
    return delta / (128.0 * C0) * 2.0 ** (-2.0 * k * (zeta + 2.0))


def psi_slope_bound(delta: float, zeta: float, C0: float, k: int) -> float:
    """Closed-form bound on |d psi_k / d omega|: 384 C0 / delta * 2^(2k(zeta+2))."""
    return 384.0 * C0 / delta * 2.0 ** (2.0 * k * (zeta + 2.0))


def _branch_fn(family: BlockFamily, alpha: int, i: int):
    def f(omega: float) -> float:
        return float(family.eigs_at(alpha, omega)[i])
    return f


def _bisect_decreasing(f, lo: float, hi: float, target: float,
                       tol: float = ENDPOINT_TOL) -> float:
    """Root of (decreasing f) = target, assuming f(lo) >= target >= f(hi)."""
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if f(mid) >= target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def build_shell_cutoff(family: BlockFamily, k: int, delta: float, zeta: float,
                       C0: float) -> ShellCutoff:
    """Locate the resonant omega-intervals of every shell-k cluster.

    Each sorted eigenvalue branch is monotone decreasing (asserted on a
    coarse sample), so {|branch| < tau} is one interval per branch, found by
    bisection on the entry (branch = tau) and exit (branch = -tau) crossings.
    """
    tau = shell_tau(delta, zeta, k)
    margin = shell_margin(delta, zeta, C0, k)
    intervals = []
    om_check = np.linspace(OMEGA_LO, OMEGA_HI, 9)
    for a in family.clusters():
        if family.shell(a) != k:
            continue
        samples = np.array([family.eigs_at(a, o) for o in om_check])
        if samples.size == 0:
            continue
        rise = samples[1:] - samples[:-1]
        if np.any(rise > 1e-10 * np.maximum(1.0, np.abs(samples[:-1]))):
            i_bad = int(np.argwhere(rise > 0)[0][1])
            raise CutoffResolutionError(
                f"eigenvalue branch {i_bad} of cluster {a} is not decreasing in "
                "omega; interval location would be unreliable")
        for i in range(samples.shape[1]):
            v_lo, v_hi = float(samples[0, i]), float(samples[-1, i])
            if v_lo < -tau or v_hi > tau:
                continue  # branch never enters (-tau, tau)
            f = _branch_fn(family, a, i)
            enter = OMEGA_LO if v_lo < tau else _bisect_decreasing(f, OMEGA_LO, OMEGA_HI, tau)
            leave = OMEGA_HI if v_hi > -tau else _bisect_decreasing(f, OMEGA_LO, OMEGA_HI, -tau)
            if enter <= leave:
                intervals.append((enter, leave))
    return ShellCutoff(k=k, tau=tau, margin=margin, intervals=_merge_intervals(intervals))


def build_cutoffs(family, delta: float, zeta: float, k_max: int, C0: float,
                  u_history=None, family_factory=None) -> CutoffFamily:
    """Cutoffs for every populated shell up to k_max.

    family may be a single BlockFamily (potential frozen at one iterate, e.g.
    u = 0) or, when family_factory and u_history are given, the shell-k
    cutoff is built from the family at the iterate u_(k-1) that was current
    when that shell first activated.
    """
    if family_factory is not None and u_history is not None:
        fam0 = family_factory(u_history[0])
    else:
        fam0 = family
    out = CutoffFamily(delta=delta, zeta=zeta, C0=C0)
    shells_present = sorted({fam0.shell(a) for a in fam0.clusters()})
    for k in shells_present:
        if k > k_max:
            continue
        if family_factory is not None and u_history is not None:
            idx = max(0, min(k - 1, len(u_history) - 1))
            fam = family_factory(u_history[idx])
        else:
            fam = family
        out.shells[k] = build_shell_cutoff(fam, k, delta, zeta, C0)
    return out


@dataclass
class MeasureReport:
    delta: float
    per_shell: dict
    total: float        # Lebesgue measure of the union of all core intervals
    with_ramps: float   # union including the psi ramps


def measure_excluded(cutoffs: CutoffFamily) -> MeasureReport:
    per_shell = {k: sc.measure for k, sc in cutoffs.shells.items()}
    union = cutoffs.union_intervals()
    total = sum(b - a for a, b in union)
    padded = []
    for k, sc in cutoffs.shells.items():
        ramp = 0.5 * sc.margin
        for a, b in sc.intervals:
            padded.append((max(OMEGA_LO, a - ramp), min(OMEGA_HI, b + ramp)))
    with_ramps = sum(b - a for a, b in _merge_intervals(padded))
    return MeasureReport(delta=cutoffs.delta, per_shell=per_shell,
                         total=total, with_ramps=with_ramps)


def fit_measure_slope(deltas, measures) -> float:
    """Least-squares slope of log(measure) against log(delta)."""
    x = np.log(np.asarray(deltas, dtype=float))
    y = np.log(np.asarray(measures, dtype=float))
    x = x - x.mean()
    return float(np.sum(x * (y - y.mean())) / np.sum(x * x))
