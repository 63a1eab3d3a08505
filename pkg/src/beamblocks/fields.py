"""Truncated space-time Fourier fields on T x T^d and their norms.

A field u(t, x) with one time angle and d space angles is stored through its
coefficients u_hat(j, n) in the unitary convention

    u(t, x) = (2 pi)^(-(d+1)/2) * sum_{|j|<=J_max, |n_i|<=N_max} u_hat(j,n) e^{i(jt + n.x)}

so that the plain l2 norm of the coefficients equals the physical L2 norm of
the function (verified against uniform-grid quadrature).  Real-valued fields
satisfy u_hat(-j,-n) = conj(u_hat(j,n)); mutators keep that symmetry and
refuse writes that would break it.

The anisotropic Sobolev norm used throughout weights mode (j, n) by
(1 + j^2 + |n|^4)^sigma, matching the fourth-order spatial symbol of the beam
operator.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import SymmetryError

TWO_PI = 2.0 * np.pi

#: tolerance above which a mutator considers a write symmetry-breaking
SYMMETRY_WRITE_TOL = 1e-12


def norm_const(d: int) -> float:
    """Normalization (2 pi)^((d+1)/2) relating coefficients and point values."""
    return TWO_PI ** ((d + 1) / 2.0)


@lru_cache(maxsize=None)
def mode_index_arrays(d: int, J_max: int, N_max: int):
    """Broadcasted integer index arrays (j, [n_1, .., n_d]) over the coefficient shape."""
    shape = (2 * J_max + 1,) + (2 * N_max + 1,) * d
    j = np.arange(-J_max, J_max + 1).reshape((-1,) + (1,) * d)
    jarr = np.broadcast_to(j, shape)
    narrs = []
    for axis in range(d):
        sh = [1] * (d + 1)
        sh[axis + 1] = 2 * N_max + 1
        narrs.append(np.broadcast_to(np.arange(-N_max, N_max + 1).reshape(sh), shape))
    return jarr, tuple(narrs)


@lru_cache(maxsize=None)
def spatial_norm2_array(d: int, J_max: int, N_max: int) -> np.ndarray:
    """|n|^2 per coefficient slot (constant along the time axis)."""
    _, narrs = mode_index_arrays(d, J_max, N_max)
    n2 = np.zeros((2 * J_max + 1,) + (2 * N_max + 1,) * d)
    for na in narrs:
        n2 = n2 + na.astype(float) ** 2
    return n2


@lru_cache(maxsize=None)
def sobolev_weight_array(d: int, J_max: int, N_max: int, sigma: float) -> np.ndarray:
    """(1 + j^2 + |n|^4)^sigma per coefficient slot."""
    jarr, _ = mode_index_arrays(d, J_max, N_max)
    n2 = spatial_norm2_array(d, J_max, N_max)
    base = 1.0 + jarr.astype(float) ** 2 + n2**2
    return base**sigma


@dataclass
class FourierField:
    """Dense coefficient table of a truncated field.

    coeffs has shape (2*J_max+1,) + (2*N_max+1,)*d; axis 0 is the time
    frequency j stored at index j + J_max, spatial axes likewise shifted.
    """

    d: int
    J_max: int
    N_max: int
    coeffs: np.ndarray

    @classmethod
    def zeros(cls, d: int, J_max: int, N_max: int) -> "FourierField":
        shape = (2 * J_max + 1,) + (2 * N_max + 1,) * d
        return cls(d, J_max, N_max, np.zeros(shape, dtype=complex))

    def copy(self) -> "FourierField":
        return FourierField(self.d, self.J_max, self.N_max, self.coeffs.copy())

    # ------------------------------------------------------------------
    # indexing
    # ------------------------------------------------------------------
    def _slot(self, j: int, n) -> tuple:
        n = _as_tuple(n, self.d)
        if abs(j) > self.J_max or any(abs(c) > self.N_max for c in n):
            raise IndexError(f"mode (j={j}, n={n}) outside truncation "
                             f"(J_max={self.J_max}, N_max={self.N_max})")
        return (j + self.J_max,) + tuple(c + self.N_max for c in n)

    def get_mode(self, j: int, n) -> complex:
        return complex(self.coeffs[self._slot(j, n)])

    def set_mode(self, j: int, n, value: complex) -> None:
        """Set u_hat(j, n) and its mirror conj at (-j, -n) in one move.

        The only self-mirrored mode is (0, 0); writing a non-real value there
        cannot be symmetrized and is rejected.
        """
        n = _as_tuple(n, self.d)
        value = complex(value)
        mirror = tuple(-c for c in n)
        if j == 0 and all(c == 0 for c in n):
            if abs(value.imag) > SYMMETRY_WRITE_TOL:
                raise SymmetryError(
                    f"mode (0, 0) must be real; got imaginary part {value.imag!r}")
            self.coeffs[self._slot(0, n)] = value.real
            return
        self.coeffs[self._slot(j, n)] = value
        self.coeffs[self._slot(-j, mirror)] = np.conj(value)

    # ------------------------------------------------------------------
    # symmetry
    # ------------------------------------------------------------------
    def mirror_coeffs(self) -> np.ndarray:
        """conj(u_hat(-j, -n)) as an array aligned with coeffs."""
        return np.conj(np.flip(self.coeffs))

    def symmetry_defect(self) -> float:
        return float(np.max(np.abs(self.coeffs - self.mirror_coeffs())))

    def assert_real(self, tol: float = 1e-9) -> None:
        defect = self.symmetry_defect()
        if defect > tol:
            raise SymmetryError(f"field is not real: symmetry defect {defect:.3e} > {tol:.1e}")

    def symmetrized(self) -> "FourierField":
        """Project exactly onto the Hermitian-symmetric (real-field) subspace."""
        c = 0.5 * (self.coeffs + self.mirror_coeffs())
        return FourierField(self.d, self.J_max, self.N_max, c)


def _as_tuple(n, d: int) -> tuple:
    if np.isscalar(n):
        n = (int(n),)
    else:
        n = tuple(int(c) for c in n)
    if len(n) != d:
        raise IndexError(f"spatial index {n} has wrong dimension (expected {d})")
    return n


# ----------------------------------------------------------------------
# norms
# ----------------------------------------------------------------------

def sobolev_norm(u: FourierField, sigma: float) -> float:
    """Anisotropic Sobolev norm (sum (1+j^2+|n|^4)^sigma |u_hat|^2)^(1/2)."""
    w = sobolev_weight_array(u.d, u.J_max, u.N_max, sigma)
    return float(np.sqrt(np.sum(w * np.abs(u.coeffs) ** 2)))


def l2_inner(u: FourierField, v: FourierField) -> float:
    """L2 pairing of two real fields (real part of the coefficient pairing)."""
    return float(np.real(np.sum(np.conj(u.coeffs) * v.coeffs)))


# ----------------------------------------------------------------------
# grids: direct (non-FFT) synthesis and analysis
# ----------------------------------------------------------------------

@lru_cache(maxsize=None)
def dft_matrices(half_modes: int, n_grid: int):
    """Synthesis matrix E (grid x modes) and analysis matrix A (modes x grid)
    for modes -half_modes..half_modes on a uniform n_grid-point angle grid."""
    idx = np.arange(-half_modes, half_modes + 1)
    theta = TWO_PI * np.arange(n_grid) / n_grid
    E = np.exp(1j * np.outer(theta, idx))
    A = np.conj(E.T) / n_grid
    return E, A


def grid_sizes(J_max: int, N_max: int, pad: int) -> tuple:
    """Uniform grid sizes (time, space) that dealias products of order pad+1 exactly."""
    return 2 * pad * J_max + 2, 2 * pad * N_max + 2


def _tensor_apply(mat: np.ndarray, arr: np.ndarray, axis: int) -> np.ndarray:
    out = np.tensordot(mat, arr, axes=(1, axis))
    return np.moveaxis(out, 0, axis)


def synthesize(u: FourierField, Mt: int, Mx: int) -> np.ndarray:
    """Point values of a real field on the uniform (Mt, Mx, .., Mx) grid."""
    Et, _ = dft_matrices(u.J_max, Mt)
    Ex, _ = dft_matrices(u.N_max, Mx)
    vals = _tensor_apply(Et, u.coeffs, 0)
    for ax in range(1, u.d + 1):
        vals = _tensor_apply(Ex, vals, ax)
    return np.real(vals) / norm_const(u.d)


def analyze(values: np.ndarray, J_out: int, N_out: int, hermitian: bool = True) -> FourierField:
    """Coefficients of grid values, truncated to (J_out, N_out).

    Exact whenever the sampled function is a trigonometric polynomial whose
    aliases onto the target window vanish (the padded grids returned by
    grid_sizes guarantee this for the catalog nonlinearities).  hermitian=True
    enforces the real-field symmetry exactly, absorbing roundoff drift.
    """
    d = values.ndim - 1
    Mt = values.shape[0]
    _, At = dft_matrices(J_out, Mt)
    C = _tensor_apply(At, values.astype(complex), 0)
    for ax in range(1, d + 1):
        _, Ax = dft_matrices(N_out, values.shape[ax])
        C = _tensor_apply(Ax, C, ax)
    C = C * norm_const(d)
    if hermitian:
        C = 0.5 * (C + np.conj(np.flip(C)))
    return FourierField(d, J_out, N_out, C)


def quadrature_l2_norm(u: FourierField) -> float:
    """Physical L2 norm via uniform-grid quadrature (no coefficient weights).

    On the (2J_max+2) x (2N_max+2)^d grid the quadrature is exact for |u|^2,
    so this must agree with sobolev_norm(u, 0) to roundoff.
    """
    Mt, Mx = grid_sizes(u.J_max, u.N_max, 1)
    vals = synthesize(u, Mt, Mx)
    return float(np.sqrt(TWO_PI ** (u.d + 1) * np.mean(vals**2)))


# ----------------------------------------------------------------------
# cluster projections, stage truncations, dyadic shells
# ----------------------------------------------------------------------

def _spatial_cluster_id_array(p, N_max: int) -> np.ndarray:
    """Cluster id per spatial grid slot, shape (2N_max+1,)*d."""
    from .clusters import cluster_of  # local import to avoid a cycle

    shape = (2 * N_max + 1,) * p.d
    out = np.empty(shape, dtype=int)
    for idx in np.ndindex(shape):
        n = tuple(i - N_max for i in idx)
        out[idx] = cluster_of(p, n)
    return out


def cluster_id_field(p, N_max: int) -> np.ndarray:
    """Cached spatial cluster-id table for a partition (requires N_max <= p.N_max)."""
    if N_max > p.N_max:
        raise ValueError(f"field N_max={N_max} exceeds partition truncation {p.N_max}")
    cache = p._id_field_cache
    if N_max not in cache:
        cache[N_max] = _spatial_cluster_id_array(p, N_max)
    return cache[N_max]


def rep_weight_field(p, N_max: int) -> np.ndarray:
    """<n(alpha)> = sqrt(1+|n(alpha)|^2) per spatial slot, from the cluster map."""
    ids = cluster_id_field(p, N_max)
    return p.rep_weights[ids]


def project_cluster(u: FourierField, alpha: int, p) -> FourierField:
    """Zero every coefficient whose spatial mode lies outside cluster alpha."""
    ids = cluster_id_field(p, u.N_max)
    mask = (ids == alpha)
    out = u.copy()
    out.coeffs = out.coeffs * mask  # broadcasts over the time axis
    return out


def shell_index_field(p, N_max: int) -> np.ndarray:
    """Dyadic shell floor(log2 <n(alpha)>) per spatial slot."""
    w = rep_weight_field(p, N_max)
    return np.floor(np.log2(w)).astype(int)


def truncate_Sk(u: FourierField, k: int, p) -> FourierField:
    """Keep only clusters with <n(alpha)> < 2^(k+1) (dyadic shells 0..k)."""
    shells = shell_index_field(p, u.N_max)
    out = u.copy()
    out.coeffs = out.coeffs * (shells <= k)
    return out


def dyadic_decompose(u: FourierField, p):
    """Cluster-wise dyadic pieces (Delta_k u) and partial sums (S_k u).

    Delta_k collects clusters with 2^k <= <n(alpha)> < 2^(k+1); the pieces sum
    to u exactly and S_k agrees with truncate_Sk(u, k, p).
    """
    shells = shell_index_field(p, u.N_max)
    k_top = int(shells.max())
    deltas, partials = [], []
    acc = FourierField.zeros(u.d, u.J_max, u.N_max)
    for k in range(k_top + 1):
        piece = u.copy()
        piece.coeffs = piece.coeffs * (shells == k)
        acc = FourierField(u.d, u.J_max, u.N_max, acc.coeffs + piece.coeffs)
        deltas.append(piece)
        partials.append(acc.copy())
    return deltas, partials


# ----------------------------------------------------------------------
# band split
# ----------------------------------------------------------------------

@dataclass
class BandSplit:
    """Partition of the truncated modes into resonance-carrying ("h") modes,
    with |j| inside [K0^-1 <n(alpha)>^2, K0 <n(alpha)>^2], and the coercive
    remainder ("f" modes, always including j = 0)."""

    p: object
    m: float
    J_max: int
    N_max: int
    K0: float
    h_mask: np.ndarray  # bool, coefficient shape
    jlo: np.ndarray     # per-cluster lower |j| limit (int)
    jhi: np.ndarray     # per-cluster upper |j| limit (int, clipped to J_max)

    @property
    def f_mask(self) -> np.ndarray:
        return ~self.h_mask


def band_split(p, m: float, J_max: int, N_max: int, K0: float | None = None) -> BandSplit:
    """Build the two-band mode split for mass m on the (J_max, N_max) truncation.

    K0 defaults to max(2 sqrt(m), 8/sqrt(m)) * Theta0^2 with the partition's
    certified comparability constant Theta0.
    """
    if m <= 0:
        raise ValueError(f"mass m must be positive, got {m}")
    if K0 is None:
        K0 = max(2.0 * np.sqrt(m), 8.0 / np.sqrt(m)) * p.theta0**2
    w = p.rep_weights  # <n(alpha)> per cluster
    jlo_f = (w**2) / K0
    jhi_f = K0 * (w**2)
    jlo = np.ceil(jlo_f - 1e-12).astype(int)
    jlo = np.maximum(jlo, 1)  # j = 0 is always an f mode since jlo_f > 0
    jhi = np.floor(jhi_f + 1e-12).astype(int)
    jhi = np.minimum(jhi, J_max)

    ids = cluster_id_field(p, N_max)
    jarr, _ = mode_index_arrays(p.d, J_max, N_max)
    lo = jlo[ids]  # broadcast over time axis below
    hi = jhi[ids]
    absj = np.abs(jarr)
    h_mask = (absj >= lo) & (absj <= hi)
    return BandSplit(p=p, m=m, J_max=J_max, N_max=N_max, K0=float(K0),
                     h_mask=h_mask, jlo=jlo, jhi=jhi)


def project_h(u: FourierField, bs: BandSplit) -> FourierField:
    out = u.copy()
    out.coeffs = out.coeffs * bs.h_mask
    return out


def project_f(u: FourierField, bs: BandSplit) -> FourierField:
    out = u.copy()
    out.coeffs = out.coeffs * bs.f_mask
    return out


# ----------------------------------------------------------------------
# equivalent norms on the h band
# ----------------------------------------------------------------------

def equivalent_norm_check(u: FourierField, sigma: float, p):
    """Ratios of the three h-band norm variants to the reference Sobolev norm.

    Variant 1 weights each mode by <n>^(4 sigma); variant 2 groups modes by
    spatial frequency first (numerically identical, computed independently);
    variant 3 replaces <n> by the cluster representative weight <n(alpha)>.
    Returns (min_ratio, max_ratio); a zero field returns (1.0, 1.0) by
    convention.
    """
    ref = sobolev_norm(u, sigma)
    if ref == 0.0:
        return 1.0, 1.0
    n2 = spatial_norm2_array(u.d, u.J_max, u.N_max)
    w_mode = (1.0 + n2) ** (2.0 * sigma)
    v1 = float(np.sqrt(np.sum(w_mode * np.abs(u.coeffs) ** 2)))
    # group by spatial frequency: sum_j |u_hat(j, n)|^2 first, then weight
    per_n = np.sum(np.abs(u.coeffs) ** 2, axis=0)
    w_n = (1.0 + spatial_norm2_array(u.d, 0, u.N_max)[0]) ** (2.0 * sigma)
    v2 = float(np.sqrt(np.sum(w_n * per_n)))
    w_alpha = (rep_weight_field(p, u.N_max) ** 2) ** (2.0 * sigma)
    v3 = float(np.sqrt(np.sum(w_alpha * per_n)))
    ratios = np.array([v1, v2, v3]) / ref
    return float(ratios.min()), float(ratios.max())


# ----------------------------------------------------------------------
# coefficient dumps (exact round-trip)
# ----------------------------------------------------------------------

def dump_coeffs(u: FourierField) -> str:
    """Serialize every coefficient as 'j, n_1, .., n_d, re, im' rows.

    Rows are sorted lexicographically by (j, n); floats use repr so the text
    round-trips bit for bit through load_coeffs.
    """
    jarr, narrs = mode_index_arrays(u.d, u.J_max, u.N_max)
    lines = []
    flat = u.coeffs.ravel()
    jf = jarr.ravel()
    nf = [na.ravel() for na in narrs]
    for i in range(flat.size):
        parts = [str(int(jf[i]))] + [str(int(na[i])) for na in nf]
        parts += [repr(float(flat[i].real)), repr(float(flat[i].imag))]
        lines.append(", ".join(parts))
    return "\n".join(lines) + "\n"


def load_coeffs(text: str, d: int) -> FourierField:
    """Inverse of dump_coeffs; truncation sizes are inferred from the indices."""
    rows = []
    for raw in text.splitlines():
        raw = raw.strip()
        if not raw or raw.startswith("#"):
            continue
        parts = [s.strip() for s in raw.split(",")]
        if len(parts) != d + 3:
            raise ValueError(f"coefficient row has {len(parts)} fields, expected {d + 3}: {raw!r}")
        j = int(parts[0])
        n = tuple(int(s) for s in parts[1:1 + d])
        val = complex(float(parts[1 + d]), float(parts[2 + d]))
        rows.append((j, n, val))
    if not rows:
        raise ValueError("empty coefficient dump")
    J = max(abs(j) for j, _, _ in rows)
    N = max((max(abs(c) for c in n) for _, n, _ in rows), default=0)
    u = FourierField.zeros(d, J, N)
    for j, n, val in rows:
        u.coeffs[u._slot(j, n)] = val
    return u


# ----------------------------------------------------------------------
# mode bases for dense operators
# ----------------------------------------------------------------------

@dataclass
class ModeBasis:
    """An ordered flat basis of modes, grouped contiguously by cluster.

    Clusters appear sorted by (<n(alpha)>, representative); within a cluster
    modes are sorted by (n, j).  Every dense operator in the reduction shares
    this row order, so cluster blocks are contiguous slices.
    """

    d: int
    J_max: int
    N_max: int
    band: str                   # "h", "f", or "all"
    p: object                   # the cluster partition the blocks refer to
    modes: list
    jarr: np.ndarray            # (B,)
    narr: np.ndarray            # (B, d)
    cluster_ids: np.ndarray     # (B,) partition cluster id per row
    cluster_order: list         # cluster ids in block order (may skip empty ones)
    slices: dict                # cluster id -> slice of rows
    shell: np.ndarray           # (B,) dyadic shell of the row's cluster
    mirror_perm: np.ndarray     # (B,) row index of the (-j, -n) partner
    flat_index: np.ndarray      # (B,) position in the raveled coefficient array

    @property
    def size(self) -> int:
        return len(self.modes)

    def gather(self, u: FourierField) -> np.ndarray:
        return u.coeffs.ravel()[self.flat_index].copy()

    def scatter(self, vec: np.ndarray) -> FourierField:
        u = FourierField.zeros(self.d, self.J_max, self.N_max)
        flat = u.coeffs.ravel()
        flat[self.flat_index] = vec
        u.coeffs = flat.reshape(u.coeffs.shape)
        return u

    def symmetrize_vec(self, vec: np.ndarray) -> np.ndarray:
        """Exact projection of a coefficient vector onto real-field symmetry."""
        return 0.5 * (vec + np.conj(vec[self.mirror_perm]))

    def spatial_norm2(self) -> np.ndarray:
        return np.sum(self.narr.astype(float) ** 2, axis=1)

    def stage_mask(self, k: int) -> np.ndarray:
        """Rows kept by the stage truncation S_k (shells 0..k)."""
        return self.shell <= k


def make_basis(p, bs: BandSplit, band: str = "h") -> ModeBasis:
    """Flatten the (J_max, N_max) truncation into a cluster-blocked basis."""
    if band not in ("h", "f", "all"):
        raise ValueError(f"band must be 'h', 'f' or 'all', got {band!r}")
    J, N, d = bs.J_max, bs.N_max, p.d
    order = sorted(range(len(p.clusters)),
                   key=lambda a: (p.rep_weights[a], p.representative[a]))
    modes = []
    cluster_ids = []
    cluster_order = []
    slices = {}
    for a in order:
        start = len(modes)
        for n in sorted(p.clusters[a]):
            if max(abs(c) for c in n) > N:
                continue
            for j in range(-J, J + 1):
                in_h = (bs.jlo[a] <= abs(j) <= bs.jhi[a])
                if band == "h" and not in_h:
                    continue
                if band == "f" and in_h:
                    continue
                modes.append((j, n))
                cluster_ids.append(a)
        if len(modes) > start:
            cluster_order.append(a)
            slices[a] = slice(start, len(modes))
    jarr = np.array([m[0] for m in modes], dtype=int)
    narr = np.array([m[1] for m in modes], dtype=int).reshape(len(modes), d)
    cluster_ids = np.array(cluster_ids, dtype=int)
    shell = np.floor(np.log2(p.rep_weights[cluster_ids])).astype(int)
    row_of = {mode: i for i, mode in enumerate(modes)}
    mirror_perm = np.array(
        [row_of[(-j, tuple(-c for c in n))] for j, n in modes], dtype=int)
    shape = (2 * J + 1,) + (2 * N + 1,) * d
    multi = [jarr + J] + [narr[:, ax] + N for ax in range(d)]
    flat_index = np.ravel_multi_index(tuple(multi), shape)
    return ModeBasis(d=d, J_max=J, N_max=N, band=band, p=p, modes=modes, jarr=jarr,
                     narr=narr, cluster_ids=cluster_ids, cluster_order=cluster_order,
                     slices=slices, shell=shell, mirror_perm=mirror_perm,
                     flat_index=flat_index)


# ----------------------------------------------------------------------
# random fields
# ----------------------------------------------------------------------

def random_field(d: int, J_max: int, N_max: int, norm: float, sigma: float = 0.0,
                 seed: int = 0, decay: float = 1.0) -> FourierField:
    """A real random field scaled to a prescribed Sobolev norm.

    Coefficients are complex Gaussian, damped by (1+j^2+|n|^4)^(-decay/2),
    symmetrized, then rescaled so sobolev_norm(u, sigma) == norm exactly.
    """
    rng = np.random.default_rng(seed)
    shape = (2 * J_max + 1,) + (2 * N_max + 1,) * d
    c = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    c *= sobolev_weight_array(d, J_max, N_max, -decay / 2.0)
    u = FourierField(d, J_max, N_max, c).symmetrized()
    cur = sobolev_norm(u, sigma)
    if cur == 0.0:
        raise ValueError("degenerate random draw with zero norm")
    u.coeffs *= norm / cur
    return u
