"""The staged damped block-inversion iteration, end to end and per piece."""

import numpy as np
import pytest

from beamblocks.config import SolverConfig
from beamblocks.errors import (CutoffInconsistencyError, ExcludedFrequencyError,
                               StagnationError)
from beamblocks.fields import project_h, sobolev_norm
from beamblocks.oracle import newton_solve
from beamblocks.problem import make_workspace
from beamblocks.screening import CutoffFamily, build_shell_cutoff
from beamblocks.stages import block_solve_stage, rhs_H, run

DELTA = 0.0316227766016838


def desk_cfg(**kw):
    base = dict(d=1, m=1.0, omega=1.234, eps=1e-3, J_max=12, N_max=3,
                nonlinearity="z4", forcing="1:1:1.0", delta=DELTA, zeta=3.5)
    base.update(kw)
    return SolverConfig(**base)


def test_desk_run_converges(ws_desk):
    st = run(ws_desk)
    assert st.converged
    assert st.k_final == 2
    assert st.full_residual <= 1e-9
    assert st.h_residual <= 1e-9 and st.f_residual <= 1e-9
    dws = [r.dw_norm for r in st.history]
    assert all(a > b for a, b in zip(dws, dws[1:]))
    assert dws[0] / dws[1] >= 2.0
    assert st.decay_rate is not None and st.decay_rate >= 1.0


def test_runs_are_deterministic(ws_desk):
    a = run(ws_desk)
    b = run(ws_desk)
    np.testing.assert_array_equal(a.full_field().coeffs, b.full_field().coeffs)
    assert a.full_residual == b.full_residual


def test_iterates_are_real_fields(ws_desk):
    st = run(ws_desk)
    np.testing.assert_allclose(st.u.mirror_coeffs(), st.u.coeffs, atol=1e-14)
    full = st.full_field()
    np.testing.assert_allclose(full.mirror_coeffs(), full.coeffs, atol=1e-14)


def test_matches_newton_oracle(ws_desk):
    st = run(ws_desk)
    u_star, info = newton_solve(ws_desk, ws_desk.forcing(), tol=1e-12)
    diff = st.full_field().copy()
    diff.coeffs = diff.coeffs - u_star.coeffs
    assert sobolev_norm(diff, 0.0) <= 1e-8
    assert info.final_residual <= 1e-12


def test_first_stage_rhs_is_truncated_forcing(ws_desk):
    """At u = w = 0 the z^4 symbol vanishes, so H reduces to the masked forcing."""
    ws = ws_desk
    zero = ws.zeros()
    sp = ws.split_at(zero)
    conj = ws.conjugation_at(zero, sp)
    f1 = project_h(ws.forcing(), ws.bs)
    f1_vec = ws.hbasis.gather(f1)
    zv = np.zeros(ws.hbasis.size, dtype=complex)
    for k in (0, 1):
        H = rhs_H(zv, zv, k, conj, sp.Rt, f1_vec, ws.hbasis)
        np.testing.assert_array_equal(
            H, np.where(ws.hbasis.stage_mask(k), f1_vec, 0.0))


def test_stage_truncation_zeroes_late_shells(ws_desk, rng):
    ws = ws_desk
    fam = ws.family_at(ws.zeros())
    cuts = CutoffFamily(delta=DELTA, zeta=3.5, C0=ws.C0, shells={
        k: build_shell_cutoff(fam, k, DELTA, 3.5, ws.C0) for k in (0, 1)})
    H = rng.standard_normal(ws.hbasis.size) + 1j * rng.standard_normal(ws.hbasis.size)
    w = block_solve_stage(H, fam, cuts, 0, DELTA, 3.5, 1e-3, 1.234)
    assert np.all(w[ws.hbasis.shell > 0] == 0)
    assert np.any(w[ws.hbasis.shell == 0] != 0)


def test_damping_zeroes_resonant_blocks(ws_desk, rng):
    """Inside an excluded interval psi = 1, so those blocks are never inverted."""
    ws = ws_desk
    fam = ws.family_at(ws.zeros())
    cuts = CutoffFamily(delta=DELTA, zeta=3.5, C0=ws.C0, shells={
        k: build_shell_cutoff(fam, k, DELTA, 3.5, ws.C0) for k in (0, 1)})
    a, b = cuts.shells[0].intervals[1]        # the sqrt(2) resonance of n = +-1
    om = 0.5 * (a + b)
    assert cuts.damping(0, om) == 0.0
    H = rng.standard_normal(ws.hbasis.size) + 1j * rng.standard_normal(ws.hbasis.size)
    w = block_solve_stage(H, fam, cuts, 1, DELTA, 3.5, 1e-3, om)
    assert np.all(w[ws.hbasis.shell == 0] == 0)
    assert np.any(w[ws.hbasis.shell == 1] != 0)


def test_inconsistent_cutoffs_are_refused(ws_desk, rng):
    """Claiming omega = sqrt(2) usable while n = +-1 is resonant is a logic error."""
    ws = ws_desk
    fam = ws.family_at(ws.zeros())
    empty = CutoffFamily(delta=DELTA, zeta=3.5, C0=ws.C0, shells={})
    H = rng.standard_normal(ws.hbasis.size) + 1j * rng.standard_normal(ws.hbasis.size)
    with pytest.raises(CutoffInconsistencyError, match="screen threshold"):
        block_solve_stage(H, fam, empty, 1, DELTA, 3.5, 1e-3, float(np.sqrt(2.0)))


def test_refuses_excluded_frequency():
    ws = make_workspace(desk_cfg(omega=1.4142135))
    with pytest.raises(ExcludedFrequencyError) as err:
        run(ws)
    assert err.value.shell == 0
    a, b = err.value.interval
    assert a <= 1.4142135 <= b


def test_eps_zero_returns_zero_solution():
    ws = make_workspace(desk_cfg(eps=0.0))
    st = run(ws)
    assert st.converged and st.k_final == 1
    assert not st.u.coeffs.any()
    assert not st.full_field().coeffs.any()
    assert st.full_residual == 0.0
    assert st.history[0].dw_norm == 0.0


def test_stage_budget_exhaustion_stalls():
    ws = make_workspace(desk_cfg(k_max=1, tol_step=1e-14))
    with pytest.raises(StagnationError, match="stalled"):
        run(ws)
