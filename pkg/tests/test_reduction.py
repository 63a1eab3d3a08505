"""Elimination of the coercive f band by a small Picard fixed point."""

import numpy as np
import pytest

from beamblocks.errors import NonContractionError
from beamblocks.fields import project_f, project_h, random_field, sobolev_norm
from beamblocks.nonlin import pde_residual
from beamblocks.oracle import newton_solve
from beamblocks.reduction import (f_band_residual, reduce_at, reduced_residual,
                                  solve_f_band, split_forcing)


def mixed_forcing(ws):
    """Forcing with content in both bands of the desk workspace."""
    f = ws.zeros()
    f.set_mode(1, (1,), 1.0)      # h band
    f.set_mode(0, (2,), 0.5)      # j = 0 is always f band
    f.set_mode(10, (0,), 0.3)     # beyond K0 <n>^2 = 8 for n = 0
    f.set_mode(1, (3,), 0.4)      # below the n = 3 band floor
    return f


def h_iterate(ws, norm=0.02, seed=11):
    return project_h(random_field(1, 12, 3, norm=norm, seed=seed), ws.bs)


def test_split_forcing_partitions(ws_desk):
    f = mixed_forcing(ws_desk)
    f1, f2 = split_forcing(f, ws_desk.bs)
    np.testing.assert_array_equal(f1.coeffs + f2.coeffs, f.coeffs)
    assert np.all(f1.coeffs[~ws_desk.bs.h_mask] == 0)
    assert np.all(f2.coeffs[ws_desk.bs.h_mask] == 0)
    assert sobolev_norm(f2, 0.0) > 0


def test_picard_contracts_and_solves(ws_desk):
    rp = reduce_at(h_iterate(ws_desk), mixed_forcing(ws_desk), ws_desk.sym,
                   ws_desk.bs, ws_desk.spec, 1e-3)
    assert rp.ratios, "expected at least one contraction ratio"
    assert max(rp.ratios) <= 0.5
    assert f_band_residual(rp) <= 1e-12
    # the fixed-point state and the recovered component live on the f band
    assert np.all(rp.w2.coeffs[ws_desk.bs.h_mask] == 0)
    assert np.all(rp.u2().coeffs[ws_desk.bs.h_mask] == 0)


def test_u2_assembly(ws_desk):
    from beamblocks.beam import invert_on_f

    rp = reduce_at(h_iterate(ws_desk), mixed_forcing(ws_desk), ws_desk.sym,
                   ws_desk.bs, ws_desk.spec, 1e-3)
    expected = 1e-3 * (invert_on_f(ws_desk.sym, ws_desk.bs, rp.f2).coeffs
                       + rp.w2.coeffs)
    np.testing.assert_array_equal(rp.u2().coeffs, expected)
    np.testing.assert_array_equal(rp.full_field().coeffs,
                                  rp.u1.coeffs + rp.u2().coeffs)


def test_band_residuals_recompose(ws_desk):
    f = mixed_forcing(ws_desk)
    rp = reduce_at(h_iterate(ws_desk), f, ws_desk.sym, ws_desk.bs, ws_desk.spec, 1e-3)
    r = pde_residual(rp.full_field(), ws_desk.sym, ws_desk.spec, 1e-3, f)
    total = sobolev_norm(r, 0.0)
    parts = np.hypot(reduced_residual(rp), f_band_residual(rp))
    np.testing.assert_allclose(parts, total, rtol=1e-10)


def test_residual_vanishes_at_oracle_solution(ws_desk):
    f = mixed_forcing(ws_desk)
    u_star, info = newton_solve(ws_desk, f, tol=1e-12)
    assert info.final_residual <= 1e-12
    rp = reduce_at(project_h(u_star, ws_desk.bs), f, ws_desk.sym, ws_desk.bs,
                   ws_desk.spec, ws_desk.cfg.eps)
    # the fixed point recovers the oracle's own f-band component ...
    diff = rp.u2().copy()
    diff.coeffs = diff.coeffs - project_f(u_star, ws_desk.bs).coeffs
    assert sobolev_norm(diff, 0.0) <= 1e-9
    # ... so the leftover h-band defect is the oracle tolerance
    assert reduced_residual(rp) <= 1e-8


def test_eps_zero_is_exact(ws_desk):
    rp = reduce_at(h_iterate(ws_desk), mixed_forcing(ws_desk), ws_desk.sym,
                   ws_desk.bs, ws_desk.spec, 0.0)
    assert not rp.u2().coeffs.any()
    assert f_band_residual(rp) <= 1e-13


def test_warm_start_skips_sweeps(ws_desk):
    f = mixed_forcing(ws_desk)
    u1 = h_iterate(ws_desk)
    cold = reduce_at(u1, f, ws_desk.sym, ws_desk.bs, ws_desk.spec, 1e-3)
    warm = reduce_at(u1, f, ws_desk.sym, ws_desk.bs, ws_desk.spec, 1e-3,
                     w_init=cold.w2)
    assert len(warm.ratios) <= 1
    assert len(cold.ratios) > len(warm.ratios)


def test_non_contraction_raises(ws_desk):
    with pytest.raises(NonContractionError):
        solve_f_band(h_iterate(ws_desk), split_forcing(mixed_forcing(ws_desk),
                                                       ws_desk.bs)[1],
                     ws_desk.sym, ws_desk.bs, ws_desk.spec, eps=50.0)
