"""The dense Newton reference solver."""

import numpy as np
import pytest

from beamblocks.beam import multiplier_vector
from beamblocks.config import SolverConfig
from beamblocks.errors import OracleError
from beamblocks.fields import random_field, sobolev_norm
from beamblocks.oracle import (_jacobian, jacobian_fd_check, newton_solve,
                               oracle_residual)
from beamblocks.problem import make_workspace

DELTA = 0.0316227766016838


def tiny_ws(**kw):
    base = dict(d=1, m=1.0, omega=1.234, eps=1e-3, J_max=4, N_max=2,
                nonlinearity="z4", forcing="1:1:1.0", delta=DELTA, zeta=3.5)
    base.update(kw)
    return make_workspace(SolverConfig(**base))


def test_converges_quadratically(ws_desk):
    u, info = newton_solve(ws_desk, ws_desk.forcing(), tol=1e-12)
    res = info.residuals
    assert res[0] > 1e-4                      # starts away from the solution
    assert info.final_residual <= 1e-12
    assert all(a > b for a, b in zip(res, res[1:]))
    # superlinear tail: once inside the basin each step at least squares^0.75
    for a, b in zip(res[1:], res[2:]):
        assert b <= a**1.5
    assert all(t == 1.0 for t in info.steps)  # no damping needed at eps = 1e-3
    assert oracle_residual(u, ws_desk, ws_desk.forcing()) == pytest.approx(
        info.final_residual, rel=1e-10)


def test_solution_is_real_and_order_eps(ws_desk):
    u, _ = newton_solve(ws_desk, ws_desk.forcing(), tol=1e-12)
    np.testing.assert_allclose(u.mirror_coeffs(), u.coeffs, atol=1e-14)
    scale = sobolev_norm(u, 0.0) / ws_desk.cfg.eps
    # leading order the response is eps L^-1 f: the (1, 1) mode and its mirror
    # divided by the multiplier 2 - omega^2
    linear = np.sqrt(2.0) / (2.0 - 1.234**2)
    assert scale == pytest.approx(linear, rel=1e-3)


def test_eps_zero_accepts_zero_immediately():
    ws = tiny_ws(eps=0.0)
    u, info = newton_solve(ws, ws.forcing(), tol=1e-12)
    assert info.iterations == 0
    assert info.final_residual == 0.0
    assert not u.coeffs.any()


def test_jacobian_hermitian_and_fd_consistent(ws_desk):
    u = random_field(1, 12, 3, norm=0.05, seed=3)
    L = multiplier_vector(ws_desk.sym, ws_desk.allbasis)
    J = _jacobian(u, ws_desk, L)
    np.testing.assert_allclose(J, J.conj().T, atol=1e-13)
    worst = jacobian_fd_check(ws_desk, ws_desk.forcing(), u, n_dirs=20)
    assert worst <= 1e-6


def test_two_starts_agree():
    ws = tiny_ws()
    f = ws.forcing()
    ua, _ = newton_solve(ws, f, tol=1e-13)
    ub, _ = newton_solve(ws, f, u_init=random_field(1, 4, 2, norm=0.05, seed=9),
                         tol=1e-13)
    diff = ua.copy()
    diff.coeffs = ua.coeffs - ub.coeffs
    assert sobolev_norm(diff, 0.0) <= 1e-10


def test_resonant_frequency_reports_singular():
    ws = tiny_ws(omega=float(np.sqrt(2.0)))   # j = 1, n = +-1 multiplier is 0
    with pytest.raises(OracleError, match="singular"):
        newton_solve(ws, ws.forcing())
