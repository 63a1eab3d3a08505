"""Command-line driver.

Subcommands: partition, spectrum, sweep, measure, solve, oracle-compare.
All tabular output is comma-separated with a header row and ``#``-prefixed
metadata lines (config hash first); floats are written with repr so that a
rerun with the same config is byte-identical.  No timestamps, ever.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .beam import multiplier_vector
from .config import SolverConfig, parse_config, validate_config
from .errors import BeamblocksError, ConfigError, ExcludedFrequencyError
from .fields import dump_coeffs, sobolev_norm
from .oracle import newton_solve, oracle_residual
from .screening import (build_cutoffs, fit_measure_slope, measure_excluded,
                        screen)
from .problem import Workspace, make_workspace
from .stages import run


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _write_table(path: Path, header, rows, comments=()):
    lines = [f"# {c}" for c in comments]
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n")


def _load(args) -> SolverConfig:
    cfg = parse_config(Path(args.config).read_text())
    if args.seed is not None:
        cfg.seed = args.seed
    validate_config(cfg)
    return cfg


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ----------------------------------------------------------------------
# subcommands
# ----------------------------------------------------------------------
def cmd_partition(args) -> int:
    cfg = _load(args)
    ws = make_workspace(cfg)
    p = ws.p
    rows = []
    for a, pts in enumerate(p.clusters):
        arr = np.asarray(pts)
        norms = np.sqrt((arr * arr).sum(axis=1))
        rep = " ".join(str(c) for c in p.representative[a])
        rows.append((a, rep, len(pts), float(norms.min()), float(norms.max())))
    _write_table(_outdir(args) / "partition.csv",
                 ["alpha_id", "representative", "size", "min_norm", "max_norm"],
                 rows,
                 comments=[f"config_hash: {cfg.hash()}",
                           f"theta: {_fmt(p.theta)}", f"rho: {_fmt(p.rho)}",
                           f"theta0: {_fmt(p.theta0)}", f"theta1: {_fmt(p.theta1)}",
                           f"n_clusters: {p.n_clusters}"])
    print(f"partition: {p.n_clusters} clusters over {sum(len(c) for c in p.clusters)} "
          f"lattice points (theta0={p.theta0:.4f}, theta1={p.theta1:.4f})")
    return 0


def cmd_spectrum(args) -> int:
    cfg = _load(args)
    ws = make_workspace(cfg)
    basis = ws.allbasis
    mu = multiplier_vector(ws.sym, basis)
    hmask = ws.bs.h_mask
    rows = []
    for i in range(basis.size):
        j, n = basis.modes[i]
        band = "h" if hmask[(j + cfg.J_max,) + tuple(c + cfg.N_max for c in n)] else "f"
        rows.append((cfg.omega, j, " ".join(str(c) for c in n), float(mu[i].real), band))
    _write_table(_outdir(args) / "spectrum.csv",
                 ["omega", "j", "n", "multiplier", "band"], rows,
                 comments=[f"config_hash: {cfg.hash()}", f"m: {_fmt(cfg.m)}"])
    print(f"spectrum: {basis.size} modes at omega={cfg.omega}")
    return 0


def cmd_sweep(args) -> int:
    cfg = _load(args)
    ws = make_workspace(cfg)
    fam = ws.family_at(ws.zeros())
    n_pts = int(round(1.0 / cfg.omega_grid)) + 1
    omegas = np.linspace(1.0, 2.0, n_pts)

    def one(om: float):
        rec = screen(float(om), cfg.delta, cfg.zeta, fam)
        return (float(om), rec.min_margin, rec.worst_cluster,
                1 if rec.resonant else 0)

    if args.threads > 1:
        with ThreadPoolExecutor(max_workers=args.threads) as ex:
            rows = list(ex.map(one, omegas))
    else:
        rows = [one(om) for om in omegas]
    _write_table(_outdir(args) / "sweep.csv",
                 ["omega", "min_margin", "worst_cluster", "resonant"], rows,
                 comments=[f"config_hash: {cfg.hash()}",
                           f"delta: {_fmt(cfg.delta)}", f"zeta: {_fmt(cfg.zeta)}"])
    n_res = sum(r[3] for r in rows)
    print(f"sweep: {len(rows)} omega points, {n_res} resonant")
    return 0


def cmd_measure(args) -> int:
    cfg = _load(args)
    ws = make_workspace(cfg)
    fam = ws.family_at(ws.zeros())
    k_top = int(max(ws.hbasis.shell)) if ws.hbasis.size else 0
    deltas = [cfg.delta * 2.0 ** (-i) for i in range(4)]
    measures = []
    for dl in deltas:
        cut = build_cutoffs(fam, dl, cfg.zeta, k_top, ws.C0)
        measures.append(measure_excluded(cut).total)
    slope = fit_measure_slope(deltas, measures) if min(measures) > 0 else float("nan")
    _write_table(_outdir(args) / "measure.csv",
                 ["delta", "measure", "fitted_slope"],
                 [(dl, mv, slope) for dl, mv in zip(deltas, measures)],
                 comments=[f"config_hash: {cfg.hash()}",
                           f"zeta: {_fmt(cfg.zeta)}"])
    print(f"measure: slope {slope:.4f} over delta in "
          f"[{deltas[-1]:.2e}, {deltas[0]:.2e}]")
    return 0


def cmd_solve(args) -> int:
    cfg = _load(args)
    ws = make_workspace(cfg)
    st = run(ws)
    out = _outdir(args)
    _write_table(out / "history.csv",
                 ["k", "dw_norm", "du_norm", "residual"],
                 [(r.k, r.dw_norm, r.du_norm, r.residual) for r in st.history],
                 comments=[f"config_hash: {cfg.hash()}",
                           f"converged: {st.converged}",
                           f"full_residual: {_fmt(st.full_residual)}",
                           f"decay_rate: {_fmt(st.decay_rate)}"])
    (out / "solution.coeffs").write_text(
        f"# config_hash: {cfg.hash()}\n" + dump_coeffs(st.full_field()))
    print(f"solve: converged={st.converged} stages={st.k_final} "
          f"residual={st.full_residual:.3e}")
    return 0


def cmd_oracle_compare(args) -> int:
    cfg = _load(args)
    ws = make_workspace(cfg)
    f = ws.forcing()
    st = run(ws, f)
    u_newton, info = newton_solve(ws, f)
    diff = u_newton.copy()
    diff.coeffs = st.full_field().coeffs - u_newton.coeffs
    dist = sobolev_norm(diff, 0.0)
    _write_table(_outdir(args) / "oracle_compare.csv",
                 ["omega", "eps", "newton_residual", "staged_residual", "distance"],
                 [(cfg.omega, cfg.eps, info.final_residual, st.full_residual, dist)],
                 comments=[f"config_hash: {cfg.hash()}",
                           f"newton_iterations: {info.iterations}"])
    print(f"oracle-compare: distance {dist:.3e} "
          f"(newton {info.final_residual:.3e}, staged {st.full_residual:.3e})")
    return 0


_COMMANDS = {
    "partition": cmd_partition,
    "spectrum": cmd_spectrum,
    "sweep": cmd_sweep,
    "measure": cmd_measure,
    "solve": cmd_solve,
    "oracle-compare": cmd_oracle_compare,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="beamblocks",
        description="Spectral block-diagonalization solver for time-periodic "
                    "beam vibrations.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="path to a key = value config file")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--seed", type=int, default=None,
                       help="override the config's random seed")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as e:
        print(f"error: ConfigError: {e}", file=sys.stderr)
        return 2
    except ExcludedFrequencyError as e:
        print(f"error: ExcludedFrequencyError: {e}", file=sys.stderr)
        return 3
    except BeamblocksError as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
