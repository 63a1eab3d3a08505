"""Workspace assembly: one place that turns a config into certified objects.

A Workspace owns the partition, band split, mode bases, beam symbol and
nonlinearity for a config, plus the helpers every solver needs (building the
coupling potential at an iterate, the affine block family, the forcing
field).  Solvers receive a Workspace so they never rebuild or re-certify
anything mid-run.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .beam import BeamSymbol
from .clusters import ClusterPartition, build_partition
from .config import SolverConfig, parse_forcing_modes, validate_config
from .conjugation import ConjugationResult, diagonalize
from .fields import (BandSplit, FourierField, ModeBasis, band_split,
                     make_basis, random_field)
from .nonlin import Nonlinearity, SplitPotential, get_nonlinearity, para_split
from .screening import BlockFamily, build_block_family


@dataclass
class Workspace:
    cfg: SolverConfig
    p: ClusterPartition
    bs: BandSplit
    sym: BeamSymbol
    spec: Nonlinearity
    hbasis: ModeBasis
    fbasis: ModeBasis
    allbasis: ModeBasis = field(default=None)

    @property
    def rho(self) -> float:
        return self.cfg.rho if self.cfg.rho is not None else self.p.rho

    @property
    def C0(self) -> float:
        """Margin constant: the exact band bound K0^2 on j^2 / <n(alpha)>^4."""
        return self.bs.K0**2

    def zeros(self) -> FourierField:
        return FourierField.zeros(self.cfg.d, self.cfg.J_max, self.cfg.N_max)

    # ------------------------------------------------------------------
    # potential and conjugation at an iterate
    # ------------------------------------------------------------------
    def split_at(self, u: FourierField) -> SplitPotential:
        return para_split(u, self.spec, self.cfg.eps, self.hbasis)

    def conjugation_at(self, u: FourierField,
                       sp: SplitPotential | None = None) -> ConjugationResult:
        from .beam import multiplier_vector

        sp = self.split_at(u) if sp is None else sp
        L = multiplier_vector(self.sym, self.hbasis)
        return diagonalize(L, sp.V, self.cfg.eps, self.cfg.N_diag, self.hbasis,
                           c0=self.cfg.c0, rho=self.rho)

    def family_at(self, u: FourierField,
                  conj: ConjugationResult | None = None,
                  sp: SplitPotential | None = None) -> BlockFamily:
        sp = self.split_at(u) if sp is None else sp
        conj = self.conjugation_at(u, sp) if conj is None else conj
        return build_block_family(self.hbasis, self.cfg.m, self.cfg.eps,
                                  V=sp.V, W=conj.W)

    def family_factory(self):
        return lambda u: self.family_at(u)

    # ------------------------------------------------------------------
    # forcing
    # ------------------------------------------------------------------
    def forcing(self) -> FourierField:
        cfg = self.cfg
        if cfg.forcing.strip().lower() == "random":
            return random_field(cfg.d, cfg.J_max, cfg.N_max, norm=cfg.forcing_norm,
                                sigma=cfg.forcing_sigma, seed=cfg.seed, decay=2.0)
        f = self.zeros()
        for j, n, val in parse_forcing_modes(cfg.forcing, cfg.d):
            f.set_mode(j, n, val)
        return f


def make_workspace(cfg: SolverConfig) -> Workspace:
    validate_config(cfg)
    p = build_partition(cfg.d, cfg.N_max, cfg.beta, link_rule=cfg.theta_link)
    bs = band_split(p, cfg.m, cfg.J_max, cfg.N_max)
    sym = BeamSymbol(cfg.m, cfg.omega)
    spec = get_nonlinearity(cfg.nonlinearity)
    hbasis = make_basis(p, bs, "h")
    fbasis = make_basis(p, bs, "f")
    allbasis = make_basis(p, bs, "all")
    return Workspace(cfg=cfg, p=p, bs=bs, sym=sym, spec=spec,
                     hbasis=hbasis, fbasis=fbasis, allbasis=allbasis)
