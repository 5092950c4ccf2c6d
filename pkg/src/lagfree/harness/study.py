"""Three-level (or deeper) refinement studies."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..diagnostics import energy
from ..model import LagState, MassGrid, init_profile
from ..solver import run
from .config import RunConfig

OK = "ok"
EXACT = "indeterminate-exact"
INDETERMINATE = "indeterminate"

# differences below this fraction of the quantity's size count as roundoff
EXACT_TOL = 1e-12


@dataclass(frozen=True)
class QuantityOrder:
    name: str
    differences: tuple[float, ...]
    order: float
    status: str


@dataclass
class StudyResult:
    n_cells: tuple[int, ...]
    quantities: dict[str, QuantityOrder] = field(default_factory=dict)
    errors: tuple[str | None, ...] = ()

    def order(self, name: str) -> float:
        return self.quantities[name].order

    def to_dict(self) -> dict:
        return {
            "n_cells": list(self.n_cells),
            "errors": list(self.errors),
            "quantities": {k: {"differences": list(q.differences), "order": q.order, "status": q.status}
                           for k, q in self.quantities.items()},
        }


def restrict_density(rho: np.ndarray) -> np.ndarray:
    """Merge cell pairs; specific volume is additive, so average ``1/rho``."""
    return 2.0 / (1.0 / rho[0::2] + 1.0 / rho[1::2])


def observed_order(differences, scale: float) -> tuple[float, str]:
    """Order from the last two successive differences.

    Non-decreasing differences give ``indeterminate``; differences at roundoff
    level give ``indeterminate-exact``.
    """
    e1, e2 = differences[-2], differences[-1]
    if max(e1, e2) <= EXACT_TOL * max(scale, 1e-300):
        return math.nan, EXACT
    if not (e2 > 0.0 and e1 > e2):
        return math.nan, INDETERMINATE
    return math.log2(e1 / e2), OK


def _final_state(cfg: RunConfig, n: int) -> tuple[LagState | None, str | None]:
    state = init_profile(cfg.profile, cfg.params, MassGrid(n))
    sample = cfg.t_end if cfg.t_end > 0.0 else cfg.sample_every
    traj = run(state, cfg.step, cfg.params, cfg.t_end, sample)
    return traj.final, traj.error


def convergence_study(cfg: RunConfig, levels: int = 3) -> StudyResult:
    """Run ``cfg`` at ``n_cells * 2**k`` and estimate observed orders."""
    if int(levels) != levels or levels < 3:
        raise ValueError(f"levels must be an integer >= 3 (got {levels!r})")
    ns = tuple(cfg.n_cells * 2**k for k in range(levels))
    finals, errors = zip(*(_final_state(cfg, n) for n in ns))
    out = StudyResult(ns, errors=tuple(errors))
    a = [s.a for s in finals]
    e = [sum(energy(s, cfg.params)) for s in finals]
    da = tuple(abs(a[k + 1] - a[k]) for k in range(levels - 1))
    de = tuple(abs(e[k + 1] - e[k]) for k in range(levels - 1))
    drho = tuple(float(np.max(np.abs(restrict_density(finals[k + 1].rho) - finals[k].rho)))
                 for k in range(levels - 1))
    for name, diffs, scale in (("a", da, abs(a[-1])), ("energy", de, abs(e[-1])),
                               ("rho", drho, float(np.max(finals[-1].rho)))):
        order, status = observed_order(diffs, scale)
        out.quantities[name] = QuantityOrder(name, diffs, order, status)
    return out
