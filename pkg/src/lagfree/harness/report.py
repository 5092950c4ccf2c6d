"""Pass/fail verdicts for a completed trajectory."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .. import diagnostics as dg
from ..model import Params
from ..solver import Trajectory

MASS_TOL = 1e-8
ENERGY_FACTOR = 1.01
SUP_SLACK = 1e-6
BOUNDARY_TOL = 1e-8
INTEGRABILITY_FACTOR = 2.0
RATE_SLACK = 0.05
UPPER_RATE = 0.5

CHECK_NAMES = (
    "mass_drift",
    "energy_budget",
    "sup_velocity",
    "positivity",
    "path_ratio",
    "boundary_flux",
    "integrability",
    "growth_lower",
    "growth_upper",
)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    value: float
    threshold: float
    note: str = ""


@dataclass(frozen=True)
class InvariantReport:
    checks: tuple[CheckResult, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {"passed": self.passed, "checks": [asdict(c) for c in self.checks]}

    def lines(self) -> list[str]:
        return [f"{'PASS' if c.passed else 'FAIL'} {c.name}: {c.value:.6g} vs {c.threshold:.6g}"
                + (f" ({c.note})" if c.note else "") for c in self.checks]


def _growth_checks(traj: Trajectory, params: Params, t_min: float) -> list[CheckResult]:
    t = traj.column("tau")
    a = traj.column("a")
    theory = dg.theoretical_rate(params)
    low_thr = theory.aM_exponent - RATE_SLACK
    up_thr = UPPER_RATE + RATE_SLACK
    if np.count_nonzero(t >= t_min) < 8:
        note = f"fewer than 8 samples with t >= {t_min}"
        return [CheckResult("growth_lower", True, math.nan, low_thr, note),
                CheckResult("growth_upper", True, math.nan, up_thr, note)]
    slope_m, _ = dg.fit_growth_exponent(t, dg.running_max(t, a), t_min)
    lower = CheckResult("growth_lower", slope_m >= low_thr, slope_m, low_thr, theory.regime)
    if params.dim == 2:
        slope_a, _ = dg.fit_growth_exponent(t, a, t_min)
        upper = CheckResult("growth_upper", slope_a <= up_thr, slope_a, up_thr)
    else:
        upper = CheckResult("growth_upper", True, math.nan, up_thr, "bound stated for d=2 only")
    return [lower, upper]


def invariant_report(traj: Trajectory, params: Params, window_start: float = 10.0) -> InvariantReport:
    """Evaluate every check on ``traj``; a pure function of its inputs."""
    if not traj.records:
        raise ValueError("trajectory has no records")
    col = traj.column
    checks: list[CheckResult] = []

    drift = float(np.max(np.abs(col("mass") - 1.0)))
    checks.append(CheckResult("mass_drift", drift <= MASS_TOL, drift, MASS_TOL))

    budget = col("e_kin") + col("e_pot") + col("diss_cum")
    ratio = float(np.max(budget) / budget[0]) if budget[0] > 0.0 else 1.0
    checks.append(CheckResult("energy_budget", ratio <= ENERGY_FACTOR, ratio, ENERGY_FACTOR))

    u_max, d_l2 = col("u_max"), col("div_l2")
    holds = bool(np.all(u_max <= d_l2 * (1.0 + SUP_SLACK)))
    moving = d_l2 > 0.0
    worst = float(np.max(u_max[moving] / d_l2[moving])) if np.any(moving) else 0.0
    checks.append(CheckResult("sup_velocity", holds, worst, 1.0 + SUP_SLACK, "max of u_max / div_l2"))

    rho_min = float(np.min(col("rho_min")))
    checks.append(CheckResult("positivity", rho_min > 0.0 and bool(np.all(np.isfinite(col("rho_max")))),
                              rho_min, 0.0))

    if traj.states:
        hi, lo = dg.path_density_ratio(traj)
        checks.append(CheckResult("path_ratio", lo > 0.0 and math.isfinite(hi), lo, 0.0, f"max ratio {hi:.6g}"))
    else:
        checks.append(CheckResult("path_ratio", True, math.nan, 0.0, "no stored states"))

    # the t=0 value is a compatibility residual of the data, not a solver output
    t = col("tau")
    later = t > 0.0
    scale = np.maximum(1.0, col("rho_max") ** params.gamma)
    sampled = float(np.max(col("f_boundary")[later] / scale[later])) if np.any(later) else 0.0
    fb = max(sampled, traj.max_boundary_residual)
    checks.append(CheckResult("boundary_flux", fb <= BOUNDARY_TOL, fb, BOUNDARY_TOL))

    if t.size >= 4 and t[-1] > 0.0:
        early = t <= 0.25 * t[-1]
        worst = 0.0
        for name in ("lp_rho", "rho_u3"):
            v = col(name)
            ref = float(np.max(v[early]))
            top = float(np.max(v))
            if not math.isfinite(top):
                worst = math.inf
            elif ref > 0.0:
                worst = max(worst, top / ref)
            elif top > 0.0:
                worst = math.inf
        checks.append(CheckResult("integrability", worst <= INTEGRABILITY_FACTOR, worst, INTEGRABILITY_FACTOR,
                                  "sup over run / sup over first quarter"))
    else:
        checks.append(CheckResult("integrability", True, math.nan, INTEGRABILITY_FACTOR, "run too short"))

    checks.extend(_growth_checks(traj, params, window_start))
    return InvariantReport(tuple(checks))
