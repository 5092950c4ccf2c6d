"""Functionals and monitors evaluated on states and trajectories.

Radial integrals are ``int_0^a (.) r^(d-1) dr``.  Density is piecewise
constant per cell; velocity is taken linear in ``r`` inside each cell, and the
cell integrals use three-point Gauss-Legendre in ``r``.  That rule is exact for
every closed-form check in the test-suite (``u = r``, constant ``rho``).
"""

from __future__ import annotations

import math
from dataclasses import astuple, dataclass, fields
from typing import Sequence

import numpy as np

from . import kernels
from .model import LagState, Params, cell_volumes, eulerian_mass

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(3)

SUPERCRITICAL = "supercritical"
CRITICAL = "critical"
SUBCRITICAL = "subcritical"


@dataclass(frozen=True)
class DiagnosticRecord:
    tau: float
    a: float
    mass: float
    e_kin: float
    e_pot: float
    diss_rate: float
    diss_cum: float
    h_value: float
    u_max: float
    div_l2: float
    rho_max: float
    rho_min: float
    lp_rho: float
    rho_u3: float
    f_boundary: float

    @classmethod
    def columns(cls) -> tuple[str, ...]:
        return tuple(f.name for f in fields(cls))

    def values(self) -> tuple[float, ...]:
        return astuple(self)

    @property
    def energy(self) -> float:
        return self.e_kin + self.e_pot


@dataclass(frozen=True)
class RateVerdict:
    regime: str
    a_exponent: float | None
    aM_exponent: float
    log_correction: bool
    fitted_exponent: float | None = None
    fit_residual: float | None = None


def _radial_quadrature(state: LagState, dim: int, integrand) -> np.ndarray:
    """Per-cell ``int g(u(s), s) s^(d-1) ds`` with ``u`` linear in ``s``."""
    r0, r1 = state.r[:-1], state.r[1:]
    half = 0.5 * (r1 - r0)
    mid = 0.5 * (r1 + r0)
    s = mid[:, None] + half[:, None] * _GL_NODES[None, :]
    t = (s - r0[:, None]) / (r1 - r0)[:, None]
    u = state.u[:-1, None] + (state.u[1:] - state.u[:-1])[:, None] * t
    vals = integrand(u, s) * s ** (dim - 1)
    return half * (vals @ _GL_WEIGHTS)


def cell_divergence(state: LagState, params: Params) -> np.ndarray:
    """``div u = rho (r^(d-1) u)_x`` per cell."""
    w = state.r ** (params.dim - 1) * state.u
    return state.rho * np.diff(w) / state.dx


def energy(state: LagState, params: Params) -> tuple[float, float]:
    kin = _radial_quadrature(state, params.dim, lambda u, s: 0.5 * u * u)
    e_kin = float(np.sum(state.rho * kin))
    vol = cell_volumes(state.r, params.dim)
    e_pot = float(np.sum(state.rho**params.gamma * vol)) / (params.gamma - 1.0)
    return e_kin, e_pot


def dissipation_rate(state: LagState, params: Params) -> float:
    div = cell_divergence(state, params)
    vol = cell_volumes(state.r, params.dim)
    return float(np.sum((2.0 * params.mu + state.rho) * div * div * vol))


def effective_viscous_flux(state: LagState, params: Params) -> np.ndarray:
    """``F = (2 mu + rho) div u - rho^gamma`` per cell."""
    return kernels.cell_flux(state.rho, state.r, state.u, state.dx, params.gamma, params.mu, params.dim)


def boundary_flux(state: LagState, params: Params) -> float:
    """``F`` linearly extrapolated from the last two cells to ``x = 1``."""
    f = effective_viscous_flux(state, params)
    if f.shape[0] < 2:
        return float(f[-1])
    return float(1.5 * f[-1] - 0.5 * f[-2])


def theta_field(state: LagState, params: Params) -> np.ndarray:
    rho = np.asarray(state.rho, dtype=float)
    if np.any(~(rho > 0.0)):
        raise ValueError("theta requires positive density")
    return 2.0 * params.mu * np.log(rho) + rho


def xi_field(state: LagState, params: Params | None = None) -> np.ndarray:
    """``xi(r) = int_a^r rho u ds`` at faces (plain ``ds``), zero at the surface."""
    seg = state.rho * 0.5 * (state.u[1:] + state.u[:-1]) * np.diff(state.r)
    xi = np.zeros(state.r.shape[0])
    xi[:-1] = -np.cumsum(seg[::-1])[::-1]
    return xi


def _inertial_integral(state: LagState, params: Params) -> np.ndarray:
    """``(d-1) int_a^r rho u^2 / s ds`` at cell centres."""
    rc = 0.5 * (state.r[1:] + state.r[:-1])
    uc = 0.5 * (state.u[1:] + state.u[:-1])
    dr = np.diff(state.r)
    seg = (params.dim - 1) * state.rho * uc * uc / rc * dr
    g = np.zeros(state.r.shape[0])
    g[:-1] = -np.cumsum(seg[::-1])[::-1]
    return 0.5 * (g[1:] + g[:-1])


def transport_residual(prev: LagState, nxt: LagState, dt: float, params: Params) -> np.ndarray:
    """Per-cell defect of ``D_t(theta + xi) + (d-1) int_a^r rho u^2/s ds + P = 0``.

    At fixed mass coordinate the material derivative is a plain time
    difference.  Spatial terms are evaluated on ``nxt``.
    """

    def q(s):
        xi = xi_field(s, params)
        return theta_field(s, params) + 0.5 * (xi[1:] + xi[:-1])

    if dt > 0.0:
        rate = (q(nxt) - q(prev)) / dt
    else:
        rate = np.zeros(nxt.rho.shape[0])
    return rate + _inertial_integral(nxt, params) + nxt.rho**params.gamma


def h_functional(state: LagState, params: Params) -> float:
    t1 = 1.0 + state.tau
    kin = _radial_quadrature(state, params.dim, lambda u, s: (s - t1 * u) ** 2)
    first = float(np.sum(state.rho * kin))
    vol = cell_volumes(state.r, params.dim)
    pot = float(np.sum(state.rho**params.gamma * vol)) / (params.gamma - 1.0)
    return first + 2.0 * t1 * t1 * pot


def div_l2(state: LagState, params: Params) -> float:
    div = cell_divergence(state, params)
    return math.sqrt(float(np.sum(div * div * cell_volumes(state.r, params.dim))))


def sup_velocity_check(state: LagState, params: Params) -> tuple[float, float, bool]:
    u_inf = float(np.max(np.abs(state.u)))
    norm = div_l2(state, params)
    return u_inf, norm, u_inf <= norm * (1.0 + 1e-6)


def lp_density_norm(state: LagState, p: float, params: Params) -> float:
    if not p >= 1.0:
        raise ValueError(f"p must be >= 1 (got {p!r})")
    return float(np.sum(state.rho**p * cell_volumes(state.r, params.dim)))


def rho_u_cubed(state: LagState, params: Params) -> float:
    vals = _radial_quadrature(state, params.dim, lambda u, s: np.abs(u) ** 3)
    return float(np.sum(state.rho * vals))


def positive_part_monitor(state: LagState, params: Params) -> float:
    """``int rho f^(2 gamma)`` with ``f = (theta + xi)_+`` (diagnosis only)."""
    xi = xi_field(state, params)
    f = np.maximum(theta_field(state, params) + 0.5 * (xi[1:] + xi[:-1]), 0.0)
    return float(np.sum(state.rho * f ** (2.0 * params.gamma) * cell_volumes(state.r, params.dim)))


def diagnose(state: LagState, params: Params, diss_cum: float = 0.0) -> DiagnosticRecord:
    """Evaluate every monitored functional on ``state``."""
    e_kin, e_pot = energy(state, params)
    u_inf, dnorm, _ = sup_velocity_check(state, params)
    return DiagnosticRecord(
        tau=float(state.tau),
        a=state.a,
        mass=eulerian_mass(state, params),
        e_kin=e_kin,
        e_pot=e_pot,
        diss_rate=dissipation_rate(state, params),
        diss_cum=float(diss_cum),
        h_value=h_functional(state, params),
        u_max=u_inf,
        div_l2=dnorm,
        rho_max=float(np.max(state.rho)),
        rho_min=float(np.min(state.rho)),
        lp_rho=lp_density_norm(state, 2.0 * params.gamma + 1.0, params),
        rho_u3=rho_u_cubed(state, params),
        f_boundary=abs(boundary_flux(state, params)),
    )


def path_density_ratio(traj) -> tuple[float, float]:
    """Extremes of ``rho(x, tau) / rho0(x)`` over cells and stored states.

    A particle path is a fixed mass coordinate, so the ratio is taken cell by
    cell against the first stored state.
    """
    states = traj.states
    if not states:
        raise ValueError("trajectory has no states")
    rho0 = states[0].rho
    hi, lo = 1.0, 1.0
    for s in states:
        q = s.rho / rho0
        hi = max(hi, float(np.max(q)))
        lo = min(lo, float(np.min(q)))
    return hi, lo


def fit_growth_exponent(times: Sequence[float], values: Sequence[float], t_min: float = 10.0,
                        t_max: float | None = None) -> tuple[float, float]:
    """Least-squares slope of ``log(values)`` against ``log(1 + t)`` for ``t >= t_min``.

    Returns ``(slope, rms_residual)``.
    """
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    if t.shape != v.shape:
        raise ValueError("times and values must have the same length")
    mask = t >= t_min
    if t_max is not None:
        mask &= t <= t_max
    if np.count_nonzero(mask) < 8:
        raise ValueError(f"need at least 8 samples with t >= {t_min}, got {np.count_nonzero(mask)}")
    if np.any(~(v[mask] > 0.0)):
        raise ValueError("values must be positive for a log-log fit")
    lx, ly = np.log1p(t[mask]), np.log(v[mask])
    coef, *_ = np.linalg.lstsq(np.vstack([lx, np.ones_like(lx)]).T, ly, rcond=None)
    resid = ly - (coef[0] * lx + coef[1])
    return float(coef[0]), float(np.sqrt(np.mean(resid * resid)))


def theoretical_rate(params: Params) -> RateVerdict:
    """Lower-bound growth exponents of ``a`` and its running maximum."""
    crit = params.critical_gamma
    e = 1.0 / (params.dim * params.gamma)
    if math.isclose(params.gamma, crit, rel_tol=0.0, abs_tol=1e-12):
        return RateVerdict(CRITICAL, e, e, True)
    if params.gamma > crit:
        return RateVerdict(SUPERCRITICAL, e, e, False)
    return RateVerdict(SUBCRITICAL, None, (params.gamma - 1.0) / params.gamma, False)


def running_max(times: Sequence[float], values: Sequence[float]) -> np.ndarray:
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    if t.shape != v.shape:
        raise ValueError("times and values must have the same length")
    if np.any(np.diff(t) < 0.0):
        raise ValueError("times must be non-decreasing")
    return np.maximum.accumulate(v) if v.size else v.copy()
