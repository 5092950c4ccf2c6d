"""Time stepping for the Lagrangian fixed-boundary system.

One step moves the radii with the current face velocities, recomputes density
from the Jacobian identity, then solves the implicit momentum system on the
moved geometry.  Mass is exact because density is never integrated, only
derived from cell volumes.  The Picard stepper iterates the same pair of
updates to a fixed point in which the geometry is advanced with the new
velocity.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import kernels
from .diagnostics import DiagnosticRecord, boundary_flux, diagnose, dissipation_rate
from .model import LagState, Params

log = logging.getLogger(__name__)

SCHEMES = ("semi_implicit", "picard")


class SolverError(RuntimeError):
    """Base class for step failures."""


class CellInversionError(SolverError):
    pass


class SingularSystemError(SolverError):
    pass


class PicardConvergenceError(SolverError):
    def __init__(self, message: str, last_difference: float, history: Sequence[float] = ()):
        super().__init__(message)
        self.last_difference = last_difference
        self.history = list(history)


@dataclass(frozen=True)
class StepConfig:
    cfl: float = 0.5
    dt_max: float = 1.0
    scheme: str = "semi_implicit"
    picard_tol: float = 1e-12
    picard_max_iter: int = 50

    def __post_init__(self):
        if not (0.0 < self.cfl <= 1.0):
            raise ValueError(f"cfl must lie in (0, 1] (got {self.cfl!r})")
        if not (self.dt_max >= 0.0):
            raise ValueError(f"dt_max must be non-negative (got {self.dt_max!r})")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES} (got {self.scheme!r})")
        if not (self.picard_tol > 0.0):
            raise ValueError(f"picard_tol must be positive (got {self.picard_tol!r})")
        if int(self.picard_max_iter) != self.picard_max_iter or self.picard_max_iter < 1:
            raise ValueError(f"picard_max_iter must be an integer >= 1 (got {self.picard_max_iter!r})")


@dataclass(frozen=True)
class StepReport:
    dt_used: float
    picard_iters: int
    boundary_residual: float
    linear_solve_residual: float


def _check_dt(dt: float) -> float:
    dt = float(dt)
    if not (dt >= 0.0) or not math.isfinite(dt):
        raise ValueError(f"dt must be a finite non-negative number (got {dt!r})")
    return dt


def _solve_momentum(state: LagState, dt: float, params: Params, forcing=None,
                    boundary_flux_value: float = 0.0) -> tuple[np.ndarray, float]:
    if dt == 0.0:
        return state.u.copy(), 0.0
    f = np.zeros_like(state.u) if forcing is None else np.asarray(forcing, dtype=float)
    if f.shape != state.u.shape:
        raise ValueError("forcing must have one entry per face")
    u_new, res, status = kernels.momentum_solve(state.rho, state.r, state.u, dt, state.dx,
                                                params.gamma, params.mu, params.dim, f,
                                                float(boundary_flux_value))
    if status != 0 or not np.all(np.isfinite(u_new)):
        raise SingularSystemError("momentum system lost diagonal dominance; state is degenerate")
    return u_new, float(res)


def momentum_update_implicit(state: LagState, dt: float, params: Params, *, forcing=None,
                             boundary_flux: float = 0.0) -> np.ndarray:
    """Face velocities after one implicit momentum update with frozen ``(rho, r)``.

    ``forcing`` is an optional per-face body force added to ``u_tau``;
    ``boundary_flux`` is the value imposed on ``F`` at ``x = 1``.
    """
    dt = _check_dt(dt)
    return _solve_momentum(state, dt, params, forcing, boundary_flux)[0]


def continuity_and_geometry_update(state: LagState, u_new, dt: float, params: Params) -> LagState:
    """Advance radii by ``dt * u_new`` and rebuild density from cell volumes."""
    dt = _check_dt(dt)
    u_new = np.asarray(u_new, dtype=float)
    if u_new.shape != state.u.shape:
        raise ValueError("u_new must have one entry per face")
    if u_new[0] != 0.0:
        raise ValueError("velocity at the origin must be exactly 0")
    if dt == 0.0:
        return LagState(state.rho.copy(), u_new.copy(), state.r.copy(), state.tau)
    r_new, rho_new, ok = kernels.move(state.r, u_new, dt, state.dx, params.dim)
    if not ok or not np.all(rho_new > 0.0):
        raise CellInversionError(f"cell inversion at tau={state.tau:.6g} with dt={dt:.3e}; reduce dt or cfl")
    return LagState(rho_new, u_new.copy(), r_new, state.tau + dt)


def stable_dt(state: LagState, cfg: StepConfig, params: Params) -> float:
    """``cfl`` times the smaller of the acoustic and transport limits, capped at ``dt_max``.

    Acoustic: ``dx / (rho c A)`` per cell with ``c^2 = gamma rho^(gamma-1)`` and
    ``A`` the outer-face area factor.  Transport: ``dx / (rho |d(A u)|)``, the time
    for a cell to change its volume by its own size.
    """
    area = state.r[1:] ** (params.dim - 1)
    sound = np.sqrt(params.gamma * state.rho ** (params.gamma - 1.0))
    acoustic = float(np.min(state.dx / (state.rho * sound * area)))
    w = state.r ** (params.dim - 1) * state.u
    rate = state.rho * np.abs(np.diff(w))
    peak = float(np.max(rate))
    transport = state.dx / peak if peak > 0.0 else math.inf
    return min(cfg.cfl * min(acoustic, transport), cfg.dt_max)


def picard_iterate(state: LagState, dt: float, cfg: StepConfig, params: Params,
                   history: list | None = None) -> tuple[np.ndarray, int]:
    """Fixed-point iteration of geometry update and linear momentum solve.

    Iterate ``k`` moves the geometry with ``u^(k)``, then solves the momentum
    system on it (the mass term always uses the start-of-step velocity).  The
    first iterate equals the semi-implicit step.  Per-iteration max-norm
    differences are appended to ``history`` when given.
    """
    dt = _check_dt(dt)
    uk = state.u.copy()
    diff = math.inf
    for k in range(1, cfg.picard_max_iter + 1):
        moved = continuity_and_geometry_update(state, uk, dt, params)
        u_next, _ = _solve_momentum(replace(moved, u=state.u), dt, params)
        diff = float(np.max(np.abs(u_next - uk)))
        if history is not None:
            history.append(diff)
        log.debug("picard iteration %d: max |du| = %.3e", k, diff)
        uk = u_next
        if diff < cfg.picard_tol:
            return uk, k
    raise PicardConvergenceError(
        f"picard iteration did not converge in {cfg.picard_max_iter} iterations "
        f"(last difference {diff:.3e}); reduce dt", diff, history or ())


def _boundary_scale(state: LagState, params: Params) -> float:
    return max(1.0, float(np.max(state.rho)) ** params.gamma)


def advance(state: LagState, dt: float, cfg: StepConfig, params: Params) -> tuple[LagState, StepReport]:
    """One step of size ``dt`` with the configured scheme."""
    dt = _check_dt(dt)
    if dt == 0.0:
        state = state.copy()
        return state, StepReport(0.0, 0, abs(boundary_flux(state, params)), 0.0)
    if cfg.scheme == "picard":
        u_new, iters = picard_iterate(state, dt, cfg, params)
        new = continuity_and_geometry_update(state, u_new, dt, params)
        _, res = _solve_momentum(replace(new, u=state.u), dt, params)
    else:
        iters = 0
        moved = continuity_and_geometry_update(state, state.u, dt, params)
        u_new, res = _solve_momentum(moved, dt, params)
        new = replace(moved, u=u_new)
    return new, StepReport(dt, iters, abs(boundary_flux(new, params)), res)


def step(state: LagState, cfg: StepConfig, params: Params) -> tuple[LagState, StepReport]:
    return advance(state, stable_dt(state, cfg, params), cfg, params)


@dataclass
class Trajectory:
    """Sampled records and states of one run.

    ``states[k]`` is the state at ``records[k].tau``.  ``error`` is set when a
    step failed; the samples up to the failure are kept.
    """

    params: Params
    records: list[DiagnosticRecord] = field(default_factory=list)
    states: list[LagState] = field(default_factory=list)
    snapshots: dict[float, LagState] = field(default_factory=dict)
    steps: int = 0
    picard_iters: int = 0
    max_boundary_residual: float = 0.0
    max_linear_residual: float = 0.0
    initial_boundary_residual: float = 0.0
    error: str | None = None

    @property
    def final(self) -> LagState:
        return self.states[-1]

    @property
    def times(self) -> np.ndarray:
        return np.array([r.tau for r in self.records])

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])


def _event_times(t_end: float, sample_every: float, snapshot_times: Sequence[float]) -> list[float]:
    k_max = int(math.floor(t_end / sample_every + 1e-9))
    events = {k * sample_every for k in range(1, k_max + 1)}
    events.update(float(t) for t in snapshot_times if 0.0 < t <= t_end)
    if t_end > 0.0:
        events.add(t_end)
    return sorted(events)


def run(initial: LagState, cfg: StepConfig, params: Params, t_end: float, sample_every: float,
        snapshot_times: Sequence[float] = ()) -> Trajectory:
    """Advance ``initial`` to ``t_end``, landing exactly on every sample time."""
    if not (t_end >= 0.0):
        raise ValueError(f"t_end must be non-negative (got {t_end!r})")
    if not (sample_every > 0.0):
        raise ValueError(f"sample_every must be positive (got {sample_every!r})")
    if t_end > 0.0 and cfg.dt_max <= 0.0:
        raise ValueError("dt_max = 0 cannot reach a positive t_end")

    traj = Trajectory(params)
    snaps = sorted({float(t) for t in snapshot_times if 0.0 <= t <= t_end})
    sample_times = {k * sample_every for k in range(int(math.floor(t_end / sample_every + 1e-9)) + 1)}
    state = initial.copy()
    diss_cum = 0.0
    traj.initial_boundary_residual = abs(boundary_flux(state, params)) / _boundary_scale(state, params)

    def record(s: LagState) -> None:
        if s.tau in sample_times:
            traj.records.append(diagnose(s, params, diss_cum))
            traj.states.append(s)
        if s.tau in snaps:
            traj.snapshots[s.tau] = s

    record(state)
    for target in _event_times(t_end, sample_every, snaps):
        while state.tau < target:
            dt = stable_dt(state, cfg, params)
            landing = dt >= target - state.tau
            if landing:
                dt = target - state.tau
            try:
                new, rep = advance(state, dt, cfg, params)
            except SolverError as exc:
                traj.error = f"{type(exc).__name__}: {exc}"
                log.error("run aborted at tau=%.6g: %s", state.tau, exc)
                return traj
            if landing:
                new = replace(new, tau=target)
            diss_cum += dt * dissipation_rate(new, params)
            traj.steps += 1
            traj.picard_iters += rep.picard_iters
            traj.max_boundary_residual = max(traj.max_boundary_residual,
                                             rep.boundary_residual / _boundary_scale(new, params))
            traj.max_linear_residual = max(traj.max_linear_residual, rep.linear_solve_residual)
            state = new
        record(state)
    return traj
