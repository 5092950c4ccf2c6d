"""Physical parameters, the fixed mass grid, and initial profiles.

The fluid occupies ``0 <= r <= a(t)`` and is described on the fixed mass
interval ``x in [0, 1]`` with ``dx/dr = rho r^(d-1)``.  Densities live at cell
centres; radii and velocities live at faces, face 0 being the origin.

All radial integrals use the measure ``r^(d-1) dr`` with no angular constant,
so the total mass of every admissible state is exactly 1.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from . import kernels

log = logging.getLogger(__name__)

PROFILE_KINDS = ("constant", "parabolic", "gaussian-bump", "table")
VELOCITY_KINDS = ("zero", "linear", "table")

# relative density floor applied to initial data
RHO_FLOOR = 1e-8


@dataclass(frozen=True)
class Params:
    """Adiabatic exponent, shear viscosity and spatial dimension.

    Pressure is ``rho**gamma`` and the bulk viscosity is ``lambda(rho) = rho``.
    """

    gamma: float
    mu: float
    dim: int

    def __post_init__(self):
        if not (math.isfinite(self.gamma) and self.gamma > 1.0):
            raise ValueError(f"gamma must exceed 1 (got {self.gamma!r})")
        if not (math.isfinite(self.mu) and self.mu > 0.0):
            raise ValueError(f"mu must be positive (got {self.mu!r})")
        if self.dim not in (2, 3):
            raise ValueError(f"dim must be 2 or 3 (got {self.dim!r})")

    @property
    def critical_gamma(self) -> float:
        return 1.0 + 1.0 / self.dim

    def pressure(self, rho):
        return np.power(rho, self.gamma)


def make_params(gamma: float, mu: float, dim: int) -> Params:
    if isinstance(dim, float):
        if not dim.is_integer():
            raise ValueError(f"dim must be 2 or 3 (got {dim!r})")
        dim = int(dim)
    return Params(float(gamma), float(mu), dim)


@dataclass(frozen=True)
class MassGrid:
    n_cells: int

    def __post_init__(self):
        if int(self.n_cells) != self.n_cells or self.n_cells < 2:
            raise ValueError(f"n_cells must be an integer >= 2 (got {self.n_cells!r})")

    @property
    def dx(self) -> float:
        return 1.0 / self.n_cells

    @property
    def faces(self) -> np.ndarray:
        return np.arange(self.n_cells + 1) * self.dx

    @property
    def centers(self) -> np.ndarray:
        return (np.arange(self.n_cells) + 0.5) * self.dx


@dataclass(frozen=True, eq=False)
class LagState:
    """Discrete state on the mass grid at time ``tau``.

    ``rho`` has one entry per cell, ``u`` and ``r`` one entry per face.
    """

    rho: np.ndarray
    u: np.ndarray
    r: np.ndarray
    tau: float = 0.0

    @property
    def n_cells(self) -> int:
        return self.rho.shape[0]

    @property
    def dx(self) -> float:
        return 1.0 / self.rho.shape[0]

    @property
    def a(self) -> float:
        """Free-boundary radius, i.e. the radius of the last face."""
        return float(self.r[-1])

    def copy(self) -> "LagState":
        return LagState(self.rho.copy(), self.u.copy(), self.r.copy(), self.tau)

    def check(self, dim: int, rtol: float = 1e-10) -> None:
        """Raise ``ValueError`` if any structural invariant is violated."""
        n = self.rho.shape[0]
        if self.u.shape != (n + 1,) or self.r.shape != (n + 1,):
            raise ValueError("u and r must have n_cells + 1 entries")
        if self.r[0] != 0.0:
            raise ValueError("radius at face 0 must be exactly 0")
        if np.any(np.diff(self.r) <= 0.0):
            raise ValueError("radii must be strictly increasing")
        if np.any(~(self.rho > 0.0)):
            raise ValueError("density must be positive in every cell")
        vol = (self.r[1:] ** dim - self.r[:-1] ** dim) / dim
        mismatch = np.max(np.abs(vol * self.rho / self.dx - 1.0))
        if mismatch > rtol:
            raise ValueError(f"Jacobian identity violated (max relative mismatch {mismatch:.3e})")


@dataclass(frozen=True)
class ProfileSpec:
    """Initial density/velocity description.

    ``params`` carries the kind-specific shape values:

    * constant: none
    * parabolic: ``b`` in ``rho ~ b - r**2`` (default 1.2)
    * gaussian-bump: ``base``, ``amplitude``, ``center``, ``width``
    * table: ``r`` and ``rho`` sequences, linearly interpolated

    ``u0_params`` holds ``slope`` for a linear velocity ``u = slope * r`` or
    ``r``/``u`` sequences for a table.  ``epsilon`` shifts the density by a
    constant before normalisation and rescales the velocity so that the
    momentum ``rho*u`` is unchanged.
    """

    kind: str = "constant"
    params: dict = field(default_factory=dict)
    a0: float = 1.0
    u0_kind: str = "zero"
    u0_params: dict = field(default_factory=dict)
    epsilon: float = 0.0

    def __post_init__(self):
        if self.kind not in PROFILE_KINDS:
            raise ValueError(f"profile must be one of {PROFILE_KINDS} (got {self.kind!r})")
        if self.u0_kind not in VELOCITY_KINDS:
            raise ValueError(f"u0 must be one of {VELOCITY_KINDS} (got {self.u0_kind!r})")
        if not (math.isfinite(self.a0) and self.a0 > 0.0):
            raise ValueError(f"a0 must be positive (got {self.a0!r})")
        if not (self.epsilon >= 0.0):
            raise ValueError(f"epsilon must be non-negative (got {self.epsilon!r})")
        if self.kind == "table":
            _check_table(self.params, "rho", self.a0)
        if self.u0_kind == "table":
            _check_table(self.u0_params, "u", self.a0)


def _check_table(p: dict, name: str, a0: float) -> None:
    try:
        r = np.asarray(p["r"], dtype=float)
        v = np.asarray(p[name], dtype=float)
    except KeyError as exc:
        raise ValueError(f"table profile needs 'r' and '{name}' entries") from exc
    if r.ndim != 1 or r.shape != v.shape or r.size < 2:
        raise ValueError(f"table 'r' and '{name}' must be 1-d of equal length >= 2")
    if np.any(np.diff(r) <= 0.0):
        raise ValueError("table radii must be strictly increasing")
    if r[0] > 0.0 or r[-1] < a0:
        raise ValueError(f"table radii must cover [0, a0={a0}]")


def _shape_function(spec: ProfileSpec) -> Callable[[np.ndarray], np.ndarray]:
    p = spec.params
    if spec.kind == "constant":
        return lambda r: np.ones_like(np.asarray(r, dtype=float))
    if spec.kind == "parabolic":
        b = float(p.get("b", 1.2))
        return lambda r: b - np.asarray(r, dtype=float) ** 2
    if spec.kind == "gaussian-bump":
        base = float(p.get("base", 1.0))
        amp = float(p.get("amplitude", 1.0))
        c = float(p.get("center", 0.0))
        w = float(p.get("width", 0.3))
        return lambda r: base + amp * np.exp(-0.5 * ((np.asarray(r, dtype=float) - c) / w) ** 2)
    tr = np.asarray(p["r"], dtype=float)
    tv = np.asarray(p["rho"], dtype=float)
    return lambda r: np.interp(r, tr, tv)


def _velocity_function(spec: ProfileSpec) -> Callable[[np.ndarray], np.ndarray]:
    if spec.u0_kind == "zero":
        return lambda r: np.zeros_like(np.asarray(r, dtype=float))
    if spec.u0_kind == "linear":
        slope = float(spec.u0_params.get("slope", 0.0))
        return lambda r: slope * np.asarray(r, dtype=float)
    tr = np.asarray(spec.u0_params["r"], dtype=float)
    tu = np.asarray(spec.u0_params["u"], dtype=float)
    return lambda r: np.interp(r, tr, tu)


def _fine_radii(a0: float, n_fine: int) -> np.ndarray:
    return np.linspace(0.0, a0, n_fine + 1)


@dataclass(frozen=True)
class InitialProfile:
    """Normalised initial density and velocity as functions of radius."""

    density: Callable[[np.ndarray], np.ndarray]
    velocity: Callable[[np.ndarray], np.ndarray]
    scale: float
    floor_active: bool


def normalized_profile(spec: ProfileSpec, dim: int, resolution: int = 1 << 16) -> InitialProfile:
    """Return ``rho0`` scaled so that ``int_0^a0 rho0 r^(d-1) dr = 1``.

    ``scale`` is the factor applied to the raw shape function (for a
    parabolic profile it is the constant ``c`` in ``c (b - r^2)``).
    """
    shape = _shape_function(spec)
    rf = _fine_radii(spec.a0, resolution)
    # endpoints included so that vacuum at r = a0 is detected
    raw = shape(rf)
    peak = float(np.max(raw))
    if not (peak > 0.0) or not np.all(np.isfinite(raw)):
        raise ValueError("initial density must be positive somewhere on [0, a0)")
    floor = RHO_FLOOR * peak
    floor_active = bool(np.any(raw < floor))
    if floor_active:
        log.warning("initial density floored at %.3e on part of [0, a0)", floor)

    def floored(r):
        return np.maximum(shape(r), floor)

    weight = lambda r: floored(r) * np.asarray(r, dtype=float) ** (dim - 1)
    total = _radial_integral(weight, spec.a0)
    eps = spec.epsilon
    if eps > 0.0:
        # int (rho0 + eps) r^(d-1) dr with rho0 already normalised
        z_eps = 1.0 + eps * spec.a0**dim / dim
        velocity = _velocity_function(spec)

        def density(r):
            return (floored(r) / total + eps) / z_eps

        def vel(r):
            rho0 = floored(r) / total
            return rho0 * velocity(r) / (rho0 + eps) * z_eps

        return InitialProfile(density, vel, 1.0 / (total * z_eps), floor_active)

    return InitialProfile(lambda r: floored(r) / total, _velocity_function(spec), 1.0 / total, floor_active)


def _radial_integral(f: Callable, a0: float) -> float:
    from scipy.integrate import quad

    # table and floored profiles have kinks; split to keep quad accurate
    pts = np.linspace(0.0, a0, 65)
    return float(sum(quad(f, lo, hi, epsabs=0.0, epsrel=1e-13, limit=200)[0] for lo, hi in zip(pts[:-1], pts[1:])))


def init_profile(spec: ProfileSpec, params: Params, grid: MassGrid) -> LagState:
    """Discretise ``spec`` on ``grid`` at ``tau = 0``.

    Face radii come from inverting the cumulative mass of the normalised
    profile; cell densities are the exact cell averages ``dx / volume``, so the
    discrete mass is 1 and ``radius_from_density`` reproduces the radii.
    """
    d = params.dim
    prof = normalized_profile(spec, d)
    n_fine = 64 * grid.n_cells
    rf = _fine_radii(spec.a0, n_fine)
    rc = 0.5 * (rf[1:] + rf[:-1])
    shell = (rf[1:] ** d - rf[:-1] ** d) / d
    # midpoint density times exact shell volume; second order in the fine spacing
    cum = np.concatenate(([0.0], np.cumsum(prof.density(rc) * shell)))
    cum /= cum[-1]
    # r^d is close to linear in x near the origin, so invert in that variable
    rd = np.interp(grid.faces, cum, rf**d)
    rd[0] = 0.0
    rd[-1] = spec.a0**d
    if np.any(np.diff(rd) <= 0.0):
        raise ValueError("initial profile produced non-increasing radii; refine the profile")
    vol = np.diff(rd) / d
    rho = grid.dx / vol
    if np.any(~(rho > 0.0)):
        raise ValueError("non-positive initial density after flooring")
    r = radius_from_density(rho, params, grid)
    u = np.asarray(prof.velocity(r), dtype=float).copy()
    u[0] = 0.0
    return LagState(rho, u, r, 0.0)


def radius_from_density(rho, params: Params, grid: MassGrid | None = None) -> np.ndarray:
    """Face radii ``r(x) = (d * int_0^x ds / rho)^(1/d)`` from cell densities."""
    rho = np.asarray(rho, dtype=float)
    if grid is not None and rho.shape != (grid.n_cells,):
        raise ValueError(f"expected {grid.n_cells} cell densities, got shape {rho.shape}")
    if np.any(~(rho > 0.0)):
        raise ValueError("density must be positive in every cell")
    return kernels.radius_from_density(rho, 1.0 / rho.shape[0], params.dim)


def jacobian_density(r, params: Params) -> np.ndarray:
    """Cell densities ``dx / volume`` implied by face radii."""
    r = np.asarray(r, dtype=float)
    return kernels.jacobian_density(r, 1.0 / (r.shape[0] - 1), params.dim)


def cell_volumes(r, dim: int) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    return (r[1:] ** dim - r[:-1] ** dim) / dim


def eulerian_mass(state: LagState, params: Params) -> float:
    """``int_0^a rho r^(d-1) dr`` for the piecewise-constant density.

    Uses the Eulerian radii and densities only, so it checks the Jacobian
    bookkeeping rather than restating it.
    """
    return float(np.sum(state.rho * cell_volumes(state.r, params.dim)))


def state_from_arrays(rho: Sequence[float], u: Sequence[float], params: Params, tau: float = 0.0) -> LagState:
    """Build a state from cell densities and face velocities (radii derived)."""
    rho = np.asarray(rho, dtype=float)
    u = np.asarray(u, dtype=float).copy()
    r = radius_from_density(rho, params)
    return LagState(rho, u, r, float(tau))


def with_velocity(state: LagState, u) -> LagState:
    return replace(state, u=np.asarray(u, dtype=float))
