"""Hot per-step kernels with a numba path and a plain numpy/scipy path.

The backend is chosen once at import from ``LAGFREE_BACKEND``
(``numba`` or ``numpy``; default ``numba`` when numba imports) and can be
switched later with :func:`set_backend`.  Both backends implement the same
discrete operators and agree to rounding error.

Momentum system
---------------
Unknowns are the area-weighted face velocities ``w_j = r_j^(d-1) u_j`` for the
interior faces ``j = 1..N-1``.  Row ``j`` reads::

    dx w_j / (dt A_j^2) - dx u_j / (dt A_j) - dx f_j / A_j = s_j - s_{j-1}

with ``s_i = c_i (w_{i+1} - w_i) - P_i`` the effective viscous flux of cell
``i`` and ``c_i = (2 mu + rho_i) rho_i / dx``.  The free boundary imposes the
linearly extrapolated flux ``(3 s_{N-1} - s_{N-2}) / 2 = F_b`` (``F_b = 0`` for
the stress-free surface), which closes the last row and yields ``w_N``.
"""

from __future__ import annotations

import os

import numpy as np
from scipy.linalg import solve_banded

try:
    import numba
except ImportError:  # pragma: no cover - numba is optional
    numba = None

BACKENDS = ("numba", "numpy")

NOT_DOMINANT = 1


# ---------------------------------------------------------------- numpy path


def _np_radius_from_density(rho, dx, d):
    vol = np.concatenate(([0.0], np.cumsum(dx / rho)))
    return (d * vol) ** (1.0 / d)


def _np_jacobian_density(r, dx, d):
    return d * dx / (r[1:] ** d - r[:-1] ** d)


def _np_cell_flux(rho, r, u, dx, gamma, mu, d):
    w = r ** (d - 1) * u
    return (2.0 * mu + rho) * rho * (w[1:] - w[:-1]) / dx - rho**gamma


def _np_assemble(rho, r, u, dt, dx, gamma, mu, d, forcing, boundary_flux):
    n = rho.shape[0]
    area = r[1:n] ** (d - 1)
    c = (2.0 * mu + rho) * rho / dx
    p = rho**gamma
    mass = dx / (dt * area * area)
    diag = mass + c[: n - 1]
    diag[:-1] += c[1 : n - 1]
    lower = -c[1 : n - 1].copy()  # coefficient of w_{j-1} in row j (j >= 2)
    upper = -c[1 : n - 1].copy()  # coefficient of w_{j+1} in row j (j <= N-2)
    rhs = dx * u[1:n] / (dt * area) + dx * forcing[1:n] / area + p[: n - 1]
    rhs[:-1] -= p[1 : n - 1]
    k = n - 2
    diag[-1] = mass[-1] + (2.0 / 3.0) * c[k]
    if n > 2:
        lower[-1] = -(2.0 / 3.0) * c[k]
    rhs[-1] = dx * u[n - 1] / (dt * area[-1]) + dx * forcing[n - 1] / area[-1] + (2.0 / 3.0) * (p[k] + boundary_flux)
    return lower, diag, upper, rhs


def _np_momentum_solve(rho, r, u, dt, dx, gamma, mu, d, forcing, boundary_flux):
    n = rho.shape[0]
    lower, diag, upper, rhs = _np_assemble(rho, r, u, dt, dx, gamma, mu, d, forcing, boundary_flux)
    off = np.zeros(n - 1)
    off[1:] += np.abs(lower)
    off[:-1] += np.abs(upper)
    if np.any(~(diag > off)):
        return u.copy(), np.inf, NOT_DOMINANT
    ab = np.zeros((3, n - 1))
    ab[0, 1:] = upper
    ab[1] = diag
    ab[2, :-1] = lower
    w = solve_banded((1, 1), ab, rhs, check_finite=False)
    res = diag * w - rhs
    res[1:] += lower * w[:-1]
    res[:-1] += upper * w[1:]
    scale = max(np.max(np.abs(rhs)), 1e-300)
    c = (2.0 * mu + rho) * rho / dx
    p = rho**gamma
    w_prev = w[-2] if n > 2 else 0.0
    s_k = c[n - 2] * (w[-1] - w_prev) - p[n - 2]
    w_top = w[-1] + (p[n - 1] + (s_k + 2.0 * boundary_flux) / 3.0) / c[n - 1]
    out = np.empty(n + 1)
    out[0] = 0.0
    out[1:n] = w / r[1:n] ** (d - 1)
    out[n] = w_top / r[n] ** (d - 1)
    return out, float(np.max(np.abs(res)) / scale), 0


def _np_move(r, u, dt, dx, d):
    r_new = r + dt * u
    r_new[0] = 0.0
    vol = (r_new[1:] ** d - r_new[:-1] ** d) / d
    ok = bool(np.all(np.diff(r_new) > 0.0) and np.all(vol > 0.0))
    return r_new, dx / vol, ok


# ---------------------------------------------------------------- loop path


def _lp_radius_from_density(rho, dx, d):
    n = rho.shape[0]
    out = np.empty(n + 1)
    out[0] = 0.0
    acc = 0.0
    for i in range(n):
        acc += dx / rho[i]
        out[i + 1] = (d * acc) ** (1.0 / d)
    return out


def _lp_jacobian_density(r, dx, d):
    n = r.shape[0] - 1
    out = np.empty(n)
    for i in range(n):
        out[i] = d * dx / (r[i + 1] ** d - r[i] ** d)
    return out


def _lp_cell_flux(rho, r, u, dx, gamma, mu, d):
    n = rho.shape[0]
    out = np.empty(n)
    for i in range(n):
        dw = r[i + 1] ** (d - 1) * u[i + 1] - r[i] ** (d - 1) * u[i]
        out[i] = (2.0 * mu + rho[i]) * rho[i] * dw / dx - rho[i] ** gamma
    return out


def _lp_momentum_solve(rho, r, u, dt, dx, gamma, mu, d, forcing, boundary_flux):
    n = rho.shape[0]
    m = n - 1
    c = np.empty(n)
    p = np.empty(n)
    for i in range(n):
        c[i] = (2.0 * mu + rho[i]) * rho[i] / dx
        p[i] = rho[i] ** gamma
    lower = np.zeros(m)
    diag = np.empty(m)
    upper = np.zeros(m)
    rhs = np.empty(m)
    for k in range(m):
        j = k + 1
        area = r[j] ** (d - 1)
        mass = dx / (dt * area * area)
        base = dx * u[j] / (dt * area) + dx * forcing[j] / area
        if k < m - 1:
            diag[k] = mass + c[j - 1] + c[j]
            upper[k] = -c[j]
            rhs[k] = base + p[j - 1] - p[j]
        else:
            diag[k] = mass + (2.0 / 3.0) * c[j - 1]
            rhs[k] = base + (2.0 / 3.0) * (p[j - 1] + boundary_flux)
        if k > 0:
            lower[k] = -c[j - 1] * (1.0 if k < m - 1 else 2.0 / 3.0)
        if not diag[k] > abs(lower[k]) + abs(upper[k]):
            return u.copy(), np.inf, NOT_DOMINANT
    # Thomas elimination; row k couples w_{k-1} (lower[k]) and w_{k+1} (upper[k])
    cp = np.empty(m)
    dp = np.empty(m)
    cp[0] = upper[0] / diag[0]
    dp[0] = rhs[0] / diag[0]
    for k in range(1, m):
        den = diag[k] - lower[k] * cp[k - 1]
        cp[k] = upper[k] / den
        dp[k] = (rhs[k] - lower[k] * dp[k - 1]) / den
    w = np.empty(m)
    w[m - 1] = dp[m - 1]
    for k in range(m - 2, -1, -1):
        w[k] = dp[k] - cp[k] * w[k + 1]
    res_max = 0.0
    scale = 1e-300
    for k in range(m):
        v = diag[k] * w[k] - rhs[k]
        if k > 0:
            v += lower[k] * w[k - 1]
        if k < m - 1:
            v += upper[k] * w[k + 1]
        res_max = max(res_max, abs(v))
        scale = max(scale, abs(rhs[k]))
    w_prev = w[m - 2] if m > 1 else 0.0
    s_k = c[n - 2] * (w[m - 1] - w_prev) - p[n - 2]
    w_top = w[m - 1] + (p[n - 1] + (s_k + 2.0 * boundary_flux) / 3.0) / c[n - 1]
    out = np.empty(n + 1)
    out[0] = 0.0
    for k in range(m):
        out[k + 1] = w[k] / r[k + 1] ** (d - 1)
    out[n] = w_top / r[n] ** (d - 1)
    return out, res_max / scale, 0


def _lp_move(r, u, dt, dx, d):
    n = r.shape[0] - 1
    r_new = np.empty(n + 1)
    r_new[0] = 0.0
    for j in range(1, n + 1):
        r_new[j] = r[j] + dt * u[j]
    rho = np.empty(n)
    ok = True
    for i in range(n):
        vol = (r_new[i + 1] ** d - r_new[i] ** d) / d
        if not (r_new[i + 1] > r_new[i] and vol > 0.0):
            ok = False
            rho[i] = np.nan
        else:
            rho[i] = dx / vol
    return r_new, rho, ok


_NUMPY = {
    "radius_from_density": _np_radius_from_density,
    "jacobian_density": _np_jacobian_density,
    "cell_flux": _np_cell_flux,
    "momentum_solve": _np_momentum_solve,
    "move": _np_move,
}

_LOOPS = {
    "radius_from_density": _lp_radius_from_density,
    "jacobian_density": _lp_jacobian_density,
    "cell_flux": _lp_cell_flux,
    "momentum_solve": _lp_momentum_solve,
    "move": _lp_move,
}

if numba is not None:
    _NUMBA = {name: numba.njit(cache=True)(fn) for name, fn in _LOOPS.items()}
else:  # pragma: no cover
    _NUMBA = None

_active = _NUMPY


def available_backends() -> tuple[str, ...]:
    return BACKENDS if _NUMBA is not None else ("numpy",)


def set_backend(name: str) -> None:
    global _active
    name = name.lower()
    if name == "numpy":
        _active = _NUMPY
    elif name == "numba":
        if _NUMBA is None:
            raise RuntimeError("numba backend requested but numba is not installed")
        _active = _NUMBA
    else:
        raise ValueError(f"unknown backend {name!r}; expected one of {BACKENDS}")


def get_backend() -> str:
    return "numba" if _active is _NUMBA else "numpy"


def table(name: str) -> dict:
    """Kernel table for ``name`` without changing the active backend."""
    if name == "numpy":
        return _NUMPY
    if name == "numba" and _NUMBA is not None:
        return _NUMBA
    raise ValueError(f"backend {name!r} unavailable")


_env = os.environ.get("LAGFREE_BACKEND", "numba" if _NUMBA is not None else "numpy")
set_backend(_env)


def radius_from_density(rho, dx, d):
    return _active["radius_from_density"](rho, dx, d)


def jacobian_density(r, dx, d):
    return _active["jacobian_density"](r, dx, d)


def cell_flux(rho, r, u, dx, gamma, mu, d):
    return _active["cell_flux"](rho, r, u, dx, gamma, mu, d)


def momentum_solve(rho, r, u, dt, dx, gamma, mu, d, forcing, boundary_flux):
    """Return ``(u_new, relative_residual, status)``; status 0 means solved."""
    return _active["momentum_solve"](rho, r, u, dt, dx, gamma, mu, d, forcing, boundary_flux)


def move(r, u, dt, dx, d):
    """Advance radii by ``dt * u``; return ``(r_new, rho_new, ok)``."""
    return _active["move"](r, u, dt, dx, d)
