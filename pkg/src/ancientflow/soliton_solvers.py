"""ODE solvers for the translating bowl and the rotationally symmetric shrinkers.

Bowl soliton
    The graph ``x3 = f(r)`` of the bowl translating with speed ``c`` solves
    ``f_rr / (1 + f_r^2) + f_r / r = c``.  With ``g = f_r`` this is the
    first-order system ``f' = g``, ``g' = (1 + g^2)(c - g/r)``, integrated by
    classical fixed-step RK4 from a series start near the tip.

Shrinkers ``Sigma_a``
    The surface ``{x1^2 + x2^2 = u(-x3)^2, -a <= x3 <= 0}`` with
    ``H = <x, nu> / 2``.  The profile ``u`` solves
    ``u'' = (1 + u'^2) [1/u - (u - y u') / 2]`` with ``u(a) = 0``.  The
    solver starts at the smooth tip ``y = a`` (whose curvature is forced to be
    ``a/4`` by the equation) and integrates the meridian curve in arclength
    down to the plane ``y = 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline

from .errors import ParameterError, SolverError
from .geometry_core import (
    SQRT2,
    GraphProfile,
    Grid1D,
    RadialProfile,
    curvature_radial,
    radial_derivatives,
)

# ---------------------------------------------------------------------------
# bowl soliton
# ---------------------------------------------------------------------------


# RK4 stability bound for h * c^2 * r_max (the real stability interval is about 2.78)
BOWL_STIFFNESS_LIMIT = 2.5


def bowl_series(c: float, r):
    """Two-term tip expansion ``(f, f_r)`` of the bowl with speed ``c``.

    Substituting ``g = alpha r + beta r^3`` into ``g' = (1+g^2)(c - g/r)``
    gives ``alpha = c/2`` and ``4 beta = alpha^2 (c - alpha)``, i.e.
    ``beta = c^3 / 32``.
    """
    r = np.asarray(r, dtype=float)
    g = 0.5 * c * r + c**3 * r**3 / 32.0
    f = 0.25 * c * r**2 + c**3 * r**4 / 128.0
    return f, g


def _bowl_rhs(c, r, f, g):
    return g, (1.0 + g * g) * (c - g / r)


def _integrate_bowl(c: float, grid: Grid1D):
    n, h = grid.n, grid.h
    f = np.zeros(n)
    g = np.zeros(n)
    f[1], g[1] = bowl_series(c, h)
    rk = h
    fi, gi = f[1], g[1]
    for i in range(1, n - 1):
        k1f, k1g = _bowl_rhs(c, rk, fi, gi)
        k2f, k2g = _bowl_rhs(c, rk + 0.5 * h, fi + 0.5 * h * k1f, gi + 0.5 * h * k1g)
        k3f, k3g = _bowl_rhs(c, rk + 0.5 * h, fi + 0.5 * h * k2f, gi + 0.5 * h * k2g)
        k4f, k4g = _bowl_rhs(c, rk + h, fi + h * k3f, gi + h * k3g)
        fi += h / 6.0 * (k1f + 2.0 * k2f + 2.0 * k3f + k4f)
        gi += h / 6.0 * (k1g + 2.0 * k2g + 2.0 * k3g + k4g)
        rk = (i + 1) * h
        f[i + 1], g[i + 1] = fi, gi
    return f, g


def d1_fourth_order(g: np.ndarray, h: float, odd_at_start: bool = False) -> np.ndarray:
    """Fourth-order first derivative on a uniform grid.

    Interior nodes use the five-point central stencil and the two nodes at
    each end use one-sided fourth-order stencils.  With ``odd_at_start`` the
    first node is treated as a centre of odd symmetry (``g(-r) = -g(r)``).
    """
    g = np.asarray(g, dtype=float)
    out = np.empty_like(g)
    out[2:-2] = (-g[4:] + 8.0 * g[3:-1] - 8.0 * g[1:-3] + g[:-4]) / (12.0 * h)
    out[0] = (-25 * g[0] + 48 * g[1] - 36 * g[2] + 16 * g[3] - 3 * g[4]) / (12.0 * h)
    out[1] = (-3 * g[0] - 10 * g[1] + 18 * g[2] - 6 * g[3] + g[4]) / (12.0 * h)
    out[-1] = (25 * g[-1] - 48 * g[-2] + 36 * g[-3] - 16 * g[-4] + 3 * g[-5]) / (12.0 * h)
    out[-2] = (3 * g[-1] + 10 * g[-2] - 18 * g[-3] + 6 * g[-4] - g[-5]) / (12.0 * h)
    if odd_at_start:
        out[0] = (16.0 * g[1] - 2.0 * g[2]) / (12.0 * h)
        out[1] = (-g[3] + 8.0 * g[2] - 8.0 * g[0] - g[1]) / (12.0 * h)
    return out


def bowl_residual_series(c: float, grid: Grid1D, f_r: np.ndarray) -> np.ndarray:
    """Nodewise residual ``f_rr/(1+f_r^2) + f_r/r - c``, tip value ``2 f_rr(0) - c``.

    ``f_rr`` is a fourth-order finite difference of the stored slope, so the
    residual is independent of the integrator's right-hand side.
    """
    h = grid.h
    frr = d1_fourth_order(f_r, h, odd_at_start=True)
    rr = grid.nodes
    res = np.empty_like(f_r)
    res[0] = 2.0 * frr[0] - c
    res[1:] = frr[1:] / (1.0 + f_r[1:] ** 2) + f_r[1:] / rr[1:] - c
    return res


@dataclass(frozen=True)
class BowlProfile:
    """Solved bowl soliton.

    Attributes
    ----------
    c : float
        Translation speed (equal to the mean curvature at the tip).
    profile : GraphProfile
        Height ``f(r)`` with ``f(0) = 0``.
    f_r : ndarray
        Slope carried by the integrator.
    residual : float
        Max nodewise residual of the soliton equation.
    richardson : float
        Max difference to a second solve at half the step, at shared nodes.
    """

    c: float
    profile: GraphProfile
    f_r: np.ndarray
    residual: float
    richardson: float = float("nan")

    @property
    def r(self) -> np.ndarray:
        return self.profile.rr

    @property
    def f(self) -> np.ndarray:
        return self.profile.f

    @property
    def f_rr(self) -> np.ndarray:
        return d1_fourth_order(self.f_r, self.profile.grid.h, odd_at_start=True)

    def height(self, r):
        """Cubic-Hermite interpolation of ``f`` using the stored slope."""
        from scipy.interpolate import CubicHermiteSpline

        return CubicHermiteSpline(self.r, self.f, self.f_r)(r)

    def radius_of_height(self, z):
        """Radius of the horizontal section at height ``z`` (inverse of ``f``)."""
        z = np.asarray(z, dtype=float)
        rr = self.r
        # f is strictly increasing; invert by interpolation followed by Newton steps
        r = np.interp(z, self.f, rr)
        spl = self.height
        from scipy.interpolate import CubicHermiteSpline

        dspl = CubicHermiteSpline(rr, self.f_r, self.f_rr)
        for _ in range(6):
            slope = np.maximum(dspl(r), 1e-300)
            r = np.clip(r - (spl(r) - z) / slope, 0.0, rr[-1])
        return r


def solve_bowl(c: float, r_max: float, h: float, richardson: bool = True) -> BowlProfile:
    """Bowl soliton with speed ``c`` on ``[0, r_max]``.

    Parameters
    ----------
    c : float
        Speed, ``c > 0``.
    r_max : float
        Radial extent.
    h : float
        Step, ``h <= r_max / 100``.  The far field is stiff (the linearized
        slope equation decays at rate about ``c^2 r``), so explicit RK4 also
        needs ``h c^2 r_max <= 2.5``.
    richardson : bool
        Also solve at ``h/2`` and store the difference at shared nodes.

    Raises
    ------
    ParameterError
        For ``c <= 0``, ``r_max <= 0`` or a step violating either bound.
    """
    if not c > 0:
        raise ParameterError("bowl speed c must be positive")
    if not r_max > 0:
        raise ParameterError("r_max must be positive")
    if not (h > 0 and h <= r_max / 100.0 * (1 + 1e-12)):
        raise ParameterError("step h must satisfy 0 < h <= r_max/100")
    if h * c * c * r_max > BOWL_STIFFNESS_LIMIT:
        raise ParameterError(f"step h must satisfy h c^2 r_max <= {BOWL_STIFFNESS_LIMIT} for stability")
    grid = Grid1D.from_spacing(0.0, r_max, h)
    f, g = _integrate_bowl(c, grid)
    res = bowl_residual_series(c, grid, g)
    rich = float("nan")
    if richardson:
        fine = grid.refined(2)
        f2, _ = _integrate_bowl(c, fine)
        rich = float(np.max(np.abs(f2[::2] - f)))
    return BowlProfile(c, GraphProfile(grid, f), g, float(np.max(np.abs(res))), rich)


def bowl_far_field(c: float, r) -> np.ndarray:
    """Leading far-field terms ``c r^2 / 2 - log(r) / c`` of the bowl height."""
    r = np.asarray(r, dtype=float)
    return 0.5 * c * r**2 - np.log(r) / c


# ---------------------------------------------------------------------------
# shrinkers
# ---------------------------------------------------------------------------


def _meridian_rhs(s, state):
    rho, y, phi = state
    n_rho, n_y = -np.sin(phi), np.cos(phi)
    return [np.cos(phi), np.sin(phi), n_rho / rho - 0.5 * (rho * n_rho + y * n_y)]


@dataclass(frozen=True)
class ShrinkerProfile:
    """Solved shrinker ``Sigma_a`` sampled as ``u(y)`` on ``[0, a]``.

    Attributes
    ----------
    a : float
        Tip parameter; ``u(a) = 0``.
    ygrid : Grid1D
        Uniform grid on ``[0, a]``.
    u : ndarray
        Profile values.
    curve : object
        Dense output of the meridian curve ``s -> (rho, y, phi)``, where
        ``(cos phi, sin phi)`` is the unit tangent and ``s`` the arclength
        from the tip.
    s_nodes : ndarray
        Arclength of every grid node along the curve.
    """

    a: float
    ygrid: Grid1D
    u: np.ndarray
    curve: object = field(repr=False, compare=False)
    s_nodes: np.ndarray = field(repr=False, compare=False)
    s_end: float = 0.0

    @property
    def y(self) -> np.ndarray:
        return self.ygrid.nodes

    def as_radial(self) -> RadialProfile:
        """The profile as a radial profile ``r(z) = u(z)`` (the equation is even in ``z``)."""
        return RadialProfile(self.ygrid, self.u)

    def arclength_of(self, y) -> np.ndarray:
        """Arclength parameter of the points with height ``y`` (Newton on the dense curve)."""
        y = np.atleast_1d(np.asarray(y, dtype=float))
        s = np.interp(y, self.y, self.s_nodes)
        for _ in range(8):
            rho, yy, phi = self.curve(s)
            sin = np.sin(phi)
            safe = np.abs(sin) > 1e-12
            step = np.zeros_like(s)
            step[safe] = (yy[safe] - y[safe]) / sin[safe]
            s = np.clip(s - step, 0.0, self.s_end)
        return s

    def evaluate(self, y):
        """Return ``(u, u_y)`` at arbitrary heights from the dense curve."""
        s = self.arclength_of(y)
        rho, _, phi = self.curve(s)
        with np.errstate(divide="ignore"):
            # the tangent is horizontal at the tip, where u_y is infinite
            return rho, np.cos(phi) / np.sin(phi)

    def _turning_rate(self, s: np.ndarray, delta: float) -> np.ndarray:
        """Second-order difference of the turning angle, one-sided at the curve ends."""
        phi = lambda q: self.curve(q)[2]
        out = (phi(s + delta) - phi(s - delta)) / (2.0 * delta)
        fwd = s - delta < 0.0
        bwd = s + delta > self.s_end
        if np.any(fwd):
            q = s[fwd]
            out[fwd] = (-3.0 * phi(q) + 4.0 * phi(q + delta) - phi(q + 2 * delta)) / (2.0 * delta)
        if np.any(bwd):
            q = s[bwd]
            out[bwd] = (3.0 * phi(q) - 4.0 * phi(q - delta) + phi(q - 2 * delta)) / (2.0 * delta)
        return out

    def residual_series(self, exclude_tip: Optional[float] = None, delta: float = 1e-5):
        """``|H - <x, nu>/2|`` at grid nodes with ``y <= a - exclude_tip``.

        The meridian curvature is a central difference of the dense turning
        angle, so this checks the integration, not the right-hand side.
        Default exclusion is the boundary layer of width ``10 h``.
        """
        if exclude_tip is None:
            exclude_tip = 10.0 * self.ygrid.h
        y = self.y
        mask = y <= self.a - exclude_tip
        s = self.s_nodes[mask]
        phi_s = self._turning_rate(s, delta)
        rho, yy, phi = self.curve(s)
        n_rho, n_y = -np.sin(phi), np.cos(phi)
        H = -phi_s + n_rho / rho
        res = np.abs(H - 0.5 * (rho * n_rho + yy * n_y))
        return y[mask], res


def solve_shrinker(a: float, h: float, s0: float = 1e-4, rtol: float = 1e-12) -> ShrinkerProfile:
    """Shrinker ``Sigma_a`` with tip at height ``a``.

    The meridian curve leaves the tip ``(rho, y) = (0, a)`` horizontally with
    curvature ``a/4`` (from ``H = 2 kappa = a/2`` at the tip) and follows

    ``rho' = cos phi``, ``y' = sin phi``,
    ``phi' = n_rho / rho - (rho n_rho + y n_y) / 2``, ``n = (-sin phi, cos phi)``

    until it meets ``y = 0``.  The start uses the osculating circle at
    arclength ``s0``.  The curve is then resampled on the uniform ``y``
    grid.

    Parameters
    ----------
    a : float
        Tip parameter, ``a >= 4``.
    h : float
        Grid spacing in ``y``, ``h <= 1e-3 a``.

    Raises
    ------
    ParameterError
        Outside the admissible ``(a, h)`` range.
    SolverError
        If the curve fails to reach ``y = 0`` as a graph over the axis.
    """
    if not a >= 4.0:
        raise ParameterError("shrinker tip parameter must satisfy a >= 4")
    if not (h > 0 and h <= 1e-3 * a * (1 + 1e-12)):
        raise ParameterError("step must satisfy 0 < h <= 1e-3 a")
    kappa = a / 4.0
    state0 = [s0, a - 0.5 * kappa * s0**2, -kappa * s0]

    def hit_plane(s, st):
        return st[1]

    hit_plane.terminal = True
    hit_plane.direction = -1

    def turned(s, st):
        return np.sin(st[2]) + 1e-9

    turned.terminal = True
    turned.direction = 1

    sol = solve_ivp(
        _meridian_rhs,
        (s0, 10.0 * a + 20.0),
        state0,
        method="DOP853",
        rtol=rtol,
        atol=1e-14,
        dense_output=True,
        events=[hit_plane, turned],
    )
    trace = [("status", sol.status), ("message", sol.message)]
    if sol.status != 1 or len(sol.t_events[0]) == 0:
        raise SolverError("meridian curve did not reach the plane y = 0", trace)
    s_end = float(sol.t_events[0][0])

    def curve(s, _sol=sol.sol, _s0=s0, _k=kappa, _a=a):
        s = np.atleast_1d(np.asarray(s, dtype=float))
        out = np.empty((3, s.size))
        inner = s < _s0
        if np.any(~inner):
            out[:, ~inner] = _sol(s[~inner])
        if np.any(inner):
            si = s[inner]
            out[0, inner] = si
            out[1, inner] = _a - 0.5 * _k * si**2
            out[2, inner] = -_k * si
        return out

    grid = Grid1D.from_spacing(0.0, a, h)
    y = grid.nodes
    s_dense = np.linspace(0.0, s_end, 20 * grid.n + 1)
    y_dense = curve(s_dense)[1]
    if np.any(np.diff(y_dense) >= 0):
        raise SolverError("meridian curve is not a graph over the axis", trace)
    s_nodes = np.interp(-y, -y_dense, s_dense)
    for _ in range(8):
        rho, yy, phi = curve(s_nodes)
        sin = np.sin(phi)
        safe = np.abs(sin) > 1e-12
        step = np.zeros_like(s_nodes)
        step[safe] = (yy[safe] - y[safe]) / sin[safe]
        s_nodes = np.clip(s_nodes - step, 0.0, s_end)
    s_nodes[-1] = 0.0
    s_nodes[0] = s_end
    u = curve(s_nodes)[0]
    u[-1] = 0.0
    return ShrinkerProfile(a, grid, u, curve, s_nodes, s_end)


def shrinker_residual(p: Union[RadialProfile, ShrinkerProfile], exclude_tip: Optional[float] = None) -> float:
    """Max of ``|H - <x, nu>/2|``.

    For a :class:`RadialProfile` the curvature is taken from finite
    differences at interior nodes with positive radius.  For a
    :class:`ShrinkerProfile` the dense meridian curve is used and the tip
    layer of width ``exclude_tip`` (default ``10 h``) is excluded.
    """
    if isinstance(p, ShrinkerProfile):
        _, res = p.residual_series(exclude_tip)
        return float(np.max(res))
    curv = curvature_radial(p)
    rz, _ = radial_derivatives(p)
    W = np.sqrt(1.0 + rz**2)
    x_nu = (p.r - p.z * rz) / W
    res = np.abs(curv.H - 0.5 * x_nu)[1:-1]
    keep = p.r[1:-1] > 0
    if exclude_tip:
        keep &= np.abs(p.z[1:-1] - p.z[np.argmin(p.r)]) >= exclude_tip
    return float(np.max(res[keep]))


def _flux_terms(r, rz, z):
    W = np.sqrt(1.0 + rz**2)
    weight = np.exp(-(r**2 + z**2) / 4.0)
    flux = 2.0 * np.pi * r * rz / W * weight
    source = 2.0 * np.pi * W * weight * (1.0 - 0.5 * r**2)
    return flux, source


def weighted_flux_difference(p: Union[RadialProfile, ShrinkerProfile], L1: float, L2: float, nodes: int = 200) -> float:
    """Weighted flux balance of the revolved profile between heights ``L1 < L2``.

    The Gaussian area ``int 2 pi r W exp(-(r^2 + z^2)/4) dz`` has
    Euler-Lagrange equation ``d/dz Phi = S`` with the weighted conormal flux
    through the circle at height ``z``,

    ``Phi(z) = 2 pi r r_z / W exp(-(r^2 + z^2)/4)``,

    and the source ``S = 2 pi W exp(-(r^2 + z^2)/4) (1 - r^2/2)``.  The
    equation is exactly the shrinker equation, so the returned
    ``Phi(L2) - Phi(L1) - int_{L1}^{L2} S dz`` vanishes for shrinkers.
    Integration uses Gauss-Legendre quadrature on a cubic spline of the
    profile, or on the dense curve for a :class:`ShrinkerProfile`.
    """
    if not L1 < L2:
        raise ParameterError("need L1 < L2")
    if isinstance(p, ShrinkerProfile):
        evaluate = p.evaluate
        lo, hi = 0.0, p.a
    else:
        spline = CubicSpline(p.z, p.r)
        dspline = spline.derivative()

        def evaluate(z):
            return spline(z), dspline(z)

        lo, hi = p.grid.lo, p.grid.hi
    if L1 < lo or L2 > hi:
        raise ParameterError("flux heights outside the profile")
    x, w = np.polynomial.legendre.leggauss(nodes)
    zq = 0.5 * (L2 - L1) * x + 0.5 * (L2 + L1)
    rq, rzq = evaluate(zq)
    _, src = _flux_terms(rq, rzq, zq)
    integral = 0.5 * (L2 - L1) * float(np.dot(w, src))
    ends = np.array([L1, L2])
    re, rze = evaluate(ends)
    flux, _ = _flux_terms(re, rze, ends)
    return float(flux[1] - flux[0] - integral)


def shrinker_lower_bound(a: float, y) -> np.ndarray:
    """``sqrt(2 (1 - y^2/a^2))``, the lower barrier for ``u_a``."""
    y = np.asarray(y, dtype=float)
    return np.sqrt(np.clip(2.0 * (1.0 - y**2 / a**2), 0.0, None))


def shrinker_barrier(p: ShrinkerProfile, t: float, K: float, n: int = 801) -> RadialProfile:
    """The barrier ``Sigma_{a,t} = sqrt(-t) Sigma_a + (0, 0, K a^2)`` as a radial profile.

    Height ``y`` of the shrinker is measured downward from the top section,
    so the barrier spans ``z in [K a^2 - a sqrt(-t), K a^2]`` with its tip at
    the lower end and radius ``sqrt(-t) u_a((K a^2 - z) / sqrt(-t))``.

    Raises
    ------
    ParameterError
        For ``t >= 0`` or ``n < 4``.
    """
    if not t < 0:
        raise ParameterError("the barrier is defined for t < 0")
    if n < 4:
        raise ParameterError("need at least 4 nodes")
    s = math.sqrt(-t)
    top = K * p.a**2
    grid = Grid1D(top - p.a * s, top, n)
    y = np.clip((top - grid.nodes) / s, 0.0, p.a)
    u, _ = p.evaluate(y)
    u = np.where(y >= p.a * (1 - 1e-14), 0.0, np.clip(u, 0.0, None))
    return RadialProfile(grid, s * u)


__all__ = [
    "BowlProfile",
    "ShrinkerProfile",
    "SQRT2",
    "bowl_far_field",
    "bowl_series",
    "d1_fourth_order",
    "shrinker_barrier",
    "shrinker_lower_bound",
    "shrinker_residual",
    "solve_bowl",
    "solve_shrinker",
    "weighted_flux_difference",
]
