"""Discrete axisymmetric surfaces, graphs over the cylinder and their geometry.

Three sampled surface types are provided:

* :class:`RadialProfile` -- a surface of revolution written as ``r(z)``;
* :class:`GraphProfile` -- a rotationally symmetric graph ``x3 = f(r)``
  whose first node is the tip ``r = 0``;
* :class:`CylinderGraph` -- a normal graph ``u(theta, z)`` over the round
  cylinder of radius ``sqrt(2)``, periodic in ``theta``.

All derivatives along a uniform 1-D grid are second-order central
differences in the interior and second-order one-sided stencils at the
boundary nodes.  Derivatives in ``theta`` are spectral (FFT).  Normals point
away from the enclosed region, so convex surfaces have ``H > 0``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Union

import numpy as np
from scipy.integrate import simpson
from scipy.interpolate import CubicSpline

from .errors import DomainError, ParameterError, TruncationWarning

SQRT2 = np.sqrt(2.0)

#: Weight below which a Gaussian-weighted integrand counts as decayed.  The
#: cylinder weight at ``|z| = 12`` is ``exp(-36.5) ~ 1.4e-16``, so the
#: threshold sits one decade above machine precision.
DECAY_THRESHOLD = 1e-15


# ---------------------------------------------------------------------------
# grids and finite differences
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Grid1D:
    """Uniform grid of ``n`` nodes on ``[lo, hi]``.

    Parameters
    ----------
    lo, hi : float
        End points, ``lo < hi``.
    n : int
        Number of nodes, at least 3.
    """

    lo: float
    hi: float
    n: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 3:
            raise ParameterError(f"Grid1D needs n >= 3 nodes, got {self.n}")
        if not np.isfinite(self.lo) or not np.isfinite(self.hi) or not self.hi > self.lo:
            raise ParameterError(f"Grid1D needs lo < hi, got [{self.lo}, {self.hi}]")
        object.__setattr__(self, "lo", float(self.lo))
        object.__setattr__(self, "hi", float(self.hi))
        object.__setattr__(self, "n", int(self.n))

    @classmethod
    def from_spacing(cls, lo: float, hi: float, h: float) -> "Grid1D":
        """Grid on ``[lo, hi]`` whose spacing is as close as possible to ``h``."""
        if h <= 0:
            raise ParameterError("grid spacing must be positive")
        n = int(round((hi - lo) / h)) + 1
        return cls(lo, hi, max(n, 3))

    @property
    def h(self) -> float:
        """Node spacing."""
        return (self.hi - self.lo) / (self.n - 1)

    @property
    def nodes(self) -> np.ndarray:
        """Node coordinates as a fresh array."""
        return np.linspace(self.lo, self.hi, self.n)

    def refined(self, factor: int = 2) -> "Grid1D":
        """Grid on the same interval with the spacing divided by ``factor``."""
        return Grid1D(self.lo, self.hi, (self.n - 1) * factor + 1)

    def to_dict(self) -> dict:
        return {"lo": self.lo, "hi": self.hi, "n": self.n}


def d1(f: np.ndarray, h: float, axis: int = -1) -> np.ndarray:
    """First derivative, second order everywhere (one-sided at the ends)."""
    return np.gradient(f, h, axis=axis, edge_order=2)


def d2(f: np.ndarray, h: float, axis: int = -1) -> np.ndarray:
    """Second derivative, second order everywhere.

    Interior nodes use the three-point stencil; the end nodes use the
    four-point one-sided stencil ``(2 f0 - 5 f1 + 4 f2 - f3) / h**2``.
    """
    f = np.moveaxis(np.asarray(f, dtype=float), axis, -1)
    if f.shape[-1] < 4:
        raise ParameterError("second differences need at least 4 nodes")
    out = np.empty_like(f)
    out[..., 1:-1] = f[..., 2:] - 2.0 * f[..., 1:-1] + f[..., :-2]
    out[..., 0] = 2.0 * f[..., 0] - 5.0 * f[..., 1] + 4.0 * f[..., 2] - f[..., 3]
    out[..., -1] = 2.0 * f[..., -1] - 5.0 * f[..., -2] + 4.0 * f[..., -3] - f[..., -4]
    return np.moveaxis(out / h**2, -1, axis)


def theta_derivative(u: np.ndarray, order: int = 1) -> np.ndarray:
    """Spectral derivative along axis 0 of a periodic array sampled on ``[0, 2 pi)``."""
    n = u.shape[0]
    k = np.fft.rfftfreq(n, d=1.0 / n)
    fac = (1j * k) ** order
    if order % 2 == 1 and n % 2 == 0:
        fac[-1] = 0.0
    shape = (-1,) + (1,) * (u.ndim - 1)
    return np.fft.irfft(np.fft.rfft(u, axis=0) * fac.reshape(shape), n=n, axis=0)


# ---------------------------------------------------------------------------
# surface types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RadialProfile:
    """Surface of revolution ``{(r(z) cos t, r(z) sin t, z)}``.

    Parameters
    ----------
    grid : Grid1D
        Uniform grid in ``z``.
    r : array_like
        Radius per node.  Zeros mark tips (at boundary nodes) or nodes with
        no surface (for instance after extinction during a flow).
    r2 : array_like, optional
        Signed squared radius.  Negative values continue the square of the
        radius smoothly past a tip; when given, ``r = sqrt(max(r2, 0))``.
        The radius-form flow solver works with this quantity.
    """

    grid: Grid1D
    r: np.ndarray = None
    r2: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.r2 is not None:
            r2 = np.array(self.r2, dtype=float)
            if r2.shape != (self.grid.n,):
                raise ParameterError("r2 must have one value per grid node")
            r = np.sqrt(np.clip(r2, 0.0, None))
            object.__setattr__(self, "r2", r2)
        else:
            if self.r is None:
                raise ParameterError("RadialProfile needs r or r2")
            r = np.array(self.r, dtype=float)
        if r.shape != (self.grid.n,):
            raise ParameterError("r must have one value per grid node")
        if not np.all(np.isfinite(r)) or np.any(r < 0):
            raise DomainError("radii must be finite and non-negative")
        object.__setattr__(self, "r", r)

    @property
    def z(self) -> np.ndarray:
        return self.grid.nodes

    @property
    def sq(self) -> np.ndarray:
        """Signed squared radius (``r**2`` when no continuation is stored)."""
        return self.r2 if self.r2 is not None else self.r**2


@dataclass(frozen=True)
class GraphProfile:
    """Rotationally symmetric graph ``x3 = f(r)`` with the tip at ``r = 0``."""

    grid: Grid1D
    f: np.ndarray

    def __post_init__(self):
        if self.grid.lo != 0.0:
            raise ParameterError("GraphProfile grid must start at the tip r = 0")
        f = np.array(self.f, dtype=float)
        if f.shape != (self.grid.n,) or not np.all(np.isfinite(f)):
            raise ParameterError("f must hold one finite value per grid node")
        object.__setattr__(self, "f", f)

    @property
    def rr(self) -> np.ndarray:
        return self.grid.nodes


@dataclass(frozen=True)
class CylinderGraph:
    """Normal graph ``u(theta, z)`` over the cylinder of radius ``sqrt(2)``.

    The surface is ``{((sqrt2 + u) cos t, (sqrt2 + u) sin t, z)}``; ``u`` has
    shape ``(ntheta, nz)`` with ``theta_j = 2 pi j / ntheta``.
    """

    ntheta: int
    zgrid: Grid1D
    u: np.ndarray

    def __post_init__(self):
        u = np.array(self.u, dtype=float)
        if u.shape != (self.ntheta, self.zgrid.n):
            raise ParameterError(
                f"u has shape {u.shape}, expected {(self.ntheta, self.zgrid.n)}"
            )
        if self.ntheta < 4:
            raise ParameterError("need at least 4 samples in theta")
        if not np.all(np.isfinite(u)) or np.any(SQRT2 + u <= 0):
            raise DomainError("cylinder graph needs sqrt(2) + u > 0 everywhere")
        object.__setattr__(self, "u", u)

    @property
    def theta(self) -> np.ndarray:
        return 2.0 * np.pi * np.arange(self.ntheta) / self.ntheta

    @property
    def z(self) -> np.ndarray:
        return self.zgrid.nodes

    def mesh(self):
        """Return ``(theta, z)`` broadcast to the shape of ``u``."""
        return np.meshgrid(self.theta, self.z, indexing="ij")

    def with_values(self, u: np.ndarray) -> "CylinderGraph":
        return CylinderGraph(self.ntheta, self.zgrid, u)

    @classmethod
    def from_function(cls, fn, ntheta: int, zgrid: Grid1D) -> "CylinderGraph":
        """Sample ``fn(theta, z)`` on the product grid."""
        th = 2.0 * np.pi * np.arange(ntheta) / ntheta
        T, Z = np.meshgrid(th, zgrid.nodes, indexing="ij")
        return cls(ntheta, zgrid, np.broadcast_to(fn(T, Z), T.shape).astype(float))


@dataclass(frozen=True)
class CurvatureData:
    """Principal curvatures, mean curvature and outward unit normal per node.

    ``nu`` has shape ``(n, 3)`` and is evaluated in the meridian half plane
    ``theta = 0``.  Nodes where the curvature is undefined hold NaN.
    """

    H: np.ndarray
    k1: np.ndarray
    k2: np.ndarray
    nu: np.ndarray

    @property
    def norm_A2(self) -> np.ndarray:
        """Squared norm of the second fundamental form."""
        return self.k1**2 + self.k2**2


# ---------------------------------------------------------------------------
# curvature
# ---------------------------------------------------------------------------


def radial_derivatives(p: RadialProfile):
    """Return ``(r_z, r_zz)`` for a radial profile."""
    h = p.grid.h
    return d1(p.r, h), d2(p.r, h)


def curvature_radial(p: RadialProfile) -> CurvatureData:
    """Curvature of a surface of revolution ``r(z)``.

    ``k1 = -r_zz / W**3`` (meridian direction), ``k2 = 1 / (r W)``
    (rotational direction) with ``W = sqrt(1 + r_z**2)``, and the outward
    normal ``(1, 0, -r_z) / W`` at ``theta = 0``.

    Raises
    ------
    DomainError
        If an interior node has non-positive radius.  Boundary nodes with
        ``r = 0`` are tips; their curvature entries are NaN.
    """
    r = p.r
    if np.any(r[1:-1] <= 0):
        raise DomainError("non-positive radius at an interior node")
    rz, rzz = radial_derivatives(p)
    W = np.sqrt(1.0 + rz**2)
    k1 = -rzz / W**3
    with np.errstate(divide="ignore", invalid="ignore"):
        k2 = np.where(r > 0, 1.0 / (r * W), np.nan)
    k1 = np.where(r > 0, k1, np.nan)
    nu = np.stack([1.0 / W, np.zeros_like(W), -rz / W], axis=1)
    return CurvatureData(H=k1 + k2, k1=k1, k2=k2, nu=nu)


def graph_derivatives(g: GraphProfile):
    """Return ``(f_r, f_rr)`` using the even extension ``f(-r) = f(r)`` at the tip."""
    f, h = g.f, g.grid.h
    fr = d1(f, h)
    frr = d2(f, h)
    fr[0] = 0.0
    frr[0] = 2.0 * (f[1] - f[0]) / h**2
    return fr, frr


def curvature_graph(g: GraphProfile) -> CurvatureData:
    """Curvature of the graph ``x3 = f(r)``.

    The normal ``(f_r, 0, -1) / W`` points away from the region above the
    graph.  At the tip the rotational curvature ``f_r / (r W)`` is replaced by
    its limit ``f_rr(0)``.
    """
    fr, frr = graph_derivatives(g)
    W = np.sqrt(1.0 + fr**2)
    rr = g.rr
    k1 = frr / W**3
    k2 = np.empty_like(k1)
    k2[1:] = fr[1:] / (rr[1:] * W[1:])
    k2[0] = frr[0]
    nu = np.stack([fr / W, np.zeros_like(W), -1.0 / W], axis=1)
    return CurvatureData(H=k1 + k2, k1=k1, k2=k2, nu=nu)


@dataclass(frozen=True)
class CylinderGraphGeometry:
    """Derived geometry of a cylinder graph, see :func:`cylinder_graph_geometry`."""

    R: np.ndarray
    R_theta: np.ndarray
    R_z: np.ndarray
    W: np.ndarray
    H: np.ndarray
    x_dot_nu: np.ndarray
    area_element: np.ndarray


def radial_graph_geometry(R: np.ndarray, z: np.ndarray, h: float) -> CylinderGraphGeometry:
    """Geometry of the radial graph ``X = (R cos t, R sin t, z)`` for any positive ``R(theta, z)``.

    With ``W = sqrt(1 + R_theta**2 / R**2 + R_z**2)`` and the outward normal
    ``(e_r - R_theta/R e_theta - R_z e_3) / W``, the first and second
    fundamental forms give

    ``H = -(E N - 2 F M + G L) / (R W)**2``

    where ``E = R_theta**2 + R**2``, ``F = R_theta R_z``, ``G = 1 + R_z**2``,
    ``L = (R (R_tt - R) - 2 R_theta**2) / (R W)``,
    ``M = (R R_tz - R_theta R_z) / (R W)`` and ``N = R_zz / W``.
    ``theta``-derivatives are spectral and ``z``-derivatives second-order
    differences.
    """
    R = np.asarray(R, dtype=float)
    if np.any(R <= 0):
        raise DomainError("radial graph needs R > 0")
    Rt = theta_derivative(R, 1)
    Rtt = theta_derivative(R, 2)
    Rz = d1(R, h, axis=1)
    Rzz = d2(R, h, axis=1)
    Rtz = theta_derivative(Rz, 1)
    W = np.sqrt(1.0 + (Rt / R) ** 2 + Rz**2)
    RW = R * W
    E = Rt**2 + R**2
    F = Rt * Rz
    G = 1.0 + Rz**2
    Lf = (R * (Rtt - R) - 2.0 * Rt**2) / RW
    Mf = (R * Rtz - Rt * Rz) / RW
    Nf = Rzz / W
    H = -(E * Nf - 2.0 * F * Mf + G * Lf) / RW**2
    x_dot_nu = (R - np.asarray(z)[None, :] * Rz) / W
    return CylinderGraphGeometry(R=R, R_theta=Rt, R_z=Rz, W=W, H=H, x_dot_nu=x_dot_nu, area_element=RW)


def cylinder_graph_geometry(g: CylinderGraph) -> CylinderGraphGeometry:
    """Mean curvature and related quantities of ``r = sqrt(2) + u(theta, z)``.

    See :func:`radial_graph_geometry` for the formulas.
    """
    return radial_graph_geometry(SQRT2 + g.u, g.z, g.zgrid.h)


# ---------------------------------------------------------------------------
# Gaussian area and cross sections
# ---------------------------------------------------------------------------


def _check_decay(weights_at_ends, label):
    if np.max(weights_at_ends) > DECAY_THRESHOLD:
        warnings.warn(
            f"{label}: Gaussian weight {np.max(weights_at_ends):.3g} at the domain "
            "ends exceeds the decay threshold; the integral is truncated",
            TruncationWarning,
            stacklevel=3,
        )
        return False
    return True


def gaussian_area(p: Union[RadialProfile, CylinderGraph]) -> float:
    """Gaussian area ``int exp(-|x|^2/4) dA``.

    For a radial profile the area element is written with the squared radius,
    ``2 pi sqrt(r^2 + ((r^2)_z / 2)^2) dz``, which stays finite at a tip
    where ``r_z`` blows up.  Quadrature: Simpson in ``z`` and the periodic
    trapezoid rule in ``theta``.

    A :class:`~ancientflow.errors.TruncationWarning` is issued when an open end
    of the surface has a weight above ``1e-16``.
    """
    if isinstance(p, CylinderGraph):
        geo = cylinder_graph_geometry(p)
        z = p.z[None, :]
        integrand = np.exp(-(geo.R**2 + z**2) / 4.0) * geo.area_element
        ends = np.exp(-(geo.R[:, [0, -1]] ** 2 + p.z[[0, -1]] ** 2) / 4.0)
        _check_decay(ends, "gaussian_area")
        over_theta = 2.0 * np.pi * integrand.mean(axis=0)
        return float(simpson(over_theta, dx=p.zgrid.h))
    if isinstance(p, RadialProfile):
        z = p.z
        s = p.r**2
        sz = d1(s, p.grid.h)
        elem = 2.0 * np.pi * np.sqrt(np.clip(s + 0.25 * sz**2, 0.0, None))
        # interior nodes without surface (extinct) carry no area; tips keep theirs
        empty = p.r <= 0
        empty[[0, -1]] = False
        elem = np.where(empty, 0.0, elem)
        integrand = np.exp(-(s + z**2) / 4.0) * elem
        open_ends = [i for i in (0, -1) if p.r[i] > 0]
        if open_ends:
            _check_decay(np.exp(-(s[open_ends] + z[open_ends] ** 2) / 4.0), "gaussian_area")
        return float(simpson(integrand, dx=p.grid.h))
    raise TypeError(f"unsupported surface type {type(p).__name__}")


def cross_section_area(g: Union[CylinderGraph, RadialProfile]) -> np.ndarray:
    """Area ``A(z)`` enclosed by each horizontal cross section."""
    if isinstance(g, CylinderGraph):
        return 0.5 * 2.0 * np.pi * np.mean((SQRT2 + g.u) ** 2, axis=0)
    if isinstance(g, RadialProfile):
        return np.pi * g.r**2
    raise TypeError(f"unsupported surface type {type(g).__name__}")


def cross_section_sqrt_area(g: Union[CylinderGraph, RadialProfile]) -> np.ndarray:
    """``sqrt(A(z))`` per node; concave in ``z`` for convex surfaces."""
    return np.sqrt(cross_section_area(g))


def concavity_violation(values: np.ndarray) -> float:
    """Largest positive raw second difference ``v[i+1] - 2 v[i] + v[i-1]`` (0 if none)."""
    v = np.asarray(values, dtype=float)
    if v.size < 3:
        return 0.0
    dd = v[2:] - 2.0 * v[1:-1] + v[:-2]
    return float(max(0.0, dd.max()))


def sqrt_area_concavity(p: RadialProfile) -> float:
    """:func:`concavity_violation` of ``sqrt(A)`` over the nodes where the surface exists.

    Dead nodes (``r = 0`` beyond a tip) are excluded, since the jump from an
    empty section to a small disc is a kink of the extended function and not
    a property of the surface.
    """
    alive = np.flatnonzero(p.r > 0)
    if alive.size == 0:
        return 0.0
    if np.any(np.diff(alive) != 1):
        raise DomainError("sections must form one contiguous range")
    return concavity_violation(cross_section_sqrt_area(p)[alive])


# ---------------------------------------------------------------------------
# noncollapsing and containment
# ---------------------------------------------------------------------------


class NoncollapsingResult(NamedTuple):
    """Result of :func:`noncollapsing_ratio`."""

    ratio: float
    nonconvex: bool
    node: int
    radii: np.ndarray
    H: np.ndarray


def _radius_function(p: RadialProfile):
    """Radius as a function of ``z`` via a cubic spline of ``r^2``.

    Open ends (``r > 0``) are continued along their tangent lines; beyond a
    tip the radius is ``-inf`` so that nothing fits there.
    """
    z = p.z
    spline = CubicSpline(z, p.r**2)
    lo, hi = p.grid.lo, p.grid.hi
    open_lo, open_hi = p.r[0] > 0, p.r[-1] > 0
    dspline = spline.derivative()
    slope_lo = dspline(lo) / (2.0 * p.r[0]) if open_lo else 0.0
    slope_hi = dspline(hi) / (2.0 * p.r[-1]) if open_hi else 0.0

    def radius(zq):
        zq = np.asarray(zq, dtype=float)
        zc = np.clip(zq, lo, hi)
        out = np.sqrt(np.clip(spline(zc), 0.0, None))
        if open_lo:
            out = np.where(zq < lo, p.r[0] + slope_lo * (zq - lo), out)
        else:
            out = np.where(zq < lo, -np.inf, out)
        if open_hi:
            out = np.where(zq > hi, p.r[-1] + slope_hi * (zq - hi), out)
        else:
            out = np.where(zq > hi, -np.inf, out)
        return out

    return radius


def _ball_fits(radius, r_i, z_i, rz, W, rho, tol, nsample):
    c_r = r_i - rho / W
    c_z = z_i + rho * rz / W
    zeta = rho * np.cos(np.linspace(0.0, np.pi, nsample))
    extent = abs(c_r) + np.sqrt(np.clip(rho**2 - zeta**2, 0.0, None))
    return bool(np.all(extent <= radius(c_z + zeta) + tol))


def noncollapsing_ratio(
    p: RadialProfile,
    stride: int = 1,
    max_slope: Optional[float] = None,
    tol: float = 1e-6,
    nsample: int = 401,
) -> NoncollapsingResult:
    """Minimum over nodes of (largest inscribed tangent ball radius) x H.

    At each node the candidate ball touches the surface from inside, with
    centre ``(r - rho/W, z + rho r_z/W)`` in the meridian plane.  The ball lies
    in the enclosed region exactly when ``|c_r| + sqrt(rho^2 - (z - c_z)^2) <=
    r(z)`` for all heights it covers.  The predicate is monotone in ``rho``
    for a fixed tangency point, so the largest radius is found by bisection.

    Parameters
    ----------
    p : RadialProfile
        Closed cap or neck segment with positive mean curvature.
    stride : int
        Evaluate every ``stride``-th node.
    max_slope : float, optional
        Skip nodes with ``|r_z| > max_slope`` (steep tip layers where the
        radius-form curvature is poorly resolved).
    tol : float
        Containment slack, absorbing equality for spheres and cylinders.

    Returns
    -------
    NoncollapsingResult
        ``ratio`` (min over evaluated nodes), ``nonconvex`` (True when some
        meridian curvature is below ``-tol``), ``node`` (argmin index) and the
        per-node inscribed radii and mean curvatures (NaN where skipped).
    """
    curv = curvature_radial(p)
    rz, _ = radial_derivatives(p)
    W = np.sqrt(1.0 + rz**2)
    radius = _radius_function(p)
    z = p.z
    span = (p.grid.hi - p.grid.lo) + 2.0 * float(np.max(p.r))
    n = p.grid.n
    radii = np.full(n, np.nan)
    idx = np.arange(0, n, max(1, int(stride)))
    if idx[-1] != n - 1:
        idx = np.append(idx, n - 1)
    for i in idx:
        if not (p.r[i] > 0 and np.isfinite(curv.H[i]) and curv.H[i] > 0):
            continue
        if max_slope is not None and abs(rz[i]) > max_slope:
            continue
        lo, hi = 0.0, span
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if _ball_fits(radius, p.r[i], z[i], rz[i], W[i], mid, tol, nsample):
                lo = mid
            else:
                hi = mid
            if hi - lo < 1e-10 * span:
                break
        radii[i] = lo
    ratios = radii * curv.H
    if np.all(np.isnan(ratios)):
        raise DomainError("no node with positive mean curvature to evaluate")
    node = int(np.nanargmin(ratios))
    nonconvex = bool(np.nanmin(curv.k1[idx]) < -tol) if np.any(np.isfinite(curv.k1[idx])) else False
    return NoncollapsingResult(float(ratios[node]), nonconvex, node, radii, curv.H)


class ContainmentResult(NamedTuple):
    """Result of :func:`surface_containment`."""

    inside: bool
    margin: float


def _resample_radius(p: RadialProfile, zq: np.ndarray) -> np.ndarray:
    return np.sqrt(np.clip(np.interp(zq, p.z, p.r**2), 0.0, None))


def surface_containment(inner: RadialProfile, outer: RadialProfile) -> ContainmentResult:
    """Check that ``inner`` lies inside ``outer`` on their common ``z``-range.

    Both radii are resampled (linear interpolation of ``r^2``) to the finer of
    the two grids restricted to the overlap.  ``margin`` is the minimum of
    ``outer - inner`` there and ``inside`` is ``margin >= 0``.
    """
    lo = max(inner.grid.lo, outer.grid.lo)
    hi = min(inner.grid.hi, outer.grid.hi)
    if lo > hi:
        raise DomainError("profiles have disjoint z-ranges")
    h = min(inner.grid.h, outer.grid.h)
    if hi - lo < h:
        zq = np.array([lo, hi])
    else:
        zq = np.linspace(lo, hi, int(round((hi - lo) / h)) + 1)
    gap = _resample_radius(outer, zq) - _resample_radius(inner, zq)
    margin = float(np.min(gap))
    return ContainmentResult(margin >= 0.0, margin)


# ---------------------------------------------------------------------------
# conversions
# ---------------------------------------------------------------------------


def graph_to_radial(g: GraphProfile, n: Optional[int] = None, z_lo: Optional[float] = None) -> RadialProfile:
    """Invert a strictly increasing graph ``z = f(r)`` into a radial profile ``r(z)``.

    The inversion interpolates ``r^2`` as a function of ``z`` with a cubic
    spline of the samples, which is smooth through the tip where
    ``r^2 ~ 2 z / f_rr(0)``.
    """
    f = g.f
    if np.any(np.diff(f) <= 0):
        raise DomainError("graph must be strictly increasing to invert")
    rr = g.rr
    lo = f[0] if z_lo is None else max(float(z_lo), f[0])
    n = g.grid.n if n is None else int(n)
    grid = Grid1D(lo, f[-1], n)
    spline = CubicSpline(f, rr**2)
    r2 = np.clip(spline(grid.nodes), 0.0, None)
    r2[-1] = rr[-1] ** 2
    if z_lo is None:
        r2[0] = 0.0
    return RadialProfile(grid, np.sqrt(r2))


__all__ = [
    "ContainmentResult",
    "CurvatureData",
    "CylinderGraph",
    "CylinderGraphGeometry",
    "DECAY_THRESHOLD",
    "GraphProfile",
    "Grid1D",
    "NoncollapsingResult",
    "RadialProfile",
    "SQRT2",
    "concavity_violation",
    "cross_section_area",
    "cross_section_sqrt_area",
    "curvature_graph",
    "curvature_radial",
    "cylinder_graph_geometry",
    "d1",
    "d2",
    "gaussian_area",
    "graph_to_radial",
    "noncollapsing_ratio",
    "radial_derivatives",
    "radial_graph_geometry",
    "sqrt_area_concavity",
    "surface_containment",
    "theta_derivative",
]
