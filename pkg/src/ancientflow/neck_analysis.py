"""Necks, normalized rotation fields and the neck-improvement experiment.

A neck patch is a piece of a flow written as a radial graph
``r(theta, z, t) = sqrt(-2 t) + u(theta, z, t)`` over the ``x3``-axis, with
times ``t <= -1`` and scale normalized so that the shrinking cylinder has
``H = 1/sqrt(2)`` at ``t = -1``.  A normalized rotation field is
``K(x) = S J S^T (x - q)`` with ``S`` orthogonal and ``J`` the generator of
rotations about ``x3``.  A point is symmetric to accuracy ``eps`` when some
such field satisfies ``|<K, nu>| H <= eps`` on a parabolic neighbourhood.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, Iterable, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.linalg import solve_banded
from scipy.optimize import least_squares
from scipy.spatial.transform import Rotation

from .errors import DomainError, ParameterError, PreconditionError
from .geometry_core import Grid1D, RadialProfile, d1, d2, radial_graph_geometry, theta_derivative
from .mcf_solver import FlowState, Trajectory
from .spectral import tilt_rotation

__all__ = [
    "J",
    "RotationField",
    "NeckPatch",
    "NeckFit",
    "fit_neck",
    "symmetry_defect",
    "best_rotation",
    "compare_rotation_fields",
    "ModeTerm",
    "DICTIONARY",
    "parse_mode_mix",
    "NeckImprovement",
    "neck_improvement_experiment",
    "worst_over_dictionary",
    "K_nu_evolution_residual",
    "translation_trajectory",
    "bowl_neck_patch",
]

J = np.array([[0.0, 1.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
E3 = np.array([0.0, 0.0, 1.0])
# parabolic neighbourhood used for symmetry: ball radius 10/H, time depth 100/H^2
SYMMETRY_WINDOW = (10.0, 100.0)
GRAPH_VALIDITY = 0.1
GN_MAX_ITER = 50


def _frame_to_e3(axis: np.ndarray) -> np.ndarray:
    """Rotation taking ``e3`` to the unit vector ``axis`` along the shortest arc."""
    a = np.asarray(axis, dtype=float)
    a = a / np.linalg.norm(a)
    c = np.cross(E3, a)
    s = np.linalg.norm(c)
    if s < 1e-15:
        return np.eye(3) if a[2] > 0 else np.diag([1.0, -1.0, -1.0])
    angle = math.atan2(s, float(a[2]))
    return Rotation.from_rotvec(c / s * angle).as_matrix()


# ---------------------------------------------------------------------------
# rotation fields
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RotationField:
    """Normalized rotation vector field ``K(x) = S J S^T (x - q)``.

    Parameters
    ----------
    S : (3, 3) array
        Orthogonal matrix (``S^T S = I`` within ``1e-12``).
    q : (3,) array
        A point on the rotation axis.
    """

    S: np.ndarray
    q: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        S = np.array(self.S, dtype=float)
        q = np.array(self.q, dtype=float)
        if S.shape != (3, 3) or q.shape != (3,):
            raise ParameterError("RotationField needs a 3x3 S and a 3-vector q")
        if np.max(np.abs(S.T @ S - np.eye(3))) > 1e-12:
            raise ParameterError("S must be orthogonal")
        object.__setattr__(self, "S", S)
        object.__setattr__(self, "q", q)

    @classmethod
    def identity(cls) -> "RotationField":
        return cls(np.eye(3))

    @classmethod
    def about(cls, axis: Sequence[float], point: Sequence[float] = (0.0, 0.0, 0.0)) -> "RotationField":
        """Field rotating about the line through ``point`` with direction ``axis``."""
        return cls(_frame_to_e3(np.asarray(axis, dtype=float)), np.asarray(point, dtype=float))

    @property
    def A(self) -> np.ndarray:
        """Skew matrix ``S J S^T``."""
        return self.S @ J @ self.S.T

    @property
    def axis(self) -> np.ndarray:
        return self.S[:, 2].copy()

    @property
    def omega(self) -> np.ndarray:
        """Angular velocity: ``K(x) = omega x (x - q)``."""
        A = self.A
        return np.array([A[2, 1], A[0, 2], A[1, 0]])

    @property
    def b(self) -> np.ndarray:
        """Value ``K(0) = -A q``."""
        return -self.A @ self.q

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return (x - self.q) @ self.A.T

    def negated(self) -> "RotationField":
        """The field ``-K`` (same axis line, opposite orientation)."""
        return RotationField(self.S @ np.diag([1.0, -1.0, -1.0]), self.q)

    def moved(self, Q: np.ndarray, c: np.ndarray) -> "RotationField":
        """Push-forward under the rigid motion ``x -> Q x + c`` (``Q`` a rotation)."""
        Q = np.asarray(Q, dtype=float)
        return RotationField(Q @ self.S, Q @ self.q + np.asarray(c, dtype=float))


# ---------------------------------------------------------------------------
# neck patches
# ---------------------------------------------------------------------------


class _PatchGeometry(NamedTuple):
    X: np.ndarray  # (nt, ntheta, nz, 3) ambient positions
    nu: np.ndarray  # (nt, ntheta, nz, 3) ambient outward normals
    e_theta: np.ndarray  # (nt, ntheta, nz, 3) ambient angular directions
    H: np.ndarray  # (nt, ntheta, nz)


@dataclass(frozen=True)
class NeckPatch:
    """Samples of ``u = r - sqrt(-2 t)`` on a space-time grid.

    Parameters
    ----------
    ntheta : int
        Number of equispaced angles on ``[0, 2 pi)``.
    zgrid : Grid1D
        Axial grid, usually ``[-L/4, L/4]``.
    times : array_like
        Increasing negative times, usually ending at ``-1``.
    u : array_like, shape (nt, ntheta, nz)
        Radial deviation from the shrinking cylinder.
    rotation, translation : optional
        Rigid motion ``x -> rotation @ x + translation`` placing the patch in
        space.  The default is the identity.

    Notes
    -----
    The graph-validity bound ``|u| <= 0.1 sqrt(-2 t)`` is reported by
    :attr:`is_valid` rather than enforced, so that :func:`fit_neck` can
    classify invalid data as ``"not-a-neck"``.
    """

    ntheta: int
    zgrid: Grid1D
    times: np.ndarray
    u: np.ndarray
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        t = np.array(self.times, dtype=float).ravel()
        u = np.array(self.u, dtype=float)
        if t.size < 1 or np.any(t >= 0):
            raise DomainError("neck patch times must be negative")
        if t.size > 1 and np.any(np.diff(t) <= 0):
            raise ParameterError("neck patch times must increase")
        if u.shape != (t.size, self.ntheta, self.zgrid.n):
            raise ParameterError(f"u must have shape {(t.size, self.ntheta, self.zgrid.n)}")
        if not np.all(np.isfinite(u)):
            raise DomainError("u must be finite")
        Q = np.array(self.rotation, dtype=float)
        if Q.shape != (3, 3) or np.max(np.abs(Q.T @ Q - np.eye(3))) > 1e-12:
            raise ParameterError("rotation must be orthogonal")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "rotation", Q)
        object.__setattr__(self, "translation", np.array(self.translation, dtype=float))

    @classmethod
    def from_function(cls, fn, L: float = 20.0, ntheta: int = 32, nz: int = 81, nt: int = 25, **kw) -> "NeckPatch":
        """Sample ``fn(theta, z, t)`` on the standard patch of size ``L``."""
        zgrid = Grid1D(-L / 4.0, L / 4.0, nz)
        times = np.linspace(-(L**2) / 16.0, -1.0, nt)
        theta = 2.0 * np.pi * np.arange(ntheta) / ntheta
        T, TH, Z = np.meshgrid(times, theta, zgrid.nodes, indexing="ij")
        u = np.broadcast_to(np.asarray(fn(TH, Z, T), dtype=float), T.shape)
        return cls(ntheta, zgrid, times, u, **kw)

    @property
    def theta(self) -> np.ndarray:
        return 2.0 * np.pi * np.arange(self.ntheta) / self.ntheta

    @property
    def z(self) -> np.ndarray:
        return self.zgrid.nodes

    @property
    def base_radius(self) -> np.ndarray:
        """``sqrt(-2 t)`` per time slice."""
        return np.sqrt(-2.0 * self.times)

    @property
    def radius(self) -> np.ndarray:
        return self.base_radius[:, None, None] + self.u

    @property
    def graph_defect(self) -> float:
        """``max |u| / sqrt(-2 t)``; at most 0.1 for a valid patch."""
        return float(np.max(np.abs(self.u) / self.base_radius[:, None, None]))

    @property
    def is_valid(self) -> bool:
        return self.graph_defect <= GRAPH_VALIDITY

    @property
    def center_index(self) -> Tuple[int, int, int]:
        """Indices ``(t, theta, z)`` of the center point: last time, ``theta = 0``, ``z`` nearest 0."""
        return (self.times.size - 1, 0, int(np.argmin(np.abs(self.z))))

    def moved(self, Q: np.ndarray, c: np.ndarray) -> "NeckPatch":
        """The same samples placed by the extra rigid motion ``x -> Q x + c``."""
        Q = np.asarray(Q, dtype=float)
        return NeckPatch(
            self.ntheta, self.zgrid, self.times, self.u, Q @ self.rotation, Q @ self.translation + np.asarray(c, float)
        )

    @cached_property
    def geometry(self) -> _PatchGeometry:
        th = self.theta
        cos, sin = np.cos(th)[:, None], np.sin(th)[:, None]
        R = self.radius
        if np.any(R <= 0):
            raise DomainError("neck patch radius must stay positive")
        X = np.empty(R.shape + (3,))
        nu = np.empty_like(X)
        et = np.empty_like(X)
        H = np.empty(R.shape)
        z = self.z
        for k in range(R.shape[0]):
            g = radial_graph_geometry(R[k], z, self.zgrid.h)
            X[k, ..., 0] = R[k] * cos
            X[k, ..., 1] = R[k] * sin
            X[k, ..., 2] = z[None, :]
            a = g.R_theta / R[k]
            nu[k, ..., 0] = (cos + a * sin) / g.W
            nu[k, ..., 1] = (sin - a * cos) / g.W
            nu[k, ..., 2] = -g.R_z / g.W
            et[k, ..., 0] = -sin
            et[k, ..., 1] = cos
            et[k, ..., 2] = 0.0
            H[k] = g.H
        Q, c = self.rotation, self.translation
        return _PatchGeometry(X @ Q.T + c, nu @ Q.T, et @ Q.T, H)

    @property
    def center(self) -> Tuple[np.ndarray, float]:
        """Center point (ambient) and its mean curvature."""
        g = self.geometry
        i = self.center_index
        return g.X[i].copy(), float(g.H[i])

    def window_mask(self, window: Optional[Tuple[float, float]] = SYMMETRY_WINDOW) -> np.ndarray:
        """Nodes of the parabolic neighbourhood ``P(xbar, tbar, L, theta)`` inside the patch.

        ``window = (L, theta)`` selects points within distance ``L / H`` of
        the center and times within ``theta / H^2`` before the center time;
        ``None`` selects every node.
        """
        shape = self.u.shape
        if window is None:
            return np.ones(shape, dtype=bool)
        Lw, tw = window
        xbar, Hbar = self.center
        tbar = self.times[-1]
        dist = np.linalg.norm(self.geometry.X - xbar, axis=-1)
        in_time = (self.times >= tbar - tw / Hbar**2 - 1e-12)[:, None, None]
        return (dist <= Lw / Hbar + 1e-12) & in_time


# ---------------------------------------------------------------------------
# neck fitting
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NeckFit:
    """Best cylinder at the last time and the C^2 distance to the shrinking cylinder.

    Attributes
    ----------
    axis : ndarray
        Unit axis direction (ambient).
    center : ndarray
        Point of the axis nearest the patch center.
    radius : float
        Fitted radius at the last time.
    eps_measured : float
        Max over the patch of ``|u|``, ``|u_z|``, ``|u_theta|/rho``,
        ``|u_zz|``, ``|u_theta z|/rho`` and ``|u_theta theta|/rho^2`` with
        ``rho = sqrt(-2 t)``.
    status : str
        ``"neck"`` or ``"not-a-neck"``.
    fit_residual : float
        Max deviation of the samples from the fitted cylinder.
    """

    axis: np.ndarray
    center: np.ndarray
    radius: float
    eps_measured: float
    status: str
    fit_residual: float


def _c2_distance(patch: NeckPatch) -> float:
    u = patch.u
    h = patch.zgrid.h
    rho = patch.base_radius[:, None, None]
    parts = [np.abs(u)]
    uz = d1(u, h, axis=2)
    parts.append(np.abs(uz))
    parts.append(np.abs(d2(u, h, axis=2)))
    # theta derivatives are spectral along axis 1
    uth = np.moveaxis(theta_derivative(np.moveaxis(u, 1, 0), 1), 0, 1)
    uthth = np.moveaxis(theta_derivative(np.moveaxis(u, 1, 0), 2), 0, 1)
    uthz = np.moveaxis(theta_derivative(np.moveaxis(uz, 1, 0), 1), 0, 1)
    parts += [np.abs(uth) / rho, np.abs(uthz) / rho, np.abs(uthth) / rho**2]
    return float(max(np.max(p) for p in parts))


def fit_neck(patch: NeckPatch) -> NeckFit:
    """Least-squares cylinder at the last time plus the C^2 distance to ``sqrt(-2 t)``.

    The axis is parametrized by two tilts and two transverse offsets of the
    patch's own axis, and the radius is a fifth unknown.  The status is
    ``"not-a-neck"`` when the samples violate the graph-validity bound or
    deviate from the fitted cylinder by more than ``0.1`` times its radius.
    """
    g = patch.geometry
    k = patch.times.size - 1
    Q, c = patch.rotation, patch.translation
    X = (g.X[k] - c) @ Q  # local coordinates
    P = X.reshape(-1, 3)

    def resid(p):
        a = tilt_rotation(p[:2]) @ E3
        d = P - np.array([p[2], p[3], 0.0])
        perp = d - np.outer(d @ a, a)
        return np.linalg.norm(perp, axis=1) - p[4]

    rho0 = float(np.mean(np.linalg.norm(P[:, :2], axis=1)))
    sol = least_squares(resid, np.array([0.0, 0.0, 0.0, 0.0, rho0]), xtol=1e-15, ftol=1e-15, gtol=1e-15)
    p = sol.x
    a_loc = tilt_rotation(p[:2]) @ E3
    c_loc = np.array([p[2], p[3], 0.0])
    xbar_loc = X[0, int(np.argmin(np.abs(patch.z)))]
    c_loc = c_loc + ((xbar_loc - c_loc) @ a_loc) * a_loc
    fit_res = float(np.max(np.abs(resid(p))))
    radius = float(p[4])
    eps = _c2_distance(patch)
    ok = patch.is_valid and radius > 0 and fit_res <= GRAPH_VALIDITY * radius
    return NeckFit(
        axis=Q @ a_loc,
        center=Q @ c_loc + c,
        radius=abs(radius),
        eps_measured=eps,
        status="neck" if ok else "not-a-neck",
        fit_residual=fit_res,
    )


# ---------------------------------------------------------------------------
# symmetry
# ---------------------------------------------------------------------------


def _normal_component(patch: NeckPatch, K: RotationField) -> np.ndarray:
    g = patch.geometry
    return np.einsum("...i,...i->...", K(g.X), g.nu)


def _check_center(patch: NeckPatch, K: RotationField, label: str = "K"):
    xbar, Hbar = patch.center
    val = float(np.linalg.norm(K(xbar)) * Hbar)
    if val > 10.0:
        raise PreconditionError(f"|{label}| H = {val:.3g} exceeds 10 at the patch center")


def symmetry_defect(
    patch: NeckPatch, K: RotationField, window: Optional[Tuple[float, float]] = SYMMETRY_WINDOW
) -> float:
    """``sup |<K, nu>| H`` over the parabolic neighbourhood of the patch center.

    Parameters
    ----------
    window : (L, theta) or None
        Neighbourhood ``P(xbar, tbar, L, theta)`` intersected with the patch;
        ``None`` uses the whole patch.

    Raises
    ------
    PreconditionError
        If ``|K| H > 10`` at the center.
    """
    _check_center(patch, K)
    mask = patch.window_mask(window)
    vals = np.abs(_normal_component(patch, K)) * patch.geometry.H
    return float(np.max(vals[mask]))


def _oriented(patch: NeckPatch, K: RotationField) -> RotationField:
    """Fix the sign so that the theta-average of ``<K, e_theta>`` on the center circle is ``>= 0``."""
    g = patch.geometry
    kt, _, kz = patch.center_index
    Xc = g.X[kt, :, kz]
    avg = float(np.mean(np.einsum("ij,ij->i", K(Xc), g.e_theta[kt, :, kz])))
    return K.negated() if avg < 0 else K


def _field_from_params(patch: NeckPatch, p: np.ndarray, base: np.ndarray) -> RotationField:
    """Field with axis ``base @ tilt(p[:2]) e3`` through ``base @ (p2, p3, 0)`` in patch coordinates."""
    S_loc = base @ tilt_rotation(p[:2])
    q_loc = base @ np.array([p[2], p[3], 0.0])
    return RotationField(S_loc, q_loc).moved(patch.rotation, patch.translation)


def best_rotation(
    patch: NeckPatch,
    window: Optional[Tuple[float, float]] = SYMMETRY_WINDOW,
    max_iter: int = GN_MAX_ITER,
    tol: float = 1e-13,
) -> Tuple[RotationField, float]:
    """Rotation field minimizing the symmetry defect.

    Damped Gauss-Newton on the weighted normal components ``<K, nu> H`` over
    the window, in the four parameters that act non-trivially (two tilts and
    two transverse offsets of the axis), started from the
    :func:`fit_neck` axis.  The sign is then fixed by the convention of
    :func:`_oriented`.  The least-squares minimizer is returned together with
    its sup-norm defect.

    Warns
    -----
    RuntimeWarning
        When the iteration does not settle within ``max_iter`` steps; the best
        iterate is returned.
    """
    fit = fit_neck(patch)
    Q, c = patch.rotation, patch.translation
    a_loc = Q.T @ fit.axis
    if a_loc[2] < 0:
        a_loc = -a_loc
    base = _frame_to_e3(a_loc)
    c_loc = base.T @ (Q.T @ (fit.center - c))
    mask = patch.window_mask(window)
    H = patch.geometry.H[mask]

    def resid(p):
        K = _field_from_params(patch, p, base)
        return _normal_component(patch, K)[mask] * H

    p = np.array([0.0, 0.0, c_loc[0], c_loc[1]])
    r = resid(p)
    cost = float(r @ r)
    lam = 1e-12
    converged = False
    step_fd = 1e-7
    for _ in range(max_iter):
        Jm = np.empty((r.size, 4))
        for j in range(4):
            dp = np.zeros(4)
            dp[j] = step_fd
            Jm[:, j] = (resid(p + dp) - resid(p - dp)) / (2 * step_fd)
        JtJ = Jm.T @ Jm
        g = Jm.T @ r
        while True:
            delta = -np.linalg.solve(JtJ + lam * np.diag(np.diag(JtJ) + 1e-30), g)
            r_new = resid(p + delta)
            cost_new = float(r_new @ r_new)
            if cost_new <= cost or lam > 1e12:
                break
            lam *= 10.0
        if cost_new <= cost:
            p, r = p + delta, r_new
            improvement = cost - cost_new
            cost = cost_new
            lam = max(lam / 10.0, 1e-15)
            if np.linalg.norm(delta) < tol * (1 + np.linalg.norm(p)) or improvement <= 1e-30 + 1e-15 * cost:
                converged = True
                break
        else:
            converged = True
            break
    if not converged:
        warnings.warn("best_rotation: Gauss-Newton did not settle; returning the best iterate", RuntimeWarning)
    K = _oriented(patch, _field_from_params(patch, p, base))
    return K, symmetry_defect(patch, K, window)


def compare_rotation_fields(
    K1: RotationField, K2: RotationField, patch: NeckPatch, return_coverage: bool = False
) -> Union[float, Tuple[float, float]]:
    """``min(sup |K1 - K2|, sup |K1 + K2|) H(center)`` over the ball of radius ``100/H``.

    The ball is intersected with the patch.  With ``return_coverage`` the
    fraction of the ball's axial extent ``[-100/H, 100/H]`` covered by the
    patch is returned as well.
    """
    _check_center(patch, K1, "K1")
    _check_center(patch, K2, "K2")
    xbar, Hbar = patch.center
    X = patch.geometry.X.reshape(-1, 3)
    inside = np.linalg.norm(X - xbar, axis=1) <= 100.0 / Hbar
    pts = X[inside]
    k1, k2 = K1(pts), K2(pts)
    val = min(np.max(np.linalg.norm(k1 - k2, axis=1)), np.max(np.linalg.norm(k1 + k2, axis=1))) * Hbar
    if return_coverage:
        cover = min(1.0, (patch.z[-1] - patch.z[0]) / (200.0 / Hbar))
        return float(val), float(cover)
    return float(val)


# ---------------------------------------------------------------------------
# neck improvement experiment
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ModeTerm:
    """One data term ``weight * profile(z) * trig(m theta)``.

    ``profile`` is ``"const"`` (1) or ``"affine"`` (``z / (L/4)``) and
    ``parity`` is ``"c"`` (cosine) or ``"s"`` (sine).
    """

    m: int
    profile: str = "const"
    parity: str = "c"
    weight: float = 1.0

    def __post_init__(self):
        if self.m < 0:
            raise ParameterError("mode number must be non-negative")
        if self.profile not in ("const", "affine"):
            raise ParameterError(f"unknown profile {self.profile!r}")
        if self.parity not in ("c", "s"):
            raise ParameterError(f"unknown parity {self.parity!r}")

    @property
    def label(self) -> str:
        return f"m{self.m}" + ("a" if self.profile == "affine" else "") + ("" if self.parity == "c" else "s")


DICTIONARY: Tuple[ModeTerm, ...] = tuple(ModeTerm(m, prof) for m in range(1, 5) for prof in ("const", "affine"))


def parse_mode_mix(mix: Union[str, ModeTerm, Iterable[ModeTerm], None]) -> Tuple[ModeTerm, ...]:
    """Parse ``"m2"``, ``"m1a+m3"``, ``"0"``/``""`` (no data) or pass terms through.

    A trailing ``a`` selects the affine profile and a trailing ``s`` the
    sine parity.
    """
    if mix is None:
        return ()
    if isinstance(mix, ModeTerm):
        return (mix,)
    if isinstance(mix, str):
        s = mix.strip().lower()
        if s in ("", "0", "none", "zero"):
            return ()
        terms = []
        for tok in s.split("+"):
            tok = tok.strip()
            if not tok.startswith("m"):
                raise ParameterError(f"cannot parse mode term {tok!r}")
            body = tok[1:]
            parity = "c"
            profile = "const"
            if body.endswith("s"):
                parity, body = "s", body[:-1]
            if body.endswith("a"):
                profile, body = "affine", body[:-1]
            if not body.isdigit():
                raise ParameterError(f"cannot parse mode term {tok!r}")
            terms.append(ModeTerm(int(body), profile, parity))
        return tuple(terms)
    return tuple(mix)


# largest accepted dt / h^2 for the Crank-Nicolson model solve, and the default
MESH_RATIO_LIMIT = 4.0
DEFAULT_MESH_RATIO = 0.5
DEFAULT_SPACING = 0.05


def _term_data(term: ModeTerm, L: float, eps: float, z: np.ndarray, t) -> np.ndarray:
    """Amplitude of a data term: ``eps sqrt(-2t) p(z)`` for ``m != 1`` and ``eps sqrt(2) p(z)`` for ``m = 1``.

    Both make ``|u| H <= eps`` with ``H = 1/sqrt(-2t)``; the ``m = 1`` data is
    the exact time-independent normal component of a tilted and shifted
    rotation field.
    """
    p = np.ones_like(z) if term.profile == "const" else z / (L / 4.0)
    amp = math.sqrt(2.0) if term.m == 1 else np.sqrt(-2.0 * t)
    return eps * term.weight * amp * p


class _ModeSolve(NamedTuple):
    initial: np.ndarray  # (nz, k)
    picked: np.ndarray  # (len(pick), nz, k)
    residual: float


def _solve_modes(terms: Sequence[ModeTerm], L: float, eps: float, z: np.ndarray, times: np.ndarray, pick) -> _ModeSolve:
    """Crank-Nicolson for ``v_t = v_zz + (1 - m^2) v / (-2t)``, one block per data term.

    The data is imposed at the initial time and held on both ends.  The
    decoupled blocks are stacked into one banded system (identity boundary
    rows separate them).  Along the way the heat residual of
    ``vhat = (-t)^((1 - m^2)/2) v`` is measured with the same Crank-Nicolson
    stencil.
    """
    n = z.size
    k_terms = len(terms)
    h = z[1] - z[0]
    m2 = np.array([term.m**2 for term in terms], dtype=float)[:, None]
    pick = list(pick)
    # every data term is (time amplitude) x (profile); split them to avoid re-evaluation
    prof = np.stack([_term_data(term, L, eps, z, -0.5) for term in terms])  # time factor 1 at t = -1/2
    one_amp = np.array([term.m == 1 for term in terms])[:, None]
    amp = lambda tt: np.where(one_amp, 1.0, math.sqrt(-2.0 * tt))
    v = prof * amp(times[0])  # (k, n)
    initial = v.T.copy()
    picked = np.empty((len(pick), n, k_terms))
    slot = {k: i for i, k in enumerate(pick)}
    if 0 in slot:
        picked[slot[0]] = v.T
    expo = (1.0 - m2) / 2.0
    lap = lambda w: (w[:, 2:] - 2 * w[:, 1:-1] + w[:, :-2]) / h**2
    res = 0.0
    ab = np.zeros((3, n * k_terms))
    up, diag, low = (x.reshape(k_terms, n) for x in ab)
    lap_v = lap(v)
    for k in range(times.size - 1):
        ta, tb = times[k], times[k + 1]
        dt = tb - ta
        ca = (1.0 - m2) / (-2.0 * ta)
        cb = (1.0 - m2) / (-2.0 * tb)
        rhs = v.copy()
        rhs[:, 1:-1] = v[:, 1:-1] + 0.5 * dt * (lap_v + ca * v[:, 1:-1])
        up[:, 2:] = -0.5 * dt / h**2
        low[:, :-2] = -0.5 * dt / h**2
        diag[:, 1:-1] = 1.0 + dt / h**2 - 0.5 * dt * cb
        diag[:, 0] = diag[:, -1] = 1.0
        edge = prof[:, [0, -1]] * amp(tb)
        rhs[:, 0], rhs[:, -1] = edge[:, 0], edge[:, 1]
        v_new = solve_banded((1, 1), ab, rhs.ravel(), check_finite=False).reshape(k_terms, n)
        lap_new = lap(v_new)
        sa, sb = (-ta) ** expo, (-tb) ** expo
        r = (sb * v_new[:, 1:-1] - sa * v[:, 1:-1]) / dt - 0.5 * (sb * lap_new + sa * lap_v)
        res = max(res, float(np.max(np.abs(r))))
        v, lap_v = v_new, lap_new
        if k + 1 in slot:
            picked[slot[k + 1]] = v.T
    return _ModeSolve(initial, picked, res)


@dataclass(frozen=True)
class NeckImprovement:
    """Outcome of :func:`neck_improvement_experiment`.

    Attributes
    ----------
    factor : float
        Center defect after the best rotation divided by ``eps`` (0 with no data).
    center_eps : float
        Defect on the center sub-patch.
    rotation : RotationField or None
        Best rotation on the center sub-patch.
    decay : dict
        Per term: max amplitude over the center window divided by the max
        data amplitude at the initial time.
    predicted_decay : dict
        Per term: ``(L^2/16)^((2 - m^2)/2)``.
    vhat_residual : float
        Max heat-equation residual of the rescaled modes.
    samples : dict
        ``"v"`` (cosine-mode) and ``"w"`` (sine-mode) amplitudes at ``t = -1``
        on the ``z`` grid, keyed by ``m``.
    """

    L: float
    eps: float
    factor: float
    center_eps: float
    rotation: Optional[RotationField]
    decay: Dict[str, float]
    predicted_decay: Dict[str, float]
    vhat_residual: float
    samples: Dict[str, Dict[int, np.ndarray]]
    z: np.ndarray


class _TermRun(NamedTuple):
    term: ModeTerm
    w: np.ndarray  # radius perturbation on the center sub-patch, (nt_c, ntheta, nz_c)
    last: np.ndarray  # amplitude at t = -1 on the full z grid
    decay: float
    predicted: float


class _ModelRun(NamedTuple):
    z: np.ndarray
    zc: np.ndarray
    times: np.ndarray  # center times
    ntheta: int
    terms: Tuple[_TermRun, ...]
    residual: float


def _model_run(L, eps, terms, nz, nt, ntheta, center_times) -> _ModelRun:
    if L < 10:
        raise ParameterError("the neck improvement experiment needs L >= 10")
    if not 0 <= eps <= 0.01:
        raise ParameterError("eps must lie in [0, 0.01]")
    if nz is None:
        nz = int(round(L / 2.0 / DEFAULT_SPACING)) + 1
    z = np.linspace(-L / 4.0, L / 4.0, nz)
    h = z[1] - z[0]
    t0 = -(L**2) / 16.0
    span = -1.0 - t0
    if nt is None:
        nt = int(math.ceil(span / (DEFAULT_MESH_RATIO * h * h)))
    dt = span / nt
    if dt / h**2 > MESH_RATIO_LIMIT * (1 + 1e-12):
        raise ParameterError(f"dt/h^2 = {dt / h**2:.3g} exceeds {MESH_RATIO_LIMIT}")
    times = np.linspace(t0, -1.0, nt + 1)
    cz = np.abs(z) <= math.sqrt(2.0) + 1e-12
    tw = np.flatnonzero(times >= -3.0 - 1e-12)
    pick = np.unique(np.linspace(tw[0], tw[-1], min(center_times, tw.size)).round().astype(int))
    theta = 2.0 * np.pi * np.arange(ntheta) / ntheta
    runs: List[_TermRun] = []
    terms = tuple(terms)
    sol = _solve_modes(terms, L, eps, z, times, pick) if terms else None
    for j, term in enumerate(terms):
        m = term.m
        V0, Vc = sol.initial[:, j], sol.picked[:, :, j]
        start = np.max(np.abs(V0))
        if m == 0:
            # a rotation-invariant mode shifts the radius; it has no angular primitive
            ang = np.zeros(ntheta)
        elif term.parity == "c":
            ang = np.sin(m * theta) / m
        else:
            ang = -np.cos(m * theta) / m
        runs.append(
            _TermRun(
                term,
                Vc[:, None, cz] * ang[None, :, None],
                Vc[-1].copy(),
                float(np.max(np.abs(Vc[:, cz])) / start) if start > 0 else 0.0,
                float((L**2 / 16.0) ** ((2.0 - m**2) / 2.0)),
            )
        )
    res = sol.residual if sol is not None else 0.0
    return _ModelRun(z, z[cz], times[pick], ntheta, tuple(runs), res)


def _assemble(L: float, eps: float, run: _ModelRun, selected: Sequence[_TermRun]) -> NeckImprovement:
    decay = {r.term.label: r.decay for r in selected}
    pred = {r.term.label: r.predicted for r in selected}
    samples: Dict[str, Dict[int, np.ndarray]] = {"v": {}, "w": {}}
    for r in selected:
        key = "v" if r.term.parity == "c" else "w"
        samples[key][r.term.m] = samples[key].get(r.term.m, 0.0) + r.last
    if not selected or eps == 0:
        return NeckImprovement(L, eps, 0.0, 0.0, None, decay, pred, run.residual, samples, run.z)
    w = sum(r.w for r in selected)
    zc = run.zc
    patch = NeckPatch(run.ntheta, Grid1D(float(zc[0]), float(zc[-1]), zc.size), run.times, w)
    K, center_eps = best_rotation(patch, window=None)
    return NeckImprovement(L, eps, center_eps / eps, center_eps, K, decay, pred, run.residual, samples, run.z)


def neck_improvement_experiment(
    L: float,
    eps: float,
    mode_mix: Union[str, ModeTerm, Iterable[ModeTerm], None] = "m2",
    nz: Optional[int] = None,
    nt: Optional[int] = None,
    ntheta: int = 32,
    center_times: int = 21,
) -> NeckImprovement:
    """Solve the model linear equation and measure the symmetry gain at the center.

    The normal component ``u = <Kbar, nu>`` of a neck obeys, to leading order,
    ``u_t = u_zz + u_theta theta/(-2t) + u/(-2t)`` on
    ``z in [-L/4, L/4]``, ``t in [-L^2/16, -1]``.  Each data term is solved
    per Fourier mode by Crank-Nicolson with its values held on the ends and
    imposed at the initial time.  By default ``h = 0.05`` and ``dt = 0.5 h^2``.  The center
    sub-patch ``|z| <= sqrt(2)``, ``t in [-3, -1]`` (the neighbourhood
    ``P(xbar, -1, 1, 1)`` extended to full circles) is turned into a surface
    ``r = sqrt(-2t) + w`` with ``w_theta = u``, and :func:`best_rotation`
    measures its defect.

    Raises
    ------
    ParameterError
        For ``L < 10``, ``eps`` outside ``[0, 0.01]`` or ``dt / h^2`` above
        :data:`MESH_RATIO_LIMIT`.
    """
    terms = parse_mode_mix(mode_mix)
    run = _model_run(L, eps, terms, nz, nt, ntheta, center_times)
    return _assemble(L, eps, run, run.terms)


def worst_over_dictionary(L: float, eps: float, dictionary: Sequence[ModeTerm] = DICTIONARY, **kw):
    """Largest improvement factor over single dictionary terms; returns ``(factor, label, results)``.

    Terms sharing a mode number are solved together.
    """
    run = _model_run(
        L, eps, tuple(dictionary), kw.get("nz"), kw.get("nt"), kw.get("ntheta", 32), kw.get("center_times", 21)
    )
    results = {r.term.label: _assemble(L, eps, run, [r]) for r in run.terms}
    label = max(results, key=lambda k: results[k].factor)
    return results[label].factor, label, results


# ---------------------------------------------------------------------------
# evolution of <K, nu> on axisymmetric flows
# ---------------------------------------------------------------------------


def _knu_components(r, rz, z, K: RotationField):
    """Coefficients ``(C0, Cc, Cs)`` with ``<K, nu> = C0 + Cc cos(theta) + Cs sin(theta)``."""
    w = K.omega
    b = K.b
    W = np.sqrt(1.0 + rz**2)
    lever = z + r * rz
    return -b[2] * rz / W, (w[1] * lever + b[0]) / W, (-w[0] * lever + b[1]) / W


def K_nu_evolution_residual(traj: Trajectory, K: RotationField, trim: int = 3) -> float:
    """Max of ``|d/dt <K,nu> - Lap <K,nu> - |A|^2 <K,nu>|`` on an axisymmetric flow.

    For a surface of revolution ``r(z, t)`` the normal component splits into
    ``C0(z) + Cc(z) cos(theta) + Cs(z) sin(theta)``.  With ``W^2 = 1 + r_z^2``
    the Laplacian of ``C(z) cos(m theta)`` is
    ``[(r C_z / W)_z / (r W) - m^2 C / r^2] cos(m theta)``, the normal time
    derivative is ``C_t - (r_t r_z / W^2) C_z`` and
    ``|A|^2 = r_zz^2 / W^6 + 1 / (r W)^2``.  Derivatives are second-order
    differences in ``z`` and in time.  The Laplacian differences ``C`` twice
    more, so an ``O(h^2)`` one-sided error at an end node reaches the second
    node in as ``O(1)``; ``trim = 3`` end nodes are therefore excluded, along
    with the first and last states.
    """
    states = traj.states
    if len(states) < 3:
        raise ParameterError("need at least three states")
    for s in states:
        if not isinstance(s.payload, RadialProfile):
            raise ParameterError("K_nu_evolution_residual needs radius-form states")
    grid = states[0].payload.grid
    h = grid.h
    z = grid.nodes
    t = traj.times
    R = np.array([s.payload.r for s in states])
    Rz = d1(R, h, axis=1)
    Rzz = d2(R, h, axis=1)
    Rt = np.gradient(R, t, axis=0, edge_order=2)
    W = np.sqrt(1.0 + Rz**2)
    A2 = Rzz**2 / W**6 + 1.0 / (R * W) ** 2
    comps = _knu_components(R, Rz, z[None, :], K)
    total = np.zeros_like(R)
    for m, C in zip((0, 1, 1), comps):
        Ct = np.gradient(C, t, axis=0, edge_order=2)
        Cz = d1(C, h, axis=1)
        lap = d1(R * Cz / W, h, axis=1) / (R * W) - m * m * C / R**2
        dtC = Ct - Rt * Rz / W**2 * Cz
        total += np.abs(dtC - lap - A2 * C)
    inner = total[1:-1, trim:-trim]
    return float(np.max(inner))


def translation_trajectory(radius_of_height, zgrid: Grid1D, times: Sequence[float], speed: float = 1.0) -> Trajectory:
    """Exact translating flow ``r(z, t) = R(z - speed t)`` sampled as radius-form states."""
    states = []
    for tk in times:
        r = np.asarray(radius_of_height(zgrid.nodes - speed * tk), dtype=float)
        states.append(FlowState(tk, RadialProfile(zgrid, r)))
    return Trajectory(tuple(states), {})


def bowl_neck_patch(bowl, r_center: float, L: float = 10.0, ntheta: int = 16, nz: int = 81, nt: int = 21) -> NeckPatch:
    """Neck patch of the translating bowl around the circle of radius ``r_center`` at ``t = 0``.

    The bowl moves by ``r(z, t) = R(z - c t)``.  With ``lam = sqrt(2) H`` at
    the center circle, patch coordinates are ``z' = lam (z - zbar)`` and
    ``t' = -1 + lam^2 t``.

    Raises
    ------
    DomainError
        If the bowl was not solved far enough out to cover the patch.
    """
    f_r = float(np.interp(r_center, bowl.r, bowl.f_r))
    zbar = float(bowl.height(r_center))
    Hc = bowl.c / math.sqrt(1.0 + f_r**2)
    lam = math.sqrt(2.0) * Hc
    zgrid = Grid1D(-L / 4.0, L / 4.0, nz)
    tp = np.linspace(-(L**2) / 16.0, -1.0, nt)
    t_orig = (tp + 1.0) / lam**2
    heights = zbar + zgrid.nodes[None, :] / lam - bowl.c * t_orig[:, None]
    if np.max(heights) > bowl.f[-1] or np.min(heights) < 0:
        raise DomainError("bowl profile does not cover the requested patch")
    r = lam * bowl.radius_of_height(heights)
    u = r - np.sqrt(-2.0 * tp)[:, None]
    u = np.repeat(u[:, None, :], ntheta, axis=1)
    return NeckPatch(ntheta, zgrid, tp, u)
