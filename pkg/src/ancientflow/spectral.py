"""Gaussian-weighted spectral analysis of graphs over the cylinder ``x1^2 + x2^2 = 2``.

The Hilbert space carries the inner product

``<f, g> = int_Sigma exp(-|x|^2/4) f g = sqrt(2) exp(-1/2) int int f g exp(-z^2/4) dtheta dz``

and the operator ``L f = f_zz + f_thth/2 - z f_z/2 + f`` is self-adjoint with
eigenfunctions ``H_n(z/2) {cos, sin}(m theta)`` (physicists' Hermite
polynomials) and eigenvalues ``1 - (n + m^2)/2``.  The unstable space is
spanned by ``1, z, cos theta, sin theta`` and the neutral space by
``z^2 - 2, z cos theta, z sin theta``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial import hermite as _herm
from scipy.integrate import simpson
from scipy.interpolate import RectBivariateSpline
from scipy.spatial.transform import Rotation

from .errors import AncientFlowError, DomainError, ParameterError, PreconditionError, TruncationWarning
from .geometry_core import DECAY_THRESHOLD, SQRT2, CylinderGraph, Grid1D, d1, theta_derivative
from .mcf_solver import Trajectory, apply_linear, graph_gradient_norm

PREFACTOR = SQRT2 * math.exp(-0.5)

Mode = Tuple[int, int, str]  # (n, m, parity) with parity "c" (cosine) or "s" (sine)

PLUS_MODES: Tuple[Mode, ...] = ((0, 0, "c"), (1, 0, "c"), (0, 1, "c"), (0, 1, "s"))
ZERO_MODES: Tuple[Mode, ...] = ((2, 0, "c"), (1, 1, "c"), (1, 1, "s"))


class AlignmentError(AncientFlowError):
    """Newton iteration for the axis alignment did not converge."""


def hermite(n: int, x) -> np.ndarray:
    """Physicists' Hermite polynomial ``H_n(x)``."""
    if n < 0:
        raise ParameterError("Hermite degree must be nonnegative")
    coef = np.zeros(n + 1)
    coef[n] = 1.0
    return _herm.hermval(np.asarray(x, dtype=float), coef)


def eigenvalue(n: int, m: int) -> float:
    """Eigenvalue ``1 - (n + m^2)/2`` of ``L`` on ``H_n(z/2) {cos, sin}(m theta)``."""
    if n < 0 or m < 0:
        raise ParameterError("mode indices must be nonnegative")
    return 1.0 - 0.5 * (n + m * m)


def mode_values(mode: Mode, theta: np.ndarray, z: np.ndarray) -> np.ndarray:
    """``H_n(z/2)`` times ``cos(m theta)`` or ``sin(m theta)`` on the ``(theta, z)`` mesh."""
    n, m, parity = mode
    if parity not in ("c", "s") or (m == 0 and parity == "s"):
        raise ParameterError(f"invalid mode {mode!r}")
    trig = np.cos(m * theta) if parity == "c" else np.sin(m * theta)
    return trig[:, None] * hermite(n, 0.5 * z)[None, :]


def mode_norm2(mode: Mode) -> float:
    """Closed-form ``||H_n(z/2) trig(m theta)||^2``.

    ``int H_n(z/2)^2 exp(-z^2/4) dz = 2^{n+1} n! sqrt(pi)`` and the angular
    integral is ``2 pi`` for ``m = 0`` and ``pi`` otherwise.
    """
    n, m, _ = mode
    ang = 2.0 * math.pi if m == 0 else math.pi
    return PREFACTOR * ang * 2.0 ** (n + 1) * math.factorial(n) * math.sqrt(math.pi)


# ---------------------------------------------------------------------------
# quadrature
# ---------------------------------------------------------------------------


def _weighted(values: np.ndarray, zgrid: Grid1D) -> float:
    z = zgrid.nodes
    w = np.exp(-0.25 * z * z)
    over_theta = 2.0 * math.pi * np.mean(values * w[None, :], axis=0)
    return PREFACTOR * float(simpson(over_theta, dx=zgrid.h))


def _check_truncation(values: np.ndarray, zgrid: Grid1D, label: str):
    z = zgrid.nodes[[0, -1]]
    ends = np.max(np.abs(values[:, [0, -1]]) * np.exp(-0.25 * z * z)[None, :])
    if ends > DECAY_THRESHOLD:
        warnings.warn(
            f"{label}: weighted integrand {ends:.3g} at the z-ends exceeds the decay threshold",
            TruncationWarning,
            stacklevel=3,
        )


def _as_values(f, ref: Optional[CylinderGraph] = None) -> np.ndarray:
    if isinstance(f, CylinderGraph):
        return f.u
    arr = np.asarray(f, dtype=float)
    if ref is not None and arr.shape != ref.u.shape:
        raise ParameterError("arrays must be sampled on the graph's grid")
    return arr


def inner_product(f: CylinderGraph, g, warn: bool = True) -> float:
    """Gaussian inner product of two functions sampled on a common cylinder grid.

    ``g`` may be a :class:`CylinderGraph` or an array of the same shape.
    Quadrature: periodic trapezoid in ``theta`` and Simpson in ``z``.  A
    :class:`TruncationWarning` is issued when ``exp(-z^2/4)|f g|`` at the
    ends exceeds the decay threshold.
    """
    if not isinstance(f, CylinderGraph):
        raise ParameterError("inner_product needs a CylinderGraph as first argument")
    if isinstance(g, CylinderGraph) and (g.ntheta != f.ntheta or g.zgrid != f.zgrid):
        raise ParameterError("inner_product needs a common grid")
    prod = f.u * _as_values(g, f)
    if warn:
        _check_truncation(prod, f.zgrid, "inner_product")
    return _weighted(prod, f.zgrid)


def norm2(u: CylinderGraph) -> float:
    """``||u||^2`` in the Gaussian space."""
    return inner_product(u, u)


def apply_L(u: CylinderGraph) -> CylinderGraph:
    """``L u = u_zz + u_thth/2 - z u_z/2 + u``.

    ``z``-derivatives are second-order differences (one-sided at the ends);
    ``theta``-derivatives are spectral.
    """
    return u.with_values(apply_linear(u.u, u.z, u.zgrid.h))


def rayleigh_quotient(u: CylinderGraph) -> float:
    """``<L u, u> / <u, u>``."""
    return inner_product(apply_L(u), u) / inner_product(u, u)


# ---------------------------------------------------------------------------
# basis and projections
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HermiteFourierBasis:
    """Modes ``H_n(z/2) {cos, sin}(m theta)`` for ``n <= n_max`` and ``m <= m_max``."""

    n_max: int = 4
    m_max: int = 3

    def __post_init__(self):
        if self.n_max < 0 or self.m_max < 0:
            raise ParameterError("basis sizes must be nonnegative")

    @property
    def modes(self) -> List[Mode]:
        out: List[Mode] = []
        for m in range(self.m_max + 1):
            for n in range(self.n_max + 1):
                out.append((n, m, "c"))
                if m > 0:
                    out.append((n, m, "s"))
        return out

    def normalization(self, mode: Mode) -> float:
        """``||mode||`` in closed form."""
        return math.sqrt(mode_norm2(mode))

    def sample(
        self, mode: Mode, ntheta: int, zgrid: Grid1D, amplitude: float = 1.0, sup: Optional[float] = None
    ) -> CylinderGraph:
        """``amplitude`` times the mode as a graph, or rescaled to sup-norm ``sup`` when given.

        Graphs need ``sqrt(2) + u > 0``, so high modes on wide grids must be
        rescaled; every quantity used here is homogeneous in the amplitude.
        """
        theta = 2.0 * math.pi * np.arange(ntheta) / ntheta
        vals = amplitude * mode_values(mode, theta, zgrid.nodes)
        if sup is not None:
            vals = vals * (sup / np.max(np.abs(vals)))
        return CylinderGraph(ntheta, zgrid, vals)

    def gram(self, ntheta: int, zgrid: Grid1D) -> np.ndarray:
        """Quadrature Gram matrix of the orthonormalized modes."""
        theta = 2.0 * math.pi * np.arange(ntheta) / ntheta
        z = zgrid.nodes
        vals = [mode_values(md, theta, z) / self.normalization(md) for md in self.modes]
        k = len(vals)
        G = np.empty((k, k))
        for i in range(k):
            for j in range(i, k):
                G[i, j] = G[j, i] = _weighted(vals[i] * vals[j], zgrid)
        return G


@dataclass(frozen=True)
class ModeCoefficients:
    """Coefficients of ``u`` in the orthonormalized basis, keyed by ``(n, m, parity)``."""

    coeffs: Dict[Mode, float]
    norm2: float

    def __getitem__(self, mode: Mode) -> float:
        return self.coeffs[mode]

    def total(self) -> float:
        return float(sum(c * c for c in self.coeffs.values()))


def project(u: CylinderGraph, basis: Optional[HermiteFourierBasis] = None) -> ModeCoefficients:
    """Orthonormal-basis coefficients ``<u, e>/||e||`` for every basis mode."""
    basis = basis or HermiteFourierBasis()
    theta, z = u.theta, u.z
    out = {}
    for md in basis.modes:
        e = mode_values(md, theta, z)
        out[md] = _weighted(u.u * e, u.zgrid) / basis.normalization(md)
    return ModeCoefficients(out, norm2(u))


class SpectralSplit(NamedTuple):
    """Squared norms of the projections onto the unstable, neutral and stable spaces."""

    U_plus: float
    U_zero: float
    U_minus: float

    @property
    def total(self) -> float:
        return self.U_plus + self.U_zero + self.U_minus


def _projection(u: CylinderGraph, modes: Sequence[Mode]):
    """Gaussian-orthogonal projection onto ``span(modes)`` with quadrature norms."""
    theta, z = u.theta, u.z
    proj = np.zeros_like(u.u)
    energy = 0.0
    for md in modes:
        e = mode_values(md, theta, z)
        ee = _weighted(e * e, u.zgrid)
        c = _weighted(u.u * e, u.zgrid) / ee
        proj += c * e
        energy += c * c * ee
    return proj, energy


def split(u: CylinderGraph) -> SpectralSplit:
    """``(U_plus, U_zero, U_minus)`` of ``u``.

    The unstable and neutral parts are projections onto the four and three
    explicit modes; the stable part is the rest of ``||u||^2`` (clipped at
    zero against rounding).
    """
    total = norm2(u)
    _, up = _projection(u, PLUS_MODES)
    _, u0 = _projection(u, ZERO_MODES)
    um = max(total - up - u0, 0.0)
    return SpectralSplit(float(up), float(u0), float(um))


def split_components(u: CylinderGraph):
    """The projected functions ``(P_plus u, P_zero u, P_minus u)`` as arrays."""
    pp, _ = _projection(u, PLUS_MODES)
    p0, _ = _projection(u, ZERO_MODES)
    return pp, p0, u.u - pp - p0


# ---------------------------------------------------------------------------
# cutoff
# ---------------------------------------------------------------------------


def cutoff_profile(x) -> np.ndarray:
    """C^2 bump: 1 on ``|x| <= 1/2``, 0 on ``|x| >= 2/3``, quintic smoothstep between.

    With ``s = 6 (|x| - 1/2)`` clipped to ``[0, 1]`` the taper is
    ``1 - (10 s^3 - 15 s^4 + 6 s^5)``, whose first two derivatives vanish at
    both ends.  The result is clipped to ``[0, 1]`` so that the plateau and
    the exterior hold exact ones and zeros despite rounding.
    """
    s = np.clip(6.0 * (np.abs(np.asarray(x, dtype=float)) - 0.5), 0.0, 1.0)
    return np.clip(1.0 - s**3 * (10.0 - 15.0 * s + 6.0 * s * s), 0.0, 1.0)


def cutoff(u: CylinderGraph, rho: float) -> CylinderGraph:
    """``u(theta, z) phi(z / rho)`` with :func:`cutoff_profile` as ``phi``."""
    if not rho > 0:
        raise ParameterError("cutoff scale must be positive")
    return u.with_values(u.u * cutoff_profile(u.z / rho)[None, :])


# ---------------------------------------------------------------------------
# rotations and axis alignment
# ---------------------------------------------------------------------------


def tilt_rotation(alpha: Sequence[float]) -> np.ndarray:
    """Rotation with rotation vector ``(alpha_x, alpha_y, 0)`` (no spin about ``x3``)."""
    return Rotation.from_rotvec([float(alpha[0]), float(alpha[1]), 0.0]).as_matrix()


def _periodic_spline(u: CylinderGraph, pad: int = 4) -> RectBivariateSpline:
    n = u.ntheta
    theta = 2.0 * math.pi * np.arange(-pad, n + pad) / n
    vals = np.concatenate([u.u[-pad:], u.u, u.u[:pad]], axis=0)
    return RectBivariateSpline(theta, u.z, vals, kx=3, ky=3)


def regraph(u: CylinderGraph, Q: np.ndarray, iterations: int = 60, tol: float = 1e-14) -> CylinderGraph:
    """Graph over the cylinder of the rotated surface ``Q M``.

    For every target node ``(theta', z')`` the source parameters
    ``(theta, z)`` with ``Q X(theta, z)`` at angle ``theta'`` and height
    ``z'`` are found by fixed-point iteration on a periodic bicubic spline of
    ``u``; heights beyond the grid are clamped to its ends.
    """
    spline = _periodic_spline(u)
    lo, hi = u.zgrid.lo, u.zgrid.hi
    T0, Z0 = u.mesh()
    th, zz = T0.copy(), Z0.copy()
    for _ in range(iterations):
        zc = np.clip(zz, lo, hi)
        R = SQRT2 + spline.ev(np.mod(th, 2.0 * math.pi), zc)
        X = np.stack([R * np.cos(th), R * np.sin(th), zz])
        Y = np.tensordot(Q, X, axes=1)
        ang = np.arctan2(Y[1], Y[0])
        dth = np.angle(np.exp(1j * (T0 - ang)))
        dz = Z0 - Y[2]
        th = th + dth
        zz = zz + dz
        if max(np.max(np.abs(dth)), np.max(np.abs(dz))) < tol:
            break
    zc = np.clip(zz, lo, hi)
    R = SQRT2 + spline.ev(np.mod(th, 2.0 * math.pi), zc)
    X = np.stack([R * np.cos(th), R * np.sin(th), zz])
    Y = np.tensordot(Q, X, axes=1)
    return u.with_values(np.hypot(Y[0], Y[1]) - SQRT2)


def rotation_coefficients(u: CylinderGraph, rho: float) -> np.ndarray:
    """Coefficients of ``z cos theta`` and ``z sin theta`` in the cutoff graph ``u phi(z/rho)``."""
    uc = cutoff(u, rho)
    out = []
    for md in ZERO_MODES[1:]:
        e = mode_values(md, uc.theta, uc.z)
        out.append(_weighted(uc.u * e, uc.zgrid) / _weighted(e * e, uc.zgrid))
    return np.array(out)


@dataclass(frozen=True)
class Alignment:
    """Result of :func:`align_axis`."""

    rotation: np.ndarray
    u_aligned: CylinderGraph
    tilt: np.ndarray
    coefficients: np.ndarray
    iterations: int


def align_axis(
    u: CylinderGraph,
    rho: float = 12.0,
    tol: float = 1e-10,
    max_iter: int = 20,
    fd_step: float = 1e-6,
) -> Alignment:
    """Tilt the surface so the rotation modes of its cutoff graph vanish.

    Newton iteration on the two tilt angles (the spin about ``x3`` stays
    zero) for the ``z cos theta`` and ``z sin theta`` coefficients of
    ``u phi(z/rho)``, with a finite-difference Jacobian.

    Raises
    ------
    AlignmentError
        If the coefficients are not below ``tol`` after ``max_iter`` steps.
    GraphError
        If a rotated surface stops being a graph.
    """
    from .mcf_solver import check_graph

    check_graph(u)
    coef = rotation_coefficients(u, rho)
    if np.max(np.abs(coef)) <= tol:
        return Alignment(np.eye(3), u, np.zeros(2), coef, 0)
    alpha = np.zeros(2)
    for it in range(1, max_iter + 1):
        J = np.empty((2, 2))
        for k in range(2):
            da = np.zeros(2)
            da[k] = fd_step
            cp = rotation_coefficients(regraph(u, tilt_rotation(alpha + da)), rho)
            cm = rotation_coefficients(regraph(u, tilt_rotation(alpha - da)), rho)
            J[:, k] = (cp - cm) / (2.0 * fd_step)
        alpha = alpha - np.linalg.solve(J, coef)
        Q = tilt_rotation(alpha)
        v = regraph(u, Q)
        coef = rotation_coefficients(v, rho)
        if np.max(np.abs(coef)) <= tol:
            check_graph(v)
            return Alignment(Q, v, alpha, coef, it)
    raise AlignmentError(f"axis alignment did not converge: coefficients {coef}")


# ---------------------------------------------------------------------------
# linearization residual
# ---------------------------------------------------------------------------


def rotation_normal_component(A: np.ndarray, g: CylinderGraph) -> np.ndarray:
    """``<A x, nu_Sigma>`` on the cylinder with ``x = (sqrt2 cos, sqrt2 sin, z)``."""
    T, Z = g.mesh()
    x = np.stack([SQRT2 * np.cos(T), SQRT2 * np.sin(T), Z])
    Ax = np.tensordot(A, x, axes=1)
    return Ax[0] * np.cos(T) + Ax[1] * np.sin(T)


@dataclass(frozen=True)
class LinearizationResidual:
    """Per interior state: ``E`` max-norm, the normalizing size and their ratio."""

    tau: np.ndarray
    residual: np.ndarray
    size: np.ndarray
    ratio: np.ndarray
    generators: np.ndarray


def linearization_residual(
    traj: Trajectory,
    rho: float = 12.0,
    align: bool = True,
    window: Optional[float] = None,
    align_tol: float = 1e-8,
) -> LinearizationResidual:
    """``E = u_tau - L u - <A x, nu_Sigma>`` along an aligned trajectory.

    With ``align`` every state is aligned by :func:`align_axis`; otherwise
    the states must already be aligned (rotation-mode coefficients of the
    cutoff graph below ``align_tol``).  ``A(tau)`` is the skew part of the
    central difference of the alignment rotations, ``u_tau`` the central
    difference of the aligned graphs.  The max-norms are taken over
    ``|z| <= window`` (default ``rho / 2``, where the cutoff is 1).

    Raises
    ------
    PreconditionError
        If ``align`` is False and some state is misaligned, or the time
        spacing is not uniform.
    """
    states = traj.states
    if len(states) < 3:
        raise PreconditionError("need at least three states")
    tau = traj.times
    dtau = np.diff(tau)
    if np.ptp(dtau) > 1e-9 * max(1.0, abs(dtau.mean())):
        raise PreconditionError("linearization_residual needs uniform time spacing")
    dt = float(dtau.mean())
    graphs, rots = [], []
    for st in states:
        if align:
            al = align_axis(st.payload, rho)
            graphs.append(al.u_aligned)
            rots.append(al.rotation)
        else:
            coef = rotation_coefficients(st.payload, rho)
            if np.max(np.abs(coef)) > align_tol:
                raise PreconditionError("trajectory state is not aligned")
            graphs.append(st.payload)
            rots.append(np.eye(3))
    g0 = graphs[0]
    window = 0.5 * rho if window is None else window
    mask = np.abs(g0.z) <= window
    res, size, gens = [], [], []
    for k in range(1, len(states) - 1):
        dQ = (rots[k + 1] - rots[k - 1]) / (2.0 * dt)
        A = dQ @ rots[k].T
        A = 0.5 * (A - A.T)
        ut = (graphs[k + 1].u - graphs[k - 1].u) / (2.0 * dt)
        E = ut - apply_linear(graphs[k].u, g0.z, g0.zgrid.h) - rotation_normal_component(A, graphs[k])
        e = float(np.max(np.abs(E[:, mask])))
        uk = graphs[k]
        s = float(np.max(np.abs(uk.u[:, mask])) + np.max(graph_gradient_norm(uk)[:, mask]) + np.linalg.norm(A))
        res.append(e)
        size.append(s)
        gens.append(A)
    res, size = np.array(res), np.array(size)
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(size > 0, res / np.where(size > 0, size, 1.0), 0.0)
    return LinearizationResidual(tau[1:-1], res, size, ratio, np.array(gens))


def mode_amplitude(u: CylinderGraph, mode: Mode) -> float:
    """Gaussian projection coefficient of ``u`` on one unnormalized mode."""
    e = mode_values(mode, u.theta, u.z)
    return _weighted(u.u * e, u.zgrid) / _weighted(e * e, u.zgrid)


__all__ = [
    "Alignment",
    "AlignmentError",
    "HermiteFourierBasis",
    "LinearizationResidual",
    "ModeCoefficients",
    "PLUS_MODES",
    "SpectralSplit",
    "ZERO_MODES",
    "align_axis",
    "apply_L",
    "cutoff",
    "cutoff_profile",
    "eigenvalue",
    "hermite",
    "inner_product",
    "linearization_residual",
    "mode_amplitude",
    "mode_norm2",
    "mode_values",
    "norm2",
    "project",
    "rayleigh_quotient",
    "regraph",
    "rotation_coefficients",
    "rotation_normal_component",
    "split",
    "split_components",
    "tilt_rotation",
]
