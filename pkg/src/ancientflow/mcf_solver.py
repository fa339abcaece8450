"""Time stepping for axisymmetric mean curvature flow and the rescaled flow over the cylinder.

Three parametrizations are supported.

Graph form
    ``x3 = f(r, t)`` evolves by ``f_t = f_rr / (1 + f_r^2) + f_r / r`` with
    the tip rule ``f_t(0) = 2 f_rr(0)``.

Radius form
    ``r = r(z, t)`` evolves by ``r_t = r_zz / (1 + r_z^2) - 1/r``.  The solver
    advances the signed square ``s = r^2``, which satisfies

    ``s_t = (4 s s_zz - 2 s_z^2) / (4 s + s_z^2) - 2``.

    The cylinder law ``s_t = -2`` is then reproduced exactly by the scheme,
    and the equation stays regular through a tip where ``r_z`` blows up.

Rescaled form
    ``R = sqrt(2) + u(theta, z, tau)`` moving with normal velocity
    ``-(H - <x, nu>/2)``, i.e. ``u_tau = -H W + (R - z R_z)/2``.  Its
    linearization is ``L u = u_zz + u_thth/2 - z u_z/2 + u``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.linalg import solve_banded

from .errors import DomainError, GraphError, ParameterError
from .geometry_core import (
    SQRT2,
    CylinderGraph,
    GraphProfile,
    RadialProfile,
    curvature_graph,
    curvature_radial,
    cylinder_graph_geometry,
    d1,
    d2,
    gaussian_area,
    theta_derivative,
)

Payload = Union[GraphProfile, RadialProfile, CylinderGraph]

SCHEMES = ("explicit", "semi-implicit")
BOUNDARIES = ("extrapolated", "fixed-value", "reflection")
EXPLICIT_STABILITY = 0.25
GRAPH_SLOPE_LIMIT = 0.5

# nodes with 4 s + s_z^2 below this are treated as dead (no surface)
_DEAD = 1e-14


@dataclass(frozen=True)
class FlowState:
    """Time-stamped surface; for :class:`CylinderGraph` payloads ``t`` is rescaled time."""

    t: float
    payload: Payload

    def __post_init__(self):
        if not isinstance(self.payload, (GraphProfile, RadialProfile, CylinderGraph)):
            raise ParameterError(f"unsupported payload {type(self.payload).__name__}")
        object.__setattr__(self, "t", float(self.t))


@dataclass(frozen=True)
class StepParams:
    """Time-step controls.

    Parameters
    ----------
    dt : float
        Step size.
    scheme : {"semi-implicit", "explicit"}
        The explicit scheme (Heun's RK2) requires ``dt <= 0.25 h^2``.
    boundary : {"extrapolated", "fixed-value", "reflection"}
        Outer boundary treatment.  ``extrapolated`` sets the third difference
        to zero, ``reflection`` imposes even symmetry and ``fixed-value``
        holds the end value at ``boundary_value`` (a number or a function of
        time; by default the value at the start of the step).  The rescaled
        form always freezes its ``z``-ends.
    boundary_value : float or callable, optional
        Data for the ``fixed-value`` boundary (a radius for the radius form).
    """

    dt: float
    scheme: str = "semi-implicit"
    boundary: str = "extrapolated"
    boundary_value: Optional[Union[float, Callable[[float], float]]] = None

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ParameterError("dt must be positive")
        if self.scheme not in SCHEMES:
            raise ParameterError(f"unknown scheme {self.scheme!r}")
        if self.boundary not in BOUNDARIES:
            raise ParameterError(f"unknown boundary {self.boundary!r}")

    def check_explicit(self, h: float):
        if self.scheme == "explicit" and self.dt > EXPLICIT_STABILITY * h * h * (1 + 1e-12):
            raise ParameterError(
                f"explicit scheme needs dt <= {EXPLICIT_STABILITY} h^2 = {EXPLICIT_STABILITY * h * h:.3g}"
            )

    def with_dt(self, dt: float) -> "StepParams":
        return StepParams(dt, self.scheme, self.boundary, self.boundary_value)


@dataclass(frozen=True)
class Trajectory:
    """Time-ordered states with per-state diagnostics.

    ``diagnostics[name][k]`` belongs to ``states[k]``.  ``status`` is
    ``"completed"`` or ``"extinct"``; ``events`` lists ``(node, z, t)``
    extinction events of radius-form runs.
    """

    states: Tuple[FlowState, ...]
    diagnostics: Dict[str, np.ndarray]
    status: str = "completed"
    events: Tuple[Tuple[int, float, float], ...] = ()
    params: Optional[StepParams] = None

    def __post_init__(self):
        t = self.times
        if t.size > 1 and np.any(np.diff(t) <= 0):
            raise ParameterError("trajectory times must be strictly increasing")
        for name, series in self.diagnostics.items():
            if len(series) != len(self.states):
                raise ParameterError(f"diagnostic {name!r} is not aligned with the states")

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.states])

    def __len__(self):
        return len(self.states)


# ---------------------------------------------------------------------------
# banded linear algebra
# ---------------------------------------------------------------------------

_BW = 3  # lower and upper bandwidth of every system assembled here


class _Banded:
    """Diagonal-ordered storage for a ``(3, 3)``-banded matrix."""

    def __init__(self, n: int):
        self.n = n
        self.ab = np.zeros((2 * _BW + 1, n))

    def set(self, i: int, j: int, value: float):
        self.ab[_BW + i - j, j] = value

    def set_row(self, i: int, cols: Sequence[int], values: Sequence[float]):
        for j in range(max(0, i - _BW), min(self.n, i + _BW + 1)):
            self.ab[_BW + i - j, j] = 0.0
        for j, v in zip(cols, values):
            self.set(i, j, v)

    def interior_three_point(self, lower: np.ndarray, diag: np.ndarray, upper: np.ndarray):
        """Rows ``1..n-2`` get ``lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1]``."""
        i = np.arange(1, self.n - 1)
        self.ab[_BW, i] = diag[i]
        self.ab[_BW - 1, i + 1] = upper[i]
        self.ab[_BW + 1, i - 1] = lower[i]

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        return solve_banded((_BW, _BW), self.ab, rhs)


def _boundary_row(A: _Banded, rhs: np.ndarray, end: int, kind: str, value):
    """Install the boundary row at ``end`` (0 or -1) for extrapolation or a fixed value.

    Reflection is handled by the caller because it changes the stencil of
    the end row instead of replacing it.
    """
    n = A.n
    i = 0 if end == 0 else n - 1
    step = 1 if end == 0 else -1
    if kind == "extrapolated":
        A.set_row(i, [i, i + step, i + 2 * step, i + 3 * step], [1.0, -3.0, 3.0, -1.0])
        rhs[i] = 0.0
    elif kind == "fixed-value":
        A.set_row(i, [i], [1.0])
        rhs[i] = value
    else:
        raise ParameterError(f"boundary {kind!r} has no replacement row")


def _boundary_value(p: StepParams, current: float, t_new: float) -> float:
    bv = p.boundary_value
    if bv is None:
        return current
    if callable(bv):
        return float(bv(t_new))
    return float(bv)


# ---------------------------------------------------------------------------
# graph form
# ---------------------------------------------------------------------------


def graph_speed(g: GraphProfile) -> np.ndarray:
    """``f_rr / (1 + f_r^2) + f_r / r`` with the tip value ``2 f_rr(0)``."""
    h = g.grid.h
    f = g.f
    fr = d1(f, h)
    frr = d2(f, h)
    fr[0] = 0.0
    frr[0] = 2.0 * (f[1] - f[0]) / h**2
    r = g.rr
    out = np.empty_like(f)
    out[0] = 2.0 * frr[0]
    out[1:] = frr[1:] / (1.0 + fr[1:] ** 2) + fr[1:] / r[1:]
    return out


def _graph_far_end(f_new: np.ndarray, f_old: np.ndarray, p: StepParams, t_new: float):
    if p.boundary == "extrapolated":
        f_new[-1] = 3.0 * f_new[-2] - 3.0 * f_new[-3] + f_new[-4]
    elif p.boundary == "fixed-value":
        f_new[-1] = _boundary_value(p, f_old[-1], t_new)
    else:
        raise ParameterError("the graph form has its symmetric end at r = 0; use extrapolated or fixed-value")
    return f_new


def step_graph(s: FlowState, p: StepParams) -> FlowState:
    """One step of the graph flow ``f_t = f_rr/(1+f_r^2) + f_r/r``.

    The semi-implicit scheme solves
    ``f^{n+1} - dt (a f_rr^{n+1} + f_r^{n+1} / r) = f^n`` with the frozen
    factor ``a = 1/(1 + (f_r^n)^2)``; the tip row is ``f_t(0) = 4 (f_1 - f_0)/h^2``
    from the even extension.  For a translator the discrete operator
    annihilates constants, so one step adds ``c dt`` up to the
    discretization error of the soliton equation.
    """
    g = s.payload
    if not isinstance(g, GraphProfile):
        raise ParameterError("step_graph needs a GraphProfile state")
    h = g.grid.h
    p.check_explicit(h)
    t_new = s.t + p.dt
    f = g.f
    if p.scheme == "explicit":

        def stage(fv):
            return graph_speed(GraphProfile(g.grid, fv))

        k1 = stage(f)
        f1 = _graph_far_end(f + p.dt * k1, f, p, t_new)
        k2 = stage(f1)
        f_new = _graph_far_end(f + 0.5 * p.dt * (k1 + k2), f, p, t_new)
        return FlowState(t_new, GraphProfile(g.grid, f_new))
    n = g.grid.n
    fr = d1(f, h)
    a = 1.0 / (1.0 + fr**2)
    r = g.rr
    inv_r = np.zeros(n)
    inv_r[1:] = 1.0 / r[1:]
    dt = p.dt
    A = _Banded(n)
    lower = -dt * (a / h**2 - inv_r / (2 * h))
    upper = -dt * (a / h**2 + inv_r / (2 * h))
    A.interior_three_point(lower, 1.0 + 2.0 * dt * a / h**2, upper)
    A.set_row(0, [0, 1], [1.0 + 4.0 * dt / h**2, -4.0 * dt / h**2])
    rhs = f.copy()
    if p.boundary == "reflection":
        raise ParameterError("the graph form has its symmetric end at r = 0; use extrapolated or fixed-value")
    _boundary_row(A, rhs, -1, p.boundary, _boundary_value(p, f[-1], t_new))
    f_new = A.solve(rhs)
    return FlowState(t_new, GraphProfile(g.grid, f_new))


# ---------------------------------------------------------------------------
# radius form (signed square)
# ---------------------------------------------------------------------------


def _alive(sq: np.ndarray, q: np.ndarray) -> np.ndarray:
    return (sq > 0.0) & (4.0 * sq + q > _DEAD)


def _sq_derivatives(sq: np.ndarray, h: float, boundary: str):
    sz = d1(sq, h)
    szz = d2(sq, h)
    if boundary == "reflection":
        sz[[0, -1]] = 0.0
        szz[0] = 2.0 * (sq[1] - sq[0]) / h**2
        szz[-1] = 2.0 * (sq[-2] - sq[-1]) / h**2
    return sz, szz


def radius_speed_sq(p: RadialProfile, boundary: str = "extrapolated") -> np.ndarray:
    """``s_t`` of the signed square ``s = r^2``; zero at dead nodes."""
    sq = p.sq
    sz, szz = _sq_derivatives(sq, p.grid.h, boundary)
    q = sz**2
    alive = _alive(sq, q)
    out = np.zeros_like(sq)
    den = 4.0 * sq[alive] + q[alive]
    out[alive] = (4.0 * sq[alive] * szz[alive] - 2.0 * q[alive]) / den - 2.0
    return out


def _radius_ends(s_new: np.ndarray, s_old: np.ndarray, p: StepParams, t_new: float, alive: np.ndarray):
    for end in (0, -1):
        if not alive[end]:
            s_new[end] = s_old[end]
            continue
        step = 1 if end == 0 else -1
        if p.boundary == "extrapolated":
            s_new[end] = 3.0 * s_new[end + step] - 3.0 * s_new[end + 2 * step] + s_new[end + 3 * step]
        elif p.boundary == "fixed-value":
            bv = _boundary_value(p, np.sqrt(max(s_old[end], 0.0)), t_new)
            s_new[end] = bv * abs(bv)
    return s_new


def _radius_step_semi_implicit(sq: np.ndarray, h: float, p: StepParams, t_new: float) -> np.ndarray:
    n = sq.size
    dt = p.dt
    sz, _ = _sq_derivatives(sq, h, p.boundary)
    q = sz**2
    alive = _alive(sq, q)
    alpha = np.zeros(n)
    explicit = np.zeros(n)
    den = 4.0 * sq[alive] + q[alive]
    alpha[alive] = 4.0 * sq[alive] / den
    explicit[alive] = -2.0 * q[alive] / den - 2.0
    c = dt * alpha / h**2
    A = _Banded(n)
    diag = np.where(alive, 1.0 + 2.0 * c, 1.0)
    A.interior_three_point(np.where(alive, -c, 0.0), diag, np.where(alive, -c, 0.0))
    rhs = sq + dt * explicit
    for end in (0, -1):
        i = 0 if end == 0 else n - 1
        step = 1 if end == 0 else -1
        if not alive[i]:
            A.set_row(i, [i], [1.0])
            rhs[i] = sq[i]
        elif p.boundary == "reflection":
            A.set_row(i, [i, i + step], [1.0 + 2.0 * c[i], -2.0 * c[i]])
        elif p.boundary == "fixed-value":
            bv = _boundary_value(p, np.sqrt(max(sq[i], 0.0)), t_new)
            A.set_row(i, [i], [1.0])
            rhs[i] = bv * abs(bv)
        else:
            _boundary_row(A, rhs, end, "extrapolated", None)
    return A.solve(rhs)


def step_radius_with_events(s: FlowState, p: StepParams):
    """:func:`step_radius` returning also the extinction events of the step.

    An event ``(node, z, t*)`` is reported for every node whose signed square
    changes sign during the step; ``t*`` interpolates linearly within the
    step.  Dead nodes are held at their last value.
    """
    prof = s.payload
    if not isinstance(prof, RadialProfile):
        raise ParameterError("step_radius needs a RadialProfile state")
    h = prof.grid.h
    p.check_explicit(h)
    sq = prof.sq
    t_new = s.t + p.dt
    q0 = d1(sq, h) ** 2
    alive0 = _alive(sq, q0)
    if p.scheme == "explicit":
        k1 = radius_speed_sq(prof, p.boundary)
        s1 = _radius_ends(sq + p.dt * k1, sq, p, t_new, alive0)
        k2 = radius_speed_sq(RadialProfile(prof.grid, r2=s1), p.boundary)
        s_new = _radius_ends(sq + 0.5 * p.dt * (k1 + k2), sq, p, t_new, alive0)
    else:
        s_new = _radius_step_semi_implicit(sq, h, p, t_new)
    s_new = np.where(alive0, s_new, sq)
    crossed = alive0 & (s_new <= 0.0)
    events = []
    z = prof.z
    for i in np.flatnonzero(crossed):
        frac = sq[i] / (sq[i] - s_new[i]) if sq[i] != s_new[i] else 1.0
        events.append((int(i), float(z[i]), float(s.t + frac * p.dt)))
    return FlowState(t_new, RadialProfile(prof.grid, r2=s_new)), events


def step_radius(s: FlowState, p: StepParams) -> FlowState:
    """One step of ``r_t = r_zz/(1 + r_z^2) - 1/r`` in the signed-square form.

    The semi-implicit scheme solves
    ``s^{n+1} - dt a s_zz^{n+1} = s^n - dt (2 q / (4 s + q) + 2)`` with the
    frozen factors ``a = 4 s / (4 s + q)`` and ``q = (s_z^n)^2``.  The
    cylinder ``s = -2 t`` is reproduced to rounding error.  Nodes whose
    radius has reached zero are frozen; see :func:`step_radius_with_events`.
    """
    return step_radius_with_events(s, p)[0]


# ---------------------------------------------------------------------------
# rescaled flow over the cylinder
# ---------------------------------------------------------------------------


def graph_gradient_norm(g: CylinderGraph) -> np.ndarray:
    """``sqrt(u_z^2 + (u_theta / R)^2)`` per node."""
    R = SQRT2 + g.u
    return np.sqrt(d1(g.u, g.zgrid.h, axis=1) ** 2 + (theta_derivative(g.u, 1) / R) ** 2)


def check_graph(g: CylinderGraph, limit: float = GRAPH_SLOPE_LIMIT):
    """Raise :class:`GraphError` unless ``sqrt(2) + u > 0`` and ``|grad u| <= limit``."""
    if np.any(SQRT2 + g.u <= 0):
        raise GraphError("radius sqrt(2) + u is not positive")
    grad = float(np.max(graph_gradient_norm(g)))
    if not grad <= limit:
        raise GraphError(f"graph slope {grad:.3g} exceeds {limit}")


def rescaled_speed(g: CylinderGraph) -> np.ndarray:
    """``u_tau = -H W + (R - z R_z) / 2`` at every node."""
    geo = cylinder_graph_geometry(g)
    return -geo.H * geo.W + 0.5 * geo.x_dot_nu * geo.W


def apply_linear(u: np.ndarray, z: np.ndarray, h: float) -> np.ndarray:
    """``L u = u_zz + u_thth/2 - z u_z/2 + u`` with the schemes of the flow."""
    return d2(u, h, axis=1) + 0.5 * theta_derivative(u, 2) - 0.5 * z[None, :] * d1(u, h, axis=1) + u


def _mode_operator(z: np.ndarray, h: float, m: int, dt: float) -> _Banded:
    n = z.size
    A = _Banded(n)
    c2 = dt / h**2
    c1 = dt * 0.5 * z / (2 * h)
    diag = np.full(n, 1.0 + 2.0 * c2 + dt * (0.5 * m * m - 1.0))
    lower = np.full(n, -c2) - c1
    upper = np.full(n, -c2) + c1
    A.interior_three_point(lower, diag, upper)
    A.set_row(0, [0], [1.0])
    A.set_row(n - 1, [n - 1], [1.0])
    return A


_MODE_CACHE: Dict[tuple, List[_Banded]] = {}


def _mode_operators(g: CylinderGraph, dt: float) -> List[_Banded]:
    key = (g.ntheta, g.zgrid.lo, g.zgrid.hi, g.zgrid.n, float(dt))
    ops = _MODE_CACHE.get(key)
    if ops is None:
        if len(_MODE_CACHE) > 32:
            _MODE_CACHE.clear()
        ops = [_mode_operator(g.z, g.zgrid.h, m, dt) for m in range(g.ntheta // 2 + 1)]
        _MODE_CACHE[key] = ops
    return ops


def step_rescaled(s: FlowState, p: StepParams) -> FlowState:
    """One step of the rescaled flow ``u_tau = -H W + (R - z R_z)/2``.

    The semi-implicit scheme is IMEX: the linearization ``L`` is implicit,
    mode by mode in ``theta`` (a banded solve in ``z`` per Fourier mode), and
    the nonlinear remainder ``N(u) - L u`` explicit.  The ``z``-ends keep
    their initial values.  The graph condition ``|grad u| <= 0.5`` is checked
    before and after the step.

    Raises
    ------
    GraphError
        If the graph condition fails.
    """
    g = s.payload
    if not isinstance(g, CylinderGraph):
        raise ParameterError("step_rescaled needs a CylinderGraph state")
    check_graph(g)
    h = g.zgrid.h
    p.check_explicit(h)
    u = g.u
    dt = p.dt
    if p.scheme == "explicit":
        k1 = rescaled_speed(g)
        k1[:, [0, -1]] = 0.0
        u1 = u + dt * k1
        k2 = rescaled_speed(g.with_values(u1))
        k2[:, [0, -1]] = 0.0
        u_new = u + 0.5 * dt * (k1 + k2)
    else:
        remainder = rescaled_speed(g) - apply_linear(u, g.z, h)
        rhs = u + dt * remainder
        rhs[:, [0, -1]] = u[:, [0, -1]]
        rhs_hat = np.fft.rfft(rhs, axis=0)
        out = np.empty_like(rhs_hat)
        for m, A in enumerate(_mode_operators(g, dt)):
            out[m] = A.solve(rhs_hat[m])
        u_new = np.fft.irfft(out, n=g.ntheta, axis=0)
        u_new[:, [0, -1]] = u[:, [0, -1]]
    new = g.with_values(u_new)
    check_graph(new)
    return FlowState(s.t + dt, new)


# ---------------------------------------------------------------------------
# evolution driver and diagnostics
# ---------------------------------------------------------------------------


def _h_max(payload: Payload) -> float:
    if isinstance(payload, GraphProfile):
        return float(np.nanmax(curvature_graph(payload).H))
    if isinstance(payload, RadialProfile):
        r = payload.r
        alive = r > 0
        if not np.any(alive):
            return float("nan")
        # curvature at live nodes only; dead stretches are replaced by a tiny positive radius
        with np.errstate(all="ignore"):
            H = curvature_radial(RadialProfile(payload.grid, np.where(alive, r, 1e-300))).H
        H = np.where(alive, H, np.nan)
        return float(np.nanmax(H)) if np.any(np.isfinite(H)) else float("nan")
    geo = cylinder_graph_geometry(payload)
    return float(np.max(geo.H))


def _probe_value(name: str, payload: Payload) -> float:
    if name == "H_max":
        return _h_max(payload)
    if name == "gaussian_area":
        import warnings

        from .errors import TruncationWarning

        with warnings.catch_warnings():
            warnings.simplefilter("ignore", TruncationWarning)
            return gaussian_area(payload)
    if name in ("U_plus", "U_zero", "U_minus"):
        if not isinstance(payload, CylinderGraph):
            raise ParameterError(f"probe {name} needs a cylinder graph")
        from .spectral import split

        sp = split(payload)
        return float(getattr(sp, name))
    if name == "min_radius":
        if isinstance(payload, RadialProfile):
            r = payload.r
            return float(np.min(r[r > 0])) if np.any(r > 0) else 0.0
        if isinstance(payload, CylinderGraph):
            return float(np.min(SQRT2 + payload.u))
        raise ParameterError("min_radius needs a radial profile or cylinder graph")
    if name == "tip_height":
        if isinstance(payload, GraphProfile):
            return float(payload.f[0])
        raise ParameterError("tip_height needs a graph profile")
    if name == "max_abs_u":
        if isinstance(payload, CylinderGraph):
            return float(np.max(np.abs(payload.u)))
        raise ParameterError("max_abs_u needs a cylinder graph")
    raise ParameterError(f"unknown probe {name!r}")


PROBES = ("H_max", "gaussian_area", "U_plus", "U_zero", "U_minus", "min_radius", "tip_height", "max_abs_u")


def evolve(
    s: FlowState,
    p: StepParams,
    t_end: float,
    probes: Iterable[str] = ("H_max",),
    keep_every: int = 1,
) -> Trajectory:
    """Step from ``s.t`` to ``t_end`` recording ``probes`` after every accepted step.

    The step is shrunk to ``(t_end - s.t) / ceil((t_end - s.t) / dt)`` so the
    final time is hit exactly.  Radius-form runs stop early with status
    ``"extinct"`` once every node has reached zero radius.

    Parameters
    ----------
    keep_every : int
        Keep every ``keep_every``-th state (the first and last are always kept);
        diagnostics follow the kept states.
    """
    if not t_end > s.t:
        raise ParameterError("t_end must exceed the start time")
    probes = list(probes)
    for name in probes:
        if name not in PROBES:
            raise ParameterError(f"unknown probe {name!r}")
    span = t_end - s.t
    nsteps = int(math.ceil(span / p.dt - 1e-9))
    dt = span / nsteps
    q = p.with_dt(dt)
    payload = s.payload
    if isinstance(payload, GraphProfile):
        stepper = step_graph
    elif isinstance(payload, RadialProfile):
        stepper = None
    else:
        stepper = step_rescaled
    states = [s]
    diags = {name: [_probe_value(name, payload)] for name in probes}
    events: List[Tuple[int, float, float]] = []
    status = "completed"
    cur = s
    for k in range(1, nsteps + 1):
        if stepper is None:
            cur, ev = step_radius_with_events(cur, q)
            events.extend(ev)
        else:
            cur = stepper(cur, q)
        cur = FlowState(s.t + k * dt, cur.payload)
        extinct = stepper is None and not np.any(cur.payload.sq > 0)
        if k % keep_every == 0 or k == nsteps or extinct:
            states.append(cur)
            for name in probes:
                diags[name].append(_probe_value(name, cur.payload))
        if extinct:
            status = "extinct"
            break
    return Trajectory(
        tuple(states),
        {k: np.asarray(v, dtype=float) for k, v in diags.items()},
        status,
        tuple(events),
        q,
    )


@dataclass(frozen=True)
class ExtinctionProfile:
    """Per-node extinction times ``T(z)``; ``+inf`` at nodes that never vanish."""

    z: np.ndarray
    T: np.ndarray

    def __call__(self, zq):
        zq = np.asarray(zq, dtype=float)
        finite = np.isfinite(self.T)
        out = np.interp(zq, self.z, np.where(finite, self.T, 0.0))
        nearest = np.abs(zq[..., None] - self.z).argmin(axis=-1)
        return np.where(finite[nearest], out, np.inf)


def extinction_profile(traj: Trajectory) -> ExtinctionProfile:
    """Extinction time per node by quadratic extrapolation of ``r^2`` in ``t``.

    For a node that vanishes, the quadratic through its last three positive
    samples of ``r^2`` is continued to its first root after the last sample.
    Fewer than three samples fall back to a linear fit.  Nodes still alive at
    the end of the trajectory get ``+inf``.
    """
    if not traj.states or not isinstance(traj.states[0].payload, RadialProfile):
        raise ParameterError("extinction_profile needs a radius-form trajectory")
    t = traj.times
    S = np.array([st.payload.sq for st in traj.states])
    z = traj.states[0].payload.z
    T = np.full(z.size, np.inf)
    for i in range(z.size):
        dead = np.flatnonzero(S[:, i] <= 0.0)
        if dead.size == 0:
            continue
        k = dead[0]
        if k == 0:
            T[i] = t[0]
            continue
        ks = np.arange(max(0, k - 3), k)
        tt, ss = t[ks], S[ks, i]
        if ks.size >= 3:
            coef = np.polyfit(tt - tt[-1], ss, 2)
        else:
            coef = np.array([0.0, *np.polyfit(tt - tt[-1], ss, 1)]) if ks.size == 2 else None
        if coef is None:
            T[i] = t[k]
            continue
        roots = np.roots(coef if abs(coef[0]) > 0 else coef[1:])
        roots = roots[np.isreal(roots)].real
        roots = roots[roots >= -1e-12]
        T[i] = tt[-1] + (roots.min() if roots.size else (t[k] - tt[-1]))
    return ExtinctionProfile(z, T)


__all__ = [
    "BOUNDARIES",
    "ExtinctionProfile",
    "FlowState",
    "PROBES",
    "SCHEMES",
    "StepParams",
    "Trajectory",
    "apply_linear",
    "check_graph",
    "evolve",
    "extinction_profile",
    "graph_gradient_norm",
    "graph_speed",
    "radius_speed_sq",
    "rescaled_speed",
    "step_graph",
    "step_radius",
    "step_radius_with_events",
    "step_rescaled",
]
