"""Mode dynamics, Harnack-type monotone quantities and barrier functions.

The first half simulates the three-component system

``U_+' = U_+ + a_+ eps S``,  ``U_0' = a_0 eps S``,  ``U_-' = -U_- + a_- eps S``

with ``S = U_+ + U_0 + U_-`` and coefficients ``a_i`` sampled uniformly in
``[-1, 1]`` at every step, and classifies trajectories by which component
dominates.  The second half holds checks on rotationally symmetric solutions:
finite-difference Harnack quantities, the quantity ``r r_z``, the decay of
``r_zz`` and the heat-equation barrier

``psi(z, t) = (4 pi t)^{-1/2} int_0^inf (exp(-(z-y)^2/4t) - exp(-(z+y)^2/4t)) dy``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.integrate import quad
from scipy.special import erf

from .errors import DomainError, ParameterError, PreconditionError, SolverError
from .geometry_core import GraphProfile, RadialProfile, d1, d2
from .mcf_solver import Trajectory

# ---------------------------------------------------------------------------
# Merle-Zaag system
# ---------------------------------------------------------------------------

OVERFLOW = 1e300
CLASS_THRESHOLD = 1e-3
_RATES = np.array([1.0, 0.0, -1.0])


class MZState(NamedTuple):
    """Squared norms of the unstable, neutral and stable parts at rescaled time ``tau``."""

    tau: float
    U_plus: float
    U_zero: float
    U_minus: float

    def as_array(self) -> np.ndarray:
        return np.array([self.U_plus, self.U_zero, self.U_minus])


@dataclass(frozen=True)
class MZParams:
    """Coupling ``eps(tau)`` and the seed of the coefficient sampler.

    ``coupling`` is a function of ``tau`` or a number ``c`` meaning
    ``eps(tau) = c exp(tau / 1000)``.
    """

    coupling: Union[float, Callable[[float], float]] = 0.1
    seed: int = 0

    def eps(self, tau):
        if callable(self.coupling):
            return self.coupling(tau)
        return float(self.coupling) * np.exp(np.asarray(tau) / 1000.0)


@dataclass(frozen=True)
class MZRun:
    """Sampled trajectory of the mode system."""

    tau: np.ndarray
    U: np.ndarray  # shape (nsamples, 3)
    status: str
    seed: int

    def __len__(self):
        return self.tau.size

    def __getitem__(self, k) -> MZState:
        return MZState(float(self.tau[k]), *map(float, self.U[k]))

    @property
    def states(self) -> List[MZState]:
        return [self[k] for k in range(len(self))]


def _mz_integrate(eps_fn, U0: np.ndarray, tau0: float, nsteps: int, dt: float, coeffs: np.ndarray, record: int):
    """Vectorized RK4 over runs; ``U0`` and every ``coeffs[k]`` have shape ``(runs, 3)``."""
    U = U0.copy()
    out = [U.copy()]
    taus = [tau0]
    alive = np.ones(U.shape[0], dtype=bool)
    for k in range(nsteps):
        tau = tau0 + k * dt
        a = coeffs[:, k, :]

        def F(t, V):
            S = V.sum(axis=1, keepdims=True)
            return _RATES * V + a * eps_fn(t) * S

        k1 = F(tau, U)
        k2 = F(tau + 0.5 * dt, U + 0.5 * dt * k1)
        k3 = F(tau + 0.5 * dt, U + 0.5 * dt * k2)
        k4 = F(tau + dt, U + dt * k3)
        new = np.maximum(U + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4), 0.0)
        U = np.where(alive[:, None], new, U)
        alive &= np.all(np.isfinite(U), axis=1) & (U.max(axis=1) <= OVERFLOW)
        if (k + 1) % record == 0 or k == nsteps - 1:
            out.append(U.copy())
            taus.append(tau0 + (k + 1) * dt)
        if not alive.any():
            break
    return np.array(taus), np.array(out), alive


def _coefficients(seed: int, nsteps: int) -> np.ndarray:
    return np.random.default_rng(seed).uniform(-1.0, 1.0, size=(nsteps, 3))


def mz_simulate(p: MZParams, init: MZState, tau_end: float, dt: float = 0.01, record: int = 1) -> MZRun:
    """RK4 trajectory of the mode system from ``init`` to ``tau_end``.

    Coefficients are drawn once per step (held over the RK4 stages) from a
    generator seeded with ``p.seed``; components are clipped at zero after
    every step.  The run stops early with status ``"overflow"`` when a
    component exceeds ``1e300``.

    Parameters
    ----------
    record : int
        Keep every ``record``-th step.
    """
    if not (0 < dt <= 0.01 + 1e-15):
        raise ParameterError("mode system needs 0 < dt <= 0.01")
    if not tau_end > init.tau:
        raise ParameterError("tau_end must exceed the initial time")
    U0 = init.as_array()
    if np.any(U0 < 0):
        raise ParameterError("mode energies must be nonnegative")
    nsteps = int(math.ceil((tau_end - init.tau) / dt - 1e-9))
    coeffs = _coefficients(p.seed, nsteps)[None]
    taus, U, alive = _mz_integrate(p.eps, U0[None], init.tau, nsteps, dt, coeffs, record)
    status = "completed" if alive[0] else "overflow"
    return MZRun(taus, U[:, 0, :], status, p.seed)


def mz_ensemble(
    coupling: Union[float, Callable[[float], float]],
    runs: int,
    span: float,
    seed: int,
    tau0: float = -100.0,
    dt: float = 0.01,
    record: int = 10,
) -> List[MZRun]:
    """``runs`` independent trajectories with per-run seeds spawned from ``seed``.

    Initial energies are uniform in ``(0, 1)``.  Each run reproduces
    :func:`mz_simulate` with its own seed; the integration is vectorized
    across runs.
    """
    seeds = [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(runs)]
    init_rng = np.random.default_rng(seed)
    U0 = init_rng.uniform(0.0, 1.0, size=(runs, 3))
    nsteps = int(math.ceil(span / dt - 1e-9))
    coeffs = np.stack([_coefficients(s, nsteps) for s in seeds])
    p = MZParams(coupling)
    taus, U, alive = _mz_integrate(p.eps, U0, tau0, nsteps, dt, coeffs, record)
    return [MZRun(taus, U[:, i, :], "completed" if alive[i] else "overflow", seeds[i]) for i in range(runs)]


@dataclass(frozen=True)
class MZClassification:
    """Dominance class and the fitted log-ratio slopes on the final third."""

    label: str
    plus_ratio: float
    zero_ratio: float
    plus_slope: float
    zero_slope: float


def _loglinear_fit(tau, ratio):
    r = np.log(np.maximum(ratio, 1e-300))
    slope = np.polyfit(tau, r, 1)[0]
    return float(slope)


def mz_classify(traj: Union[MZRun, Sequence[MZState]], threshold: float = CLASS_THRESHOLD) -> MZClassification:
    """Classify as ``plus_dominant``, ``zero_dominant`` or ``undecided``.

    On the final third the ratios ``(U_0 + U_-)/U_+`` and
    ``(U_+ + U_-)/U_0`` are fitted by a line in ``log``; a class is assigned
    when the final ratio is below ``threshold`` and the fitted slope is
    negative.
    """
    if isinstance(traj, MZRun):
        tau, U = traj.tau, traj.U
    else:
        tau = np.array([s.tau for s in traj])
        U = np.array([[s.U_plus, s.U_zero, s.U_minus] for s in traj])
    if tau.size < 100:
        raise PreconditionError("classification needs at least 100 samples")
    k0 = 2 * tau.size // 3
    t, V = tau[k0:], U[k0:]
    with np.errstate(divide="ignore", invalid="ignore"):
        rp = (V[:, 1] + V[:, 2]) / V[:, 0]
        rz = (V[:, 0] + V[:, 2]) / V[:, 1]
    rp = np.where(np.isfinite(rp), rp, np.inf)
    rz = np.where(np.isfinite(rz), rz, np.inf)
    sp = _loglinear_fit(t, rp) if np.all(np.isfinite(rp)) else float("nan")
    sz = _loglinear_fit(t, rz) if np.all(np.isfinite(rz)) else float("nan")
    label = "undecided"
    if rp[-1] < threshold and sp < 0:
        label = "plus_dominant"
    elif rz[-1] < threshold and sz < 0:
        label = "zero_dominant"
    return MZClassification(label, float(rp[-1]), float(rz[-1]), sp, sz)


# ---------------------------------------------------------------------------
# heat-equation barrier
# ---------------------------------------------------------------------------


def _check_psi_domain(z, t):
    z = np.asarray(z, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(z <= 0) or np.any(t <= 0):
        raise DomainError("psi is defined for z > 0 and t > 0")
    return z, t


def psi_integral(z: float, t: float) -> float:
    """``psi`` by adaptive quadrature of its defining integral.

    The integrand is split at ``y = z`` where the first Gaussian peaks; both
    pieces use ``scipy.integrate.quad``.
    """
    _check_psi_domain(z, t)
    z, t = float(z), float(t)
    norm = 1.0 / math.sqrt(4.0 * math.pi * t)

    def integrand(y):
        return math.exp(-((z - y) ** 2) / (4.0 * t)) - math.exp(-((z + y) ** 2) / (4.0 * t))

    width = math.sqrt(t)
    a, _ = quad(integrand, 0.0, z, epsabs=1e-14, epsrel=1e-13, limit=200)
    b, _ = quad(integrand, z, z + 40.0 * width, epsabs=1e-14, epsrel=1e-13, limit=200)
    c, _ = quad(integrand, z + 40.0 * width, np.inf, epsabs=1e-15, limit=200)
    return norm * (a + b + c)


def psi_closed_form(z, t):
    """``erf(z / (2 sqrt(t)))``.

    Substituting ``w = (y - z)/(2 sqrt t)`` and ``w = (y + z)/(2 sqrt t)``
    turns the two Gaussians into ``(1 + erf(z / 2 sqrt t))/2`` and
    ``(1 - erf(z / 2 sqrt t))/2``.
    """
    z, t = _check_psi_domain(z, t)
    return erf(z / (2.0 * np.sqrt(t)))


_PSI_VALIDATION: Dict[str, float] = {}


def validate_psi(nz: int = 20, nt: int = 20, zlim=(1e-2, 50.0), tlim=(1e-2, 100.0)) -> float:
    """Max deviation of :func:`psi_closed_form` from :func:`psi_integral` on a log grid."""
    zs = np.geomspace(*zlim, nz)
    ts = np.geomspace(*tlim, nt)
    err = 0.0
    for z in zs:
        for t in ts:
            err = max(err, abs(psi_closed_form(z, t) - psi_integral(z, t)))
    return float(err)


def psi(z, t, tol: float = 1e-10):
    """The barrier ``psi(z, t)``.

    Evaluated by the closed form :func:`psi_closed_form`, which is checked
    once per process against the defining integral on a 20 x 20 log grid.

    Raises
    ------
    DomainError
        For ``z <= 0`` or ``t <= 0``.
    SolverError
        If the closed form disagrees with the quadrature by more than ``tol``.
    """
    if "error" not in _PSI_VALIDATION:
        _PSI_VALIDATION["error"] = validate_psi()
    if _PSI_VALIDATION["error"] > tol:
        raise SolverError(f"closed form of psi failed validation ({_PSI_VALIDATION['error']:.3g})")
    return psi_closed_form(z, t)


def psi_zz(z, t):
    """``psi_zz = -z / (2 t sqrt(pi t)) exp(-z^2 / 4t)``, negative for ``z, t > 0``."""
    z, t = _check_psi_domain(z, t)
    return -z / (2.0 * t * np.sqrt(math.pi * t)) * np.exp(-z * z / (4.0 * t))


def psi_t(z, t):
    """``psi_t``; equal to :func:`psi_zz` since ``psi`` solves the heat equation."""
    z, t = _check_psi_domain(z, t)
    return -z / (2.0 * t * np.sqrt(math.pi * t)) * np.exp(-z * z / (4.0 * t))


# ---------------------------------------------------------------------------
# Harnack checks on graph trajectories
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HarnackReport:
    """Finite-difference Harnack quantities of a graph trajectory.

    ``H_ref`` is the tip speed averaged over the last quarter of the run.
    ``*_min`` / ``*_max`` are extrema over interior times and all nodes;
    ``worst`` maps each quantity to the ``(t, r)`` of its minimum.
    ``f_t_tip`` is the tip speed at interior times.
    """

    H_ref: float
    f_t_min: float
    f_t_max: float
    f_tt_min: float
    f_tt_max: float
    f_tr_min: float
    f_tr_max: float
    f_t_tip: np.ndarray
    times: np.ndarray
    worst: Dict[str, Tuple[float, float]]

    @property
    def lower_bound_margin(self) -> float:
        """``min (f_t - H_ref)``; nonnegative when ``f_t >= H`` holds."""
        return self.f_t_min - self.H_ref


def harnack_checks(traj: Trajectory, r_max: Optional[float] = None) -> HarnackReport:
    """``f_t``, ``f_tt`` and ``f_tr`` of a graph trajectory by finite differences.

    Time derivatives are central differences at interior states, ``f_tr``
    the spatial difference of ``f_t``.  ``r_max`` restricts the nodes used.

    Raises
    ------
    PreconditionError
        For fewer than three states, non-graph payloads or nonuniform times.
    """
    states = traj.states
    if len(states) < 3:
        raise PreconditionError("harnack_checks needs at least three states")
    if not all(isinstance(s.payload, GraphProfile) for s in states):
        raise PreconditionError("harnack_checks needs a graph-form trajectory")
    t = traj.times
    dts = np.diff(t)
    if np.ptp(dts) > 1e-9 * max(1.0, abs(dts.mean())):
        raise PreconditionError("harnack_checks needs uniform time spacing")
    dt = float(dts.mean())
    F = np.array([s.payload.f for s in states])
    r = states[0].payload.rr
    h = states[0].payload.grid.h
    keep = np.ones(r.size, dtype=bool) if r_max is None else r <= r_max
    ft = (F[2:] - F[:-2]) / (2.0 * dt)
    ftt = (F[2:] - 2.0 * F[1:-1] + F[:-2]) / dt**2
    ftr = d1(ft, h, axis=1)
    tips = ft[:, 0]
    q = max(1, tips.size // 4)
    H_ref = float(np.mean(tips[-q:]))
    ti = t[1:-1]

    def ext(a):
        sub = a[:, keep]
        k = np.unravel_index(np.argmin(sub), sub.shape)
        return float(sub.min()), float(sub.max()), (float(ti[k[0]]), float(r[keep][k[1]]))

    ft_min, ft_max, w_ft = ext(ft)
    ftt_min, ftt_max, w_ftt = ext(ftt)
    ftr_min, ftr_max, w_ftr = ext(ftr)
    return HarnackReport(
        H_ref,
        ft_min,
        ft_max,
        ftt_min,
        ftt_max,
        ftr_min,
        ftr_max,
        tips,
        ti,
        {"f_t": w_ft, "f_tt": w_ftt, "f_tr": w_ftr},
    )


# ---------------------------------------------------------------------------
# r r_z and r_zz on radial profiles
# ---------------------------------------------------------------------------

EPS0 = 1.0 / 20.0


@dataclass(frozen=True)
class RrzReport:
    """``r r_z`` along a profile, its neck maximum and extrapolated limit."""

    z: np.ndarray
    rrz: np.ndarray
    neck: np.ndarray
    neck_max: float
    neck_bound: float
    limit: float
    status: str

    @property
    def bound_holds(self) -> bool:
        return bool(self.status == "ok" and self.neck_max <= self.neck_bound)


def rrz_profile(
    p: RadialProfile,
    H_ref: float = 1.0,
    eps0: float = EPS0,
    window: Optional[Tuple[float, float]] = None,
) -> RrzReport:
    """Series ``r r_z``, its max on the neck region ``{0 <= r_z <= eps0}`` and its limit.

    The limit is the two-point Richardson extrapolation in ``1/z``,
    ``(z2 g2 - z1 g1)/(z2 - z1)``, from the values at the nodes closest to
    the radii ``window = (r1, r2)`` (default: half the largest radius and
    the largest interior radius).  ``status`` is ``"no-neck"`` when no
    interior node satisfies ``r_z <= eps0``.
    """
    z, r = p.z, p.r
    rz = d1(r, p.grid.h)
    g = r * rz
    interior = np.zeros(z.size, dtype=bool)
    interior[1:-1] = r[1:-1] > 0
    neck = interior & (rz >= -eps0) & (rz <= eps0)
    bound = (1.0 + 2.0 * eps0) / H_ref
    status = "ok" if neck.any() else "no-neck"
    neck_max = float(np.max(g[neck])) if neck.any() else float("nan")
    idx = np.flatnonzero(interior)
    if window is None:
        r_hi = r[idx[-1]]
        window = (0.5 * r_hi, r_hi)
    i1 = idx[np.argmin(np.abs(r[idx] - window[0]))]
    i2 = idx[np.argmin(np.abs(r[idx] - window[1]))]
    # distances are measured from the tip when the profile starts at one
    zs = z - z[0] if p.r[0] <= 0 else z
    z1, z2 = zs[i1], zs[i2]
    limit = float((z2 * g[i2] - z1 * g[i1]) / (z2 - z1)) if z2 != z1 else float(g[i2])
    return RrzReport(z, g, neck, neck_max, bound, limit, status)


class RzzDecay(NamedTuple):
    """Empirical constants: ``C2 = sup r^{5/2} (-r_zz)`` over ``r >= C1``."""

    C1: float
    C2: float


def rzz_decay(p: RadialProfile, r_min: float = 10.0, r_max: Optional[float] = None) -> RzzDecay:
    """``sup`` of ``r^{5/2} (-r_zz)`` over interior nodes with ``r_min <= r (<= r_max)``."""
    r = p.r
    rzz = d2(r, p.grid.h)
    mask = np.zeros(r.size, dtype=bool)
    mask[1:-1] = r[1:-1] >= r_min
    if r_max is not None:
        mask &= r <= r_max
    if not mask.any():
        return RzzDecay(float(r_min), 0.0)
    vals = r[mask] ** 2.5 * (-rzz[mask])
    return RzzDecay(float(r_min), float(max(0.0, vals.max())))


def sandwich_check(T: np.ndarray, t: float, r: np.ndarray, C1: float, C2: float):
    """Margins of ``2 (T - t) <= r^2 <= 2 (T - t) + 8 C2 (T - t)^{1/4} + C1^2``.

    Returns ``(lower, upper)``, the minima of ``r^2 - 2(T - t)`` and of the
    upper bound minus ``r^2``; both are nonnegative when the sandwich holds.
    """
    tau = np.asarray(T, dtype=float) - t
    if np.any(tau < 0):
        raise ParameterError("probe times must precede the extinction times")
    r2 = np.asarray(r, dtype=float) ** 2
    lower = float(np.min(r2 - 2.0 * tau))
    upper = float(np.min(2.0 * tau + 8.0 * C2 * tau**0.25 + C1**2 - r2))
    return lower, upper


__all__ = [
    "CLASS_THRESHOLD",
    "EPS0",
    "HarnackReport",
    "MZClassification",
    "MZParams",
    "MZRun",
    "MZState",
    "RrzReport",
    "RzzDecay",
    "harnack_checks",
    "mz_classify",
    "mz_ensemble",
    "mz_simulate",
    "psi",
    "psi_closed_form",
    "psi_integral",
    "psi_t",
    "psi_zz",
    "rrz_profile",
    "rzz_decay",
    "sandwich_check",
    "validate_psi",
]
