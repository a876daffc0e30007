"""Numerical ground truth: direct integration of the Schrodinger equation.

The full 2x2 propagator is integrated with an embedded 8th-order
Runge-Kutta scheme (DOP853) and never renormalised, so the unitarity drift
of the result doubles as an error estimate.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp

from .core import (
    GridMismatch,
    Propagator,
    StepFailure,
    TimeGrid,
    compose,
    frobenius_distance,
)
from .solver import (
    ChiAnsatz,
    EnvelopeSpec,
    _Kernel,
    _quad,
    bz_function,
    evolution_trace,
)

Fn = Callable[[float], float]


@dataclass(frozen=True)
class IntegratorConfig:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_step: float = math.inf
    # fraction of the interval length cut off at declared-infinite endpoints
    endpoint_clip: float = 1e-6

    def __post_init__(self):
        if not (self.rel_tol > 0.0 and self.abs_tol > 0.0 and self.max_step > 0.0):
            raise ValueError("tolerances and max_step must be positive")
        if not 0.0 < self.endpoint_clip < 1e-2:
            raise ValueError("endpoint_clip must lie in (0, 1e-2) as a fraction of T")

    def halved(self) -> IntegratorConfig:
        return IntegratorConfig(self.rel_tol / 2, self.abs_tol / 2, self.max_step, self.endpoint_clip)


@dataclass(frozen=True)
class FieldFunctions:
    """Lab-frame fields as functions of time."""

    bx: Fn
    by: Fn
    bz: Fn

    @classmethod
    def from_solution(cls, chi: ChiAnsatz, env: EnvelopeSpec, span: float) -> FieldFunctions:
        bz = bz_function(chi, env, span)
        return cls(lambda t: env.fields(t)[0], lambda t: env.fields(t)[1], bz)

    @classmethod
    def constant(cls, bx: float = 0.0, by: float = 0.0, bz: float = 0.0) -> FieldFunctions:
        return cls(lambda t: bx, lambda t: by, lambda t: bz)


@dataclass(frozen=True)
class Trajectory:
    grid: TimeGrid
    propagators: tuple[Propagator, ...]
    drift: float = 0.0

    def __post_init__(self):
        if len(self.propagators) != len(self.grid):
            raise ValueError("one propagator per grid sample is required")
        first = self.propagators[0]
        if abs(first.u11 - 1.0) > 1e-9 or abs(first.u21) > 1e-9:
            raise ValueError("a trajectory starts from the identity")

    def u11(self) -> np.ndarray:
        return np.array([u.u11 for u in self.propagators])

    def u21(self) -> np.ndarray:
        return np.array([u.u21 for u in self.propagators])


@dataclass(frozen=True)
class Comparison:
    max_frobenius: float
    max_unitarity_drift: float
    worst_t: float


def _integrate(gen: Callable[[float], np.ndarray], grid: TimeGrid, cfg: IntegratorConfig) -> Trajectory:
    """Solve i dU/dt = G(t) U from U(t0) = 1, sampling U on the grid."""

    def rhs(t, y):
        u = y.reshape(2, 2)
        return (-1j * (gen(t) @ u)).ravel()

    y0 = np.eye(2, dtype=complex).ravel()
    sol = solve_ivp(rhs, (grid.t0, grid.t_end), y0, method="DOP853",
                    t_eval=grid.samples, rtol=cfg.rel_tol, atol=cfg.abs_tol,
                    max_step=cfg.max_step)
    if sol.status != 0:
        raise StepFailure(sol.message)
    us = sol.y.T.reshape(-1, 2, 2)
    eye = np.eye(2)
    drift = max(float(np.abs(u.conj().T @ u - eye).max()) for u in us)
    props = tuple(Propagator(u[0, 0], u[1, 0], check=False) for u in us)
    return Trajectory(grid, props, drift)


def integrate_lab(fields: FieldFunctions, grid: TimeGrid, cfg: IntegratorConfig | None = None) -> Trajectory:
    """Propagator of H = bx sigma_x + by sigma_y + bz sigma_z, relative to grid.t0."""
    cfg = cfg or IntegratorConfig()

    def gen(t):
        x, y, z = fields.bx(t), fields.by(t), fields.bz(t)
        if not math.isfinite(z):
            raise StepFailure(f"b_z is infinite at t={t:g}; clip the interval")
        return np.array([[z, x - 1j * y], [x + 1j * y, -z]])

    return _integrate(gen, grid, cfg)


def integrate_rotating(env: EnvelopeSpec, alpha: Fn, grid: TimeGrid,
                       cfg: IntegratorConfig | None = None) -> Trajectory:
    """Rotating-frame propagator: dv11/dt = -i beta e^{i alpha} v21, dv21/dt = -i beta e^{-i alpha} v11."""
    cfg = cfg or IntegratorConfig()

    def gen(t):
        b = env.beta(t)
        if b == 0.0:
            return np.zeros((2, 2), dtype=complex)
        w = b * complex(math.cos(alpha(t)), math.sin(alpha(t)))
        return np.array([[0.0, w], [w.conjugate(), 0.0]])

    return _integrate(gen, grid, cfg)


def alpha_function(chi: ChiAnsatz, env: EnvelopeSpec, span: float) -> Fn:
    """alpha(t) = kappa_I + eta pi/2 - 2 int_0^t beta cos(kappa_I) cot(2 chi) as a callable.

    Integrals are accumulated from the nearest already-visited time, so the
    many nearby calls made by an ODE solver stay cheap.
    """
    k = _Kernel(chi, env, span=span, anchors=(span,))
    knots, values = [0.0], [0.0]

    def integral(t):
        i = bisect.bisect_right(knots, t) - 1
        if i < 0:
            return _quad(k.alpha_rate, 0.0, t)
        if knots[i] == t:
            return values[i]
        v = values[i] + _quad(k.alpha_rate, knots[i], t)
        knots.insert(i + 1, t)
        values.insert(i + 1, v)
        return v

    def alpha(t):
        kI = -chi.eta * math.pi / 2.0 if t == 0.0 else k.arcsin_ratio(t)
        return kI + chi.eta * math.pi / 2.0 - 2.0 * integral(t)

    return alpha


def to_rotating(traj: Trajectory, theta) -> Trajectory:
    """v11 = e^{i theta} u11, v21 = e^{-i theta} u21 with theta(t) = int_0^t b_z."""
    theta = np.asarray(theta, dtype=float)
    props = tuple(Propagator(u.u11 * complex(math.cos(th), math.sin(th)),
                             u.u21 * complex(math.cos(th), -math.sin(th)), check=False)
                  for u, th in zip(traj.propagators, theta))
    return Trajectory(traj.grid, props, traj.drift)


def analytic_trajectory(chi: ChiAnsatz, env: EnvelopeSpec, grid: TimeGrid) -> Trajectory:
    """Exact U(t) U(t0)^dagger on the grid, matching an integration started at t0."""
    us = evolution_trace(chi, env, grid)
    if grid.t0 != 0.0:
        inv = us[0].dagger()
        us = [compose(u, inv) for u in us]
    return Trajectory(grid, tuple(us), max(u.unitarity_drift for u in us))


def compare(analytic: Trajectory, numeric: Trajectory) -> Comparison:
    if len(analytic.grid) != len(numeric.grid) or not np.array_equal(
            analytic.grid.samples, numeric.grid.samples):
        raise GridMismatch("trajectories live on different grids")
    worst, worst_t = -1.0, analytic.grid.t0
    drift = 0.0
    for t, a, b in zip(analytic.grid.samples, analytic.propagators, numeric.propagators):
        d = frobenius_distance(a, b)
        if d > worst:
            worst, worst_t = d, float(t)
        drift = max(drift, a.unitarity_drift, b.unitarity_drift)
    return Comparison(worst, max(drift, numeric.drift), worst_t)


def clipped_interval(chi: ChiAnsatz, T: float, cfg: IntegratorConfig) -> tuple[float, float]:
    """[delta, T - delta] around the declared-infinite endpoints of chi, else [0, T]."""
    d = cfg.endpoint_clip * T
    lo = d if any(s == 0.0 for s in chi.singular_times) else 0.0
    hi = T - d if any(s == T for s in chi.singular_times) else T
    return lo, hi


@dataclass(frozen=True)
class Verification:
    comparison: Comparison
    interval: tuple[float, float]
    # discrepancy after halving the endpoint clip; None when nothing was clipped
    halved_clip: float | None
    tol: float

    @property
    def sensitivity_ok(self) -> bool:
        if self.halved_clip is None:
            return True
        # changes at the noise floor of the integrator do not count
        return self.halved_clip <= 2.0 * self.comparison.max_frobenius + 1e-9

    @property
    def ok(self) -> bool:
        return self.comparison.max_frobenius <= self.tol and self.sensitivity_ok


def _run(chi, env, T, samples, cfg):
    lo, hi = clipped_interval(chi, T, cfg)
    grid = TimeGrid.linspace(lo, hi, samples)
    numeric = integrate_lab(FieldFunctions.from_solution(chi, env, T), grid, cfg)
    return compare(analytic_trajectory(chi, env, grid), numeric), (lo, hi)


def verify(chi: ChiAnsatz, env: EnvelopeSpec, T: float, samples: int = 41,
           cfg: IntegratorConfig | None = None, tol: float = 1e-6) -> Verification:
    """Analytic against numerical propagators on [0, T], clipped where b_z is infinite."""
    cfg = cfg or IntegratorConfig()
    cmp, interval = _run(chi, env, T, samples, cfg)
    halved = None
    if interval != (0.0, T):
        half = IntegratorConfig(cfg.rel_tol, cfg.abs_tol, cfg.max_step, cfg.endpoint_clip / 2)
        halved = _run(chi, env, T, samples, half)[0].max_frobenius
    return Verification(cmp, interval, halved, tol)


def oracle_period(chi: ChiAnsatz, env: EnvelopeSpec, T: float,
                  cfg: IntegratorConfig | None = None) -> Propagator:
    """One-period propagator with both half-periods integrated numerically.

    The forward half runs on [delta, T - delta] under H(t), the retrace on the
    same interval under H(T - t) reversed; the clipped ends (length delta,
    where b_z may be infinite) are bridged with the exact solution.
    """
    cfg = cfg or IntegratorConfig()
    lo, hi = clipped_interval(chi, T, cfg)
    f = FieldFunctions.from_solution(chi, env, T)
    back = FieldFunctions(lambda s: f.bx(lo + hi - s), lambda s: f.by(lo + hi - s),
                          lambda s: f.bz(lo + hi - s))
    grid = TimeGrid.linspace(lo, hi, 2)
    fwd = integrate_lab(f, grid, cfg).propagators[-1]
    rev = integrate_lab(back, grid, cfg).propagators[-1]
    ends = evolution_trace(chi, env, TimeGrid.from_samples(sorted({0.0, lo, hi, T})))
    u = dict(zip(sorted({0.0, lo, hi, T}), ends))
    head = u[lo]                          # U(lo) U(0)^dagger
    tail = compose(u[T], u[hi].dagger())  # U(T) U(hi)^dagger
    first = compose(tail, compose(fwd, head))
    # the retraced drive visits the end pieces in reverse order, each transposed
    second = compose(head.transpose(), compose(rev, tail.transpose()))
    return compose(second, first)


def oracle_propagator(chi: ChiAnsatz, env: EnvelopeSpec, T: float,
                      cfg: IntegratorConfig | None = None) -> tuple[float, Propagator]:
    """Numerical U(t_end) U(0)^dagger with t_end = T, or T - delta when b_z(T) is infinite.

    When b_z(0) is infinite the first delta of evolution is taken from the
    exact solution and the rest is integrated.
    """
    cfg = cfg or IntegratorConfig()
    lo, hi = clipped_interval(chi, T, cfg)
    u = integrate_lab(FieldFunctions.from_solution(chi, env, T),
                      TimeGrid.linspace(lo, hi, 2), cfg).propagators[-1]
    if lo > 0.0:
        u = compose(u, evolution_trace(chi, env, TimeGrid.linspace(0.0, lo, 2))[-1])
    return hi, u
