"""Single sweeps, periodic driving and interference fringes.

A sweep of duration T that ends at chi(T) leaves the system, started in |1>,
in |2> with probability sin^2 chi(T).  Driving back along the same path gives
a one-period propagator that depends only on chi(T) and xi_0(T); its powers
produce the time-averaged probability

    P2_bar = sin^2(2 chi) / (2 [sin^2(2 chi) + cos^2(2 chi) sin^2(2 xi_0)]).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.optimize import brentq

from .core import (
    EndpointCondition,
    OutOfBounds,
    PhaseSet,
    Propagator,
    Unreachable,
    compose,
)
from .families import CubicFamily, cubic_chi, cubic_envelope, solve_sweep_rate
from .solver import ChiAnsatz, EnvelopeSpec, evolution, phase_integral, xi_phases

ENDPOINT_TOL = 1e-9


@dataclass(frozen=True)
class SweepResult:
    p2: float
    chi_T: float
    T: float


@dataclass(frozen=True)
class FringePoint:
    T: float
    xi0_T: float
    p2_bar: float


@dataclass(frozen=True)
class FringeScan:
    """Scan output: computed points in T order plus the T values that were skipped."""

    points: tuple[FringePoint, ...]
    skipped: tuple[tuple[float, str], ...]
    chi_T: float
    bx: float

    def __iter__(self):
        return iter(self.points)

    def __len__(self):
        return len(self.points)

    def __getitem__(self, i):
        return self.points[i]

    @property
    def T(self) -> np.ndarray:
        return np.array([p.T for p in self.points])

    @property
    def p2_bar(self) -> np.ndarray:
        return np.array([p.p2_bar for p in self.points])

    @property
    def xi0(self) -> np.ndarray:
        return np.array([p.xi0_T for p in self.points])


def narp_probability(chi: ChiAnsatz, T: float) -> SweepResult:
    """P2(T) = |u21(T)|^2 = sin^2 chi(T) for a start in |1>."""
    c = chi.chi(T)
    return SweepResult(math.sin(c) ** 2, c, float(T))


def qsl_time(env: EnvelopeSpec, chi_target: float, horizon: float = 1e4) -> float:
    """Smallest T with int_0^T |beta| = chi_target."""
    if not chi_target > 0.0:
        raise ValueError("chi_target must be positive")

    def absbeta(t):
        return abs(env.beta(t))

    def piece(a, b):
        v, _ = integrate.quad(absbeta, a, b, epsabs=1e-14, epsrel=1e-13, limit=200)
        return v

    b0 = absbeta(0.0)
    step = chi_target / b0 if b0 > 0.0 else 1.0
    lo, acc = 0.0, 0.0
    hi = step
    while True:
        inc = piece(lo, hi)
        if acc + inc >= chi_target:
            break
        if hi >= horizon:
            raise Unreachable(
                f"int |beta| reaches only {acc + inc:.6g} < {chi_target:.6g} by t = {horizon:g}")
        lo, acc = hi, acc + inc
        hi = min(2.0 * hi, horizon)
    base = acc
    if inc == 0.0:
        return lo
    return brentq(lambda T: base + piece(lo, T) - chi_target, lo, hi,
                  xtol=1e-14, rtol=1e-12)


def _require_real_drive(env: EnvelopeSpec, T: float):
    if any(env.phi(t) != 0.0 or env.phi_dot(t) != 0.0 for t in np.linspace(0.0, T, 17)):
        raise ValueError("periodic retrace is implemented for phi = 0 (real Hamiltonian)")


def _check_endpoint(chi: ChiAnsatz, env: EnvelopeSpec, T: float, tol: float):
    cd, b = chi.chi_dot(T), env.beta(T)
    if abs(cd + chi.eta * b) > tol * max(1.0, abs(b)):
        raise EndpointCondition(
            f"chi_dot(T) = {cd:.12g} but -eta beta(T) = {-chi.eta * b:.12g}")


def period_closed_form(chi_T: float, xi0: float, eta: int = -1) -> Propagator:
    """u11 = e^{2 i xi0} cos 2chi, u21 = i eta sin 2chi."""
    c2 = 2.0 * chi_T
    return Propagator(complex(math.cos(2.0 * xi0), math.sin(2.0 * xi0)) * math.cos(c2),
                      1j * eta * math.sin(c2))


def period_evolution(chi: ChiAnsatz, env: EnvelopeSpec, T: float,
                     tol: float = ENDPOINT_TOL) -> tuple[Propagator, PhaseSet]:
    """One period 2T of the drive that runs forward to T and retraces its path.

    Requires chi_dot(T) = -eta beta(T); use :func:`composed_period_evolution`
    when that does not hold.
    """
    _require_real_drive(env, T)
    _check_endpoint(chi, env, T, tol)
    ph = xi_phases(chi, env, T)
    return period_closed_form(chi.chi(T), ph.xi_zero, chi.eta), ph


def composed_period_evolution(chi: ChiAnsatz, env: EnvelopeSpec, T: float) -> Propagator:
    """U(T)^T U(T): the retraced half of a real Hamiltonian propagates by the transpose."""
    _require_real_drive(env, T)
    u = evolution(chi, env, T)
    return compose(u.transpose(), u)


def avg_probability(chi_T: float, xi0: float) -> float:
    s2 = math.sin(2.0 * chi_T)
    if abs(s2) < 1e-15:
        return 0.0
    c2 = math.cos(2.0 * chi_T)
    d = math.sin(2.0 * xi0)
    return s2 * s2 / (2.0 * (s2 * s2 + c2 * c2 * d * d))


def time_avg_p2(chi: ChiAnsatz, env: EnvelopeSpec, T: float,
                tol: float = ENDPOINT_TOL) -> FringePoint:
    _, ph = period_evolution(chi, env, T, tol)
    return FringePoint(float(T), ph.xi_zero, avg_probability(chi.chi(T), ph.xi_zero))


def brute_force_average(period: Propagator, n_periods: int = 10_000) -> float:
    """(1/N) sum_{n=1..N} |<2|M^n|1>|^2 by repeated multiplication."""
    m = period
    u = m
    mean = 0.0
    for n in range(1, n_periods + 1):
        mean += (abs(u.u21) ** 2 - mean) / n
        u = compose(m, u)
    return mean


def fringe_scan(chi_T: float, bx: float, T_range: tuple[float, float], steps: int) -> FringeScan:
    """P2_bar on an even grid of half-periods for the cubic sweep.

    For each T the sweep rate a(T) is recomputed.  Values of T outside
    [chi_T/bx, 9 chi_T/bx], and the upper edge where chi touches zero inside
    the sweep, are skipped and listed in ``skipped``.
    """
    T_lo, T_hi = T_range
    if steps < 1 or T_hi < T_lo:
        raise ValueError("need steps >= 1 and T_min <= T_max")
    Ts = np.linspace(T_lo, T_hi, steps) if steps > 1 else np.array([T_lo])
    points, skipped = [], []
    for T in Ts:
        T = float(T)
        try:
            a = solve_sweep_rate(chi_T, bx, T)
        except OutOfBounds as exc:
            skipped.append((T, str(exc)))
            continue
        fam = CubicFamily(a, bx, T)
        if a >= 16.0 / (3.0 * T * T) * (1.0 - 1e-12):
            skipped.append((T, "a = 16/(3T^2): chi touches zero at 3T/4 and b_z diverges there"))
            continue
        chi = cubic_chi(fam)
        xi0 = float(phase_integral(chi, cubic_envelope(fam), [T])[0])
        # at the endpoint asin(chi_dot/beta) = -eta pi/2, so xi_0 is the bare integral
        points.append(FringePoint(T, xi0, avg_probability(chi_T, xi0)))
    return FringeScan(tuple(points), tuple(skipped), chi_T, bx)


def _xi0_cubic(chi_T: float, bx: float, T: float) -> float:
    fam = CubicFamily.for_target(chi_T, bx, T)
    return float(phase_integral(cubic_chi(fam), cubic_envelope(fam), [T])[0])


def fringe_peaks(scan: FringeScan, tol: float = 1e-12) -> list[float]:
    """Half-periods T where sin(2 xi_0(T)) = 0, i.e. P2_bar = 1/2 (or 0 when chi_T = pi/2).

    Sign changes of sin(2 xi_0) between neighbouring scan points are refined
    by Brent's method; no monotonicity of xi_0 in T is assumed.
    """
    pts = scan.points
    s = [math.sin(2.0 * p.xi0_T) for p in pts]
    peaks = []
    for i, (p, v) in enumerate(zip(pts, s)):
        if abs(v) <= tol:
            peaks.append(p.T)
        elif i + 1 < len(pts) and abs(s[i + 1]) > tol and v * s[i + 1] < 0.0:
            T = brentq(lambda T: math.sin(2.0 * _xi0_cubic(scan.chi_T, scan.bx, T)),
                       p.T, pts[i + 1].T, xtol=1e-13)
            peaks.append(T)
    return peaks
