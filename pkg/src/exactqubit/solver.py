"""Exact evolution of a two-level system from a chosen chi(t).

Given an envelope beta(t), phase phi(t) and a function chi(t) obeying
|chi_dot| <= |beta|, the Hamiltonian

    H = b_x sigma_x + b_y sigma_y + b_z sigma_z,  b_x + i b_y = beta e^{i phi}

with

    b_z = (chi_ddot - chi_dot beta_dot / beta) / (2 beta s)
          - beta s cot(2 chi) + phi_dot / 2,      s = sqrt(1 - chi_dot^2 / beta^2)

is solved by

    u11 = cos(chi) exp(i xi_- - i phi/2),   u21 = i eta sin(chi) exp(i xi_+ + i phi/2)
    xi_pm = int_0^t beta s csc(2 chi) dt' +- asin(chi_dot/beta)/2 +- eta pi/4.

Everything below is organised around the ratio r = chi_dot/beta and the
"QSL gap" g = 1 - r^2 >= 0.  Close to points where the gap vanishes the
naive 1 - r^2 is destroyed by cancellation, so the gap is rebuilt there
from its derivative -2 r r_dot instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy import integrate

from .core import (
    DrivingFields,
    PhaseSet,
    Propagator,
    QuadratureFailure,
    SingularIntegrand,
    TimeGrid,
    compose,
    identity,
)

Fn = Callable[[float], float]

CLAMP_TOL = 1e-12
WINDOW_FRACTION = 1e-4
QUAD_TOL = 1e-10

# 8-point Gauss-Legendre rule on [0, 1], used to rebuild the gap in windows
_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)
_GL_X = 0.5 * (_GL_X + 1.0)
_GL_W = 0.5 * _GL_W


def _zero(t: float) -> float:
    return 0.0


@dataclass(frozen=True)
class EnvelopeSpec:
    """Transverse drive beta(t) e^{i phi(t)} with B(t) = int_0^t beta."""

    beta: Fn
    beta_dot: Fn
    B: Fn
    phi: Fn = _zero
    phi_dot: Fn = _zero
    vanishing: bool = False
    name: str = "custom"
    params: Mapping[str, float] = field(default_factory=dict)

    @classmethod
    def constant(cls, beta0: float) -> EnvelopeSpec:
        beta0 = float(beta0)
        return cls(
            beta=lambda t: beta0,
            beta_dot=_zero,
            B=lambda t: beta0 * t,
            vanishing=beta0 == 0.0,
            name="constant",
            params={"beta0": beta0},
        )

    @classmethod
    def oscillating(cls, beta0: float = 1.0) -> EnvelopeSpec:
        """beta0 (1 + sin^2(2 beta0 t) / 2), the drive used for the Hadamard design."""
        b = float(beta0)
        return cls(
            beta=lambda t: b * (1.0 + 0.5 * math.sin(2.0 * b * t) ** 2),
            beta_dot=lambda t: b * b * math.sin(4.0 * b * t),
            B=lambda t: 1.25 * b * t - math.sin(4.0 * b * t) / 16.0,
            name="oscillating",
            params={"beta0": b},
        )

    @classmethod
    def from_beta(cls, beta: Fn, beta_dot: Fn, B: Fn | None = None, **kw) -> EnvelopeSpec:
        """Envelope from beta and its derivative; B falls back to quadrature."""
        if B is None:
            def B(t, _beta=beta):
                val, _ = integrate.quad(_beta, 0.0, t, epsabs=1e-14, epsrel=1e-13, limit=200)
                return val
        return cls(beta=beta, beta_dot=beta_dot, B=B, **kw)

    def with_phase(self, phi: Fn, phi_dot: Fn) -> EnvelopeSpec:
        return EnvelopeSpec(self.beta, self.beta_dot, self.B, phi, phi_dot,
                            self.vanishing, self.name, dict(self.params))

    def fields(self, t: float) -> tuple[float, float]:
        b, p = self.beta(t), self.phi(t)
        return b * math.cos(p), b * math.sin(p)


@dataclass(frozen=True)
class ChiOfB:
    """chi as a function of B with its first two derivatives.

    ``root_gap`` optionally returns sqrt(1 - chi'(B)^2) in a cancellation-free
    form; without it the gap is rebuilt numerically near B = 0.
    """

    chi: Fn
    d1: Fn
    d2: Fn
    root_gap: Fn | None = None


@dataclass(frozen=True)
class ChiAnsatz:
    chi: Fn
    chi_dot: Fn
    chi_ddot: Fn
    eta: int
    params: Mapping[str, float] = field(default_factory=dict)
    of_B: ChiOfB | None = None
    # times at which b_z is infinite by design (e.g. the LMSZ sweep ends)
    singular_times: tuple[float, ...] = ()
    name: str = "custom"

    def __post_init__(self):
        if self.eta not in (1, -1):
            raise ValueError("eta must be +1 or -1")

    @classmethod
    def lifted(cls, of_B: ChiOfB, env: EnvelopeSpec, eta: int, **kw) -> ChiAnsatz:
        """chi(t) = chi(B(t)), with chain-rule derivatives."""

        def chi(t):
            return of_B.chi(env.B(t))

        def chi_dot(t):
            return of_B.d1(env.B(t)) * env.beta(t)

        def chi_ddot(t):
            B, b = env.B(t), env.beta(t)
            return of_B.d2(B) * b * b + of_B.d1(B) * env.beta_dot(t)

        return cls(chi, chi_dot, chi_ddot, eta, of_B=of_B, **kw)


def saturating_chi(env: EnvelopeSpec, eta: int = 1) -> ChiAnsatz:
    """chi = -eta B(t): the QSL evolution, an x-rotation when phi = 0."""
    of_B = ChiOfB(lambda B: -eta * B, lambda B: -float(eta), _zero, root_gap=_zero)
    return ChiAnsatz.lifted(of_B, env, eta, name="saturating")


def zero_chi() -> ChiAnsatz:
    return ChiAnsatz(_zero, _zero, _zero, 1, name="zero")


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    qsl_margin: float
    saturation_points: tuple[float, ...]
    zero_crossings: tuple[float, ...]
    violations: tuple[tuple[float, str], ...]

    def __bool__(self) -> bool:
        return self.ok


@dataclass(frozen=True)
class KappaPath:
    """kappa_I, kappa_R and alpha sampled on a grid."""

    times: np.ndarray
    kappa_I: np.ndarray
    kappa_R: np.ndarray
    alpha: np.ndarray
    eta: int


class QSLViolation(ValueError):
    pass


class _Kernel:
    """Pointwise quantities for one (chi, envelope) pair."""

    def __init__(self, chi: ChiAnsatz, env: EnvelopeSpec, span: float = 1.0,
                 anchors: Sequence[float] = ()):
        self.chi = chi
        self.env = env
        self.eta = chi.eta
        self.span = abs(span) if span else 1.0
        self.eps = WINDOW_FRACTION * self.span
        self.of_B = chi.of_B
        pts = {0.0, *chi.singular_times, *anchors}
        self.anchors = tuple(sorted(s for s in pts if self._saturated(s)))
        if self.of_B is not None and self.of_B.root_gap is None:
            Bs = abs(env.B(span)) if span else 1.0
            self.eps_B = WINDOW_FRACTION * (Bs or 1.0)

    def _raw_ratio(self, t: float) -> tuple[float, float]:
        b = self.env.beta(t)
        if self.of_B is not None:
            B = self.env.B(t)
            return self.of_B.d1(B), self.of_B.d2(B) * b
        cd = self.chi.chi_dot(t)
        return cd / b, (self.chi.chi_ddot(t) * b - cd * self.env.beta_dot(t)) / (b * b)

    def _saturated(self, t: float) -> bool:
        try:
            r, _ = self._raw_ratio(t)
        except ZeroDivisionError:
            return False
        return abs(abs(r) - 1.0) <= 1e-10

    def ratio(self, t: float) -> tuple[float, float]:
        """(chi_dot/beta, d/dt of it), with |ratio| clamped to 1 inside tolerance."""
        r, rdot = self._raw_ratio(t)
        if abs(r) > 1.0:
            if abs(r) - 1.0 > CLAMP_TOL:
                raise QSLViolation(f"|chi_dot/beta| = {abs(r):.15g} > 1 at t={t:g}")
            r = math.copysign(1.0, r)
        return r, rdot

    def root_gap(self, t: float, r: float | None = None) -> float:
        """sqrt(1 - (chi_dot/beta)^2) evaluated without catastrophic cancellation."""
        if self.of_B is not None:
            B = self.env.B(t)
            if self.of_B.root_gap is not None:
                return self.of_B.root_gap(B)
            if abs(B) < self.eps_B:
                return math.sqrt(max(self._window_gap_B(B), 0.0))
        else:
            for s in self.anchors:
                if 0.0 < abs(t - s) < self.eps:
                    return math.sqrt(max(self._window_gap_t(s, t), 0.0))
        if r is None:
            r, _ = self.ratio(t)
        a = abs(r)
        return math.sqrt(max((1.0 - a) * (1.0 + a), 0.0))

    def _window_gap_t(self, s: float, t: float) -> float:
        # gap(t) = int_s^t -2 r r_dot, exact at the saturated anchor s
        h = t - s
        acc = 0.0
        for x, w in zip(_GL_X, _GL_W):
            r, rdot = self._raw_ratio(s + h * x)
            acc += w * (-2.0 * r * rdot)
        return acc * h

    def _window_gap_B(self, B: float) -> float:
        d1, d2 = self.of_B.d1, self.of_B.d2
        acc = 0.0
        for x, w in zip(_GL_X, _GL_W):
            acc += w * (-2.0 * d1(B * x) * d2(B * x))
        return acc * B

    def arcsin_ratio(self, t: float) -> float:
        r, _ = self.ratio(t)
        return math.atan2(r, self.root_gap(t, r))

    def integrand(self, t: float) -> float:
        """beta sqrt(1 - r^2) csc(2 chi), the xi_pm phase rate."""
        b = self.env.beta(t)
        if b == 0.0:
            return 0.0
        rg = self.root_gap(t)
        s2 = math.sin(2.0 * self.chi.chi(t))
        if s2 == 0.0:
            if rg == 0.0:
                return 0.0
            raise SingularIntegrand(f"sin(2 chi) = 0 with nonzero gap at t={t:g}")
        return b * rg / s2

    def alpha_rate(self, t: float) -> float:
        """beta cos(kappa_I) cot(2 chi)."""
        b = self.env.beta(t)
        if b == 0.0:
            return 0.0
        rg = self.root_gap(t)
        c = self.chi.chi(t)
        s2 = math.sin(2.0 * c)
        if s2 == 0.0:
            if rg == 0.0:
                return 0.0
            raise SingularIntegrand(f"sin(2 chi) = 0 with nonzero gap at t={t:g}")
        return b * rg * math.cos(2.0 * c) / s2

    def _bz_direct(self, t: float) -> float:
        b = self.env.beta(t)
        r, rdot = self.ratio(t)
        rg = self.root_gap(t, r)
        c = self.chi.chi(t)
        s2 = math.sin(2.0 * c)
        if rg == 0.0:
            if rdot != 0.0:
                return math.copysign(math.inf, rdot)
            first = 0.0
        else:
            first = rdot / (2.0 * rg)
        if s2 == 0.0:
            if rg != 0.0:
                return math.copysign(math.inf, -b * rg * math.cos(2.0 * c))
            second = 0.0
        else:
            second = -b * rg * math.cos(2.0 * c) / s2
        return first + second + 0.5 * self.env.phi_dot(t)

    def _divergent_at(self, t: float) -> float | None:
        """Sign of the divergence of b_z at a saturation point, or None if finite."""
        b = self.env.beta(t)
        r, rdot = self._raw_ratio(t)
        if self.of_B is not None:
            scale = abs(b) * (abs(self.of_B.d1(self.env.B(t))) + 1.0)
        else:
            scale = (abs(self.chi.chi_ddot(t)) + abs(self.chi.chi_dot(t) * self.env.beta_dot(t) / b)) / abs(b) + abs(b)
        if abs(rdot) > 1e-9 * scale:
            return math.copysign(math.inf, rdot)
        return None

    def bz(self, t: float) -> float:
        if t in self.anchors or t in self.chi.singular_times:
            div = self._divergent_at(t)
            if div is not None:
                return div
            if math.sin(2.0 * self.chi.chi(t)) == 0.0:
                return self._bz_limit(t)
        return self._bz_direct(t)

    def _bz_limit(self, t: float) -> float:
        """Finite 0/0 limit of b_z at a saturation point with sin(2 chi) = 0."""
        h = 0.25 * self.eps
        side = -1.0 if (t > 0.0 and t >= self.span) else 1.0
        xs = [t + side * h * (j + 1) for j in range(4)]
        if self.root_gap(xs[0]) == 0.0 and self.root_gap(xs[1]) == 0.0:
            # saturated stretch: chi = -eta B locally
            return 0.5 * self.env.phi_dot(t)
        ys = [self._bz_direct(x) for x in xs]
        # cubic extrapolation from the four samples back to t
        return 4.0 * ys[0] - 6.0 * ys[1] + 4.0 * ys[2] - ys[3]


def _quad(f: Fn, a: float, b: float) -> float:
    """Adaptive Gauss-Kronrod on [a, b] after a cosine change of variables.

    The map t = a + (b - a)(1 - cos(pi s))/2 has dt/ds -> 0 at both ends, which
    removes the t^(-1/2) endpoint singularities the phase integrand can have.
    """
    if a == b:
        return 0.0
    L = b - a
    half_pi_L = 0.5 * math.pi * L

    def g(s):
        if s <= 0.5:
            t = a + L * math.sin(0.5 * math.pi * s) ** 2
        else:
            t = b - L * math.cos(0.5 * math.pi * s) ** 2
        return f(t) * half_pi_L * math.sin(math.pi * s)

    val, err, *rest = integrate.quad(g, 0.0, 1.0, epsabs=1e-13, epsrel=1e-12,
                                     limit=400, full_output=1)
    if err > QUAD_TOL and err > 1e-12 * abs(val):
        raise QuadratureFailure(f"phase integral on [{a:g}, {b:g}] reached only {err:.2g}")
    return val


def _cumulative(f: Fn, times: Sequence[float]) -> np.ndarray:
    times = np.asarray(times, dtype=float)
    out = np.zeros(times.size)
    acc = 0.0
    prev = 0.0
    for i, t in enumerate(times):
        acc += _quad(f, prev, t)
        out[i] = acc
        prev = t
    return out


def _check_phi0(env: EnvelopeSpec):
    if env.phi(0.0) != 0.0:
        raise ValueError("the exact solution assumes phi(0) = 0")


def _sign_changes(chi: ChiAnsatz, lo: float, hi: float, n: int = 257) -> list[float]:
    from scipy.optimize import brentq

    ts = np.linspace(lo, hi, n)
    vals = [math.sin(2.0 * chi.chi(t)) for t in ts]
    roots = []
    for i in range(1, n - 2):
        if vals[i] == 0.0:
            roots.append(float(ts[i]))
        elif vals[i] * vals[i + 1] < 0.0:
            roots.append(brentq(lambda t: math.sin(2.0 * chi.chi(t)), ts[i], ts[i + 1], xtol=1e-14))
    return roots


def _assert_integrable(k: _Kernel, lo: float, hi: float):
    for r in _sign_changes(k.chi, lo, hi):
        if r > lo and r < hi and k.root_gap(r) > 1e-6:
            raise SingularIntegrand(f"sin(2 chi) changes sign at t={r:.12g} away from saturation")


def validate(chi: ChiAnsatz, env: EnvelopeSpec, grid: TimeGrid) -> ValidationReport:
    """Check a chi-ansatz against an envelope on a grid; problems are reported, never raised."""
    ts = grid.samples
    k = _Kernel(chi, env, span=grid.t_end, anchors=(grid.t_end,))
    violations: list[tuple[float, str]] = []
    margin = math.inf
    saturated = []
    sat_flags = []
    for t in ts:
        t = float(t)
        b, cd = env.beta(t), chi.chi_dot(t)
        margin = min(margin, abs(b) - abs(cd))
        if b == 0.0:
            sat_flags.append(cd == 0.0)
            if cd != 0.0:
                violations.append((t, "chi_dot nonzero where beta = 0"))
            continue
        r, _ = k._raw_ratio(t)
        if abs(r) > 1.0 + CLAMP_TOL:
            violations.append((t, f"QSL violated: |chi_dot/beta| = {abs(r):.6g}"))
            sat_flags.append(False)
            continue
        g = k.root_gap(t)
        is_sat = g <= 1e-6 and abs(abs(r) - 1.0) <= 1e-10
        sat_flags.append(is_sat)
        if is_sat:
            saturated.append(t)

    if abs(chi.chi(0.0)) > 1e-12:
        violations.append((0.0, f"chi(0) = {chi.chi(0.0):.3g}, expected 0"))
    b0, cd0 = env.beta(0.0), chi.chi_dot(0.0)
    if b0 != 0.0 and cd0 != 0.0:
        inferred = -int(math.copysign(1.0, cd0 / b0))
        if inferred != chi.eta:
            violations.append((0.0, f"eta = {chi.eta} but -sign(chi_dot/beta) at 0 is {inferred}"))
    if b0 != 0.0 and 0.0 not in chi.singular_times and abs(cd0 + chi.eta * b0) > 1e-10 * max(1.0, abs(b0)):
        violations.append((0.0, "chi_dot(0) != -eta beta(0): b_z(0) is not finite"))

    # sin(2 chi) = 0 inside the domain makes cot(2 chi) blow up unless saturated there
    crossings = []
    interior_lo, interior_hi = float(ts[0]), float(ts[-1])
    vals = [math.sin(2.0 * chi.chi(float(t))) for t in ts]
    from scipy.optimize import brentq

    for i in range(1, len(ts)):
        a, b = float(ts[i - 1]), float(ts[i])
        if vals[i - 1] * vals[i] < 0.0:
            crossings.append(brentq(lambda t: math.sin(2.0 * chi.chi(t)), a, b, xtol=1e-14))
        elif vals[i] == 0.0:
            crossings.append(b)
    if vals[0] == 0.0:
        crossings.insert(0, interior_lo)
    for c in crossings:
        if interior_lo < c < interior_hi:
            try:
                g = k.root_gap(c)
            except QSLViolation:
                continue
            if g > 1e-6:
                violations.append((c, "sin(2 chi) = 0 away from saturation: b_z diverges"))

    # isolated tangencies |chi_dot| = |beta| with sin(2 chi) != 0
    for i in range(1, len(ts) - 1):
        if sat_flags[i] and not (sat_flags[i - 1] or sat_flags[i + 1]):
            if abs(vals[i]) > 1e-12:
                violations.append((float(ts[i]), "interior tangency |chi_dot| = |beta|"))

    violations.sort(key=lambda v: v[0])
    return ValidationReport(
        ok=not violations,
        qsl_margin=float(margin),
        saturation_points=tuple(saturated),
        zero_crossings=tuple(crossings),
        violations=tuple(violations),
    )


def _phases_from(k: _Kernel, t: float, integral: float) -> PhaseSet:
    if t == 0.0 or k.env.beta(t) == 0.0:
        asin_r = math.atan2(*((-k.eta * 1.0, 0.0) if t == 0.0 else (0.0, 1.0)))
    else:
        asin_r = k.arcsin_ratio(t)
    quarter = k.eta * math.pi / 4.0
    return PhaseSet(xi_minus=integral - 0.5 * asin_r - quarter,
                    xi_plus=integral + 0.5 * asin_r + quarter)


def phase_integral(chi: ChiAnsatz, env: EnvelopeSpec, times) -> np.ndarray:
    """Cumulative int_0^t beta sqrt(1 - r^2) csc(2 chi) at each requested time."""
    times = np.atleast_1d(np.asarray(times, dtype=float))
    span = float(times.max()) if times.size else 1.0
    k = _Kernel(chi, env, span=span, anchors=tuple(times.tolist()))
    _assert_integrable(k, 0.0, span)
    return _cumulative(k.integrand, times)


def xi_phases(chi: ChiAnsatz, env: EnvelopeSpec, t: float) -> PhaseSet:
    """xi_-(t), xi_+(t) and their mean xi_0(t)."""
    t = float(t)
    k = _Kernel(chi, env, span=t or 1.0, anchors=(t,))
    if t == 0.0:
        return _phases_from(k, 0.0, 0.0)
    _assert_integrable(k, 0.0, t)
    return _phases_from(k, t, _quad(k.integrand, 0.0, t))


def xi_phase_trace(chi: ChiAnsatz, env: EnvelopeSpec, grid: TimeGrid) -> list[PhaseSet]:
    k = _Kernel(chi, env, span=grid.t_end, anchors=(grid.t_end,))
    _assert_integrable(k, 0.0, grid.t_end)
    integrals = _cumulative(k.integrand, grid.samples)
    return [_phases_from(k, float(t), float(v)) for t, v in zip(grid.samples, integrals)]


def _propagator(k: _Kernel, t: float, ph: PhaseSet) -> Propagator:
    c = k.chi.chi(t)
    p = k.env.phi(t)
    u11 = math.cos(c) * complex(math.cos(ph.xi_minus - 0.5 * p), math.sin(ph.xi_minus - 0.5 * p))
    u21 = 1j * k.eta * math.sin(c) * complex(math.cos(ph.xi_plus + 0.5 * p), math.sin(ph.xi_plus + 0.5 * p))
    return Propagator(u11, u21)


def evolution(chi: ChiAnsatz, env: EnvelopeSpec, t: float, bz: Fn | None = None) -> Propagator:
    """Exact propagator U(t) for the Hamiltonian generated by (chi, env).

    When the envelope vanishes identically the formulas above are replaced by
    a pure z-rotation driven by ``bz``.
    """
    if env.vanishing:
        return z_evolution(bz, 0.0, t) if bz is not None else identity()
    _check_phi0(env)
    t = float(t)
    k = _Kernel(chi, env, span=t or 1.0, anchors=(t,))
    if t == 0.0:
        return _propagator(k, 0.0, _phases_from(k, 0.0, 0.0))
    return _propagator(k, t, xi_phases(chi, env, t))


def evolution_trace(chi: ChiAnsatz, env: EnvelopeSpec, grid: TimeGrid) -> list[Propagator]:
    """evolution() at every grid time, sharing one cumulative phase integral."""
    _check_phi0(env)
    if grid.t0 != 0.0:
        full = TimeGrid.from_samples(np.concatenate(([0.0], grid.samples)))
        return evolution_trace(chi, env, full)[1:]
    k = _Kernel(chi, env, span=grid.t_end, anchors=(grid.t_end,))
    phases = xi_phase_trace(chi, env, grid)
    return [_propagator(k, float(t), ph) for t, ph in zip(grid.samples, phases)]


def z_evolution(bz: Fn, t0: float, t1: float) -> Propagator:
    """exp(-i sigma_z int bz) for a stretch with beta = 0."""
    theta, _ = integrate.quad(bz, t0, t1, epsabs=1e-13, epsrel=1e-13, limit=200)
    return Propagator(complex(math.cos(theta), -math.sin(theta)), 0.0)


@dataclass(frozen=True)
class Segment:
    """One stretch of a piecewise drive: either (chi, env) or a bare b_z with beta = 0."""

    duration: float
    chi: ChiAnsatz | None = None
    env: EnvelopeSpec | None = None
    bz: Fn | None = None


def piecewise_evolution(segments: Sequence[Segment], t: float) -> Propagator:
    """Compose segment propagators; each segment runs on its own clock from 0."""
    u = identity()
    start = 0.0
    for seg in segments:
        if t <= start:
            break
        local = min(t - start, seg.duration)
        if seg.chi is None:
            step = z_evolution(seg.bz, 0.0, local)
        else:
            step = evolution(seg.chi, seg.env, local, seg.bz)
        u = compose(step, u)
        start += seg.duration
    return u


def synthesize_bz(chi: ChiAnsatz, env: EnvelopeSpec, t: float, span: float | None = None) -> float:
    """b_z(t) for the (chi, env) pair; a signed infinity where b_z diverges."""
    t = float(t)
    k = _Kernel(chi, env, span=span or max(t, 1.0), anchors=(t,))
    return k.bz(t)


def bz_function(chi: ChiAnsatz, env: EnvelopeSpec, span: float) -> Fn:
    k = _Kernel(chi, env, span=span, anchors=(span,))
    return k.bz


def synthesize_fields(chi: ChiAnsatz, env: EnvelopeSpec, grid: TimeGrid) -> DrivingFields:
    k = _Kernel(chi, env, span=grid.t_end, anchors=(grid.t_end,))
    ts = grid.samples
    bx, by, bz = [], [], []
    for t in ts:
        x, y = env.fields(float(t))
        bx.append(x)
        by.append(y)
        bz.append(k.bz(float(t)))
    return DrivingFields(ts, np.array(bx), np.array(by), np.array(bz))


def _infer_eta_B(of_B: ChiOfB) -> int:
    d = of_B.d1(0.0)
    return -int(math.copysign(1.0, d)) if d != 0.0 else 1


def xi_of_B(chi_of_B: ChiOfB, B_value: float, eta: int | None = None) -> PhaseSet:
    """xi_pm as ordinary functions of B for a chi that depends on time only through B."""
    eta = _infer_eta_B(chi_of_B) if eta is None else eta
    B_value = float(B_value)
    span = abs(B_value) or 1.0
    eps = WINDOW_FRACTION * span

    def root_gap(B):
        if chi_of_B.root_gap is not None:
            return chi_of_B.root_gap(B)
        if abs(B) < eps:
            acc = 0.0
            for x, w in zip(_GL_X, _GL_W):
                acc += w * (-2.0 * chi_of_B.d1(B * x) * chi_of_B.d2(B * x))
            return math.sqrt(max(acc * B, 0.0))
        d = min(abs(chi_of_B.d1(B)), 1.0)
        return math.sqrt(max((1.0 - d) * (1.0 + d), 0.0))

    def f(B):
        s2 = math.sin(2.0 * chi_of_B.chi(B))
        rg = root_gap(B)
        if s2 == 0.0:
            if rg == 0.0:
                return 0.0
            raise SingularIntegrand(f"sin(2 chi) = 0 at B={B:g}")
        return rg / s2

    integral = _quad(f, 0.0, B_value)
    if B_value == 0.0:
        asin_r = -eta * math.pi / 2.0
    else:
        d = max(-1.0, min(1.0, chi_of_B.d1(B_value)))
        asin_r = math.atan2(d, root_gap(B_value))
    quarter = eta * math.pi / 4.0
    return PhaseSet(integral - 0.5 * asin_r - quarter, integral + 0.5 * asin_r + quarter)


def kappa_path(chi: ChiAnsatz, env: EnvelopeSpec, grid: TimeGrid) -> KappaPath:
    """The complex-kappa description of the same solution.

    kappa_I = asin(chi_dot/beta); kappa_R makes alpha real, and alpha is
    kappa_I + eta pi/2 - 2 int beta cos(kappa_I) cot(2 chi).
    """
    k = _Kernel(chi, env, span=grid.t_end, anchors=(grid.t_end,))
    eta = chi.eta
    ts = grid.samples
    kI = np.empty(ts.size)
    kR = np.empty(ts.size)
    for i, t in enumerate(ts):
        t = float(t)
        kI[i] = -eta * math.pi / 2.0 if t == 0.0 else k.arcsin_ratio(t)
        kR[i] = _kappa_R(chi.chi(t), eta)
    _assert_integrable(k, 0.0, grid.t_end)
    integral = _cumulative(k.alpha_rate, ts)
    alpha = kI + eta * math.pi / 2.0 - 2.0 * integral
    return KappaPath(ts, kI, kR, alpha, eta)


def _kappa_R(c: float, eta: int) -> float:
    # -2 eta atanh(tan(eta chi + pi/4)) simplifies to eta log(-eta tan chi);
    # the log form keeps chi = 0 (an infinite kappa_R) exact
    x = -eta * math.tan(c)
    if x == 0.0:
        return -eta * math.inf
    if x < 0.0:
        return math.nan
    return eta * math.log(x) if math.isfinite(x) else eta * math.inf


def kappa_evolution(chi: ChiAnsatz, env: EnvelopeSpec, grid: TimeGrid) -> tuple[np.ndarray, np.ndarray]:
    """Rotating-frame entries (v11, v21) on a grid from the kappa parametrization.

    v11 = exp(-i int beta e^kappa), v21 = -i eta exp(-i int beta e^-kappa).  The
    imaginary parts of both exponents integrate in closed form to log cos(chi)
    and log|sin(chi)|; the real parts are integrated numerically.
    """
    k = _Kernel(chi, env, span=grid.t_end, anchors=(grid.t_end,))
    eta = chi.eta

    def exp_kR(t):
        # e^{kappa_R} = -eta tan(chi)^eta, finite where kappa_R itself is not
        c = chi.chi(t)
        return -math.tan(c) if eta == 1 else 1.0 / math.tan(c)

    def rate11(t):
        b = env.beta(t)
        if b == 0.0:
            return 0.0
        return b * exp_kR(t) * k.root_gap(t)

    def rate21(t):
        b = env.beta(t)
        if b == 0.0:
            return 0.0
        c = chi.chi(t)
        if c == 0.0:
            return 0.0
        inv = -1.0 / math.tan(c) if eta == 1 else math.tan(c)
        return b * inv * k.root_gap(t)

    ts = grid.samples
    ph11 = -_cumulative(rate11, ts)
    ph21 = -_cumulative(rate21, ts)
    mod11 = np.array([math.cos(chi.chi(float(t))) for t in ts])
    mod21 = np.array([abs(math.sin(chi.chi(float(t)))) for t in ts])
    v11 = mod11 * np.exp(1j * ph11)
    v21 = -1j * eta * mod21 * np.exp(1j * ph21)
    return v11, v21
