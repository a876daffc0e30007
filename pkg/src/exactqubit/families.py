"""Concrete chi families and the pulse designs built from them."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .core import DrivingFields, OutOfBounds, Propagator, RootNotBracketed, TimeGrid
from .solver import (
    ChiAnsatz,
    ChiOfB,
    EnvelopeSpec,
    evolution,
    phase_integral,
    synthesize_fields,
)

SQRT_PI = math.sqrt(math.pi)
HADAMARD_PHASE = -5.0 * math.pi / 4.0


# -- small cancellation-free helpers -----------------------------------------

def _exp_tail_ratio(x: float) -> float:
    """(x - 1 + e^{-x}) / (x^2/2), which tends to 1 as x -> 0."""
    if x < 0.5:
        # sum_m 2 (-x)^m / (m+2)!
        term, acc, m = 1.0, 1.0, 0
        while abs(term) > 1e-18:
            term *= -x / (m + 3)
            acc += term
            m += 1
        return acc
    return (x - 1.0 + math.exp(-x)) / (0.5 * x * x)


def _x_over_expm1(x: float) -> float:
    if x == 0.0:
        return 1.0
    if x > 700.0:
        return x * math.exp(-x) / -math.expm1(-x)
    return x / math.expm1(x)


def _gap_ratio(x: float) -> float:
    """(1 - x/(e^x - 1)) / (x/2), which tends to 1 as x -> 0."""
    if x < 0.5:
        # [(e^x - 1 - x)/(x^2/2)] / [(e^x - 1)/x], both as power series
        num, den, term, n = 1.0, 1.0, 1.0, 1
        while term > 1e-18:
            term *= x / (n + 1)
            den += term
            num += 2.0 * term / (n + 2)
            n += 1
        return num / den
    return (1.0 - _x_over_expm1(x)) / (0.5 * x)


# -- Gaussian-like family ---------------------------------------------------

@dataclass(frozen=True)
class GaussianFamily:
    """B(t) = mu [erf(nu (t - t_center)) + erf(nu t_center)] / 2."""

    mu: float
    nu: float
    t_center: float = 0.0

    def __post_init__(self):
        if self.mu == 0.0:
            raise ValueError("mu must be nonzero")
        if not self.nu > 0.0:
            raise ValueError("nu must be positive")

    @property
    def B_final(self) -> float:
        return 0.5 * self.mu * (1.0 + math.erf(self.nu * self.t_center))


def gaussian_envelope(fam: GaussianFamily) -> EnvelopeSpec:
    mu, nu, tc = fam.mu, fam.nu, fam.t_center
    amp = mu * nu / SQRT_PI
    off = math.erfc(nu * tc)

    def beta(t):
        tau = t - tc
        return amp * math.exp(-(nu * tau) ** 2)

    def beta_dot(t):
        tau = t - tc
        return -2.0 * nu * nu * tau * amp * math.exp(-(nu * tau) ** 2)

    def B(t):
        # erf(nu tau) + erf(nu tc) written with erfc to keep B(0) = 0 exact
        return 0.5 * mu * (math.erfc(nu * (tc - t)) - off)

    return EnvelopeSpec(beta, beta_dot, B, name="gaussian",
                        params={"mu": mu, "nu": nu, "t0": tc})


def gaussian_chi_of_B(sign: float = 1.0) -> ChiOfB:
    """chi(B) = -acos(exp(-2 B^2)) / 2, with derivatives in cancellation-free form.

    ``sign`` is the sign of B on the branch in use; it only matters at B = 0
    where chi'(B) jumps from +1 to -1.
    """

    def chi(B):
        a = abs(B)
        if a < 1e-5:
            return -(a - a ** 3 / 3.0)
        return -0.5 * math.atan2(math.sqrt(-math.expm1(-4.0 * B * B)), math.exp(-2.0 * B * B))

    def d1(B):
        s = math.copysign(1.0, B) if B != 0.0 else sign
        return -s * math.sqrt(_x_over_expm1(4.0 * B * B))

    def d2(B):
        x = 4.0 * B * B
        den = -math.expm1(-x) / x if x > 0.0 else 1.0
        return 2.0 * abs(B) * _exp_tail_ratio(x) * math.exp(-0.5 * x) / den ** 1.5

    def root_gap(B):
        x = 4.0 * B * B
        return math.sqrt(2.0) * abs(B) * math.sqrt(_gap_ratio(x))

    return ChiOfB(chi, d1, d2, root_gap)


def gaussian_chi(fam: GaussianFamily, env: EnvelopeSpec | None = None) -> ChiAnsatz:
    """chi = -acos(exp(-2 B(t)^2))/2 lifted onto ``env`` (the erf envelope by default)."""
    env = gaussian_envelope(fam) if env is None else env
    sign = math.copysign(1.0, fam.mu)
    return ChiAnsatz.lifted(gaussian_chi_of_B(sign), env, int(sign), name="gaussian",
                            params={"mu": fam.mu, "nu": fam.nu, "t0": fam.t_center})


# -- polynomial family --------------------------------------------------------

@dataclass(frozen=True)
class PolyFamily:
    """chi = -x [1 + (a_2 x)^2 + ... + (a_k x)^k]^(-1/k).

    With ``variable="B"`` x is B(t) and a_j has units 1/rad; with
    ``variable="t"`` x is beta0 t (constant drive only) and a_j has units
    1/time, so a_j/beta0 multiplies B.
    """

    k: int
    a: tuple[float, ...]
    beta0: float = 1.0
    variable: str = "B"

    def __post_init__(self):
        object.__setattr__(self, "a", tuple(float(v) for v in self.a))
        if self.k < 2 or self.k % 2:
            raise ValueError("k must be a positive even integer")
        if len(self.a) != self.k // 2:
            raise ValueError(f"expected {self.k // 2} coefficients a_2..a_k")
        if self.a[-1] < 0.0:
            raise ValueError("a_k must be non-negative")
        if self.variable not in ("B", "t"):
            raise ValueError("variable must be 'B' or 't'")

    @property
    def coefficients_B(self) -> tuple[float, ...]:
        if self.variable == "t":
            return tuple(v / self.beta0 for v in self.a)
        return self.a

    @classmethod
    def hadamard(cls, k: int = 6, beta0: float = 1.0, variable: str = "B") -> PolyFamily:
        """Only a_k nonzero, chosen so that chi -> -pi/4."""
        ak = 4.0 / math.pi if variable == "B" else 4.0 * beta0 / math.pi
        return cls(k, (0.0,) * (k // 2 - 1) + (ak,), beta0, variable)


def poly_chi_of_B(k: int, coeffs) -> ChiOfB:
    js = np.arange(2, k + 1, 2)
    cs = np.asarray(coeffs, dtype=float)
    w_p = 1.0 - js / k
    c_s = 1.0 + 1.0 / k

    log_w = np.full(js.shape, -math.inf)
    np.log(w_p, out=log_w, where=w_p > 0.0)

    def _logs(B):
        # j log|a_j B| per term; sums are formed in log space so large k and B cannot overflow
        with np.errstate(divide="ignore"):
            return js * np.log(np.abs(cs * B))

    def _log1p_sum(l):
        m = l.max()
        if m == -math.inf:
            return 0.0
        return float(np.logaddexp(0.0, m + math.log(np.exp(l - m).sum())))

    def _L(B):
        l = _logs(B)
        return _log1p_sum(l + log_w) - c_s * _log1p_sum(l)

    def chi(B):
        return -B * math.exp(-_log1p_sum(_logs(B)) / k)

    def d1(B):
        return -math.exp(_L(B))

    def d2(B):
        if B == 0.0:
            return 0.0
        l = _logs(B)
        ls, lp = _log1p_sum(l), _log1p_sum(l + log_w)
        # B ds/dB = sum j (a_j B)^j, likewise for p
        dL = (float((js * np.exp(l + log_w - lp)).sum())
              - c_s * float((js * np.exp(l - ls)).sum())) / B
        return -math.exp(lp - c_s * ls) * dL

    def root_gap(B):
        return math.sqrt(max(-math.expm1(2.0 * _L(B)), 0.0))

    return ChiOfB(chi, d1, d2, root_gap)


def poly_chi(fam: PolyFamily, env: EnvelopeSpec | None = None) -> ChiAnsatz:
    if env is None:
        env = EnvelopeSpec.constant(fam.beta0)
    if fam.variable == "t" and env.name != "constant":
        raise ValueError("the time-variable polynomial family needs a constant envelope")
    params = {"k": float(fam.k), "beta0": fam.beta0}
    params.update({f"a{2 * (i + 1)}": v for i, v in enumerate(fam.a)})
    return ChiAnsatz.lifted(poly_chi_of_B(fam.k, fam.coefficients_B), env, 1,
                            name="poly", params=params)


def lift_constant_beta(chi0: ChiAnsatz, env: EnvelopeSpec, beta0: float = 1.0) -> ChiAnsatz:
    """chi(t) = chi0(B(t)/beta0) for a chi0 built for the constant drive beta0.

    |chi_dot| = |beta chi0'(B/beta0)/beta0| <= |beta| follows from the QSL bound
    on chi0, so the lifted ansatz is valid for any envelope.
    """
    if chi0.of_B is not None:
        of_B = chi0.of_B
    else:
        of_B = ChiOfB(
            lambda B: chi0.chi(B / beta0),
            lambda B: chi0.chi_dot(B / beta0) / beta0,
            lambda B: chi0.chi_ddot(B / beta0) / beta0 ** 2,
        )
    return ChiAnsatz.lifted(of_B, env, chi0.eta, params=dict(chi0.params),
                            name=chi0.name + "-lifted")


# -- LMSZ cubic family --------------------------------------------------------

@dataclass(frozen=True)
class CubicFamily:
    """chi = bx t - (a bx T/2) t^2 + (a bx/3) t^3 for a sweep of duration T."""

    a: float
    bx: float
    T: float

    def __post_init__(self):
        if not (self.bx > 0.0 and self.T > 0.0):
            raise ValueError("bx and T must be positive")
        a_max = 16.0 / (3.0 * self.T ** 2)
        if self.a < 0.0 or self.a > a_max * (1.0 + 1e-12):
            raise OutOfBounds(f"a = {self.a:.6g} outside [0, 16/(3T^2) = {a_max:.6g}]")

    @property
    def chi_T(self) -> float:
        return self.bx * self.T * (1.0 - self.a * self.T ** 2 / 6.0)

    @classmethod
    def for_target(cls, chi_T: float, bx: float, T: float) -> CubicFamily:
        return cls(solve_sweep_rate(chi_T, bx, T), bx, T)


def solve_sweep_rate(chi_T: float, bx: float, T: float) -> float:
    """a(T) = 6 (bx T - chi_T) / (bx T^3), the rate hitting chi(T) = chi_T.

    Accepts exactly chi_T <= bx T <= 9 chi_T, i.e. 0 <= a <= 16/(3 T^2).
    """
    if not 0.0 < chi_T <= math.pi / 2.0 * (1.0 + 1e-15):
        raise ValueError("chi_T must lie in (0, pi/2]")
    if not (bx > 0.0 and T > 0.0):
        raise ValueError("bx and T must be positive")
    x = bx * T
    tol = 1e-12 * chi_T
    if x < chi_T - tol:
        raise OutOfBounds(f"bx T = {x:.12g} < chi_T = {chi_T:.12g}: below the quantum speed limit")
    if x > 9.0 * chi_T + 9.0 * tol:
        raise OutOfBounds(f"bx T = {x:.12g} > 9 chi_T = {9 * chi_T:.12g}: a would exceed 16/(3T^2)")
    a = 6.0 * (x - chi_T) / (bx * T ** 3)
    return min(max(a, 0.0), 16.0 / (3.0 * T * T))


def cubic_chi(fam: CubicFamily) -> ChiAnsatz:
    a, bx, T = fam.a, fam.bx, fam.T
    c2 = -0.5 * a * bx * T
    c3 = a * bx / 3.0

    def chi(t):
        return t * (bx + t * (c2 + t * c3))

    def chi_dot(t):
        return bx + t * (2.0 * c2 + 3.0 * c3 * t)

    def chi_ddot(t):
        return 2.0 * c2 + 6.0 * c3 * t

    sing = (0.0, T) if a > 0.0 else ()
    return ChiAnsatz(chi, chi_dot, chi_ddot, -1, params={"a": a, "bx": bx, "T": T},
                     singular_times=sing, name="cubic")


def cubic_envelope(fam: CubicFamily) -> EnvelopeSpec:
    return EnvelopeSpec.constant(fam.bx)


# -- Hadamard design ------------------------------------------------------------

@dataclass(frozen=True)
class HadamardDesign:
    T: float
    fields: DrivingFields
    propagator: Propagator
    phase: float
    chi: ChiAnsatz = field(repr=False)
    env: EnvelopeSpec = field(repr=False)


def _qsl_time(env: EnvelopeSpec, target: float) -> float:
    from .interferometry import qsl_time

    return qsl_time(env, target)


def design_hadamard(fam: PolyFamily, env: EnvelopeSpec | None = None,
                    samples: int = 201, horizon: float = 20.0) -> HadamardDesign:
    """Pick the duration T at which the accumulated phase integral reaches -5 pi/4.

    With a_k = 4/pi the magnitudes |u11|, |u21| settle at 1/sqrt(2), and at that
    phase the propagator equals the Hadamard gate up to a global phase.
    """
    if env is None:
        env = EnvelopeSpec.constant(fam.beta0)
    if abs(env.phi(0.0)) > 0.0 or env.phi_dot(0.0) != 0.0:
        raise ValueError("the Hadamard design assumes phi = 0")
    target_ak = 4.0 / math.pi if fam.variable == "B" else 4.0 * fam.beta0 / math.pi
    if not math.isclose(fam.a[-1], target_ak, rel_tol=1e-12):
        raise ValueError(f"a_k must be {target_ak:.12g} for the Hadamard design")
    chi = poly_chi(fam, env)
    t_qsl = _qsl_time(env, math.pi / 4.0)

    # bracket on a coarse scan; the phase integral is asymptotically linear in B
    ts = np.linspace(t_qsl, horizon * t_qsl, 400)
    values = phase_integral(chi, env, ts) - HADAMARD_PHASE
    idx = np.nonzero(np.sign(values[:-1]) != np.sign(values[1:]))[0]
    if idx.size == 0:
        raise RootNotBracketed("phase integral never reaches -5 pi/4 within the horizon")
    lo, hi = float(ts[idx[0]]), float(ts[idx[0] + 1])
    T = brentq(lambda T: float(phase_integral(chi, env, [T])[0]) - HADAMARD_PHASE,
               lo, hi, xtol=1e-13, rtol=1e-14)
    phase = float(phase_integral(chi, env, [T])[0])
    grid = TimeGrid.linspace(0.0, T, samples)
    fields = synthesize_fields(chi, env, grid)
    return HadamardDesign(T, fields, evolution(chi, env, T), phase, chi, env)
