"""Shared value types: time grids, SU(2) propagators, phases and field samples.

A propagator is stored through its first column only::

    U = [[u11, -conj(u21)],
         [u21,  conj(u11)]],   |u11|^2 + |u21|^2 = 1

and the second column is always rebuilt from that symmetry.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import InitVar, dataclass, field

import numpy as np

UNITARITY_TOL = 1e-10


class ExactQubitError(Exception):
    """Base class for all package errors."""


class QuadratureFailure(ExactQubitError):
    pass


class SingularIntegrand(ExactQubitError):
    pass


class RootNotBracketed(ExactQubitError):
    pass


class OutOfBounds(ExactQubitError):
    pass


class Unreachable(ExactQubitError):
    pass


class EndpointCondition(ExactQubitError):
    pass


class StepFailure(ExactQubitError):
    pass


class GridMismatch(ExactQubitError):
    pass


@dataclass(frozen=True)
class TimeGrid:
    t0: float
    t_end: float
    samples: np.ndarray = field(repr=False)

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float)
        if s.ndim != 1 or s.size < 2:
            raise ValueError("a time grid needs at least 2 samples")
        if not np.all(np.diff(s) > 0):
            raise ValueError("grid samples must be strictly increasing")
        if s[0] != self.t0 or s[-1] != self.t_end:
            raise ValueError("grid must start at t0 and end at t_end")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)

    @classmethod
    def linspace(cls, t0: float, t_end: float, n: int) -> TimeGrid:
        s = np.linspace(t0, t_end, n)
        s[0], s[-1] = t0, t_end
        return cls(float(t0), float(t_end), s)

    @classmethod
    def from_samples(cls, samples) -> TimeGrid:
        s = np.asarray(samples, dtype=float)
        return cls(float(s[0]), float(s[-1]), s)

    def __len__(self) -> int:
        return self.samples.size

    def __iter__(self):
        return iter(self.samples.tolist())

    @property
    def span(self) -> float:
        return self.t_end - self.t0


@dataclass(frozen=True)
class Propagator:
    """An SU(2) evolution operator given by its first column (u11, u21)."""

    u11: complex
    u21: complex
    check: InitVar[bool] = True

    def __post_init__(self, check):
        object.__setattr__(self, "u11", complex(self.u11))
        object.__setattr__(self, "u21", complex(self.u21))
        if check and self.unitarity_drift > UNITARITY_TOL:
            raise ValueError(
                f"|u11|^2+|u21|^2 deviates from 1 by {self.unitarity_drift:.3g}"
            )

    @property
    def unitarity_drift(self) -> float:
        return abs(abs(self.u11) ** 2 + abs(self.u21) ** 2 - 1.0)

    @property
    def u12(self) -> complex:
        return -self.u21.conjugate()

    @property
    def u22(self) -> complex:
        return self.u11.conjugate()

    def matrix(self) -> np.ndarray:
        return np.array([[self.u11, self.u12], [self.u21, self.u22]])

    @classmethod
    def from_matrix(cls, m, check: bool = True) -> Propagator:
        m = np.asarray(m, dtype=complex)
        det = np.linalg.det(m)
        if abs(abs(det) - 1.0) > 1e-8:
            raise ValueError("matrix is not unitary")
        # strip the U(1) part so that the result lies in SU(2)
        m = m / cmath.sqrt(det)
        return cls(m[0, 0], m[1, 0], check)

    def dagger(self) -> Propagator:
        # inverse of [[a, -b*], [b, a*]] is [[a*, b*], [-b, a]]
        return Propagator(self.u11.conjugate(), -self.u21, check=False)

    def transpose(self) -> Propagator:
        return Propagator(self.u11, -self.u21.conjugate(), check=False)

    def apply(self, psi) -> np.ndarray:
        return self.matrix() @ np.asarray(psi, dtype=complex)

    def __matmul__(self, other: Propagator) -> Propagator:
        return compose(self, other)


@dataclass(frozen=True)
class PhaseSet:
    """Accumulated (unwrapped) phases of the exact propagator."""

    xi_minus: float
    xi_plus: float
    xi_zero: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "xi_zero", 0.5 * (self.xi_plus + self.xi_minus))


@dataclass(frozen=True)
class DrivingFields:
    times: np.ndarray
    bx: np.ndarray
    by: np.ndarray
    bz: np.ndarray

    def __post_init__(self):
        arrays = [np.asarray(getattr(self, k), dtype=float) for k in ("times", "bx", "by", "bz")]
        if len({a.shape for a in arrays}) != 1:
            raise ValueError("field arrays must share one shape")
        for name, a in zip(("times", "bx", "by", "bz"), arrays):
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    def beta(self) -> np.ndarray:
        return np.hypot(self.bx, self.by)

    def __len__(self) -> int:
        return self.times.size


def identity() -> Propagator:
    return Propagator(1.0, 0.0)


def x_rotation(theta: float) -> Propagator:
    """exp(-i theta sigma_x)."""
    return Propagator(math.cos(theta), -1j * math.sin(theta))


def z_rotation(theta: float) -> Propagator:
    """exp(-i theta sigma_z)."""
    return Propagator(cmath.exp(-1j * theta), 0.0)


def hadamard() -> Propagator:
    """(sigma_x + sigma_z)/sqrt(2), a pi-rotation about x+z, brought into SU(2)."""
    h = np.array([[1.0, 1.0], [1.0, -1.0]]) / math.sqrt(2.0)
    return Propagator.from_matrix(h)


def compose(left: Propagator, right: Propagator) -> Propagator:
    """Matrix product left @ right, kept in the (u11, u21) form."""
    a, b = left.u11, left.u21
    c, d = right.u11, right.u21
    u11 = a * c - b.conjugate() * d
    u21 = b * c + a.conjugate() * d
    return Propagator(u11, u21, check=False)


def _as_matrix(u) -> np.ndarray:
    return u.matrix() if isinstance(u, Propagator) else np.asarray(u, dtype=complex)


def gate_fidelity(a, b) -> float:
    """|tr(a^dagger b)|/2, insensitive to a global phase.

    Accepts propagators or plain 2x2 unitaries (a global phase other than
    +-1 takes a matrix out of the (u11, u21) form).
    """
    tr = np.trace(_as_matrix(a).conj().T @ _as_matrix(b))
    return min(1.0, abs(tr) / 2.0)


def frobenius_distance(a: Propagator, b: Propagator) -> float:
    return math.sqrt(2.0 * (abs(a.u11 - b.u11) ** 2 + abs(a.u21 - b.u21) ** 2))
