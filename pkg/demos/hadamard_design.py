"""Designing a Hadamard gate from a polynomial chi.

With only a_k nonzero and a_k = 4/pi, chi settles at -pi/4, which is the
magnitude condition |u11| = |u21|.  The duration is then tuned until the
accumulated phase satisfies the Hadamard condition.  The drive oscillates,
beta = beta0 (1 + sin^2(2 beta0 t)/2).
"""

from exactqubit import (
    EnvelopeSpec,
    FieldFunctions,
    PolyFamily,
    TimeGrid,
    design_hadamard,
    gate_fidelity,
    hadamard,
    integrate_lab,
)

env = EnvelopeSpec.oscillating(1.0)
d = design_hadamard(PolyFamily.hadamard(6), env)
print(f"gate time T = {d.T:.6f} / beta0")
print(f"phase at T  = {d.phase:.9f}")
print(f"analytic fidelity  = {gate_fidelity(d.propagator, hadamard()):.12f}")

# the same fields, integrated numerically, must give the same gate
u = integrate_lab(FieldFunctions.from_solution(d.chi, d.env, d.T),
                  TimeGrid.linspace(0.0, d.T, 2)).propagators[-1]
print(f"numerical fidelity = {gate_fidelity(u, hadamard()):.12f}")

# larger k pushes chi to -pi/4 faster; the extra time is spent winding the phase
env1 = EnvelopeSpec.constant(1.0)
for k in (6, 12, 24):
    dk = design_hadamard(PolyFamily.hadamard(k), env1)
    print(f"k={k:3d}  constant drive  T={dk.T:.5f}")
