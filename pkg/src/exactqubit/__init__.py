"""Exactly solvable driven two-level systems, pulse design and LMSZ interferometry."""

from .core import (
    DrivingFields,
    EndpointCondition,
    ExactQubitError,
    GridMismatch,
    OutOfBounds,
    PhaseSet,
    Propagator,
    QuadratureFailure,
    RootNotBracketed,
    SingularIntegrand,
    StepFailure,
    TimeGrid,
    Unreachable,
    compose,
    frobenius_distance,
    gate_fidelity,
    hadamard,
    identity,
    x_rotation,
    z_rotation,
)
from .families import (
    CubicFamily,
    GaussianFamily,
    HadamardDesign,
    PolyFamily,
    cubic_chi,
    cubic_envelope,
    design_hadamard,
    gaussian_chi,
    gaussian_envelope,
    lift_constant_beta,
    poly_chi,
    solve_sweep_rate,
)
from .interferometry import (
    FringePoint,
    FringeScan,
    SweepResult,
    avg_probability,
    brute_force_average,
    composed_period_evolution,
    fringe_peaks,
    fringe_scan,
    narp_probability,
    period_evolution,
    qsl_time,
    time_avg_p2,
)
from .oracle import (
    FieldFunctions,
    IntegratorConfig,
    Trajectory,
    analytic_trajectory,
    compare,
    integrate_lab,
    integrate_rotating,
    oracle_period,
    oracle_propagator,
    verify,
)
from .solver import (
    ChiAnsatz,
    ChiOfB,
    EnvelopeSpec,
    KappaPath,
    QSLViolation,
    ValidationReport,
    evolution,
    evolution_trace,
    kappa_path,
    saturating_chi,
    synthesize_bz,
    synthesize_fields,
    validate,
    xi_of_B,
    xi_phases,
    zero_chi,
)

__version__ = "0.1.0"
