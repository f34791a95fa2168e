"""Time-optimal piecewise-constant pulses for two-level quantum systems.

The package solves minimum-time state transfers when the control must
stay constant over a fixed sampling period.  The extremal flow follows
an interval-averaged maximization rule, the unknown initial adjoint and
interval length are found by a damped-Newton shooting method, and the
continuous-limit references are closed form.  A fixed-time gradient
optimizer with an exact gradient covers the fidelity-maximization view
of the same problem.  The command-line front end lives in
``minpulse.cli``.
"""

__version__ = "0.1.0"

from .errors import (
    AllSeedsFailedError,
    DegenerateMomentsError,
    InsufficientDataError,
    InvalidTailError,
    MinpulseError,
    NoAlignedRootError,
    NoConvergenceError,
    NoRealRootError,
    StalledError,
    ZeroCouplingError,
    ZeroGeneratorError,
)
from .dynamics import (
    M_X,
    M_Y,
    M_Z,
    PAULI_X,
    PAULI_Y,
    PAULI_Z,
    LandauZener,
    OneControlDetuned,
    TwoControlResonant,
    bloch_vector,
    propagate,
    rotation_about_axis,
    rotation_axis,
    rotation_two_control,
    spinor_propagator,
)
from .pmp import (
    AngularMomentum,
    ExtremalTrajectory,
    LandauZenerFamily,
    MomentTriple,
    OneControlFamily,
    PiecewiseControl,
    TwoControlFamily,
    angular_momentum,
    extremal_amplitude_lz,
    extremal_amplitude_one_control,
    extremal_phase_two_control,
    gamma_lz,
    gamma_one_control,
    interval_moment_integrals,
    moments,
    propagate_extremal,
)
from .analytic import (
    TWO_CONTROL_TIME,
    ContinuousSolution,
    LinearDiscrete,
    SphereMap,
    SphereMapPoint,
    adjoint_sphere_map,
    linear_continuous,
    linear_discrete,
    linear_propagate,
    linear_state,
    lz_boundary_states,
    lz_continuous_reference,
    nmr_time,
    one_control_adjoint,
    one_control_continuous,
    sphere_curve,
    sphere_curve_theta,
    sphere_radius,
    two_control_adjoint,
    two_control_continuous,
    two_control_polar_angle,
    two_control_state,
)
from .shooting import (
    FreeTail,
    LockedGrid,
    ShootingProblem,
    ShootingResult,
    convergence_sweep,
    default_seeds,
    landau_zener_problem,
    multistart,
    one_control_problem,
    residual,
    solve,
    two_control_problem,
)
from .grape import (
    METHODS,
    AscentStep,
    GradientReport,
    GrapeProblem,
    OptimizeResult,
    TimeScanResult,
    TimeScanRow,
    fidelity,
    gradient,
    gradient_aux,
    gradient_pmp,
    gradient_split,
    optimize,
    quarter_turn_problem,
    time_scan,
)

__all__ = [name for name in dir() if not name.startswith("_")]
