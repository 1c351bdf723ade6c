"""smestab: simulation, analysis, and stabilization of continuously
monitored open quantum systems.

The package covers the conditioned-state diffusion and its deterministic
mean evolution, linear unravelings, block-algebraic invariance and
stabilizability analysis, open-loop Hamiltonian synthesis, and a hysteresis
switching feedback law, with Monte Carlo verification utilities and a CLI.
"""

__version__ = "0.1.0"

from .control import (
    BandEntry,
    ConstantController,
    ContinuousController,
    Region,
    SwitchingController,
    SwitchingState,
    constant_controller,
    continuous_law,
    reduced_law,
    switching_controller,
)
from .core import (
    Decomposition,
    Operator,
    QuantumState,
    ValidationReport,
    block,
    project_to_physical,
    projector,
    validate_state,
)
from .diagnostics import (
    StabilizationVerdict,
    V1,
    V2,
    chi_estimate,
    set_distance_proxy,
    stabilization_report,
)
from .invariance import (
    EscapeConditionsReport,
    InvarianceReport,
    Stabilizability,
    StationaryReport,
    check_R_not_invariant,
    check_invariant,
    deterministic_invariance,
    escape_conditions,
    liouvillian_matrix,
    observability_escape,
    openloop_stabilizable,
    stationary_support,
)
from .sim import (
    EnsembleStats,
    NoisePath,
    Trajectory,
    ZakaiResult,
    propagate_me,
    run_ensemble,
    simulate_deterministic,
    simulate_sme,
    simulate_vector,
    simulate_zakai,
    wtilde_increments,
    zakai_driving_record,
)
from .superop import (
    ControlModel,
    diffusion,
    dissipator,
    generator_linear,
    generator_quadratic_fidelity,
    hamiltonian_part,
    ito_drift_matrix,
    lindblad_rhs,
    sme_diffusion,
    sme_drift,
    stratonovich_drift_matrix,
)
from .synthesis import (
    SynthesisStep,
    SynthesisTrace,
    SynthesisVerification,
    check_feedback_assumptions,
    design_procedure,
    enforce_invariance,
    random_hamiltonian_fallback,
    synthesize_open_loop,
    verify_synthesis,
)
