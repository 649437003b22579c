"""Wave-function dynamics of driven atomic qubits conditioned on no decay.

The package covers three routes to the same physics and the glue between
them:

* deterministic propagation of the nonlinear conditioned evolution (norm
  preserving) and of its linear no-jump counterpart,
* decay-event statistics (no-decay probability, first-event channel
  probabilities) integrated alongside the conditioned state,
* a stochastic-trajectory engine with jump collapse and imperfect decay
  monitoring, plus gate-level analysis (difference curves, endpoint checks,
  phase-compensated CZ fidelity, decay-rate scans).

All frequencies are angular (rad/us), all times are microseconds; configs
and preset tables quote MHz and convert at the boundary.
"""

from .analysis import (
    ComparisonCurves,
    EndpointReport,
    GateErrorGrid,
    compare_evolutions,
    cz_fidelity,
    endpoint_vanishing_check,
    gamma_scan,
    scale_decay,
)
from .dynamics import (
    DecayChannel,
    DriveEntry,
    ModelSpec,
    basis_state,
    decay_diagonal,
    effective_rhs,
    hamiltonian,
    renorm_scalar,
    second_rhs,
    state_vector,
    unitary_rhs,
)
from .errors import (
    ConfigError,
    EmptyEnsembleError,
    IntegrationError,
    NumericalDomainError,
)
from .integrate import IntegrationConfig, Trajectory, integrate
from .mcwf import (
    DetectorModel,
    EndPostselect,
    EnsembleStats,
    JumpEvent,
    StepResult,
    TrajectoryOutcome,
    collapse_after_jump,
    phase_of,
    run_ensemble,
    run_trajectory,
    step_trajectory,
    wrap_angle,
)
from .models import (
    RamanParams,
    RydbergCZParams,
    TwoLevelParams,
    cz_params,
    cz_single_body_model,
    cz_two_body_model,
    preset_model,
    raman_model,
    raman_phase_model,
    raman_pi2_model,
    readout_model,
    two_level_model,
)
from .stats import (
    DecayStatistics,
    decay_statistics,
    first_event_channel_probability,
    no_decay_probability,
    norm_squared_oracle,
)
from .waveform import Waveform, constant, constant_mhz, endpoint_residual, eval_waveform, fourier, mhz

__version__ = "0.1.0"

__all__ = [
    "ComparisonCurves", "EndpointReport", "GateErrorGrid", "compare_evolutions",
    "cz_fidelity", "endpoint_vanishing_check", "gamma_scan", "scale_decay",
    "DecayChannel", "DriveEntry", "ModelSpec", "basis_state", "decay_diagonal",
    "effective_rhs", "hamiltonian", "renorm_scalar", "second_rhs", "state_vector",
    "unitary_rhs",
    "ConfigError", "EmptyEnsembleError", "IntegrationError", "NumericalDomainError",
    "IntegrationConfig", "Trajectory", "integrate",
    "DetectorModel", "EndPostselect", "EnsembleStats", "JumpEvent", "StepResult",
    "TrajectoryOutcome", "collapse_after_jump", "phase_of", "run_ensemble",
    "run_trajectory", "step_trajectory", "wrap_angle",
    "RamanParams", "RydbergCZParams", "TwoLevelParams", "cz_params",
    "cz_single_body_model", "cz_two_body_model", "preset_model", "raman_model",
    "raman_phase_model", "raman_pi2_model", "readout_model", "two_level_model",
    "DecayStatistics", "decay_statistics", "first_event_channel_probability",
    "no_decay_probability", "norm_squared_oracle",
    "Waveform", "constant", "constant_mhz", "endpoint_residual", "eval_waveform",
    "fourier", "mhz",
]
