"""Single-atom microwave-to-optical conversion: dynamics, pulse optimization, rates."""

__version__ = "0.1.0"

from .model import (
    TWO_PI_MHZ,
    DETUNING_CAP,
    CycleName,
    CycleSpec,
    JointBasis,
    JointState,
    Sink,
    build_cycle,
    cycle_from_file,
    enumerate_basis,
)
from .pulses import (
    GaussianEnvelope,
    PiecewiseEnvelope,
    ProtocolSchedule,
    ScheduleTemplate,
    load_schedule,
    save_schedule,
)
from .dynamics import (
    DensityMatrix,
    IntegrationError,
    Trajectory,
    evolve,
    simulate_success,
    success_probability,
)
from .optimizer import (
    SimplexConfig,
    cached_scan_points,
    constant_drive_baseline,
    loss_vs_duration_scan,
    nelder_mead,
    optimize_joint,
    optimize_protocol,
    optimize_segment,
    robustness_study,
)
from .channel import (
    QubitState,
    apply_channel,
    capacity,
    coherent_information,
    coherent_information_direct,
    comm_rate,
    rate_scan,
)

__all__ = [
    "TWO_PI_MHZ",
    "DETUNING_CAP",
    "CycleName",
    "CycleSpec",
    "JointBasis",
    "JointState",
    "Sink",
    "build_cycle",
    "cycle_from_file",
    "enumerate_basis",
    "GaussianEnvelope",
    "PiecewiseEnvelope",
    "ProtocolSchedule",
    "ScheduleTemplate",
    "load_schedule",
    "save_schedule",
    "DensityMatrix",
    "IntegrationError",
    "Trajectory",
    "evolve",
    "simulate_success",
    "success_probability",
    "SimplexConfig",
    "constant_drive_baseline",
    "cached_scan_points",
    "loss_vs_duration_scan",
    "optimize_joint",
    "nelder_mead",
    "optimize_protocol",
    "optimize_segment",
    "robustness_study",
    "QubitState",
    "apply_channel",
    "capacity",
    "coherent_information",
    "coherent_information_direct",
    "comm_rate",
    "rate_scan",
]
