"""Room temperature ensemble modelling: simulation, base models, ensembles and the experiment pipeline."""

from ._reem import (
    COMMANDS,
    BaseModel,
    ConfigError,
    ContractViolation,
    ExperimentConfig,
    FittingError,
    ModelLibrary,
    NumericError,
    PrerequisiteError,
    RoomDataset,
    RoomProfile,
    SimulationBlowUp,
    __version__,
    combine,
    compute_metrics,
    fit_dictionary,
    fit_mlr,
    format_iso8601,
    generate_room_dataset,
    heuristic_top_n,
    improvement_percent,
    parse_iso8601,
    run_command,
    sample_room_profile,
)
