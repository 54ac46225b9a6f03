"""Compressive-sensing harmonic state estimation for power networks.

Build per-order network models, design low-coherence monitor placements,
recover sparse harmonic injection vectors from few measurements, and
reconstruct bus voltages.
"""

from importlib import resources

from .analysis import (
    MatrixDiagnostics,
    SubsetBudgetError,
    coherence,
    diagnostics,
    nsp_coefficient,
    rip_constant,
    spark_exact,
    spark_lower_bound,
)
from .design import (
    DesignInfeasibleError,
    GaParams,
    SensingDesign,
    design_from_rows,
    design_objective,
    extract_monitors,
    ga_select_rows,
)
from .measurement import (
    CandidateMatrix,
    CorruptionSpec,
    InjectionScenario,
    MeasurementSet,
    RowTag,
    build_candidate_matrix,
    corrupt_matrix,
    make_injection_scenario,
    simulate_measurements,
    stack_real,
    unstack,
)
from .network import (
    Branch,
    Bus,
    CaseFormatError,
    CaseValidationError,
    Generator,
    HarmonicOrderModel,
    NetworkCase,
    SingularModelError,
    build_harmonic_model,
    load_case,
)
from .pipeline import (
    EvaluationReport,
    ExperimentResult,
    ExperimentSpec,
    HseEstimate,
    PipelineStageError,
    Truth,
    estimate,
    evaluate,
    reconstruct_voltages,
    run_experiment,
)
from .recovery import (
    InfeasibleProblemError,
    RecoveryResult,
    SolverConfig,
    bp_lp,
    bp_noisy,
    bpdn,
    cosamp,
    dantzig,
    iht,
    l0_oracle,
    lasso,
    omp,
)

__version__ = "0.1.0"


def bundled_case_path(name: str = "ieee118") -> str:
    """Filesystem path of a bundled case file ('ieee118' or 'tiny3')."""
    return str(resources.files("cshse").joinpath(f"data/{name}.json"))
