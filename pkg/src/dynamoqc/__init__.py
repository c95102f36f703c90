"""dynamoqc: quality control for dynamic phosphorus MRS exercise protocols."""

__version__ = "0.1.0"

from .acquisition import (  # noqa: F401
    AcquisitionHeader,
    BasisModel,
    BasisPeak,
    DynamicSeries,
    FidFrame,
    Phase,
    ProtocolTiming,
    load_series,
    phase_of_frame,
    save_series,
)
from .errors import (  # noqa: F401
    ConfigError,
    ConflictError,
    ContainerError,
    DegenerateInputError,
    DomainError,
    DynamoQcError,
    FitError,
    NotFoundError,
    ValidationError,
)
from .kinetics import (  # noqa: F401
    KineticsResult,
    MonoExpFit,
    extract_kinetics,
    fit_monoexp,
    pcr_depletion,
    ph_from_shift,
    shift_from_ph,
)
from .qcs import (  # noqa: F401
    Criterion,
    CriterionViolation,
    QcsOutcome,
    ReselectionAnalysis,
    Verdict,
    WeightTable,
    compute_qcs,
    derivative_outliers,
    evaluate_criteria,
    reselect_recovery_start,
)
from .quantifier import (  # noqa: F401
    FitOptions,
    FrameQuant,
    SpectralIndicators,
    apodize,
    auto_phase,
    fit_frame,
    quantify_series,
    snr_fwhm,
)
from .synthgen import (  # noqa: F401
    CorruptionEvent,
    CorruptionKind,
    GroundTruth,
    synthesize,
    synthesize_to_file,
    truth_timecourse,
)
