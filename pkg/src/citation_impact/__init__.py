"""Long-term citation impact: model, simulation, fitting and forecasting."""

__version__ = "0.1.0"

from .analytics import (
    FixedEarly,
    FixedLambda,
    IfWindow,
    JournalProfile,
    aggregate_journal,
    cohort_convergence,
    impact_factor,
    impact_factor_from,
    param_distribution,
    weighted_ks,
)
from .baselines import BaselineParams, baseline_curve, lognormal_equivalence_lambda
from .core import (
    DAYS_PER_YEAR,
    CitationHistory,
    GlobalConstants,
    WsbParams,
    aging_density,
    citation_rate,
    collapse_dispersion,
    cumulative_citations,
    impact_time,
    observation_grid,
    phi,
    rescale,
    ultimate_impact,
)
from .exceptions import (
    CitationImpactError,
    Degenerate,
    DegenerateSpan,
    EmptySelection,
    FitError,
    InsufficientData,
    NonConvergence,
    ParseError,
    TooFewPapers,
    UndefinedSigma,
    ValidationError,
)
from .fitting import MODEL_KINDS, CitationCurveRegressor, FitResult, fit_baseline, fit_model, fit_wsb
from .forecast import (
    CitationForecaster,
    PredictionEnvelope,
    ZScoreReport,
    cohort_accuracy,
    forecast_cohort,
    predict,
    z_score,
)
from .generator import GeneratorSpec, generate, generate_cohort, uniform_sampler
from .io import Dataset, RunConfig, load_dataset, save_dataset

__all__ = [name for name in dir() if not name.startswith("_")]
