"""Sparse-input SVAR estimation, simulation, metrics, and ingestion."""

from .core import (
    CyclicGraph,
    NonFinite,
    PastTensor,
    ShockTensor,
    SingularSystem,
    TimeSeriesTensor,
    WindowGraph,
    build_past_embedding,
    is_acyclic_exact,
    rollout,
    stability_margin,
    svar_residual,
)
from .estimate import (
    DegenerateResidual,
    EstimateReport,
    ExpmOverflow,
    FitConfig,
    FitTimeout,
    NonFiniteLoss,
    SingularLogDet,
    acyclicity_h,
    estimate_beta,
    fit,
    gradient,
    matrix_exponential,
    objective,
    preset,
    recover_shocks,
    threshold_graph,
)
from .ingest import (
    IngestError,
    MissingCell,
    NonPositivePrice,
    PricePanel,
    UnsortedDates,
    WindowTooLong,
    load_price_csv,
    log_returns,
    windowize,
)
from .metrics import (
    GraphScore,
    ShockScore,
    alignment_fraction,
    auroc,
    nmse,
    prf1,
    score_graph,
    score_shocks,
    shd,
    shock_nmse,
    shock_shd,
)
from .simulate import (
    GraphSpec,
    RejectionBudgetExhausted,
    ShockSpec,
    generate_dataset,
    laplace_tail_fraction,
    sample_shocks,
    sample_window_graph,
)

__version__ = "0.1.0"
