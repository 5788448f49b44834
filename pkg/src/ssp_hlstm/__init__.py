"""Per-layer LSTM forecasting of full-depth sound speed profiles."""

from .baselines import (
    BpModel,
    MlpParams,
    PolyFit,
    bp_baseline_predict,
    bp_baseline_train,
    compare_methods,
    fit_polynomials,
    mean_baseline,
    poly_baseline,
)
from .errors import (
    InvalidInputError,
    ModelChecksumError,
    ModelFormatError,
    ModelShapeError,
    ModelTruncatedError,
    ModelVersionError,
    NumericInputError,
    SspError,
)
from .hierarchy import (
    ForecastReport,
    HierarchicalModel,
    forecast,
    load_model,
    model_from_bytes,
    model_to_bytes,
    predict_multi,
    predict_next,
    save_model,
    train_hierarchical,
    validate,
)
from .lstm import (
    ForwardCache,
    Gradients,
    LstmParams,
    LstmState,
    backward,
    cell_forward,
    gradient_check,
    init_params,
    predict_window,
    sequence_forward,
)
from .normalization import NormalizationParams, denormalize, fit_normalizer, normalize
from .profile import (
    DepthSample,
    LayeredSeries,
    LayerScheme,
    SchemeKind,
    SoundSpeedProfile,
    build_series,
    interpolate_full_depth,
    load_series,
    resample_profile,
)
from .training import Optimizer, TrainConfig, TrainingRun, make_windows, rmse, train_layer

__version__ = "0.1.0"
