"""Edge predictive filtering: LSTM forecaster, send-on-prediction-error
filter with cloud reconstruction, and scenario evaluation."""

from ._predfilter import (
    InputError,
    NumericalError,
    SyncError,
    ModelWeights,
    SeriesFrame,
    data_reduction,
    fit_norm,
    mae,
    make_frame,
    parse_csv,
    random_weights,
    render_table,
    resample,
    run_scenario,
    run_session,
    train_model,
)

__all__ = [
    "InputError",
    "NumericalError",
    "SyncError",
    "ModelWeights",
    "SeriesFrame",
    "data_reduction",
    "fit_norm",
    "mae",
    "make_frame",
    "parse_csv",
    "random_weights",
    "render_table",
    "resample",
    "run_scenario",
    "run_session",
    "train_model",
]
