"""Physics-informed modelling, segmentation and forecasting of hive temperature."""

from .baselines import BaselineId, BaselineModel, fit_baseline, predict_baseline
from .fitting import Degeneracy, FitResult, SearchSpace, fill_unidentified, fit_per_day, fit_segment
from .forecasting import ForecastRequest, ForecastResult, forecast, rmse, rolling_evaluation
from .ingest import ingest, write_sensor_csv
from .model import (
    MISSING,
    HiveDataset,
    HiveParams,
    HiveType,
    Integrator,
    ModelConfig,
    SignConvention,
    TemperatureSeries,
    adjunct_series,
    reconstruct,
    relative,
    step,
)
from .pipeline import RunConfig, load_config, run_pipeline
from .segmentation import LikelihoodSpec, SegmentationResult, aic, log_likelihood, segment
from .synthgen import ExtProfile, GroundTruth, ScenarioSpec, generate

__version__ = "0.1.0"
