"""Output-error prediction and regularized recursive least-squares training.

Training runs sequentially over the dataset (optionally several passes, with
the estimate and covariance carried across passes and the lag history reset),
feeding the predictor its own past outputs.  The report keeps the per-step
one-step-ahead errors and a rolling RMSE over a configurable window.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericalError
from .regressors import (LaggedHistory, RegressorSpec, Structure,
                         build_regressor, measured_columns, prediction_channel,
                         regressor_length, target_column, warmup)
from .simulator import TimeSeriesDataset

DEFAULT_RMSE_WINDOW = 2016  # samples; 7 days at 5-minute sampling


@dataclass(frozen=True)
class RlsConfig:
    """Forgetting factor, initial-covariance scale and initial estimate."""

    forgetting: float = 0.999
    reg_init: float = 1.0e3
    theta0: np.ndarray | None = None

    def __post_init__(self):
        if not (0.0 < self.forgetting <= 1.0):
            raise ConfigError("forgetting factor must be in (0, 1]")
        if self.reg_init <= 0.0:
            raise ConfigError("reg_init must be positive")


@dataclass
class RlsState:
    theta: np.ndarray
    p_matrix: np.ndarray
    forgetting: float
    k: int = 0


def rls_init(dim: int, cfg: RlsConfig | None = None) -> RlsState:
    cfg = cfg or RlsConfig()
    theta = np.zeros(dim) if cfg.theta0 is None else np.asarray(cfg.theta0, dtype=float).copy()
    if theta.shape != (dim,):
        raise ConfigError(f"theta0 has shape {theta.shape}, expected ({dim},)")
    return RlsState(theta=theta, p_matrix=cfg.reg_init * np.eye(dim),
                    forgetting=cfg.forgetting)


def rls_update(s: RlsState, phi: np.ndarray, y: float) -> RlsState:
    """Exponentially weighted RLS step; the covariance is re-symmetrized."""
    if phi.shape != s.theta.shape:
        raise ConfigError(f"phi has shape {phi.shape}, theta {s.theta.shape}")
    lam = s.forgetting
    p_phi = s.p_matrix @ phi
    gain = p_phi / (lam + phi @ p_phi)
    theta = s.theta + gain * (y - phi @ s.theta)
    p = (s.p_matrix - np.outer(gain, p_phi)) / lam
    p = 0.5 * (p + p.T)
    if not (np.all(np.isfinite(theta)) and np.all(np.isfinite(p))):
        raise NumericalError(f"RLS update produced non-finite values at step {s.k}")
    return RlsState(theta=theta, p_matrix=p, forgetting=lam, k=s.k + 1)


@dataclass
class TrainReport:
    spec: RegressorSpec
    theta: np.ndarray
    errors: np.ndarray        # one-step errors, concatenated across passes
    rolling_rmse: np.ndarray
    window: int
    pass_rmse: list[float]
    theta_w: np.ndarray | None = None  # RH predictor used by the FI zone model

    @property
    def final_rmse(self) -> float:
        return float(self.rolling_rmse[-1]) if len(self.rolling_rmse) else float("nan")

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("k,e,rolling_rmse\n")
            for k, (e, r) in enumerate(zip(self.errors, self.rolling_rmse)):
                fh.write(f"{k},{e:.9g},{r:.9g}\n")


def rolling_rmse(errors: np.ndarray, window: int) -> np.ndarray:
    if window < 2:
        raise ConfigError("rolling window must be at least 2")
    sq = np.concatenate(([0.0], np.cumsum(np.asarray(errors) ** 2)))
    n = len(errors)
    idx = np.arange(1, n + 1)
    lo = np.maximum(0, idx - window)
    return np.sqrt((sq[idx] - sq[lo]) / (idx - lo))


def _history_channels(spec: RegressorSpec, dataset: TimeSeriesDataset) -> list[str]:
    cols = measured_columns(spec.structure, spec.n_neighbors)
    missing = [c for c in cols if c not in dataset.columns]
    if missing:
        raise ConfigError(f"dataset lacks columns {missing} required by "
                          f"{spec.structure.value}")
    return cols


def _row(dataset: TimeSeriesDataset, cols: list[str], k: int) -> dict[str, float]:
    return {c: float(dataset.columns[c][k]) for c in cols}


def oe_predict(theta: np.ndarray, spec: RegressorSpec, hist: LaggedHistory,
               k: int) -> float:
    """One-step prediction phi(k)^T theta with output feedback from the
    stored prediction channel."""
    return float(build_regressor(spec, hist, k) @ theta)


def _needs_rh_feed(spec: RegressorSpec) -> bool:
    return spec.structure is Structure.NRM_FI_ZONE


def train(dataset: TimeSeriesDataset, spec: RegressorSpec, passes: int = 1,
          rls_cfg: RlsConfig | None = None, theta_w: np.ndarray | None = None,
          window: int = DEFAULT_RMSE_WINDOW) -> TrainReport:
    """Sequential RLS over the dataset, repeated ``passes`` times.

    The estimate and covariance carry across passes; the lag history is
    rebuilt each pass.  The first ``warmup`` samples of each pass use measured
    values in place of unavailable predictions and are excluded from the loss.
    The FI zone structure needs the RH predictor for its water channel; it is
    trained first on the same data unless ``theta_w`` is given.
    """
    if passes < 0:
        raise ConfigError("passes must be non-negative")
    cols = _history_channels(spec, dataset)
    dim = regressor_length(spec)
    state = rls_init(dim, rls_cfg)
    if passes == 0:
        return TrainReport(spec=spec, theta=state.theta, errors=np.empty(0),
                           rolling_rmse=np.empty(0), window=window, pass_rmse=[])

    rh_spec = None
    if _needs_rh_feed(spec):
        rh_spec = RegressorSpec(Structure.NRM_FI_RH, spec.n_neighbors)
        if theta_w is None:
            theta_w = train(dataset, rh_spec, passes, rls_cfg, window=window).theta

    y = dataset.columns[target_column(spec)]
    pred_chan = prediction_channel(spec)
    wu = warmup(spec)
    n = len(dataset)
    errors = []
    pass_rmse = []

    for _ in range(passes):
        hist = LaggedHistory(cols)
        pass_errors = []
        for k in range(n):
            yhat = None
            yhat_w = None
            if k >= wu:
                if rh_spec is not None:
                    yhat_w = oe_predict(theta_w, rh_spec, hist, k)
                phi = build_regressor(spec, hist, k)
                yhat = float(phi @ state.theta)
            hist.push(_row(dataset, cols, k))
            if yhat is not None:
                hist.record_prediction(pred_chan, k, yhat)
                if yhat_w is not None:
                    hist.record_prediction("yhat_w", k, yhat_w)
                e = float(y[k]) - yhat
                pass_errors.append(e)
                state = rls_update(state, phi, float(y[k]))
        errors.extend(pass_errors)
        pass_rmse.append(float(np.sqrt(np.mean(np.square(pass_errors)))))

    errors = np.asarray(errors)
    return TrainReport(spec=spec, theta=state.theta, errors=errors,
                       rolling_rmse=rolling_rmse(errors, window), window=window,
                       pass_rmse=pass_rmse, theta_w=theta_w)


def predict_series(theta: np.ndarray, spec: RegressorSpec,
                   dataset: TimeSeriesDataset,
                   theta_w: np.ndarray | None = None) -> np.ndarray:
    """One-step OE predictions over a dataset with a fixed parameter vector;
    NaN during warm-up."""
    cols = _history_channels(spec, dataset)
    rh_spec = None
    if _needs_rh_feed(spec):
        if theta_w is None:
            raise ConfigError("the FI zone structure needs theta_w for prediction")
        rh_spec = RegressorSpec(Structure.NRM_FI_RH, spec.n_neighbors)
    pred_chan = prediction_channel(spec)
    wu = warmup(spec)
    n = len(dataset)
    hist = LaggedHistory(cols)
    out = np.full(n, np.nan)
    for k in range(n):
        yhat_w = None
        if k >= wu:
            if rh_spec is not None:
                yhat_w = oe_predict(theta_w, rh_spec, hist, k)
            out[k] = oe_predict(theta, spec, hist, k)
        hist.push(_row(dataset, cols, k))
        if k >= wu:
            hist.record_prediction(pred_chan, k, out[k])
            if yhat_w is not None:
                hist.record_prediction("yhat_w", k, yhat_w)
    return out


def theta_to_file(theta: np.ndarray, path) -> None:
    """Plain-text parameter sidecar, one coefficient per line in layout order."""
    with open(path, "w", encoding="utf-8") as fh:
        for v in theta:
            fh.write(f"{v:.17g}\n")


def theta_from_file(path) -> np.ndarray:
    with open(path, "r", encoding="utf-8") as fh:
        return np.asarray([float(line) for line in fh if line.strip()])
