"""Receding-horizon climate controller over a discrete control set.

Every admissible plan (one inlet-temperature/water-flow pair per optimization
period, zero-order held) is rolled out through the zone predictor and the
water-loop predictor, costed, and the cheapest plan is applied for one
optimization period.  Plan enumeration is exhaustive and ordered (inlet
ascending, then flow ascending, earliest period most significant); the argmin
takes the first minimum, so ties resolve to the lexicographically smallest
plan.

The rollout is anchored to measurements: lags that reach into the past read
the recorded history, lags inside the horizon read the rollout's own
predictions.  The forecast arrays hold the scheduled future exogenous signals
(offsets 1..N relative to the decision sample; the decision sample itself
travels in ``HorizonForecast.now``).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DivergenceError, HistoryUnderflowError
from .identify import oe_predict
from .regressors import (LaggedHistory, RegressorSpec, Structure, layout,
                         measured_columns, warmup)
from .simulator import (ControlInput, Disturbance, PlantState, SimConfig,
                        ZoneParams, heating_curve, hysteresis_control, step,
                        synthesize_scenario)


@dataclass(frozen=True)
class MpcConfig:
    """Cost weights, timing grid and discrete control sets (times in hours)."""

    alpha: float = 1.0e6          # comfort weight
    beta: float = 0.3333          # heating-cost weight, kW/(degC h)
    gamma: float = 0.5278e3       # pump weight, kW s/(h m^3)
    t_sam: float = 1.0 / 12.0
    t_opt: float = 1.0
    t_hor: float = 5.0
    inlet_set: tuple[float, ...] = (40.0, 45.0)
    flow_set: tuple[float, ...] = (0.0, 0.0787)
    t_set: float = 21.0
    heating_cost_gated_by_flow: bool = False
    plan_budget: int = 100_000

    def __post_init__(self):
        if not self.inlet_set or not self.flow_set:
            raise ConfigError("inlet_set and flow_set must be non-empty")
        if self.t_sam <= 0 or self.t_opt <= 0 or self.t_hor <= 0:
            raise ConfigError("t_sam, t_opt and t_hor must be positive")
        for whole, part, names in ((self.t_hor, self.t_opt, "t_hor/t_opt"),
                                   (self.t_opt, self.t_sam, "t_opt/t_sam")):
            ratio = whole / part
            if abs(ratio - round(ratio)) > 1e-6 or round(ratio) < 1:
                raise ConfigError(f"{names} must be a positive integer, got {ratio}")

    @property
    def n_periods(self) -> int:
        return int(round(self.t_hor / self.t_opt))

    @property
    def samples_per_period(self) -> int:
        return int(round(self.t_opt / self.t_sam))

    @property
    def n_hor(self) -> int:
        return self.n_periods * self.samples_per_period

    def options(self) -> list[tuple[float, float]]:
        """Per-period (inlet, flow) choices in tie-break order."""
        return [(i, f) for i in sorted(self.inlet_set) for f in sorted(self.flow_set)]


@dataclass(frozen=True)
class ControlPlan:
    """One (inlet temperature, water flow) pair per optimization period."""

    periods: tuple[tuple[float, float], ...]

    def expand(self, cfg: MpcConfig) -> tuple[np.ndarray, np.ndarray]:
        """Zero-order-held per-sample sequences of length n_hor."""
        if len(self.periods) != cfg.n_periods:
            raise ConfigError(f"plan has {len(self.periods)} periods, "
                              f"config expects {cfg.n_periods}")
        inlet = np.repeat([p[0] for p in self.periods], cfg.samples_per_period)
        flow = np.repeat([p[1] for p in self.periods], cfg.samples_per_period)
        return inlet.astype(float), flow.astype(float)


@dataclass(frozen=True)
class CurrentSample:
    """Measured values at the decision sample."""

    t_r: float
    occ: float
    t_neighbors: tuple[float, ...]
    ta_in: float
    va: float
    qext: float


@dataclass
class HorizonForecast:
    """Scheduled exogenous signals over the horizon, assumed exact.

    Arrays cover offsets 1..n_hor from the decision sample.
    """

    occ: np.ndarray
    ta_in: np.ndarray
    va: np.ndarray
    qext: np.ndarray
    t_neighbors: list[np.ndarray]
    now: CurrentSample

    def check_length(self, n_hor: int) -> None:
        arrays = [self.occ, self.ta_in, self.va, self.qext, *self.t_neighbors]
        if any(len(a) != n_hor for a in arrays):
            raise ConfigError(f"forecast arrays must have length {n_hor}")


def runtime_channels(spec: RegressorSpec) -> list[str]:
    """History channels a controller keeps for a zone structure plus the
    water-loop predictor."""
    cols = set(measured_columns(spec.structure, spec.n_neighbors))
    cols.update(["Vw", "Tw_in", "Ta_in", "Va", "Qext", "T_r"])
    cols.update(f"T_rj_{j}" for j in range(1, spec.n_neighbors + 1))
    cols.discard("T_w")  # the water state is tracked through yhat_w
    return sorted(cols)


def _rh_spec(spec: RegressorSpec) -> RegressorSpec:
    return RegressorSpec(Structure.NRM_FI_RH, spec.n_neighbors)


def predict_horizon(theta_r: np.ndarray, theta_w: np.ndarray,
                    spec: RegressorSpec, hist: LaggedHistory,
                    plan: ControlPlan, forecast: HorizonForecast,
                    cfg: MpcConfig) -> tuple[np.ndarray, np.ndarray]:
    """Multi-step rollout of the zone and water predictors under one plan.

    Returns the zone trace (length n_hor+1, position 0 is the current
    measurement) and the water-outlet trace (length n_hor).  The caller's
    history is not modified.
    """
    n = cfg.n_hor
    if n == 0:
        return np.empty(0), np.empty(0)
    forecast.check_length(n)
    rh = _rh_spec(spec)
    inlet_seq, flow_seq = plan.expand(cfg)
    work = hist.copy()
    t = len(work)

    t_r_trace = np.empty(n + 1)
    t_w_trace = np.empty(n)
    t_r_trace[0] = forecast.now.t_r

    # current water estimate from the recorded history (plan independent)
    yhat_w = oe_predict(theta_w, rh, work, t) if t >= 1 else forecast.now.t_r
    t_w_trace[0] = yhat_w
    _push_rollout_row(work, t_r=forecast.now.t_r, t_w=yhat_w,
                      t_neighbors=forecast.now.t_neighbors,
                      ta_in=forecast.now.ta_in, va=forecast.now.va,
                      qext=forecast.now.qext, occ=forecast.now.occ,
                      tw_in=inlet_seq[0], vw=flow_seq[0])
    work.record_prediction("yhat_w", t, yhat_w)

    for kappa in range(1, n + 1):
        idx = t + kappa
        yhat_w = oe_predict(theta_w, rh, work, idx)
        yhat_r = oe_predict(theta_r, spec, work, idx)
        if not (math.isfinite(yhat_r) and math.isfinite(yhat_w)):
            raise DivergenceError(f"rollout diverged at horizon step {kappa}")
        t_r_trace[kappa] = yhat_r
        if kappa < n:
            t_w_trace[kappa] = yhat_w
        s = min(kappa, n - 1)
        _push_rollout_row(work, t_r=yhat_r, t_w=yhat_w,
                          t_neighbors=tuple(float(a[kappa - 1])
                                            for a in forecast.t_neighbors),
                          ta_in=float(forecast.ta_in[kappa - 1]),
                          va=float(forecast.va[kappa - 1]),
                          qext=float(forecast.qext[kappa - 1]),
                          occ=float(forecast.occ[kappa - 1]),
                          tw_in=inlet_seq[s], vw=flow_seq[s])
        work.record_prediction("yhat_r", idx, yhat_r)
        work.record_prediction("yhat_w", idx, yhat_w)
    return t_r_trace, t_w_trace


def _push_rollout_row(work: LaggedHistory, *, t_r, t_w,
                      t_neighbors, ta_in, va, qext, occ, tw_in, vw) -> None:
    row = {"T_r": t_r, "Ta_in": ta_in, "Va": va, "Qext": qext, "occ": occ,
           "Tw_in": tw_in, "Vw": vw, "T_w": t_w}
    for j, v in enumerate(t_neighbors, start=1):
        row[f"T_rj_{j}"] = v
    work.push({c: row[c] for c in work.channels if c in row})


@dataclass(frozen=True)
class CostBreakdown:
    total: float
    comfort: float
    heating: float
    pump: float


def plan_cost(traces: tuple[np.ndarray, np.ndarray], plan: ControlPlan,
              forecast: HorizonForecast, cfg: MpcConfig) -> CostBreakdown:
    """Comfort, heating and pump cost of one rolled-out plan.

    The comfort sum runs over horizon positions 0..n_hor and is averaged by
    n_hor; heating and pump sum positions 0..n_hor-1.  The heating term is
    beta * t_sam * (inlet - predicted outlet), optionally multiplied by an
    indicator that the flow is nonzero.
    """
    t_r_trace, t_w_trace = traces
    n = cfg.n_hor
    if n == 0 or len(t_r_trace) == 0:
        return CostBreakdown(0.0, 0.0, 0.0, 0.0)
    inlet_seq, flow_seq = plan.expand(cfg)

    comfort = forecast.now.occ * (t_r_trace[0] - cfg.t_set) ** 2
    for kappa in range(1, n + 1):
        comfort += float(forecast.occ[kappa - 1]) * (t_r_trace[kappa] - cfg.t_set) ** 2
    comfort = cfg.alpha * comfort / n

    heating = 0.0
    pump = 0.0
    for k in range(n):
        gate = (1.0 if flow_seq[k] > 0.0 else 0.0) \
            if cfg.heating_cost_gated_by_flow else 1.0
        heating += cfg.beta * cfg.t_sam * (inlet_seq[k] - t_w_trace[k]) * gate
        pump += cfg.gamma * cfg.t_sam * flow_seq[k]
    return CostBreakdown(total=comfort + heating + pump, comfort=comfort,
                         heating=heating, pump=pump)


# ---------------------------------------------------------------------------
# vectorized plan enumeration
# ---------------------------------------------------------------------------

def _tail_arrays(hist: LaggedHistory, channels, depth: int, t: int) -> dict[str, np.ndarray]:
    out = {}
    for c in channels:
        out[c] = np.asarray([hist.get(c, k) for k in range(t - depth, t)], dtype=float)
    return out


def _evaluate_all_plans(theta_r, theta_w, spec, hist, forecast, cfg,
                        plans) -> np.ndarray:
    """Total cost of every plan, rolled out in parallel across a plan axis."""
    n = cfg.n_hor
    p = len(plans)
    rh = _rh_spec(spec)
    w = max(warmup(spec), 1)
    t = len(hist)
    if t < w:
        raise HistoryUnderflowError(f"controller history has {t} samples, "
                                    f"needs {w} for the rollout")
    total = w + 1 + n  # positions: 0..w-1 past, w = decision sample, w+1..w+n horizon

    shared_names = [f"T_rj_{j}" for j in range(1, spec.n_neighbors + 1)] + \
        ["Ta_in", "Va", "Qext"]
    past = _tail_arrays(hist, shared_names + ["Vw", "Tw_in", "yhat_r", "yhat_w"], w, t)

    now_map = {"Ta_in": forecast.now.ta_in, "Va": forecast.now.va,
               "Qext": forecast.now.qext}
    for j, v in enumerate(forecast.now.t_neighbors, start=1):
        now_map[f"T_rj_{j}"] = v
    fut_map = {"Ta_in": forecast.ta_in, "Va": forecast.va,
               "Qext": forecast.qext}
    for j, a in enumerate(forecast.t_neighbors, start=1):
        fut_map[f"T_rj_{j}"] = a

    shared = {}
    for c in shared_names:
        buf = np.empty(total)
        buf[:w] = past[c]
        buf[w] = now_map[c]
        buf[w + 1:] = fut_map[c]
        shared[c] = buf

    # plan-dependent control buffers
    inlet = np.empty((p, total))
    flow = np.empty((p, total))
    inlet[:, :w] = past["Tw_in"]
    flow[:, :w] = past["Vw"]
    for i, periods in enumerate(plans):
        seq_i, seq_f = ControlPlan(periods).expand(cfg)
        inlet[i, w:w + n] = seq_i
        flow[i, w:w + n] = seq_f
    inlet[:, w + n] = inlet[:, w + n - 1]
    flow[:, w + n] = flow[:, w + n - 1]

    yhat_r = np.empty((p, total))
    yhat_w = np.empty((p, total))
    yhat_r[:, :w] = past["yhat_r"]
    yhat_w[:, :w] = past["yhat_w"]
    yhat_r[:, w] = forecast.now.t_r
    yhat_w[:, w] = oe_predict(theta_w, rh, hist, t) if t >= 1 else forecast.now.t_r

    def channel(c):
        if c in ("yhat_r", "T_r"):
            return yhat_r
        if c in ("yhat_w", "T_w"):
            return yhat_w
        if c == "Tw_in":
            return inlet
        if c == "Vw":
            return flow
        return shared[c]

    lay_r = layout(spec)
    lay_w = layout(rh)

    def predict(lay, theta, idx):
        acc = np.zeros(p)
        for coef, entry in zip(theta, lay):
            term = np.full(p, coef)
            for c, lag in entry:
                buf = channel(c)
                col = buf[:, idx - lag] if buf.ndim == 2 else buf[idx - lag]
                term = term * col
            acc += term
        return acc

    for kappa in range(1, n + 1):
        idx = w + kappa
        yhat_w[:, idx] = predict(lay_w, theta_w, idx)
        yhat_r[:, idx] = predict(lay_r, theta_r, idx)
    if not (np.all(np.isfinite(yhat_r[:, w:])) and np.all(np.isfinite(yhat_w[:, w:]))):
        raise DivergenceError("plan rollout produced non-finite predictions")

    # costs
    t_r_tr = yhat_r[:, w:w + n + 1]
    t_w_tr = yhat_w[:, w:w + n]
    occ_path = np.concatenate(([forecast.now.occ], forecast.occ))
    comfort = cfg.alpha * np.sum(occ_path * (t_r_tr - cfg.t_set) ** 2, axis=1) / n
    inlet_seq = inlet[:, w:w + n]
    flow_seq = flow[:, w:w + n]
    gate = (flow_seq > 0.0).astype(float) if cfg.heating_cost_gated_by_flow else 1.0
    heating = cfg.beta * cfg.t_sam * np.sum((inlet_seq - t_w_tr) * gate, axis=1)
    pump = cfg.gamma * cfg.t_sam * np.sum(flow_seq, axis=1)
    return comfort + heating + pump


def solve(theta_r: np.ndarray, theta_w: np.ndarray, spec: RegressorSpec,
          hist: LaggedHistory, forecast: HorizonForecast,
          cfg: MpcConfig) -> ControlPlan:
    """Exhaustively enumerate all admissible plans and return the cheapest
    (first minimum in tie-break order)."""
    options = cfg.options()
    n_plans = len(options) ** cfg.n_periods
    if n_plans > cfg.plan_budget:
        raise ConfigError(f"enumeration of {n_plans} plans exceeds the budget "
                          f"of {cfg.plan_budget}")
    forecast.check_length(cfg.n_hor)
    plans = list(itertools.product(options, repeat=cfg.n_periods))
    costs = _evaluate_all_plans(theta_r, theta_w, spec, hist, forecast, cfg, plans)
    return ControlPlan(periods=plans[int(np.argmin(costs))])


# ---------------------------------------------------------------------------
# closed-loop evaluation
# ---------------------------------------------------------------------------

@dataclass
class EpisodeReport:
    """Per-sample log of a closed-loop run with running-average realized
    costs, all computed against the true plant state."""

    t_hours: np.ndarray
    t_r_plant: np.ndarray
    t_w_plant: np.ndarray
    inlet: np.ndarray
    flow: np.ndarray
    occ: np.ndarray
    run_avg_comfort: np.ndarray
    run_avg_heating: np.ndarray
    run_avg_pump: np.ndarray

    @property
    def final_comfort(self) -> float:
        return float(self.run_avg_comfort[-1])

    @property
    def final_heating(self) -> float:
        return float(self.run_avg_heating[-1])

    @property
    def final_pump(self) -> float:
        return float(self.run_avg_pump[-1])

    @property
    def final_energy(self) -> float:
        return self.final_heating + self.final_pump

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("t_hours,T_r_plant,plan_inlet,plan_flow,"
                     "run_avg_comfort,run_avg_heating,run_avg_pump\n")
            for row in zip(self.t_hours, self.t_r_plant, self.inlet, self.flow,
                           self.run_avg_comfort, self.run_avg_heating,
                           self.run_avg_pump):
                fh.write(",".join(f"{v:.9g}" for v in row) + "\n")


def realized_costs(t_r_true, t_w_true, occ, inlet, flow,
                   cfg: MpcConfig) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Running averages of the per-sample realized comfort/heating/pump costs
    (plant truth, not predictions)."""
    t_r = np.asarray(t_r_true)
    steps = np.arange(1, len(t_r) + 1)
    comfort = cfg.alpha * np.asarray(occ) * (t_r - cfg.t_set) ** 2
    gate = (np.asarray(flow) > 0).astype(float) if cfg.heating_cost_gated_by_flow else 1.0
    heating = cfg.beta * cfg.t_sam * (np.asarray(inlet) - np.asarray(t_w_true)) * gate
    pump = cfg.gamma * cfg.t_sam * np.asarray(flow)
    return (np.cumsum(comfort) / steps, np.cumsum(heating) / steps,
            np.cumsum(pump) / steps)


def closed_loop_run(params: ZoneParams, sim_cfg: SimConfig, cfg: MpcConfig,
                    spec: RegressorSpec, theta_r: np.ndarray,
                    theta_w: np.ndarray) -> EpisodeReport:
    """Receding-horizon episode against the RK4 plant.

    The controller re-solves every optimization period on its recorded
    (measured) history and applies the first period of the chosen plan; the
    exogenous forecast is read from the scenario schedule (exact).  Until the
    history covers the deepest regressor lag, the hysteresis law bootstraps
    the flow with the scheduled heating-curve inlet.
    """
    if abs(sim_cfg.epsilon - cfg.t_sam) > 1e-9:
        raise ConfigError("simulator sampling period and t_sam must agree")
    n = sim_cfg.n_samples
    n_hor = cfg.n_hor
    nn = params.n_neighbors
    rng = np.random.default_rng(sim_cfg.seed)
    scen = synthesize_scenario(sim_cfg.disturbance_spec, sim_cfg.epsilon,
                               n + n_hor + 1, rng)
    noise = (rng.normal(0.0, sim_cfg.noise_std, size=n) if sim_cfg.noise_std > 0
             else np.zeros(n))
    q_ext = scen.q_ext
    rh = _rh_spec(spec)

    hist = LaggedHistory(runtime_channels(spec), extra_predictions=("yhat_w",))
    x = PlantState(t_r=sim_cfg.initial.t_r, t_s=list(sim_cfg.initial.t_s),
                   t_w=sim_cfg.initial.t_w)
    warm = max(warmup(spec), 1)

    t_r_plant = np.empty(n)
    t_w_plant = np.empty(n)
    inlet_log = np.empty(n)
    flow_log = np.empty(n)
    t_r_prev_meas = None
    current = None  # (inlet, flow) applied during the current period

    for k in range(n):
        t_r_plant[k] = x.t_r
        t_w_plant[k] = x.t_w
        t_r_meas = x.t_r + noise[k]
        occupied = scen.occ[k] > 0

        if k < warm or (current is None and k % cfg.samples_per_period != 0):
            # bootstrap: hysteresis with the heating-curve inlet
            prev = t_r_meas if t_r_prev_meas is None else t_r_prev_meas
            flow_k = hysteresis_control(t_r_meas, prev, occupied, sim_cfg.hysteresis)
            inlet_k = heating_curve(sim_cfg.hysteresis.t_set, scen.neighbors[0][k],
                                    sim_cfg.heating_curve)
        else:
            if k % cfg.samples_per_period == 0 or current is None:
                now = CurrentSample(
                    t_r=float(t_r_meas), occ=float(scen.occ[k]),
                    t_neighbors=tuple(float(nb[k]) for nb in scen.neighbors),
                    ta_in=float(scen.ta_in[k]), va=float(scen.va[k]),
                    qext=float(q_ext[k]))
                forecast = HorizonForecast(
                    occ=scen.occ[k + 1:k + 1 + n_hor],
                    ta_in=scen.ta_in[k + 1:k + 1 + n_hor],
                    va=scen.va[k + 1:k + 1 + n_hor],
                    qext=q_ext[k + 1:k + 1 + n_hor],
                    t_neighbors=[nb[k + 1:k + 1 + n_hor] for nb in scen.neighbors],
                    now=now)
                plan = solve(theta_r, theta_w, spec, hist, forecast, cfg)
                current = plan.periods[0]
            inlet_k, flow_k = current

        inlet_log[k] = inlet_k
        flow_log[k] = flow_k

        # controller-side water estimate, then record the sample
        yhat_w_k = oe_predict(theta_w, rh, hist, k) if k >= 1 else float(t_r_meas)
        _push_rollout_row(hist, t_r=float(t_r_meas), t_w=yhat_w_k,
                          t_neighbors=tuple(float(nb[k]) for nb in scen.neighbors),
                          ta_in=float(scen.ta_in[k]), va=float(scen.va[k]),
                          qext=float(q_ext[k]), occ=float(scen.occ[k]),
                          tw_in=inlet_k, vw=flow_k)
        hist.record_prediction("yhat_w", k, yhat_w_k)
        t_r_prev_meas = t_r_meas

        u = ControlInput(vdot_w=float(flow_k), vdot_a=float(scen.va[k]))
        d = Disturbance(t_w_in=float(inlet_k), t_a_in=float(scen.ta_in[k]),
                        t_neighbors=tuple(float(nb[k]) for nb in scen.neighbors),
                        q_ext=float(q_ext[k]))
        x = step(params, x, u, d, sim_cfg.epsilon)

    comfort, heating, pump = realized_costs(t_r_plant, t_w_plant, scen.occ[:n],
                                            inlet_log, flow_log, cfg)
    return EpisodeReport(t_hours=scen.t_hours[:n], t_r_plant=t_r_plant,
                         t_w_plant=t_w_plant, inlet=inlet_log, flow=flow_log,
                         occ=scen.occ[:n].copy(), run_avg_comfort=comfort,
                         run_avg_heating=heating, run_avg_pump=pump)
