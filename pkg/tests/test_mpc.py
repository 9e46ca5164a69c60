import dataclasses
import itertools

import numpy as np
import pytest

from thermbench.errors import ConfigError
from thermbench.identify import train
from thermbench.mpc import (ControlPlan, CurrentSample, HorizonForecast,
                            MpcConfig, closed_loop_run, plan_cost,
                            predict_horizon, realized_costs, runtime_channels,
                            solve)
from thermbench.regressors import LaggedHistory, RegressorSpec, Structure
from thermbench.simulator import (OccupancySchedule, step,
                                  run_probe_experiment)
from thermbench.thermal_core import ControlInput, Disturbance, PlantState

SPEC = RegressorSpec(Structure.NRM_MI, 1)


def toy_cfg(**kw):
    base = dict(alpha=1e6, t_sam=1.0 / 12.0, t_opt=1.0, t_hor=2.0)
    base.update(kw)
    return MpcConfig(**base)


def stable_toy_theta(spec, seed=0):
    rng = np.random.default_rng(seed)
    from thermbench.regressors import layout, regressor_length
    theta = np.zeros(regressor_length(spec))
    for i, entry in enumerate(layout(spec)):
        chans = [c for c, _ in entry]
        if chans == ["yhat_r"]:
            theta[i] = {1: 0.85, 2: 0.06, 3: 0.03}.get(entry[0][1], 0.0)
        elif "yhat_r" in chans:
            theta[i] = rng.uniform(-0.2, 0.2)
        else:
            theta[i] = rng.uniform(-0.01, 0.01)
    return theta


def toy_theta_w(eps_s=300.0):
    # physically shaped water predictor: mild decay plus inlet coupling
    return np.array([0.9, -0.7, 0.7, 0.1])


def warm_history(spec, n=8, seed=1):
    rng = np.random.default_rng(seed)
    hist = LaggedHistory(runtime_channels(spec), extra_predictions=("yhat_w",))
    for k in range(n):
        hist.push({"T_r": 20.5 + 0.1 * rng.normal(), "T_rj_1": 5.0 + rng.normal(),
                   "Ta_in": 19.0, "Va": 0.03, "Qext": 200.0,
                   "Vw": 0.0787 * (k % 2), "Tw_in": 41.0})
        hist.record_prediction("yhat_w", k, 30.0 + rng.normal())
    return hist


def toy_forecast(cfg, seed=2):
    rng = np.random.default_rng(seed)
    n = cfg.n_hor
    return HorizonForecast(
        occ=np.ones(n), ta_in=np.full(n, 19.0) + 0.1 * rng.normal(size=n),
        va=np.full(n, 0.03), qext=np.full(n, 200.0) + rng.normal(size=n),
        t_neighbors=[np.full(n, 5.0) + 0.2 * rng.normal(size=n)],
        now=CurrentSample(t_r=20.5, occ=1.0, t_neighbors=(5.0,), ta_in=19.0,
                          va=0.03, qext=200.0))


def scalar_costs(theta, theta_w, spec, hist, forecast, cfg, plans):
    out = []
    for periods in plans:
        plan = ControlPlan(periods)
        traces = predict_horizon(theta, theta_w, spec, hist, plan, forecast, cfg)
        out.append(plan_cost(traces, plan, forecast, cfg).total)
    return out


# ---------------------------------------------------------------------------
# configuration and plan mechanics
# ---------------------------------------------------------------------------

def test_grid_validation():
    with pytest.raises(ConfigError):
        MpcConfig(t_opt=0.7)  # not a multiple of t_sam
    with pytest.raises(ConfigError):
        MpcConfig(t_hor=2.5)  # not a multiple of t_opt
    cfg = MpcConfig()
    assert cfg.n_hor == 60 and cfg.n_periods == 5 and cfg.samples_per_period == 12


def test_plan_expansion_zero_order_hold():
    cfg = toy_cfg()
    plan = ControlPlan(((40.0, 0.0), (45.0, 0.0787)))
    inlet, flow = plan.expand(cfg)
    assert len(inlet) == 24
    assert np.all(inlet[:12] == 40.0) and np.all(inlet[12:] == 45.0)
    assert np.all(flow[:12] == 0.0) and np.all(flow[12:] == 0.0787)


def test_budget_cap():
    cfg = MpcConfig(plan_budget=100)  # 4^5 = 1024 > 100
    hist = warm_history(SPEC)
    with pytest.raises(ConfigError):
        solve(stable_toy_theta(SPEC), toy_theta_w(), SPEC, hist,
              toy_forecast(cfg), cfg)


def test_zero_horizon_empty_traces():
    # a zero-length horizon is not constructible through MpcConfig; the
    # documented degenerate behavior is exercised with a config stand-in
    import types
    cfg0 = types.SimpleNamespace(n_hor=0)
    tr, tw = predict_horizon(stable_toy_theta(SPEC), toy_theta_w(), SPEC,
                             warm_history(SPEC), ControlPlan(((40.0, 0.0),)),
                             toy_forecast(toy_cfg()), cfg0)
    assert len(tr) == 0 and len(tw) == 0
    c = plan_cost((tr, tw), ControlPlan(((40.0, 0.0),)),
                  toy_forecast(toy_cfg()), cfg0)
    assert c.total == 0.0


def test_causality_plans_equal_until_divergence():
    cfg = toy_cfg(t_hor=3.0)
    theta, theta_w = stable_toy_theta(SPEC), toy_theta_w()
    hist = warm_history(SPEC)
    fc = toy_forecast(cfg)
    a = ControlPlan(((40.0, 0.0787), (45.0, 0.0), (40.0, 0.0)))
    b = ControlPlan(((40.0, 0.0787), (45.0, 0.0), (45.0, 0.0787)))
    tr_a = predict_horizon(theta, theta_w, SPEC, hist, a, fc, cfg)
    tr_b = predict_horizon(theta, theta_w, SPEC, hist, b, fc, cfg)
    j = 2 * cfg.samples_per_period  # plans agree through the second period
    assert np.array_equal(tr_a[0][:j + 1], tr_b[0][:j + 1])
    assert np.array_equal(tr_a[1][:j], tr_b[1][:j])
    assert not np.array_equal(tr_a[0], tr_b[0])


# ---------------------------------------------------------------------------
# plan_cost
# ---------------------------------------------------------------------------

def test_cost_all_zero():
    cfg = toy_cfg()
    n = cfg.n_hor
    plan = ControlPlan(((40.0, 0.0), (40.0, 0.0)))
    fc = toy_forecast(cfg)
    fc = dataclasses.replace(fc, occ=np.zeros(n),
                             now=dataclasses.replace(fc.now, occ=0.0))
    tw = np.full(n, 40.0)  # outlet equals inlet: no heating term
    tr = np.full(n + 1, 21.0)
    c = plan_cost((tr, tw), plan, fc, cfg)
    assert c.total == c.comfort == c.heating == c.pump == 0.0


def test_pump_cost_hand_value():
    # 0.5278e3 * (1/12) * 0.0787 per sample, 60 samples
    cfg = MpcConfig()
    plan = ControlPlan(tuple((45.0, 0.0787) for _ in range(5)))
    fc = toy_forecast(cfg)
    tr = np.full(cfg.n_hor + 1, 21.0)
    tw = np.full(cfg.n_hor, 45.0)
    c = plan_cost((tr, tw), plan, fc, cfg)
    assert c.pump == pytest.approx(0.5278e3 * (1.0 / 12.0) * 0.0787 * 60, rel=1e-12)
    assert c.pump == pytest.approx(207.69, abs=0.01)


def test_comfort_zero_at_setpoint_regardless_of_occupancy():
    cfg = toy_cfg()
    plan = ControlPlan(((45.0, 0.0787), (45.0, 0.0787)))
    fc = toy_forecast(cfg)
    tr = np.full(cfg.n_hor + 1, cfg.t_set)
    tw = np.full(cfg.n_hor, 38.0)
    c = plan_cost((tr, tw), plan, fc, cfg)
    assert c.comfort == 0.0
    assert c.heating > 0.0


def test_cost_decomposition_exact():
    rng = np.random.default_rng(3)
    cfg = toy_cfg()
    plan = ControlPlan(((40.0, 0.0787), (45.0, 0.0)))
    fc = toy_forecast(cfg)
    tr = 21.0 + rng.normal(size=cfg.n_hor + 1)
    tw = 35.0 + rng.normal(size=cfg.n_hor)
    c = plan_cost((tr, tw), plan, fc, cfg)
    assert c.total == c.comfort + c.heating + c.pump


def test_gating_flag_zeroes_heating_without_flow():
    cfg = toy_cfg(heating_cost_gated_by_flow=True)
    plan = ControlPlan(((45.0, 0.0), (45.0, 0.0)))
    fc = toy_forecast(cfg)
    tr = np.full(cfg.n_hor + 1, 21.0)
    tw = np.full(cfg.n_hor, 25.0)
    c = plan_cost((tr, tw), plan, fc, cfg)
    assert c.heating == 0.0 and c.pump == 0.0


# ---------------------------------------------------------------------------
# solve
# ---------------------------------------------------------------------------

def test_solve_matches_independent_enumeration():
    # scalar-path enumeration in a different (reversed) iteration order, ties
    # by smallest plan index
    cfg = toy_cfg()
    theta, theta_w = stable_toy_theta(SPEC), toy_theta_w()
    for seed in range(6):
        hist = warm_history(SPEC, seed=seed)
        fc = toy_forecast(cfg, seed=seed + 100)
        plans = list(itertools.product(cfg.options(), repeat=cfg.n_periods))
        costs = scalar_costs(theta, theta_w, SPEC, hist, fc, cfg, plans)
        best = min(reversed(range(len(plans))),
                   key=lambda i: (costs[i], i))
        got = solve(theta, theta_w, SPEC, hist, fc, cfg)
        assert got.periods == plans[best]


def test_solve_beats_random_plans():
    cfg = toy_cfg(t_hor=3.0)
    rng = np.random.default_rng(4)
    theta, theta_w = stable_toy_theta(SPEC), toy_theta_w()
    hist = warm_history(SPEC)
    fc = toy_forecast(cfg)
    best = solve(theta, theta_w, SPEC, hist, fc, cfg)
    tr = predict_horizon(theta, theta_w, SPEC, hist, best, fc, cfg)
    best_cost = plan_cost(tr, best, fc, cfg).total
    options = cfg.options()
    for _ in range(100):
        periods = tuple(options[rng.integers(len(options))]
                        for _ in range(cfg.n_periods))
        plan = ControlPlan(periods)
        traces = predict_horizon(theta, theta_w, SPEC, hist, plan, fc, cfg)
        assert best_cost <= plan_cost(traces, plan, fc, cfg).total + 1e-9


def test_unoccupied_gated_horizon_prefers_rest():
    # no one home and gated heating: all-zero-flow plans cost exactly zero
    # and the tie resolves to the lowest inlet everywhere
    cfg = toy_cfg(heating_cost_gated_by_flow=True)
    theta, theta_w = stable_toy_theta(SPEC), toy_theta_w()
    hist = warm_history(SPEC)
    fc = toy_forecast(cfg)
    fc = dataclasses.replace(fc, occ=np.zeros(cfg.n_hor),
                             now=dataclasses.replace(fc.now, occ=0.0))
    plan = solve(theta, theta_w, SPEC, hist, fc, cfg)
    assert plan.periods == tuple((40.0, 0.0) for _ in range(cfg.n_periods))


def test_alpha_zero_minimizes_energy_only():
    cfg = toy_cfg(alpha=0.0)
    theta, theta_w = stable_toy_theta(SPEC), toy_theta_w()
    hist = warm_history(SPEC)
    fc = toy_forecast(cfg)
    plans = list(itertools.product(cfg.options(), repeat=cfg.n_periods))
    costs = scalar_costs(theta, theta_w, SPEC, hist, fc, cfg, plans)
    best = min(range(len(plans)), key=lambda i: (costs[i], i))
    got = solve(theta, theta_w, SPEC, hist, fc, cfg)
    assert got.periods == plans[best]
    # the cheapest constant plan, found by its own enumeration, is no better
    const_costs = {}
    for opt in cfg.options():
        periods = tuple(opt for _ in range(cfg.n_periods))
        plan = ControlPlan(periods)
        tr = predict_horizon(theta, theta_w, SPEC, hist, plan, fc, cfg)
        const_costs[periods] = plan_cost(tr, plan, fc, cfg).total
    assert costs[best] <= min(const_costs.values()) + 1e-12


def test_vectorized_equals_scalar_path():
    from thermbench.mpc import _evaluate_all_plans
    cfg = toy_cfg(t_hor=3.0)
    theta, theta_w = stable_toy_theta(SPEC), toy_theta_w()
    hist = warm_history(SPEC)
    fc = toy_forecast(cfg)
    plans = list(itertools.product(cfg.options(), repeat=cfg.n_periods))
    vec = _evaluate_all_plans(theta, theta_w, SPEC, hist, fc, cfg, plans)
    rng = np.random.default_rng(5)
    for i in rng.choice(len(plans), size=10, replace=False):
        plan = ControlPlan(plans[i])
        tr = predict_horizon(theta, theta_w, SPEC, hist, plan, fc, cfg)
        sc = plan_cost(tr, plan, fc, cfg).total
        assert vec[i] == pytest.approx(sc, rel=1e-11)


# ---------------------------------------------------------------------------
# closed loop
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def probe_models(cfg):
    ds = run_probe_experiment(cfg.plant, dataclasses.replace(cfg.sim, duration=168.0))
    theta = train(ds, SPEC, passes=4).theta
    theta_w = train(ds, RegressorSpec(Structure.NRM_FI_RH, 1), passes=4).theta
    return theta, theta_w


def _dataset_rollout_inputs(ds, t0, n, with_yhat_w_from="T_w"):
    hist = LaggedHistory(runtime_channels(SPEC), extra_predictions=("yhat_w",))
    for k in range(t0 - 12, t0):
        hist.push({c: float(ds.columns[c][k]) for c in hist.channels
                   if c in ds.columns})
        hist.record_prediction("yhat_w", len(hist) - 1,
                               float(ds.columns[with_yhat_w_from][k]))
    sl = slice(t0 + 1, t0 + 1 + n)
    fc = HorizonForecast(
        occ=ds.columns["occ"][sl], ta_in=ds.columns["Ta_in"][sl],
        va=ds.columns["Va"][sl], qext=ds.columns["Qext"][sl],
        t_neighbors=[ds.columns["T_rj_1"][sl]],
        now=CurrentSample(t_r=float(ds.columns["T_r"][t0]),
                          occ=float(ds.columns["occ"][t0]),
                          t_neighbors=(float(ds.columns["T_rj_1"][t0]),),
                          ta_in=float(ds.columns["Ta_in"][t0]),
                          va=float(ds.columns["Va"][t0]),
                          qext=float(ds.columns["Qext"][t0])))
    plan = ControlPlan(((float(ds.columns["Tw_in"][t0]),
                         float(ds.columns["Vw"][t0])),))
    return hist, fc, plan


def test_rollout_reproduces_self_consistent_truth():
    # data generated by the zone structure itself under hourly-held controls:
    # rolling the generating parameters out must retrace the series exactly
    from test_identify import synthetic_columns, stable_theta
    from thermbench.regressors import (LaggedHistory as LH, build_regressor,
                                       measured_columns, warmup)
    from thermbench.simulator import TimeSeriesDataset
    n_data = 1200
    cols = synthetic_columns(n_data)
    rng = np.random.default_rng(21)
    hold = np.repeat(rng.choice([0.0, 0.0787], size=n_data // 12 + 1), 12)[:n_data]
    cols["Vw"] = hold
    cols["Tw_in"] = np.repeat(rng.choice([40.0, 45.0], size=n_data // 12 + 1),
                              12)[:n_data]
    theta_star = stable_theta(SPEC)
    chan = measured_columns(SPEC.structure, 1)
    gen = LH(chan)
    y = np.zeros(n_data)
    y[:warmup(SPEC)] = 21.0
    for k in range(n_data):
        if k >= warmup(SPEC):
            y[k] = build_regressor(SPEC, gen, k) @ theta_star
        row = {c: cols[c][k] for c in chan if c != "T_r"}
        row["T_r"] = y[k]
        gen.push(row)
    cols["T_r"] = y
    ds = TimeSeriesDataset(epsilon=1.0 / 12.0, n_neighbors=1, columns=cols)

    cfgm = toy_cfg(t_hor=1.0)
    t0 = 600  # hour boundary: the recorded controls are one valid plan
    hist, fc, plan = _dataset_rollout_inputs(ds, t0, cfgm.n_hor,
                                             with_yhat_w_from="T_r")
    # the water predictor plays no role in the zone structure's regressor;
    # any stable theta_w leaves the zone trace untouched
    tr, _ = predict_horizon(theta_star, toy_theta_w(), SPEC, hist, plan, fc, cfgm)
    truth = ds.columns["T_r"][t0:t0 + cfgm.n_hor + 1]
    assert np.max(np.abs(tr - truth)) < 1e-9


def test_rollout_tracks_plant_on_converged_model(cfg):
    # noise-free probe data, converged theta, rollout driven by the recorded
    # plan: over one hour the drift stays within the structural error scale
    # (the model is first-order in the sampling step; bound it by the fitted
    # one-step residual accumulated over the horizon)
    sim = dataclasses.replace(cfg.sim, duration=168.0, noise_std=0.0)
    ds = run_probe_experiment(cfg.plant, sim)
    rep = train(ds, SPEC, passes=6)
    theta_w = train(ds, RegressorSpec(Structure.NRM_FI_RH, 1), passes=6).theta
    cfgm = toy_cfg(t_hor=1.0)
    n = cfgm.n_hor
    worst = 0.0
    for t0 in (300, 600, 900, 1200, 1500):
        assert np.all(ds.columns["Vw"][t0:t0 + n] == ds.columns["Vw"][t0])
        hist, fc, plan = _dataset_rollout_inputs(ds, t0, n)
        tr, _ = predict_horizon(rep.theta, theta_w, SPEC, hist, plan, fc, cfgm)
        truth = ds.columns["T_r"][t0:t0 + n + 1]
        worst = max(worst, float(np.max(np.abs(tr - truth))))
    # the recorded OE residual is itself a free-run divergence, so a
    # re-anchored one-hour rollout should stay within a few multiples of it
    free_run = float(np.sqrt(np.mean(rep.errors[-2000:] ** 2)))
    assert worst < max(3 * free_run, 0.05)
    assert worst < 1.5  # absolute sanity on a degree-scale quantity


def test_zero_capacity_controller_is_constant_and_plant_drifts_free(cfg):
    # nobody home: the hysteresis bootstrap is inert too, so the whole episode
    # is free drift and the zero-capacity controller's choice is constant
    mcfg = MpcConfig(flow_set=(0.0,), t_hor=2.0)
    theta, theta_w = stable_toy_theta(SPEC), toy_theta_w()
    sd = dataclasses.replace(cfg.sim.disturbance_spec,
                             occupancy=OccupancySchedule(absent_windows=((0.0, 24.0),)))
    sim = dataclasses.replace(cfg.sim, disturbance_spec=sd, duration=12.0,
                              noise_std=0.0)
    ep = closed_loop_run(cfg.plant, sim, mcfg, SPEC, theta, theta_w)
    assert np.all(ep.flow == 0.0)
    assert len(set(ep.inlet[mcfg.samples_per_period:])) == 1  # constant choice
    assert np.all(ep.run_avg_comfort == 0.0)
    # free-drift oracle: step the plant directly with zero water flow
    from thermbench.simulator import synthesize_scenario
    rng = np.random.default_rng(sim.seed)
    scen = synthesize_scenario(sim.disturbance_spec, sim.epsilon,
                               sim.n_samples + mcfg.n_hor + 1, rng)
    x = PlantState(t_r=sim.initial.t_r, t_s=list(sim.initial.t_s),
                   t_w=sim.initial.t_w)
    for k in range(sim.n_samples):
        assert ep.t_r_plant[k] == pytest.approx(x.t_r, abs=1e-9)
        d = Disturbance(t_w_in=float(ep.inlet[k]), t_a_in=float(scen.ta_in[k]),
                        t_neighbors=(float(scen.neighbors[0][k]),),
                        q_ext=float(scen.q_ext[k]))
        x = step(cfg.plant, x, ControlInput(0.0, float(scen.va[k])), d, sim.epsilon)


def test_closed_loop_runs_and_logs(cfg, probe_models):
    theta, theta_w = probe_models
    sim = dataclasses.replace(cfg.sim, duration=24.0)
    ep = closed_loop_run(cfg.plant, sim, MpcConfig(), SPEC, theta, theta_w)
    assert len(ep.t_r_plant) == sim.n_samples
    assert np.all(np.isfinite(ep.t_r_plant))
    # after the bootstrap hour every applied inlet comes from the control set
    assert set(np.unique(ep.inlet[12:])) <= {40.0, 45.0}
    assert ep.final_energy == pytest.approx(ep.final_heating + ep.final_pump)
    # running averages recompute from the logs
    c, h, p = realized_costs(ep.t_r_plant, ep.t_w_plant, ep.occ, ep.inlet,
                             ep.flow, MpcConfig())
    assert np.allclose(c, ep.run_avg_comfort)
    assert np.allclose(h + p, ep.run_avg_heating + ep.run_avg_pump)


def test_closed_loop_deterministic(cfg, probe_models):
    theta, theta_w = probe_models
    sim = dataclasses.replace(cfg.sim, duration=12.0)
    a = closed_loop_run(cfg.plant, sim, MpcConfig(), SPEC, theta, theta_w)
    b = closed_loop_run(cfg.plant, sim, MpcConfig(), SPEC, theta, theta_w)
    assert np.array_equal(a.t_r_plant, b.t_r_plant)
    assert np.array_equal(a.flow, b.flow)


def test_closed_loop_prefix_independent_of_future(cfg, probe_models):
    # controls applied at time t use only data with timestamps <= t: running
    # a shorter episode reproduces the long episode's prefix exactly
    theta, theta_w = probe_models
    sd = dataclasses.replace(cfg.sim.disturbance_spec,
                             occupancy=OccupancySchedule())  # no jitter draws
    long = dataclasses.replace(cfg.sim, disturbance_spec=sd, duration=18.0,
                               noise_std=0.0)
    short = dataclasses.replace(long, duration=12.0)
    a = closed_loop_run(cfg.plant, long, MpcConfig(), SPEC, theta, theta_w)
    b = closed_loop_run(cfg.plant, short, MpcConfig(), SPEC, theta, theta_w)
    n = short.n_samples
    assert np.array_equal(a.t_r_plant[:n], b.t_r_plant)
    assert np.array_equal(a.flow[:n], b.flow)


def test_episode_csv(tmp_path, cfg, probe_models):
    theta, theta_w = probe_models
    sim = dataclasses.replace(cfg.sim, duration=6.0)
    ep = closed_loop_run(cfg.plant, sim, MpcConfig(), SPEC, theta, theta_w)
    path = tmp_path / "episode.csv"
    ep.to_csv(path)
    data = np.genfromtxt(path, delimiter=",", names=True)
    assert len(data) == sim.n_samples
    assert data["run_avg_pump"][-1] == pytest.approx(ep.final_pump, rel=1e-8)
