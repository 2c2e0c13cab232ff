#include "reem/mpc.hpp"

#include "reem/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

namespace reem::mpc {

namespace {

bool in_hours(Timestamp t, double from, double to) {
  const double h = hour_of_day(t);
  return from <= to ? (h >= from && h < to) : (h >= from || h < to);
}

}  // namespace

void MpcConfig::validate() const {
  if (!(band > 0)) throw ConfigError("mpc.band must be positive");
  if (candidates.empty()) throw ConfigError("mpc.candidates must not be empty");
  if (std::find(candidates.begin(), candidates.end(), 0.0) == candidates.end()) {
    throw ConfigError("mpc.candidates must include 0");
  }
  for (double c : candidates) {
    if (!(c >= 0)) throw ConfigError("mpc.candidates must be nonnegative");
  }
  if (horizon == 0 || horizon > 4) throw ConfigError("mpc.horizon must lie in 1..4");
  if (comfort_weight < 0 || energy_weight < 0 || penalty_weight < 0) {
    throw ConfigError("mpc weights must be nonnegative");
  }
  if (!(tracking_margin >= 0 && tracking_margin < band)) throw ConfigError("mpc.tracking_margin must lie in [0, band)");
  if (lead_hours < 0 || lead_hours >= 24) throw ConfigError("mpc.lead_hours must lie in [0, 24)");
  if (sampling_minutes <= 0 || 1440 % sampling_minutes != 0) throw ConfigError("mpc.sampling_minutes must divide a day");
  if (!(t_min < t_max)) throw ConfigError("mpc.t_min must be below mpc.t_max");
}

bool MpcConfig::in_comfort_window(Timestamp t) const { return in_hours(t, comfort_start_hour, comfort_end_hour); }

bool MpcConfig::in_controlled_window(Timestamp t) const {
  return in_hours(t, std::fmod(comfort_start_hour - lead_hours + 24.0, 24.0), comfort_end_hour);
}

ObjectiveTerms evaluate_objective(std::span<const double> temps, std::span<const double> controls,
                                  std::span<const Timestamp> times, const MpcConfig& cfg) {
  if (temps.size() != controls.size() || temps.size() != times.size()) {
    throw ContractViolation("evaluate_objective: trajectory lengths differ");
  }
  ObjectiveTerms j;
  const double band = cfg.band - cfg.tracking_margin;
  for (std::size_t k = 0; k < temps.size(); ++k) {
    if (cfg.in_controlled_window(times[k])) {
      const double excess = std::max(0.0, std::abs(temps[k] - cfg.setpoint) - band);
      j.comfort += cfg.comfort_weight * excess * excess;
    }
    j.consume += cfg.energy_weight * controls[k] / 1000.0 * cfg.step_hours();
    const double violation = std::max(0.0, temps[k] - cfg.t_max) + std::max(0.0, cfg.t_min - temps[k]) +
                             std::max(0.0, controls[k] - cfg.u_max) / 1000.0;
    j.penalty += cfg.penalty_weight * violation;
  }
  return j;
}

// ---- predictors ----

std::vector<double> Predictor::rollout(const StepContext& ctx, std::span<const double> controls) {
  if (controls.size() > ctx.future_d.size() + 1 && controls.size() > 1) {
    throw ContractViolation("rollout: not enough future disturbances for the horizon");
  }
  std::vector<double> out;
  out.reserve(controls.size());
  models::TimeSeriesWindow w = ctx.window;
  for (std::size_t k = 0; k < controls.size(); ++k) {
    const double next = predict(w, controls[k]);
    out.push_back(next);
    if (k + 1 == controls.size()) break;
    w.x.erase(w.x.begin());
    w.x.push_back(next);
    if (!w.u.empty()) {
      w.u.erase(w.u.begin());
      w.u.push_back(controls[k]);
    }
    w.d.erase(w.d.begin());
    w.d.push_back(ctx.future_d[k]);
    w.end_time += static_cast<Timestamp>(w.sampling_minutes) * 60;
  }
  return out;
}

double BaseModelPredictor::predict(const models::TimeSeriesWindow& window, double u) {
  return models::model_predict(model_, window, u);
}

EnsemblePredictor::EnsemblePredictor(std::shared_ptr<const agents::AgentSet> agents,
                                     std::shared_ptr<const models::ModelLibrary> library)
    : agents_(std::move(agents)), library_(std::move(library)), tracker_(library_ ? library_->size() : 0) {
  if (!agents_ || agents_->shape.n_models != library_->size()) {
    throw ContractViolation("ensemble predictor: agents and library disagree on the model count");
  }
}

void EnsemblePredictor::begin_step(const StepContext& ctx) {
  const models::TimeSeriesWindow* wp[] = {&ctx.window};
  const std::vector<double>* ep[] = {&tracker_.errors()};
  const auto batch = enc::pack_batch(wp, ep, agents_->encoder);
  weights_ = agents::decide(*agents_, batch, agents::SampleMode::Greedy, rng_).front().low.w;
}

double EnsemblePredictor::predict(const models::TimeSeriesWindow& window, double u) {
  return ensemble::ensemble_predict(*library_, weights_, window, u);
}

void EnsemblePredictor::observe(const models::TimeSeriesWindow& window, double u, double next) {
  std::vector<double> preds(library_->size());
  for (std::size_t i = 0; i < preds.size(); ++i) preds[i] = models::model_predict((*library_)[i], window, u);
  tracker_.update(preds, next);
}

double PhysicsPredictor::predict(const models::TimeSeriesWindow&, double u) {
  if (!ctx_) throw ContractViolation("physics predictor used before begin_step");
  const double one[] = {u};
  return rollout(*ctx_, one).front();
}

std::vector<double> PhysicsPredictor::rollout(const StepContext& ctx, std::span<const double> controls) {
  const std::size_t per_step = ctx.future_minutes.size() / std::max<std::size_t>(1, ctx.future_d.size());
  if (per_step == 0 || per_step * controls.size() > ctx.future_minutes.size()) {
    throw ContractViolation("physics rollout: minute disturbances do not cover the horizon");
  }
  std::vector<double> out;
  sim::RoomState s = ctx.plant;
  for (std::size_t k = 0; k < controls.size(); ++k) {
    for (std::size_t m = 0; m < per_step; ++m) {
      s = sim::step_room(s, controls[k], ctx.future_minutes[k * per_step + m], params_, sim::kSubstepSeconds);
    }
    out.push_back(s.t_room);
  }
  return out;
}

// ---- controllers ----

ControlDecision choose_control(Predictor& predictor, const StepContext& ctx, const MpcConfig& cfg) {
  const std::size_t H = cfg.horizon, C = cfg.candidates.size();
  std::vector<Timestamp> times(H);
  for (std::size_t k = 0; k < H; ++k) {
    times[k] = ctx.time + static_cast<Timestamp>((k + 1) * static_cast<std::size_t>(cfg.sampling_minutes) * 60);
  }
  predictor.begin_step(ctx);

  ControlDecision best;
  double best_j = std::numeric_limits<double>::infinity(), best_energy = 0.0;
  bool found = false;
  std::vector<std::size_t> idx(H, 0);
  std::vector<double> controls(H);
  while (true) {
    for (std::size_t k = 0; k < H; ++k) controls[k] = cfg.candidates[idx[k]];
    const auto traj = predictor.rollout(ctx, controls);
    if (!std::all_of(traj.begin(), traj.end(), [](double v) { return std::isfinite(v); })) {
      ControlDecision fb;
      fb.fallback = true;
      return fb;
    }
    const ObjectiveTerms terms = evaluate_objective(traj, controls, times, cfg);
    const double j = terms.total();
    double energy = 0.0;
    for (double c : controls) energy += c;
    const bool better = !found || j < best_j || (j == best_j && (energy < best_energy ||
                                                                  (energy == best_energy && controls[0] < best.u)));
    if (better) {
      found = true;
      best_j = j;
      best_energy = energy;
      best.u = controls[0];
      best.trajectory = traj;
      best.terms = terms;
    }
    std::size_t pos = 0;
    while (pos < H && ++idx[pos] == C) idx[pos++] = 0;
    if (pos == H) break;
  }
  return best;
}

MpcController::MpcController(std::unique_ptr<Predictor> predictor, MpcConfig cfg)
    : predictor_(std::move(predictor)), cfg_(std::move(cfg)) {
  if (!predictor_) throw ContractViolation("mpc controller: no predictor");
  cfg_.validate();
}

ControlDecision MpcController::decide(const StepContext& ctx) { return choose_control(*predictor_, ctx, cfg_); }

void MpcController::observe(const models::TimeSeriesWindow& window, double u, double next) {
  predictor_->observe(window, u, next);
}

ControlDecision ThermostatController::decide(const StepContext& ctx) {
  const double x = ctx.window.x.back();
  if (x < cfg_.setpoint - hysteresis_) on_ = true;
  if (x > cfg_.setpoint + hysteresis_) on_ = false;
  ControlDecision d;
  d.u = on_ ? *std::max_element(cfg_.candidates.begin(), cfg_.candidates.end()) : 0.0;
  return d;
}

// ---- closed loop ----

void ClosedLoopConfig::validate() const {
  if (days <= 0) throw ConfigError("closed loop needs at least one day");
  if (warmup_days <= 0) throw ConfigError("closed loop needs at least one warm-up day");
  if (lookback == 0) throw ConfigError("closed loop look-back must be positive");
  if (sensor_noise_sd < 0) throw ConfigError("sensor noise must be nonnegative");
}

ClosedLoopResult closed_loop_simulate(const sim::RoomProfile& room, Controller& controller, const MpcConfig& mpc,
                                      const ClosedLoopConfig& cfg, const std::string& label) {
  mpc.validate();
  cfg.validate();
  room.params.validate();
  const auto step_minutes = static_cast<std::size_t>(mpc.sampling_minutes);
  const std::size_t H = mpc.horizon;
  const std::size_t warm_steps = static_cast<std::size_t>(cfg.warmup_days) * 1440 / step_minutes;
  const std::size_t run_steps = static_cast<std::size_t>(cfg.days) * 1440 / step_minutes;
  const std::size_t total_steps = warm_steps + run_steps;
  if (cfg.lookback > warm_steps) throw ConfigError("closed loop warm-up is shorter than the look-back");

  sim::ExogenousConfig climate = room.climate;
  climate.start = cfg.start - static_cast<Timestamp>(cfg.warmup_days) * kSecondsPerDay;
  climate.interval_s = static_cast<int>(sim::kSubstepSeconds);
  const sim::ExogenousSeries exo = synthesize_exogenous(climate, (total_steps + H) * step_minutes, room.seed);

  std::mt19937_64 sensor_rng(cfg.seed ^ 0x6D70635F73656E73ULL);
  std::normal_distribution<double> noise(0.0, cfg.sensor_noise_sd);

  sim::RoomDataset history;
  history.room_id = room.id;
  history.sampling_minutes = mpc.sampling_minutes;
  sim::RoomState state{room.thermostat.setback + 1.0, room.thermostat.setback + 1.0};

  auto measure = [&](double truth) { return truth + (cfg.sensor_noise_sd > 0 ? noise(sensor_rng) : 0.0); };

  ClosedLoopResult result;
  result.controller = label;
  std::size_t inside = 0;
  double energy = 0.0;
  double measured = measure(state.t_room);
  for (std::size_t step = 0; step < total_steps; ++step) {
    const std::size_t m0 = step * step_minutes;
    const Timestamp t = exo.timestamp(m0);
    const double truth = state.t_room;
    history.timestamps.push_back(t);
    history.t_room.push_back(measured);
    history.t_amb.push_back(exo.t_ambient[m0]);
    history.occupancy.push_back(exo.occupancy[m0]);
    history.solar.push_back(exo.solar[m0]);
    history.day_type.push_back(exo.day_type[m0]);

    ControlDecision decision;
    std::optional<models::TimeSeriesWindow> window;
    if (step + 1 >= cfg.lookback) {
      StepContext ctx;
      ctx.time = t;
      ctx.window = models::window_at(history, step, cfg.lookback);
      ctx.plant = state;
      for (std::size_t k = 1; k <= H; ++k) {
        const std::size_t m = m0 + k * step_minutes;
        ctx.future_d.push_back({exo.t_ambient[m], exo.occupancy[m], exo.solar[m], double(exo.day_type[m])});
      }
      for (std::size_t m = 0; m < H * step_minutes; ++m) ctx.future_minutes.push_back(exo.sample(m0 + m));
      decision = controller.decide(ctx);
      window = std::move(ctx.window);
    }
    const double u = decision.u;
    for (std::size_t m = 0; m < step_minutes; ++m) {
      state = sim::step_room(state, u, exo.sample(m0 + m), room.params, sim::kSubstepSeconds);
    }
    history.u_hvac.push_back(u);
    measured = measure(state.t_room);
    if (window) controller.observe(*window, u, measured);

    if (step >= warm_steps) {
      result.fallbacks += decision.fallback;
      if (mpc.in_comfort_window(t)) {
        ++result.comfort_steps;
        inside += std::abs(truth - mpc.setpoint) <= mpc.band;
      }
      energy += u / 1000.0 * mpc.step_hours();
      result.rows.push_back({t, truth, u, decision.terms, energy});
    }
  }
  result.energy_kwh = energy;
  result.compliance = result.comfort_steps ? double(inside) / double(result.comfort_steps) : 1.0;
  return result;
}

}  // namespace reem::mpc
