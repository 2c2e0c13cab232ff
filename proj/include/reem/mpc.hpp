#pragma once

// Receding-horizon HVAC control by enumeration over discrete power levels,
// driven by any one-step temperature predictor, plus a closed-loop plant
// that runs the room simulator against the controller.

#include "reem/agents.hpp"
#include "reem/ensemble.hpp"
#include "reem/models.hpp"
#include "reem/simulator.hpp"

#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace reem::mpc {

struct MpcConfig {
  double setpoint = 20.0;
  double band = 2.0;  // comfort holds while |T - setpoint| <= band
  double comfort_start_hour = 10.0;
  double comfort_end_hour = 20.0;
  double comfort_weight = 100.0;  // per K^2 outside the band
  double energy_weight = 1.0;     // per kWh
  double penalty_weight = 1000.0; // per K or kW beyond a hard limit
  double t_min = 5.0, t_max = 35.0;
  double u_max = 4000.0;  // W
  std::size_t horizon = 1;
  std::vector<double> candidates{0, 500, 1000, 1500, 2000, 2500, 3000, 3500, 4000};
  /// The controller aims at a band narrowed by this margin so that model
  /// error does not immediately become a comfort violation.
  double tracking_margin = 0.5;
  /// Comfort is also enforced this many hours before the window opens.
  double lead_hours = 3.0;
  int sampling_minutes = 15;

  void validate() const;
  double step_hours() const noexcept { return sampling_minutes / 60.0; }
  bool in_comfort_window(Timestamp t) const;
  bool in_controlled_window(Timestamp t) const;
};

struct ObjectiveTerms {
  double comfort = 0.0;
  double consume = 0.0;
  double penalty = 0.0;
  double total() const noexcept { return comfort + consume + penalty; }
};

/// temps[k] is the predicted temperature at times[k], reached after
/// controls[k] was applied for one interval. Comfort counts only at times
/// inside the (lead-extended) window with the band narrowed by the margin.
ObjectiveTerms evaluate_objective(std::span<const double> temps, std::span<const double> controls,
                                  std::span<const Timestamp> times, const MpcConfig& cfg);

/// Everything a predictor may look at when the controller acts at time t.
struct StepContext {
  Timestamp time = 0;
  models::TimeSeriesWindow window;  // measured history ending at t
  /// Disturbances (t_amb, occ, solar, day) at t+1, ..., t+H.
  std::vector<std::array<double, 4>> future_d;
  /// True plant state and minute-resolution disturbances over the horizon;
  /// only the physics oracle reads these.
  sim::RoomState plant;
  std::vector<sim::ExogenousSample> future_minutes;
};

class Predictor {
 public:
  virtual ~Predictor() = default;
  virtual std::string name() const = 0;
  /// Called once per control step before any prediction.
  virtual void begin_step(const StepContext&) {}
  virtual double predict(const models::TimeSeriesWindow& window, double u) = 0;
  /// Temperatures at t+1..t+H for a control sequence. The default feeds
  /// predictions back into the window.
  virtual std::vector<double> rollout(const StepContext& ctx, std::span<const double> controls);
  /// The control actually applied and the next measured temperature.
  virtual void observe(const models::TimeSeriesWindow&, double, double) {}
};

class BaseModelPredictor : public Predictor {
 public:
  explicit BaseModelPredictor(models::BaseModel model) : model_(std::move(model)) {}
  std::string name() const override { return "base_model"; }
  double predict(const models::TimeSeriesWindow& window, double u) override;

 private:
  models::BaseModel model_;
};

/// Greedy agent weights chosen once per step from the measured history and
/// a live error tracker, applied to every candidate control.
class EnsemblePredictor : public Predictor {
 public:
  EnsemblePredictor(std::shared_ptr<const agents::AgentSet> agents, std::shared_ptr<const models::ModelLibrary> library);
  std::string name() const override { return "ensemble"; }
  void begin_step(const StepContext& ctx) override;
  double predict(const models::TimeSeriesWindow& window, double u) override;
  void observe(const models::TimeSeriesWindow& window, double u, double next) override;
  const std::vector<double>& weights() const noexcept { return weights_; }

 private:
  std::shared_ptr<const agents::AgentSet> agents_;
  std::shared_ptr<const models::ModelLibrary> library_;
  ensemble::ErrorTracker tracker_;
  std::vector<double> weights_;
  std::mt19937_64 rng_{0};  // greedy decisions draw nothing
};

/// The true room physics with the true plant state (an upper reference).
class PhysicsPredictor : public Predictor {
 public:
  explicit PhysicsPredictor(sim::RoomParams params) : params_(params) {}
  std::string name() const override { return "physics"; }
  void begin_step(const StepContext& ctx) override { ctx_ = &ctx; }
  double predict(const models::TimeSeriesWindow& window, double u) override;
  std::vector<double> rollout(const StepContext& ctx, std::span<const double> controls) override;

 private:
  sim::RoomParams params_;
  const StepContext* ctx_ = nullptr;
};

struct ControlDecision {
  double u = 0.0;
  std::vector<double> trajectory;
  ObjectiveTerms terms;
  bool fallback = false;  // non-finite prediction; u forced to 0
};

/// Exhaustive search over candidate sequences; ties go to the lower total
/// energy, then the lower first control.
ControlDecision choose_control(Predictor& predictor, const StepContext& ctx, const MpcConfig& cfg);

class Controller {
 public:
  virtual ~Controller() = default;
  virtual ControlDecision decide(const StepContext& ctx) = 0;
  virtual void observe(const models::TimeSeriesWindow&, double, double) {}
};

class MpcController : public Controller {
 public:
  MpcController(std::unique_ptr<Predictor> predictor, MpcConfig cfg);
  ControlDecision decide(const StepContext& ctx) override;
  void observe(const models::TimeSeriesWindow& window, double u, double next) override;
  Predictor& predictor() { return *predictor_; }

 private:
  std::unique_ptr<Predictor> predictor_;
  MpcConfig cfg_;
};

/// On/off hysteresis at full power around the setpoint, all day.
class ThermostatController : public Controller {
 public:
  ThermostatController(MpcConfig cfg, double hysteresis = 0.5) : cfg_(std::move(cfg)), hysteresis_(hysteresis) {}
  ControlDecision decide(const StepContext& ctx) override;

 private:
  MpcConfig cfg_;
  double hysteresis_;
  bool on_ = false;
};

struct ClosedLoopConfig {
  Timestamp start = make_timestamp(2024, 2, 7);
  int days = 4;
  int warmup_days = 1;  // u = 0 until the look-back fills, then control
  std::size_t lookback = 8;
  std::uint64_t seed = 0;  // sensor noise
  double sensor_noise_sd = 0.05;

  void validate() const;
};

struct ClosedLoopRow {
  Timestamp timestamp = 0;
  double t_room = 0.0;  // true temperature at the decision time
  double u = 0.0;
  ObjectiveTerms terms;
  double energy_kwh_cum = 0.0;
};

struct ClosedLoopResult {
  std::string controller;
  std::vector<ClosedLoopRow> rows;
  double compliance = 0.0;  // share of comfort-window steps inside the band
  double energy_kwh = 0.0;
  std::size_t comfort_steps = 0;
  std::size_t fallbacks = 0;
};

/// Runs the room from start - warmup_days for warmup_days + days; only the
/// final `days` are logged and scored.
ClosedLoopResult closed_loop_simulate(const sim::RoomProfile& room, Controller& controller, const MpcConfig& mpc,
                                      const ClosedLoopConfig& cfg, const std::string& label);

inline constexpr const char* kClosedLoopCsvHeader = "timestamp,t_room,u_chosen,j_comfort,j_consume,p_e,energy_kwh_cum";
void write_closed_loop_csv(const ClosedLoopResult& result, const std::filesystem::path& path);
std::vector<ClosedLoopRow> read_closed_loop_csv(const std::filesystem::path& path);

}  // namespace reem::mpc
