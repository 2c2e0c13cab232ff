#pragma once

// Per-timestep ensemble inference over logged streams: weights from a
// strategy (trained agents or a baseline), convex combination of base model
// predictions, scoring, and the per-model error tracker.

#include "reem/agents.hpp"
#include "reem/models.hpp"
#include "reem/streams.hpp"

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace reem::ensemble {

/// Last-step squared error of every base model.
class ErrorTracker {
 public:
  explicit ErrorTracker(std::size_t n_models, double prior = streams::kTrackerPrior);
  const std::vector<double>& errors() const noexcept { return errors_; }
  void update(std::span<const double> predictions, double truth);

 private:
  std::vector<double> errors_;
};

/// Weight vectors must lie on the simplex within this tolerance.
inline constexpr double kSimplexTolerance = 1e-6;
void check_simplex(std::span<const double> w);

/// Sum of w_i * p_i over nonzero weights.
double combine(std::span<const double> predictions, std::span<const double> w);
/// Evaluates only the models with nonzero weight.
double ensemble_predict(const models::ModelLibrary& library, std::span<const double> w,
                        const models::TimeSeriesWindow& window, double u_t);

struct EnsembleRecord {
  Timestamp timestamp = 0;
  std::string room;
  std::vector<int> b;
  std::vector<double> w;
  double yhat = 0.0;
  double ytrue = 0.0;
  double sq_err = 0.0;
  agents::RewardBreakdown rewards;
};

/// Reward weights used when filling EnsembleRecord::rewards.
struct RewardSettings {
  double alpha = 0.005;
  double beta = 0.0015;
  std::vector<int> variable_counts;  // empty: all zero
};

/// Walks a dataset row by row for live (unbatched) inference.
class StreamCursor {
 public:
  StreamCursor(std::shared_ptr<const sim::RoomDataset> data, std::size_t lookback);
  bool exhausted() const noexcept;
  std::size_t row() const noexcept { return row_; }
  const sim::RoomDataset& data() const noexcept { return *data_; }
  std::size_t lookback() const noexcept { return lookback_; }
  void advance() noexcept { ++row_; }

 private:
  std::shared_ptr<const sim::RoomDataset> data_;
  std::size_t lookback_;
  std::size_t row_;
};

/// One live step: state from the current tracker, actions, prediction with
/// the logged control, scoring against the logged next temperature, then
/// the tracker update. Throws EndOfStream once no future row remains.
EnsembleRecord step_stream(StreamCursor& cursor, const agents::AgentSet& agents, const models::ModelLibrary& library,
                           ErrorTracker& tracker, agents::SampleMode mode, std::mt19937_64& rng,
                           const RewardSettings& rewards = {});

struct Choice {
  std::vector<int> b;
  std::vector<double> w;
};

/// Picks selection and weights for every step of a prepared stream.
using Strategy = std::function<std::vector<Choice>(const streams::PreparedStream&)>;

/// Greedy actions of trained agents, encoded in chunks of `chunk` steps.
Strategy agent_strategy(std::shared_ptr<const agents::AgentSet> agents, std::size_t chunk = 256);

struct RoomMetrics {
  std::string room;
  std::size_t steps = 0;
  double mae = 0.0;
  double mse = 0.0;
};

struct EvaluationResult {
  std::string method;
  std::vector<RoomMetrics> rooms;
  double mae = 0.0;  // pooled over all steps
  double mse = 0.0;
  double mean_models = 0.0;  // average selection size
  std::vector<EnsembleRecord> records;
};

EvaluationResult run_evaluation(const std::vector<streams::PreparedStream>& streams, const Strategy& strategy,
                                const std::string& method, const RewardSettings& rewards = {});

/// Recomputes per-room and pooled metrics from records alone.
EvaluationResult metrics_from_records(const std::vector<EnsembleRecord>& records, const std::string& method);

/// Relative improvement (reference - method) / reference, in percent.
double improvement_percent(double reference, double method);

inline constexpr const char* kRecordCsvHeader = "timestamp,room,b_bitstring,weights_json,yhat,ytrue,sq_err";
void write_records_csv(const std::vector<EnsembleRecord>& records, const std::filesystem::path& path);
std::vector<EnsembleRecord> read_records_csv(const std::filesystem::path& path);

}  // namespace reem::ensemble
