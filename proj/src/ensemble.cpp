#include "reem/ensemble.hpp"

#include "reem/errors.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace reem::ensemble {

ErrorTracker::ErrorTracker(std::size_t n_models, double prior) : errors_(n_models, prior) {
  if (n_models == 0) throw ContractViolation("error tracker: no models");
  if (!(prior >= 0)) throw ContractViolation("error tracker: prior must be nonnegative");
}

void ErrorTracker::update(std::span<const double> predictions, double truth) {
  if (predictions.size() != errors_.size()) throw ContractViolation("error tracker: prediction count mismatch");
  for (std::size_t i = 0; i < errors_.size(); ++i) {
    const double e = predictions[i] - truth;
    errors_[i] = e * e;
  }
}

void check_simplex(std::span<const double> w) {
  double sum = 0.0;
  for (double v : w) {
    if (!(v >= 0.0)) throw ContractViolation("ensemble weights must be nonnegative");
    sum += v;
  }
  if (std::abs(sum - 1.0) > kSimplexTolerance) {
    throw ContractViolation("ensemble weights sum to " + std::to_string(sum) + ", not 1");
  }
}

double combine(std::span<const double> predictions, std::span<const double> w) {
  if (predictions.size() != w.size()) throw ContractViolation("combine: length mismatch");
  double y = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (w[i] != 0.0) y += w[i] * predictions[i];
  }
  return y;
}

double ensemble_predict(const models::ModelLibrary& library, std::span<const double> w,
                        const models::TimeSeriesWindow& window, double u_t) {
  if (w.size() != library.size()) throw ContractViolation("ensemble_predict: one weight per model required");
  check_simplex(w);
  double y = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (w[i] != 0.0) y += w[i] * models::model_predict(library[i], window, u_t);
  }
  return y;
}

namespace {

agents::RewardBreakdown record_rewards(std::span<const double> predictions, double truth, const Choice& c,
                                       const RewardSettings& s) {
  std::vector<int> vc = s.variable_counts;
  if (vc.empty()) vc.assign(c.b.size(), 0);
  const auto [loss, loss_eq] = agents::ensemble_losses(predictions, truth, c.w, c.b);
  return agents::compute_rewards(loss, loss_eq, c.b, vc, s.alpha, s.beta);
}

}  // namespace

StreamCursor::StreamCursor(std::shared_ptr<const sim::RoomDataset> data, std::size_t lookback)
    : data_(std::move(data)), lookback_(lookback), row_(lookback - 1) {
  if (!data_) throw ContractViolation("stream cursor: no dataset");
  if (lookback == 0) throw ContractViolation("stream cursor: look-back must be positive");
}

bool StreamCursor::exhausted() const noexcept { return row_ + 1 >= data_->size(); }

EnsembleRecord step_stream(StreamCursor& cursor, const agents::AgentSet& agents, const models::ModelLibrary& library,
                           ErrorTracker& tracker, agents::SampleMode mode, std::mt19937_64& rng,
                           const RewardSettings& rewards) {
  if (cursor.exhausted()) throw EndOfStream("stream '" + cursor.data().room_id + "' has no future row");
  if (library.size() != agents.shape.n_models || tracker.errors().size() != library.size()) {
    throw ContractViolation("step_stream: agents, library and tracker disagree on the model count");
  }
  const auto& data = cursor.data();
  const std::size_t t = cursor.row();
  const auto window = models::window_at(data, t, cursor.lookback());
  const double u_t = data.u_hvac[t];

  const models::TimeSeriesWindow* wp[] = {&window};
  const std::vector<double>* ep[] = {&tracker.errors()};
  const auto batch = enc::pack_batch(wp, ep, agents.encoder);
  const auto decision = agents::decide(agents, batch, mode, rng).front();

  std::vector<double> predictions(library.size());
  for (std::size_t i = 0; i < library.size(); ++i) predictions[i] = models::model_predict(library[i], window, u_t);

  EnsembleRecord rec;
  rec.timestamp = data.timestamps[t];
  rec.room = data.room_id;
  rec.b = decision.high.b;
  rec.w = decision.low.w;
  rec.yhat = combine(predictions, rec.w);
  rec.ytrue = data.t_room[t + 1];
  rec.sq_err = (rec.yhat - rec.ytrue) * (rec.yhat - rec.ytrue);
  rec.rewards = record_rewards(predictions, rec.ytrue, {rec.b, rec.w}, rewards);

  tracker.update(predictions, rec.ytrue);
  cursor.advance();
  return rec;
}

Strategy agent_strategy(std::shared_ptr<const agents::AgentSet> agents, std::size_t chunk) {
  if (!agents) throw ContractViolation("agent_strategy: no agents");
  if (chunk == 0) throw ContractViolation("agent_strategy: chunk must be positive");
  return [agents, chunk](const streams::PreparedStream& stream) {
    if (stream.n_models() != agents->shape.n_models) {
      throw ContractViolation("agents were trained for " + std::to_string(agents->shape.n_models) +
                              " models but the stream has " + std::to_string(stream.n_models()));
    }
    std::vector<streams::PreparedStream> one{stream};
    std::vector<Choice> out;
    out.reserve(stream.steps());
    std::mt19937_64 unused(0);
    for (std::size_t start = 0; start < stream.steps(); start += chunk) {
      std::vector<std::pair<std::size_t, std::size_t>> steps;
      for (std::size_t k = start; k < std::min(stream.steps(), start + chunk); ++k) steps.emplace_back(0, k);
      const auto batch = agents::pack_steps(one, steps, agents->encoder);
      for (auto& d : agents::decide(*agents, batch, agents::SampleMode::Greedy, unused)) {
        out.push_back({std::move(d.high.b), std::move(d.low.w)});
      }
    }
    return out;
  };
}

EvaluationResult run_evaluation(const std::vector<streams::PreparedStream>& streams, const Strategy& strategy,
                                const std::string& method, const RewardSettings& rewards) {
  std::vector<EnsembleRecord> records;
  std::vector<double> preds;
  for (const auto& s : streams) {
    const auto choices = strategy(s);
    if (choices.size() != s.steps()) throw ContractViolation("strategy returned the wrong number of choices");
    preds.resize(s.n_models());
    for (std::size_t k = 0; k < s.steps(); ++k) {
      const Choice& c = choices[k];
      if (c.w.size() != s.n_models() || c.b.size() != s.n_models()) {
        throw ContractViolation("strategy choice has the wrong length");
      }
      check_simplex(c.w);
      for (std::size_t i = 0; i < preds.size(); ++i) {
        preds[i] = s.predictions(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i));
      }
      EnsembleRecord rec;
      rec.timestamp = s.timestamp(k);
      rec.room = s.room;
      rec.b = c.b;
      rec.w = c.w;
      rec.yhat = combine(preds, c.w);
      rec.ytrue = s.truth[k];
      rec.sq_err = (rec.yhat - rec.ytrue) * (rec.yhat - rec.ytrue);
      rec.rewards = record_rewards(preds, rec.ytrue, c, rewards);
      records.push_back(std::move(rec));
    }
  }
  EvaluationResult result = metrics_from_records(records, method);
  result.records = std::move(records);
  return result;
}

EvaluationResult metrics_from_records(const std::vector<EnsembleRecord>& records, const std::string& method) {
  EvaluationResult result;
  result.method = method;
  std::map<std::string, std::size_t> index;
  double abs_sum = 0.0, sq_sum = 0.0, models = 0.0;
  for (const auto& r : records) {
    auto [it, fresh] = index.emplace(r.room, result.rooms.size());
    if (fresh) result.rooms.push_back({r.room, 0, 0.0, 0.0});
    RoomMetrics& m = result.rooms[it->second];
    const double ae = std::abs(r.yhat - r.ytrue);
    ++m.steps;
    m.mae += ae;
    m.mse += r.sq_err;
    abs_sum += ae;
    sq_sum += r.sq_err;
    models += static_cast<double>(std::count(r.b.begin(), r.b.end(), 1));
  }
  for (auto& m : result.rooms) {
    m.mae /= static_cast<double>(m.steps);
    m.mse /= static_cast<double>(m.steps);
  }
  if (!records.empty()) {
    const double n = static_cast<double>(records.size());
    result.mae = abs_sum / n;
    result.mse = sq_sum / n;
    result.mean_models = models / n;
  }
  return result;
}

double improvement_percent(double reference, double method) {
  if (!(reference > 0)) throw ContractViolation("improvement: reference error must be positive");
  return (reference - method) / reference * 100.0;
}

}  // namespace reem::ensemble
