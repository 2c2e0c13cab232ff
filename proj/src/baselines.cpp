#include "reem/baselines.hpp"

#include "reem/errors.hpp"

#include <algorithm>
#include <numeric>
#include <random>

namespace reem::baselines {

std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::HeuristicTopN: return "heuristic_top_n";
    case Strategy::EqualWeightAll: return "equal_weight_all";
    case Strategy::BestSingleOracle: return "best_single_oracle";
    case Strategy::StaticSearch: return "static_search";
    case Strategy::SingleTierRl: return "single_tier_rl";
  }
  return "unknown";
}

Strategy strategy_from_string(const std::string& s) {
  for (auto v : {Strategy::HeuristicTopN, Strategy::EqualWeightAll, Strategy::BestSingleOracle,
                 Strategy::StaticSearch, Strategy::SingleTierRl}) {
    if (to_string(v) == s) return v;
  }
  throw ConfigError("unknown baseline strategy '" + s + "'");
}

void BaselineConfig::validate() const {
  if (top_n == 0) throw ConfigError("baseline top_n must be at least 1");
  if (strategy == Strategy::StaticSearch && search_budget == 0) {
    throw ConfigError("baseline search_budget must be at least 1");
  }
}

std::vector<double> heuristic_top_n(std::span<const double> errors, std::size_t n) {
  const std::size_t N = errors.size();
  if (n == 0 || n > N) throw ContractViolation("heuristic_top_n: need 1 <= n <= number of models");
  std::vector<std::size_t> ids(N);
  std::iota(ids.begin(), ids.end(), 0);
  std::stable_sort(ids.begin(), ids.end(), [&](std::size_t a, std::size_t b) { return errors[a] < errors[b]; });
  std::vector<double> w(N, 0.0);
  for (std::size_t i = 0; i < n; ++i) w[ids[i]] = 1.0 / static_cast<double>(n);
  return w;
}

std::vector<double> equal_weights(std::size_t n_models) {
  if (n_models == 0) throw ContractViolation("equal_weights: no models");
  return std::vector<double>(n_models, 1.0 / static_cast<double>(n_models));
}

std::vector<double> static_search_weights(const std::vector<streams::PreparedStream>& validation,
                                          std::size_t budget, std::uint64_t seed) {
  std::size_t N = 0, steps = 0;
  for (const auto& s : validation) {
    if (s.steps() == 0) continue;
    if (N != 0 && s.n_models() != N) throw ConfigError("static search: streams disagree on the model count");
    N = s.n_models();
    steps += s.steps();
  }
  if (steps == 0) throw ConfigError("static search needs a nonempty validation stream");

  // MSE of w is a quadratic form in w: mean((P w - y)^2) = w'Aw - 2 w'c + e.
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(N));
  Eigen::VectorXd c = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(N));
  double e = 0.0;
  for (const auto& s : validation) {
    if (s.steps() == 0) continue;
    const Eigen::Map<const Eigen::VectorXd> y(s.truth.data(), static_cast<Eigen::Index>(s.truth.size()));
    A.noalias() += s.predictions.transpose() * s.predictions;
    c.noalias() += s.predictions.transpose() * y;
    e += y.squaredNorm();
  }
  auto mse = [&](const Eigen::VectorXd& w) { return (w.dot(A * w) - 2.0 * w.dot(c) + e) / double(steps); };

  Eigen::VectorXd best = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(N), 1.0 / double(N));
  double best_mse = mse(best);
  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> expo(1.0);  // Dirichlet(1) via normalized exponentials
  Eigen::VectorXd w(static_cast<Eigen::Index>(N));
  for (std::size_t k = 0; k < budget; ++k) {
    for (Eigen::Index i = 0; i < w.size(); ++i) w[i] = expo(rng);
    w /= w.sum();
    const double m = mse(w);
    if (m < best_mse) best_mse = m, best = w;
  }
  return {best.data(), best.data() + best.size()};
}

std::vector<double> single_tier_policy_step(std::span<const double> state, const agents::AgentSet& agents) {
  if (agents.kind != agents::AgentKind::SingleTier) throw ContractViolation("single-tier step needs a flat policy");
  if (state.size() != agents.shape.state_dim) throw ContractViolation("single-tier step: state size mismatch");
  diff::Tape tape;
  diff::Var s = tape.constant(diff::Tensor({1, state.size()}, {state.begin(), state.end()}));
  const diff::Tensor logits = agents::single_logits(tape, agents.params, s).value();
  const std::vector<int> all(agents.shape.n_models, 1);
  std::mt19937_64 unused(0);
  return agents::low_action_from_logits(logits.values(), all, agents::SampleMode::Greedy, agents.c_min, agents.c_max,
                                        unused)
      .w;
}

std::vector<int> support(std::span<const double> w) {
  std::vector<int> b(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) b[i] = w[i] != 0.0;
  return b;
}

ensemble::Strategy heuristic_strategy(std::size_t n) {
  return [n](const streams::PreparedStream& s) {
    std::vector<ensemble::Choice> out;
    out.reserve(s.steps());
    for (std::size_t k = 0; k < s.steps(); ++k) {
      // Nothing has been observed before the first step.
      auto w = k == 0 ? equal_weights(s.n_models()) : heuristic_top_n(s.tracker_errors(k), std::min(n, s.n_models()));
      out.push_back({support(w), std::move(w)});
    }
    return out;
  };
}

ensemble::Strategy fixed_strategy(std::vector<double> w) {
  ensemble::check_simplex(w);
  return [w = std::move(w)](const streams::PreparedStream& s) {
    if (s.n_models() != w.size()) throw ContractViolation("fixed weights do not match the stream's model count");
    return std::vector<ensemble::Choice>(s.steps(), {support(w), w});
  };
}

ensemble::Strategy best_single_oracle_strategy() {
  return [](const streams::PreparedStream& s) {
    std::vector<double> w(s.n_models(), 0.0);
    if (s.steps() > 0) {
      const Eigen::Map<const Eigen::VectorXd> y(s.truth.data(), static_cast<Eigen::Index>(s.truth.size()));
      Eigen::Index best = 0;
      (s.predictions.colwise() - y).colwise().squaredNorm().minCoeff(&best);
      w[static_cast<std::size_t>(best)] = 1.0;
    } else {
      w[0] = 1.0;
    }
    return std::vector<ensemble::Choice>(s.steps(), {support(w), w});
  };
}

}  // namespace reem::baselines
