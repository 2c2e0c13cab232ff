#pragma once

// Reference ensemble strategies: previous-step top-n averaging, equal
// weights, a static random-search ensemble, an in-hindsight best single
// model, and the flat (single-tier) learned policy.

#include "reem/agents.hpp"
#include "reem/ensemble.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace reem::baselines {

enum class Strategy { HeuristicTopN, EqualWeightAll, BestSingleOracle, StaticSearch, SingleTierRl };

std::string to_string(Strategy s);
Strategy strategy_from_string(const std::string& s);

struct BaselineConfig {
  Strategy strategy = Strategy::HeuristicTopN;
  std::size_t top_n = 3;
  std::size_t search_budget = 2000;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Uniform weight on the n smallest errors; ties go to the lowest id.
std::vector<double> heuristic_top_n(std::span<const double> errors, std::size_t n);
std::vector<double> equal_weights(std::size_t n_models);

/// Best of `budget` Dirichlet(1, ..., 1) draws and the uniform vector by
/// validation MSE over all steps of `validation`.
std::vector<double> static_search_weights(const std::vector<streams::PreparedStream>& validation,
                                          std::size_t budget, std::uint64_t seed);

/// Mean-mode weights of the flat policy for one state vector.
std::vector<double> single_tier_policy_step(std::span<const double> state, const agents::AgentSet& agents);

/// Selection vector with ones wherever w is nonzero.
std::vector<int> support(std::span<const double> w);

ensemble::Strategy heuristic_strategy(std::size_t n);
ensemble::Strategy fixed_strategy(std::vector<double> w);
/// Single model with the lowest MSE on the evaluated stream itself
/// (uses future data; an upper reference, not a deployable method).
ensemble::Strategy best_single_oracle_strategy();

}  // namespace reem::baselines
