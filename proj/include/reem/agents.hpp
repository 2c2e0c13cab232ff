#pragma once

// Hierarchical policies over the model library: a Bernoulli selection policy
// (high level) and a Dirichlet weighting policy over the selected models
// (low level), both on top of one shared encoder, trained by REINFORCE with
// soft parameter blending.

#include "reem/diff.hpp"
#include "reem/encoder.hpp"
#include "reem/models.hpp"
#include "reem/streams.hpp"

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace reem::agents {

struct TrainConfig {
  double alpha = 0.005;    // per selected model
  double beta = 0.0015;    // per selected variable
  double lambda = 0.001;   // weight of the freshly updated parameters
  double gamma = 0.0;      // one-step rewards only
  double lr_stage1 = 1e-3;
  double lr_stage2 = 5e-4;
  std::size_t batch_size = 64;
  std::size_t stage1_epochs = 10;
  std::size_t stage2_epochs = 10;
  /// Minibatches per epoch; 0 means one full pass over all logged steps.
  std::size_t steps_per_epoch = 0;
  std::uint64_t seed = 0;
  double c_min = 0.05;
  double c_max = 50.0;
  std::size_t max_random_selection = 10;
  bool mean_reward_baseline = false;
  std::size_t policy_hidden = 64;
  models::VariableCountMode variable_count_mode = models::VariableCountMode::DistinctVariables;

  void validate() const;
};

enum class SampleMode { Sample, Greedy };

struct HighAction {
  std::vector<int> b;
  double log_prob = 0.0;
  std::vector<double> p;
};

struct LowAction {
  std::vector<double> w;
  double log_prob = 0.0;
  std::vector<double> concentration;  // zero off-selection
};

struct RewardBreakdown {
  double r_loss = 0.0;
  double r_mod = 0.0;
  double r_var = 0.0;
  double r_base = 0.0;
  double r_h = 0.0;
  double r_l = 0.0;
};

// ---- action distributions ----

/// Log pmf of independent Bernoullis with success probability sigmoid(logit).
double bernoulli_log_pmf(std::span<const double> logits, std::span<const int> b);
/// Dirichlet log density over the selected coordinates; 0 for a single
/// selected coordinate.
double dirichlet_log_pdf(std::span<const double> w, std::span<const int> b, std::span<const double> concentration);

HighAction high_action_from_logits(std::span<const double> logits, SampleMode mode, std::mt19937_64& rng);
/// Concentrations clamp(exp(logit), c_min, c_max) on the selection. Greedy
/// mode returns normalized concentrations (the Dirichlet mean).
LowAction low_action_from_logits(std::span<const double> logits, std::span<const int> b, SampleMode mode,
                                 double c_min, double c_max, std::mt19937_64& rng);

// ---- rewards ----

RewardBreakdown compute_high_reward(double loss_ens, std::span<const int> b, std::span<const int> variable_counts,
                                    double alpha, double beta);
RewardBreakdown compute_low_reward(double loss_ens, double loss_equal);
/// Both levels for one step.
RewardBreakdown compute_rewards(double loss_ens, double loss_equal, std::span<const int> b,
                                std::span<const int> variable_counts, double alpha, double beta);

/// Squared error of the weighted and of the equal-weight ensemble at one step.
std::pair<double, double> ensemble_losses(std::span<const double> predictions, double truth,
                                          std::span<const double> w, std::span<const int> b);

// ---- networks ----

struct PolicyShape {
  std::size_t state_dim = 128;
  std::size_t n_models = 1;
  std::size_t hidden = 64;
};

void init_high_params(diff::ParameterSet& params, const PolicyShape& shape, std::mt19937_64& rng);
void init_low_params(diff::ParameterSet& params, const PolicyShape& shape, std::mt19937_64& rng);
/// Flat weighting policy over all models (single-tier ablation).
void init_single_params(diff::ParameterSet& params, const PolicyShape& shape, std::mt19937_64& rng);

diff::Var high_logits(diff::Tape& tape, const diff::ParameterSet& params, diff::Var state);
/// Policy input is the state followed by the selection vector.
diff::Var low_logits(diff::Tape& tape, const diff::ParameterSet& params, diff::Var state,
                     const diff::Tensor& selection);
diff::Var single_logits(diff::Tape& tape, const diff::ParameterSet& params, diff::Var state);

/// B x 1 differentiable log-probabilities of recorded actions.
diff::Var high_log_prob(diff::Var logits, const diff::Tensor& selection);
diff::Var low_log_prob(diff::Var logits, const diff::Tensor& selection, const diff::Tensor& weights, double c_min,
                       double c_max);

// ---- updates ----

/// fresh * lambda + old * (1 - lambda), entry by entry.
diff::ParameterSet soft_blend(const diff::ParameterSet& fresh, const diff::ParameterSet& old, double lambda);

/// Gradient of mean(log_prob * reward) with rewards held constant.
diff::GradientMap surrogate_gradients(diff::Tape& tape, diff::Var log_prob, std::span<const double> rewards);

/// One Adam ascent step on the entries whose names start with any of
/// `prefixes`, then soft blending with the pre-step values. Throws
/// NumericError naming the entry on a non-finite gradient.
void reinforce_update(diff::ParameterSet& params, const diff::GradientMap& grads, diff::Adam& optimizer,
                      double lambda, const std::vector<std::string>& prefixes);

// ---- agents ----

enum class AgentKind { Hierarchical, SingleTier };

struct AgentSet {
  AgentKind kind = AgentKind::Hierarchical;
  enc::EncoderConfig encoder;
  PolicyShape shape;
  double c_min = 0.05;
  double c_max = 50.0;
  diff::ParameterSet params;

  static AgentSet create(AgentKind kind, const enc::EncoderConfig& encoder, const TrainConfig& cfg);
  void save(const std::filesystem::path& path) const;
  static AgentSet load(const std::filesystem::path& path);
};

struct Decision {
  HighAction high;
  LowAction low;
};

/// Actions for a batch of encoded inputs. Greedy mode thresholds the
/// selection at 0.5 and uses the Dirichlet mean.
std::vector<Decision> decide(const AgentSet& agents, const enc::EncoderBatch& batch, SampleMode mode,
                             std::mt19937_64& rng);

struct TrainingLogRow {
  std::size_t epoch = 0;
  int stage = 1;
  RewardBreakdown mean;
};

struct TrainResult {
  AgentSet agents;
  std::vector<TrainingLogRow> log;
  diff::ParameterSet initial_params;
};

/// Stage 1 trains the encoder and low-level policy on random selections;
/// stage 2 trains all of them with sampled selections.
TrainResult train_two_stage(const std::vector<streams::PreparedStream>& streams,
                            const models::ModelLibrary& library, const enc::EncoderConfig& encoder,
                            const TrainConfig& cfg);

/// Flat Dirichlet policy over all models rewarded with the negative MSE.
TrainResult train_single_tier(const std::vector<streams::PreparedStream>& streams,
                              const models::ModelLibrary& library, const enc::EncoderConfig& encoder,
                              const TrainConfig& cfg);

inline constexpr const char* kTrainingLogHeader =
    "epoch,stage,mean_r_loss,mean_r_mod,mean_r_var,mean_r_base,mean_r_h,mean_r_l";
void write_training_log_csv(const std::vector<TrainingLogRow>& log, const std::filesystem::path& path);

/// Pack encoder inputs for (stream, step) pairs.
enc::EncoderBatch pack_steps(const std::vector<streams::PreparedStream>& streams,
                             std::span<const std::pair<std::size_t, std::size_t>> steps,
                             const enc::EncoderConfig& cfg);

}  // namespace reem::agents
