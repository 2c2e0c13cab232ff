#pragma once

// Shared state representation: three dilated causal TCN stacks over the
// temperature, control and disturbance histories fused by cross-attention,
// concatenated with an embedding of each base model's last-step error.

#include "reem/diff.hpp"
#include "reem/models.hpp"

#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace reem::enc {

struct EncoderConfig {
  std::size_t hidden = 64;
  std::size_t kernel = 4;
  std::vector<std::size_t> dilations{1, 2, 4};
  std::size_t lookback = 8;
  std::size_t n_models = 1;
  /// Rank-normalize errors before embedding; raw squared errors otherwise.
  bool rank_errors = true;

  std::size_t state_dim() const noexcept { return 2 * hidden; }
  /// Number of past positions (including the current one) that can reach
  /// the last output of one TCN stack.
  std::size_t receptive_field() const noexcept;
  void validate() const;
};

/// Adds every encoder parameter (prefix "enc.") with Glorot init.
void init_encoder_params(diff::ParameterSet& params, const EncoderConfig& cfg, std::mt19937_64& rng);

/// Fixed input scaling applied before the TCN stacks.
struct InputScaling {
  double temp_center = 20.0, temp_scale = 5.0;
  double power_scale = 2000.0;
  double ambient_center = 10.0, ambient_scale = 10.0;
  double occupancy_scale = 10.0;
  double solar_scale = 500.0;
};

/// Packed inputs for a batch of windows, one sequence of length L each.
struct EncoderBatch {
  std::size_t batch = 0;
  std::size_t lookback = 0;
  diff::Tensor x;       // (B*L) x 1
  diff::Tensor u;       // (B*L) x 1, left-padded with the first value
  diff::Tensor d;       // (B*L) x 4
  diff::Tensor errors;  // B x N, already rank-normalized when configured
};

EncoderBatch pack_batch(std::span<const models::TimeSeriesWindow* const> windows,
                        std::span<const std::vector<double>* const> errors, const EncoderConfig& cfg,
                        const InputScaling& scaling = {});

/// Ranks in [0, 1] with average ranks on ties; 0.5 for all-equal input.
std::vector<double> rank_normalize(std::span<const double> errors);

/// One TCN stack. `input` is (B*seq_len) x c_in; output (B*seq_len) x hidden.
diff::Var tcn_forward(diff::Tape& tape, const diff::ParameterSet& params, const std::string& prefix,
                      diff::Var input, std::size_t seq_len, const EncoderConfig& cfg);

struct EncodedBatch {
  diff::Var window_embedding;  // B x hidden
  diff::Var attention;         // (B*L) x L, row-stochastic
};

EncodedBatch encode_windows(diff::Tape& tape, const diff::ParameterSet& params, const EncoderBatch& batch,
                            const EncoderConfig& cfg);
diff::Var embed_errors(diff::Tape& tape, const diff::ParameterSet& params, const EncoderBatch& batch,
                       const EncoderConfig& cfg);
/// B x 2*hidden: window embedding followed by error embedding.
diff::Var build_state(diff::Tape& tape, const diff::ParameterSet& params, const EncoderBatch& batch,
                      const EncoderConfig& cfg);

// Single-window conveniences without a caller-owned tape.
std::vector<double> encode_window(const models::TimeSeriesWindow& window, const diff::ParameterSet& params,
                                  const EncoderConfig& cfg);
std::vector<double> embed_errors(std::span<const double> errors, const diff::ParameterSet& params,
                                 const EncoderConfig& cfg);
std::vector<double> build_state(const models::TimeSeriesWindow& window, std::span<const double> errors,
                                const diff::ParameterSet& params, const EncoderConfig& cfg);
/// L x L attention matrix of one window.
diff::Tensor attention_matrix(const models::TimeSeriesWindow& window, const diff::ParameterSet& params,
                              const EncoderConfig& cfg);

}  // namespace reem::enc
