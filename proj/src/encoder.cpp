#include "reem/encoder.hpp"

#include "reem/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace reem::enc {

using diff::ParameterSet;
using diff::Tape;
using diff::Tensor;
using diff::Var;

namespace {

constexpr std::size_t kDisturbanceInputs = models::kDisturbanceChannels;

std::string block_name(const std::string& prefix, std::size_t b, const char* leaf) {
  return prefix + ".b" + std::to_string(b) + "." + leaf;
}

void add_stack(ParameterSet& params, const std::string& prefix, std::size_t c_in, const EncoderConfig& cfg,
               std::mt19937_64& rng) {
  const std::size_t h = cfg.hidden, K = cfg.kernel;
  for (std::size_t b = 0; b < cfg.dilations.size(); ++b) {
    const std::size_t width = b == 0 ? c_in : h;
    params.add_glorot(block_name(prefix, b, "conv1.w"), {K, width, h}, K * width, K * h, rng);
    params.add_zeros(block_name(prefix, b, "conv1.b"), {1, h});
    params.add_glorot(block_name(prefix, b, "conv2.w"), {K, h, h}, K * h, K * h, rng);
    params.add_zeros(block_name(prefix, b, "conv2.b"), {1, h});
    if (width != h) params.add_glorot(block_name(prefix, b, "proj.w"), {width, h}, width, h, rng);
  }
}

std::vector<const models::TimeSeriesWindow*> one(const models::TimeSeriesWindow& w) { return {&w}; }

std::vector<double> row_values(const Tensor& t, std::size_t r) {
  return {t.values().begin() + static_cast<std::ptrdiff_t>(r * t.cols()),
          t.values().begin() + static_cast<std::ptrdiff_t>((r + 1) * t.cols())};
}

}  // namespace

std::size_t EncoderConfig::receptive_field() const noexcept {
  std::size_t span = 0;
  for (std::size_t d : dilations) span += 2 * (kernel - 1) * d;
  return span + 1;
}

void EncoderConfig::validate() const {
  if (hidden == 0 || kernel == 0 || dilations.empty() || lookback == 0 || n_models == 0) {
    throw ContractViolation("encoder config: hidden, kernel, dilations, lookback and n_models must be positive");
  }
}

void init_encoder_params(ParameterSet& params, const EncoderConfig& cfg, std::mt19937_64& rng) {
  cfg.validate();
  const std::size_t h = cfg.hidden;
  add_stack(params, "enc.tx", 1, cfg, rng);
  add_stack(params, "enc.tu", 1, cfg, rng);
  add_stack(params, "enc.td", kDisturbanceInputs, cfg, rng);
  params.add_glorot("enc.att.wq", {h, h}, h, h, rng);
  params.add_glorot("enc.att.wk", {2 * h, h}, 2 * h, h, rng);
  params.add_glorot("enc.att.wv", {2 * h, h}, 2 * h, h, rng);
  params.add_glorot("enc.err.w", {cfg.n_models, h}, cfg.n_models, h, rng);
  params.add_zeros("enc.err.b", {1, h});
}

std::vector<double> rank_normalize(std::span<const double> errors) {
  const std::size_t n = errors.size();
  std::vector<double> out(n, 0.5);
  if (n <= 1) return out;
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return errors[a] < errors[b]; });
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && errors[idx[j + 1]] == errors[idx[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j);
    for (std::size_t k = i; k <= j; ++k) out[idx[k]] = avg / static_cast<double>(n - 1);
    i = j + 1;
  }
  return out;
}

EncoderBatch pack_batch(std::span<const models::TimeSeriesWindow* const> windows,
                        std::span<const std::vector<double>* const> errors, const EncoderConfig& cfg,
                        const InputScaling& s) {
  if (windows.size() != errors.size() || windows.empty()) {
    throw ContractViolation("encoder: need one error vector per window and a nonempty batch");
  }
  const std::size_t B = windows.size(), L = cfg.lookback, N = cfg.n_models;
  EncoderBatch out;
  out.batch = B;
  out.lookback = L;
  out.x = Tensor({B * L, 1});
  out.u = Tensor({B * L, 1});
  out.d = Tensor({B * L, kDisturbanceInputs});
  out.errors = Tensor({B, N});
  for (std::size_t b = 0; b < B; ++b) {
    const auto& w = *windows[b];
    w.validate();
    if (w.lookback() < L) throw ContractViolation("encoder: window shorter than the configured look-back");
    const std::size_t off = w.lookback() - L;
    for (std::size_t i = 0; i < L; ++i) {
      const std::size_t r = b * L + i;
      out.x[r] = (w.x[off + i] - s.temp_center) / s.temp_scale;
      // u has L-1 entries; index i reads u_{t-L+i} and position 0 repeats the first value.
      const std::size_t ui = off + i == 0 ? 0 : off + i - 1;
      out.u[r] = w.u[std::min(ui, w.u.size() - 1)] / s.power_scale;
      const auto& d = w.d[off + i];
      out.d.at(r, 0) = (d[0] - s.ambient_center) / s.ambient_scale;
      out.d.at(r, 1) = d[1] / s.occupancy_scale;
      out.d.at(r, 2) = d[2] / s.solar_scale;
      out.d.at(r, 3) = d[3];
    }
    const auto& e = *errors[b];
    if (e.size() != N) {
      throw ContractViolation("encoder: got " + std::to_string(e.size()) + " model errors, expected " +
                              std::to_string(N));
    }
    for (double v : e) {
      if (!(v >= 0.0)) throw ContractViolation("encoder: model errors must be nonnegative");
    }
    const std::vector<double> feat = cfg.rank_errors ? rank_normalize(e) : e;
    std::copy(feat.begin(), feat.end(), out.errors.values().begin() + static_cast<std::ptrdiff_t>(b * N));
  }
  return out;
}

Var tcn_forward(Tape& tape, const ParameterSet& params, const std::string& prefix, Var input, std::size_t seq_len,
                const EncoderConfig& cfg) {
  Var h = input;
  for (std::size_t b = 0; b < cfg.dilations.size(); ++b) {
    const std::size_t dil = cfg.dilations[b];
    Var y = diff::causal_conv1d(h, tape.parameter(params, block_name(prefix, b, "conv1.w")),
                                tape.parameter(params, block_name(prefix, b, "conv1.b")), dil, seq_len);
    y = diff::relu(y);
    y = diff::causal_conv1d(y, tape.parameter(params, block_name(prefix, b, "conv2.w")),
                            tape.parameter(params, block_name(prefix, b, "conv2.b")), dil, seq_len);
    const std::string proj = block_name(prefix, b, "proj.w");
    Var skip = params.contains(proj) ? diff::matmul(h, tape.parameter(params, proj)) : h;
    h = diff::relu(diff::add(skip, y));
  }
  return h;
}

EncodedBatch encode_windows(Tape& tape, const ParameterSet& params, const EncoderBatch& batch,
                            const EncoderConfig& cfg) {
  const std::size_t B = batch.batch, L = batch.lookback;
  Var hx = tcn_forward(tape, params, "enc.tx", tape.constant(batch.x), L, cfg);
  Var hu = tcn_forward(tape, params, "enc.tu", tape.constant(batch.u), L, cfg);
  Var hd = tcn_forward(tape, params, "enc.td", tape.constant(batch.d), L, cfg);
  Var kv = diff::concat_cols({hu, hd});

  Var q = diff::matmul(hx, tape.parameter(params, "enc.att.wq"));
  Var k = diff::matmul(kv, tape.parameter(params, "enc.att.wk"));
  Var v = diff::matmul(kv, tape.parameter(params, "enc.att.wv"));
  Var scores = diff::scale(diff::batched_matmul(q, k, B, true), 1.0 / std::sqrt(static_cast<double>(cfg.hidden)));
  Var attention = diff::softmax_rows(scores);
  Var mixed = diff::batched_matmul(attention, v, B, false);

  std::vector<std::size_t> last(B);
  for (std::size_t b = 0; b < B; ++b) last[b] = b * L + L - 1;
  return {diff::select_rows(mixed, std::move(last)), attention};
}

Var embed_errors(Tape& tape, const ParameterSet& params, const EncoderBatch& batch, const EncoderConfig&) {
  Var e = diff::matmul(tape.constant(batch.errors), tape.parameter(params, "enc.err.w"));
  return diff::tanh(diff::add_bias(e, tape.parameter(params, "enc.err.b")));
}

Var build_state(Tape& tape, const ParameterSet& params, const EncoderBatch& batch, const EncoderConfig& cfg) {
  Var ed = encode_windows(tape, params, batch, cfg).window_embedding;
  Var em = embed_errors(tape, params, batch, cfg);
  return diff::concat_cols({ed, em});
}

std::vector<double> encode_window(const models::TimeSeriesWindow& window, const ParameterSet& params,
                                  const EncoderConfig& cfg) {
  const std::vector<double> flat(cfg.n_models, 1.0);
  const auto ws = one(window);
  const std::vector<const std::vector<double>*> es{&flat};
  Tape tape;
  return row_values(encode_windows(tape, params, pack_batch(ws, es, cfg), cfg).window_embedding.value(), 0);
}

std::vector<double> embed_errors(std::span<const double> errors, const ParameterSet& params,
                                 const EncoderConfig& cfg) {
  EncoderBatch batch;
  batch.batch = 1;
  batch.errors = Tensor({1, cfg.n_models});
  if (errors.size() != cfg.n_models) throw ContractViolation("embed_errors: wrong number of model errors");
  for (double v : errors) {
    if (!(v >= 0.0)) throw ContractViolation("embed_errors: model errors must be nonnegative");
  }
  const std::vector<double> feat = cfg.rank_errors ? rank_normalize(errors) : std::vector<double>(errors.begin(), errors.end());
  std::copy(feat.begin(), feat.end(), batch.errors.values().begin());
  Tape tape;
  return row_values(embed_errors(tape, params, batch, cfg).value(), 0);
}

std::vector<double> build_state(const models::TimeSeriesWindow& window, std::span<const double> errors,
                                const ParameterSet& params, const EncoderConfig& cfg) {
  const std::vector<double> e(errors.begin(), errors.end());
  const auto ws = one(window);
  const std::vector<const std::vector<double>*> es{&e};
  Tape tape;
  return row_values(build_state(tape, params, pack_batch(ws, es, cfg), cfg).value(), 0);
}

Tensor attention_matrix(const models::TimeSeriesWindow& window, const ParameterSet& params,
                        const EncoderConfig& cfg) {
  const std::vector<double> flat(cfg.n_models, 1.0);
  const auto ws = one(window);
  const std::vector<const std::vector<double>*> es{&flat};
  Tape tape;
  return encode_windows(tape, params, pack_batch(ws, es, cfg), cfg).attention.value();
}

}  // namespace reem::enc
