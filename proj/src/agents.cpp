#include "reem/agents.hpp"

#include "reem/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace reem::agents {

using diff::ParameterSet;
using diff::Tape;
using diff::Tensor;
using diff::Var;

namespace {

double log_sigmoid_value(double z) { return z >= 0 ? -std::log1p(std::exp(-z)) : z - std::log1p(std::exp(z)); }

double sigmoid_value(double z) { return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); }

void add_mlp(ParameterSet& params, const std::string& prefix, std::size_t in, std::size_t hidden, std::size_t out,
             std::mt19937_64& rng) {
  params.add_glorot(prefix + ".l1.w", {in, hidden}, in, hidden, rng);
  params.add_zeros(prefix + ".l1.b", {1, hidden});
  params.add_glorot(prefix + ".l2.w", {hidden, out}, hidden, out, rng);
  params.add_zeros(prefix + ".l2.b", {1, out});
}

Var mlp(Tape& tape, const ParameterSet& params, const std::string& prefix, Var input) {
  Var h = diff::relu(diff::add_bias(diff::matmul(input, tape.parameter(params, prefix + ".l1.w")),
                                    tape.parameter(params, prefix + ".l1.b")));
  return diff::add_bias(diff::matmul(h, tape.parameter(params, prefix + ".l2.w")),
                        tape.parameter(params, prefix + ".l2.b"));
}

std::span<const double> row(const Tensor& t, std::size_t r) { return t.values().subspan(r * t.cols(), t.cols()); }

}  // namespace

void TrainConfig::validate() const {
  if (alpha < 0 || beta < 0 || lambda < 0 || lambda > 1) {
    throw ContractViolation("train config: need alpha, beta >= 0 and lambda in [0, 1]");
  }
  if (gamma != 0.0) throw ContractViolation("train config: only one-step rewards (gamma = 0) are supported");
  if (batch_size == 0) throw ContractViolation("train config: batch_size must be positive");
  if (!(c_min > 0 && c_min < c_max)) throw ContractViolation("train config: need 0 < c_min < c_max");
  if (max_random_selection == 0) throw ContractViolation("train config: max_random_selection must be positive");
  if (lr_stage1 < 0 || lr_stage2 < 0) throw ContractViolation("train config: learning rates must be nonnegative");
}

// ---- distributions ----

double bernoulli_log_pmf(std::span<const double> logits, std::span<const int> b) {
  if (logits.size() != b.size()) throw ContractViolation("bernoulli_log_pmf: length mismatch");
  double lp = 0.0;
  for (std::size_t i = 0; i < b.size(); ++i) lp += b[i] ? log_sigmoid_value(logits[i]) : log_sigmoid_value(-logits[i]);
  return lp;
}

double dirichlet_log_pdf(std::span<const double> w, std::span<const int> b, std::span<const double> conc) {
  double sum_c = 0.0, lp = 0.0;
  std::size_t k = 0;
  for (std::size_t i = 0; i < b.size(); ++i) {
    if (!b[i]) continue;
    ++k;
    sum_c += conc[i];
    lp += -std::lgamma(conc[i]) + (conc[i] - 1.0) * std::log(w[i]);
  }
  if (k <= 1) return 0.0;
  return lp + std::lgamma(sum_c);
}

HighAction high_action_from_logits(std::span<const double> logits, SampleMode mode, std::mt19937_64& rng) {
  const std::size_t N = logits.size();
  if (N == 0) throw ContractViolation("high action: no models");
  HighAction a;
  a.b.assign(N, 0);
  a.p.resize(N);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t i = 0; i < N; ++i) {
    a.p[i] = sigmoid_value(logits[i]);
    a.b[i] = mode == SampleMode::Greedy ? (a.p[i] > 0.5) : (unit(rng) < a.p[i]);
  }
  if (std::none_of(a.b.begin(), a.b.end(), [](int v) { return v != 0; })) {
    const auto best = std::max_element(logits.begin(), logits.end()) - logits.begin();
    a.b[static_cast<std::size_t>(best)] = 1;
  }
  a.log_prob = bernoulli_log_pmf(logits, a.b);
  return a;
}

LowAction low_action_from_logits(std::span<const double> logits, std::span<const int> b, SampleMode mode,
                                 double c_min, double c_max, std::mt19937_64& rng) {
  const std::size_t N = logits.size();
  if (b.size() != N) throw ContractViolation("low action: selection length mismatch");
  if (std::none_of(b.begin(), b.end(), [](int v) { return v != 0; })) {
    throw ContractViolation("low action: empty selection");
  }
  LowAction a;
  a.w.assign(N, 0.0);
  a.concentration.assign(N, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    if (!b[i]) continue;
    a.concentration[i] = std::clamp(std::exp(logits[i]), c_min, c_max);
    if (mode == SampleMode::Greedy) {
      a.w[i] = a.concentration[i];
    } else {
      std::gamma_distribution<double> g(a.concentration[i], 1.0);
      a.w[i] = std::max(g(rng), 1e-300);
    }
    total += a.w[i];
  }
  for (double& v : a.w) v /= total;
  // Guard against underflow to exact zero inside the support.
  if (mode == SampleMode::Sample) {
    double renorm = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
      if (b[i]) a.w[i] = std::max(a.w[i], 1e-300), renorm += a.w[i];
    }
    for (double& v : a.w) v /= renorm;
  }
  a.log_prob = dirichlet_log_pdf(a.w, b, a.concentration);
  return a;
}

// ---- rewards ----

RewardBreakdown compute_high_reward(double loss_ens, std::span<const int> b, std::span<const int> variable_counts,
                                    double alpha, double beta) {
  if (loss_ens < 0) throw ContractViolation("high reward: loss must be nonnegative");
  if (b.size() != variable_counts.size()) throw ContractViolation("high reward: length mismatch");
  RewardBreakdown r;
  r.r_loss = -loss_ens;
  for (std::size_t i = 0; i < b.size(); ++i) {
    if (!b[i]) continue;
    r.r_mod -= 1.0;
    r.r_var -= static_cast<double>(variable_counts[i]);
  }
  r.r_h = r.r_loss + alpha * r.r_mod + beta * r.r_var;
  return r;
}

RewardBreakdown compute_low_reward(double loss_ens, double loss_equal) {
  if (loss_ens < 0 || loss_equal < 0) throw ContractViolation("low reward: losses must be nonnegative");
  RewardBreakdown r;
  r.r_loss = -loss_ens;
  r.r_base = -loss_equal;
  r.r_l = r.r_loss - r.r_base;
  return r;
}

RewardBreakdown compute_rewards(double loss_ens, double loss_equal, std::span<const int> b,
                                std::span<const int> variable_counts, double alpha, double beta) {
  RewardBreakdown r = compute_high_reward(loss_ens, b, variable_counts, alpha, beta);
  const RewardBreakdown low = compute_low_reward(loss_ens, loss_equal);
  r.r_base = low.r_base;
  r.r_l = low.r_l;
  return r;
}

std::pair<double, double> ensemble_losses(std::span<const double> predictions, double truth,
                                          std::span<const double> w, std::span<const int> b) {
  if (w.size() != predictions.size() || b.size() != predictions.size()) {
    throw ContractViolation("ensemble_losses: length mismatch");
  }
  const auto k = std::count_if(b.begin(), b.end(), [](int v) { return v != 0; });
  if (k == 0) throw ContractViolation("ensemble_losses: empty selection");
  // Same summation order for both ensembles, so uniform weights give
  // bit-identical losses.
  const double share = 1.0 / static_cast<double>(k);
  double y = 0.0, eq = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (w[i] != 0.0) y += w[i] * predictions[i];
    if (b[i]) eq += share * predictions[i];
  }
  return {(y - truth) * (y - truth), (eq - truth) * (eq - truth)};
}

// ---- networks ----

void init_high_params(ParameterSet& params, const PolicyShape& s, std::mt19937_64& rng) {
  add_mlp(params, "high", s.state_dim, s.hidden, s.n_models, rng);
}

void init_low_params(ParameterSet& params, const PolicyShape& s, std::mt19937_64& rng) {
  add_mlp(params, "low", s.state_dim + s.n_models, s.hidden, s.n_models, rng);
}

void init_single_params(ParameterSet& params, const PolicyShape& s, std::mt19937_64& rng) {
  add_mlp(params, "single", s.state_dim, s.hidden, s.n_models, rng);
}

Var high_logits(Tape& tape, const ParameterSet& params, Var state) { return mlp(tape, params, "high", state); }

Var low_logits(Tape& tape, const ParameterSet& params, Var state, const Tensor& selection) {
  return mlp(tape, params, "low", diff::concat_cols({state, tape.constant(selection)}));
}

Var single_logits(Tape& tape, const ParameterSet& params, Var state) { return mlp(tape, params, "single", state); }

Var high_log_prob(Var logits, const Tensor& selection) {
  Tensor unselected = Tensor::zeros_like(selection);
  for (std::size_t i = 0; i < selection.size(); ++i) unselected[i] = 1.0 - selection[i];
  Var on = diff::mul_const(diff::log_sigmoid(logits), selection);
  Var off = diff::mul_const(diff::log_sigmoid(diff::scale(logits, -1.0)), unselected);
  return diff::row_sum(diff::add(on, off));
}

Var low_log_prob(Var logits, const Tensor& selection, const Tensor& weights, double c_min, double c_max) {
  Tensor log_w = Tensor::zeros_like(selection);
  for (std::size_t i = 0; i < selection.size(); ++i) {
    if (selection[i] != 0.0) log_w[i] = std::log(weights[i]);
  }
  Var c = diff::clamp(diff::exp(logits), c_min, c_max);
  Var total = diff::lgamma(diff::row_sum(diff::mul_const(c, selection)));
  Var norm = diff::row_sum(diff::mul_const(diff::lgamma(c), selection));
  Var kernel = diff::row_sum(diff::mul_const(diff::add_scalar(c, -1.0), log_w));
  return diff::add(diff::sub(total, norm), kernel);
}

// ---- updates ----

ParameterSet soft_blend(const ParameterSet& fresh, const ParameterSet& old, double lambda) {
  if (!fresh.same_layout(old)) throw ContractViolation("soft_blend: parameter layouts differ");
  if (lambda < 0 || lambda > 1) throw ContractViolation("soft_blend: lambda must lie in [0, 1]");
  ParameterSet out = old;
  auto it_new = fresh.begin();
  for (auto& [name, t] : out) {
    const auto nv = it_new->second.values();
    auto ov = t.values();
    for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = lambda * nv[i] + (1.0 - lambda) * ov[i];
    ++it_new;
  }
  return out;
}

diff::GradientMap surrogate_gradients(Tape& tape, Var log_prob, std::span<const double> rewards) {
  if (log_prob.rows() != rewards.size() || log_prob.cols() != 1) {
    throw ContractViolation("surrogate: need one reward per log-probability row");
  }
  Tensor r({rewards.size(), 1});
  for (std::size_t i = 0; i < rewards.size(); ++i) r[i] = rewards[i] / static_cast<double>(rewards.size());
  return tape.backward(diff::sum(diff::mul_const(log_prob, r)));
}

void reinforce_update(ParameterSet& params, const diff::GradientMap& grads, diff::Adam& optimizer, double lambda,
                      const std::vector<std::string>& prefixes) {
  auto trainable = [&](const std::string& name) {
    return std::any_of(prefixes.begin(), prefixes.end(), [&](const std::string& p) { return name.starts_with(p); });
  };
  diff::GradientMap selected;
  for (const auto& [name, g] : grads) {
    if (!trainable(name) || !params.contains(name)) continue;
    if (!g.all_finite()) throw NumericError("non-finite policy gradient for '" + name + "'");
    selected.emplace(name, g);
  }
  ParameterSet old;
  for (const auto& [name, g] : selected) old.add(name, params.at(name));
  optimizer.ascend(params, selected);
  for (const auto& [name, t] : old) {
    auto fresh = params.at(name).values();
    const auto prev = t.values();
    for (std::size_t i = 0; i < fresh.size(); ++i) fresh[i] = lambda * fresh[i] + (1.0 - lambda) * prev[i];
  }
}

// ---- agents ----

AgentSet AgentSet::create(AgentKind kind, const enc::EncoderConfig& encoder, const TrainConfig& cfg) {
  cfg.validate();
  encoder.validate();
  AgentSet a;
  a.kind = kind;
  a.encoder = encoder;
  a.shape = {encoder.state_dim(), encoder.n_models, cfg.policy_hidden};
  a.c_min = cfg.c_min;
  a.c_max = cfg.c_max;
  std::mt19937_64 rng(cfg.seed);
  enc::init_encoder_params(a.params, encoder, rng);
  if (kind == AgentKind::Hierarchical) {
    init_high_params(a.params, a.shape, rng);
    init_low_params(a.params, a.shape, rng);
  } else {
    init_single_params(a.params, a.shape, rng);
  }
  return a;
}

enc::EncoderBatch pack_steps(const std::vector<streams::PreparedStream>& streams,
                             std::span<const std::pair<std::size_t, std::size_t>> steps,
                             const enc::EncoderConfig& cfg) {
  std::vector<models::TimeSeriesWindow> windows;
  std::vector<std::vector<double>> errors;
  windows.reserve(steps.size());
  errors.reserve(steps.size());
  for (const auto& [s, k] : steps) {
    windows.push_back(streams[s].window(k));
    errors.push_back(streams[s].tracker_errors(k));
  }
  std::vector<const models::TimeSeriesWindow*> wp;
  std::vector<const std::vector<double>*> ep;
  for (std::size_t i = 0; i < windows.size(); ++i) wp.push_back(&windows[i]), ep.push_back(&errors[i]);
  return enc::pack_batch(wp, ep, cfg);
}

std::vector<Decision> decide(const AgentSet& agents, const enc::EncoderBatch& batch, SampleMode mode,
                             std::mt19937_64& rng) {
  const std::size_t B = batch.batch, N = agents.shape.n_models;
  Tape tape;
  Var state = enc::build_state(tape, agents.params, batch, agents.encoder);
  std::vector<Decision> out(B);
  Tensor selection({B, N});
  if (agents.kind == AgentKind::Hierarchical) {
    const Tensor hl = high_logits(tape, agents.params, state).value();
    for (std::size_t r = 0; r < B; ++r) {
      out[r].high = high_action_from_logits(row(hl, r), mode, rng);
      for (std::size_t i = 0; i < N; ++i) selection.at(r, i) = out[r].high.b[i];
    }
  } else {
    for (std::size_t r = 0; r < B; ++r) {
      out[r].high.b.assign(N, 1);
      out[r].high.p.assign(N, 1.0);
    }
    for (double& v : selection.values()) v = 1.0;
  }
  const Tensor ll = agents.kind == AgentKind::Hierarchical
                        ? low_logits(tape, agents.params, state, selection).value()
                        : single_logits(tape, agents.params, state).value();
  for (std::size_t r = 0; r < B; ++r) {
    out[r].low = low_action_from_logits(row(ll, r), out[r].high.b, mode, agents.c_min, agents.c_max, rng);
  }
  return out;
}

namespace {

struct StepCursor {
  std::vector<std::pair<std::size_t, std::size_t>> order;
  std::size_t next = 0;
  std::mt19937_64* rng = nullptr;

  std::vector<std::pair<std::size_t, std::size_t>> take(std::size_t n) {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    while (out.size() < n) {
      if (next == order.size()) {
        std::shuffle(order.begin(), order.end(), *rng);
        next = 0;
      }
      out.push_back(order[next++]);
    }
    return out;
  }
};

struct Accumulator {
  RewardBreakdown sum;
  std::size_t n = 0;
  void add(const RewardBreakdown& r) {
    sum.r_loss += r.r_loss, sum.r_mod += r.r_mod, sum.r_var += r.r_var;
    sum.r_base += r.r_base, sum.r_h += r.r_h, sum.r_l += r.r_l;
    ++n;
  }
  RewardBreakdown mean() const {
    RewardBreakdown m = sum;
    const double d = static_cast<double>(std::max<std::size_t>(n, 1));
    m.r_loss /= d, m.r_mod /= d, m.r_var /= d, m.r_base /= d, m.r_h /= d, m.r_l /= d;
    return m;
  }
};

std::vector<double> centered(std::vector<double> r, bool enabled) {
  if (!enabled || r.empty()) return r;
  const double m = std::accumulate(r.begin(), r.end(), 0.0) / static_cast<double>(r.size());
  for (double& v : r) v -= m;
  return r;
}

void check_streams(const std::vector<streams::PreparedStream>& streams, const models::ModelLibrary& library) {
  std::size_t total = 0;
  for (const auto& s : streams) {
    if (s.n_models() != library.size() && s.steps() > 0) {
      throw ConfigError("training stream '" + s.room + "' was prepared with a different model library");
    }
    total += s.steps();
  }
  if (total == 0) throw ConfigError("training requires at least one nonempty stream");
}

StepCursor make_cursor(const std::vector<streams::PreparedStream>& streams, std::mt19937_64& rng) {
  StepCursor c;
  for (std::size_t s = 0; s < streams.size(); ++s) {
    for (std::size_t k = 0; k < streams[s].steps(); ++k) c.order.emplace_back(s, k);
  }
  c.next = c.order.size();
  c.rng = &rng;
  return c;
}

std::size_t steps_in_epoch(const TrainConfig& cfg, std::size_t total_steps) {
  if (cfg.steps_per_epoch > 0) return cfg.steps_per_epoch;
  return (total_steps + cfg.batch_size - 1) / cfg.batch_size;
}

std::vector<int> random_selection(std::size_t N, std::size_t cap, std::mt19937_64& rng) {
  const std::size_t k = std::uniform_int_distribution<std::size_t>(1, std::min(N, cap))(rng);
  std::vector<std::size_t> ids(N);
  std::iota(ids.begin(), ids.end(), 0);
  std::shuffle(ids.begin(), ids.end(), rng);
  std::vector<int> b(N, 0);
  for (std::size_t i = 0; i < k; ++i) b[ids[i]] = 1;
  return b;
}

}  // namespace

TrainResult train_two_stage(const std::vector<streams::PreparedStream>& streams, const models::ModelLibrary& library,
                            const enc::EncoderConfig& encoder, const TrainConfig& cfg) {
  check_streams(streams, library);
  enc::EncoderConfig ecfg = encoder;
  ecfg.n_models = library.size();
  TrainResult result;
  result.agents = AgentSet::create(AgentKind::Hierarchical, ecfg, cfg);
  result.initial_params = result.agents.params;
  AgentSet& agents = result.agents;

  const std::size_t N = library.size(), B = cfg.batch_size;
  const auto varcounts = library.variable_counts(cfg.variable_count_mode);
  std::mt19937_64 rng(cfg.seed ^ 0x9E3779B97F4A7C15ULL);
  StepCursor cursor = make_cursor(streams, rng);
  const std::size_t per_epoch = steps_in_epoch(cfg, cursor.order.size());

  std::size_t epoch = 0;
  for (int stage = 1; stage <= 2; ++stage) {
    diff::Adam adam({stage == 1 ? cfg.lr_stage1 : cfg.lr_stage2});
    const std::vector<std::string> prefixes =
        stage == 1 ? std::vector<std::string>{"enc.", "low."} : std::vector<std::string>{"enc.", "high.", "low."};
    const std::size_t epochs = stage == 1 ? cfg.stage1_epochs : cfg.stage2_epochs;
    for (std::size_t e = 0; e < epochs; ++e, ++epoch) {
      Accumulator acc;
      for (std::size_t step = 0; step < per_epoch; ++step) {
        const auto picks = cursor.take(B);
        const enc::EncoderBatch batch = pack_steps(streams, picks, agents.encoder);
        Tape tape;
        Var state = enc::build_state(tape, agents.params, batch, agents.encoder);

        std::vector<std::vector<int>> b(B);
        Tensor selection({B, N});
        Var hl;
        if (stage == 1) {
          for (std::size_t r = 0; r < B; ++r) b[r] = random_selection(N, cfg.max_random_selection, rng);
        } else {
          hl = high_logits(tape, agents.params, state);
          for (std::size_t r = 0; r < B; ++r) {
            b[r] = high_action_from_logits(row(hl.value(), r), SampleMode::Sample, rng).b;
          }
        }
        for (std::size_t r = 0; r < B; ++r) {
          for (std::size_t i = 0; i < N; ++i) selection.at(r, i) = b[r][i];
        }
        Var ll = low_logits(tape, agents.params, state, selection);
        Tensor weights({B, N});
        std::vector<double> r_h(B), r_l(B);
        for (std::size_t r = 0; r < B; ++r) {
          const LowAction low =
              low_action_from_logits(row(ll.value(), r), b[r], SampleMode::Sample, cfg.c_min, cfg.c_max, rng);
          std::copy(low.w.begin(), low.w.end(), weights.values().begin() + static_cast<std::ptrdiff_t>(r * N));
          const auto& s = streams[picks[r].first];
          const auto k = static_cast<Eigen::Index>(picks[r].second);
          std::vector<double> preds(N);
          for (std::size_t i = 0; i < N; ++i) preds[i] = s.predictions(k, static_cast<Eigen::Index>(i));
          const auto [loss, loss_eq] = ensemble_losses(preds, s.truth[picks[r].second], low.w, b[r]);
          const RewardBreakdown rb = compute_rewards(loss, loss_eq, b[r], varcounts, cfg.alpha, cfg.beta);
          r_h[r] = rb.r_h;
          r_l[r] = rb.r_l;
          acc.add(rb);
        }

        Tensor rl({B, 1}), rh({B, 1});
        const auto rl_used = centered(r_l, cfg.mean_reward_baseline);
        const auto rh_used = centered(r_h, cfg.mean_reward_baseline);
        for (std::size_t r = 0; r < B; ++r) {
          rl[r] = rl_used[r] / static_cast<double>(B);
          rh[r] = rh_used[r] / static_cast<double>(B);
        }
        Var objective = diff::sum(diff::mul_const(low_log_prob(ll, selection, weights, cfg.c_min, cfg.c_max), rl));
        if (stage == 2) objective = diff::add(objective, diff::sum(diff::mul_const(high_log_prob(hl, selection), rh)));
        const diff::GradientMap grads = tape.backward(objective);
        reinforce_update(agents.params, grads, adam, cfg.lambda, prefixes);
      }
      result.log.push_back({epoch, stage, acc.mean()});
    }
  }
  return result;
}

TrainResult train_single_tier(const std::vector<streams::PreparedStream>& streams,
                              const models::ModelLibrary& library, const enc::EncoderConfig& encoder,
                              const TrainConfig& cfg) {
  check_streams(streams, library);
  enc::EncoderConfig ecfg = encoder;
  ecfg.n_models = library.size();
  TrainResult result;
  result.agents = AgentSet::create(AgentKind::SingleTier, ecfg, cfg);
  result.initial_params = result.agents.params;
  AgentSet& agents = result.agents;

  const std::size_t N = library.size(), B = cfg.batch_size;
  std::mt19937_64 rng(cfg.seed ^ 0x9E3779B97F4A7C15ULL);
  StepCursor cursor = make_cursor(streams, rng);
  const std::size_t per_epoch = steps_in_epoch(cfg, cursor.order.size());
  Tensor selection({B, N});
  for (double& v : selection.values()) v = 1.0;
  const std::vector<int> all(N, 1);

  std::size_t epoch = 0;
  for (int stage = 1; stage <= 2; ++stage) {
    diff::Adam adam({stage == 1 ? cfg.lr_stage1 : cfg.lr_stage2});
    const std::size_t epochs = stage == 1 ? cfg.stage1_epochs : cfg.stage2_epochs;
    for (std::size_t e = 0; e < epochs; ++e, ++epoch) {
      Accumulator acc;
      for (std::size_t step = 0; step < per_epoch; ++step) {
        const auto picks = cursor.take(B);
        const enc::EncoderBatch batch = pack_steps(streams, picks, agents.encoder);
        Tape tape;
        Var state = enc::build_state(tape, agents.params, batch, agents.encoder);
        Var logits = single_logits(tape, agents.params, state);
        Tensor weights({B, N});
        std::vector<double> reward(B);
        for (std::size_t r = 0; r < B; ++r) {
          const LowAction low =
              low_action_from_logits(row(logits.value(), r), all, SampleMode::Sample, cfg.c_min, cfg.c_max, rng);
          std::copy(low.w.begin(), low.w.end(), weights.values().begin() + static_cast<std::ptrdiff_t>(r * N));
          const auto& s = streams[picks[r].first];
          const auto k = static_cast<Eigen::Index>(picks[r].second);
          std::vector<double> preds(N);
          for (std::size_t i = 0; i < N; ++i) preds[i] = s.predictions(k, static_cast<Eigen::Index>(i));
          const auto [loss, loss_eq] = ensemble_losses(preds, s.truth[picks[r].second], low.w, all);
          RewardBreakdown rb;
          rb.r_loss = -loss;
          rb.r_base = -loss_eq;
          rb.r_h = rb.r_loss;
          rb.r_l = rb.r_loss;
          reward[r] = rb.r_loss;
          acc.add(rb);
        }
        const auto used = centered(reward, cfg.mean_reward_baseline);
        Tensor rt({B, 1});
        for (std::size_t r = 0; r < B; ++r) rt[r] = used[r] / static_cast<double>(B);
        Var objective = diff::sum(diff::mul_const(low_log_prob(logits, selection, weights, cfg.c_min, cfg.c_max), rt));
        reinforce_update(agents.params, tape.backward(objective), adam, cfg.lambda, {"enc.", "single."});
      }
      result.log.push_back({epoch, stage, acc.mean()});
    }
  }
  return result;
}

}  // namespace reem::agents
