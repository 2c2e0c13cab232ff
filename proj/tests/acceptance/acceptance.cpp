// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// nonzero if any selected criterion fails.
//
//   reem_acceptance [criterion ...]     e.g. `reem_acceptance 1 2 3` or `all`
//
// Criteria 6, 7 and 8 share one trained benchmark per seed; run them in the
// same invocation to train only once.

#include "reem/agents.hpp"
#include "reem/commands.hpp"
#include "reem/diff.hpp"
#include "reem/errors.hpp"
#include "reem/models.hpp"
#include "reem/pipeline.hpp"
#include "reem/simulator.hpp"
#include "support/gradcheck.hpp"
#include "support/oracle_bench.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace reem;
using diff::ParameterSet;
using diff::Tape;
using diff::Tensor;
using diff::Var;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

Tensor random_tensor(diff::Shape shape, std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = u(rng);
  return t;
}

// ---- 1. gradients ----

using Primitive = std::function<Var(Tape&, const ParameterSet&)>;

/// Each primitive reduced to a scalar through a fixed random weighting.
std::vector<std::pair<std::string, Primitive>> primitives(std::mt19937_64& rng) {
  auto weighted = [c = random_tensor({4, 3}, rng, -1, 1)](Var y) { return diff::sum(diff::mul_const(y, c)); };
  auto weighted_any = [](Var y) { return diff::sum(diff::square(y)); };
  auto p = [](Tape& t, const ParameterSet& ps, const char* n) { return t.parameter(ps, n); };
  const std::vector<double> row_scale{0.5, -1.0, 2.0, 1.5};
  const Tensor factor = random_tensor({4, 3}, rng, -2, 2);
  Tensor mask({4, 3});
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = i % 3 == 2 ? 0.0 : 1.0;
  return {
      {"matmul", [=](Tape& t, const ParameterSet& s) { return weighted_any(diff::matmul(p(t, s, "x"), p(t, s, "w"))); }},
      {"batched_matmul",
       [=](Tape& t, const ParameterSet& s) { return weighted_any(diff::batched_matmul(p(t, s, "x"), p(t, s, "y"), 2, true)); }},
      {"add", [=](Tape& t, const ParameterSet& s) { return weighted(diff::add(p(t, s, "x"), p(t, s, "y"))); }},
      {"sub", [=](Tape& t, const ParameterSet& s) { return weighted_any(diff::sub(p(t, s, "x"), p(t, s, "y"))); }},
      {"mul", [=](Tape& t, const ParameterSet& s) { return weighted(diff::mul(p(t, s, "x"), p(t, s, "y"))); }},
      {"add_bias", [=](Tape& t, const ParameterSet& s) { return weighted_any(diff::add_bias(p(t, s, "x"), p(t, s, "b"))); }},
      {"scale", [=](Tape& t, const ParameterSet& s) { return weighted(diff::scale(p(t, s, "x"), -1.7)); }},
      {"add_scalar", [=](Tape& t, const ParameterSet& s) { return weighted_any(diff::add_scalar(p(t, s, "x"), 0.3)); }},
      {"mul_const", [=](Tape& t, const ParameterSet& s) { return weighted_any(diff::mul_const(p(t, s, "x"), factor)); }},
      {"scale_rows", [=](Tape& t, const ParameterSet& s) { return weighted_any(diff::scale_rows(p(t, s, "x"), row_scale)); }},
      {"relu", [=](Tape& t, const ParameterSet& s) { return weighted(diff::relu(p(t, s, "x"))); }},
      {"tanh", [=](Tape& t, const ParameterSet& s) { return weighted(diff::tanh(p(t, s, "x"))); }},
      {"sigmoid", [=](Tape& t, const ParameterSet& s) { return weighted(diff::sigmoid(p(t, s, "x"))); }},
      {"log_sigmoid", [=](Tape& t, const ParameterSet& s) { return weighted(diff::log_sigmoid(p(t, s, "x"))); }},
      {"exp", [=](Tape& t, const ParameterSet& s) { return weighted(diff::exp(p(t, s, "x"))); }},
      {"log", [=](Tape& t, const ParameterSet& s) { return weighted(diff::log(p(t, s, "pos"))); }},
      {"lgamma", [=](Tape& t, const ParameterSet& s) { return weighted(diff::lgamma(p(t, s, "pos"))); }},
      {"square", [=](Tape& t, const ParameterSet& s) { return weighted(diff::square(p(t, s, "x"))); }},
      {"clamp", [=](Tape& t, const ParameterSet& s) { return weighted(diff::clamp(p(t, s, "x"), -1.0, 1.0)); }},
      {"sum", [=](Tape& t, const ParameterSet& s) { return diff::square(diff::sum(p(t, s, "x"))); }},
      {"mean", [=](Tape& t, const ParameterSet& s) { return diff::square(diff::mean(p(t, s, "x"))); }},
      {"row_sum", [=](Tape& t, const ParameterSet& s) { return weighted_any(diff::row_sum(p(t, s, "x"))); }},
      {"concat_cols",
       [=](Tape& t, const ParameterSet& s) { return weighted_any(diff::concat_cols({p(t, s, "x"), p(t, s, "y")})); }},
      {"select_rows",
       [=](Tape& t, const ParameterSet& s) { return weighted_any(diff::select_rows(p(t, s, "x"), {3, 0, 3})); }},
      {"masked_softmax",
       [=](Tape& t, const ParameterSet& s) { return weighted(diff::masked_softmax(p(t, s, "x"), mask)); }},
      {"softmax_rows", [=](Tape& t, const ParameterSet& s) { return weighted(diff::softmax_rows(p(t, s, "x"))); }},
      {"causal_conv1d",
       [=](Tape& t, const ParameterSet& s) {
         return weighted_any(diff::causal_conv1d(p(t, s, "x"), p(t, s, "k"), p(t, s, "kb"), 2, 2));
       }},
  };
}

/// Surrogate of the full encoder and both policies on sampled actions.
struct SurrogateBench {
  enc::EncoderConfig ecfg;
  agents::AgentSet agents;
  enc::EncoderBatch batch;
  Tensor selection, weights;
  std::vector<double> rewards;

  explicit SurrogateBench(std::uint64_t seed) {
    ecfg.hidden = 8;
    ecfg.n_models = 4;
    agents::TrainConfig tcfg;
    tcfg.seed = seed;
    tcfg.policy_hidden = 8;
    testing::OracleBench bench(1, 4);
    agents = agents::AgentSet::create(agents::AgentKind::Hierarchical, ecfg, tcfg);
    std::vector<std::pair<std::size_t, std::size_t>> steps;
    for (std::size_t k = 0; k < 6; ++k) steps.emplace_back(0, 10 + 7 * k);
    batch = agents::pack_steps(bench.streams, steps, ecfg);
    std::mt19937_64 rng(seed);
    const auto decisions = agents::decide(agents, batch, agents::SampleMode::Sample, rng);
    selection = Tensor({6, 4});
    weights = Tensor({6, 4});
    for (std::size_t r = 0; r < 6; ++r) {
      for (std::size_t i = 0; i < 4; ++i) {
        selection.at(r, i) = decisions[r].high.b[i];
        weights.at(r, i) = decisions[r].low.w[i];
      }
      rewards.push_back(std::normal_distribution<double>(0.0, 1.0)(rng));
    }
  }

  Var operator()(Tape& tape, const ParameterSet& params) const {
    Var state = enc::build_state(tape, params, batch, ecfg);
    Var lp = diff::add(agents::high_log_prob(agents::high_logits(tape, params, state), selection),
                       agents::low_log_prob(agents::low_logits(tape, params, state, selection), selection, weights,
                                            0.05, 50));
    return diff::mean(diff::mul_const(lp, Tensor({rewards.size(), 1}, rewards)));
  }
};

Outcome criterion_gradients() {
  std::mt19937_64 rng(1);
  double worst = 0.0;
  std::string worst_where;
  std::size_t probes = 0;
  auto record = [&](const testing::GradCheckResult& r, const std::string& what) {
    probes += r.probes;
    if (r.max_rel_error > worst) worst = r.max_rel_error, worst_where = what + " " + r.worst;
  };
  for (int round = 0; round < 3; ++round) {
    ParameterSet params;
    params.add("x", random_tensor({4, 3}, rng, -2, 2));
    params.add("y", random_tensor({4, 3}, rng, -2, 2));
    params.add("w", random_tensor({3, 5}, rng, -1, 1));
    params.add("b", random_tensor({3}, rng, -1, 1));
    params.add("pos", random_tensor({4, 3}, rng, 0.5, 3.0));
    params.add("k", random_tensor({2, 3, 2}, rng, -1, 1));
    params.add("kb", random_tensor({2}, rng, -1, 1));
    for (const auto& [name, f] : primitives(rng)) {
      record(testing::finite_difference_check(params, f, 15, rng), name);
    }
  }
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const SurrogateBench bench(100 + seed);
    record(testing::finite_difference_check(
               bench.agents.params, [&](Tape& t, const ParameterSet& p) { return bench(t, p); }, 150, rng),
           "surrogate");
  }
  Outcome o;
  o.pass = probes >= 1000 && worst <= 1e-4;
  o.detail = std::to_string(probes) + " probes, max rel err " + fmt("%.2e", worst);
  if (!o.pass) o.detail += " at " + worst_where;
  return o;
}

// ---- 2. regression oracles ----

sim::RoomDataset planted_dataset(const models::BaseModel& truth, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> power(0, 3000), amb(-5, 15), sol(0, 600), noise(-0.5, 0.5);
  sim::RoomDataset d;
  d.room_id = "planted";
  const Timestamp start = make_timestamp(2023, 11, 2);
  for (std::size_t i = 0; i < n; ++i) {
    d.timestamps.push_back(start + static_cast<Timestamp>(i) * 900);
    d.u_hvac.push_back(power(rng));
    d.t_amb.push_back(amb(rng));
    d.occupancy.push_back(static_cast<double>(rng() % 6));
    d.solar.push_back(sol(rng));
    d.day_type.push_back(is_weekend(d.timestamps.back()) ? 1 : 0);
    d.t_room.push_back(20.0 + noise(rng));
  }
  const std::size_t L = truth.spec.lookback;
  for (std::size_t t = L - 1; t + 1 < n; ++t) {
    d.t_room[t + 1] = models::model_predict(truth, models::window_at(d, t, L), d.u_hvac[t]);
  }
  return d;
}

Outcome criterion_regression() {
  models::BaseModel truth;
  truth.spec = models::default_mlr_spec(8);
  truth.coefficients = {0.55, 0.2, 0.1, -0.05, 2e-4, -1e-4, 0.12, 0.03, 0.08, 5e-4, -0.2, 6e-4};
  truth.intercept = 1.3;
  double coef_err = 0.0;
  for (std::uint64_t seed : {7, 8, 9}) {
    const auto fit = models::fit_least_squares(planted_dataset(truth, 2000, seed), truth.spec);
    for (std::size_t i = 0; i < fit.coefficients.size(); ++i) {
      coef_err = std::max(coef_err, std::abs(fit.coefficients[i] - truth.coefficients[i]));
    }
    coef_err = std::max(coef_err, std::abs(fit.intercept - truth.intercept));
  }

  // Planted two-term targets over the dictionary of a simulated room.
  const auto profile = sim::sample_room_profile("planted", 21, make_timestamp(2023, 11, 2));
  const auto data = sim::generate_room_dataset(profile, {make_timestamp(2023, 11, 2), 30}, 15);
  const auto dict = models::default_dictionary_spec();
  const auto dm = models::build_design_matrix(data, dict);
  const auto texts = dict.texts();
  const std::vector<std::pair<std::string, std::string>> pairs{
      {"u@0*(t_amb@0-x@0)", "x@1"}, {"x@0", "u@0"}, {"t_amb@0", "solar@0"}, {"x@0", "occ@0"}};
  std::mt19937_64 rng(5);
  std::normal_distribution<double> noise(0.0, 0.01);
  bool recovered = true;
  double worst_mse = 0.0;
  for (const auto& [ta, tb] : pairs) {
    const auto a = std::find(texts.begin(), texts.end(), ta) - texts.begin();
    const auto b = std::find(texts.begin(), texts.end(), tb) - texts.begin();
    if (a == static_cast<std::ptrdiff_t>(texts.size()) || b == static_cast<std::ptrdiff_t>(texts.size())) {
      return {false, "dictionary lacks " + ta + " or " + tb};
    }
    // Coefficients sized so both terms move the target by about a kelvin.
    const double ca = 1.0 / std::max(1e-9, std::sqrt(dm.features.col(a).array().square().mean()));
    const double cb = -0.8 / std::max(1e-9, std::sqrt(dm.features.col(b).array().square().mean()));
    Eigen::VectorXd y(dm.features.rows());
    for (Eigen::Index r = 0; r < y.size(); ++r) {
      y(r) = 1.5 + ca * dm.features(r, a) + cb * dm.features(r, b) + noise(rng);
    }
    const auto sel = models::stepwise_select(dm.features, y, {}, 8, models::kDefaultRidge);
    const std::set<std::size_t> chosen(sel.selected.begin(), sel.selected.end());
    recovered = recovered && chosen.count(static_cast<std::size_t>(a)) && chosen.count(static_cast<std::size_t>(b));
    worst_mse = std::max(worst_mse, sel.fit.rss / static_cast<double>(y.size()));
  }
  Outcome o;
  o.pass = coef_err <= 1e-6 && recovered && worst_mse < 1e-3;
  o.detail = "OLS max coef err " + fmt("%.2e", coef_err) + ", dictionary terms " +
             (recovered ? "recovered" : "MISSED") + ", residual MSE " + fmt("%.2e", worst_mse);
  return o;
}

// ---- 3. simplex and selection contracts ----

Outcome criterion_simplex() {
  enc::EncoderConfig ecfg;
  ecfg.hidden = 8;
  ecfg.n_models = 7;
  agents::TrainConfig tcfg;
  tcfg.seed = 6;
  tcfg.policy_hidden = 8;
  const auto ag = agents::AgentSet::create(agents::AgentKind::Hierarchical, ecfg, tcfg);
  std::mt19937_64 rng(7);
  std::normal_distribution<double> z(0.0, 3.0);
  const std::size_t N = 7, B = 500;
  std::size_t states = 0, violations = 0;
  double worst_sum = 0.0, worst_lp = 0.0;
  for (int round = 0; round < 20; ++round) {
    Tape tape;
    Tensor raw({B, ag.shape.state_dim});
    for (double& v : raw.values()) v = z(rng);
    Var s = tape.constant(raw);
    const Tensor hl = agents::high_logits(tape, ag.params, s).value();
    Tensor sel({B, N}), w({B, N});
    std::vector<agents::HighAction> hs;
    for (std::size_t r = 0; r < B; ++r) {
      hs.push_back(agents::high_action_from_logits(hl.values().subspan(r * N, N), agents::SampleMode::Sample, rng));
      if (std::accumulate(hs.back().b.begin(), hs.back().b.end(), 0) == 0) ++violations;
      for (std::size_t i = 0; i < N; ++i) sel.at(r, i) = hs.back().b[i];
    }
    const Tensor ll = agents::low_logits(tape, ag.params, s, sel).value();
    std::vector<agents::LowAction> ls;
    Tensor stretched({B, N});
    for (std::size_t r = 0; r < B; ++r) {
      std::vector<double> logits(N);
      for (std::size_t i = 0; i < N; ++i) stretched.at(r, i) = logits[i] = ll.at(r, i) * (1.0 + 10.0 * (r % 3));
      ls.push_back(agents::low_action_from_logits(logits, hs[r].b, agents::SampleMode::Sample, 0.05, 50, rng));
      double sum = 0.0;
      for (std::size_t i = 0; i < N; ++i) {
        const double wi = ls.back().w[i];
        if (wi < 0.0 || (!hs[r].b[i] && wi != 0.0)) ++violations;
        sum += wi;
        w.at(r, i) = wi;
      }
      worst_sum = std::max(worst_sum, std::abs(sum - 1.0));
      ++states;
    }
    // Log-probabilities on the tape against the direct pmf and density.
    Var hlv = tape.constant(hl), slv = tape.constant(stretched);
    const Tensor hp = agents::high_log_prob(hlv, sel).value();
    const Tensor lp = agents::low_log_prob(slv, sel, w, 0.05, 50).value();
    for (std::size_t r = 0; r < B; ++r) {
      const double direct_h = agents::bernoulli_log_pmf(hl.values().subspan(r * N, N), hs[r].b);
      worst_lp = std::max(worst_lp, std::abs(hp[r] - direct_h));
      worst_lp = std::max(worst_lp, std::abs(hp[r] - hs[r].log_prob));
      worst_lp = std::max(worst_lp, std::abs(lp[r] - ls[r].log_prob) / std::max(1.0, std::abs(ls[r].log_prob)));
    }
  }
  Outcome o;
  o.pass = states >= 10000 && violations == 0 && worst_sum <= 1e-9 && worst_lp <= 1e-8;
  o.detail = std::to_string(states) + " states, " + std::to_string(violations) + " violations, max |sum-1| " +
             fmt("%.1e", worst_sum) + ", max log-prob gap " + fmt("%.1e", worst_lp);
  return o;
}

// ---- 4. reward identities ----

Outcome criterion_rewards() {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> z(20.0, 2.0);
  std::size_t nonzero = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t N = 1 + rng() % 8;
    std::vector<double> preds(N), w(N, 0.0);
    std::vector<int> b(N, 0);
    for (double& p : preds) p = z(rng);
    b[rng() % N] = 1;
    for (auto& v : b) v = v || rng() % 2;
    const double k = std::accumulate(b.begin(), b.end(), 0);
    for (std::size_t i = 0; i < N; ++i) w[i] = b[i] ? 1.0 / k : 0.0;
    const auto [loss, loss_eq] = agents::ensemble_losses(preds, z(rng), w, b);
    nonzero += agents::compute_low_reward(loss, loss_eq).r_l != 0.0;
  }
  std::uniform_real_distribution<double> lossd(0.0, 3.0);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t N = 1 + rng() % 40;
    std::vector<int> b(N), vc(N);
    int models = 0, vars = 0;
    for (std::size_t i = 0; i < N; ++i) {
      b[i] = rng() % 2;
      vc[i] = static_cast<int>(rng() % 12);
      models += b[i];
      vars += b[i] * vc[i];
    }
    const double l = lossd(rng);
    const auto r = agents::compute_high_reward(l, b, vc, 0.005, 0.0015);
    worst = std::max(worst, std::abs(r.r_h - (-l - 0.005 * models - 0.0015 * vars)));
    if (r.r_mod != -models || r.r_var != -vars) worst = 1.0;
  }
  Outcome o;
  o.pass = nonzero == 0 && worst <= 1e-12;
  o.detail = std::to_string(nonzero) + "/1000 nonzero uniform low rewards, max high-reward error " + fmt("%.1e", worst);
  return o;
}

// ---- 5. oracle selection ----

/// Stream over `data` whose model `oracle` predicts the truth exactly.
streams::PreparedStream oracle_stream(const sim::RoomDataset& data, const models::ModelLibrary& library,
                                      std::size_t oracle, std::mt19937_64& rng) {
  auto s = streams::prepare_stream(data, library, 8);
  for (std::size_t k = 0; k < s.steps(); ++k) {
    for (std::size_t i = 0; i < library.size(); ++i) {
      std::normal_distribution<double> noise(0.4, 0.5 + 0.3 * static_cast<double>(i));
      s.predictions(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) =
          s.truth[k] + (i == oracle ? 0.0 : noise(rng));
    }
  }
  return s;
}

Outcome criterion_oracle() {
  const auto start = make_timestamp(2023, 11, 6);
  const auto profile = sim::sample_room_profile("oracle", 5, start);
  const auto data = sim::generate_room_dataset(profile, {start, 6}, 15);
  const std::size_t n = 5, oracle = 2, cut = 4 * 96;
  models::ModelLibrary library;
  const auto base = models::fit_least_squares(data, models::default_mlr_spec(4));
  for (std::size_t i = 0; i < n; ++i) library.add(base);
  std::mt19937_64 rng(99);
  const std::vector<streams::PreparedStream> train{oracle_stream(data.slice(0, cut), library, oracle, rng)};
  // Held-out rows follow the training rows; the look-back overlaps only.
  const std::vector<streams::PreparedStream> held{oracle_stream(data.slice(cut - 7, data.size()), library, oracle, rng)};

  enc::EncoderConfig ecfg;
  ecfg.hidden = 8;
  ecfg.n_models = n;
  agents::TrainConfig cfg;
  cfg.seed = 22;
  cfg.alpha = cfg.beta = 0.0;
  cfg.lambda = 0.5;
  cfg.lr_stage1 = cfg.lr_stage2 = 1e-2;
  cfg.batch_size = 16;
  cfg.stage1_epochs = cfg.stage2_epochs = 4;
  cfg.steps_per_epoch = 25;
  cfg.policy_hidden = 8;
  const auto result = agents::train_two_stage(train, library, ecfg, cfg);
  const std::size_t updates = (cfg.stage1_epochs + cfg.stage2_epochs) * cfg.steps_per_epoch;

  std::vector<std::pair<std::size_t, std::size_t>> steps;
  for (std::size_t k = 0; k < held[0].steps(); ++k) steps.emplace_back(0, k);
  const auto batch = agents::pack_steps(held, steps, result.agents.encoder);
  std::mt19937_64 greedy_rng(0);
  const auto decisions = agents::decide(result.agents, batch, agents::SampleMode::Greedy, greedy_rng);
  std::size_t good = 0;
  double min_w = 1.0;
  for (const auto& d : decisions) {
    good += d.high.b[oracle] == 1 && d.low.w[oracle] >= 0.9;
    min_w = std::min(min_w, d.low.w[oracle]);
  }
  Outcome o;
  o.pass = updates <= 2000 && good == decisions.size();
  o.detail = std::to_string(good) + "/" + std::to_string(decisions.size()) + " held-out steps with oracle weight >= 0.9 (min " +
             fmt("%.3f", min_w) + ") after " + std::to_string(updates) + " updates";
  return o;
}

// ---- 6, 7, 8. synthetic benchmark and closed loop ----

pipeline::ExperimentConfig benchmark_config() {
  return pipeline::ExperimentConfig::load(REEM_DEFAULT_CONFIG);
}

const std::vector<std::uint64_t> kSeeds{1, 2, 3};

struct SeedRun {
  std::map<std::string, double> mae;
  std::optional<pipeline::MpcComparison> mpc;
  double benchmark_seconds = 0.0;
  double mpc_seconds = 0.0;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

const SeedRun& benchmark_run(std::uint64_t seed, bool with_mpc) {
  static std::map<std::uint64_t, SeedRun> cache;
  static std::map<std::uint64_t, pipeline::OfflineBenchmark> benches;
  auto cfg = benchmark_config();
  cfg.seed = seed;
  auto& run = cache[seed];
  if (run.mae.empty()) {
    const auto t0 = std::chrono::steady_clock::now();
    benches[seed] = pipeline::run_offline_benchmark(cfg);
    for (const auto& [name, r] : benches[seed].results) run.mae[name] = r.mae;
    run.benchmark_seconds = seconds_since(t0);
    std::cout << "  seed " << seed << ":";
    for (const auto& name : pipeline::kMethods) std::cout << " " << name << "=" << fmt("%.4f", run.mae[name]);
    std::cout << " (" << fmt("%.0f", run.benchmark_seconds) << "s)" << std::endl;
  }
  if (with_mpc && !run.mpc) {
    const auto t0 = std::chrono::steady_clock::now();
    cfg.mpc_rooms = 1;
    const auto& b = benches.at(seed);
    run.mpc = pipeline::run_mpc_study(b.rooms, b.library, b.agents.hierarchical.agents, cfg).front();
    run.mpc_seconds = seconds_since(t0);
    const auto& m = *run.mpc;
    std::cout << "  seed " << seed << " mpc " << m.room << ": reem compliance " << fmt("%.3f", m.ensemble.compliance)
              << " energy " << fmt("%.2f", m.ensemble.energy_kwh) << " kWh; customized compliance "
              << fmt("%.3f", m.customized.compliance) << " energy " << fmt("%.2f", m.customized.energy_kwh)
              << " kWh (" << fmt("%.0f", run.mpc_seconds) << "s)" << std::endl;
  }
  return run;
}

double mean_over_seeds(const std::string& method) {
  double total = 0.0;
  for (auto seed : kSeeds) total += benchmark_run(seed, false).mae.at(method);
  return total / static_cast<double>(kSeeds.size());
}

Outcome criterion_ordering() {
  double seconds = 0.0;
  for (auto seed : kSeeds) seconds += benchmark_run(seed, false).benchmark_seconds;
  const double reem = mean_over_seeds("reem");
  double best = 0.0;
  std::string best_name;
  for (const auto& name : pipeline::kReferenceBaselines) {
    const double m = mean_over_seeds(name);
    if (best_name.empty() || m < best) best = m, best_name = name;
  }
  const double imp = ensemble::improvement_percent(best, reem);
  Outcome o;
  o.pass = imp >= 10.0 && seconds < 30 * 60;
  o.detail = "mean test MAE reem " + fmt("%.4f", reem) + " vs best baseline " + best_name + " " + fmt("%.4f", best) +
             " (" + fmt("%+.1f", imp) + "%, need >= +10%), " + fmt("%.0f", seconds) + "s";
  return o;
}

Outcome criterion_ablation() {
  const double reem = mean_over_seeds("reem");
  const double flat = mean_over_seeds("single_tier_rl");
  Outcome o;
  o.pass = reem < flat;
  o.detail = "mean test MAE hierarchical " + fmt("%.4f", reem) + " vs single-tier " + fmt("%.4f", flat);
  return o;
}

Outcome criterion_mpc() {
  std::size_t wins = 0;
  double seconds = 0.0;
  std::string detail;
  for (auto seed : kSeeds) {
    const auto& run = benchmark_run(seed, true);
    const auto& m = *run.mpc;
    seconds += run.mpc_seconds;
    const bool ok = m.ensemble.compliance >= 0.95 && m.ensemble.compliance >= m.customized.compliance &&
                    m.ensemble.energy_kwh <= m.customized.energy_kwh;
    wins += ok;
    detail += (detail.empty() ? "" : "; ") + std::string("seed ") + std::to_string(seed) + " " +
              fmt("%.3f", m.ensemble.compliance) + "/" + fmt("%.1f", m.ensemble.energy_kwh) + " kWh vs " +
              fmt("%.3f", m.customized.compliance) + "/" + fmt("%.1f", m.customized.energy_kwh) + " kWh";
  }
  Outcome o;
  o.pass = wins >= 2 && seconds < 5 * 60;
  o.detail = std::to_string(wins) + "/3 seeds (compliance/energy reem vs customized: " + detail + "), " +
             fmt("%.0f", seconds) + "s";
  return o;
}

// ---- 9. determinism ----

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome criterion_determinism() {
  auto cfg = pipeline::ExperimentConfig::load(REEM_DETERMINISM_CONFIG);
  std::vector<std::string> reports, tables;
  for (int run = 0; run < 2; ++run) {
    cfg.out_dir = std::filesystem::temp_directory_path() / ("reem_acceptance_run" + std::to_string(run));
    std::filesystem::remove_all(cfg.out_dir);
    for (const auto& command : cli::kCommands) cli::run_command(cfg, command);
    const cli::Layout layout{cfg.out_dir};
    reports.push_back(slurp(layout.metrics()));
    tables.push_back(slurp(layout.report_csv()) + slurp(layout.mpc_summary()));
  }
  Outcome o;
  o.pass = !reports[0].empty() && reports[0] == reports[1] && tables[0] == tables[1];
  o.detail = std::string("metrics report ") + (reports[0] == reports[1] ? "identical" : "DIFFERS") + " (" +
             std::to_string(reports[0].size()) + " bytes), report tables " +
             (tables[0] == tables[1] ? "identical" : "DIFFER");
  return o;
}

// ---- 10. simulator physics ----

Outcome criterion_physics() {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> temp(-5.0, 30.0), power(0.0, 4000.0);
  std::size_t fixed_fail = 0, monotone_fail = 0, heat_fail = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto profile = sim::sample_room_profile("p", static_cast<std::uint64_t>(trial), 0);
    const double t = temp(rng);
    const auto eq = sim::step_room({t, t}, 0.0, {t, 0.0, 0.0}, profile.params, 60.0);
    fixed_fail += eq.t_room != t || eq.t_wall != t;

    const sim::RoomState s{temp(rng), temp(rng)};
    const sim::ExogenousSample exo{temp(rng), 2.0, 300.0};
    const double u1 = power(rng), u2 = u1 + power(rng);
    const auto a = sim::step_room(s, u1, exo, profile.params, 60.0);
    const auto b = sim::step_room(s, u2, exo, profile.params, 60.0);
    const bool heating = profile.params.mode == sim::HvacMode::Heating;
    heat_fail += heating ? b.t_room < a.t_room : b.t_room > a.t_room;

    const double t0 = temp(rng), t_amb = temp(rng);
    sim::RoomState p{t0, t0};
    double gap = std::abs(t0 - t_amb);
    for (int k = 0; k < 500; ++k) {
      p = sim::step_room(p, 0.0, {t_amb, 0.0, 0.0}, profile.params, 60.0);
      const double next = std::abs(p.t_room - t_amb);
      if (next > gap + 1e-12 || (p.t_room - t_amb >= 0.0) != (t0 - t_amb >= 0.0)) {
        ++monotone_fail;
        break;
      }
      gap = next;
    }
  }
  Outcome o;
  o.pass = fixed_fail == 0 && monotone_fail == 0 && heat_fail == 0;
  o.detail = "1000 draws: fixed-point failures " + std::to_string(fixed_fail) + ", non-monotone decays " +
             std::to_string(monotone_fail) + ", power-direction failures " + std::to_string(heat_fail);
  return o;
}

struct Criterion {
  int id;
  const char* title;
  Outcome (*run)();
};

const std::vector<Criterion> kCriteria{
    {1, "gradient correctness", criterion_gradients},
    {2, "regression oracles", criterion_regression},
    {3, "simplex and selection contracts", criterion_simplex},
    {4, "reward identities", criterion_rewards},
    {5, "oracle model selection", criterion_oracle},
    {6, "benchmark ordering vs baselines", criterion_ordering},
    {7, "hierarchical beats single-tier", criterion_ablation},
    {8, "closed-loop MPC comfort and energy", criterion_mpc},
    {9, "deterministic metrics report", criterion_determinism},
    {10, "simulator physics", criterion_physics},
};

}  // namespace

int main(int argc, char** argv) {
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "all") {
      for (const auto& c : kCriteria) selected.insert(c.id);
    } else {
      selected.insert(std::stoi(arg));
    }
  }
  if (selected.empty()) {
    for (const auto& c : kCriteria) selected.insert(c.id);
  }
  int failures = 0;
  for (const auto& c : kCriteria) {
    if (!selected.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << c.id << " (" << c.title << "): " << o.detail << " ["
              << fmt("%.1f", seconds_since(t0)) << "s]" << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
