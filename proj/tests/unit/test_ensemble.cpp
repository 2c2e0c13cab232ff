#include "reem/baselines.hpp"
#include "reem/ensemble.hpp"
#include "reem/errors.hpp"
#include "support/oracle_bench.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numeric>

using namespace reem;
using namespace reem::ensemble;
using reem::testing::OracleBench;

namespace {

/// Four genuinely different models fitted on two rooms.
const models::ModelLibrary& live_library() {
  static const models::ModelLibrary lib = [] {
    const auto other_profile = sim::sample_room_profile("other", 8, make_timestamp(2023, 11, 6));
    const auto other = sim::generate_room_dataset(other_profile, {make_timestamp(2023, 11, 6), 4}, 15);
    models::ModelLibrary l;
    l.add(models::fit_least_squares(reem::testing::fixture_dataset(), models::default_mlr_spec(8)));
    l.add(models::fit_least_squares(reem::testing::fixture_dataset(), models::default_mlr_spec(4)));
    l.add(models::fit_least_squares(other, models::default_mlr_spec(8)));
    l.add(models::fit_least_squares(other, models::default_mlr_spec(6)));
    return l;
  }();
  return lib;
}

agents::AgentSet small_agents(std::size_t n_models, agents::AgentKind kind = agents::AgentKind::Hierarchical) {
  enc::EncoderConfig e;
  e.hidden = 8;
  e.n_models = n_models;
  agents::TrainConfig t;
  t.policy_hidden = 8;
  t.seed = 3;
  return agents::AgentSet::create(kind, e, t);
}

models::BaseModel constant_model(double value) {
  models::BaseModel m;
  m.spec = models::FeatureSpec::parse(1, {"x@0"});
  m.coefficients = {0.0};
  m.intercept = value;
  return m;
}

}  // namespace

// ---- combination ----

TEST(EnsemblePredict, ConvexCombination) {
  models::ModelLibrary lib({constant_model(20.0), constant_model(22.0)});
  const auto w = models::window_at(reem::testing::fixture_dataset(), 10, 1);
  const std::vector<double> half{0.5, 0.5}, first{1.0, 0.0};
  EXPECT_DOUBLE_EQ(ensemble_predict(lib, half, w, 0.0), 21.0);
  EXPECT_EQ(ensemble_predict(lib, first, w, 0.0), 20.0);
}

TEST(EnsemblePredict, MatchesBruteForce) {
  const auto& lib = live_library();
  const auto& data = reem::testing::fixture_dataset();
  std::mt19937_64 rng(1);
  std::exponential_distribution<double> expo(1.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> w(lib.size());
    for (double& v : w) v = expo(rng);
    const double total = std::accumulate(w.begin(), w.end(), 0.0);
    for (double& v : w) v /= total;
    const std::size_t t = 8 + rng() % 300;
    const auto win = models::window_at(data, t, 8);
    double brute = 0.0;
    for (std::size_t i = 0; i < lib.size(); ++i) brute += w[i] * models::model_predict(lib[i], win, data.u_hvac[t]);
    EXPECT_NEAR(ensemble_predict(lib, w, win, data.u_hvac[t]), brute, 1e-12);
  }
}

TEST(EnsemblePredict, ZeroWeightModelsAreNotEvaluated) {
  // The second model needs a longer window than supplied and would throw.
  models::BaseModel wide = constant_model(0.0);
  wide.spec = models::FeatureSpec::parse(8, {"x@7"});
  models::ModelLibrary lib({constant_model(19.0), wide});
  const auto w = models::window_at(reem::testing::fixture_dataset(), 10, 2);
  const std::vector<double> first{1.0, 0.0}, both{0.5, 0.5};
  EXPECT_EQ(ensemble_predict(lib, first, w, 0.0), 19.0);
  EXPECT_ANY_THROW(ensemble_predict(lib, both, w, 0.0));
}

TEST(EnsemblePredict, RejectsOffSimplexWeights) {
  models::ModelLibrary lib({constant_model(20.0), constant_model(22.0)});
  const auto w = models::window_at(reem::testing::fixture_dataset(), 10, 1);
  const std::vector<double> heavy{0.6, 0.6}, negative{1.5, -0.5}, close{0.5, 0.5 + 5e-7};
  EXPECT_THROW(ensemble_predict(lib, heavy, w, 0.0), ContractViolation);
  EXPECT_THROW(ensemble_predict(lib, negative, w, 0.0), ContractViolation);
  EXPECT_NO_THROW(ensemble_predict(lib, close, w, 0.0));
}

// ---- live stepping ----

TEST(StepStream, TrackerHoldsDirectSquaredErrors) {
  const auto& lib = live_library();
  const auto agents = small_agents(lib.size());
  auto data = std::make_shared<const sim::RoomDataset>(reem::testing::fixture_dataset());
  StreamCursor cursor(data, 8);
  ErrorTracker tracker(lib.size());
  EXPECT_EQ(tracker.errors(), std::vector<double>(lib.size(), 1.0));
  std::mt19937_64 rng(2);
  for (int step = 0; step < 20; ++step) {
    const std::size_t t = cursor.row();
    const auto rec = step_stream(cursor, agents, lib, tracker, agents::SampleMode::Sample, rng);
    const auto win = models::window_at(*data, t, 8);
    double recomputed = 0.0;
    for (std::size_t i = 0; i < lib.size(); ++i) {
      const double p = models::model_predict(lib[i], win, data->u_hvac[t]);
      EXPECT_DOUBLE_EQ(tracker.errors()[i], (p - data->t_room[t + 1]) * (p - data->t_room[t + 1]));
      if (rec.b[i] == 0) EXPECT_EQ(rec.w[i], 0.0);
      recomputed += rec.w[i] * p;
    }
    EXPECT_NEAR(rec.yhat, recomputed, 1e-9);
    EXPECT_EQ(rec.ytrue, data->t_room[t + 1]);
  }
}

TEST(StepStream, EndOfStreamAfterLastFutureRow) {
  const auto& lib = live_library();
  const auto agents = small_agents(lib.size());
  auto full = reem::testing::fixture_dataset();
  sim::RoomDataset cut = full;
  const std::size_t keep = 12;
  cut.timestamps.resize(keep), cut.t_room.resize(keep), cut.u_hvac.resize(keep), cut.t_amb.resize(keep);
  cut.occupancy.resize(keep), cut.solar.resize(keep), cut.day_type.resize(keep);
  StreamCursor cursor(std::make_shared<const sim::RoomDataset>(cut), 8);
  ErrorTracker tracker(lib.size());
  std::mt19937_64 rng(3);
  int steps = 0;
  while (!cursor.exhausted()) step_stream(cursor, agents, lib, tracker, agents::SampleMode::Greedy, rng), ++steps;
  EXPECT_EQ(steps, 4);
  EXPECT_THROW(step_stream(cursor, agents, lib, tracker, agents::SampleMode::Greedy, rng), EndOfStream);
}

TEST(StepStream, FutureTruthDoesNotLeakIntoDecision) {
  const auto& lib = live_library();
  const auto agents = small_agents(lib.size());
  const auto& base = reem::testing::fixture_dataset();
  const std::size_t probe_step = 30;
  auto altered = base;
  altered.t_room[8 - 1 + probe_step + 1] = 99.0;  // truth of the probed step

  auto run = [&](const sim::RoomDataset& d) {
    StreamCursor cursor(std::make_shared<const sim::RoomDataset>(d), 8);
    ErrorTracker tracker(lib.size());
    std::mt19937_64 rng(4);
    std::vector<EnsembleRecord> out;
    for (std::size_t k = 0; k <= probe_step; ++k) {
      out.push_back(step_stream(cursor, agents, lib, tracker, agents::SampleMode::Greedy, rng));
    }
    return out;
  };
  const auto a = run(base), b = run(altered);
  for (std::size_t k = 0; k <= probe_step; ++k) {
    EXPECT_EQ(a[k].b, b[k].b) << k;
    EXPECT_EQ(a[k].w, b[k].w) << k;
  }
  EXPECT_EQ(b[probe_step].ytrue, 99.0);

  // The encoded state at the probed step is identical too.
  const auto win_a = models::window_at(base, 8 - 1 + probe_step, 8);
  const auto win_b = models::window_at(altered, 8 - 1 + probe_step, 8);
  EXPECT_EQ(win_a.x, win_b.x);
}

TEST(StepStream, LiveAndBatchedEvaluationAgree) {
  const auto& lib = live_library();
  auto agents = std::make_shared<const agents::AgentSet>(small_agents(lib.size()));
  const auto stream = streams::prepare_stream(reem::testing::fixture_dataset(), lib, 8);
  const auto batched = run_evaluation({stream}, agent_strategy(agents, 64), "agents");

  StreamCursor cursor(stream.data, 8);
  ErrorTracker tracker(lib.size());
  std::mt19937_64 rng(5);
  for (std::size_t k = 0; k < stream.steps(); ++k) {
    const auto rec = step_stream(cursor, *agents, lib, tracker, agents::SampleMode::Greedy, rng);
    ASSERT_EQ(rec.b, batched.records[k].b) << k;
    for (std::size_t i = 0; i < lib.size(); ++i) ASSERT_NEAR(rec.w[i], batched.records[k].w[i], 1e-9);
    ASSERT_NEAR(rec.yhat, batched.records[k].yhat, 1e-9);
    ASSERT_EQ(rec.timestamp, batched.records[k].timestamp);
  }
  EXPECT_TRUE(cursor.exhausted());
}

// ---- evaluation ----

TEST(Evaluation, PerfectPredictorScoresZero) {
  OracleBench bench(1, 3);
  const auto r = run_evaluation(bench.streams, baselines::fixed_strategy({0.0, 1.0, 0.0}), "oracle");
  EXPECT_EQ(r.mae, 0.0);
  EXPECT_EQ(r.mse, 0.0);
}

TEST(Evaluation, AggregateIsStepWeightedMeanOfRooms) {
  const auto& lib = live_library();
  std::vector<streams::PreparedStream> streams;
  streams.push_back(streams::prepare_stream(reem::testing::fixture_dataset(), lib, 8));
  auto shorter = reem::testing::fixture_dataset();
  shorter.room_id = "short";
  for (auto* v : {&shorter.t_room, &shorter.u_hvac, &shorter.t_amb, &shorter.occupancy, &shorter.solar}) v->resize(100);
  shorter.timestamps.resize(100), shorter.day_type.resize(100);
  streams.push_back(streams::prepare_stream(shorter, lib, 8));

  const auto r = run_evaluation(streams, baselines::heuristic_strategy(2), "heuristic");
  ASSERT_EQ(r.rooms.size(), 2u);
  double weighted = 0.0, abs_sum = 0.0;
  std::size_t steps = 0;
  for (const auto& m : r.rooms) weighted += m.mae * double(m.steps), steps += m.steps;
  for (const auto& rec : r.records) abs_sum += std::abs(rec.yhat - rec.ytrue);
  EXPECT_EQ(steps, r.records.size());
  EXPECT_NEAR(r.mae, weighted / double(steps), 1e-12);
  EXPECT_NEAR(r.mae, abs_sum / double(steps), 1e-12);
}

TEST(Evaluation, RecordCsvReproducesMetricsExactly) {
  const auto& lib = live_library();
  const auto stream = streams::prepare_stream(reem::testing::fixture_dataset(), lib, 8);
  auto agents = std::make_shared<const agents::AgentSet>(small_agents(lib.size()));
  const auto r = run_evaluation({stream}, agent_strategy(agents), "agents");
  const auto path = std::filesystem::temp_directory_path() / "reem_records.csv";
  write_records_csv(r.records, path);
  const auto back = read_records_csv(path);
  ASSERT_EQ(back.size(), r.records.size());
  for (std::size_t k = 0; k < back.size(); ++k) {
    ASSERT_EQ(back[k].w, r.records[k].w);
    ASSERT_EQ(back[k].b, r.records[k].b);
    ASSERT_EQ(back[k].timestamp, r.records[k].timestamp);
  }
  const auto again = metrics_from_records(back, "agents");
  EXPECT_EQ(again.mae, r.mae);
  EXPECT_EQ(again.mse, r.mse);
  EXPECT_EQ(again.rooms[0].mae, r.rooms[0].mae);
  std::filesystem::remove(path);
}

TEST(Evaluation, GreedyEvaluationIsDeterministic) {
  const auto& lib = live_library();
  const auto stream = streams::prepare_stream(reem::testing::fixture_dataset(), lib, 8);
  auto agents = std::make_shared<const agents::AgentSet>(small_agents(lib.size()));
  const auto a = run_evaluation({stream}, agent_strategy(agents), "agents");
  const auto b = run_evaluation({stream}, agent_strategy(agents), "agents");
  EXPECT_EQ(a.mae, b.mae);
  EXPECT_EQ(a.mse, b.mse);
}

TEST(Evaluation, ImprovementPercent) {
  EXPECT_NEAR(improvement_percent(0.957, 0.538), 43.78265412748171, 1e-9);
  EXPECT_NEAR(improvement_percent(0.957, 0.538), 43.8, 0.05);
  EXPECT_NEAR(improvement_percent(0.957, 1.072), -12.0, 0.05);
  EXPECT_THROW(improvement_percent(0.0, 1.0), ContractViolation);
}

// ---- baselines ----

TEST(Baselines, HeuristicTopN) {
  const std::vector<double> errors{0.1, 0.5, 0.2, 0.3};
  const double third = 1.0 / 3.0;
  EXPECT_EQ(baselines::heuristic_top_n(errors, 3), (std::vector<double>{third, 0.0, third, third}));
  EXPECT_EQ(baselines::heuristic_top_n(errors, 4), std::vector<double>(4, 0.25));
  const std::vector<double> tied{0.1, 0.1, 0.1, 0.9};
  EXPECT_EQ(baselines::heuristic_top_n(tied, 2), (std::vector<double>{0.5, 0.5, 0.0, 0.0}));
  EXPECT_THROW(baselines::heuristic_top_n(errors, 0), ContractViolation);
  EXPECT_THROW(baselines::heuristic_top_n(errors, 5), ContractViolation);
}

TEST(Baselines, HeuristicIsPermutationEquivariant) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t N = 2 + rng() % 10;
    std::vector<double> e(N);
    for (double& v : e) v = u(rng);  // continuous draws, so no ties
    std::vector<std::size_t> perm(N);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<double> pe(N);
    for (std::size_t i = 0; i < N; ++i) pe[i] = e[perm[i]];
    const std::size_t n = 1 + rng() % N;
    const auto w = baselines::heuristic_top_n(e, n), pw = baselines::heuristic_top_n(pe, n);
    for (std::size_t i = 0; i < N; ++i) ASSERT_EQ(pw[i], w[perm[i]]);
  }
}

TEST(Baselines, HeuristicStrategyStartsUniform) {
  OracleBench bench(0, 4);
  const auto choices = baselines::heuristic_strategy(3)(bench.streams[0]);
  EXPECT_EQ(choices[0].w, std::vector<double>(4, 0.25));
  EXPECT_EQ(choices[1].w[0], 1.0 / 3.0);  // the oracle model has zero error at every step
}

TEST(Baselines, StaticSearch) {
  OracleBench bench(3, 5);
  EXPECT_EQ(baselines::static_search_weights(bench.streams, 0, 1), std::vector<double>(5, 0.2));
  const auto w = baselines::static_search_weights(bench.streams, 2000, 7);
  EXPECT_GE(w[3], 0.8);
  EXPECT_EQ(w, baselines::static_search_weights(bench.streams, 2000, 7));
  EXPECT_NEAR(std::accumulate(w.begin(), w.end(), 0.0), 1.0, 1e-12);
  std::vector<streams::PreparedStream> none;
  EXPECT_THROW(baselines::static_search_weights(none, 10, 1), ConfigError);
}

TEST(Baselines, StaticSearchObjectiveMatchesEvaluation) {
  OracleBench bench(3, 5);
  const auto w = baselines::static_search_weights(bench.streams, 50, 9);
  const auto direct = run_evaluation(bench.streams, baselines::fixed_strategy(w), "static");
  const auto uniform = run_evaluation(bench.streams, baselines::fixed_strategy(std::vector<double>(5, 0.2)), "eq");
  EXPECT_LE(direct.mse, uniform.mse + 1e-12);
}

TEST(Baselines, SingleTierPolicyStep) {
  const auto flat = small_agents(6, agents::AgentKind::SingleTier);
  std::mt19937_64 rng(10);
  std::normal_distribution<double> z(0.0, 2.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> s(flat.shape.state_dim);
    for (double& v : s) v = z(rng);
    const auto w = baselines::single_tier_policy_step(s, flat);
    ASSERT_EQ(w.size(), 6u);
    EXPECT_NO_THROW(check_simplex(w));
    for (double v : w) EXPECT_GT(v, 0.0);
  }
  const auto one = small_agents(1, agents::AgentKind::SingleTier);
  std::vector<double> s(one.shape.state_dim, 0.3);
  EXPECT_EQ(baselines::single_tier_policy_step(s, one), std::vector<double>{1.0});
  EXPECT_FALSE(flat.params.contains("high.l1.w"));
}

TEST(Baselines, AllOutputsOnSimplex) {
  OracleBench bench(1, 6);
  auto flat = std::make_shared<const agents::AgentSet>(small_agents(6, agents::AgentKind::SingleTier));
  const std::vector<ensemble::Strategy> all{
      baselines::heuristic_strategy(3), baselines::fixed_strategy(baselines::equal_weights(6)),
      baselines::fixed_strategy(baselines::static_search_weights(bench.streams, 20, 1)),
      baselines::best_single_oracle_strategy(), agent_strategy(flat)};
  for (const auto& s : all) {
    for (const auto& c : s(bench.streams[0])) {
      ASSERT_NO_THROW(check_simplex(c.w));
      for (std::size_t i = 0; i < c.w.size(); ++i) ASSERT_EQ(c.b[i] == 0, c.w[i] == 0.0);
    }
  }
  const auto oracle = run_evaluation(bench.streams, baselines::best_single_oracle_strategy(), "best");
  EXPECT_EQ(oracle.mae, 0.0);
}

TEST(Baselines, StrategyNames) {
  for (auto s : {baselines::Strategy::HeuristicTopN, baselines::Strategy::EqualWeightAll,
                 baselines::Strategy::BestSingleOracle, baselines::Strategy::StaticSearch,
                 baselines::Strategy::SingleTierRl}) {
    EXPECT_EQ(baselines::strategy_from_string(baselines::to_string(s)), s);
  }
  EXPECT_THROW(baselines::strategy_from_string("boa"), ConfigError);
}
