#include "reem/encoder.hpp"
#include "reem/errors.hpp"
#include "support/gradcheck.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

using namespace reem;
using namespace reem::enc;
using reem::diff::ParameterSet;
using reem::diff::Tape;
using reem::diff::Tensor;
using reem::diff::Var;

namespace {

models::TimeSeriesWindow random_window(std::size_t L, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> temp(15, 25), power(0, 3000), amb(-5, 15), occ(0, 8), sol(0, 600);
  models::TimeSeriesWindow w;
  for (std::size_t i = 0; i < L; ++i) {
    w.x.push_back(temp(rng));
    w.d.push_back({amb(rng), std::floor(occ(rng)), sol(rng), static_cast<double>(rng() % 2)});
    if (i + 1 < L) w.u.push_back(power(rng));
  }
  return w;
}

struct Fixture {
  EncoderConfig cfg;
  ParameterSet params;
  explicit Fixture(std::size_t n_models = 5, std::size_t hidden = 64, std::uint64_t seed = 1) {
    cfg.n_models = n_models;
    cfg.hidden = hidden;
    std::mt19937_64 rng(seed);
    init_encoder_params(params, cfg, rng);
  }
};

}  // namespace

TEST(Encoder, FixedSeedFixedOutput) {
  Fixture a, b;
  std::mt19937_64 rng(3);
  const auto w = random_window(8, rng);
  const auto ea = encode_window(w, a.params, a.cfg);
  const auto eb = encode_window(w, b.params, b.cfg);
  ASSERT_EQ(ea.size(), 64u);
  EXPECT_EQ(ea, eb);
  for (double v : ea) EXPECT_TRUE(std::isfinite(v));
}

TEST(Encoder, AttentionRowsSumToOne) {
  Fixture f;
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const Tensor att = attention_matrix(random_window(8, rng), f.params, f.cfg);
    ASSERT_EQ(att.rows(), 8u);
    ASSERT_EQ(att.cols(), 8u);
    for (std::size_t r = 0; r < att.rows(); ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < att.cols(); ++c) {
        EXPECT_GE(att.at(r, c), 0.0);
        s += att.at(r, c);
      }
      EXPECT_NEAR(s, 1.0, 1e-9);
    }
  }
}

TEST(Encoder, SensitiveToFinalDisturbance) {
  Fixture f;
  std::mt19937_64 rng(5);
  auto w = random_window(8, rng);
  const auto before = encode_window(w, f.params, f.cfg);
  w.d.back()[0] += 3.0;
  const auto after = encode_window(w, f.params, f.cfg);
  double diff = 0.0;
  for (std::size_t i = 0; i < before.size(); ++i) diff += std::abs(before[i] - after[i]);
  EXPECT_GT(diff, 1e-6);
}

TEST(Encoder, NonFiniteIntermediateIsNumericError) {
  Fixture f;
  f.params.at("enc.att.wq")[0] = std::numeric_limits<double>::infinity();
  std::mt19937_64 rng(6);
  EXPECT_THROW(encode_window(random_window(8, rng), f.params, f.cfg), NumericError);
}

TEST(ErrorEmbedding, ConstantVectorsEmbedIdentically) {
  Fixture f(6);
  const std::vector<double> a(6, 0.2), b(6, 7.5);
  const auto ea = embed_errors(a, f.params, f.cfg);
  EXPECT_EQ(ea.size(), 64u);
  EXPECT_EQ(ea, embed_errors(b, f.params, f.cfg));
  EXPECT_EQ(rank_normalize(a), std::vector<double>(6, 0.5));
}

TEST(ErrorEmbedding, MonotoneRescalingInvariant) {
  Fixture f(5);
  const std::vector<double> e{0.3, 0.01, 2.0, 0.3, 0.7};
  std::vector<double> scaled;
  for (double v : e) scaled.push_back(10.0 * v);
  EXPECT_EQ(embed_errors(e, f.params, f.cfg), embed_errors(scaled, f.params, f.cfg));
  EXPECT_EQ(rank_normalize(e), (std::vector<double>{0.375, 0.0, 1.0, 0.375, 0.75}));
}

TEST(ErrorEmbedding, RejectsNegativeErrors) {
  Fixture f(3);
  const std::vector<double> e{0.1, -0.2, 0.3};
  EXPECT_THROW(embed_errors(e, f.params, f.cfg), ContractViolation);
}

TEST(ErrorEmbedding, RawModeSeesScale) {
  Fixture f(3);
  f.cfg.rank_errors = false;
  const std::vector<double> a{0.1, 0.2, 0.3}, b{1.0, 2.0, 3.0};
  EXPECT_NE(embed_errors(a, f.params, f.cfg), embed_errors(b, f.params, f.cfg));
}

TEST(State, ConcatenatesSubOutputs) {
  Fixture f(4);
  std::mt19937_64 rng(7);
  const auto w = random_window(8, rng);
  const std::vector<double> e{0.4, 0.1, 0.9, 0.2};
  const auto s = build_state(w, e, f.params, f.cfg);
  ASSERT_EQ(s.size(), 128u);
  auto expected = encode_window(w, f.params, f.cfg);
  const auto em = embed_errors(e, f.params, f.cfg);
  expected.insert(expected.end(), em.begin(), em.end());
  EXPECT_EQ(s, expected);
  EXPECT_EQ(s, build_state(w, e, f.params, f.cfg));
}

TEST(State, ScaleRobustToErrorMultiplier) {
  Fixture f(4);
  std::mt19937_64 rng(8);
  const auto w = random_window(8, rng);
  const std::vector<double> e{0.4, 0.1, 0.9, 0.2};
  for (double c : {1e-3, 0.5, 3.0, 1e4}) {
    std::vector<double> scaled;
    for (double v : e) scaled.push_back(c * v);
    EXPECT_EQ(build_state(w, e, f.params, f.cfg), build_state(w, scaled, f.params, f.cfg));
  }
}

TEST(Tcn, ReceptiveFieldIsFortyThree) {
  Fixture f(1, 16);
  EXPECT_EQ(f.cfg.receptive_field(), 43u);
  const std::size_t T = 60;
  std::mt19937_64 rng(9);
  std::normal_distribution<double> g(0.0, 1.0);
  Tensor input({T, 1});
  for (double& v : input.values()) v = g(rng);

  auto last_output = [&](const Tensor& in) {
    Tape tape;
    Var out = tcn_forward(tape, f.params, "enc.tx", tape.constant(in), T, f.cfg);
    std::vector<double> row;
    for (std::size_t c = 0; c < out.cols(); ++c) row.push_back(out.value().at(T - 1, c));
    return row;
  };
  const auto base = last_output(input);
  // Distance 42 back is the oldest visible position; 43 back is invisible.
  Tensor visible = input, hidden = input;
  visible[T - 1 - 42] += 5.0;
  hidden[T - 1 - 43] += 5.0;
  EXPECT_NE(last_output(visible), base);
  EXPECT_EQ(last_output(hidden), base);
}

TEST(Causality, EditsOutsideWindowDoNotChangeState) {
  Fixture f(3);
  auto profile = sim::sample_room_profile("c", 3, make_timestamp(2023, 11, 6));
  auto data = sim::generate_room_dataset(profile, {make_timestamp(2023, 11, 6), 2}, 15);
  const std::size_t t = 40;
  const std::vector<double> e{0.1, 0.2, 0.3};
  const auto base = build_state(models::window_at(data, t, 8), e, f.params, f.cfg);

  auto edited = data;
  for (std::size_t r = 0; r + 8 <= t; ++r) {
    edited.t_room[r] += 4.0;
    edited.u_hvac[r] = 0.0;
    edited.t_amb[r] -= 3.0;
  }
  edited.t_room[t + 1] += 10.0;  // future row
  EXPECT_EQ(build_state(models::window_at(edited, t, 8), e, f.params, f.cfg), base);

  edited.t_room[t - 7] += 1.0;  // oldest row inside the window
  EXPECT_NE(build_state(models::window_at(edited, t, 8), e, f.params, f.cfg), base);
}

TEST(Encoder, GradientsMatchFiniteDifferences) {
  Fixture f(4, 8, 12);
  std::mt19937_64 rng(13);
  std::vector<models::TimeSeriesWindow> ws;
  std::vector<std::vector<double>> es;
  std::uniform_real_distribution<double> err(0.0, 1.0);
  for (int b = 0; b < 3; ++b) {
    ws.push_back(random_window(8, rng));
    es.push_back({err(rng), err(rng), err(rng), err(rng)});
  }
  std::vector<const models::TimeSeriesWindow*> wp;
  std::vector<const std::vector<double>*> ep;
  for (int b = 0; b < 3; ++b) wp.push_back(&ws[static_cast<std::size_t>(b)]), ep.push_back(&es[static_cast<std::size_t>(b)]);
  const EncoderBatch batch = pack_batch(wp, ep, f.cfg);
  Tensor weights({3, 16});
  std::normal_distribution<double> g(0.0, 1.0);
  for (double& v : weights.values()) v = g(rng);

  const reem::testing::ScalarFn fn = [&](Tape& tape, const ParameterSet& p) {
    Var s = build_state(tape, p, batch, f.cfg);
    return diff::sum(diff::mul_const(s, weights));
  };
  const auto result = reem::testing::finite_difference_check(f.params, fn, 300, rng, 1e-5);
  EXPECT_EQ(result.probes, 300u);
  EXPECT_LE(result.max_rel_error, 1e-4) << result.worst;
}
