#include <gtest/gtest.h>

#include "bisum/scorer.hpp"
#include "oracles.hpp"

using namespace bisum;

namespace {

oracle::Mat to_nested(const Eigen::MatrixXd& m) {
  oracle::Mat out(static_cast<std::size_t>(m.rows()), oracle::Vec(static_cast<std::size_t>(m.cols())));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) out[r][c] = m(r, c);
  return out;
}

oracle::Vec to_vec(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

oracle::Layer to_oracle(const LayerParams& p) {
  return {to_nested(p.wq), to_nested(p.wk), to_nested(p.wv), to_nested(p.wo), to_nested(p.w1), to_nested(p.w2),
          to_vec(p.bq),    to_vec(p.bk),    to_vec(p.bv),    to_vec(p.bo),    to_vec(p.b1),    to_vec(p.b2)};
}

EncoderConfig tiny(RegressorInput input, std::uint64_t seed) {
  EncoderConfig cfg;
  cfg.num_layers = 2;
  cfg.model_dim = 4;
  cfg.num_heads = 2;
  cfg.ffn_dim = 3;
  cfg.regressor_dim = 3;
  cfg.seed = seed;
  cfg.regressor_input = input;
  return cfg;
}

Eigen::MatrixXd features(Eigen::Index n, Eigen::Index d, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd x(n, d);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
  return x;
}

// Random nonzero biases so the gradient check covers them too.
ScorerParams perturbed(const EncoderConfig& cfg) {
  auto p = ScorerParams::init(cfg);
  Rng rng(cfg.seed + 1000);
  for (double* v : p.flat_pointers()) *v += 0.1 * rng.normal();
  return p;
}

}  // namespace

TEST(Scorer, ZeroWeightsGiveOneHalf) {
  const auto p = ScorerParams::zeros(EncoderConfig{});
  for (double s : predict(features(7, 16, 1), p)) EXPECT_DOUBLE_EQ(s, 0.5);
}

TEST(Scorer, ZeroFeedForwardGivesHalfGates) {
  auto p = ScorerParams::init(EncoderConfig{});
  for (auto& l : p.layers) {
    l.w2.setZero();
    l.b2.setZero();
  }
  const auto out = encoder_forward(features(5, 16, 2), p);
  EXPECT_TRUE((out.gates.array() == 0.5).all());
}

TEST(Scorer, ShapesArePreserved) {
  const auto p = ScorerParams::init(EncoderConfig{});
  for (Eigen::Index n : {1, 3, 11}) {
    const auto cache = forward(features(n, 16, 3), p);
    for (const auto& l : cache.layers) {
      EXPECT_EQ(l.output.rows(), n);
      EXPECT_EQ(l.output.cols(), 16);
      EXPECT_EQ(l.gate.rows(), n);
      EXPECT_EQ(l.gate.cols(), 16);
    }
    EXPECT_EQ(cache.prediction.size(), n);
  }
}

TEST(Scorer, RejectsBadShapesAndConfig) {
  const auto p = ScorerParams::init(EncoderConfig{});
  EXPECT_THROW(predict(features(3, 5, 1), p), InvalidInput);
  EXPECT_THROW(predict(Eigen::MatrixXd(0, 16), p), InvalidInput);
  EncoderConfig bad;
  bad.num_heads = 3;
  EXPECT_THROW(ScorerParams::init(bad), InvalidInput);
  EXPECT_THROW(regress_scores(Eigen::MatrixXd::Zero(2, 3), p), InvalidInput);
}

TEST(Scorer, GatesStrictlyInsideUnitIntervalAndOutputIsGatedResidual) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    EncoderConfig cfg;
    cfg.seed = seed;
    const auto p = ScorerParams::init(cfg);
    const auto cache = forward(features(9, 16, seed + 10), p);
    for (const auto& l : cache.layers) {
      EXPECT_GT(l.gate.minCoeff(), 0.0);
      EXPECT_LT(l.gate.maxCoeff(), 1.0);
      EXPECT_TRUE(l.output.cwiseEqual(l.gate.cwiseProduct(l.residual)).all());
    }
  }
}

TEST(Scorer, MatchesLoopImplementation) {
  for (auto input : {RegressorInput::gates, RegressorInput::hidden}) {
    EncoderConfig cfg;
    cfg.seed = 42;
    cfg.regressor_input = input;
    const auto p = perturbed(cfg);
    const auto x = features(6, 16, 9);
    oracle::Mat h = to_nested(x);
    oracle::Mat gate;
    for (const auto& l : p.layers) {
      auto out = oracle::encoder_layer(h, to_oracle(l), cfg.num_heads);
      h = out.output;
      gate = out.gate;
    }
    const auto want = oracle::regressor(input == RegressorInput::gates ? gate : h, to_nested(p.r1), to_vec(p.c1),
                                        to_vec(p.r2), p.c2(0));
    const auto got = predict(x, p);
    ASSERT_EQ(got.size(), want.size());
    for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-12);

    const auto enc = encoder_forward(x, p);
    for (Eigen::Index r = 0; r < enc.hidden.rows(); ++r)
      for (Eigen::Index c = 0; c < enc.hidden.cols(); ++c) {
        EXPECT_NEAR(enc.hidden(r, c), h[r][c], 1e-12);
        EXPECT_NEAR(enc.gates(r, c), gate[r][c], 1e-12);
      }
  }
}

TEST(Scorer, FixedSeedIsReproducible) {
  EncoderConfig cfg;
  cfg.seed = 123;
  const auto a = predict(features(4, 16, 5), ScorerParams::init(cfg));
  const auto b = predict(features(4, 16, 5), ScorerParams::init(cfg));
  EXPECT_EQ(a, b);
  cfg.seed = 124;
  EXPECT_NE(a, predict(features(4, 16, 5), ScorerParams::init(cfg)));
}

TEST(Scorer, ParameterGradientsMatchFiniteDifferences) {
  for (auto input : {RegressorInput::gates, RegressorInput::hidden}) {
    for (std::uint64_t seed : {3u, 8u}) {
      const auto cfg = tiny(input, seed);
      auto p = perturbed(cfg);
      const auto x = features(3, 4, seed + 50);
      const std::vector<double> weight{0.7, -1.3, 0.4};
      auto objective = [&](const ScorerParams& q) {
        const auto s = predict(x, q);
        double v = 0;
        for (std::size_t i = 0; i < s.size(); ++i) v += weight[i] * s[i];
        return v;
      };
      auto grad = ScorerParams::zeros(cfg);
      backward(forward(x, p), weight, p, grad);
      const auto analytic = grad.flat_pointers();
      const auto params = p.flat_pointers();
      ASSERT_EQ(analytic.size(), p.parameter_count());
      for (std::size_t i = 0; i < params.size(); ++i) {
        const double keep = *params[i];
        const double h = 1e-6;
        *params[i] = keep + h;
        const double up = objective(p);
        *params[i] = keep - h;
        const double down = objective(p);
        *params[i] = keep;
        const double fd = (up - down) / (2 * h);
        const double diff = std::abs(*analytic[i] - fd);
        EXPECT_TRUE(diff <= 1e-7 || diff <= 1e-3 * std::max(std::abs(fd), std::abs(*analytic[i])))
            << "param " << i << ": " << *analytic[i] << " vs " << fd;
      }
    }
  }
}

TEST(Scorer, LinearScorer) {
  EncoderConfig cfg;
  cfg.kind = ScorerKind::linear;
  cfg.model_dim = 3;
  auto p = ScorerParams::zeros(cfg);
  p.linear_w << 1, 2, 3;
  p.linear_b(0) = 0.5;
  Eigen::MatrixXd x(2, 3);
  x << 1, 0, 0, 0, 1, 1;
  EXPECT_EQ(predict(x, p), (std::vector<double>{1.5, 5.5}));
  EXPECT_THROW(encoder_forward(x, p), InvalidInput);
}
