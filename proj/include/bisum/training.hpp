#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "bisum/error.hpp"
#include "bisum/metrics.hpp"
#include "bisum/ranking_loss.hpp"
#include "bisum/rng.hpp"
#include "bisum/scorer.hpp"
#include "bisum/timeline.hpp"

namespace bisum {

struct SyntheticSample {
  Eigen::MatrixXd features;           // clips x model_dim
  std::vector<double> target;         // regression target (possibly distorted)
  std::vector<double> ranking_target; // normalized target in [0, 1]
};

inline SyntheticSample make_sample(Eigen::MatrixXd features, std::vector<double> target) {
  if (static_cast<std::size_t>(features.rows()) != target.size())
    throw InvalidInput("sample: feature rows and targets differ in length");
  auto ranking = normalize_scores(target);
  return {std::move(features), std::move(target), std::move(ranking)};
}

struct Benchmark {
  std::vector<SyntheticSample> train;
  std::vector<SyntheticSample> validation;
};

struct BenchmarkOptions {
  bool distorted = true;
  std::size_t model_dim = 16;
  std::size_t channel_dims = 4;
  double validation_fraction = 0.2;
  double low_scale_fraction = 0.4;
  double high_scale_min = 0.8;
  double low_scale_min = 0.15;
  double low_scale_max = 0.3;
  double high_signal_noise = 0.4;
  double low_signal_noise = 0.7;
  double cross_noise = 0.15;
  double background_noise = 0.1;
};

namespace detail {

inline double sample_variance(const std::vector<double>& x) {
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  double acc = 0.0;
  for (double v : x) acc += (v - mean) * (v - mean);
  return acc / static_cast<double>(x.size());
}

}  // namespace detail

/// Synthetic videos with a latent saliency curve observed through noisy features.
///
/// Each latent curve is a few Gaussian bumps standardized to a common contrast
/// (mean 0.5, sd 0.22, clipped to [0, 1]). Videos come in two kinds. A
/// high-scale video shows its latent curve on feature channel A ([0, c)) and a
/// flat, slightly noisy level on channel B ([c, 2c)); a low-scale video swaps
/// the roles and is observed with more noise. Remaining columns are weak
/// background noise.
///
/// Distorted targets are scale * latent + offset with the scale drawn per video
/// from [high_scale_min, 1] or [low_scale_min, low_scale_max] by kind and the
/// offset from [0, 1 - scale]. The map is monotone, so every video's ranking is
/// the latent ranking, but a pointwise regressor is paid mostly for the
/// high-scale videos. The control benchmark uses scale 1 and offset 0.
inline Benchmark make_distorted_benchmark(std::size_t num_videos, std::size_t clips_per_video, std::uint64_t seed,
                                          const BenchmarkOptions& opt = {}) {
  Benchmark out;
  if (clips_per_video < 2 || num_videos < 1) return out;
  const auto d = static_cast<Eigen::Index>(opt.model_dim);
  const auto c = static_cast<Eigen::Index>(opt.channel_dims);
  if (c < 1 || 2 * c > d) throw InvalidInput("benchmark: model_dim must hold two feature channels");
  Rng rng(seed);

  const auto n = static_cast<Eigen::Index>(clips_per_video);
  const std::size_t num_validation =
      std::min(num_videos - 1, static_cast<std::size_t>(std::llround(opt.validation_fraction * num_videos)));

  for (std::size_t v = 0; v < num_videos; ++v) {
    std::vector<double> latent(clips_per_video, 0.0);
    const std::size_t bumps = 1 + rng.index(3);
    for (std::size_t b = 0; b < bumps; ++b) {
      const double center = rng.uniform(0.0, static_cast<double>(n));
      const double width = rng.uniform(0.8, 0.25 * static_cast<double>(n) + 1.0);
      const double height = rng.uniform(0.4, 1.0);
      for (Eigen::Index i = 0; i < n; ++i) {
        const double z = (static_cast<double>(i) - center) / width;
        latent[static_cast<std::size_t>(i)] += height * std::exp(-0.5 * z * z);
      }
    }
    for (auto& x : latent) x += 0.05 * rng.uniform();
    double mean = 0.0;
    for (double x : latent) mean += x;
    mean /= static_cast<double>(clips_per_video);
    const double sd = std::sqrt(detail::sample_variance(latent));
    for (auto& x : latent) x = std::clamp(0.5 + 0.22 * (x - mean) / sd, 0.0, 1.0);

    const bool low = rng.uniform() < opt.low_scale_fraction;
    double scale = low ? rng.uniform(opt.low_scale_min, opt.low_scale_max) : rng.uniform(opt.high_scale_min, 1.0);
    double offset = rng.uniform(0.0, 1.0 - scale);
    if (!opt.distorted) {
      scale = 1.0;
      offset = 0.0;
    }

    const Eigen::Index active = low ? c : 0;
    const Eigen::Index idle = low ? 0 : c;
    const double noise = low ? opt.low_signal_noise : opt.high_signal_noise;
    Eigen::MatrixXd features(n, d);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < d; ++j) features(i, j) = opt.background_noise * rng.normal();
      for (Eigen::Index j = 0; j < c; ++j) {
        features(i, active + j) = latent[static_cast<std::size_t>(i)] + noise * rng.normal();
        features(i, idle + j) = 0.5 + opt.cross_noise * rng.normal();
      }
    }
    std::vector<double> target(clips_per_video);
    for (std::size_t i = 0; i < clips_per_video; ++i) target[i] = scale * latent[i] + offset;

    auto& dest = v < num_videos - num_validation ? out.train : out.validation;
    dest.push_back(make_sample(std::move(features), std::move(target)));
  }
  return out;
}

enum class LossKind { mse, neural_ndcg };

inline std::string to_string(LossKind k) { return k == LossKind::mse ? "mse" : "neuralndcg"; }

struct TrainConfig {
  LossKind loss = LossKind::neural_ndcg;
  std::size_t epochs = 100;
  double learning_rate = 5e-3;
  std::uint64_t seed = 0;
  std::size_t batch_size = 8;
  NeuralNdcgConfig ranking{};
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  // Slot for a text-side objective trained jointly with the visual one. Called
  // once per epoch; its value is added to the recorded loss. Unset: no-op.
  std::function<double(std::size_t epoch)> text_objective_hook;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_ndcg15 = kNaN;
  double val_ndcg_all = kNaN;
};

struct TrainResult {
  ScorerParams params;
  std::vector<EpochRecord> history;
};

/// Loss and d(loss)/d(prediction) for one sample.
inline LossValue sample_loss(std::span<const double> prediction, const SyntheticSample& s, const TrainConfig& cfg) {
  if (cfg.loss == LossKind::mse) return mse_loss(prediction, s.target);
  return neural_ndcg_loss(prediction, s.ranking_target, cfg.ranking);
}

/// Mean loss over `samples` and its parameter gradient.
inline double loss_and_gradient(const ScorerParams& params, std::span<const SyntheticSample* const> samples,
                                const TrainConfig& cfg, ScorerParams& grad) {
  grad = ScorerParams::zeros(params.config);
  double total = 0.0;
  const double inv = 1.0 / static_cast<double>(samples.size());
  for (const SyntheticSample* sp : samples) {
    const auto& s = *sp;
    const auto cache = forward(s.features, params);
    const std::span<const double> pred(cache.prediction.data(), static_cast<std::size_t>(cache.prediction.size()));
    auto lv = sample_loss(pred, s, cfg);
    total += lv.value * inv;
    for (auto& g : lv.gradient) g *= inv;
    backward(cache, lv.gradient, params, grad);
  }
  return total;
}

inline double loss_and_gradient(const ScorerParams& params, std::span<const SyntheticSample> samples,
                                const TrainConfig& cfg, ScorerParams& grad) {
  std::vector<const SyntheticSample*> ptrs;
  for (const auto& s : samples) ptrs.push_back(&s);
  return loss_and_gradient(params, std::span<const SyntheticSample* const>(ptrs), cfg, grad);
}

struct ValidationScores {
  double ndcg15 = kNaN;
  double ndcg_all = kNaN;
  double kendall_tau = kNaN;
  double spearman_rho = kNaN;
};

inline ValidationScores evaluate_scorer(const ScorerParams& params, std::span<const SyntheticSample> samples) {
  ValidationScores out;
  if (samples.empty()) return out;
  double n15 = 0, nall = 0, tau = 0, rho = 0;
  std::size_t tau_count = 0, rho_count = 0;
  for (const auto& s : samples) {
    const auto pred = predict(s.features, params);
    const auto r = ndcg_vm(pred, s.ranking_target);
    n15 += r.at_15;
    nall += r.at_all;
    if (const double t = kendall_tau(pred, s.ranking_target); !std::isnan(t)) tau += t, ++tau_count;
    if (const double p = spearman_rho(pred, s.ranking_target); !std::isnan(p)) rho += p, ++rho_count;
  }
  const auto m = static_cast<double>(samples.size());
  out.ndcg15 = n15 / m;
  out.ndcg_all = nall / m;
  if (tau_count) out.kendall_tau = tau / static_cast<double>(tau_count);
  if (rho_count) out.spearman_rho = rho / static_cast<double>(rho_count);
  return out;
}

/// Fraction of samples whose predicted scores have strictly lower variance than their targets.
inline double smoothed_fraction(const ScorerParams& params, std::span<const SyntheticSample> samples) {
  if (samples.empty()) return kNaN;
  std::size_t count = 0;
  for (const auto& s : samples)
    if (detail::sample_variance(predict(s.features, params)) < detail::sample_variance(s.target)) ++count;
  return static_cast<double>(count) / static_cast<double>(samples.size());
}

/// Mini-batch Adam. Batch order is shuffled per epoch from cfg.seed; parameters
/// are initialized from model_cfg.seed.
inline TrainResult train(const EncoderConfig& model_cfg, std::span<const SyntheticSample> train_set,
                         std::span<const SyntheticSample> validation_set, const TrainConfig& cfg) {
  if (train_set.empty()) throw InvalidInput("train: empty dataset");
  if (cfg.epochs < 1) throw InvalidInput("train: epochs must be at least 1");
  if (cfg.batch_size < 1) throw InvalidInput("train: batch size must be at least 1");
  if (!(cfg.learning_rate >= 0.0)) throw InvalidInput("train: learning rate must be non-negative");

  TrainResult result{ScorerParams::init(model_cfg), {}};
  auto& params = result.params;
  auto weights = params.flat_pointers();
  std::vector<double> m1(weights.size(), 0.0), m2(weights.size(), 0.0);
  std::size_t step = 0;

  Rng rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  ScorerParams grad = ScorerParams::zeros(model_cfg);
  std::vector<const SyntheticSample*> batch;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
      batch.clear();
      for (std::size_t i = begin; i < end; ++i) batch.push_back(&train_set[order[i]]);
      const double batch_loss =
          loss_and_gradient(params, std::span<const SyntheticSample* const>(batch), cfg, grad);
      if (!std::isfinite(batch_loss)) throw TrainingFailure(epoch, "non-finite loss");
      epoch_loss += batch_loss * static_cast<double>(end - begin) / static_cast<double>(order.size());

      ++step;
      const auto g = grad.flat_pointers();
      const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
      for (std::size_t i = 0; i < weights.size(); ++i) {
        m1[i] = cfg.beta1 * m1[i] + (1.0 - cfg.beta1) * *g[i];
        m2[i] = cfg.beta2 * m2[i] + (1.0 - cfg.beta2) * *g[i] * *g[i];
        *weights[i] -= cfg.learning_rate * (m1[i] / c1) / (std::sqrt(m2[i] / c2) + cfg.adam_epsilon);
      }
    }
    if (cfg.text_objective_hook) epoch_loss += cfg.text_objective_hook(epoch);
    if (!std::isfinite(epoch_loss) || !params.all_finite()) throw TrainingFailure(epoch, "non-finite loss or weights");

    EpochRecord rec{epoch, epoch_loss, kNaN, kNaN};
    if (!validation_set.empty()) {
      const auto v = evaluate_scorer(params, validation_set);
      rec.val_ndcg15 = v.ndcg15;
      rec.val_ndcg_all = v.ndcg_all;
    }
    result.history.push_back(rec);
  }
  return result;
}

inline std::string history_csv(std::span<const EpochRecord> history) {
  std::string out = "epoch,train_loss,val_ndcg@15,val_ndcg@all\n";
  for (const auto& r : history) out += fmt::format("{},{},{},{}\n", r.epoch, r.train_loss, r.val_ndcg15, r.val_ndcg_all);
  return out;
}

// Checkpoints are JSON documents tagged with a format name and version.
inline constexpr int kCheckpointVersion = 1;

inline nlohmann::ordered_json checkpoint_json(const ScorerParams& params) {
  const auto& c = params.config;
  nlohmann::ordered_json doc;
  doc["format"] = "bisum-scorer";
  doc["version"] = kCheckpointVersion;
  doc["config"] = {{"kind", c.kind == ScorerKind::encoder ? "encoder" : "linear"},
                   {"num_layers", c.num_layers},
                   {"model_dim", c.model_dim},
                   {"num_heads", c.num_heads},
                   {"ffn_dim", c.ffn_dim},
                   {"regressor_dim", c.regressor_dim},
                   {"regressor_input", c.regressor_input == RegressorInput::gates ? "gates" : "hidden"},
                   {"positional_encoding", c.positional_encoding},
                   {"seed", c.seed}};
  auto& tensors = doc["tensors"] = nlohmann::ordered_json::object();
  params.for_each_tensor([&](const std::string& name, const auto& t) {
    // Column-major storage order, as Eigen keeps it.
    tensors[name] = {{"rows", t.rows()},
                     {"cols", t.cols()},
                     {"data", std::vector<double>(t.data(), t.data() + t.size())}};
  });
  return doc;
}

inline ScorerParams params_from_checkpoint(const nlohmann::json& doc) {
  if (doc.value("format", "") != "bisum-scorer") throw InvalidInput("checkpoint: unknown format");
  if (doc.value("version", 0) != kCheckpointVersion) throw InvalidInput("checkpoint: unsupported version");
  const auto& jc = doc.at("config");
  EncoderConfig cfg;
  cfg.kind = jc.at("kind").get<std::string>() == "linear" ? ScorerKind::linear : ScorerKind::encoder;
  cfg.num_layers = jc.at("num_layers").get<std::size_t>();
  cfg.model_dim = jc.at("model_dim").get<std::size_t>();
  cfg.num_heads = jc.at("num_heads").get<std::size_t>();
  cfg.ffn_dim = jc.at("ffn_dim").get<std::size_t>();
  cfg.regressor_dim = jc.at("regressor_dim").get<std::size_t>();
  cfg.regressor_input = jc.at("regressor_input").get<std::string>() == "hidden" ? RegressorInput::hidden
                                                                              : RegressorInput::gates;
  cfg.positional_encoding = jc.at("positional_encoding").get<bool>();
  cfg.seed = jc.at("seed").get<std::uint64_t>();
  ScorerParams p = ScorerParams::zeros(cfg);
  const auto& tensors = doc.at("tensors");
  p.for_each_tensor([&](const std::string& name, auto& t) {
    if (!tensors.contains(name)) throw InvalidInput("checkpoint: missing tensor " + name);
    const auto& jt = tensors.at(name);
    const auto data = jt.at("data").get<std::vector<double>>();
    if (jt.at("rows").get<Eigen::Index>() != t.rows() || jt.at("cols").get<Eigen::Index>() != t.cols() ||
        static_cast<Eigen::Index>(data.size()) != t.size())
      throw InvalidInput("checkpoint: shape mismatch for tensor " + name);
    std::copy(data.begin(), data.end(), t.data());
  });
  if (!p.all_finite()) throw InvalidInput("checkpoint: non-finite weights");
  return p;
}

}  // namespace bisum
