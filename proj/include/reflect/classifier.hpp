// SPDX-License-Identifier: Apache-2.0
//
// Hashed bag-of-words features and an L2-regularized logistic classifier
// trained by mini-batch SGD with per-epoch checkpoints. Training is a pure
// function of (dataset, config): fixed shuffles, fixed summation order,
// bitwise-reproducible weights.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "reflect/corpus.hpp"

namespace reflect {

// Sparse L2-normalized feature vector; entries sorted by index, unique.
struct FeatureVector {
  std::uint32_t dimension = 0;
  std::vector<std::pair<std::uint32_t, double>> entries;

  double dot(std::span<const double> weights) const;
};

// Lowercases, splits diff and comment on non-alphanumeric ASCII boundaries,
// tags tokens with "d:"/"c:", hashes with FNV-1a 64 into [0, dimension),
// accumulates counts, L2-normalizes. dimension must be a power of two.
// Empty text hashes to the zero vector.
FeatureVector featurize(const FeedbackSample& sample, std::uint32_t dimension);

struct TrainConfig {
  std::uint32_t dimension = 1u << 18;  // power of two
  std::uint32_t epochs = 80;
  std::uint32_t batch_size = 256;
  // Slow-but-long schedule: logistic loss on unit-norm features tolerates
  // far larger rates, but the final-batch position of SGD wanders with the
  // rate, and that endpoint noise must stay well below the boundary shifts
  // the doping schedule induces.
  double learning_rate = 0.25;
  double l2 = 1e-6;
  std::uint64_t seed = 0;
  std::uint32_t checkpoint_every = 20;

  void validate() const;

  bool operator==(const TrainConfig&) const = default;
};

struct Model {
  std::vector<double> weights;
  double bias = 0.0;
  std::optional<double> alpha;      // doping ratio of the training set; absent for the final model
  std::uint32_t checkpoint_epoch = 0;
  TrainConfig hyperparams;

  std::uint32_t dimension() const { return hyperparams.dimension; }
};

struct Prediction {
  int label;     // 1 = retain, 0 = intercept
  double score;  // sigmoid probability of label 1
};

// score = sigmoid(w . x + b); label = 1 iff score >= 0.5 (ties retain).
Prediction predict(const Model& model, const FeedbackSample& sample);
Prediction predict_features(const Model& model, const FeatureVector& features);

// Featurizes every sample of a corpus once so the K trainings and the
// relabel pass do not re-hash shared text.
class FeatureCache {
 public:
  FeatureCache(const Corpus& corpus, std::uint32_t dimension);

  const FeatureVector& operator[](std::size_t i) const { return features_[i]; }
  std::size_t size() const { return features_.size(); }
  std::uint32_t dimension() const { return dimension_; }

 private:
  std::uint32_t dimension_;
  std::vector<FeatureVector> features_;
};

// Minimizes mean logistic loss + (l2/2)*||w||^2 (bias unregularized) by
// mini-batch SGD; data reshuffled per epoch from the config seed. Returns
// one Model per checkpoint epoch, final epoch last.
std::vector<Model> train(const BinaryDataset& dataset, const TrainConfig& config);
std::vector<Model> train(const BinaryDataset& dataset, const TrainConfig& config,
                         const FeatureCache& cache);

// Objective and gradient over an explicit batch, for oracle checks and the
// training step itself: loss = mean_i softplus(-y_i * (w.x_i + b)) with
// y_i in {-1,+1}, plus (l2/2)*||w||^2.
double logistic_loss(std::span<const FeatureVector> features, std::span<const int> labels,
                     std::span<const double> weights, double bias, double l2);
void logistic_gradient(std::span<const FeatureVector> features, std::span<const int> labels,
                       std::span<const double> weights, double bias, double l2,
                       std::span<double> grad_weights, double& grad_bias);

// Versioned binary container; layout documented in the README. Round-trips
// are lossless including hyperparameters, alpha, and checkpoint epoch.
void save_model(const Model& model, const std::filesystem::path& path);
Model load_model(const std::filesystem::path& path);

}  // namespace reflect
