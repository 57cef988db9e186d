// SPDX-License-Identifier: Apache-2.0

#include "reflect/classifier.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <string>
#include <unordered_map>

#include "reflect/errors.hpp"
#include "reflect/rng.hpp"

namespace reflect {

namespace {

bool is_power_of_two(std::uint32_t v) { return v != 0 && (v & (v - 1)) == 0; }

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + exp(t)) without overflow.
double softplus(double t) {
  if (t > 35.0) return t;
  if (t < -35.0) return std::exp(t);
  return std::log1p(std::exp(t));
}

}  // namespace

double FeatureVector::dot(std::span<const double> weights) const {
  double acc = 0.0;
  for (const auto& [idx, value] : entries) acc += weights[idx] * value;
  return acc;
}

FeatureVector featurize(const FeedbackSample& sample, std::uint32_t dimension) {
  if (!is_power_of_two(dimension)) {
    throw std::invalid_argument("featurize: dimension must be a power of two");
  }
  const std::uint32_t mask = dimension - 1;

  std::unordered_map<std::uint32_t, double> counts;
  auto hash_field = [&](const char* tag, const std::string& text) {
    std::string token = tag;  // "d:" / "c:" prefix stays in the hashed bytes
    const std::size_t tag_len = token.size();
    auto flush = [&]() {
      if (token.size() > tag_len) {
        counts[static_cast<std::uint32_t>(fnv1a64(token) & mask)] += 1.0;
        token.resize(tag_len);
      }
    };
    for (unsigned char c : text) {
      if (std::isalnum(c)) {
        token += static_cast<char>(std::tolower(c));
      } else {
        flush();
      }
    }
    flush();
  };
  hash_field("d:", sample.diff);
  hash_field("c:", sample.comment);

  FeatureVector fv;
  fv.dimension = dimension;
  fv.entries.assign(counts.begin(), counts.end());
  std::sort(fv.entries.begin(), fv.entries.end());

  double norm_sq = 0.0;
  for (const auto& [idx, value] : fv.entries) norm_sq += value * value;
  if (norm_sq > 0.0) {
    const double inv = 1.0 / std::sqrt(norm_sq);
    for (auto& [idx, value] : fv.entries) value *= inv;
  }
  return fv;
}

void TrainConfig::validate() const {
  if (!is_power_of_two(dimension)) throw DataError("train: dimension must be a power of two");
  if (epochs < 1) throw DataError("train: epochs must be >= 1");
  if (batch_size < 1) throw DataError("train: batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw DataError("train: learning_rate must be > 0");
  if (l2 < 0.0) throw DataError("train: l2 must be >= 0");
  if (checkpoint_every < 1) throw DataError("train: checkpoint_every must be >= 1");
}

Prediction predict_features(const Model& model, const FeatureVector& features) {
  if (features.dimension != model.dimension()) {
    throw DataError("predict: feature dimension " + std::to_string(features.dimension) +
                    " does not match model dimension " + std::to_string(model.dimension()));
  }
  const double score = sigmoid(features.dot(model.weights) + model.bias);
  return {score >= 0.5 ? 1 : 0, score};
}

Prediction predict(const Model& model, const FeedbackSample& sample) {
  return predict_features(model, featurize(sample, model.dimension()));
}

FeatureCache::FeatureCache(const Corpus& corpus, std::uint32_t dimension)
    : dimension_(dimension) {
  features_.reserve(corpus.size());
  for (const FeedbackSample& s : corpus) features_.push_back(featurize(s, dimension));
}

double logistic_loss(std::span<const FeatureVector> features, std::span<const int> labels,
                     std::span<const double> weights, double bias, double l2) {
  double sum = 0.0;
  for (std::size_t i = 0; i < features.size(); ++i) {
    const double z = features[i].dot(weights) + bias;
    const double y = labels[i] == 1 ? 1.0 : -1.0;
    sum += softplus(-y * z);
  }
  double reg = 0.0;
  for (double w : weights) reg += w * w;
  return sum / static_cast<double>(features.size()) + 0.5 * l2 * reg;
}

void logistic_gradient(std::span<const FeatureVector> features, std::span<const int> labels,
                       std::span<const double> weights, double bias, double l2,
                       std::span<double> grad_weights, double& grad_bias) {
  std::fill(grad_weights.begin(), grad_weights.end(), 0.0);
  grad_bias = 0.0;
  const double inv_n = 1.0 / static_cast<double>(features.size());
  for (std::size_t i = 0; i < features.size(); ++i) {
    const double z = features[i].dot(weights) + bias;
    const double residual = (sigmoid(z) - (labels[i] == 1 ? 1.0 : 0.0)) * inv_n;
    for (const auto& [idx, value] : features[i].entries) {
      grad_weights[idx] += residual * value;
    }
    grad_bias += residual;
  }
  for (std::size_t j = 0; j < weights.size(); ++j) grad_weights[j] += l2 * weights[j];
}

namespace {

std::vector<Model> train_impl(const BinaryDataset& dataset, const TrainConfig& config,
                              const FeatureVector* (*feature_of)(const void*, std::size_t),
                              const void* feature_ctx) {
  config.validate();
  if (dataset.size() == 0) throw DataError("train: empty dataset");
  auto [zeros, ones] = dataset.label_counts();
  if (zeros == 0 || ones == 0) {
    throw DataError("train: dataset has a single class (" + std::to_string(zeros) +
                    " negatives, " + std::to_string(ones) + " positives)");
  }

  const std::size_t n = dataset.size();
  std::vector<double> weights(config.dimension, 0.0);
  double bias = 0.0;

  // Scratch for the deterministic batch accumulator.
  std::vector<double> grad(config.dimension, 0.0);
  std::vector<std::uint32_t> touched;
  std::vector<char> seen(config.dimension, 0);

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;

  std::vector<Model> checkpoints;
  const double decay = 1.0 - config.learning_rate * config.l2;

  for (std::uint32_t epoch = 1; epoch <= config.epochs; ++epoch) {
    Rng rng(derive_seed(config.seed, "epoch", epoch));
    rng.shuffle(order);

    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t end = std::min(n, start + config.batch_size);
      const double inv_b = 1.0 / static_cast<double>(end - start);

      double grad_bias = 0.0;
      for (std::size_t pos = start; pos < end; ++pos) {
        const std::size_t item = order[pos];
        const FeatureVector& fv = *feature_of(feature_ctx, dataset.items()[item].sample_index);
        const double z = fv.dot(weights) + bias;
        const int y = dataset.items()[item].label;
        epoch_loss += softplus(-(y == 1 ? 1.0 : -1.0) * z);
        const double residual = (sigmoid(z) - (y == 1 ? 1.0 : 0.0)) * inv_b;
        for (const auto& [idx, value] : fv.entries) {
          if (!seen[idx]) {
            seen[idx] = 1;
            touched.push_back(idx);
          }
          grad[idx] += residual * value;
        }
        grad_bias += residual;
      }

      // w <- w*(1 - lr*l2) - lr*grad_data, exactly the regularized SGD step.
      if (config.l2 > 0.0) {
        for (double& w : weights) w *= decay;
      }
      for (std::uint32_t idx : touched) {
        weights[idx] -= config.learning_rate * grad[idx];
        grad[idx] = 0.0;
        seen[idx] = 0;
      }
      touched.clear();
      bias -= config.learning_rate * grad_bias;
    }

    if (!std::isfinite(epoch_loss) || !std::isfinite(bias)) {
      throw DataError("train: non-finite loss at epoch " + std::to_string(epoch) +
                      "; learning rate likely too large");
    }

    if (epoch % config.checkpoint_every == 0 || epoch == config.epochs) {
      Model m;
      m.weights = weights;
      m.bias = bias;
      m.alpha = dataset.alpha();
      m.checkpoint_epoch = epoch;
      m.hyperparams = config;
      checkpoints.push_back(std::move(m));
    }
  }
  return checkpoints;
}

struct OwnedFeatures {
  std::vector<FeatureVector> features;  // indexed by sample_index
};

const FeatureVector* owned_feature_of(const void* ctx, std::size_t sample_index) {
  return &static_cast<const OwnedFeatures*>(ctx)->features[sample_index];
}

const FeatureVector* cache_feature_of(const void* ctx, std::size_t sample_index) {
  return &(*static_cast<const FeatureCache*>(ctx))[sample_index];
}

}  // namespace

std::vector<Model> train(const BinaryDataset& dataset, const TrainConfig& config) {
  // Featurize only the samples the dataset references.
  OwnedFeatures owned;
  owned.features.resize(dataset.source().size());
  std::vector<char> done(dataset.source().size(), 0);
  for (const LabeledItem& item : dataset.items()) {
    if (!done[item.sample_index]) {
      done[item.sample_index] = 1;
      owned.features[item.sample_index] =
          featurize(dataset.source()[item.sample_index], config.dimension);
    }
  }
  return train_impl(dataset, config, owned_feature_of, &owned);
}

std::vector<Model> train(const BinaryDataset& dataset, const TrainConfig& config,
                         const FeatureCache& cache) {
  if (cache.dimension() != config.dimension) {
    throw DataError("train: feature cache dimension does not match config");
  }
  if (cache.size() != dataset.source().size()) {
    throw DataError("train: feature cache size does not match source corpus");
  }
  return train_impl(dataset, config, cache_feature_of, &cache);
}

// --- model container --------------------------------------------------------
//
// Little-endian layout, version 1:
//   magic "RMDL" | u32 version | u32 dimension | u32 epochs | u32 batch_size
//   | u32 checkpoint_every | u32 checkpoint_epoch | u8 has_alpha | f64 alpha
//   | f64 learning_rate | f64 l2 | u64 seed | f64 bias | f64 weights[dimension]

namespace {

constexpr char kMagic[4] = {'R', 'M', 'D', 'L'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out += static_cast<char>((v >> (8 * i)) & 0xff);
}
void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out += static_cast<char>((v >> (8 * i)) & 0xff);
}
void put_f64(std::string& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

struct Reader {
  std::ifstream in;
  std::filesystem::path path;

  void read(char* dst, std::size_t count) {
    in.read(dst, static_cast<std::streamsize>(count));
    if (in.gcount() != static_cast<std::streamsize>(count)) {
      throw DataError(path.string() + ": corrupt model file (truncated)");
    }
  }
  std::uint32_t u32() {
    unsigned char b[4];
    read(reinterpret_cast<char*>(b), 4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
  }
  std::uint64_t u64() {
    std::uint64_t lo = u32();
    std::uint64_t hi = u32();
    return lo | (hi << 32);
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::uint8_t u8() {
    char c;
    read(&c, 1);
    return static_cast<std::uint8_t>(c);
  }
};

}  // namespace

void save_model(const Model& model, const std::filesystem::path& path) {
  std::string buf;
  buf.reserve(64 + 8 * model.weights.size());
  buf.append(kMagic, 4);
  put_u32(buf, kVersion);
  put_u32(buf, model.hyperparams.dimension);
  put_u32(buf, model.hyperparams.epochs);
  put_u32(buf, model.hyperparams.batch_size);
  put_u32(buf, model.hyperparams.checkpoint_every);
  put_u32(buf, model.checkpoint_epoch);
  buf += static_cast<char>(model.alpha ? 1 : 0);
  put_f64(buf, model.alpha.value_or(0.0));
  put_f64(buf, model.hyperparams.learning_rate);
  put_f64(buf, model.hyperparams.l2);
  put_u64(buf, model.hyperparams.seed);
  put_f64(buf, model.bias);
  for (double w : model.weights) put_f64(buf, w);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  out.flush();
  if (!out) throw DataError("write failed for " + path.string());
}

Model load_model(const std::filesystem::path& path) {
  Reader r{std::ifstream(path, std::ios::binary), path};
  if (!r.in) throw DataError("cannot open " + path.string());

  char magic[4];
  r.read(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) {
    throw DataError(path.string() + ": not a model file (bad magic)");
  }
  const std::uint32_t version = r.u32();
  if (version != kVersion) {
    throw DataError(path.string() + ": unsupported model version " + std::to_string(version));
  }

  Model m;
  m.hyperparams.dimension = r.u32();
  m.hyperparams.epochs = r.u32();
  m.hyperparams.batch_size = r.u32();
  m.hyperparams.checkpoint_every = r.u32();
  m.checkpoint_epoch = r.u32();
  const bool has_alpha = r.u8() != 0;
  const double alpha = r.f64();
  if (has_alpha) m.alpha = alpha;
  m.hyperparams.learning_rate = r.f64();
  m.hyperparams.l2 = r.f64();
  m.hyperparams.seed = r.u64();
  m.bias = r.f64();
  m.weights.resize(m.hyperparams.dimension);
  for (double& w : m.weights) w = r.f64();

  r.in.peek();
  if (!r.in.eof()) throw DataError(path.string() + ": corrupt model file (trailing bytes)");
  return m;
}

}  // namespace reflect
