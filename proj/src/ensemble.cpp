// SPDX-License-Identifier: Apache-2.0

#include "reflect/ensemble.hpp"

#include <string>

#include "reflect/errors.hpp"

namespace reflect {

std::string_view to_string(Strategy s) {
  return s == Strategy::StrictConsensus ? "sc" : "mv";
}

std::optional<Strategy> strategy_from_string(std::string_view s) {
  if (s == "sc") return Strategy::StrictConsensus;
  if (s == "mv") return Strategy::MajorityVote;
  return std::nullopt;
}

ModelSet model_set_from_finals(std::vector<Model> models) {
  ModelSet set;
  set.reserve(models.size());
  for (Model& m : models) set.push_back(SubModel{{std::move(m)}});
  return set;
}

ConsensusConfig final_members(const ModelSet& models, std::vector<std::size_t> model_indices,
                              Strategy strategy) {
  ConsensusConfig config;
  config.strategy = strategy;
  config.members.reserve(model_indices.size());
  for (std::size_t idx : model_indices) {
    if (idx >= models.size()) {
      throw DataError("consensus: model index " + std::to_string(idx) + " out of range");
    }
    config.members.push_back({idx, models[idx].final_index()});
  }
  validate_consensus(models, config);
  return config;
}

void validate_consensus(const ModelSet& models, const ConsensusConfig& config) {
  if (config.members.empty()) throw DataError("consensus: empty member set");
  std::size_t prev = 0;
  bool first = true;
  for (const ConsensusMember& m : config.members) {
    if (m.model >= models.size()) {
      throw DataError("consensus: model index " + std::to_string(m.model) + " out of range");
    }
    if (m.checkpoint >= models[m.model].checkpoints.size()) {
      throw DataError("consensus: checkpoint index " + std::to_string(m.checkpoint) +
                      " out of range for model " + std::to_string(m.model));
    }
    if (!first && m.model <= prev) {
      throw DataError("consensus: members must be sorted by model index, one per model");
    }
    prev = m.model;
    first = false;
  }
}

namespace {

const Model& member_model(const ModelSet& models, const ConsensusMember& m) {
  return models[m.model].checkpoints[m.checkpoint];
}

std::uint32_t common_dimension(const ModelSet& models, const ConsensusConfig& config) {
  const std::uint32_t dim = member_model(models, config.members.front()).dimension();
  for (const ConsensusMember& m : config.members) {
    if (member_model(models, m).dimension() != dim) {
      throw DataError("consensus: member models disagree on feature dimension");
    }
  }
  return dim;
}

int fuse_votes(std::size_t zeros, std::size_t total, Strategy strategy) {
  if (strategy == Strategy::StrictConsensus) {
    return zeros == total ? 0 : 1;
  }
  // Majority vote; exact tie retains.
  return 2 * zeros > total ? 0 : 1;
}

}  // namespace

int consensus_predict(const ModelSet& models, const ConsensusConfig& config,
                      const FeedbackSample& sample) {
  validate_consensus(models, config);
  const std::uint32_t dim = common_dimension(models, config);
  const FeatureVector features = featurize(sample, dim);
  std::size_t zeros = 0;
  for (const ConsensusMember& m : config.members) {
    zeros += predict_features(member_model(models, m), features).label == 0;
  }
  return fuse_votes(zeros, config.members.size(), config.strategy);
}

double pie_value(double ir, double fpr) {
  if (fpr > 0.0) return ir / fpr;
  return ir > 0.0 ? kPieInfinity : 0.0;
}

Metrics Metrics::from_counts(std::size_t tp, std::size_t fp, std::size_t fn, std::size_t tn) {
  if (tp + fn == 0) throw DataError("metrics: no gold low-quality samples; IR undefined");
  if (fp + tn == 0) throw DataError("metrics: no gold high-quality samples; FPR undefined");
  Metrics m;
  m.tp = tp;
  m.fp = fp;
  m.fn = fn;
  m.tn = tn;
  m.ir = static_cast<double>(tp) / static_cast<double>(tp + fn);
  m.fpr = static_cast<double>(fp) / static_cast<double>(fp + tn);
  m.pie = pie_value(m.ir, m.fpr);
  return m;
}

Metrics compute_metrics(std::span<const int> predictions, std::span<const int> gold) {
  if (predictions.size() != gold.size()) {
    throw DataError("metrics: " + std::to_string(predictions.size()) + " predictions vs " +
                    std::to_string(gold.size()) + " gold labels");
  }
  if (predictions.empty()) throw DataError("metrics: empty input");

  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const int p = predictions[i];
    const int g = gold[i];
    if ((p != 0 && p != 1) || (g != 0 && g != 1)) {
      throw DataError("metrics: labels must be 0 or 1");
    }
    if (p == 0) {
      (g == 0 ? tp : fp) += 1;
    } else {
      (g == 0 ? fn : tn) += 1;
    }
  }
  return Metrics::from_counts(tp, fp, fn, tn);
}

Metrics evaluate(const ModelSet& models, const ConsensusConfig& config, const Corpus& corpus) {
  validate_consensus(models, config);
  const std::uint32_t dim = common_dimension(models, config);

  std::vector<int> predictions;
  std::vector<int> gold;
  predictions.reserve(corpus.size());
  gold.reserve(corpus.size());
  for (const FeedbackSample& s : corpus) {
    if (!s.gold) throw DataError("evaluate: sample id '" + s.id + "' has no gold label");
    const FeatureVector features = featurize(s, dim);
    std::size_t zeros = 0;
    for (const ConsensusMember& m : config.members) {
      zeros += predict_features(member_model(models, m), features).label == 0;
    }
    predictions.push_back(fuse_votes(zeros, config.members.size(), config.strategy));
    gold.push_back(*s.gold);
  }
  return compute_metrics(predictions, gold);
}

Metrics evaluate_model(const Model& model, const Corpus& corpus) {
  ModelSet set;
  set.push_back(SubModel{{model}});
  ConsensusConfig config;
  config.members = {{0, 0}};
  config.strategy = Strategy::StrictConsensus;
  return evaluate(set, config, corpus);
}

}  // namespace reflect
