// SPDX-License-Identifier: Apache-2.0
//
// Consensus prediction over sub-model subsets and the IR/FPR/PIE metrics.
// Label convention throughout: 0 = intercept (low quality), 1 = retain.

#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "reflect/classifier.hpp"
#include "reflect/corpus.hpp"

namespace reflect {

enum class Strategy { StrictConsensus, MajorityVote };

std::string_view to_string(Strategy s);
std::optional<Strategy> strategy_from_string(std::string_view s);

// One trained sub-model: its checkpoints in epoch order, final last.
struct SubModel {
  std::vector<Model> checkpoints;

  const Model& final_model() const { return checkpoints.back(); }
  std::size_t final_index() const { return checkpoints.size() - 1; }
};

using ModelSet = std::vector<SubModel>;

ModelSet model_set_from_finals(std::vector<Model> models);

struct ConsensusMember {
  std::size_t model = 0;       // index into the ModelSet
  std::size_t checkpoint = 0;  // index into that sub-model's checkpoints

  auto operator<=>(const ConsensusMember&) const = default;
};

// The "data cleaner": a chosen sub-model subset (one checkpoint each) and
// a fusion strategy. Members must be sorted by model index, one per model.
struct ConsensusConfig {
  std::vector<ConsensusMember> members;
  Strategy strategy = Strategy::StrictConsensus;

  bool operator==(const ConsensusConfig&) const = default;
};

// Members = final checkpoints of the given sub-models.
ConsensusConfig final_members(const ModelSet& models, std::vector<std::size_t> model_indices,
                              Strategy strategy);

void validate_consensus(const ModelSet& models, const ConsensusConfig& config);

// Confusion counts with the intercept-oriented derived rates:
//   IR  = tp / (tp + fn)   recall on the low-quality class
//   FPR = fp / (fp + tn)   fraction of high-quality comments intercepted
//   PIE = IR / FPR, +infinity when FPR = 0 and IR > 0, 0 when both are 0.
struct Metrics {
  std::size_t tp = 0;  // intercepted, gold low-quality
  std::size_t fp = 0;  // intercepted, gold high-quality
  std::size_t fn = 0;  // retained, gold low-quality
  std::size_t tn = 0;  // retained, gold high-quality
  double ir = 0.0;
  double fpr = 0.0;
  double pie = 0.0;

  static Metrics from_counts(std::size_t tp, std::size_t fp, std::size_t fn, std::size_t tn);
};

inline constexpr double kPieInfinity = std::numeric_limits<double>::infinity();

// PIE from the raw rates; shared by Metrics and report arithmetic.
double pie_value(double ir, double fpr);

// SC intercepts only on unanimous 0 votes; MV takes the strictly more
// frequent vote with exact ties resolving to retain (1).
int consensus_predict(const ModelSet& models, const ConsensusConfig& config,
                      const FeedbackSample& sample);

// Counts per the label-0-means-intercept convention. Errors when the two
// spans differ in length, are empty, or gold lacks one of the classes
// (IR or FPR would be undefined).
Metrics compute_metrics(std::span<const int> predictions, std::span<const int> gold);

// consensus_predict over every sample of a gold-labeled corpus.
Metrics evaluate(const ModelSet& models, const ConsensusConfig& config, const Corpus& corpus);

// Single-model convenience: singleton SC (identical to MV for one member).
Metrics evaluate_model(const Model& model, const Corpus& corpus);

}  // namespace reflect
