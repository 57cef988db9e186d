// SPDX-License-Identifier: Apache-2.0
//
// Applies the selected cleaner to the full raw corpus, reports label
// transitions, and builds the balanced training sets (cleaned and naive).

#pragma once

#include <array>
#include <cstdint>
#include <memory>

#include "reflect/corpus.hpp"
#include "reflect/ensemble.hpp"

namespace reflect {

// Counts of samples moving from original feedback (rows: Accept, Reject,
// Ignore) to relabeled binary labels (columns: 0, 1).
struct TransitionMatrix {
  std::array<std::array<std::size_t, 2>, 3> counts{};

  std::size_t row_total(Feedback f) const;
  std::size_t total() const;
  // Row-normalized, in percent. Empty rows report 0.
  double percentage(Feedback f, int label) const;
};

// Consensus label for every raw sample, in corpus order. Original feedback
// stays reachable through the sample references for transition reporting.
BinaryDataset relabel_corpus(const ModelSet& models, const ConsensusConfig& cleaner,
                             std::shared_ptr<const Corpus> raw);

TransitionMatrix transition_matrix(const BinaryDataset& relabeled);

// Uniformly undersamples the majority label to an exact 1:1 balance,
// preserving item order. Errors when the cleaner was degenerate (single
// label).
BinaryDataset build_final_training_set(const BinaryDataset& relabeled, std::uint64_t seed);

enum class IgnorePolicy { Exclude, AsPositive, AsNegative };

std::string_view to_string(IgnorePolicy p);
std::optional<IgnorePolicy> ignore_policy_from_string(std::string_view s);

// Accept -> 1, Reject -> 0, Ignore per policy; the naive baseline's data.
BinaryDataset naive_mapping(std::shared_ptr<const Corpus> raw, IgnorePolicy policy);

// Fraction of items whose assigned label disagrees with the sample's gold
// label. Requires gold on every referenced sample (synthetic corpora).
double label_error_vs_gold(const BinaryDataset& dataset);

}  // namespace reflect
