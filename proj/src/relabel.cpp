// SPDX-License-Identifier: Apache-2.0

#include "reflect/relabel.hpp"

#include <algorithm>
#include <string>

#include "reflect/errors.hpp"
#include "reflect/rng.hpp"

namespace reflect {

std::size_t TransitionMatrix::row_total(Feedback f) const {
  const auto& row = counts[static_cast<std::size_t>(f)];
  return row[0] + row[1];
}

std::size_t TransitionMatrix::total() const {
  std::size_t sum = 0;
  for (const auto& row : counts) sum += row[0] + row[1];
  return sum;
}

double TransitionMatrix::percentage(Feedback f, int label) const {
  const std::size_t total = row_total(f);
  if (total == 0) return 0.0;
  return 100.0 * static_cast<double>(counts[static_cast<std::size_t>(f)][label]) /
         static_cast<double>(total);
}

BinaryDataset relabel_corpus(const ModelSet& models, const ConsensusConfig& cleaner,
                             std::shared_ptr<const Corpus> raw) {
  if (!raw) throw DataError("relabel: null corpus");
  if (raw->empty()) throw DataError("relabel: empty corpus");
  validate_consensus(models, cleaner);

  std::vector<LabeledItem> items;
  items.reserve(raw->size());
  for (std::size_t i = 0; i < raw->size(); ++i) {
    items.push_back({i, consensus_predict(models, cleaner, (*raw)[i])});
  }
  return BinaryDataset(std::move(raw), std::move(items), Provenance::RelabeledClean);
}

TransitionMatrix transition_matrix(const BinaryDataset& relabeled) {
  TransitionMatrix m;
  for (std::size_t i = 0; i < relabeled.size(); ++i) {
    const Feedback origin = relabeled.sample(i).feedback;
    m.counts[static_cast<std::size_t>(origin)][relabeled.label(i)] += 1;
  }
  return m;
}

BinaryDataset build_final_training_set(const BinaryDataset& relabeled, std::uint64_t seed) {
  auto [zeros, ones] = relabeled.label_counts();
  if (zeros == 0 || ones == 0) {
    throw DataError("final training set: relabeled corpus has a single label (" +
                    std::to_string(zeros) + " negatives, " + std::to_string(ones) +
                    " positives); cleaner degenerate");
  }

  const int majority = zeros > ones ? 0 : 1;
  const std::size_t keep = std::min(zeros, ones);

  std::vector<std::size_t> majority_items;
  for (std::size_t i = 0; i < relabeled.size(); ++i) {
    if (relabeled.label(i) == majority) majority_items.push_back(i);
  }

  Rng rng(derive_seed(seed, "balance"));
  std::vector<char> selected(relabeled.size(), 0);
  for (std::size_t j : rng.sample_without_replacement(majority_items.size(), keep)) {
    selected[majority_items[j]] = 1;
  }

  std::vector<LabeledItem> items;
  items.reserve(2 * keep);
  for (std::size_t i = 0; i < relabeled.size(); ++i) {
    if (relabeled.label(i) != majority || selected[i]) {
      items.push_back(relabeled.items()[i]);
    }
  }
  return BinaryDataset(relabeled.source_ptr(), std::move(items), Provenance::RelabeledClean);
}

std::string_view to_string(IgnorePolicy p) {
  switch (p) {
    case IgnorePolicy::Exclude: return "exclude";
    case IgnorePolicy::AsPositive: return "as_positive";
    case IgnorePolicy::AsNegative: return "as_negative";
  }
  return "?";
}

std::optional<IgnorePolicy> ignore_policy_from_string(std::string_view s) {
  if (s == "exclude") return IgnorePolicy::Exclude;
  if (s == "as_positive") return IgnorePolicy::AsPositive;
  if (s == "as_negative") return IgnorePolicy::AsNegative;
  return std::nullopt;
}

BinaryDataset naive_mapping(std::shared_ptr<const Corpus> raw, IgnorePolicy policy) {
  if (!raw) throw DataError("naive mapping: null corpus");
  if (raw->empty()) throw DataError("naive mapping: empty corpus");

  std::vector<LabeledItem> items;
  items.reserve(raw->size());
  for (std::size_t i = 0; i < raw->size(); ++i) {
    switch ((*raw)[i].feedback) {
      case Feedback::Accept:
        items.push_back({i, 1});
        break;
      case Feedback::Reject:
        items.push_back({i, 0});
        break;
      case Feedback::Ignore:
        if (policy == IgnorePolicy::AsPositive) items.push_back({i, 1});
        if (policy == IgnorePolicy::AsNegative) items.push_back({i, 0});
        break;
    }
  }
  if (items.empty()) {
    throw DataError("naive mapping: no samples left after Ignore exclusion");
  }
  return BinaryDataset(std::move(raw), std::move(items), Provenance::NaiveMapping);
}

double label_error_vs_gold(const BinaryDataset& dataset) {
  if (dataset.size() == 0) throw DataError("label error: empty dataset");
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto& gold = dataset.sample(i).gold;
    if (!gold) {
      throw DataError("label error: sample id '" + dataset.sample(i).id + "' has no gold label");
    }
    wrong += dataset.label(i) != *gold;
  }
  return static_cast<double>(wrong) / static_cast<double>(dataset.size());
}

}  // namespace reflect
