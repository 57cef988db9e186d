// SPDX-License-Identifier: Apache-2.0
//
// Sample and corpus data model plus the on-disk JSONL format, stratified
// sampling, and gold anchor/test splitting.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace reflect {

enum class Feedback { Accept, Reject, Ignore };

std::string_view to_string(Feedback f);
std::optional<Feedback> feedback_from_string(std::string_view s);

enum class CorpusRole { Raw, AnchorValidation, Test, Training };

std::string_view to_string(CorpusRole role);

// One (diff, comment) pair with its user feedback tag and, when expert
// annotation exists, a gold label: 1 = high quality (retain),
// 0 = low quality (intercept).
struct FeedbackSample {
  std::string id;
  std::string diff;
  std::string comment;
  Feedback feedback = Feedback::Ignore;
  std::optional<int> gold;

  bool operator==(const FeedbackSample&) const = default;
};

// Ordered, immutable sample collection. The constructor enforces id
// uniqueness, non-empty text fields, binary gold values, and (for
// AnchorValidation/Test roles) gold presence on every sample. Immutability
// makes corpora safe to share across threads.
class Corpus {
 public:
  Corpus() = default;
  Corpus(std::vector<FeedbackSample> samples, CorpusRole role);

  const std::vector<FeedbackSample>& samples() const { return samples_; }
  CorpusRole role() const { return role_; }
  std::size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }
  const FeedbackSample& operator[](std::size_t i) const { return samples_[i]; }

  auto begin() const { return samples_.begin(); }
  auto end() const { return samples_.end(); }

  bool operator==(const Corpus&) const = default;

 private:
  std::vector<FeedbackSample> samples_;
  CorpusRole role_ = CorpusRole::Raw;
};

enum class Provenance { DopedPerturbation, RelabeledClean, NaiveMapping };

std::string_view to_string(Provenance p);

struct LabeledItem {
  std::size_t sample_index;  // into the source corpus
  int label;                 // 0 = intercept, 1 = retain

  bool operator==(const LabeledItem&) const = default;
};

// A binary training view over a source corpus: (sample reference, label)
// pairs plus provenance. Holds the source alive; items never copy text.
class BinaryDataset {
 public:
  BinaryDataset(std::shared_ptr<const Corpus> source, std::vector<LabeledItem> items,
                Provenance provenance, std::optional<double> alpha = std::nullopt);

  const Corpus& source() const { return *source_; }
  std::shared_ptr<const Corpus> source_ptr() const { return source_; }
  const std::vector<LabeledItem>& items() const { return items_; }
  Provenance provenance() const { return provenance_; }
  std::optional<double> alpha() const { return alpha_; }
  std::size_t size() const { return items_.size(); }

  const FeedbackSample& sample(std::size_t item) const {
    return (*source_)[items_[item].sample_index];
  }
  int label(std::size_t item) const { return items_[item].label; }

  // (count of label 0, count of label 1)
  std::pair<std::size_t, std::size_t> label_counts() const;

 private:
  std::shared_ptr<const Corpus> source_;
  std::vector<LabeledItem> items_;
  Provenance provenance_;
  std::optional<double> alpha_;
};

// --- on-disk format -------------------------------------------------------
//
// One JSON object per line, UTF-8:
//   {"id":"...","diff":"...","comment":"...","feedback":"accept","gold":1}
// `gold` is optional; unknown keys are rejected. Labeled dataset files add
// a required `label` key (0 or 1). Writers emit keys in exactly this order,
// so save/load round-trips are byte-identical modulo a trailing newline.

Corpus load_corpus(const std::filesystem::path& path, CorpusRole role);
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);

BinaryDataset load_labeled_dataset(const std::filesystem::path& path,
                                   Provenance provenance = Provenance::RelabeledClean,
                                   std::optional<double> alpha = std::nullopt);
void save_labeled_dataset(const BinaryDataset& dataset, const std::filesystem::path& path);

// --- sampling -------------------------------------------------------------

// Uniform, without replacement, per feedback class; output preserves the
// source order of the selected samples. Errors name the short class and
// its shortfall.
Corpus stratified_sample(const Corpus& corpus, std::size_t per_class, std::uint64_t seed);

// Splits a fully gold-labeled corpus into disjoint AnchorValidation and
// Test corpora, each balanced 1:1 in gold labels. n_val and n_test must be
// even. Deterministic given seed.
std::pair<Corpus, Corpus> split_gold(const Corpus& corpus, std::size_t n_val,
                                     std::size_t n_test, std::uint64_t seed);

}  // namespace reflect
