// SPDX-License-Identifier: Apache-2.0

#include "reflect/corpus.hpp"

#include <algorithm>
#include <array>
#include <unordered_set>

#include "reflect/errors.hpp"
#include "reflect/rng.hpp"

namespace reflect {

std::string_view to_string(Feedback f) {
  switch (f) {
    case Feedback::Accept: return "accept";
    case Feedback::Reject: return "reject";
    case Feedback::Ignore: return "ignore";
  }
  return "?";
}

std::optional<Feedback> feedback_from_string(std::string_view s) {
  if (s == "accept") return Feedback::Accept;
  if (s == "reject") return Feedback::Reject;
  if (s == "ignore") return Feedback::Ignore;
  return std::nullopt;
}

std::string_view to_string(CorpusRole role) {
  switch (role) {
    case CorpusRole::Raw: return "raw";
    case CorpusRole::AnchorValidation: return "anchor_validation";
    case CorpusRole::Test: return "test";
    case CorpusRole::Training: return "training";
  }
  return "?";
}

std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::DopedPerturbation: return "doped_perturbation";
    case Provenance::RelabeledClean: return "relabeled_clean";
    case Provenance::NaiveMapping: return "naive_mapping";
  }
  return "?";
}

namespace {

bool role_requires_gold(CorpusRole role) {
  return role == CorpusRole::AnchorValidation || role == CorpusRole::Test;
}

void validate_sample(const FeedbackSample& s, std::size_t position) {
  const std::string where = "sample " + std::to_string(position) + " (id '" + s.id + "')";
  if (s.id.empty()) throw DataError("sample " + std::to_string(position) + ": empty id");
  if (s.diff.empty()) throw DataError(where + ": empty diff");
  if (s.comment.empty()) throw DataError(where + ": empty comment");
  if (s.gold && *s.gold != 0 && *s.gold != 1) {
    throw DataError(where + ": gold must be 0 or 1, got " + std::to_string(*s.gold));
  }
}

}  // namespace

Corpus::Corpus(std::vector<FeedbackSample> samples, CorpusRole role)
    : samples_(std::move(samples)), role_(role) {
  std::unordered_set<std::string_view> ids;
  ids.reserve(samples_.size());
  for (std::size_t i = 0; i < samples_.size(); ++i) {
    const FeedbackSample& s = samples_[i];
    validate_sample(s, i);
    if (!ids.insert(s.id).second) {
      throw DataError("duplicate sample id '" + s.id + "'");
    }
    if (role_requires_gold(role_) && !s.gold) {
      throw DataError("corpus role " + std::string(to_string(role_)) +
                      " requires gold on every sample; missing on id '" + s.id + "'");
    }
  }
}

BinaryDataset::BinaryDataset(std::shared_ptr<const Corpus> source,
                             std::vector<LabeledItem> items, Provenance provenance,
                             std::optional<double> alpha)
    : source_(std::move(source)),
      items_(std::move(items)),
      provenance_(provenance),
      alpha_(alpha) {
  if (!source_) throw DataError("dataset has no source corpus");
  for (const LabeledItem& item : items_) {
    if (item.sample_index >= source_->size()) {
      throw DataError("dataset item index " + std::to_string(item.sample_index) +
                      " out of range for corpus of size " + std::to_string(source_->size()));
    }
    if (item.label != 0 && item.label != 1) {
      throw DataError("dataset label must be 0 or 1, got " + std::to_string(item.label));
    }
  }
}

std::pair<std::size_t, std::size_t> BinaryDataset::label_counts() const {
  std::size_t zeros = 0;
  for (const LabeledItem& item : items_) zeros += (item.label == 0);
  return {zeros, items_.size() - zeros};
}

Corpus stratified_sample(const Corpus& corpus, std::size_t per_class, std::uint64_t seed) {
  std::array<std::vector<std::size_t>, 3> pools;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    pools[static_cast<std::size_t>(corpus[i].feedback)].push_back(i);
  }
  for (std::size_t c = 0; c < 3; ++c) {
    if (pools[c].size() < per_class) {
      const Feedback f = static_cast<Feedback>(c);
      throw DataError("stratified_sample: class " + std::string(to_string(f)) + " has " +
                      std::to_string(pools[c].size()) + " samples, need " +
                      std::to_string(per_class) + " (shortfall " +
                      std::to_string(per_class - pools[c].size()) + ")");
    }
  }

  Rng rng(seed);
  std::vector<std::size_t> chosen;
  chosen.reserve(3 * per_class);
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t k : rng.sample_without_replacement(pools[c].size(), per_class)) {
      chosen.push_back(pools[c][k]);
    }
  }
  std::sort(chosen.begin(), chosen.end());

  std::vector<FeedbackSample> out;
  out.reserve(chosen.size());
  for (std::size_t i : chosen) out.push_back(corpus[i]);
  return Corpus(std::move(out), CorpusRole::Raw);
}

std::pair<Corpus, Corpus> split_gold(const Corpus& corpus, std::size_t n_val,
                                     std::size_t n_test, std::uint64_t seed) {
  if (n_val % 2 != 0 || n_test % 2 != 0) {
    throw DataError("split_gold: n_val and n_test must be even (got " +
                    std::to_string(n_val) + ", " + std::to_string(n_test) + ")");
  }
  std::vector<std::size_t> positives;
  std::vector<std::size_t> negatives;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& gold = corpus[i].gold;
    if (!gold) throw DataError("split_gold: sample id '" + corpus[i].id + "' has no gold label");
    (*gold == 1 ? positives : negatives).push_back(i);
  }
  const std::size_t need = (n_val + n_test) / 2;
  if (positives.size() < need) {
    throw DataError("split_gold: need " + std::to_string(need) + " gold-positive samples, have " +
                    std::to_string(positives.size()) + " (shortfall " +
                    std::to_string(need - positives.size()) + ")");
  }
  if (negatives.size() < need) {
    throw DataError("split_gold: need " + std::to_string(need) + " gold-negative samples, have " +
                    std::to_string(negatives.size()) + " (shortfall " +
                    std::to_string(need - negatives.size()) + ")");
  }

  Rng rng(seed);
  rng.shuffle(positives);
  rng.shuffle(negatives);

  auto take = [&](std::size_t pos_offset, std::size_t count_per_class, CorpusRole role) {
    std::vector<std::size_t> picked;
    picked.reserve(2 * count_per_class);
    for (std::size_t i = 0; i < count_per_class; ++i) picked.push_back(positives[pos_offset + i]);
    for (std::size_t i = 0; i < count_per_class; ++i) picked.push_back(negatives[pos_offset + i]);
    std::sort(picked.begin(), picked.end());
    std::vector<FeedbackSample> out;
    out.reserve(picked.size());
    for (std::size_t i : picked) out.push_back(corpus[i]);
    return Corpus(std::move(out), role);
  };

  Corpus val = take(0, n_val / 2, CorpusRole::AnchorValidation);
  Corpus test = take(n_val / 2, n_test / 2, CorpusRole::Test);
  return {std::move(val), std::move(test)};
}

}  // namespace reflect
