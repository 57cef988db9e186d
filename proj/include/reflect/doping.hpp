// SPDX-License-Identifier: Apache-2.0
//
// Noise-doped training sets. Each dataset k pairs n Reject negatives with
// n positives mixed from Accept and Ignore feedback at ratio alpha_k; the
// rising Ignore share perturbs each sub-model's decision boundary.

#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "reflect/corpus.hpp"

namespace reflect {

struct DopingSchedule {
  // Strictly increasing, each in [0,1).
  std::vector<double> ratios{0.0, 0.1, 0.2, 0.3, 0.4, 0.5};
  // 0 means auto: min(available Reject samples, 20000).
  std::size_t n_negatives_per_set = 0;
  std::uint64_t seed = 0;

  void validate() const;
};

// One balanced BinaryDataset per ratio. Negatives are Reject samples;
// positives are (n - round(alpha*n)) Accept plus round(alpha*n) Ignore
// samples, rounding half up. Sampling is uniform without replacement
// within a dataset and independent across datasets; items keep source
// order (negatives first). Deterministic given (corpus, schedule).
std::vector<BinaryDataset> build_perturbed_datasets(std::shared_ptr<const Corpus> raw,
                                                    const DopingSchedule& schedule);

// Number of Ignore positives in a dataset of n positives at ratio alpha.
std::size_t ignore_count_for(double alpha, std::size_t n);

}  // namespace reflect
