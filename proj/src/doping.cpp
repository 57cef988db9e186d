// SPDX-License-Identifier: Apache-2.0

#include "reflect/doping.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "reflect/errors.hpp"
#include "reflect/rng.hpp"

namespace reflect {

namespace {
constexpr std::size_t kDefaultMaxNegatives = 20000;
}

void DopingSchedule::validate() const {
  if (ratios.empty()) throw DataError("doping: schedule has no ratios");
  for (std::size_t i = 0; i < ratios.size(); ++i) {
    if (!(ratios[i] >= 0.0 && ratios[i] < 1.0)) {
      throw DataError("doping: ratio " + std::to_string(ratios[i]) + " outside [0,1)");
    }
    if (i > 0 && !(ratios[i] > ratios[i - 1])) {
      throw DataError("doping: ratios must be strictly increasing");
    }
  }
}

std::size_t ignore_count_for(double alpha, std::size_t n) {
  // Round to nearest, ties up.
  return static_cast<std::size_t>(std::floor(alpha * static_cast<double>(n) + 0.5));
}

std::vector<BinaryDataset> build_perturbed_datasets(std::shared_ptr<const Corpus> raw,
                                                    const DopingSchedule& schedule) {
  if (!raw) throw DataError("doping: null corpus");
  schedule.validate();

  std::array<std::vector<std::size_t>, 3> pools;
  for (std::size_t i = 0; i < raw->size(); ++i) {
    pools[static_cast<std::size_t>((*raw)[i].feedback)].push_back(i);
  }
  const auto& accepts = pools[static_cast<std::size_t>(Feedback::Accept)];
  const auto& rejects = pools[static_cast<std::size_t>(Feedback::Reject)];
  const auto& ignores = pools[static_cast<std::size_t>(Feedback::Ignore)];

  const std::size_t n = schedule.n_negatives_per_set > 0
                            ? schedule.n_negatives_per_set
                            : std::min(rejects.size(), kDefaultMaxNegatives);
  if (n == 0) throw DataError("doping: corpus has no Reject samples");

  auto require = [&](const std::vector<std::size_t>& pool, std::size_t want, Feedback f,
                     double alpha) {
    if (pool.size() < want) {
      throw DataError("doping: class " + std::string(to_string(f)) + " has " +
                      std::to_string(pool.size()) + " samples, need " + std::to_string(want) +
                      " for alpha=" + std::to_string(alpha) + " (shortfall " +
                      std::to_string(want - pool.size()) + ")");
    }
  };

  std::vector<BinaryDataset> datasets;
  datasets.reserve(schedule.ratios.size());
  for (std::size_t k = 0; k < schedule.ratios.size(); ++k) {
    const double alpha = schedule.ratios[k];
    const std::size_t n_ignore = ignore_count_for(alpha, n);
    const std::size_t n_accept = n - n_ignore;
    require(rejects, n, Feedback::Reject, alpha);
    require(accepts, n_accept, Feedback::Accept, alpha);
    require(ignores, n_ignore, Feedback::Ignore, alpha);

    Rng rng(derive_seed(schedule.seed, "dope", k));
    auto pick = [&](const std::vector<std::size_t>& pool, std::size_t count) {
      std::vector<std::size_t> chosen;
      chosen.reserve(count);
      for (std::size_t j : rng.sample_without_replacement(pool.size(), count)) {
        chosen.push_back(pool[j]);
      }
      std::sort(chosen.begin(), chosen.end());
      return chosen;
    };

    std::vector<LabeledItem> items;
    items.reserve(2 * n);
    for (std::size_t idx : pick(rejects, n)) items.push_back({idx, 0});
    for (std::size_t idx : pick(accepts, n_accept)) items.push_back({idx, 1});
    for (std::size_t idx : pick(ignores, n_ignore)) items.push_back({idx, 1});

    datasets.emplace_back(raw, std::move(items), Provenance::DopedPerturbation, alpha);
  }
  return datasets;
}

}  // namespace reflect
