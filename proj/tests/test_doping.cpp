// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <memory>

#include "reflect/doping.hpp"
#include "reflect/errors.hpp"
#include "test_util.hpp"

using namespace reflect;

namespace {

struct Composition {
  std::size_t reject_negatives = 0;
  std::size_t accept_positives = 0;
  std::size_t ignore_positives = 0;
  std::size_t stray = 0;  // anything violating the label/feedback contract
};

Composition compose(const BinaryDataset& ds) {
  Composition c;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const Feedback f = ds.sample(i).feedback;
    if (ds.label(i) == 0) {
      f == Feedback::Reject ? ++c.reject_negatives : ++c.stray;
    } else {
      if (f == Feedback::Accept) {
        ++c.accept_positives;
      } else if (f == Feedback::Ignore) {
        ++c.ignore_positives;
      } else {
        ++c.stray;
      }
    }
  }
  return c;
}

}  // namespace

TEST_CASE("alpha=0.2 yields 100 reject negatives, 80 accept and 20 ignore positives") {
  auto raw = std::make_shared<Corpus>(testutil::uniform_corpus(100));
  DopingSchedule schedule;
  schedule.ratios = {0.2};
  schedule.n_negatives_per_set = 100;
  const auto datasets = build_perturbed_datasets(raw, schedule);
  REQUIRE(datasets.size() == 1);
  const Composition c = compose(datasets[0]);
  CHECK(c.reject_negatives == 100);
  CHECK(c.accept_positives == 80);
  CHECK(c.ignore_positives == 20);
  CHECK(c.stray == 0);
  CHECK(datasets[0].alpha() == 0.2);
  CHECK(datasets[0].provenance() == Provenance::DopedPerturbation);
}

TEST_CASE("alpha=0 positives are purely Accept") {
  auto raw = std::make_shared<Corpus>(testutil::uniform_corpus(60));
  DopingSchedule schedule;
  schedule.ratios = {0.0};
  schedule.n_negatives_per_set = 60;
  const Composition c = compose(build_perturbed_datasets(raw, schedule)[0]);
  CHECK(c.accept_positives == 60);
  CHECK(c.ignore_positives == 0);
}

TEST_CASE("default schedule steps ignore counts by 10 per 100 positives") {
  auto raw = std::make_shared<Corpus>(testutil::uniform_corpus(100));
  DopingSchedule schedule;
  schedule.n_negatives_per_set = 100;
  const auto datasets = build_perturbed_datasets(raw, schedule);
  REQUIRE(datasets.size() == 6);
  const std::size_t expected[6] = {0, 10, 20, 30, 40, 50};
  for (std::size_t k = 0; k < 6; ++k) {
    const Composition c = compose(datasets[k]);
    CHECK(c.ignore_positives == expected[k]);
    CHECK(c.reject_negatives == 100);
    CHECK(c.accept_positives + c.ignore_positives == 100);
  }
}

TEST_CASE("every dataset is exactly balanced and deterministic") {
  auto raw = std::make_shared<Corpus>(testutil::uniform_corpus(80));
  DopingSchedule schedule;
  schedule.ratios = {0.0, 0.25, 0.45};
  schedule.n_negatives_per_set = 40;
  schedule.seed = 9;

  const auto a = build_perturbed_datasets(raw, schedule);
  const auto b = build_perturbed_datasets(raw, schedule);
  REQUIRE(a.size() == b.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    auto [zeros, ones] = a[k].label_counts();
    CHECK(zeros == 40);
    CHECK(ones == 40);
    CHECK(a[k].items() == b[k].items());
    const Composition c = compose(a[k]);
    CHECK(c.ignore_positives == ignore_count_for(schedule.ratios[k], 40));
    CHECK(c.stray == 0);
  }

  DopingSchedule reseeded = schedule;
  reseeded.seed = 10;
  const auto other = build_perturbed_datasets(raw, reseeded);
  bool any_difference = false;
  for (std::size_t k = 0; k < a.size(); ++k) any_difference |= !(other[k].items() == a[k].items());
  CHECK(any_difference);
}

TEST_CASE("ignore rounding is round-half-up") {
  CHECK(ignore_count_for(0.25, 10) == 3);  // 2.5 rounds up
  CHECK(ignore_count_for(0.5, 100) == 50);
  CHECK(ignore_count_for(0.0, 100) == 0);
  CHECK(ignore_count_for(0.449, 10) == 4);
}

TEST_CASE("insufficient pools name the class, alpha, and shortfall") {
  auto raw = std::make_shared<Corpus>(testutil::uniform_corpus(30));
  DopingSchedule schedule;
  schedule.ratios = {0.5};
  schedule.n_negatives_per_set = 100;
  CHECK_THROWS_WITH_AS(build_perturbed_datasets(raw, schedule), doctest::Contains("reject"),
                       DataError);
  CHECK_THROWS_WITH_AS(build_perturbed_datasets(raw, schedule), doctest::Contains("shortfall 70"),
                       DataError);

  // Ignore pool too small for a high ratio: error names the ratio.
  std::vector<FeedbackSample> uneven;
  for (int i = 0; i < 50; ++i) {
    uneven.push_back(testutil::make_sample("a" + std::to_string(i), Feedback::Accept));
    uneven.push_back(testutil::make_sample("r" + std::to_string(i), Feedback::Reject));
  }
  for (int i = 0; i < 10; ++i) {
    uneven.push_back(testutil::make_sample("g" + std::to_string(i), Feedback::Ignore));
  }
  auto uneven_raw = std::make_shared<Corpus>(std::move(uneven), CorpusRole::Raw);
  DopingSchedule high;
  high.ratios = {0.9};
  high.n_negatives_per_set = 50;
  CHECK_THROWS_WITH_AS(build_perturbed_datasets(uneven_raw, high), doctest::Contains("ignore"),
                       DataError);
  CHECK_THROWS_WITH_AS(build_perturbed_datasets(uneven_raw, high), doctest::Contains("0.9"),
                       DataError);
}

TEST_CASE("schedule validation") {
  DopingSchedule bad;
  bad.ratios = {0.2, 0.2};
  CHECK_THROWS_AS(bad.validate(), DataError);
  bad.ratios = {0.5, 1.0};
  CHECK_THROWS_AS(bad.validate(), DataError);
  bad.ratios = {};
  CHECK_THROWS_AS(bad.validate(), DataError);
}
