// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <memory>

#include "reflect/classifier.hpp"
#include "reflect/errors.hpp"
#include "reflect/rng.hpp"
#include "reflect/synth.hpp"
#include "test_util.hpp"

using namespace reflect;
using testutil::make_sample;
using testutil::TempDir;

namespace {

// Two linearly separable samples with disjoint vocabulary.
std::shared_ptr<Corpus> two_point_corpus() {
  auto good = make_sample("pos", Feedback::Accept, 1, "alpha beta gamma", "solid useful fix");
  auto bad = make_sample("neg", Feedback::Reject, 0, "delta epsilon zeta", "wrong noisy trivia");
  return std::make_shared<Corpus>(std::vector<FeedbackSample>{good, bad}, CorpusRole::Raw);
}

BinaryDataset two_point_dataset() {
  auto corpus = two_point_corpus();
  return BinaryDataset(corpus, {{0, 1}, {1, 0}}, Provenance::NaiveMapping);
}

FeatureVector random_features(Rng& rng, std::uint32_t dimension, std::size_t nnz) {
  FeatureVector fv;
  fv.dimension = dimension;
  std::vector<char> used(dimension, 0);
  while (fv.entries.size() < nnz) {
    const auto idx = static_cast<std::uint32_t>(rng.below(dimension));
    if (!used[idx]) {
      used[idx] = 1;
      fv.entries.emplace_back(idx, rng.next_unit() + 0.1);
    }
  }
  std::sort(fv.entries.begin(), fv.entries.end());
  return fv;
}

}  // namespace

// ---------------------------------------------------------------------------
// featurize
// ---------------------------------------------------------------------------

TEST_CASE("featurize is deterministic and order-independent") {
  const auto a = make_sample("a", Feedback::Accept, 1, "Foo bar baz", "one two three");
  const auto b = make_sample("b", Feedback::Accept, 1, "Foo bar baz", "three one two");
  CHECK(featurize(a, 1u << 12).entries == featurize(a, 1u << 12).entries);
  // Bag-of-words: permuted comment tokens hash to the same vector.
  CHECK(featurize(a, 1u << 12).entries == featurize(b, 1u << 12).entries);
}

TEST_CASE("featurize output is L2-normalized") {
  const auto s = make_sample("a", Feedback::Accept, 1, "x y z x", "p q r");
  const FeatureVector fv = featurize(s, 1u << 10);
  double norm_sq = 0;
  for (const auto& [idx, v] : fv.entries) norm_sq += v * v;
  CHECK(std::abs(std::sqrt(norm_sq) - 1.0) < 1e-9);
}

TEST_CASE("field tags separate diff tokens from comment tokens") {
  const auto in_diff = make_sample("a", Feedback::Accept, 1, "signal filler", "filler filler");
  const auto in_comment = make_sample("b", Feedback::Accept, 1, "filler filler", "signal filler");
  CHECK_FALSE(featurize(in_diff, 1u << 14).entries == featurize(in_comment, 1u << 14).entries);
}

TEST_CASE("featurize splits on non-alphanumeric boundaries and lowercases") {
  const auto a = make_sample("a", Feedback::Accept, 1, "FOO-bar(baz)", "x");
  const auto b = make_sample("b", Feedback::Accept, 1, "foo bar baz", "x");
  CHECK(featurize(a, 1u << 12).entries == featurize(b, 1u << 12).entries);
}

TEST_CASE("featurize rejects non-power-of-two dimensions") {
  const auto s = make_sample("a", Feedback::Accept);
  CHECK_THROWS_AS(featurize(s, 100), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// gradient oracle
// ---------------------------------------------------------------------------

TEST_CASE("analytic gradient matches central finite differences") {
  const std::uint32_t dim = 64;
  Rng rng(2024);
  const double h = 1e-6;

  for (int probe = 0; probe < 25; ++probe) {
    std::vector<FeatureVector> batch;
    std::vector<int> labels;
    const std::size_t batch_size = 3 + rng.below(13);
    for (std::size_t i = 0; i < batch_size; ++i) {
      batch.push_back(random_features(rng, dim, 2 + rng.below(7)));
      labels.push_back(static_cast<int>(rng.below(2)));
    }
    std::vector<double> w(dim);
    for (double& x : w) x = (rng.next_unit() - 0.5) * 2.0;
    double bias = (rng.next_unit() - 0.5) * 2.0;
    const double l2 = rng.next_unit() * 0.1;

    std::vector<double> grad(dim);
    double grad_bias = 0;
    logistic_gradient(batch, labels, w, bias, l2, grad, grad_bias);

    double num_norm_sq = 0, diff_norm_sq = 0;
    for (std::uint32_t j = 0; j < dim; ++j) {
      std::vector<double> wp = w, wm = w;
      wp[j] += h;
      wm[j] -= h;
      const double fd = (logistic_loss(batch, labels, wp, bias, l2) -
                         logistic_loss(batch, labels, wm, bias, l2)) /
                        (2 * h);
      num_norm_sq += fd * fd;
      diff_norm_sq += (grad[j] - fd) * (grad[j] - fd);
    }
    const double fd_bias = (logistic_loss(batch, labels, w, bias + h, l2) -
                            logistic_loss(batch, labels, w, bias - h, l2)) /
                           (2 * h);
    num_norm_sq += fd_bias * fd_bias;
    diff_norm_sq += (grad_bias - fd_bias) * (grad_bias - fd_bias);

    CHECK(std::sqrt(diff_norm_sq) <= 1e-5 * std::max(std::sqrt(num_norm_sq), 1e-8));
  }
}

TEST_CASE("one SGD step equals the dense gradient step") {
  const std::uint32_t dim = 32;
  auto corpus = two_point_corpus();
  BinaryDataset dataset(corpus, {{0, 1}, {1, 0}}, Provenance::NaiveMapping);

  TrainConfig tc;
  tc.dimension = dim;
  tc.epochs = 1;
  tc.batch_size = 16;  // full batch
  tc.learning_rate = 0.3;
  tc.l2 = 0.01;
  tc.seed = 5;
  const Model stepped = train(dataset, tc).back();

  std::vector<FeatureVector> batch{featurize((*corpus)[0], dim), featurize((*corpus)[1], dim)};
  std::vector<int> labels{1, 0};
  std::vector<double> w(dim, 0.0), grad(dim);
  double grad_bias = 0;
  logistic_gradient(batch, labels, w, 0.0, tc.l2, grad, grad_bias);
  for (std::uint32_t j = 0; j < dim; ++j) {
    CHECK(stepped.weights[j] == doctest::Approx(-tc.learning_rate * grad[j]).epsilon(1e-12));
  }
  CHECK(stepped.bias == doctest::Approx(-tc.learning_rate * grad_bias).epsilon(1e-12));
}

// ---------------------------------------------------------------------------
// training behavior
// ---------------------------------------------------------------------------

TEST_CASE("separable two-point set trains to accuracy 1.0") {
  TrainConfig tc;
  tc.dimension = 1u << 10;
  tc.epochs = 200;
  tc.batch_size = 2;
  tc.learning_rate = 0.5;
  tc.checkpoint_every = 200;
  const BinaryDataset dataset = two_point_dataset();
  const Model final = train(dataset, tc).back();
  CHECK(predict(final, dataset.sample(0)).label == 1);
  CHECK(predict(final, dataset.sample(1)).label == 0);
}

TEST_CASE("full-batch descent is monotone on a convex objective") {
  const Corpus corpus = testutil::random_gold_corpus(60, 77);
  auto source = std::make_shared<Corpus>(corpus);
  std::vector<LabeledItem> items;
  for (std::size_t i = 0; i < source->size(); ++i) items.push_back({i, *(*source)[i].gold});
  const BinaryDataset dataset(source, items, Provenance::NaiveMapping);

  TrainConfig tc;
  tc.dimension = 1u << 10;
  tc.epochs = 12;
  tc.batch_size = 100;  // >= dataset size: full batch
  tc.learning_rate = 0.05;
  tc.l2 = 1e-4;
  tc.checkpoint_every = 1;
  const std::vector<Model> checkpoints = train(dataset, tc);
  REQUIRE(checkpoints.size() == 12);

  std::vector<FeatureVector> features;
  std::vector<int> labels;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    features.push_back(featurize(dataset.sample(i), tc.dimension));
    labels.push_back(dataset.label(i));
  }
  double previous = logistic_loss(features, labels, std::vector<double>(tc.dimension, 0.0), 0.0,
                                  tc.l2);
  for (const Model& m : checkpoints) {
    const double loss = logistic_loss(features, labels, m.weights, m.bias, tc.l2);
    CHECK(loss <= previous + 1e-12);
    previous = loss;
  }
}

TEST_CASE("training is bitwise deterministic") {
  const Corpus corpus = testutil::random_gold_corpus(120, 5);
  auto source = std::make_shared<Corpus>(corpus);
  std::vector<LabeledItem> items;
  for (std::size_t i = 0; i < source->size(); ++i) items.push_back({i, *(*source)[i].gold});
  const BinaryDataset dataset(source, items, Provenance::NaiveMapping);

  TrainConfig tc;
  tc.dimension = 1u << 12;
  tc.epochs = 3;
  tc.batch_size = 32;
  tc.seed = 1234;
  const Model a = train(dataset, tc).back();
  const Model b = train(dataset, tc).back();
  REQUIRE(a.weights.size() == b.weights.size());
  CHECK(std::memcmp(a.weights.data(), b.weights.data(), a.weights.size() * sizeof(double)) == 0);
  CHECK(a.bias == b.bias);
}

TEST_CASE("checkpoint cadence emits every k epochs plus the final epoch") {
  const BinaryDataset dataset = two_point_dataset();
  TrainConfig tc;
  tc.dimension = 1u << 8;
  tc.epochs = 7;
  tc.checkpoint_every = 3;
  const std::vector<Model> checkpoints = train(dataset, tc);
  REQUIRE(checkpoints.size() == 3);
  CHECK(checkpoints[0].checkpoint_epoch == 3);
  CHECK(checkpoints[1].checkpoint_epoch == 6);
  CHECK(checkpoints[2].checkpoint_epoch == 7);
}

TEST_CASE("single-class datasets are rejected") {
  auto corpus = two_point_corpus();
  const BinaryDataset all_pos(corpus, {{0, 1}, {1, 1}}, Provenance::NaiveMapping);
  TrainConfig tc;
  tc.dimension = 1u << 8;
  CHECK_THROWS_WITH_AS(train(all_pos, tc), doctest::Contains("single class"), DataError);
}

TEST_CASE("divergent learning rates surface as a non-finite loss error") {
  // lr * l2 >> 2 makes the decay factor explode the weights exponentially.
  const BinaryDataset dataset = two_point_dataset();
  TrainConfig tc;
  tc.dimension = 1u << 8;
  tc.learning_rate = 1e4;
  tc.l2 = 1.0;
  tc.batch_size = 1;
  tc.epochs = 60;
  CHECK_THROWS_WITH_AS(train(dataset, tc), doctest::Contains("non-finite"), DataError);
}

// ---------------------------------------------------------------------------
// predict
// ---------------------------------------------------------------------------

TEST_CASE("zero model scores 0.5 and retains (tie convention)") {
  Model m;
  m.hyperparams.dimension = 1u << 8;
  m.weights.assign(m.dimension(), 0.0);
  const Prediction p = predict(m, make_sample("a", Feedback::Accept));
  CHECK(p.score == doctest::Approx(0.5));
  CHECK(p.label == 1);
}

TEST_CASE("predict rejects dimension mismatches") {
  Model m;
  m.hyperparams.dimension = 1u << 8;
  m.weights.assign(m.dimension(), 0.0);
  FeatureVector fv;
  fv.dimension = 1u << 9;
  CHECK_THROWS_AS(predict_features(m, fv), DataError);
}

// ---------------------------------------------------------------------------
// persistence
// ---------------------------------------------------------------------------

TEST_CASE("model round-trip reproduces scores bitwise") {
  TempDir tmp("model");
  TrainConfig tc;
  tc.dimension = 1u << 10;
  tc.epochs = 50;
  tc.batch_size = 2;
  const BinaryDataset dataset = two_point_dataset();
  Model m = train(dataset, tc).back();
  m.alpha = 0.3;

  save_model(m, tmp.file("m.rmdl"));
  const Model back = load_model(tmp.file("m.rmdl"));
  CHECK(back.alpha == 0.3);
  CHECK(back.checkpoint_epoch == m.checkpoint_epoch);
  CHECK(back.hyperparams == m.hyperparams);
  const auto s = make_sample("q", Feedback::Ignore, std::nullopt, "alpha zeta", "useful trivia");
  CHECK(predict(back, s).score == predict(m, s).score);

  SUBCASE("absent alpha stays absent") {
    m.alpha.reset();
    save_model(m, tmp.file("m2.rmdl"));
    CHECK_FALSE(load_model(tmp.file("m2.rmdl")).alpha.has_value());
  }
}

TEST_CASE("corrupt model files are rejected") {
  TempDir tmp("model");
  Model m;
  m.hyperparams.dimension = 1u << 8;
  m.weights.assign(m.dimension(), 0.25);
  save_model(m, tmp.file("m.rmdl"));

  SUBCASE("truncated") {
    std::ifstream in(tmp.file("m.rmdl"), std::ios::binary);
    std::string bytes(std::istreambuf_iterator<char>(in), {});
    std::ofstream out(tmp.file("t.rmdl"), std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
    out.close();
    CHECK_THROWS_WITH_AS(load_model(tmp.file("t.rmdl")), doctest::Contains("truncated"),
                         DataError);
  }
  SUBCASE("bad magic") {
    std::ofstream out(tmp.file("b.rmdl"), std::ios::binary);
    out << "JUNKJUNKJUNKJUNK";
    out.close();
    CHECK_THROWS_WITH_AS(load_model(tmp.file("b.rmdl")), doctest::Contains("magic"), DataError);
  }
  SUBCASE("version mismatch") {
    std::ifstream in(tmp.file("m.rmdl"), std::ios::binary);
    std::string bytes(std::istreambuf_iterator<char>(in), {});
    bytes[4] = 99;  // version field
    std::ofstream out(tmp.file("v.rmdl"), std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.close();
    CHECK_THROWS_WITH_AS(load_model(tmp.file("v.rmdl")), doctest::Contains("version"), DataError);
  }
}

// ---------------------------------------------------------------------------
// zero-signal sanity
// ---------------------------------------------------------------------------

TEST_CASE("no class signal means chance-level gold accuracy") {
  SynthConfig cfg;
  cfg.n_samples = 8000;
  cfg.class_signal_strength = 0.0;
  cfg.seed = 31;
  const Corpus corpus = generate(cfg);

  auto source = std::make_shared<Corpus>(corpus);
  std::vector<LabeledItem> train_items, test_items;
  for (std::size_t i = 0; i < source->size(); ++i) {
    (i < 4000 ? train_items : test_items).push_back({i, *(*source)[i].gold});
  }
  const BinaryDataset train_set(source, train_items, Provenance::NaiveMapping);

  TrainConfig tc;
  tc.dimension = 1u << 14;
  tc.epochs = 3;
  tc.seed = 8;
  const Model m = train(train_set, tc).back();

  std::size_t correct = 0;
  for (const LabeledItem& item : test_items) {
    correct += predict(m, (*source)[item.sample_index]).label == item.label;
  }
  const double accuracy = static_cast<double>(correct) / static_cast<double>(test_items.size());
  CHECK(accuracy >= 0.47);
  CHECK(accuracy <= 0.53);
}
