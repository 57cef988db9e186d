// SPDX-License-Identifier: Apache-2.0

#include "reflect/synth.hpp"

#include <cmath>
#include <string>

#include "reflect/errors.hpp"
#include "reflect/rng.hpp"

namespace reflect {

namespace {

void validate_triple(double a, double r, double g, const char* which) {
  for (double p : {a, r, g}) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw DataError(std::string("noise channel: ") + which +
                      " triple has probability outside [0,1]");
    }
  }
  if (std::abs(a + r + g - 1.0) > 1e-9) {
    throw DataError(std::string("noise channel: ") + which + " triple sums to " +
                    std::to_string(a + r + g) + ", expected 1");
  }
}

}  // namespace

void NoiseChannel::validate() const {
  validate_triple(p_accept_given_pos, p_reject_given_pos, p_ignore_given_pos, "gold-positive");
  validate_triple(p_accept_given_neg, p_reject_given_neg, p_ignore_given_neg, "gold-negative");
}

NoiseChannel default_channel() {
  NoiseChannel c;
  c.p_accept_given_pos = 0.55;
  c.p_reject_given_pos = 0.10;
  c.p_ignore_given_pos = 0.35;
  c.p_accept_given_neg = 0.05;
  c.p_reject_given_neg = 0.55;
  c.p_ignore_given_neg = 0.40;
  return c;
}

void SynthConfig::validate() const {
  if (n_samples == 0) throw DataError("synth: n_samples must be > 0");
  if (!(p_positive > 0.0 && p_positive < 1.0)) {
    throw DataError("synth: p_positive must be in (0,1)");
  }
  if (!(class_signal_strength >= 0.0 && class_signal_strength <= 1.0)) {
    throw DataError("synth: class_signal_strength must be in [0,1]");
  }
  if (vocab_size < 2) throw DataError("synth: vocab_size must be >= 2");
  if (tokens_per_field == 0) throw DataError("synth: tokens_per_field must be > 0");
  channel.validate();
}

Corpus generate(const SynthConfig& config) {
  config.validate();

  Rng rng(config.seed);
  const std::uint64_t half = config.vocab_size / 2;

  auto draw_field = [&](int gold) {
    std::string text;
    for (std::size_t t = 0; t < config.tokens_per_field; ++t) {
      std::uint64_t token;
      if (rng.next_unit() < config.class_signal_strength) {
        // Class half: positives use [0, half), negatives [half, 2*half).
        token = (gold == 1 ? 0 : half) + rng.below(half);
      } else {
        token = rng.below(config.vocab_size);
      }
      if (t) text += ' ';
      text += 't';
      text += std::to_string(token);
    }
    return text;
  };

  std::vector<FeedbackSample> samples;
  samples.reserve(config.n_samples);
  for (std::size_t i = 0; i < config.n_samples; ++i) {
    FeedbackSample s;
    s.id = config.id_prefix + std::to_string(i);
    const int gold = rng.bernoulli(config.p_positive) ? 1 : 0;
    s.gold = gold;
    s.diff = draw_field(gold);
    s.comment = draw_field(gold);

    const double u = rng.next_unit();
    const double pa = gold == 1 ? config.channel.p_accept_given_pos : config.channel.p_accept_given_neg;
    const double pr = gold == 1 ? config.channel.p_reject_given_pos : config.channel.p_reject_given_neg;
    if (u < pa) {
      s.feedback = Feedback::Accept;
    } else if (u < pa + pr) {
      s.feedback = Feedback::Reject;
    } else {
      s.feedback = Feedback::Ignore;
    }
    samples.push_back(std::move(s));
  }
  return Corpus(std::move(samples), CorpusRole::Raw);
}

}  // namespace reflect
