// SPDX-License-Identifier: Apache-2.0
//
// Synthetic feedback corpora with known ground truth. Gold labels are
// Bernoulli, text is a class-conditional bag-of-tokens model, and feedback
// is drawn from a configurable three-way noise channel conditioned on gold.
// Generation is a pure function of the config, so every downstream
// denoising claim can be checked against the carried gold labels.

#pragma once

#include <cstdint>
#include <string>

#include "reflect/corpus.hpp"

namespace reflect {

// P(feedback | gold). Each row must sum to 1.
struct NoiseChannel {
  double p_accept_given_pos = 0;
  double p_reject_given_pos = 0;
  double p_ignore_given_pos = 0;
  double p_accept_given_neg = 0;
  double p_reject_given_neg = 0;
  double p_ignore_given_neg = 0;

  void validate() const;  // throws DataError on a degenerate channel
};

// Shipped default: Accept/Reject mostly track quality but both carry noise,
// and Ignore is genuinely ambiguous (slightly more likely for negatives).
NoiseChannel default_channel();

struct SynthConfig {
  std::size_t n_samples = 10000;
  double p_positive = 0.5;
  NoiseChannel channel = default_channel();
  // Token model: each token comes from the gold class's vocabulary half
  // with probability class_signal_strength, otherwise from the full
  // (shared) vocabulary. Strength 0 means no learnable signal at all.
  std::size_t vocab_size = 2000;
  std::size_t tokens_per_field = 24;
  double class_signal_strength = 0.25;
  std::uint64_t seed = 0;
  std::string id_prefix = "s";

  void validate() const;
};

// Raw corpus with gold set on every sample (carried for oracle use only;
// nothing downstream of the corpus module may read it for training).
Corpus generate(const SynthConfig& config);

}  // namespace reflect
