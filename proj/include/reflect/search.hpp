// SPDX-License-Identifier: Apache-2.0
//
// Grid search over (sub-model subset x consensus strategy) on the anchor
// validation set. Objective: IR / (FPR + epsilon), subject to IR >= gamma.

#pragma once

#include <vector>

#include "reflect/corpus.hpp"
#include "reflect/ensemble.hpp"

namespace reflect {

struct SearchConfig {
  double gamma = 0.40;    // minimum IR
  double epsilon = 1e-4;  // smoothing term in the objective
  // When true, every per-member checkpoint assignment is enumerated;
  // otherwise each sub-model contributes only its final checkpoint.
  bool include_checkpoints = false;
  std::vector<Strategy> strategies{Strategy::StrictConsensus, Strategy::MajorityVote};

  void validate() const;
};

struct SearchEntry {
  ConsensusConfig config;
  Metrics metrics;
  double objective = 0.0;
  bool feasible = false;
};

// leaderboard holds every evaluated combination in rank order; best is the
// top feasible entry, or (flagged by feasible=false) the max-IR combination
// when the constraint is unsatisfiable.
struct SearchResult {
  SearchEntry best;
  bool feasible = false;
  std::vector<SearchEntry> leaderboard;
};

// Enumerates every non-empty subset of the K sub-models crossed with each
// candidate strategy (and checkpoint assignment, when enabled). Rank order:
// higher objective, then higher IR, then smaller member set, then
// lexicographically smaller member list, then SC before MV.
SearchResult grid_search(const ModelSet& models, const Corpus& val, const SearchConfig& config);

}  // namespace reflect
