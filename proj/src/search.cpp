// SPDX-License-Identifier: Apache-2.0

#include "reflect/search.hpp"

#include <algorithm>
#include <set>
#include <string>

#include "reflect/errors.hpp"

namespace reflect {

void SearchConfig::validate() const {
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw DataError("search: gamma must be in [0,1]");
  if (!(epsilon > 0.0)) throw DataError("search: epsilon must be > 0");
  if (strategies.empty()) throw DataError("search: no candidate strategies");
  std::set<Strategy> unique(strategies.begin(), strategies.end());
  if (unique.size() != strategies.size()) throw DataError("search: duplicate strategies");
}

namespace {

// Full rank order; ties beyond the objective prefer higher IR, then smaller
// and lexicographically smaller member sets, then SC.
bool entry_precedes(const SearchEntry& a, const SearchEntry& b) {
  if (a.objective != b.objective) return a.objective > b.objective;
  if (a.metrics.ir != b.metrics.ir) return a.metrics.ir > b.metrics.ir;
  if (a.config.members.size() != b.config.members.size()) {
    return a.config.members.size() < b.config.members.size();
  }
  if (a.config.members != b.config.members) return a.config.members < b.config.members;
  return static_cast<int>(a.config.strategy) < static_cast<int>(b.config.strategy);
}

}  // namespace

SearchResult grid_search(const ModelSet& models, const Corpus& val, const SearchConfig& config) {
  config.validate();
  if (models.empty()) throw DataError("search: empty model list");
  for (const SubModel& m : models) {
    if (m.checkpoints.empty()) throw DataError("search: sub-model with no checkpoints");
  }
  if (models.size() > 20) {
    throw DataError("search: exhaustive enumeration limited to 20 sub-models");
  }
  if (val.empty()) throw DataError("search: empty validation corpus");

  const std::uint32_t dim = models.front().checkpoints.front().dimension();
  for (const SubModel& m : models) {
    for (const Model& c : m.checkpoints) {
      if (c.dimension() != dim) throw DataError("search: models disagree on feature dimension");
    }
  }

  // Per-(model, checkpoint) intercept votes over the validation set,
  // featurizing each sample once.
  const std::size_t k = models.size();
  std::vector<std::vector<std::vector<char>>> votes(k);
  for (std::size_t m = 0; m < k; ++m) {
    votes[m].resize(models[m].checkpoints.size());
    for (auto& v : votes[m]) v.resize(val.size());
  }
  std::vector<int> gold(val.size());
  for (std::size_t i = 0; i < val.size(); ++i) {
    const FeedbackSample& s = val[i];
    if (!s.gold) throw DataError("search: validation sample id '" + s.id + "' has no gold label");
    gold[i] = *s.gold;
    const FeatureVector features = featurize(s, dim);
    for (std::size_t m = 0; m < k; ++m) {
      for (std::size_t c = 0; c < models[m].checkpoints.size(); ++c) {
        votes[m][c][i] = predict_features(models[m].checkpoints[c], features).label == 0;
      }
    }
  }

  std::vector<SearchEntry> entries;
  std::vector<ConsensusMember> members;

  auto score_members = [&]() {
    const std::size_t total = members.size();
    for (Strategy strategy : config.strategies) {
      std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
      for (std::size_t i = 0; i < val.size(); ++i) {
        std::size_t zeros = 0;
        for (const ConsensusMember& m : members) zeros += votes[m.model][m.checkpoint][i];
        const bool intercept = strategy == Strategy::StrictConsensus ? zeros == total
                                                                     : 2 * zeros > total;
        if (intercept) {
          (gold[i] == 0 ? tp : fp) += 1;
        } else {
          (gold[i] == 0 ? fn : tn) += 1;
        }
      }
      SearchEntry entry;
      entry.config.members = members;
      entry.config.strategy = strategy;
      entry.metrics = Metrics::from_counts(tp, fp, fn, tn);
      entry.objective = entry.metrics.ir / (entry.metrics.fpr + config.epsilon);
      entry.feasible = entry.metrics.ir >= config.gamma;
      entries.push_back(std::move(entry));
    }
  };

  // Depth-first over checkpoint assignments for the models in the subset.
  auto assign = [&](auto&& self, const std::vector<std::size_t>& subset, std::size_t pos) -> void {
    if (pos == subset.size()) {
      score_members();
      return;
    }
    const std::size_t model = subset[pos];
    if (config.include_checkpoints) {
      for (std::size_t c = 0; c < models[model].checkpoints.size(); ++c) {
        members.push_back({model, c});
        self(self, subset, pos + 1);
        members.pop_back();
      }
    } else {
      members.push_back({model, models[model].final_index()});
      self(self, subset, pos + 1);
      members.pop_back();
    }
  };

  for (std::size_t mask = 1; mask < (std::size_t{1} << k); ++mask) {
    std::vector<std::size_t> subset;
    for (std::size_t m = 0; m < k; ++m) {
      if (mask & (std::size_t{1} << m)) subset.push_back(m);
    }
    assign(assign, subset, 0);
  }

  std::sort(entries.begin(), entries.end(), entry_precedes);

  SearchResult result;
  result.leaderboard = std::move(entries);
  for (const SearchEntry& e : result.leaderboard) {
    if (e.feasible) {
      result.best = e;
      result.feasible = true;
      break;
    }
  }
  if (!result.feasible) {
    // Constraint unsatisfiable: surface the max-IR combination, flagged.
    const SearchEntry* fallback = nullptr;
    for (const SearchEntry& e : result.leaderboard) {
      if (!fallback || e.metrics.ir > fallback->metrics.ir ||
          (e.metrics.ir == fallback->metrics.ir && entry_precedes(e, *fallback))) {
        fallback = &e;
      }
    }
    result.best = *fallback;
  }
  return result;
}

}  // namespace reflect
