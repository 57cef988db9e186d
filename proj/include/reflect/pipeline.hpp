// SPDX-License-Identifier: Apache-2.0
//
// End-to-end orchestration: data acquisition, doping, parallel sub-model
// training, cleaner search, relabeling, final refinement, baseline, and
// report emission. A run is a pure function of its config; every per-stage
// seed derives from the master seed.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "reflect/classifier.hpp"
#include "reflect/corpus.hpp"
#include "reflect/doping.hpp"
#include "reflect/ensemble.hpp"
#include "reflect/relabel.hpp"
#include "reflect/search.hpp"
#include "reflect/synth.hpp"

namespace reflect {

// Synthetic data source: one generated pool, sliced into a gold pool (for
// the anchor/test split) and a raw pool (stratified 1:1:1).
struct SynthData {
  SynthConfig synth;  // synth.seed is ignored; derived from the master seed
  std::size_t gold_pool_size = 2600;
  std::size_t raw_per_class = 10000;
  std::size_t anchor_size = 100;
  std::size_t test_size = 1000;
};

// Pre-existing corpora on disk.
struct FileData {
  std::filesystem::path raw;
  std::filesystem::path anchor;
  std::filesystem::path test;
};

struct PipelineConfig {
  std::variant<SynthData, FileData> data = SynthData{};
  DopingSchedule doping;    // seed field ignored; derived from master_seed
  TrainConfig sub_train;    // one per doped dataset, seeds derived per index
  TrainConfig final_train;
  SearchConfig search;
  IgnorePolicy naive_policy = IgnorePolicy::Exclude;
  std::uint64_t master_seed = 1;
  std::filesystem::path out_dir;
};

// The documented default configuration: ~30k raw samples from the default
// noise channel, 100-sample anchor set, K=6 doping schedule.
PipelineConfig default_pipeline_config();

PipelineConfig pipeline_config_from_json(const nlohmann::json& j);
nlohmann::json pipeline_config_to_json(const PipelineConfig& config);
PipelineConfig load_pipeline_config(const std::filesystem::path& path);

// --- report ----------------------------------------------------------------

struct SubModelReport {
  double alpha = 0.0;
  std::uint32_t checkpoint_epoch = 0;
  Metrics val;
};

struct AlphaSweep {
  struct Row {
    double alpha = 0.0;
    double ir = 0.0;
    double fpr = 0.0;
  };
  std::vector<Row> rows;  // sorted by alpha
  std::optional<double> spearman_alpha_ir;
  std::optional<double> spearman_alpha_fpr;
};

struct SearchSummary {
  bool feasible = false;
  Strategy strategy = Strategy::StrictConsensus;
  // (sub-model index, checkpoint epoch) per member.
  std::vector<std::pair<std::size_t, std::uint32_t>> members;
  double objective = 0.0;
  Metrics val;
};

struct RunReport {
  std::vector<SubModelReport> sub_models;
  AlphaSweep sweep;
  SearchSummary search;
  TransitionMatrix transition;
  Metrics final_test;
  Metrics naive_test;
  // Set when the raw corpus carries gold (synthetic runs): label error of
  // the cleaner's relabeling vs the fixed naive mapping Accept->1,
  // Reject->0, Ignore->1.
  std::optional<double> relabel_gold_error;
  std::optional<double> naive_mapping_gold_error;
  std::uint64_t master_seed = 0;
  std::string config_hash;
  std::string timestamp;
};

nlohmann::json report_to_json(const RunReport& report);
RunReport report_from_json(const nlohmann::json& j);
std::string render_report(const RunReport& report);
std::string render_transition(const TransitionMatrix& m);

// Executes all stages and writes every artifact under config.out_dir (see
// README for the directory layout). Throws StageError with the failing
// stage's name; partial artifacts are left in place. Throws
// InfeasibleSearchError when no cleaner satisfies the IR constraint.
RunReport run_end_to_end(const PipelineConfig& config);

// Per-sub-model validation metrics (final checkpoints) sorted by doping
// ratio, plus rank correlations between alpha and IR/FPR. Correlations are
// absent for K=1 or constant columns.
AlphaSweep report_alpha_sweep(const ModelSet& models, const Corpus& val);

// Spearman rank correlation with average ranks for ties; nullopt when
// either side has zero rank variance or fewer than two points.
std::optional<double> spearman(const std::vector<double>& xs, const std::vector<double>& ys);

// Stable hex hash of the canonical config JSON; stamped into the report.
std::string config_hash(const PipelineConfig& config);

// Search artifacts shared by run_end_to_end and the CLI.
std::string leaderboard_tsv(const SearchResult& result, const ModelSet& models);

// Persisted description of a selected cleaner, with model file references
// resolvable relative to the manifest's own location.
struct CleanerManifest {
  Strategy strategy = Strategy::StrictConsensus;
  struct Member {
    std::size_t model = 0;
    std::uint32_t checkpoint_epoch = 0;
    std::string file;
  };
  std::vector<Member> members;
  bool feasible = true;
};

CleanerManifest cleaner_manifest_from_json(const nlohmann::json& j);

}  // namespace reflect
