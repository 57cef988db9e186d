// SPDX-License-Identifier: Apache-2.0

#include "reflect/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <numeric>
#include <unordered_set>

#include "reflect/errors.hpp"
#include "reflect/rng.hpp"

namespace reflect {

namespace fs = std::filesystem;
using nlohmann::json;

// --- config ------------------------------------------------------------------

PipelineConfig default_pipeline_config() {
  PipelineConfig config;
  SynthData data;
  data.synth.n_samples = 38600;
  config.data = data;
  return config;
}

namespace {

void check_keys(const json& j, std::initializer_list<const char*> allowed, const char* where) {
  for (const auto& [key, value] : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(),
                     [&](const char* k) { return key == k; })) {
      throw DataError("config: unknown key '" + key + "' in " + where);
    }
  }
}

NoiseChannel channel_from_json(const json& j) {
  check_keys(j, {"pos", "neg"}, "channel");
  NoiseChannel c = default_channel();
  auto triple = [&](const char* key, double& a, double& r, double& g) {
    if (!j.contains(key)) return;
    const json& t = j.at(key);
    if (!t.is_array() || t.size() != 3) {
      throw DataError(std::string("config: channel.") + key +
                      " must be an array [p_accept, p_reject, p_ignore]");
    }
    a = t[0].get<double>();
    r = t[1].get<double>();
    g = t[2].get<double>();
  };
  triple("pos", c.p_accept_given_pos, c.p_reject_given_pos, c.p_ignore_given_pos);
  triple("neg", c.p_accept_given_neg, c.p_reject_given_neg, c.p_ignore_given_neg);
  return c;
}

json channel_to_json(const NoiseChannel& c) {
  return json{{"pos", {c.p_accept_given_pos, c.p_reject_given_pos, c.p_ignore_given_pos}},
              {"neg", {c.p_accept_given_neg, c.p_reject_given_neg, c.p_ignore_given_neg}}};
}

SynthData synth_data_from_json(const json& j) {
  check_keys(j,
             {"n_samples", "p_positive", "vocab_size", "tokens_per_field",
              "class_signal_strength", "channel", "id_prefix", "gold_pool_size",
              "raw_per_class", "anchor_size", "test_size"},
             "data.synth");
  SynthData d = std::get<SynthData>(default_pipeline_config().data);
  if (j.contains("n_samples")) d.synth.n_samples = j.at("n_samples").get<std::size_t>();
  if (j.contains("p_positive")) d.synth.p_positive = j.at("p_positive").get<double>();
  if (j.contains("vocab_size")) d.synth.vocab_size = j.at("vocab_size").get<std::size_t>();
  if (j.contains("tokens_per_field")) {
    d.synth.tokens_per_field = j.at("tokens_per_field").get<std::size_t>();
  }
  if (j.contains("class_signal_strength")) {
    d.synth.class_signal_strength = j.at("class_signal_strength").get<double>();
  }
  if (j.contains("channel")) d.synth.channel = channel_from_json(j.at("channel"));
  if (j.contains("id_prefix")) d.synth.id_prefix = j.at("id_prefix").get<std::string>();
  if (j.contains("gold_pool_size")) d.gold_pool_size = j.at("gold_pool_size").get<std::size_t>();
  if (j.contains("raw_per_class")) d.raw_per_class = j.at("raw_per_class").get<std::size_t>();
  if (j.contains("anchor_size")) d.anchor_size = j.at("anchor_size").get<std::size_t>();
  if (j.contains("test_size")) d.test_size = j.at("test_size").get<std::size_t>();
  return d;
}

TrainConfig train_from_json(const json& j, TrainConfig base, const char* where) {
  check_keys(j, {"dimension", "epochs", "batch_size", "learning_rate", "l2", "checkpoint_every"},
             where);
  if (j.contains("dimension")) base.dimension = j.at("dimension").get<std::uint32_t>();
  if (j.contains("epochs")) base.epochs = j.at("epochs").get<std::uint32_t>();
  if (j.contains("batch_size")) base.batch_size = j.at("batch_size").get<std::uint32_t>();
  if (j.contains("learning_rate")) base.learning_rate = j.at("learning_rate").get<double>();
  if (j.contains("l2")) base.l2 = j.at("l2").get<double>();
  if (j.contains("checkpoint_every")) {
    base.checkpoint_every = j.at("checkpoint_every").get<std::uint32_t>();
  }
  return base;
}

json train_to_json(const TrainConfig& c) {
  return json{{"dimension", c.dimension},         {"epochs", c.epochs},
              {"batch_size", c.batch_size},       {"learning_rate", c.learning_rate},
              {"l2", c.l2},                       {"checkpoint_every", c.checkpoint_every}};
}

json metrics_to_json(const Metrics& m) {
  json j{{"tp", m.tp}, {"fp", m.fp}, {"fn", m.fn}, {"tn", m.tn}, {"ir", m.ir}, {"fpr", m.fpr}};
  if (std::isinf(m.pie)) {
    j["pie"] = "inf";
  } else {
    j["pie"] = m.pie;
  }
  return j;
}

Metrics metrics_from_json(const json& j) {
  Metrics m;
  m.tp = j.at("tp").get<std::size_t>();
  m.fp = j.at("fp").get<std::size_t>();
  m.fn = j.at("fn").get<std::size_t>();
  m.tn = j.at("tn").get<std::size_t>();
  m.ir = j.at("ir").get<double>();
  m.fpr = j.at("fpr").get<double>();
  m.pie = j.at("pie").is_string() ? kPieInfinity : j.at("pie").get<double>();
  return m;
}

std::string fmt(double v, int dp) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", dp, v);
  return buf;
}

std::string fmt_pie(double v) { return std::isinf(v) ? "inf" : fmt(v, 2); }

std::string iso_utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  out.flush();
  if (!out) throw DataError("write failed for " + path.string());
}

std::string members_string(const SearchSummary& s) {
  std::string out;
  for (std::size_t i = 0; i < s.members.size(); ++i) {
    if (i) out += '+';
    out += std::to_string(s.members[i].first) + "@" + std::to_string(s.members[i].second);
  }
  return out;
}

template <typename F>
auto run_stage(const char* name, F&& f) {
  try {
    return std::forward<F>(f)();
  } catch (const InfeasibleSearchError&) {
    throw;
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

bool has_gold_everywhere(const Corpus& corpus) {
  return std::all_of(corpus.begin(), corpus.end(),
                     [](const FeedbackSample& s) { return s.gold.has_value(); });
}

}  // namespace

PipelineConfig pipeline_config_from_json(const json& j) {
  check_keys(j, {"seed", "out", "data", "doping", "train", "final_train", "search",
                 "naive_ignore_policy"},
             "config");
  PipelineConfig config = default_pipeline_config();
  if (j.contains("seed")) config.master_seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("out")) config.out_dir = j.at("out").get<std::string>();

  if (j.contains("data")) {
    const json& data = j.at("data");
    check_keys(data, {"mode", "synth", "files"}, "data");
    const std::string mode = data.value("mode", std::string("synth"));
    if (mode == "synth") {
      config.data = data.contains("synth") ? synth_data_from_json(data.at("synth"))
                                           : std::get<SynthData>(config.data);
    } else if (mode == "files") {
      if (!data.contains("files")) throw DataError("config: data.mode=files needs a files block");
      const json& f = data.at("files");
      check_keys(f, {"raw", "anchor", "test"}, "data.files");
      FileData files;
      files.raw = f.at("raw").get<std::string>();
      files.anchor = f.at("anchor").get<std::string>();
      files.test = f.at("test").get<std::string>();
      config.data = files;
    } else {
      throw DataError("config: data.mode must be 'synth' or 'files'");
    }
  }

  if (j.contains("doping")) {
    const json& d = j.at("doping");
    check_keys(d, {"ratios", "n_negatives_per_set"}, "doping");
    if (d.contains("ratios")) config.doping.ratios = d.at("ratios").get<std::vector<double>>();
    if (d.contains("n_negatives_per_set")) {
      config.doping.n_negatives_per_set = d.at("n_negatives_per_set").get<std::size_t>();
    }
  }
  if (j.contains("train")) {
    config.sub_train = train_from_json(j.at("train"), config.sub_train, "train");
  }
  if (j.contains("final_train")) {
    config.final_train = train_from_json(j.at("final_train"), config.final_train, "final_train");
  }
  if (j.contains("search")) {
    const json& s = j.at("search");
    check_keys(s, {"gamma", "epsilon", "include_checkpoints", "strategies"}, "search");
    if (s.contains("gamma")) config.search.gamma = s.at("gamma").get<double>();
    if (s.contains("epsilon")) config.search.epsilon = s.at("epsilon").get<double>();
    if (s.contains("include_checkpoints")) {
      config.search.include_checkpoints = s.at("include_checkpoints").get<bool>();
    }
    if (s.contains("strategies")) {
      config.search.strategies.clear();
      for (const json& name : s.at("strategies")) {
        auto strategy = strategy_from_string(name.get<std::string>());
        if (!strategy) throw DataError("config: unknown strategy '" + name.get<std::string>() + "'");
        config.search.strategies.push_back(*strategy);
      }
    }
  }
  if (j.contains("naive_ignore_policy")) {
    const std::string name = j.at("naive_ignore_policy").get<std::string>();
    auto policy = ignore_policy_from_string(name);
    if (!policy) throw DataError("config: unknown naive_ignore_policy '" + name + "'");
    config.naive_policy = *policy;
  }
  return config;
}

json pipeline_config_to_json(const PipelineConfig& config) {
  json data;
  if (std::holds_alternative<SynthData>(config.data)) {
    const SynthData& d = std::get<SynthData>(config.data);
    data = json{{"mode", "synth"},
                {"synth",
                 json{{"n_samples", d.synth.n_samples},
                      {"p_positive", d.synth.p_positive},
                      {"vocab_size", d.synth.vocab_size},
                      {"tokens_per_field", d.synth.tokens_per_field},
                      {"class_signal_strength", d.synth.class_signal_strength},
                      {"channel", channel_to_json(d.synth.channel)},
                      {"id_prefix", d.synth.id_prefix},
                      {"gold_pool_size", d.gold_pool_size},
                      {"raw_per_class", d.raw_per_class},
                      {"anchor_size", d.anchor_size},
                      {"test_size", d.test_size}}}};
  } else {
    const FileData& d = std::get<FileData>(config.data);
    data = json{{"mode", "files"},
                {"files", json{{"raw", d.raw.string()},
                               {"anchor", d.anchor.string()},
                               {"test", d.test.string()}}}};
  }
  json strategies = json::array();
  for (Strategy s : config.search.strategies) strategies.push_back(std::string(to_string(s)));
  return json{
      {"seed", config.master_seed},
      {"out", config.out_dir.string()},
      {"data", data},
      {"doping", json{{"ratios", config.doping.ratios},
                      {"n_negatives_per_set", config.doping.n_negatives_per_set}}},
      {"train", train_to_json(config.sub_train)},
      {"final_train", train_to_json(config.final_train)},
      {"search", json{{"gamma", config.search.gamma},
                      {"epsilon", config.search.epsilon},
                      {"include_checkpoints", config.search.include_checkpoints},
                      {"strategies", strategies}}},
      {"naive_ignore_policy", std::string(to_string(config.naive_policy))}};
}

PipelineConfig load_pipeline_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw DataError("config " + path.string() + ": " + e.what());
  }
  return pipeline_config_from_json(j);
}

std::string config_hash(const PipelineConfig& config) {
  json j = pipeline_config_to_json(config);
  j.erase("out");  // the output location does not change the experiment
  const std::uint64_t h = fnv1a64(j.dump());
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// --- correlations ------------------------------------------------------------

namespace {

std::vector<double> average_ranks(const std::vector<double>& values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (values[a] != values[b]) return values[a] < values[b];
    return a < b;
  });
  std::vector<double> ranks(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;  // 1-based average rank
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

std::optional<double> spearman(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size()) throw std::invalid_argument("spearman: length mismatch");
  const std::size_t n = xs.size();
  if (n < 2) return std::nullopt;
  const std::vector<double> rx = average_ranks(xs);
  const std::vector<double> ry = average_ranks(ys);
  const double mean = (static_cast<double>(n) + 1.0) / 2.0;
  double cov = 0.0, var_x = 0.0, var_y = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = rx[i] - mean;
    const double dy = ry[i] - mean;
    cov += dx * dy;
    var_x += dx * dx;
    var_y += dy * dy;
  }
  if (var_x == 0.0 || var_y == 0.0) return std::nullopt;
  return cov / std::sqrt(var_x * var_y);
}

AlphaSweep report_alpha_sweep(const ModelSet& models, const Corpus& val) {
  if (models.empty()) throw DataError("alpha sweep: empty model set");
  AlphaSweep sweep;
  for (const SubModel& m : models) {
    const Model& final = m.final_model();
    if (!final.alpha) {
      throw DataError("alpha sweep: model without a doping ratio tag");
    }
    const Metrics metrics = evaluate_model(final, val);
    sweep.rows.push_back({*final.alpha, metrics.ir, metrics.fpr});
  }
  std::stable_sort(sweep.rows.begin(), sweep.rows.end(),
                   [](const auto& a, const auto& b) { return a.alpha < b.alpha; });
  std::vector<double> alphas, irs, fprs;
  for (const auto& row : sweep.rows) {
    alphas.push_back(row.alpha);
    irs.push_back(row.ir);
    fprs.push_back(row.fpr);
  }
  sweep.spearman_alpha_ir = spearman(alphas, irs);
  sweep.spearman_alpha_fpr = spearman(alphas, fprs);
  return sweep;
}

// --- report ------------------------------------------------------------------

json report_to_json(const RunReport& report) {
  json sub_models = json::array();
  for (const SubModelReport& s : report.sub_models) {
    sub_models.push_back(json{{"alpha", s.alpha},
                              {"checkpoint_epoch", s.checkpoint_epoch},
                              {"val", metrics_to_json(s.val)}});
  }
  json sweep_rows = json::array();
  for (const auto& row : report.sweep.rows) {
    sweep_rows.push_back(json{{"alpha", row.alpha}, {"ir", row.ir}, {"fpr", row.fpr}});
  }
  json sweep{{"rows", sweep_rows}};
  sweep["spearman_alpha_ir"] =
      report.sweep.spearman_alpha_ir ? json(*report.sweep.spearman_alpha_ir) : json(nullptr);
  sweep["spearman_alpha_fpr"] =
      report.sweep.spearman_alpha_fpr ? json(*report.sweep.spearman_alpha_fpr) : json(nullptr);

  json members = json::array();
  for (const auto& [model, epoch] : report.search.members) {
    members.push_back(json{{"model", model}, {"checkpoint_epoch", epoch}});
  }
  json labels;
  labels["relabel_gold_error"] =
      report.relabel_gold_error ? json(*report.relabel_gold_error) : json(nullptr);
  labels["naive_mapping_gold_error"] =
      report.naive_mapping_gold_error ? json(*report.naive_mapping_gold_error) : json(nullptr);

  const auto& c = report.transition.counts;
  return json{
      {"provenance", json{{"master_seed", report.master_seed},
                          {"config_hash", report.config_hash},
                          {"timestamp", report.timestamp}}},
      {"sub_models", sub_models},
      {"alpha_sweep", sweep},
      {"search", json{{"feasible", report.search.feasible},
                      {"strategy", std::string(to_string(report.search.strategy))},
                      {"members", members},
                      {"objective", report.search.objective},
                      {"val", metrics_to_json(report.search.val)}}},
      {"transition", json{{"accept", {c[0][0], c[0][1]}},
                          {"reject", {c[1][0], c[1][1]}},
                          {"ignore", {c[2][0], c[2][1]}}}},
      {"labels", labels},
      {"test", json{{"final", metrics_to_json(report.final_test)},
                    {"naive", metrics_to_json(report.naive_test)}}}};
}

RunReport report_from_json(const json& j) {
  RunReport report;
  const json& prov = j.at("provenance");
  report.master_seed = prov.at("master_seed").get<std::uint64_t>();
  report.config_hash = prov.at("config_hash").get<std::string>();
  report.timestamp = prov.at("timestamp").get<std::string>();

  for (const json& s : j.at("sub_models")) {
    report.sub_models.push_back({s.at("alpha").get<double>(),
                                 s.at("checkpoint_epoch").get<std::uint32_t>(),
                                 metrics_from_json(s.at("val"))});
  }
  const json& sweep = j.at("alpha_sweep");
  for (const json& row : sweep.at("rows")) {
    report.sweep.rows.push_back(
        {row.at("alpha").get<double>(), row.at("ir").get<double>(), row.at("fpr").get<double>()});
  }
  if (!sweep.at("spearman_alpha_ir").is_null()) {
    report.sweep.spearman_alpha_ir = sweep.at("spearman_alpha_ir").get<double>();
  }
  if (!sweep.at("spearman_alpha_fpr").is_null()) {
    report.sweep.spearman_alpha_fpr = sweep.at("spearman_alpha_fpr").get<double>();
  }

  const json& search = j.at("search");
  report.search.feasible = search.at("feasible").get<bool>();
  report.search.strategy = *strategy_from_string(search.at("strategy").get<std::string>());
  for (const json& m : search.at("members")) {
    report.search.members.emplace_back(m.at("model").get<std::size_t>(),
                                       m.at("checkpoint_epoch").get<std::uint32_t>());
  }
  report.search.objective = search.at("objective").get<double>();
  report.search.val = metrics_from_json(search.at("val"));

  const json& t = j.at("transition");
  const char* row_names[3] = {"accept", "reject", "ignore"};
  for (std::size_t r = 0; r < 3; ++r) {
    report.transition.counts[r][0] = t.at(row_names[r])[0].get<std::size_t>();
    report.transition.counts[r][1] = t.at(row_names[r])[1].get<std::size_t>();
  }

  const json& labels = j.at("labels");
  if (!labels.at("relabel_gold_error").is_null()) {
    report.relabel_gold_error = labels.at("relabel_gold_error").get<double>();
  }
  if (!labels.at("naive_mapping_gold_error").is_null()) {
    report.naive_mapping_gold_error = labels.at("naive_mapping_gold_error").get<double>();
  }

  report.final_test = metrics_from_json(j.at("test").at("final"));
  report.naive_test = metrics_from_json(j.at("test").at("naive"));
  return report;
}

std::string render_transition(const TransitionMatrix& m) {
  std::string out;
  out += "origin      -> 0 (intercept)        -> 1 (retain)\n";
  const Feedback rows[3] = {Feedback::Accept, Feedback::Reject, Feedback::Ignore};
  for (Feedback f : rows) {
    char line[128];
    std::snprintf(line, sizeof line, "%-10s  %8zu (%6.2f%%)   %8zu (%6.2f%%)\n",
                  std::string(to_string(f)).c_str(),
                  m.counts[static_cast<std::size_t>(f)][0], m.percentage(f, 0),
                  m.counts[static_cast<std::size_t>(f)][1], m.percentage(f, 1));
    out += line;
  }
  return out;
}

std::string render_report(const RunReport& report) {
  std::string out;
  out += "run summary\n";
  out += "===========\n";
  out += "master seed   " + std::to_string(report.master_seed) + "\n";
  out += "config hash   " + report.config_hash + "\n";
  out += "timestamp     " + report.timestamp + "\n\n";

  out += "sub-models on the anchor set\n";
  out += "alpha   epoch   ir       fpr      pie\n";
  for (const SubModelReport& s : report.sub_models) {
    char line[128];
    std::snprintf(line, sizeof line, "%-7s %-7u %-8s %-8s %s\n", fmt(s.alpha, 2).c_str(),
                  s.checkpoint_epoch, fmt(s.val.ir, 3).c_str(), fmt(s.val.fpr, 3).c_str(),
                  fmt_pie(s.val.pie).c_str());
    out += line;
  }
  out += "spearman(alpha, ir)  = ";
  out += report.sweep.spearman_alpha_ir ? fmt(*report.sweep.spearman_alpha_ir, 3) : "n/a";
  out += "\nspearman(alpha, fpr) = ";
  out += report.sweep.spearman_alpha_fpr ? fmt(*report.sweep.spearman_alpha_fpr, 3) : "n/a";
  out += "\n\n";

  out += "selected cleaner\n";
  out += "strategy " + std::string(to_string(report.search.strategy));
  out += "   members " + members_string(report.search);
  out += "   objective " + fmt(report.search.objective, 3);
  out += report.search.feasible ? "   feasible yes\n" : "   feasible NO (max-IR fallback)\n";
  out += "anchor ir " + fmt(report.search.val.ir, 3) + "   fpr " + fmt(report.search.val.fpr, 3) +
         "   pie " + fmt_pie(report.search.val.pie) + "\n\n";

  out += "label transitions (raw corpus relabeled by the cleaner)\n";
  out += render_transition(report.transition);
  out += "\n";

  if (report.relabel_gold_error && report.naive_mapping_gold_error) {
    out += "label error vs gold: relabeled " + fmt(*report.relabel_gold_error, 4) +
           ", naive mapping " + fmt(*report.naive_mapping_gold_error, 4) + "\n\n";
  }

  out += "test metrics\n";
  out += "method    ir       fpr      pie\n";
  char line[128];
  std::snprintf(line, sizeof line, "%-9s %-8s %-8s %s\n", "cleaned",
                fmt(report.final_test.ir, 3).c_str(), fmt(report.final_test.fpr, 3).c_str(),
                fmt_pie(report.final_test.pie).c_str());
  out += line;
  std::snprintf(line, sizeof line, "%-9s %-8s %-8s %s\n", "naive",
                fmt(report.naive_test.ir, 3).c_str(), fmt(report.naive_test.fpr, 3).c_str(),
                fmt_pie(report.naive_test.pie).c_str());
  out += line;
  return out;
}

// --- run ---------------------------------------------------------------------

namespace {

struct StageData {
  std::shared_ptr<const Corpus> raw;
  Corpus anchor;
  Corpus test;
};

StageData acquire_data(const PipelineConfig& config) {
  StageData out;
  if (std::holds_alternative<SynthData>(config.data)) {
    const SynthData& d = std::get<SynthData>(config.data);
    SynthConfig sc = d.synth;
    sc.seed = derive_seed(config.master_seed, "synth");
    const Corpus full = generate(sc);
    if (d.gold_pool_size >= full.size()) {
      throw DataError("pipeline: gold_pool_size " + std::to_string(d.gold_pool_size) +
                      " leaves no raw pool from " + std::to_string(full.size()) + " samples");
    }
    const std::size_t raw_count = full.size() - d.gold_pool_size;
    std::vector<FeedbackSample> raw_pool(full.begin(), full.begin() + raw_count);
    std::vector<FeedbackSample> gold_pool(full.begin() + raw_count, full.end());

    const Corpus raw_corpus = stratified_sample(Corpus(std::move(raw_pool), CorpusRole::Raw),
                                                d.raw_per_class,
                                                derive_seed(config.master_seed, "stratify"));
    out.raw = std::make_shared<Corpus>(raw_corpus);
    auto [anchor, test] = split_gold(Corpus(std::move(gold_pool), CorpusRole::Raw),
                                     d.anchor_size, d.test_size,
                                     derive_seed(config.master_seed, "split"));
    out.anchor = std::move(anchor);
    out.test = std::move(test);
  } else {
    const FileData& d = std::get<FileData>(config.data);
    out.raw = std::make_shared<Corpus>(load_corpus(d.raw, CorpusRole::Raw));
    out.anchor = load_corpus(d.anchor, CorpusRole::AnchorValidation);
    out.test = load_corpus(d.test, CorpusRole::Test);
  }

  // Leakage guard: no anchor or test id may reach any training dataset.
  std::unordered_set<std::string_view> held_out;
  for (const FeedbackSample& s : out.anchor) held_out.insert(s.id);
  for (const FeedbackSample& s : out.test) held_out.insert(s.id);
  for (const FeedbackSample& s : *out.raw) {
    if (held_out.count(s.id)) {
      throw DataError("pipeline: sample id '" + s.id + "' appears in both the raw corpus and a "
                      "held-out corpus");
    }
  }
  return out;
}

}  // namespace

RunReport run_end_to_end(const PipelineConfig& config) {
  if (config.out_dir.empty()) throw DataError("pipeline: no output directory configured");
  fs::create_directories(config.out_dir);
  fs::create_directories(config.out_dir / "corpora");
  fs::create_directories(config.out_dir / "doped");
  fs::create_directories(config.out_dir / "models");
  fs::create_directories(config.out_dir / "search");

  write_text(config.out_dir / "config.json", pipeline_config_to_json(config).dump(2) + "\n");

  RunReport report;
  report.master_seed = config.master_seed;
  report.config_hash = config_hash(config);
  report.timestamp = iso_utc_now();

  // 1. corpora
  StageData data = run_stage("data", [&] { return acquire_data(config); });
  run_stage("data", [&] {
    save_corpus(*data.raw, config.out_dir / "corpora" / "raw.jsonl");
    save_corpus(data.anchor, config.out_dir / "corpora" / "anchor.jsonl");
    save_corpus(data.test, config.out_dir / "corpora" / "test.jsonl");
    return 0;
  });

  // 2. doped datasets
  DopingSchedule schedule = config.doping;
  schedule.seed = derive_seed(config.master_seed, "doping");
  std::vector<BinaryDataset> doped = run_stage("doping", [&] {
    auto datasets = build_perturbed_datasets(data.raw, schedule);
    json manifest{{"seed", schedule.seed}, {"datasets", json::array()}};
    for (std::size_t k = 0; k < datasets.size(); ++k) {
      const std::string file = "doped_" + std::to_string(k) + ".jsonl";
      save_labeled_dataset(datasets[k], config.out_dir / "doped" / file);
      auto [zeros, ones] = datasets[k].label_counts();
      std::size_t ignore_positives = 0;
      for (std::size_t i = 0; i < datasets[k].size(); ++i) {
        ignore_positives +=
            datasets[k].label(i) == 1 && datasets[k].sample(i).feedback == Feedback::Ignore;
      }
      manifest["datasets"].push_back(json{{"alpha", *datasets[k].alpha()},
                                          {"file", file},
                                          {"negatives", zeros},
                                          {"accept_positives", ones - ignore_positives},
                                          {"ignore_positives", ignore_positives}});
    }
    write_text(config.out_dir / "doped" / "manifest.json", manifest.dump(2) + "\n");
    return datasets;
  });

  // 3. K sub-models
  FeatureCache cache(*data.raw, config.sub_train.dimension);
  ModelSet models = run_stage("train", [&] {
    ModelSet set;
    for (std::size_t k = 0; k < doped.size(); ++k) {
      TrainConfig tc = config.sub_train;
      tc.seed = derive_seed(config.master_seed, "train", k);
      SubModel sub{train(doped[k], tc, cache)};
      save_model(sub.final_model(),
                 config.out_dir / "models" / ("submodel_" + std::to_string(k) + ".rmdl"));
      if (config.search.include_checkpoints) {
        for (const Model& ckpt : sub.checkpoints) {
          save_model(ckpt, config.out_dir / "models" /
                               ("submodel_" + std::to_string(k) + "_ep" +
                                std::to_string(ckpt.checkpoint_epoch) + ".rmdl"));
        }
      }
      set.push_back(std::move(sub));
    }
    return set;
  });
  for (std::size_t k = 0; k < models.size(); ++k) {
    const Model& final = models[k].final_model();
    report.sub_models.push_back(
        {final.alpha.value_or(0.0), final.checkpoint_epoch,
         run_stage("train", [&] { return evaluate_model(final, data.anchor); })});
  }

  // 4. cleaner search
  SearchResult search = run_stage("search", [&] {
    SearchResult result = grid_search(models, data.anchor, config.search);
    write_text(config.out_dir / "search" / "leaderboard.tsv", leaderboard_tsv(result, models));

    json members = json::array();
    for (const ConsensusMember& m : result.best.config.members) {
      const Model& model = models[m.model].checkpoints[m.checkpoint];
      const bool is_final = m.checkpoint == models[m.model].final_index();
      const std::string file =
          is_final ? "models/submodel_" + std::to_string(m.model) + ".rmdl"
                   : "models/submodel_" + std::to_string(m.model) + "_ep" +
                         std::to_string(model.checkpoint_epoch) + ".rmdl";
      members.push_back(json{{"model", m.model},
                             {"checkpoint_epoch", model.checkpoint_epoch},
                             {"file", file}});
    }
    json manifest{{"strategy", std::string(to_string(result.best.config.strategy))},
                  {"members", members},
                  {"gamma", config.search.gamma},
                  {"epsilon", config.search.epsilon},
                  {"feasible", result.feasible},
                  {"objective", result.best.objective},
                  {"ir", result.best.metrics.ir},
                  {"fpr", result.best.metrics.fpr}};
    write_text(config.out_dir / "search" / "cleaner.json", manifest.dump(2) + "\n");
    return result;
  });
  report.search.feasible = search.feasible;
  report.search.strategy = search.best.config.strategy;
  for (const ConsensusMember& m : search.best.config.members) {
    report.search.members.emplace_back(
        m.model, models[m.model].checkpoints[m.checkpoint].checkpoint_epoch);
  }
  report.search.objective = search.best.objective;
  report.search.val = search.best.metrics;
  if (!search.feasible) {
    throw InfeasibleSearchError(
        "no cleaner combination reached IR >= " + fmt(config.search.gamma, 2) +
        "; best IR was " + fmt(search.best.metrics.ir, 3) +
        " (leaderboard persisted under search/)");
  }

  // 5. relabel + transitions
  BinaryDataset relabeled = run_stage("relabel", [&] {
    BinaryDataset out = relabel_corpus(models, search.best.config, data.raw);
    save_labeled_dataset(out, config.out_dir / "relabeled.jsonl");
    return out;
  });
  report.transition = transition_matrix(relabeled);
  write_text(config.out_dir / "transition.txt", render_transition(report.transition));
  if (has_gold_everywhere(*data.raw)) {
    report.relabel_gold_error = label_error_vs_gold(relabeled);
    report.naive_mapping_gold_error =
        label_error_vs_gold(naive_mapping(data.raw, IgnorePolicy::AsPositive));
  }

  // 6. final refinement
  Model final_model = run_stage("final", [&] {
    BinaryDataset final_set =
        build_final_training_set(relabeled, derive_seed(config.master_seed, "final_balance"));
    save_labeled_dataset(final_set, config.out_dir / "final_train.jsonl");
    TrainConfig tc = config.final_train;
    tc.seed = derive_seed(config.master_seed, "final_train");
    std::optional<FeatureCache> final_cache;
    const FeatureCache* use = &cache;
    if (tc.dimension != cache.dimension()) {
      final_cache.emplace(*data.raw, tc.dimension);
      use = &*final_cache;
    }
    std::vector<Model> checkpoints = train(final_set, tc, *use);
    Model model = std::move(checkpoints.back());
    model.alpha.reset();
    save_model(model, config.out_dir / "models" / "final.rmdl");
    return model;
  });

  // 7. naive baseline
  Model naive_model = run_stage("naive", [&] {
    BinaryDataset naive_set = naive_mapping(data.raw, config.naive_policy);
    TrainConfig tc = config.final_train;
    tc.seed = derive_seed(config.master_seed, "naive_train");
    std::optional<FeatureCache> naive_cache;
    const FeatureCache* use = &cache;
    if (tc.dimension != cache.dimension()) {
      naive_cache.emplace(*data.raw, tc.dimension);
      use = &*naive_cache;
    }
    std::vector<Model> checkpoints = train(naive_set, tc, *use);
    Model model = std::move(checkpoints.back());
    model.alpha.reset();
    save_model(model, config.out_dir / "models" / "naive.rmdl");
    return model;
  });

  // 8. test evaluation
  report.final_test = run_stage("evaluate", [&] { return evaluate_model(final_model, data.test); });
  report.naive_test = run_stage("evaluate", [&] { return evaluate_model(naive_model, data.test); });

  // 9. report
  run_stage("report", [&] {
    report.sweep = report_alpha_sweep(models, data.anchor);
    write_text(config.out_dir / "report.json", report_to_json(report).dump(2) + "\n");
    write_text(config.out_dir / "report.txt", render_report(report));
    return 0;
  });
  return report;
}

std::string leaderboard_tsv(const SearchResult& result, const ModelSet& models) {
  std::string out =
      "rank\tmembers\tstrategy\ttp\tfp\tfn\ttn\tir\tfpr\tpie\tobjective\tfeasible\n";
  std::size_t rank = 1;
  for (const SearchEntry& e : result.leaderboard) {
    std::string members;
    for (std::size_t i = 0; i < e.config.members.size(); ++i) {
      const ConsensusMember& m = e.config.members[i];
      if (i) members += '+';
      members += std::to_string(m.model) + "@" +
                 std::to_string(models[m.model].checkpoints[m.checkpoint].checkpoint_epoch);
    }
    out += std::to_string(rank++) + "\t" + members + "\t" +
           std::string(to_string(e.config.strategy)) + "\t" + std::to_string(e.metrics.tp) +
           "\t" + std::to_string(e.metrics.fp) + "\t" + std::to_string(e.metrics.fn) + "\t" +
           std::to_string(e.metrics.tn) + "\t" + fmt(e.metrics.ir, 4) + "\t" +
           fmt(e.metrics.fpr, 4) + "\t" + fmt_pie(e.metrics.pie) + "\t" + fmt(e.objective, 4) +
           "\t" + (e.feasible ? "yes" : "no") + "\n";
  }
  return out;
}

CleanerManifest cleaner_manifest_from_json(const json& j) {
  CleanerManifest manifest;
  auto strategy = strategy_from_string(j.at("strategy").get<std::string>());
  if (!strategy) {
    throw DataError("cleaner manifest: unknown strategy '" +
                    j.at("strategy").get<std::string>() + "'");
  }
  manifest.strategy = *strategy;
  manifest.feasible = j.value("feasible", true);
  for (const json& m : j.at("members")) {
    manifest.members.push_back({m.at("model").get<std::size_t>(),
                                m.at("checkpoint_epoch").get<std::uint32_t>(),
                                m.at("file").get<std::string>()});
  }
  if (manifest.members.empty()) throw DataError("cleaner manifest: no members");
  return manifest;
}

}  // namespace reflect
