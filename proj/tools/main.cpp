// SPDX-License-Identifier: Apache-2.0
//
// reflect — CLI for the noisy-feedback cleaning and reflection-model
// training pipeline. Exit codes: 0 success, 1 usage error, 2 data error,
// 3 infeasible search (gamma unsatisfiable).

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "reflect/classifier.hpp"
#include "reflect/corpus.hpp"
#include "reflect/doping.hpp"
#include "reflect/ensemble.hpp"
#include "reflect/errors.hpp"
#include "reflect/pipeline.hpp"
#include "reflect/relabel.hpp"
#include "reflect/rng.hpp"
#include "reflect/search.hpp"
#include "reflect/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

reflect::PipelineConfig base_config(const std::string& config_path) {
  if (config_path.empty()) return reflect::default_pipeline_config();
  return reflect::load_pipeline_config(config_path);
}

void print_metrics(const reflect::Metrics& m, std::ostream& out) {
  out << "tp=" << m.tp << " fp=" << m.fp << " fn=" << m.fn << " tn=" << m.tn << " ir=" << m.ir
      << " fpr=" << m.fpr << " pie=";
  if (std::isinf(m.pie)) {
    out << "inf";
  } else {
    out << m.pie;
  }
  out << "\n";
}

std::vector<std::string> split_commas(const std::string& arg) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (start <= arg.size()) {
    const std::size_t comma = arg.find(',', start);
    if (comma == std::string::npos) {
      parts.push_back(arg.substr(start));
      break;
    }
    parts.push_back(arg.substr(start, comma - start));
    start = comma + 1;
  }
  return parts;
}

// Each --model argument is one sub-model: either a single file or a
// comma-separated checkpoint sequence, final checkpoint last.
reflect::ModelSet load_model_set(const std::vector<std::string>& model_args) {
  reflect::ModelSet models;
  for (const std::string& arg : model_args) {
    reflect::SubModel sub;
    for (const std::string& file : split_commas(arg)) {
      if (file.empty()) throw reflect::DataError("empty model path in '" + arg + "'");
      sub.checkpoints.push_back(reflect::load_model(file));
    }
    models.push_back(std::move(sub));
  }
  return models;
}

void write_doped_outputs(const std::vector<reflect::BinaryDataset>& datasets,
                         std::uint64_t seed, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  json manifest{{"seed", seed}, {"datasets", json::array()}};
  for (std::size_t k = 0; k < datasets.size(); ++k) {
    const std::string file = "doped_" + std::to_string(k) + ".jsonl";
    reflect::save_labeled_dataset(datasets[k], out_dir / file);
    auto [zeros, ones] = datasets[k].label_counts();
    std::size_t ignore_positives = 0;
    for (std::size_t i = 0; i < datasets[k].size(); ++i) {
      ignore_positives += datasets[k].label(i) == 1 &&
                          datasets[k].sample(i).feedback == reflect::Feedback::Ignore;
    }
    manifest["datasets"].push_back(json{{"alpha", *datasets[k].alpha()},
                                        {"file", file},
                                        {"negatives", zeros},
                                        {"accept_positives", ones - ignore_positives},
                                        {"ignore_positives", ignore_positives}});
  }
  std::ofstream out(out_dir / "manifest.json", std::ios::trunc);
  out << manifest.dump(2) << "\n";
}

struct GlobalOpts {
  std::string config_path;
  std::uint64_t seed = 0;
  std::string out;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"reflect: consensus-based data cleaning for reflection models"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOpts global;
  app.add_option("--config", global.config_path, "pipeline config file (JSON)");
  auto* seed_opt = app.add_option("--seed", global.seed, "master seed");
  app.add_option("--out", global.out, "output file or directory");

  // --- synth ---------------------------------------------------------------
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic feedback corpus");
  struct {
    std::size_t n = 0;
    double p_positive = -1;
    std::size_t vocab = 0;
    std::size_t tokens = 0;
    double signal = -1;
    std::string id_prefix;
  } synth_opts;
  auto* synth_n = synth_cmd->add_option("--n", synth_opts.n, "number of samples");
  auto* synth_p = synth_cmd->add_option("--p-positive", synth_opts.p_positive, "P(gold = 1)");
  auto* synth_v = synth_cmd->add_option("--vocab", synth_opts.vocab, "vocabulary size");
  auto* synth_t = synth_cmd->add_option("--tokens", synth_opts.tokens, "tokens per field");
  auto* synth_s =
      synth_cmd->add_option("--signal", synth_opts.signal, "class signal strength in [0,1]");
  auto* synth_i = synth_cmd->add_option("--id-prefix", synth_opts.id_prefix, "sample id prefix");
  synth_cmd->callback([&] {
    if (global.out.empty()) throw CLI::ValidationError("synth", "--out is required");
    reflect::PipelineConfig cfg = base_config(global.config_path);
    reflect::SynthConfig sc = std::holds_alternative<reflect::SynthData>(cfg.data)
                                  ? std::get<reflect::SynthData>(cfg.data).synth
                                  : reflect::SynthConfig{};
    if (*synth_n) sc.n_samples = synth_opts.n;
    if (*synth_p) sc.p_positive = synth_opts.p_positive;
    if (*synth_v) sc.vocab_size = synth_opts.vocab;
    if (*synth_t) sc.tokens_per_field = synth_opts.tokens;
    if (*synth_s) sc.class_signal_strength = synth_opts.signal;
    if (*synth_i) sc.id_prefix = synth_opts.id_prefix;
    if (seed_opt->count() > 0) sc.seed = global.seed;
    const reflect::Corpus corpus = reflect::generate(sc);
    reflect::save_corpus(corpus, global.out);
    std::cout << "wrote " << corpus.size() << " samples to " << global.out << "\n";
  });

  // --- dope ------------------------------------------------------------------
  auto* dope_cmd = app.add_subcommand("dope", "build noise-doped training datasets");
  struct {
    std::string raw;
    std::vector<double> ratios;
    std::size_t n = 0;
  } dope_opts;
  dope_cmd->add_option("--raw", dope_opts.raw, "raw corpus file")->required();
  auto* dope_r = dope_cmd->add_option("--ratios", dope_opts.ratios, "doping ratios")
                     ->delimiter(',');
  auto* dope_n =
      dope_cmd->add_option("--n", dope_opts.n, "negatives per dataset (0 = auto)");
  dope_cmd->callback([&] {
    if (global.out.empty()) throw CLI::ValidationError("dope", "--out is required");
    reflect::PipelineConfig cfg = base_config(global.config_path);
    reflect::DopingSchedule schedule = cfg.doping;
    if (*dope_r) schedule.ratios = dope_opts.ratios;
    if (*dope_n) schedule.n_negatives_per_set = dope_opts.n;
    if (seed_opt->count() > 0) schedule.seed = global.seed;
    auto raw = std::make_shared<reflect::Corpus>(
        reflect::load_corpus(dope_opts.raw, reflect::CorpusRole::Raw));
    const auto datasets = reflect::build_perturbed_datasets(raw, schedule);
    write_doped_outputs(datasets, schedule.seed, global.out);
    std::cout << "wrote " << datasets.size() << " doped datasets to " << global.out << "\n";
  });

  // --- train -----------------------------------------------------------------
  auto* train_cmd = app.add_subcommand("train", "train a classifier on a labeled dataset");
  struct {
    std::string data;
    double alpha = 0;
    std::string checkpoint_dir;
    std::uint32_t dimension = 0;
    std::uint32_t epochs = 0;
    std::uint32_t batch = 0;
    double lr = 0;
    double l2 = -1;
    std::uint32_t ckpt_every = 0;
  } train_opts;
  train_cmd->add_option("--data", train_opts.data, "labeled dataset file")->required();
  auto* train_a = train_cmd->add_option("--alpha", train_opts.alpha, "doping ratio tag");
  train_cmd->add_option("--checkpoint-dir", train_opts.checkpoint_dir,
                        "also save every checkpoint here");
  auto* train_d = train_cmd->add_option("--dimension", train_opts.dimension, "feature dimension");
  auto* train_e = train_cmd->add_option("--epochs", train_opts.epochs, "epochs");
  auto* train_b = train_cmd->add_option("--batch", train_opts.batch, "batch size");
  auto* train_lr = train_cmd->add_option("--lr", train_opts.lr, "learning rate");
  auto* train_l2 = train_cmd->add_option("--l2", train_opts.l2, "L2 regularization");
  auto* train_ce =
      train_cmd->add_option("--checkpoint-every", train_opts.ckpt_every, "checkpoint cadence");
  train_cmd->callback([&] {
    if (global.out.empty()) throw CLI::ValidationError("train", "--out is required");
    reflect::PipelineConfig cfg = base_config(global.config_path);
    reflect::TrainConfig tc = cfg.sub_train;
    if (*train_d) tc.dimension = train_opts.dimension;
    if (*train_e) tc.epochs = train_opts.epochs;
    if (*train_b) tc.batch_size = train_opts.batch;
    if (*train_lr) tc.learning_rate = train_opts.lr;
    if (*train_l2) tc.l2 = train_opts.l2;
    if (*train_ce) tc.checkpoint_every = train_opts.ckpt_every;
    if (seed_opt->count() > 0) tc.seed = global.seed;

    std::optional<double> alpha;
    if (*train_a) alpha = train_opts.alpha;
    const reflect::BinaryDataset dataset = reflect::load_labeled_dataset(
        train_opts.data,
        alpha ? reflect::Provenance::DopedPerturbation : reflect::Provenance::RelabeledClean,
        alpha);
    const std::vector<reflect::Model> checkpoints = reflect::train(dataset, tc);
    reflect::save_model(checkpoints.back(), global.out);
    if (!train_opts.checkpoint_dir.empty()) {
      fs::create_directories(train_opts.checkpoint_dir);
      for (const reflect::Model& m : checkpoints) {
        reflect::save_model(m, fs::path(train_opts.checkpoint_dir) /
                                   ("checkpoint_ep" + std::to_string(m.checkpoint_epoch) +
                                    ".rmdl"));
      }
    }
    std::cout << "trained " << checkpoints.size() << " checkpoints; final -> " << global.out
              << "\n";
  });

  // --- search ------------------------------------------------------------------
  auto* search_cmd =
      app.add_subcommand("search", "grid-search the cleaner on an anchor validation set");
  struct {
    std::string val;
    std::vector<std::string> models;
    double gamma = -1;
    double epsilon = -1;
    bool include_checkpoints = false;
    std::vector<std::string> strategies;
  } search_opts;
  search_cmd->add_option("--val", search_opts.val, "anchor validation corpus")->required();
  search_cmd
      ->add_option("--model", search_opts.models,
                   "sub-model file, or comma-separated checkpoint files (repeatable)")
      ->required();
  auto* search_g = search_cmd->add_option("--gamma", search_opts.gamma, "minimum IR");
  auto* search_e = search_cmd->add_option("--epsilon", search_opts.epsilon, "smoothing term");
  search_cmd->add_flag("--include-checkpoints", search_opts.include_checkpoints,
                       "enumerate checkpoint assignments");
  auto* search_s = search_cmd->add_option("--strategies", search_opts.strategies, "sc and/or mv")
                       ->delimiter(',');
  search_cmd->callback([&] {
    if (global.out.empty()) throw CLI::ValidationError("search", "--out is required");
    reflect::PipelineConfig cfg = base_config(global.config_path);
    reflect::SearchConfig sc = cfg.search;
    if (*search_g) sc.gamma = search_opts.gamma;
    if (*search_e) sc.epsilon = search_opts.epsilon;
    if (search_opts.include_checkpoints) sc.include_checkpoints = true;
    if (*search_s) {
      sc.strategies.clear();
      for (const std::string& name : search_opts.strategies) {
        auto strategy = reflect::strategy_from_string(name);
        if (!strategy) throw reflect::DataError("unknown strategy '" + name + "'");
        sc.strategies.push_back(*strategy);
      }
    }

    const reflect::Corpus val =
        reflect::load_corpus(search_opts.val, reflect::CorpusRole::AnchorValidation);
    const reflect::ModelSet models = load_model_set(search_opts.models);
    const reflect::SearchResult result = reflect::grid_search(models, val, sc);

    fs::create_directories(global.out);
    std::ofstream tsv(fs::path(global.out) / "leaderboard.tsv", std::ios::trunc);
    tsv << reflect::leaderboard_tsv(result, models);

    json members = json::array();
    for (const reflect::ConsensusMember& m : result.best.config.members) {
      members.push_back(
          json{{"model", m.model},
               {"checkpoint_epoch", models[m.model].checkpoints[m.checkpoint].checkpoint_epoch},
               {"file", fs::absolute(split_commas(search_opts.models[m.model])[m.checkpoint])
                            .string()}});
    }
    json manifest{{"strategy", std::string(reflect::to_string(result.best.config.strategy))},
                  {"members", members},
                  {"gamma", sc.gamma},
                  {"epsilon", sc.epsilon},
                  {"feasible", result.feasible},
                  {"objective", result.best.objective},
                  {"ir", result.best.metrics.ir},
                  {"fpr", result.best.metrics.fpr}};
    std::ofstream mf(fs::path(global.out) / "cleaner.json", std::ios::trunc);
    mf << manifest.dump(2) << "\n";

    std::cout << (result.feasible ? "best cleaner: " : "INFEASIBLE; max-IR fallback: ")
              << "strategy=" << reflect::to_string(result.best.config.strategy)
              << " objective=" << result.best.objective << " ir=" << result.best.metrics.ir
              << " fpr=" << result.best.metrics.fpr << "\n";
    if (!result.feasible) {
      throw reflect::InfeasibleSearchError("no combination reached IR >= " +
                                           std::to_string(sc.gamma));
    }
  });

  // --- relabel -----------------------------------------------------------------
  auto* relabel_cmd = app.add_subcommand("relabel", "relabel a raw corpus with a saved cleaner");
  struct {
    std::string raw;
    std::string cleaner;
  } relabel_opts;
  relabel_cmd->add_option("--raw", relabel_opts.raw, "raw corpus file")->required();
  relabel_cmd->add_option("--cleaner", relabel_opts.cleaner, "cleaner manifest (cleaner.json)")
      ->required();
  relabel_cmd->callback([&] {
    if (global.out.empty()) throw CLI::ValidationError("relabel", "--out is required");
    std::ifstream in(relabel_opts.cleaner);
    if (!in) throw reflect::DataError("cannot open " + relabel_opts.cleaner);
    json manifest_json;
    try {
      in >> manifest_json;
    } catch (const json::parse_error& e) {
      throw reflect::DataError(relabel_opts.cleaner + ": " + e.what());
    }
    const reflect::CleanerManifest manifest = reflect::cleaner_manifest_from_json(manifest_json);

    const fs::path base = fs::path(relabel_opts.cleaner).parent_path();
    reflect::ModelSet models;
    reflect::ConsensusConfig cleaner;
    cleaner.strategy = manifest.strategy;
    for (std::size_t i = 0; i < manifest.members.size(); ++i) {
      fs::path file = manifest.members[i].file;
      if (file.is_relative()) file = base / file;
      models.push_back(reflect::SubModel{{reflect::load_model(file)}});
      cleaner.members.push_back({i, 0});
    }

    auto raw = std::make_shared<reflect::Corpus>(
        reflect::load_corpus(relabel_opts.raw, reflect::CorpusRole::Raw));
    const reflect::BinaryDataset relabeled = reflect::relabel_corpus(models, cleaner, raw);
    fs::create_directories(global.out);
    reflect::save_labeled_dataset(relabeled, fs::path(global.out) / "relabeled.jsonl");
    const reflect::TransitionMatrix transition = reflect::transition_matrix(relabeled);
    const std::string rendered = reflect::render_transition(transition);
    std::ofstream tout(fs::path(global.out) / "transition.txt", std::ios::trunc);
    tout << rendered;
    std::cout << rendered;
  });

  // --- evaluate ------------------------------------------------------------------
  auto* eval_cmd = app.add_subcommand("evaluate", "evaluate models on a gold corpus");
  struct {
    std::string corpus;
    std::vector<std::string> models;
    std::string strategy = "sc";
  } eval_opts;
  eval_cmd->add_option("--corpus", eval_opts.corpus, "gold-labeled corpus")->required();
  eval_cmd->add_option("--model", eval_opts.models, "model file (repeatable)")->required();
  eval_cmd->add_option("--strategy", eval_opts.strategy, "sc or mv");
  eval_cmd->callback([&] {
    auto strategy = reflect::strategy_from_string(eval_opts.strategy);
    if (!strategy) throw reflect::DataError("unknown strategy '" + eval_opts.strategy + "'");
    const reflect::Corpus corpus =
        reflect::load_corpus(eval_opts.corpus, reflect::CorpusRole::Test);
    const reflect::ModelSet models = load_model_set(eval_opts.models);
    std::vector<std::size_t> indices(models.size());
    for (std::size_t i = 0; i < models.size(); ++i) indices[i] = i;
    const reflect::ConsensusConfig config =
        reflect::final_members(models, indices, *strategy);
    print_metrics(reflect::evaluate(models, config, corpus), std::cout);
  });

  // --- run -----------------------------------------------------------------------
  auto* run_cmd = app.add_subcommand("run", "run the full pipeline end to end");
  run_cmd->callback([&] {
    reflect::PipelineConfig cfg = base_config(global.config_path);
    if (seed_opt->count() > 0) cfg.master_seed = global.seed;
    if (!global.out.empty()) cfg.out_dir = global.out;
    if (cfg.out_dir.empty()) throw CLI::ValidationError("run", "--out is required");
    const reflect::RunReport report = reflect::run_end_to_end(cfg);
    std::cout << reflect::render_report(report);
    std::cout << "\nartifacts: " << cfg.out_dir.string() << "\n";
  });

  // --- report ----------------------------------------------------------------------
  auto* report_cmd = app.add_subcommand("report", "re-render the report of a finished run");
  std::string report_dir;
  report_cmd->add_option("--run", report_dir, "run output directory")->required();
  report_cmd->callback([&] {
    std::ifstream in(fs::path(report_dir) / "report.json");
    if (!in) throw reflect::DataError("cannot open " + report_dir + "/report.json");
    json j;
    try {
      in >> j;
    } catch (const json::parse_error& e) {
      throw reflect::DataError(report_dir + "/report.json: " + e.what());
    }
    std::cout << reflect::render_report(reflect::report_from_json(j));
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const reflect::InfeasibleSearchError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const reflect::DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
