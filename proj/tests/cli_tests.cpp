// SPDX-License-Identifier: Apache-2.0
//
// Drives the installed CLI binary end to end through std::system. The
// binary path comes in via REFLECT_CLI_PATH at compile time.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <string>

#include <json.hpp>

#include "reflect/corpus.hpp"
#include "test_util.hpp"

using nlohmann::json;
using testutil::TempDir;

namespace {

int run_cli(const std::string& args, const std::string& stdout_file = "/dev/null") {
  const std::string cmd =
      std::string("\"") + REFLECT_CLI_PATH + "\" " + args + " > \"" + stdout_file + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  REQUIRE(status != -1);
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

std::string q(const std::filesystem::path& p) { return "\"" + p.string() + "\""; }

// Two separable samples; a model trained on them predicts A -> 1, B -> 0.
const char* kSeparableTraining =
    R"({"id":"pos","diff":"alpha beta gamma","comment":"solid useful fix","feedback":"accept","label":1}
{"id":"neg","diff":"delta epsilon zeta","comment":"wrong noisy trivia","feedback":"reject","label":0}
)";

// Validation set where that model scores IR = 0.5, FPR = 0.5.
const char* kHalfRightVal =
    R"({"id":"a1","diff":"alpha beta gamma","comment":"solid useful fix","feedback":"accept","gold":1}
{"id":"b1","diff":"delta epsilon zeta","comment":"wrong noisy trivia","feedback":"reject","gold":0}
{"id":"a0","diff":"alpha beta gamma","comment":"solid useful fix","feedback":"ignore","gold":0}
{"id":"b0","diff":"delta epsilon zeta","comment":"wrong noisy trivia","feedback":"ignore","gold":1}
)";

}  // namespace

TEST_CASE("usage errors exit 1") {
  CHECK(run_cli("--definitely-not-a-flag") == 1);
  CHECK(run_cli("") == 1);                      // missing subcommand
  CHECK(run_cli("train --out x.rmdl") == 1);    // missing required --data
  CHECK(run_cli("--help") == 0);
}

TEST_CASE("data errors exit 2") {
  TempDir tmp("cli");
  CHECK(run_cli("train --data " + q(tmp.file("missing.jsonl")) + " --out " +
                q(tmp.file("m.rmdl"))) == 2);

  write_file(tmp.file("bad.jsonl"), "this is not json\n");
  CHECK(run_cli("dope --raw " + q(tmp.file("bad.jsonl")) + " --out " + q(tmp.file("d"))) == 2);
}

TEST_CASE("synth then dope then train then search then relabel chain") {
  TempDir tmp("cli");

  CHECK(run_cli("synth --out " + q(tmp.file("raw.jsonl")) +
                " --n 900 --seed 5 --vocab 300 --tokens 10") == 0);
  const reflect::Corpus raw = reflect::load_corpus(tmp.file("raw.jsonl"), reflect::CorpusRole::Raw);
  CHECK(raw.size() == 900);

  CHECK(run_cli("dope --raw " + q(tmp.file("raw.jsonl")) + " --out " + q(tmp.file("doped")) +
                " --n 50 --ratios 0,0.3 --seed 2") == 0);
  CHECK(std::filesystem::exists(tmp.file("doped") / "doped_0.jsonl"));
  CHECK(std::filesystem::exists(tmp.file("doped") / "doped_1.jsonl"));
  const json manifest = json::parse(read_file(tmp.file("doped") / "manifest.json"));
  CHECK(manifest.at("datasets").size() == 2);
  CHECK(manifest.at("datasets")[1].at("ignore_positives") == 15);

  for (int k = 0; k < 2; ++k) {
    CHECK(run_cli("train --data " + q(tmp.file("doped") / ("doped_" + std::to_string(k) + ".jsonl")) +
                  " --out " + q(tmp.file("m" + std::to_string(k) + ".rmdl")) + " --alpha " +
                  (k == 0 ? "0.0" : "0.3") +
                  " --dimension 4096 --epochs 2 --batch 64 --seed 3") == 0);
  }

  CHECK(run_cli("synth --out " + q(tmp.file("val.jsonl")) +
                " --n 80 --seed 6 --vocab 300 --tokens 10") == 0);

  CHECK(run_cli("search --val " + q(tmp.file("val.jsonl")) + " --model " + q(tmp.file("m0.rmdl")) +
                " --model " + q(tmp.file("m1.rmdl")) + " --gamma 0 --out " +
                q(tmp.file("search"))) == 0);
  CHECK(std::filesystem::exists(tmp.file("search") / "leaderboard.tsv"));
  const json cleaner = json::parse(read_file(tmp.file("search") / "cleaner.json"));
  CHECK(cleaner.at("feasible") == true);

  CHECK(run_cli("relabel --raw " + q(tmp.file("raw.jsonl")) + " --cleaner " +
                q(tmp.file("search") / "cleaner.json") + " --out " + q(tmp.file("relabel"))) == 0);
  const reflect::BinaryDataset relabeled =
      reflect::load_labeled_dataset(tmp.file("relabel") / "relabeled.jsonl");
  CHECK(relabeled.size() == 900);

  const auto metrics_out = tmp.file("eval.txt");
  CHECK(run_cli("evaluate --corpus " + q(tmp.file("val.jsonl")) + " --model " +
                q(tmp.file("m0.rmdl")),
                metrics_out.string()) == 0);
  const std::string metrics = read_file(metrics_out);
  CHECK(metrics.find("ir=") != std::string::npos);
  CHECK(metrics.find("pie=") != std::string::npos);
}

TEST_CASE("infeasible search exits 3 but still writes the leaderboard") {
  TempDir tmp("cli");
  write_file(tmp.file("train.jsonl"), kSeparableTraining);
  write_file(tmp.file("val.jsonl"), kHalfRightVal);

  CHECK(run_cli("train --data " + q(tmp.file("train.jsonl")) + " --out " + q(tmp.file("m.rmdl")) +
                " --dimension 1024 --epochs 300 --batch 2 --lr 0.5 --seed 1") == 0);

  CHECK(run_cli("search --val " + q(tmp.file("val.jsonl")) + " --model " + q(tmp.file("m.rmdl")) +
                " --gamma 0.9 --out " + q(tmp.file("search"))) == 3);
  CHECK(std::filesystem::exists(tmp.file("search") / "leaderboard.tsv"));
  const json cleaner = json::parse(read_file(tmp.file("search") / "cleaner.json"));
  CHECK(cleaner.at("feasible") == false);

  CHECK(run_cli("search --val " + q(tmp.file("val.jsonl")) + " --model " + q(tmp.file("m.rmdl")) +
                " --gamma 0.4 --out " + q(tmp.file("search_ok"))) == 0);
}

TEST_CASE("run executes a tiny config end to end and report re-renders") {
  TempDir tmp("cli");
  const json config{
      {"data",
       {{"mode", "synth"},
        {"synth",
         {{"n_samples", 4400}, {"vocab_size", 400}, {"tokens_per_field", 16},
          {"class_signal_strength", 0.45}, {"gold_pool_size", 400}, {"raw_per_class", 400},
          {"anchor_size", 40}, {"test_size", 200}}}}},
      {"train", {{"dimension", 16384}, {"epochs", 30}, {"batch_size", 128}}},
      {"final_train", {{"dimension", 16384}, {"epochs", 30}, {"batch_size", 128}}}};
  write_file(tmp.file("config.json"), config.dump(2));

  const auto out = tmp.file("run_out.txt");
  CHECK(run_cli("run --config " + q(tmp.file("config.json")) + " --seed 4 --out " +
                q(tmp.file("run")),
                out.string()) == 0);
  CHECK(read_file(out).find("test metrics") != std::string::npos);
  CHECK(std::filesystem::exists(tmp.file("run") / "report.json"));

  const auto rendered = tmp.file("report_out.txt");
  CHECK(run_cli("report --run " + q(tmp.file("run")), rendered.string()) == 0);
  CHECK(read_file(rendered).find("selected cleaner") != std::string::npos);
}
