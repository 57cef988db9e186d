// SPDX-License-Identifier: Apache-2.0
//
// JSONL readers and writers for corpora and labeled datasets. Writers are
// canonical (fixed key order, no extra whitespace) so equal corpora always
// produce identical bytes.

#include <fstream>
#include <memory>
#include <string>
#include <unordered_map>

#include <json.hpp>

#include "reflect/corpus.hpp"
#include "reflect/errors.hpp"

namespace reflect {

namespace {

using nlohmann::json;

[[noreturn]] void line_error(const std::filesystem::path& path, std::size_t line_no,
                             const std::string& what) {
  throw DataError(path.string() + ", line " + std::to_string(line_no) + ": " + what);
}

struct ParsedLine {
  FeedbackSample sample;
  std::optional<int> label;
};

ParsedLine parse_line(const std::filesystem::path& path, std::size_t line_no,
                      const std::string& line, bool expect_label) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    line_error(path, line_no, std::string("malformed JSON: ") + e.what());
  }
  if (!j.is_object()) line_error(path, line_no, "record is not a JSON object");

  ParsedLine out;
  bool have_id = false, have_diff = false, have_comment = false, have_feedback = false;
  for (const auto& [key, value] : j.items()) {
    if (key == "id") {
      if (!value.is_string()) line_error(path, line_no, "id must be a string");
      out.sample.id = value.get<std::string>();
      have_id = true;
    } else if (key == "diff") {
      if (!value.is_string()) line_error(path, line_no, "diff must be a string");
      out.sample.diff = value.get<std::string>();
      have_diff = true;
    } else if (key == "comment") {
      if (!value.is_string()) line_error(path, line_no, "comment must be a string");
      out.sample.comment = value.get<std::string>();
      have_comment = true;
    } else if (key == "feedback") {
      if (!value.is_string()) line_error(path, line_no, "feedback must be a string");
      auto f = feedback_from_string(value.get<std::string>());
      if (!f) {
        line_error(path, line_no,
                   "feedback must be one of accept|reject|ignore, got '" +
                       value.get<std::string>() + "'");
      }
      out.sample.feedback = *f;
      have_feedback = true;
    } else if (key == "gold") {
      if (!value.is_number_integer() && !value.is_number_unsigned()) {
        line_error(path, line_no, "gold must be an integer 0 or 1");
      }
      const auto g = value.get<long long>();
      if (g != 0 && g != 1) line_error(path, line_no, "gold must be 0 or 1");
      out.sample.gold = static_cast<int>(g);
    } else if (key == "label" && expect_label) {
      if (!value.is_number_integer() && !value.is_number_unsigned()) {
        line_error(path, line_no, "label must be an integer 0 or 1");
      }
      const auto l = value.get<long long>();
      if (l != 0 && l != 1) line_error(path, line_no, "label must be 0 or 1");
      out.label = static_cast<int>(l);
    } else {
      line_error(path, line_no, "unknown key '" + key + "'");
    }
  }
  if (!have_id) line_error(path, line_no, "missing required field 'id'");
  if (!have_diff) line_error(path, line_no, "missing required field 'diff'");
  if (!have_comment) line_error(path, line_no, "missing required field 'comment'");
  if (!have_feedback) line_error(path, line_no, "missing required field 'feedback'");
  if (expect_label && !out.label) line_error(path, line_no, "missing required field 'label'");
  if (out.sample.diff.empty()) line_error(path, line_no, "diff must be non-empty");
  if (out.sample.comment.empty()) line_error(path, line_no, "comment must be non-empty");
  return out;
}

std::string encode_line(const FeedbackSample& s, std::optional<int> label) {
  std::string out = "{\"id\":";
  out += json(s.id).dump();
  out += ",\"diff\":";
  out += json(s.diff).dump();
  out += ",\"comment\":";
  out += json(s.comment).dump();
  out += ",\"feedback\":\"";
  out += to_string(s.feedback);
  out += '"';
  if (s.gold) {
    out += ",\"gold\":";
    out += std::to_string(*s.gold);
  }
  if (label) {
    out += ",\"label\":";
    out += std::to_string(*label);
  }
  out += '}';
  return out;
}

struct LoadedFile {
  std::vector<FeedbackSample> samples;
  std::vector<int> labels;  // parallel to samples when expect_label
};

LoadedFile load_lines(const std::filesystem::path& path, bool expect_label) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());

  LoadedFile out;
  std::string line;
  std::size_t line_no = 0;
  std::unordered_map<std::string, std::size_t> seen;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) {
      // Only a trailing final newline may leave an empty read at EOF.
      if (in.peek() == std::char_traits<char>::eof()) break;
      line_error(path, line_no, "empty line");
    }
    ParsedLine parsed = parse_line(path, line_no, line, expect_label);
    auto [it, inserted] = seen.emplace(parsed.sample.id, line_no);
    if (!inserted) {
      line_error(path, line_no,
                 "duplicate id '" + parsed.sample.id + "' (first seen on line " +
                     std::to_string(it->second) + ")");
    }
    out.samples.push_back(std::move(parsed.sample));
    if (expect_label) out.labels.push_back(*parsed.label);
  }
  return out;
}

}  // namespace

Corpus load_corpus(const std::filesystem::path& path, CorpusRole role) {
  LoadedFile loaded = load_lines(path, /*expect_label=*/false);
  try {
    return Corpus(std::move(loaded.samples), role);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  for (const FeedbackSample& s : corpus) {
    out << encode_line(s, std::nullopt) << '\n';
  }
  out.flush();
  if (!out) throw DataError("write failed for " + path.string());
}

BinaryDataset load_labeled_dataset(const std::filesystem::path& path, Provenance provenance,
                                   std::optional<double> alpha) {
  LoadedFile loaded = load_lines(path, /*expect_label=*/true);
  std::vector<LabeledItem> items;
  items.reserve(loaded.samples.size());
  for (std::size_t i = 0; i < loaded.samples.size(); ++i) {
    items.push_back({i, loaded.labels[i]});
  }
  std::shared_ptr<const Corpus> source;
  try {
    source = std::make_shared<Corpus>(std::move(loaded.samples), CorpusRole::Training);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return BinaryDataset(std::move(source), std::move(items), provenance, alpha);
}

void save_labeled_dataset(const BinaryDataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    out << encode_line(dataset.sample(i), dataset.label(i)) << '\n';
  }
  out.flush();
  if (!out) throw DataError("write failed for " + path.string());
}

}  // namespace reflect
