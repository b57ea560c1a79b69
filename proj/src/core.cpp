#include "qemind/core.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <unordered_set>

#include "qemind/io.hpp"
#include "qemind/random.hpp"

namespace qemind {

namespace {

constexpr std::string_view kDatasetHeader = "id\tlang_pair\tsrc\tmt\tlabel";

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
}

std::string line_error(std::size_t line_no, std::string_view what) {
  return "line " + std::to_string(line_no) + ": " + std::string(what);
}

CedLabel label_class(const QESample& s) { return std::get<CedLabel>(s.label); }

}  // namespace

TokenSeq tokenize(std::string_view text) {
  TokenSeq tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    const std::size_t start = i;
    while (i < text.size() && !is_space(text[i])) ++i;
    if (i > start) tokens.emplace_back(text.substr(start, i - start));
  }
  return tokens;
}

std::string join_tokens(const TokenSeq& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

std::string_view to_string(Task task) { return task == Task::DA ? "da" : "ced"; }

Task parse_task(std::string_view text) {
  if (text == "da" || text == "DA") return Task::DA;
  if (text == "ced" || text == "CED") return Task::CED;
  throw Error("unknown task '" + std::string(text) + "' (expected da or ced)");
}

std::string_view to_string(CedLabel label) { return label == CedLabel::ERR ? "ERR" : "NOT"; }

bool is_valid_lang_pair(std::string_view lp) {
  auto lower = [](char c) { return c >= 'a' && c <= 'z'; };
  return lp.size() == 5 && lower(lp[0]) && lower(lp[1]) && lp[2] == '-' && lower(lp[3]) && lower(lp[4]);
}

Dataset parse_dataset(std::istream& in, Task task) {
  Dataset ds;
  ds.task = task;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!header_seen) {
      if (line != kDatasetHeader) throw Error(line_error(line_no, "expected header 'id\\tlang_pair\\tsrc\\tmt\\tlabel'"));
      header_seen = true;
      continue;
    }
    if (line.empty()) continue;
    const auto fields = io::split(line, '\t');
    if (fields.size() != 5) throw Error(line_error(line_no, "expected 5 fields, got " + std::to_string(fields.size())));

    QESample s;
    s.id = std::string(fields[0]);
    if (s.id.empty()) throw Error(line_error(line_no, "empty id"));
    if (!seen.insert(s.id).second) throw Error(line_error(line_no, "duplicate id '" + s.id + "'"));
    if (!is_valid_lang_pair(fields[1])) {
      throw Error(line_error(line_no, "bad lang_pair '" + std::string(fields[1]) + "'"));
    }
    s.lang_pair = std::string(fields[1]);
    s.src = tokenize(fields[2]);
    s.mt = tokenize(fields[3]);
    const std::string_view label = fields[4];
    if (task == Task::CED) {
      if (label == "NOT") {
        s.label = CedLabel::NOT;
      } else if (label == "ERR") {
        s.label = CedLabel::ERR;
      } else {
        throw Error(line_error(line_no, "unparsable CED label '" + std::string(label) + "'"));
      }
    } else {
      double value = 0;
      if (!io::parse_double(label, value) || !std::isfinite(value)) {
        throw Error(line_error(line_no, "unparsable DA label '" + std::string(label) + "'"));
      }
      s.label = value;
    }
    ds.samples.push_back(std::move(s));
  }
  if (!header_seen) throw Error("empty dataset file: missing header");
  if (ds.samples.empty()) throw Error("dataset has no rows after the header");
  return ds;
}

Dataset load_dataset(const std::filesystem::path& path, Task task) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open dataset " + path.string());
  try {
    return parse_dataset(in, task);
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

Task detect_task(const std::filesystem::path& path) {
  std::istringstream in(io::read_file(path));
  std::string line;
  std::getline(in, line);
  bool any = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = io::split(line, '\t');
    if (fields.size() != 5) continue;
    any = true;
    if (fields[4] != "NOT" && fields[4] != "ERR") return Task::DA;
  }
  return any ? Task::CED : Task::DA;
}

void write_dataset(const Dataset& ds, std::ostream& out) {
  out << kDatasetHeader << '\n';
  for (const auto& s : ds.samples) {
    out << s.id << '\t' << s.lang_pair << '\t' << join_tokens(s.src) << '\t' << join_tokens(s.mt) << '\t';
    if (const auto* v = std::get_if<double>(&s.label)) {
      out << io::format_shortest(*v);
    } else {
      out << to_string(std::get<CedLabel>(s.label));
    }
    out << '\n';
  }
}

void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
  std::ostringstream out;
  write_dataset(ds, out);
  io::write_file_atomic(path, out.str());
}

Dataset upsample_minority(const Dataset& ds, std::uint64_t seed) {
  if (ds.task != Task::CED) throw Error("upsample_minority requires a CED dataset");

  // Language pairs in order of first appearance.
  std::vector<std::string> pairs;
  std::map<std::string, std::vector<std::size_t>, std::less<>> by_pair;
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    auto& idx = by_pair[ds.samples[i].lang_pair];
    if (idx.empty()) pairs.push_back(ds.samples[i].lang_pair);
    idx.push_back(i);
  }

  Dataset out = ds;
  auto duplicate = [&](std::size_t i, std::size_t copy_no) {
    QESample s = ds.samples[i];
    s.id += "#up" + std::to_string(copy_no);
    out.samples.push_back(std::move(s));
  };

  for (const auto& pair : pairs) {
    std::vector<std::size_t> errs, nots;
    for (std::size_t i : by_pair[pair]) (label_class(ds.samples[i]) == CedLabel::ERR ? errs : nots).push_back(i);
    if (errs.empty() || nots.empty()) {
      throw Error("language pair " + pair + " has only one class; cannot balance");
    }
    if (errs.size() == nots.size()) continue;
    const auto& minority = errs.size() < nots.size() ? errs : nots;
    const std::size_t majority = std::max(errs.size(), nots.size());
    const std::size_t factor = majority / minority.size();
    const std::size_t remainder = majority % minority.size();

    for (std::size_t rep = 1; rep < factor; ++rep) {
      for (std::size_t i : minority) duplicate(i, rep);
    }
    if (remainder > 0) {
      // Partial Fisher-Yates: first `remainder` slots are a uniform draw without replacement.
      SplitMix64 rng(derive_seed(seed, fnv1a64(pair), SeedPurpose::Upsample));
      std::vector<std::size_t> pool = minority;
      for (std::size_t k = 0; k < remainder; ++k) {
        const std::size_t j = k + rng.index(pool.size() - k);
        std::swap(pool[k], pool[j]);
      }
      pool.resize(remainder);
      std::sort(pool.begin(), pool.end());
      for (std::size_t i : pool) duplicate(i, factor);
    }
  }
  return out;
}

MixStrategy parse_mix_strategy(std::string_view text) {
  if (text == "as-is") return MixStrategy::AsIs;
  if (text == "english-first") return MixStrategy::EnglishFirst;
  throw Error("unknown mix strategy '" + std::string(text) + "' (expected as-is or english-first)");
}

Dataset mix_multilingual(std::span<const Dataset> datasets, MixStrategy strategy) {
  if (datasets.empty()) throw Error("mix_multilingual needs at least one dataset");
  Dataset out;
  out.task = datasets.front().task;
  std::unordered_set<std::string> seen;
  for (const auto& ds : datasets) {
    if (ds.task != out.task) throw Error("cannot mix datasets of different tasks");
    for (const auto& s : ds.samples) {
      if (!seen.insert(s.id).second) throw Error("duplicate id '" + s.id + "' across mixed datasets");
      QESample copy = s;
      if (strategy == MixStrategy::EnglishFirst) {
        const std::string_view lp = s.lang_pair;
        if (lp.substr(0, 2) != "en") {
          if (lp.substr(3, 2) != "en") throw Error("language pair " + s.lang_pair + " has no English side");
          std::swap(copy.src, copy.mt);
          copy.lang_pair = std::string(lp.substr(3, 2)) + "-" + std::string(lp.substr(0, 2));
        }
      }
      out.samples.push_back(std::move(copy));
    }
  }
  return out;
}

}  // namespace qemind
