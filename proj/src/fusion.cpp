#include "dapotion/fusion.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <numeric>

namespace dapotion {

void validate(const ScoreSet& set) {
  const std::size_t k = set.class_names.size();
  if (k == 0) throw Error("score set '" + set.model_name + "' has no classes");
  for (const auto& [id, v] : set.scores) {
    if (v.size() != k) throw Error("clip '" + id + "' has " + std::to_string(v.size()) + " scores, expected " + std::to_string(k));
    double sum = 0;
    for (double p : v) {
      if (!(p >= 0) || !std::isfinite(p)) throw Error("clip '" + id + "' has a negative or non-finite score");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-6) throw Error("scores of clip '" + id + "' do not sum to 1");
  }
}

ScoreSet fuse_scores(std::span<const ScoreSet> sets, std::span<const double> weights) {
  if (sets.empty()) throw Error("nothing to fuse");
  std::vector<double> w(weights.begin(), weights.end());
  if (w.empty()) w.assign(sets.size(), 1.0);
  if (w.size() != sets.size()) throw Error("weight count does not match the number of score sets");
  double total = 0;
  for (double x : w) {
    if (!(x >= 0) || !std::isfinite(x)) throw Error("weights must be nonnegative");
    total += x;
  }
  if (!(total > 0)) throw Error("all fusion weights are zero");
  for (double& x : w) x /= total;
  for (const ScoreSet& s : sets) {
    if (s.class_names != sets.front().class_names)
      throw Error("class lists differ between '" + sets.front().model_name + "' and '" + s.model_name + "'");
    validate(s);
  }

  ScoreSet out;
  out.model_name = "fused";
  out.class_names = sets.front().class_names;
  const std::size_t k = out.class_names.size();
  // Contributions are summed in a canonical order so the result does not
  // depend on the order of the input sets.
  std::vector<std::pair<double, const ScoreVector*>> terms;
  for (const auto& [id, first] : sets.front().scores) {
    terms.clear();
    bool everywhere = true;
    for (std::size_t i = 0; i < sets.size() && everywhere; ++i) {
      auto it = sets[i].scores.find(id);
      if (it == sets[i].scores.end()) everywhere = false;
      else terms.emplace_back(w[i], &it->second);
    }
    if (!everywhere) continue;
    std::sort(terms.begin(), terms.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first < b.first;
      return *a.second < *b.second;
    });
    ScoreVector fused(k, 0.0);
    for (const auto& [wi, v] : terms)
      for (std::size_t c = 0; c < k; ++c) fused[c] += wi * (*v)[c];
    out.scores.emplace(id, std::move(fused));
  }
  if (out.scores.empty()) throw Error("no clip is present in every score set");
  return out;
}

Evaluation evaluate(const ScoreSet& scores, const std::map<std::string, std::string>& labels) {
  const std::size_t k = scores.class_names.size();
  if (scores.scores.empty()) throw Error("no scores to evaluate");
  Evaluation ev;
  ev.counts.assign(k, std::vector<std::size_t>(k, 0));
  std::size_t hits = 0;
  for (const auto& [id, v] : scores.scores) {
    auto it = labels.find(id);
    if (it == labels.end()) throw Error("missing label for clip '" + id + "'");
    auto cls = std::find(scores.class_names.begin(), scores.class_names.end(), it->second);
    if (cls == scores.class_names.end()) throw Error("label '" + it->second + "' of clip '" + id + "' is not a known class");
    const auto truth = static_cast<std::size_t>(cls - scores.class_names.begin());
    const auto pred = static_cast<std::size_t>(argmax(v));
    ++ev.counts[truth][pred];
    if (truth == pred) ++hits;
  }
  ev.total = scores.scores.size();
  ev.accuracy = static_cast<double>(hits) / static_cast<double>(ev.total);
  ev.confusion.assign(k, std::vector<double>(k, 0.0));
  for (std::size_t r = 0; r < k; ++r) {
    const std::size_t row = std::accumulate(ev.counts[r].begin(), ev.counts[r].end(), std::size_t{0});
    if (row == 0) continue;
    for (std::size_t c = 0; c < k; ++c) ev.confusion[r][c] = static_cast<double>(ev.counts[r][c]) / static_cast<double>(row);
  }
  return ev;
}

std::map<std::string, std::string> labels_from_manifest(const std::vector<ManifestRecord>& records) {
  std::map<std::string, std::string> out;
  for (const auto& r : records) {
    auto [it, inserted] = out.emplace(clip_id(r.path), r.label);
    if (!inserted) throw Error("duplicate clip id '" + it->first + "' in manifest");
  }
  return out;
}

std::string format_score_file(const ScoreSet& set) {
  std::string out = "clip_id";
  for (const auto& c : set.class_names) out += "\t" + c;
  out += "\n";
  char buf[40];
  for (const auto& [id, v] : set.scores) {
    out += id;
    for (double p : v) {
      std::snprintf(buf, sizeof buf, "\t%.17g", p);
      out += buf;
    }
    out += "\n";
  }
  return out;
}

ScoreSet parse_score_file(std::string_view text, std::string model_name) {
  ScoreSet set;
  set.model_name = std::move(model_name);
  const auto lines = split(text, '\n');
  bool header = true;
  int line_no = 0;
  for (const std::string& raw : lines) {
    ++line_no;
    std::string_view line = raw;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    const auto fields = split(line, '\t');
    if (header) {
      if (fields.size() < 2) throw ParseError("score file header must list at least one class");
      set.class_names.assign(fields.begin() + 1, fields.end());
      header = false;
      continue;
    }
    if (fields.size() != set.class_names.size() + 1)
      throw ParseError("score file line " + std::to_string(line_no) + " has the wrong number of fields");
    ScoreVector v;
    for (std::size_t i = 1; i < fields.size(); ++i) {
      const std::string& f = fields[i];
      double p = 0;
      auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), p);
      if (ec != std::errc() || ptr != f.data() + f.size())
        throw ParseError("score file line " + std::to_string(line_no) + ": bad number '" + f + "'");
      v.push_back(p);
    }
    if (!set.scores.emplace(fields[0], std::move(v)).second)
      throw ParseError("duplicate clip id '" + fields[0] + "' in score file");
  }
  if (header) throw ParseError("score file is empty");
  validate(set);
  return set;
}

ScoreSet read_score_file(const std::filesystem::path& path) {
  try {
    return parse_score_file(read_file_text(path), path.stem().string());
  } catch (const Error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void write_score_file(const std::filesystem::path& path, const ScoreSet& set) {
  write_file_atomic(path, format_score_file(set));
}

}  // namespace dapotion
