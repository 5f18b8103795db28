#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "dapotion/model.hpp"

namespace dapotion {

/// Per-clip probability vectors from one model, keyed by clip id.
struct ScoreSet {
  std::string model_name;
  std::vector<std::string> class_names;
  std::map<std::string, ScoreVector> scores;
};

/// Throws unless every vector has one nonnegative entry per class summing to
/// 1 within 1e-6.
void validate(const ScoreSet& set);

/// Weighted average per clip over the clips present in every set. Weights are
/// renormalized to sum to one; an empty weight list means equal weights.
ScoreSet fuse_scores(std::span<const ScoreSet> sets, std::span<const double> weights = {});

struct Evaluation {
  double accuracy = 0;
  std::size_t total = 0;
  std::vector<std::vector<std::size_t>> counts;  // [true][predicted]
  std::vector<std::vector<double>> confusion;    // counts, row-normalized
};

/// Argmax predictions (lowest class index on ties) against clip labels given
/// by class name.
Evaluation evaluate(const ScoreSet& scores, const std::map<std::string, std::string>& labels);

/// Clip id -> label from a manifest.
std::map<std::string, std::string> labels_from_manifest(const std::vector<ManifestRecord>& records);

/// Score file: a header line `clip_id<TAB>class...`, then one
/// `id<TAB>p...` line per clip.
std::string format_score_file(const ScoreSet& set);
ScoreSet parse_score_file(std::string_view text, std::string model_name = {});
ScoreSet read_score_file(const std::filesystem::path& path);
void write_score_file(const std::filesystem::path& path, const ScoreSet& set);

}  // namespace dapotion
