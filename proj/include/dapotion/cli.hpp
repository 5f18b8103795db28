#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dapotion/augment.hpp"
#include "dapotion/descriptor_io.hpp"
#include "dapotion/encoder.hpp"
#include "dapotion/network.hpp"
#include "dapotion/synth.hpp"

namespace dapotion::cli {

/// Usage problems: unknown flags, missing paths, bad values, or a help request
/// (exit_code 0).
class CliError : public Error {
 public:
  CliError(int exit_code, std::string text) : Error(text), exit_code(exit_code), text(std::move(text)) {}
  int exit_code;
  std::string text;
};

struct RunConfig {
  std::string subcommand;  // synth-gen, encode, train, eval, predict, fuse, render-slices
  std::uint64_t seed = 0;
  int workers = 1;

  std::filesystem::path manifest;
  std::filesystem::path val_manifest;
  std::filesystem::path out;
  std::filesystem::path model;
  std::filesystem::path input;
  std::filesystem::path history;
  std::vector<std::filesystem::path> score_files;
  std::vector<double> weights;

  EncoderConfig encoder;
  nn::ClassifierConfig classifier;
  AugmentConfig augment;  // max_translation < 0: scale with the grid width
  std::vector<std::pair<int, int>> mirror_pairs;

  synth::SynthSpec synth;
  std::vector<synth::MotionClass> classes;
  int n_per_class = 20;
  double split = 0.8;

  std::vector<int> depth_indices;
  SliceSelection slice;
};

/// Fully resolved configuration with defaults applied. Throws CliError.
RunConfig parse_args(const std::vector<std::string>& args);
RunConfig parse_args(int argc, const char* const* argv);

/// Executes the subcommand. Prints a one-line JSON summary to `out` and
/// diagnostics to `err`; returns the process exit status.
int run(const RunConfig& config, std::ostream& out, std::ostream& err);

}  // namespace dapotion::cli
