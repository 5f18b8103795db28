#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "dapotion/pose_io.hpp"
#include "dapotion/rng.hpp"

namespace dapotion::synth {

/// Synthetic motion classes. The *_xz variants share their partner's (x, y)
/// path exactly and add motion along depth only.
enum class MotionClass { kCircleXY, kCircleXZ, kLineX, kLineZ, kZigzagXY, kZigzagXZ };

std::string_view class_name(MotionClass c);
MotionClass parse_class(std::string_view name);  // throws Error on unknown names
const std::vector<MotionClass>& all_classes();

struct SynthSpec {
  MotionClass motion = MotionClass::kCircleXY;
  int num_frames = 24;
  int num_joints = 4;
  double amplitude = 60.0;
  double noise_std = 2.0;
  std::uint64_t seed = 0;
};

void validate(const SynthSpec& spec);

/// Deterministic in `spec.seed`. Coordinates are emitted in the image frame of
/// a 256 x 256 image and clipped into [0, 256).
PoseSequence generate_clip(const SynthSpec& spec);

struct DatasetManifests {
  std::vector<ManifestRecord> train;
  std::vector<ManifestRecord> test;
};

/// Writes `<out_dir>/clips/*.json`, `<out_dir>/train.txt` and `<out_dir>/test.txt`.
/// Each template contributes `n_per_class` clips; round(n_per_class * split)
/// of them land in the train split.
DatasetManifests generate_dataset(const std::vector<SynthSpec>& templates, int n_per_class,
                                  double split, std::uint64_t seed,
                                  const std::filesystem::path& out_dir);

}  // namespace dapotion::synth
