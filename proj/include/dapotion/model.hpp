#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dapotion/encoder.hpp"
#include "dapotion/network.hpp"

namespace dapotion {

using nn::ClassifierConfig;

/// Per-class probabilities.
using ScoreVector = std::vector<double>;

/// Shape of the descriptors a model consumes.
struct DescriptorLayout {
  Scheme scheme = Scheme::kNUI;
  int num_joints = 0;
  int num_colors = 0;
  Dims3 dims;

  friend bool operator==(const DescriptorLayout&, const DescriptorLayout&) = default;
};

DescriptorLayout layout_of(const DAPotion& d);

struct Model {
  ClassifierConfig config;
  DescriptorLayout layout;
  std::vector<std::string> class_names;
  nn::Network<float> net;

  Model(ClassifierConfig cfg, DescriptorLayout layout, std::vector<std::string> class_names);
};

/// Xavier-initialized model; deterministic in `seed`.
Model init_model(const ClassifierConfig& cfg, const DescriptorLayout& layout,
                 std::vector<std::string> class_names, std::uint64_t seed);

/// Packs descriptor volumes into a (batch, channels, W, H, D) tensor.
nn::Tensor5<float> make_batch(std::span<const ChannelVolume* const> volumes);

/// Eval-mode forward pass on a batch of one.
ScoreVector predict(Model& model, const DAPotion& descriptor);

/// Index of the largest probability, lowest index on ties.
int argmax(std::span<const double> scores);

inline constexpr std::uint16_t kCheckpointVersion = 1;

/// Layout (little-endian):
///   "DAPM" | u16 version | config | descriptor layout | class names |
///   u32 blob count | manifest: (str16 name, u8 rank, u32 dims...)* |
///   f32 blob data in manifest order | u64 FNV-1a of all preceding bytes
std::vector<std::uint8_t> encode_checkpoint(Model& model);
Model decode_checkpoint(std::span<const std::uint8_t> bytes);

void write_checkpoint(const std::filesystem::path& path, Model& model);
Model read_checkpoint(const std::filesystem::path& path);

}  // namespace dapotion
