#include "dapotion/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <cstdio>

namespace dapotion::synth {

namespace {

constexpr std::array<std::pair<MotionClass, std::string_view>, 6> kNames{{
    {MotionClass::kCircleXY, "circle_xy"},
    {MotionClass::kCircleXZ, "circle_xz"},
    {MotionClass::kLineX, "line_x"},
    {MotionClass::kLineZ, "line_z"},
    {MotionClass::kZigzagXY, "zigzag_xy"},
    {MotionClass::kZigzagXZ, "zigzag_xz"},
}};

constexpr double kImageSize = 256.0;
constexpr double kUpper = 255.99;
constexpr int kZigzagPeriods = 3;

// Triangle wave with period 1 and range [-1, 1].
double triangle(double u) {
  double f = u - std::floor(u);
  return f < 0.5 ? 4.0 * f - 1.0 : 3.0 - 4.0 * f;
}

}  // namespace

std::string_view class_name(MotionClass c) {
  for (const auto& [k, n] : kNames)
    if (k == c) return n;
  throw Error("unknown motion class");
}

MotionClass parse_class(std::string_view name) {
  for (const auto& [k, n] : kNames)
    if (n == name) return k;
  throw Error("unknown class id '" + std::string(name) + "'");
}

const std::vector<MotionClass>& all_classes() {
  static const std::vector<MotionClass> v = [] {
    std::vector<MotionClass> out;
    for (const auto& kn : kNames) out.push_back(kn.first);
    return out;
  }();
  return v;
}

void validate(const SynthSpec& s) {
  if (s.num_frames < 2) throw Error("synthetic clips need at least 2 frames");
  if (s.num_joints < 1) throw Error("synthetic clips need at least 1 joint");
  if (!(s.amplitude > 0)) throw Error("amplitude must be positive");
  if (!(s.noise_std >= 0)) throw Error("noise_std must be non-negative");
}

PoseSequence generate_clip(const SynthSpec& spec) {
  validate(spec);
  const double two_pi = 2.0 * std::numbers::pi;
  Rng rng(spec.seed);

  // Every class consumes the generator identically so that depth pairs with
  // equal seeds share their (x, y) path.
  const double scale = 0.8 + 0.4 * rng.uniform();
  const double amp = spec.amplitude * scale;
  const double margin = std::min(1.3 * amp + 3.0 * spec.noise_std, kImageSize / 2.0);
  auto centre = [&] { return margin + (kImageSize - 2.0 * margin) * rng.uniform(); };
  const double cx = centre(), cy = centre(), cz = centre();
  const double phase = two_pi * rng.uniform();
  const double dir = rng.uniform() < 0.5 ? -1.0 : 1.0;

  std::vector<Vec3> joint_offsets(spec.num_joints);
  for (Vec3& o : joint_offsets) {
    o.x = 0.3 * amp * (2.0 * rng.uniform() - 1.0);
    o.y = 0.3 * amp * (2.0 * rng.uniform() - 1.0);
    o.z = 0.3 * amp * (2.0 * rng.uniform() - 1.0);
  }

  PoseSequence p;
  p.num_frames = spec.num_frames;
  p.num_joints = spec.num_joints;
  p.image_size = {kImageSize, kImageSize};
  p.frame = CoordinateFrame::kImage;
  p.label = std::string(class_name(spec.motion));
  for (int j = 0; j < spec.num_joints; ++j) p.joint_names.push_back("joint" + std::to_string(j));
  p.positions.resize(static_cast<std::size_t>(spec.num_frames) * spec.num_joints);

  const bool depth_variant = spec.motion == MotionClass::kCircleXZ || spec.motion == MotionClass::kZigzagXZ;
  for (int t = 0; t < spec.num_frames; ++t) {
    const double u = static_cast<double>(t) / (spec.num_frames - 1);
    for (int j = 0; j < spec.num_joints; ++j) {
      const double jp = j * std::numbers::pi / 8.0;
      const double theta = phase + dir * two_pi * u + jp;
      const double sweep = dir * (2.0 * u - 1.0);
      double dx = 0, dy = 0, dz = 0;
      switch (spec.motion) {
        case MotionClass::kCircleXY:
        case MotionClass::kCircleXZ:
          dx = amp * std::cos(theta);
          dy = amp * std::sin(theta);
          if (depth_variant) dz = amp * std::sin(theta);
          break;
        case MotionClass::kLineX:
          dx = amp * sweep;
          break;
        case MotionClass::kLineZ:
          dz = amp * sweep;
          break;
        case MotionClass::kZigzagXY:
        case MotionClass::kZigzagXZ: {
          const double zig = 0.5 * amp * triangle(kZigzagPeriods * u + phase / two_pi + jp / two_pi);
          dx = amp * sweep;
          dy = zig;
          if (depth_variant) dz = zig;
          break;
        }
      }
      const Vec3& o = joint_offsets[j];
      Vec3 v{cx + o.x + dx, cy + o.y + dy, cz + o.z + dz};
      const double nx = rng.normal(), ny = rng.normal(), nz = rng.normal();
      v.x = std::clamp(v.x + spec.noise_std * nx, 0.0, kUpper);
      v.y = std::clamp(v.y + spec.noise_std * ny, 0.0, kUpper);
      v.z = std::clamp(v.z + spec.noise_std * nz, 0.0, kUpper);
      p.at(t, j) = v;
    }
  }
  return p;
}

DatasetManifests generate_dataset(const std::vector<SynthSpec>& templates, int n_per_class,
                                  double split, std::uint64_t seed,
                                  const std::filesystem::path& out_dir) {
  if (templates.empty()) throw Error("class list is empty");
  if (n_per_class < 2) throw Error("need at least 2 clips per class");
  if (!(split > 0.0 && split < 1.0)) throw Error("split must lie strictly between 0 and 1");
  for (const auto& t : templates) validate(t);

  const int n_train = std::clamp(static_cast<int>(std::lround(n_per_class * split)), 1, n_per_class - 1);
  const auto clip_dir = out_dir / "clips";
  std::filesystem::create_directories(clip_dir);

  DatasetManifests out;
  for (std::size_t ci = 0; ci < templates.size(); ++ci) {
    const SynthSpec& tmpl = templates[ci];
    const std::string name(class_name(tmpl.motion));
    for (int k = 0; k < n_per_class; ++k) {
      SynthSpec s = tmpl;
      s.seed = mix_seed(seed, static_cast<std::uint64_t>(ci), static_cast<std::uint64_t>(k));
      char stem[96];
      std::snprintf(stem, sizeof stem, "%s_%04d.json", name.c_str(), k);
      const auto path = clip_dir / stem;
      write_file_atomic(path, serialize_pose_sequence(generate_clip(s)));
      (k < n_train ? out.train : out.test).push_back({path, name});
    }
  }
  write_manifest(out_dir / "train.txt", out.train);
  write_manifest(out_dir / "test.txt", out.test);
  return out;
}

}  // namespace dapotion::synth
