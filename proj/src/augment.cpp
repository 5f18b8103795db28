#include "dapotion/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace dapotion {

namespace {

using Mat3 = std::array<std::array<double, 3>, 3>;

Mat3 multiply(const Mat3& a, const Mat3& b) {
  Mat3 r{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) r[i][j] += a[i][k] * b[k][j];
  return r;
}

Mat3 rotation(const std::array<double, 3>& angles_deg) {
  const double k = std::numbers::pi / 180.0;
  const double ax = angles_deg[0] * k, ay = angles_deg[1] * k, az = angles_deg[2] * k;
  const Mat3 rx{{{1, 0, 0}, {0, std::cos(ax), -std::sin(ax)}, {0, std::sin(ax), std::cos(ax)}}};
  const Mat3 ry{{{std::cos(ay), 0, std::sin(ay)}, {0, 1, 0}, {-std::sin(ay), 0, std::cos(ay)}}};
  const Mat3 rz{{{std::cos(az), -std::sin(az), 0}, {std::sin(az), std::cos(az), 0}, {0, 0, 1}}};
  return multiply(rz, multiply(ry, rx));
}

// Zero outside [0, n-1] per axis, trilinear inside.
float sample(const ChannelVolume& v, int c, double x, double y, double z) {
  const Dims3 d = v.dims();
  const int x0 = static_cast<int>(std::floor(x)), y0 = static_cast<int>(std::floor(y)),
            z0 = static_cast<int>(std::floor(z));
  const double fx = x - x0, fy = y - y0, fz = z - z0;
  double acc = 0;
  for (int i = 0; i < 2; ++i) {
    const int xi = x0 + i;
    const double wx = i ? fx : 1.0 - fx;
    if (wx == 0.0 || xi < 0 || xi >= d.w) continue;
    for (int j = 0; j < 2; ++j) {
      const int yj = y0 + j;
      const double wy = j ? fy : 1.0 - fy;
      if (wy == 0.0 || yj < 0 || yj >= d.h) continue;
      for (int k = 0; k < 2; ++k) {
        const int zk = z0 + k;
        const double wz = k ? fz : 1.0 - fz;
        if (wz == 0.0 || zk < 0 || zk >= d.d) continue;
        acc += wx * wy * wz * v.at(c, xi, yj, zk);
      }
    }
  }
  return static_cast<float>(acc);
}

}  // namespace

AugmentConfig AugmentConfig::for_grid(int grid_width) {
  AugmentConfig cfg;
  cfg.max_translation = 4.0 * grid_width / 64.0;
  return cfg;
}

void validate(const AugmentConfig& cfg) {
  if (!(cfg.max_rotation_deg >= 0) || !(cfg.max_translation >= 0)) throw Error("augmentation magnitudes must be non-negative");
  for (double p : {cfg.flip_prob_y, cfg.flip_prob_z})
    if (!(p >= 0 && p <= 1)) throw Error("flip probabilities must lie in [0, 1]");
}

ChannelVolume affine_transform(const ChannelVolume& v, const std::array<double, 3>& angles_deg,
                               const std::array<double, 3>& translation) {
  const Dims3 d = v.dims();
  const Mat3 r = rotation(angles_deg);
  const double cx = (d.w - 1) / 2.0, cy = (d.h - 1) / 2.0, cz = (d.d - 1) / 2.0;
  ChannelVolume out(d, v.channels());
  // Inverse map: src = R^T (dst - centre - t) + centre.
  for (int x = 0; x < d.w; ++x)
    for (int y = 0; y < d.h; ++y)
      for (int z = 0; z < d.d; ++z) {
        const double px = x - cx - translation[0], py = y - cy - translation[1], pz = z - cz - translation[2];
        const double sx = r[0][0] * px + r[1][0] * py + r[2][0] * pz + cx;
        const double sy = r[0][1] * px + r[1][1] * py + r[2][1] * pz + cy;
        const double sz = r[0][2] * px + r[1][2] * py + r[2][2] * pz + cz;
        for (int c = 0; c < v.channels(); ++c) out.at(c, x, y, z) = sample(v, c, sx, sy, sz);
      }
  return out;
}

ChannelVolume flip_axis(const ChannelVolume& v, int axis) {
  if (axis < 0 || axis > 2) throw Error("flip axis must be 0, 1 or 2");
  const Dims3 d = v.dims();
  ChannelVolume out(d, v.channels());
  for (int c = 0; c < v.channels(); ++c)
    for (int x = 0; x < d.w; ++x)
      for (int y = 0; y < d.h; ++y)
        for (int z = 0; z < d.d; ++z) {
          const int sx = axis == 0 ? d.w - 1 - x : x;
          const int sy = axis == 1 ? d.h - 1 - y : y;
          const int sz = axis == 2 ? d.d - 1 - z : z;
          out.at(c, x, y, z) = v.at(c, sx, sy, sz);
        }
  return out;
}

void swap_mirror_pairs(ChannelVolume& v, const ChannelLayout& layout) {
  const int per_joint = channels_per_joint(layout.scheme, layout.num_colors);
  for (const auto& [a, b] : layout.mirror_pairs) {
    if (a < 0 || b < 0 || a >= layout.num_joints || b >= layout.num_joints) throw Error("mirror pair out of range");
    for (int k = 0; k < per_joint; ++k) {
      auto ca = v.channel(a * per_joint + k);
      auto cb = v.channel(b * per_joint + k);
      std::swap_ranges(ca.begin(), ca.end(), cb.begin());
    }
  }
}

void clamp_to_scheme_range(ChannelVolume& v, const ChannelLayout& layout) {
  const int C = layout.num_colors;
  const int per_joint = channels_per_joint(layout.scheme, C);
  for (int ch = 0; ch < v.channels(); ++ch) {
    const int k = ch % per_joint;
    const bool intensity = layout.scheme == Scheme::kI || (layout.scheme == Scheme::kNUI && k == 2 * C);
    const float hi = intensity ? static_cast<float>(C) : 1.0f;
    for (float& x : v.channel(ch)) x = std::clamp(x, 0.0f, hi);
  }
}

ChannelVolume augment(const ChannelVolume& v, const AugmentConfig& cfg, const ChannelLayout& layout, Rng& rng) {
  validate(cfg);
  const bool planar = v.dims().d == 1;
  std::array<double, 3> angles{}, shift{};
  for (int a = 0; a < 3; ++a) angles[a] = cfg.max_rotation_deg * (2.0 * rng.uniform() - 1.0);
  for (int a = 0; a < 3; ++a) shift[a] = cfg.max_translation * (2.0 * rng.uniform() - 1.0);
  const bool flip_y = rng.bernoulli(cfg.flip_prob_y);
  const bool flip_z = rng.bernoulli(cfg.flip_prob_z);
  if (planar) {
    angles[0] = angles[1] = 0.0;
    shift[2] = 0.0;
  }

  const bool identity = angles == std::array<double, 3>{} && shift == std::array<double, 3>{};
  ChannelVolume out = identity ? v : affine_transform(v, angles, shift);
  if (flip_y) {
    out = flip_axis(out, 1);
    swap_mirror_pairs(out, layout);
  }
  if (flip_z && !planar) out = flip_axis(out, 2);
  clamp_to_scheme_range(out, layout);
  return out;
}

}  // namespace dapotion
