#pragma once

// Straightforward nested-loop reimplementation of the descriptor, used as a
// reference for the optimized encoder. Shares no code with src/encoder.cpp.

#include <algorithm>
#include <cmath>
#include <vector>

#include "dapotion/encoder.hpp"
#include "dapotion/pose_io.hpp"
#include "dapotion/rng.hpp"

namespace oracle {

using dapotion::ChannelVolume;
using dapotion::Dims3;
using dapotion::EncoderConfig;
using dapotion::GridPoseSequence;
using dapotion::Scheme;
using dapotion::Vec3;

// o_c(s) = max(0, 1 - |s - s_c| (C - 1)), s_c = (C - c) / (C - 1), c = 1..C.
inline std::vector<double> hat_code(int t, int T, int C) {
  const double s = static_cast<double>(t - 1) / static_cast<double>(T - 1);
  std::vector<double> o(C);
  for (int c = 1; c <= C; ++c) {
    const double sc = static_cast<double>(C - c) / static_cast<double>(C - 1);
    o[c - 1] = std::max(0.0, 1.0 - std::abs(s - sc) * (C - 1));
  }
  return o;
}

inline double gaussian(int x, int y, int z, const Vec3& c, double sigma, double radius) {
  const double dist = std::sqrt((x - c.x) * (x - c.x) + (y - c.y) * (y - c.y) + (z - c.z) * (z - c.z));
  if (dist > radius * sigma) return 0.0;
  return std::exp(-(dist * dist) / (2.0 * sigma * sigma));
}

// Full descriptor volume for `cfg.scheme`, per-joint stacking [N, U, I].
inline ChannelVolume encode(const GridPoseSequence& p, const EncoderConfig& cfg) {
  const int W = cfg.grid.w, H = cfg.grid.h, D = cfg.grid.d;
  const int C = cfg.channels;
  const int T = p.num_frames;
  const int outD = cfg.collapse_depth ? 1 : D;
  const int per_joint = cfg.scheme == Scheme::kNUI ? 2 * C + 1 : cfg.scheme == Scheme::kI ? 1 : C;
  ChannelVolume out({W, H, outD}, p.num_joints * per_joint);

  for (int j = 0; j < p.num_joints; ++j) {
    // S[c][x][y][z]
    std::vector<double> S(static_cast<std::size_t>(C) * W * H * outD, 0.0);
    auto s_at = [&](int c, int x, int y, int z) -> double& {
      return S[((static_cast<std::size_t>(c) * W + x) * H + y) * outD + z];
    };
    for (int x = 0; x < W; ++x)
      for (int y = 0; y < H; ++y)
        for (int z = 0; z < D; ++z)
          for (int t = 1; t <= T; ++t) {
            const double h = gaussian(x, y, z, p.at(t - 1, j), cfg.sigma, cfg.truncation_radius);
            const std::vector<double> o = hat_code(t, T, C);
            for (int c = 0; c < C; ++c) s_at(c, x, y, cfg.collapse_depth ? 0 : z) += h * o[c];
          }

    std::vector<double> mx(C, 0.0);
    for (int c = 0; c < C; ++c)
      for (int x = 0; x < W; ++x)
        for (int y = 0; y < H; ++y)
          for (int z = 0; z < outD; ++z) mx[c] = std::max(mx[c], s_at(c, x, y, z));

    for (int x = 0; x < W; ++x)
      for (int y = 0; y < H; ++y)
        for (int z = 0; z < outD; ++z) {
          std::vector<double> u(C);
          double intensity = 0;
          for (int c = 0; c < C; ++c) {
            u[c] = mx[c] > 0 ? s_at(c, x, y, z) / mx[c] : 0.0;
            intensity += u[c];
          }
          const int base = j * per_joint;
          for (int c = 0; c < C; ++c) {
            const double n = u[c] / (cfg.epsilon + intensity);
            switch (cfg.scheme) {
              case Scheme::kU: out.at(base + c, x, y, z) = static_cast<float>(u[c]); break;
              case Scheme::kN: out.at(base + c, x, y, z) = static_cast<float>(n); break;
              case Scheme::kNUI:
                out.at(base + c, x, y, z) = static_cast<float>(n);
                out.at(base + C + c, x, y, z) = static_cast<float>(u[c]);
                break;
              case Scheme::kI: break;
            }
          }
          if (cfg.scheme == Scheme::kI) out.at(base, x, y, z) = static_cast<float>(intensity);
          if (cfg.scheme == Scheme::kNUI) out.at(base + 2 * C, x, y, z) = static_cast<float>(intensity);
        }
  }
  return out;
}

inline double max_abs_diff(const ChannelVolume& a, const ChannelVolume& b) {
  if (!(a.dims() == b.dims()) || a.channels() != b.channels()) return INFINITY;
  double m = 0;
  for (std::size_t i = 0; i < a.data().size(); ++i)
    m = std::max(m, std::abs(static_cast<double>(a.data()[i]) - b.data()[i]));
  return m;
}

// Uniform continuous voxel positions inside the grid.
inline GridPoseSequence random_grid_poses(dapotion::Rng& rng, Dims3 dims, int frames, int joints) {
  GridPoseSequence p;
  p.num_frames = frames;
  p.num_joints = joints;
  p.grid.dims = dims;
  for (int i = 0; i < frames * joints; ++i)
    p.voxels.push_back({rng.uniform(0, dims.w - 1), rng.uniform(0, dims.h - 1), rng.uniform(0, dims.d - 1)});
  return p;
}

}  // namespace oracle
