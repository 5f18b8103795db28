#include "dapotion/encoder.hpp"

#include <algorithm>
#include <cmath>

namespace dapotion {

namespace {

// Visits every voxel within radius of `center`, passing exp(-d^2 / 2 sigma^2).
template <typename Fn>
void for_each_support_voxel(const Vec3& center, Dims3 dims, double sigma, double truncation_radius,
                            Fn&& fn) {
  const double radius = truncation_radius * sigma;
  const double r2 = radius * radius;
  const double inv = 1.0 / (2.0 * sigma * sigma);
  auto lo = [&](double c) { return std::max(0, static_cast<int>(std::ceil(c - radius))); };
  auto hi = [&](double c, int n) { return std::min(n - 1, static_cast<int>(std::floor(c + radius))); };
  const int x0 = lo(center.x), x1 = hi(center.x, dims.w);
  const int y0 = lo(center.y), y1 = hi(center.y, dims.h);
  const int z0 = lo(center.z), z1 = hi(center.z, dims.d);
  for (int x = x0; x <= x1; ++x) {
    const double dx = x - center.x;
    for (int y = y0; y <= y1; ++y) {
      const double dy = y - center.y;
      for (int z = z0; z <= z1; ++z) {
        const double dz = z - center.z;
        const double d2 = dx * dx + dy * dy + dz * dz;
        if (d2 <= r2) fn(x, y, z, std::exp(-d2 * inv));
      }
    }
  }
}

void require_same_shape(const ChannelVolume& a, const ChannelVolume& b, const char* what) {
  if (!(a.dims() == b.dims())) throw ShapeError(std::string(what) + ": volume dims differ");
}

// Max normalization, intensity and normalized volumes for one joint's
// temporal sum, held in double precision. Writes the scheme's channels for
// the joint starting at `first_channel`.
void write_joint_channels(const std::vector<double>& s, std::size_t voxels, int colors,
                          const EncoderConfig& cfg, ChannelVolume& out, int first_channel) {
  std::vector<double> u(s.size());
  for (int c = 0; c < colors; ++c) {
    const double* src = s.data() + c * voxels;
    const double peak = *std::max_element(src, src + voxels);
    double* dst = u.data() + c * voxels;
    if (peak > 0) {
      for (std::size_t v = 0; v < voxels; ++v) dst[v] = src[v] / peak;
    } else {
      std::fill(dst, dst + voxels, 0.0);
    }
  }
  std::vector<double> intensity(voxels, 0.0);
  for (int c = 0; c < colors; ++c)
    for (std::size_t v = 0; v < voxels; ++v) intensity[v] += u[c * voxels + v];

  auto put = [&](int ch, auto&& value) {
    float* dst = out.channel(first_channel + ch).data();
    for (std::size_t v = 0; v < voxels; ++v) dst[v] = static_cast<float>(value(v));
  };
  auto put_u = [&](int ch0) {
    for (int c = 0; c < colors; ++c) put(ch0 + c, [&](std::size_t v) { return u[c * voxels + v]; });
  };
  auto put_n = [&](int ch0) {
    for (int c = 0; c < colors; ++c)
      put(ch0 + c, [&](std::size_t v) { return u[c * voxels + v] / (cfg.epsilon + intensity[v]); });
  };
  auto put_i = [&](int ch) { put(ch, [&](std::size_t v) { return intensity[v]; }); };

  switch (cfg.scheme) {
    case Scheme::kU: put_u(0); break;
    case Scheme::kI: put_i(0); break;
    case Scheme::kN: put_n(0); break;
    case Scheme::kNUI:
      put_n(0);
      put_u(colors);
      put_i(2 * colors);
      break;
  }
}

}  // namespace

std::string_view scheme_name(Scheme s) {
  switch (s) {
    case Scheme::kU: return "u";
    case Scheme::kI: return "i";
    case Scheme::kN: return "n";
    case Scheme::kNUI: return "nui";
  }
  throw Error("bad scheme tag");
}

Scheme parse_scheme(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char ch) { return std::tolower(ch); });
  if (lower == "u") return Scheme::kU;
  if (lower == "i") return Scheme::kI;
  if (lower == "n") return Scheme::kN;
  if (lower == "nui" || lower == "n+u+i") return Scheme::kNUI;
  throw Error("unknown aggregation scheme '" + std::string(name) + "'");
}

int channels_per_joint(Scheme s, int num_colors) {
  switch (s) {
    case Scheme::kU:
    case Scheme::kN: return num_colors;
    case Scheme::kI: return 1;
    case Scheme::kNUI: return 2 * num_colors + 1;
  }
  throw Error("bad scheme tag");
}

ChannelVolume::ChannelVolume(Dims3 dims, int channels, float fill)
    : dims_(dims), channels_(channels), data_(dims.voxels() * static_cast<std::size_t>(channels), fill) {
  if (dims.w < 1 || dims.h < 1 || dims.d < 1 || channels < 1) throw ShapeError("empty channel volume");
}

CodeVector color_code(int t, int num_frames, int num_colors) {
  if (num_frames < 2) throw Error("color code needs at least 2 frames");
  if (num_colors < 2) throw Error("color code needs at least 2 channels");
  if (t < 1 || t > num_frames) throw Error("frame index " + std::to_string(t) + " out of range");
  const double s = static_cast<double>(t - 1) / static_cast<double>(num_frames - 1);
  const double u = s * (num_colors - 1);
  const int k = std::min(static_cast<int>(std::floor(u)), num_colors - 2);
  const double r = u - k;
  CodeVector o(num_colors, 0.0);
  // Node k belongs to channel C-k (1-based); node k+1 to channel C-k-1.
  o[num_colors - 2 - k] = r;
  o[num_colors - 1 - k] = 1.0 - r;
  return o;
}

void validate(const EncoderConfig& cfg) {
  if (cfg.grid.w < 4 || cfg.grid.h < 4 || cfg.grid.d < 4) throw Error("grid dims must be at least 4 per axis");
  if (!(cfg.sigma > 0)) throw Error("sigma must be positive");
  if (cfg.channels < 2) throw Error("channels must be at least 2");
  if (!(cfg.truncation_radius >= 1)) throw Error("truncation radius must be at least 1 sigma");
  if (!(cfg.epsilon > 0)) throw Error("epsilon must be positive");
}

std::uint64_t config_hash(const EncoderConfig& cfg) {
  ByteWriter w;
  w.u32(cfg.grid.w);
  w.u32(cfg.grid.h);
  w.u32(cfg.grid.d);
  w.f64(cfg.sigma);
  w.u32(cfg.channels);
  w.u8(static_cast<std::uint8_t>(cfg.scheme));
  w.f64(cfg.truncation_radius);
  w.f64(cfg.epsilon);
  w.u8(cfg.collapse_depth ? 1 : 0);
  return fnv1a64(w.data());
}

ChannelVolume rasterize_heatmap(const Vec3& center, Dims3 dims, double sigma, double truncation_radius) {
  if (!(sigma > 0)) throw Error("sigma must be positive");
  ChannelVolume h(dims, 1);
  for_each_support_voxel(center, dims, sigma, truncation_radius,
                         [&](int x, int y, int z, double g) { h.at(0, x, y, z) = static_cast<float>(g); });
  return h;
}

ChannelVolume colorize(const ChannelVolume& heatmap, const CodeVector& code) {
  if (heatmap.channels() != 1) throw ShapeError("colorize expects a single-channel heatmap");
  ChannelVolume out(heatmap.dims(), static_cast<int>(code.size()));
  auto src = heatmap.channel(0);
  for (int c = 0; c < out.channels(); ++c) {
    auto dst = out.channel(c);
    for (std::size_t v = 0; v < src.size(); ++v) dst[v] = static_cast<float>(src[v] * code[c]);
  }
  return out;
}

ChannelVolume aggregate_sum(std::span<const ChannelVolume> colorized) {
  if (colorized.empty()) throw Error("aggregate_sum over an empty sequence");
  ChannelVolume out = colorized.front();
  for (std::size_t t = 1; t < colorized.size(); ++t) {
    const ChannelVolume& v = colorized[t];
    require_same_shape(out, v, "aggregate_sum");
    if (v.channels() != out.channels()) throw ShapeError("aggregate_sum: channel counts differ");
    for (std::size_t i = 0; i < out.data().size(); ++i) out.data()[i] += v.data()[i];
  }
  return out;
}

ChannelVolume normalize_U(const ChannelVolume& s) {
  ChannelVolume out(s.dims(), s.channels());
  for (int c = 0; c < s.channels(); ++c) {
    auto src = s.channel(c);
    auto dst = out.channel(c);
    const float peak = *std::max_element(src.begin(), src.end());
    if (peak > 0)
      for (std::size_t v = 0; v < src.size(); ++v) dst[v] = static_cast<float>(static_cast<double>(src[v]) / peak);
  }
  return out;
}

ChannelVolume intensity_I(const ChannelVolume& u) {
  ChannelVolume out(u.dims(), 1);
  auto dst = out.channel(0);
  std::vector<double> acc(dst.size(), 0.0);
  for (int c = 0; c < u.channels(); ++c) {
    auto src = u.channel(c);
    for (std::size_t v = 0; v < src.size(); ++v) acc[v] += src[v];
  }
  for (std::size_t v = 0; v < dst.size(); ++v) dst[v] = static_cast<float>(acc[v]);
  return out;
}

ChannelVolume normalize_N(const ChannelVolume& u, const ChannelVolume& i, double epsilon) {
  require_same_shape(u, i, "normalize_N");
  if (i.channels() != 1) throw ShapeError("normalize_N expects a single-channel intensity volume");
  if (!(epsilon > 0)) throw Error("epsilon must be positive");
  ChannelVolume out(u.dims(), u.channels());
  auto inten = i.channel(0);
  for (int c = 0; c < u.channels(); ++c) {
    auto src = u.channel(c);
    auto dst = out.channel(c);
    for (std::size_t v = 0; v < src.size(); ++v)
      dst[v] = static_cast<float>(src[v] / (epsilon + static_cast<double>(inten[v])));
  }
  return out;
}

DAPotion encode_clip(const GridPoseSequence& poses, const EncoderConfig& cfg) {
  validate(cfg);
  if (!(poses.grid.dims == cfg.grid)) throw ShapeError("pose grid does not match encoder grid");
  if (poses.num_frames < 2) throw Error("too few frames");
  if (poses.num_joints < 1) throw Error("no joints");

  const int colors = cfg.channels;
  const int per_joint = channels_per_joint(cfg.scheme, colors);
  const Dims3 grid = cfg.grid;
  const Dims3 out_dims = cfg.collapse_depth ? Dims3{grid.w, grid.h, 1} : grid;
  const std::size_t voxels = grid.voxels();
  const std::size_t out_voxels = out_dims.voxels();

  std::vector<CodeVector> codes;
  codes.reserve(poses.num_frames);
  for (int t = 1; t <= poses.num_frames; ++t) codes.push_back(color_code(t, poses.num_frames, colors));

  DAPotion d;
  d.scheme = cfg.scheme;
  d.num_joints = poses.num_joints;
  d.num_colors = colors;
  d.volume = ChannelVolume(out_dims, poses.num_joints * per_joint);
  d.config_hash = config_hash(cfg);

  std::vector<double> s(voxels * colors);
  std::vector<double> collapsed;
  for (int j = 0; j < poses.num_joints; ++j) {
    std::fill(s.begin(), s.end(), 0.0);
    for (int t = 0; t < poses.num_frames; ++t) {
      const CodeVector& o = codes[t];
      for_each_support_voxel(poses.at(t, j), grid, cfg.sigma, cfg.truncation_radius,
                             [&](int x, int y, int z, double g) {
                               const std::size_t v = (static_cast<std::size_t>(x) * grid.h + y) * grid.d + z;
                               for (int c = 0; c < colors; ++c)
                                 if (o[c] != 0.0) s[c * voxels + v] += g * o[c];
                             });
    }
    if (cfg.collapse_depth) {
      collapsed.assign(out_voxels * colors, 0.0);
      for (int c = 0; c < colors; ++c)
        for (std::size_t xy = 0; xy < out_voxels; ++xy)
          for (int z = 0; z < grid.d; ++z) collapsed[c * out_voxels + xy] += s[c * voxels + xy * grid.d + z];
      write_joint_channels(collapsed, out_voxels, colors, cfg, d.volume, j * per_joint);
    } else {
      write_joint_channels(s, voxels, colors, cfg, d.volume, j * per_joint);
    }
  }
  return d;
}

DAPotion encode_pose_sequence(const PoseSequence& poses, const EncoderConfig& cfg) {
  return encode_clip(normalize_to_grid(to_image_frame(poses), cfg.grid), cfg);
}

ChannelVolume resample(const ChannelVolume& v, Dims3 target) {
  if (target.w < 2 || target.h < 2 || target.d < 2) throw Error("resample target dims must be at least 2");
  if (v.dims() == target) return v;
  const Dims3 src = v.dims();
  struct Tap {
    int i0, i1;
    double f;
  };
  auto taps = [](int n_src, int n_dst) {
    std::vector<Tap> out(n_dst);
    for (int i = 0; i < n_dst; ++i) {
      const double p = n_src == 1 ? 0.0 : static_cast<double>(i) * (n_src - 1) / (n_dst - 1);
      const int i0 = std::min(static_cast<int>(std::floor(p)), n_src - 1);
      const int i1 = std::min(i0 + 1, n_src - 1);
      out[i] = {i0, i1, p - i0};
    }
    return out;
  };
  const auto tx = taps(src.w, target.w), ty = taps(src.h, target.h), tz = taps(src.d, target.d);
  ChannelVolume out(target, v.channels());
  for (int c = 0; c < v.channels(); ++c)
    for (int x = 0; x < target.w; ++x)
      for (int y = 0; y < target.h; ++y)
        for (int z = 0; z < target.d; ++z) {
          const Tap& a = tx[x];
          const Tap& b = ty[y];
          const Tap& e = tz[z];
          auto lerp_z = [&](int xi, int yi) {
            return (1.0 - e.f) * v.at(c, xi, yi, e.i0) + e.f * v.at(c, xi, yi, e.i1);
          };
          auto lerp_yz = [&](int xi) { return (1.0 - b.f) * lerp_z(xi, b.i0) + b.f * lerp_z(xi, b.i1); };
          out.at(c, x, y, z) = static_cast<float>((1.0 - a.f) * lerp_yz(a.i0) + a.f * lerp_yz(a.i1));
        }
  return out;
}

}  // namespace dapotion
