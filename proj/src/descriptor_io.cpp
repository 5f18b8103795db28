#include "dapotion/descriptor_io.hpp"

#include <algorithm>
#include <cmath>

namespace dapotion {

namespace {

constexpr char kMagic[] = "DAPT";

std::uint16_t checked_u16(int v, const char* what) {
  if (v < 0 || v > 0xffff) throw Error(std::string(what) + " does not fit the descriptor header");
  return static_cast<std::uint16_t>(v);
}

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

}  // namespace

std::vector<std::uint8_t> encode_descriptor(const DAPotion& d) {
  const Dims3 dims = d.dims();
  if (d.num_colors < 0 || d.num_colors > 0xff) throw Error("color count does not fit the descriptor header");
  if (d.channel_count() != d.num_joints * channels_per_joint(d.scheme, d.num_colors))
    throw ShapeError("descriptor channel count disagrees with its scheme");
  ByteWriter w;
  w.bytes(kMagic);
  w.u16(kDescriptorVersion);
  w.u8(static_cast<std::uint8_t>(d.scheme));
  w.u16(checked_u16(d.num_joints, "joint count"));
  w.u8(static_cast<std::uint8_t>(d.num_colors));
  w.u16(checked_u16(dims.w, "W"));
  w.u16(checked_u16(dims.h, "H"));
  w.u16(checked_u16(dims.d, "D"));
  w.u32(static_cast<std::uint32_t>(d.channel_count()));
  const std::size_t payload_start = w.data().size();
  w.f32s(d.volume.data());
  const std::uint64_t sum =
      fnv1a64(std::span<const std::uint8_t>(w.data()).subspan(payload_start));
  w.u64(sum);
  return std::move(w.data());
}

DAPotion decode_descriptor(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  if (r.bytes(4) != kMagic) throw ParseError("not a descriptor file (bad magic)");
  const std::uint16_t version = r.u16();
  if (version != kDescriptorVersion) throw ParseError("unsupported descriptor version " + std::to_string(version));
  const std::uint8_t tag = r.u8();
  if (tag > static_cast<std::uint8_t>(Scheme::kNUI)) throw ParseError("bad scheme tag");
  DAPotion d;
  d.scheme = static_cast<Scheme>(tag);
  d.num_joints = r.u16();
  d.num_colors = r.u8();
  Dims3 dims;
  dims.w = r.u16();
  dims.h = r.u16();
  dims.d = r.u16();
  const std::uint32_t channels = r.u32();
  if (d.num_joints < 1 || channels < 1 || dims.voxels() == 0) throw ParseError("empty descriptor");
  if (static_cast<int>(channels) != d.num_joints * channels_per_joint(d.scheme, d.num_colors))
    throw ParseError("descriptor channel count disagrees with its scheme");
  const std::size_t count = dims.voxels() * channels;
  if (r.remaining() != 4 * count + 8) throw ParseError("descriptor payload size mismatch");
  const std::size_t payload_start = r.offset();
  d.volume = ChannelVolume(dims, static_cast<int>(channels));
  r.f32s(d.volume.data());
  const std::uint64_t expected = fnv1a64(bytes.subspan(payload_start, 4 * count));
  if (r.u64() != expected) throw ParseError("descriptor checksum mismatch");
  return d;
}

void write_descriptor(const std::filesystem::path& path, const DAPotion& d) {
  write_file_atomic(path, encode_descriptor(d));
}

DAPotion read_descriptor(const std::filesystem::path& path) {
  try {
    DAPotion d = decode_descriptor(read_file_bytes(path));
    d.source_id = clip_id(path);
    return d;
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

std::string render_slice(const DAPotion& d, int depth, const SliceSelection& sel) {
  const Dims3 dims = d.dims();
  if (depth < 0 || depth >= dims.d)
    throw Error("depth index " + std::to_string(depth) + " out of range [0, " + std::to_string(dims.d) + ")");

  std::vector<int> channels;
  double divisor = 1.0;
  if (sel.channel >= 0) {
    if (sel.channel >= d.channel_count()) throw Error("channel index out of range");
    channels.push_back(sel.channel);
  } else {
    if (sel.joint < 0 || sel.joint >= d.num_joints) throw Error("joint index out of range");
    const int C = d.num_colors;
    const int base = sel.joint * channels_per_joint(d.scheme, C);
    SlicePart part = sel.part;
    if (part == SlicePart::kAuto) {
      switch (d.scheme) {
        case Scheme::kU: part = SlicePart::kU; break;
        case Scheme::kI: part = SlicePart::kI; break;
        case Scheme::kN:
        case Scheme::kNUI: part = SlicePart::kN; break;
      }
    }
    int offset = 0;
    switch (part) {
      case SlicePart::kN:
        if (d.scheme != Scheme::kN && d.scheme != Scheme::kNUI) throw Error("descriptor has no N block");
        offset = 0;
        break;
      case SlicePart::kU:
        if (d.scheme == Scheme::kU) offset = 0;
        else if (d.scheme == Scheme::kNUI) offset = C;
        else throw Error("descriptor has no U block");
        break;
      case SlicePart::kI:
        if (d.scheme == Scheme::kI) offset = 0;
        else if (d.scheme == Scheme::kNUI) offset = 2 * C;
        else throw Error("descriptor has no I block");
        break;
      case SlicePart::kAuto: break;
    }
    if (part == SlicePart::kI) {
      channels.push_back(base + offset);
      divisor = C;
    } else {
      for (int c = 0; c < C; ++c) channels.push_back(base + offset + c);
    }
  }

  const bool color = channels.size() == 3;
  if (!color && channels.size() != 1) channels.resize(1);
  std::string out = (color ? "P6\n" : "P5\n") + std::to_string(dims.w) + " " + std::to_string(dims.h) + "\n255\n";
  for (int y = 0; y < dims.h; ++y)
    for (int x = 0; x < dims.w; ++x)
      for (int ch : channels)
        out.push_back(static_cast<char>(to_byte(d.volume.at(ch, x, y, depth) / divisor)));
  return out;
}

}  // namespace dapotion
