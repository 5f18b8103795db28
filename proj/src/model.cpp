#include "dapotion/model.hpp"

#include <algorithm>
#include <cstring>

namespace dapotion {

namespace nn {

void validate(const ClassifierConfig& cfg) {
  if (cfg.input_channels < 1) throw Error("input_channels must be positive");
  if (cfg.num_classes < 2) throw Error("need at least 2 classes");
  if (cfg.blocks < 1) throw Error("need at least one block");
  if (cfg.convs_per_block != 2) throw Error("each block has exactly two convolutions");
  if (cfg.kernel != 3) throw Error("kernel size is fixed at 3");
  if (static_cast<int>(cfg.filters.size()) != cfg.blocks) throw Error("need one filter count per block");
  for (int f : cfg.filters)
    if (f < 1) throw Error("filter counts must be positive");
  if (!(cfg.dropout_p >= 0 && cfg.dropout_p < 1)) throw Error("dropout_p must lie in [0, 1)");
  if (cfg.epochs < 1) throw Error("epochs must be positive");
  if (cfg.batch_size < 1) throw Error("batch size must be positive");
  if (!(cfg.lr_init > 0)) throw Error("lr_init must be positive");
  if (!(cfg.lr_decay > 0 && cfg.lr_decay <= 1)) throw Error("lr_decay must lie in (0, 1]");
}

}  // namespace nn

DescriptorLayout layout_of(const DAPotion& d) { return {d.scheme, d.num_joints, d.num_colors, d.dims()}; }

Model::Model(ClassifierConfig cfg, DescriptorLayout lay, std::vector<std::string> names)
    : config(std::move(cfg)), layout(lay), class_names(std::move(names)), net(config) {
  if (static_cast<int>(class_names.size()) != config.num_classes) throw Error("class name count does not match num_classes");
  if (config.input_channels != layout.num_joints * channels_per_joint(layout.scheme, layout.num_colors))
    throw Error("input_channels does not match the descriptor layout");
  net.check_input({1, config.input_channels, layout.dims.w, layout.dims.h, layout.dims.d});
}

Model init_model(const ClassifierConfig& cfg, const DescriptorLayout& layout,
                 std::vector<std::string> class_names, std::uint64_t seed) {
  Model m(cfg, layout, std::move(class_names));
  m.net.init(seed);
  return m;
}

nn::Tensor5<float> make_batch(std::span<const ChannelVolume* const> volumes) {
  if (volumes.empty()) throw Error("empty batch");
  const ChannelVolume& first = *volumes.front();
  const Dims3 d = first.dims();
  nn::Tensor5<float> t({static_cast<int>(volumes.size()), first.channels(), d.w, d.h, d.d});
  for (std::size_t n = 0; n < volumes.size(); ++n) {
    const ChannelVolume& v = *volumes[n];
    if (!(v.dims() == d) || v.channels() != first.channels()) throw ShapeError("descriptors in a batch differ in shape");
    std::copy(v.data().begin(), v.data().end(), t.sample(static_cast<int>(n)));
  }
  return t;
}

ScoreVector predict(Model& model, const DAPotion& descriptor) {
  if (!(layout_of(descriptor) == model.layout)) throw ShapeError("descriptor layout does not match the model");
  const ChannelVolume* one[] = {&descriptor.volume};
  const nn::Tensor5<float> probs = model.net.probabilities(make_batch(one), nn::Context{});
  ScoreVector out(model.config.num_classes);
  for (int k = 0; k < model.config.num_classes; ++k) out[k] = probs(0, k);
  return out;
}

int argmax(std::span<const double> scores) {
  if (scores.empty()) throw Error("argmax of an empty score vector");
  return static_cast<int>(std::max_element(scores.begin(), scores.end()) - scores.begin());
}

namespace {

constexpr char kMagic[] = "DAPM";

struct Blob {
  std::string name;
  std::vector<int> shape;
  std::vector<float>* values;
};

std::vector<Blob> blobs_of(Model& m) {
  std::vector<Blob> out;
  for (auto* p : m.net.params()) out.push_back({p->name, p->shape, &p->value});
  for (auto* b : m.net.buffers()) out.push_back({b->name, b->shape, &b->value});
  return out;
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(Model& m) {
  const ClassifierConfig& c = m.config;
  ByteWriter w;
  w.bytes(kMagic);
  w.u16(kCheckpointVersion);
  w.u32(c.input_channels);
  w.u32(c.num_classes);
  w.u32(c.blocks);
  w.u32(c.convs_per_block);
  w.u32(c.kernel);
  for (int f : c.filters) w.u32(f);
  w.f64(c.dropout_p);
  w.u32(c.epochs);
  w.u32(c.batch_size);
  w.f64(c.lr_init);
  w.f64(c.lr_decay);
  w.u64(c.seed);

  w.u8(static_cast<std::uint8_t>(m.layout.scheme));
  w.u16(static_cast<std::uint16_t>(m.layout.num_joints));
  w.u8(static_cast<std::uint8_t>(m.layout.num_colors));
  w.u16(static_cast<std::uint16_t>(m.layout.dims.w));
  w.u16(static_cast<std::uint16_t>(m.layout.dims.h));
  w.u16(static_cast<std::uint16_t>(m.layout.dims.d));

  w.u32(static_cast<std::uint32_t>(m.class_names.size()));
  for (const auto& n : m.class_names) w.str16(n);

  const auto blobs = blobs_of(m);
  w.u32(static_cast<std::uint32_t>(blobs.size()));
  for (const Blob& b : blobs) {
    w.str16(b.name);
    w.u8(static_cast<std::uint8_t>(b.shape.size()));
    for (int s : b.shape) w.u32(s);
  }
  for (const Blob& b : blobs) w.f32s(*b.values);
  w.u64(fnv1a64(w.data()));
  return std::move(w.data());
}

Model decode_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8) throw ParseError("checkpoint too short");
  {
    ByteReader tail(bytes.subspan(bytes.size() - 8));
    if (tail.u64() != fnv1a64(bytes.first(bytes.size() - 8))) throw ParseError("checkpoint checksum mismatch");
  }
  ByteReader r(bytes.first(bytes.size() - 8));
  if (r.bytes(4) != kMagic) throw ParseError("not a checkpoint file (bad magic)");
  const std::uint16_t version = r.u16();
  if (version != kCheckpointVersion) throw ParseError("unsupported checkpoint version " + std::to_string(version));

  ClassifierConfig c;
  c.input_channels = static_cast<int>(r.u32());
  c.num_classes = static_cast<int>(r.u32());
  c.blocks = static_cast<int>(r.u32());
  c.convs_per_block = static_cast<int>(r.u32());
  c.kernel = static_cast<int>(r.u32());
  if (c.blocks < 1 || c.blocks > 16) throw ParseError("implausible block count");
  c.filters.resize(c.blocks);
  for (int& f : c.filters) f = static_cast<int>(r.u32());
  c.dropout_p = r.f64();
  c.epochs = static_cast<int>(r.u32());
  c.batch_size = static_cast<int>(r.u32());
  c.lr_init = r.f64();
  c.lr_decay = r.f64();
  c.seed = r.u64();

  DescriptorLayout layout;
  const std::uint8_t tag = r.u8();
  if (tag > static_cast<std::uint8_t>(Scheme::kNUI)) throw ParseError("bad scheme tag");
  layout.scheme = static_cast<Scheme>(tag);
  layout.num_joints = r.u16();
  layout.num_colors = r.u8();
  layout.dims.w = r.u16();
  layout.dims.h = r.u16();
  layout.dims.d = r.u16();

  std::vector<std::string> names(r.u32());
  for (auto& n : names) n = r.str16();

  Model m = [&] {
    try {
      return Model(c, layout, std::move(names));
    } catch (const Error& e) {
      throw ParseError(std::string("invalid checkpoint config: ") + e.what());
    }
  }();

  auto blobs = blobs_of(m);
  if (r.u32() != blobs.size()) throw ParseError("checkpoint blob count does not match the architecture");
  for (const Blob& b : blobs) {
    if (r.str16() != b.name) throw ParseError("checkpoint layer manifest mismatch at " + b.name);
    const std::uint8_t rank = r.u8();
    if (rank != b.shape.size()) throw ParseError("rank mismatch for " + b.name);
    for (int s : b.shape)
      if (r.u32() != static_cast<std::uint32_t>(s)) throw ParseError("shape mismatch for " + b.name);
  }
  for (const Blob& b : blobs) r.f32s(*b.values);
  if (r.remaining() != 0) throw ParseError("trailing bytes in checkpoint");
  return m;
}

void write_checkpoint(const std::filesystem::path& path, Model& model) {
  write_file_atomic(path, encode_checkpoint(model));
}

Model read_checkpoint(const std::filesystem::path& path) {
  try {
    return decode_checkpoint(read_file_bytes(path));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

}  // namespace dapotion
