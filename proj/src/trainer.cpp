#include "dapotion/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

namespace dapotion {

namespace {

DescriptorLayout common_layout(const LabeledSet& set, const char* what) {
  if (set.items.empty()) throw Error(std::string(what) + " set is empty");
  if (set.labels.size() != set.items.size()) throw Error(std::string(what) + " set has mismatched labels");
  const DescriptorLayout layout = layout_of(set.items.front());
  for (const DAPotion& d : set.items)
    if (!(layout_of(d) == layout)) throw ShapeError(std::string(what) + " set mixes descriptor shapes");
  return layout;
}

}  // namespace

TrainResult train(const LabeledSet& train_set, const LabeledSet& val_set,
                  const std::vector<std::string>& class_names, const TrainOptions& options) {
  const DescriptorLayout layout = common_layout(train_set, "training");
  if (!val_set.items.empty() && !(common_layout(val_set, "validation") == layout))
    throw ShapeError("validation descriptors differ in shape from training descriptors");
  const int num_classes = static_cast<int>(class_names.size());
  for (int y : train_set.labels)
    if (y < 0 || y >= num_classes) throw Error("training label out of range");

  ClassifierConfig cfg = options.classifier;
  cfg.input_channels = layout.num_joints * channels_per_joint(layout.scheme, layout.num_colors);
  cfg.num_classes = num_classes;
  nn::validate(cfg);
  validate(options.augment);

  const ChannelLayout channels{layout.scheme, layout.num_joints, layout.num_colors, options.mirror_pairs};
  TrainResult result{init_model(cfg, layout, class_names, mix_seed(cfg.seed, 1)), {}};
  Model& model = result.model;
  Rng rng(mix_seed(cfg.seed, 2));
  nn::Adam<float> adam;
  const nn::Context ctx{true, &rng};

  const std::size_t n = train_set.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<ChannelVolume> augmented;
  std::vector<const ChannelVolume*> batch;
  std::vector<int> labels;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = nn::lr_at_epoch(cfg.lr_init, cfg.lr_decay, epoch);
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

    double loss_sum = 0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t stop = std::min(n, start + static_cast<std::size_t>(cfg.batch_size));
      augmented.clear();
      batch.clear();
      labels.clear();
      for (std::size_t k = start; k < stop; ++k) {
        const std::size_t idx = order[k];
        if (options.augment.enabled) augmented.push_back(augment(train_set.items[idx].volume, options.augment, channels, rng));
        labels.push_back(train_set.labels[idx]);
      }
      for (std::size_t k = start; k < stop; ++k)
        batch.push_back(options.augment.enabled ? &augmented[k - start] : &train_set.items[order[k]].volume);
      const double loss = model.net.forward_backward(make_batch(batch), labels, ctx);
      adam.step(model.net.params(), lr);
      loss_sum += loss * static_cast<double>(stop - start);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr;
    rec.train_loss = loss_sum / static_cast<double>(n);
    rec.val_accuracy = val_set.items.empty() ? std::numeric_limits<double>::quiet_NaN() : accuracy(model, val_set);
    result.history.push_back(rec);
    if (options.on_epoch) options.on_epoch(rec);
  }
  return result;
}

std::vector<ScoreVector> predict_all(Model& model, const std::vector<DAPotion>& items, int batch_size) {
  std::vector<ScoreVector> out;
  out.reserve(items.size());
  std::vector<const ChannelVolume*> batch;
  for (std::size_t start = 0; start < items.size(); start += batch_size) {
    const std::size_t stop = std::min(items.size(), start + static_cast<std::size_t>(batch_size));
    batch.clear();
    for (std::size_t k = start; k < stop; ++k) {
      if (!(layout_of(items[k]) == model.layout)) throw ShapeError("descriptor layout does not match the model");
      batch.push_back(&items[k].volume);
    }
    const auto probs = model.net.probabilities(make_batch(batch), nn::Context{});
    for (std::size_t k = 0; k < batch.size(); ++k) {
      ScoreVector s(model.config.num_classes);
      for (int c = 0; c < model.config.num_classes; ++c) s[c] = probs(static_cast<int>(k), c);
      out.push_back(std::move(s));
    }
  }
  return out;
}

double accuracy(Model& model, const LabeledSet& set) {
  if (set.items.empty()) throw Error("accuracy of an empty set");
  const auto scores = predict_all(model, set.items, std::max(1, model.config.batch_size));
  std::size_t hits = 0;
  for (std::size_t i = 0; i < scores.size(); ++i)
    if (argmax(scores[i]) == set.labels[i]) ++hits;
  return static_cast<double>(hits) / static_cast<double>(set.size());
}

std::string format_history_csv(const std::vector<EpochRecord>& history) {
  std::string out = "epoch,lr,train_loss,val_accuracy\n";
  char line[160];
  for (const EpochRecord& r : history) {
    std::snprintf(line, sizeof line, "%d,%.9g,%.9g,%.9g\n", r.epoch, r.lr, r.train_loss, r.val_accuracy);
    out += line;
  }
  return out;
}

}  // namespace dapotion
