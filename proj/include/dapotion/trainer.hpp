#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "dapotion/augment.hpp"
#include "dapotion/model.hpp"

namespace dapotion {

struct LabeledSet {
  std::vector<DAPotion> items;
  std::vector<int> labels;

  std::size_t size() const { return items.size(); }
};

struct EpochRecord {
  int epoch = 0;
  double lr = 0;
  double train_loss = 0;
  double val_accuracy = 0;  // NaN without a validation set
};

struct TrainOptions {
  ClassifierConfig classifier;  // input_channels / num_classes are filled in from the data
  AugmentConfig augment;
  std::vector<std::pair<int, int>> mirror_pairs;
  std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainResult {
  Model model;
  std::vector<EpochRecord> history;
};

/// Shuffled mini-batch training with augmentation, Adam and an exponentially
/// decaying learning rate. Bit-deterministic in `options.classifier.seed`.
TrainResult train(const LabeledSet& train_set, const LabeledSet& val_set,
                  const std::vector<std::string>& class_names, const TrainOptions& options);

/// Fraction of items whose argmax prediction equals the label.
double accuracy(Model& model, const LabeledSet& set);

/// Eval-mode probabilities for every item, in order.
std::vector<ScoreVector> predict_all(Model& model, const std::vector<DAPotion>& items, int batch_size = 16);

/// `epoch,lr,train_loss,val_accuracy` rows with a header line.
std::string format_history_csv(const std::vector<EpochRecord>& history);

}  // namespace dapotion
