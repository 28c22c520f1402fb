#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <span>
#include <vector>

#include "lorafp/nn/network.hpp"

namespace lorafp {

/// Probabilities over the model's classes, in class-index order.
struct SoftmaxOutput {
  std::vector<double> probs;
};

struct TrainConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double initial_lr = 3e-4;
  int lr_drop_period = 10;  ///< epochs
  double lr_drop_factor = 0.3;
  int batch_size = 32;
  int epochs = 30;
  int patience = 5;  ///< stop after this many epochs without a better validation loss; 0 disables
  double validation_fraction = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Step-decay schedule; epochs are 1-based.
double learning_rate(const TrainConfig& cfg, int epoch);

/// Reference CFO per device and the gating threshold.
struct CfoDatabase {
  std::map<int, double> reference;  ///< device id -> Hz
  double lambda = 200.0;            ///< Hz; +inf disables gating

  void validate() const;
  bool operator==(const CfoDatabase&) const = default;
};

/// Labeled CNN inputs plus the total CFO estimate of every example.
struct TrainingSet {
  nn::Shape shape;
  std::vector<float> inputs;  ///< size() * shape.size() values
  std::vector<int> devices;
  std::vector<double> cfo;
  /// Devices that must be present; empty means "whatever appears in devices".
  std::vector<int> expected_devices;

  std::size_t size() const noexcept { return devices.size(); }
  void add(std::span<const float> input, int device, double cfo_estimate);
};

/// Network plus the mapping from class index to device id (ascending ids).
struct Classifier {
  nn::Network<float> net;
  std::vector<int> device_ids;

  int num_classes() const noexcept { return static_cast<int>(device_ids.size()); }
};

struct EpochStats {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;  ///< mean mini-batch loss over the epoch
  double val_loss = 0.0;
  double val_accuracy = 0.0;
};

struct TrainHistory {
  double initial_loss = 0.0;      ///< training-set loss before the first update
  double first_epoch_loss = 0.0;  ///< same measurement after the first epoch
  std::vector<EpochStats> epochs;
  int best_epoch = 0;  ///< epoch whose parameters were kept (0 if none improved)
  std::size_t train_examples = 0, validation_examples = 0;
};

struct TrainResult {
  Classifier model;
  CfoDatabase database;
  TrainHistory history;
};

using EpochCallback = std::function<void(const EpochStats&)>;

/// Mini-batch Adam on mean cross-entropy with step-decay learning rate and early stopping on the
/// validation loss. The database holds the mean CFO estimate of each device over the whole set.
/// Throws DatasetError (fewer than 2 classes, empty class) and DivergenceError.
TrainResult train(const nn::CnnSpec& spec, const TrainConfig& cfg, const TrainingSet& data, double lambda = 200.0,
                  const EpochCallback& on_epoch = {});

struct Prediction {
  int label = 0;  ///< device id
  SoftmaxOutput output;
  bool out_of_database = false;  ///< every class was gated; label is the ungated argmax
};

/// Index of the largest entry; ties go to the lowest index.
std::size_t argmax(std::span<const double> values);

/// Softmax of every row of a batch, computed in double precision from the network logits.
std::vector<SoftmaxOutput> forward(Classifier& model, const nn::Tensor<float>& batch);

Prediction predict_cnn(Classifier& model, const nn::Tensor<float>& input);
/// Zeroes classes whose reference CFO is farther than lambda from dut_cfo, then takes the argmax.
/// Throws DatabaseIntegrityError when a model class has no reference.
Prediction predict_hybrid(Classifier& model, const nn::Tensor<float>& input, double dut_cfo, const CfoDatabase& db);

/// Decision rules on precomputed probabilities.
Prediction decide_cnn(const std::vector<int>& device_ids, SoftmaxOutput output);
Prediction decide_hybrid(const std::vector<int>& device_ids, SoftmaxOutput output, double dut_cfo,
                         const CfoDatabase& db);

/// Largest relative error between backpropagated and central-difference gradients over every
/// parameter, in double precision with batch statistics. The relative error of one entry is
/// |a - n| / max(|a|, |n|, floor); the floor keeps gradients that vanish by symmetry (conv biases
/// feeding a batchnorm) from turning rounding noise into large ratios.
double gradient_check(const nn::CnnSpec& spec, const nn::Tensor<double>& input, std::span<const int> labels,
                      std::uint64_t seed = 1, double step = 1e-5, double floor = 1e-6);

}  // namespace lorafp
