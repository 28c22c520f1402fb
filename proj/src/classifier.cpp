#include "lorafp/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <optional>
#include <random>
#include <set>

#include "lorafp/error.hpp"
#include "lorafp/seeding.hpp"

namespace lorafp {

namespace {

constexpr std::uint64_t kSplitStream = 0x73706c6974;  // "split"
constexpr std::uint64_t kShuffleStream = 0x73687566;  // "shuf"

nn::Tensor<float> gather(const TrainingSet& data, std::span<const std::size_t> rows) {
  nn::Tensor<float> t;
  t.reshape(static_cast<int>(rows.size()), data.shape);
  const std::size_t stride = data.shape.size();
  for (std::size_t i = 0; i < rows.size(); ++i)
    std::memcpy(t.sample(static_cast<int>(i)), data.inputs.data() + rows[i] * stride, stride * sizeof(float));
  return t;
}

struct Adam {
  const TrainConfig& cfg;
  std::vector<std::vector<float>> m, v;
  long step = 0;

  Adam(const TrainConfig& c, const std::vector<nn::ParamRef<float>>& params) : cfg(c) {
    for (const auto& p : params) {
      m.emplace_back(p.value.size(), 0.0f);
      v.emplace_back(p.value.size(), 0.0f);
    }
  }

  void update(const std::vector<nn::ParamRef<float>>& params, double lr) {
    ++step;
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
    const float b1 = static_cast<float>(cfg.beta1), b2 = static_cast<float>(cfg.beta2);
    const float step_size = static_cast<float>(lr / c1);
    const float inv_c2 = static_cast<float>(1.0 / c2);
    const float eps = static_cast<float>(cfg.epsilon);
    for (std::size_t k = 0; k < params.size(); ++k) {
      float* w = params[k].value.data();
      const float* g = params[k].grad.data();
      float* mk = m[k].data();
      float* vk = v[k].data();
      for (std::size_t i = 0; i < params[k].value.size(); ++i) {
        mk[i] = b1 * mk[i] + (1.0f - b1) * g[i];
        vk[i] = b2 * vk[i] + (1.0f - b2) * g[i] * g[i];
        w[i] -= step_size * mk[i] / (std::sqrt(vk[i] * inv_c2) + eps);
      }
    }
  }
};

struct LossAccuracy {
  double loss = 0.0;
  double accuracy = 0.0;
};

// Mean loss and accuracy over rows, evaluated in fixed-order batches.
LossAccuracy evaluate(nn::Network<float>& net, const TrainingSet& data, const std::vector<int>& labels,
                      const std::vector<std::size_t>& rows, int batch_size, nn::Mode mode) {
  LossAccuracy r;
  if (rows.empty()) return r;
  double loss_sum = 0.0;
  std::size_t correct = 0;
  const int k = net.num_classes();
  for (std::size_t first = 0; first < rows.size(); first += static_cast<std::size_t>(batch_size)) {
    const std::size_t count = std::min(rows.size() - first, static_cast<std::size_t>(batch_size));
    const std::span<const std::size_t> batch_rows(rows.data() + first, count);
    const nn::Tensor<float> x = gather(data, batch_rows);
    std::vector<int> y(count);
    for (std::size_t i = 0; i < count; ++i) y[i] = labels[batch_rows[i]];
    loss_sum += static_cast<double>(net.loss(x, y, mode)) * static_cast<double>(count);
    const auto& z = net.logits();
    for (std::size_t i = 0; i < count; ++i) {
      const float* row = z.data() + i * static_cast<std::size_t>(k);
      if (std::max_element(row, row + k) - row == y[i]) ++correct;
    }
  }
  r.loss = loss_sum / static_cast<double>(rows.size());
  r.accuracy = static_cast<double>(correct) / static_cast<double>(rows.size());
  return r;
}

}  // namespace

void TrainConfig::validate() const {
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("train.beta1 must lie in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("train.beta2 must lie in [0, 1)");
  if (!(epsilon > 0.0)) throw ConfigError("train.epsilon must be positive");
  if (!(initial_lr > 0.0) || !std::isfinite(initial_lr)) throw ConfigError("train.initial_lr must be positive");
  if (lr_drop_period < 1) throw ConfigError("train.lr_drop_period must be at least 1");
  if (!(lr_drop_factor > 0.0 && lr_drop_factor <= 1.0)) throw ConfigError("train.lr_drop_factor must lie in (0, 1]");
  if (batch_size < 1) throw ConfigError("train.batch_size must be at least 1");
  if (epochs < 1) throw ConfigError("train.epochs must be at least 1");
  if (patience < 0) throw ConfigError("train.patience must not be negative");
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0))
    throw ConfigError("train.validation_fraction must lie in [0, 1)");
}

double learning_rate(const TrainConfig& cfg, int epoch) {
  if (epoch < 1) throw ConfigError("epochs are counted from 1");
  return cfg.initial_lr * std::pow(cfg.lr_drop_factor, (epoch - 1) / cfg.lr_drop_period);
}

void CfoDatabase::validate() const {
  if (!(lambda > 0.0)) throw ConfigError("lambda must be positive");
  for (const auto& [id, hz] : reference)
    if (!std::isfinite(hz))
      throw DatabaseIntegrityError("reference CFO of device " + std::to_string(id) + " is not finite");
}

void TrainingSet::add(std::span<const float> input, int device, double cfo_estimate) {
  if (input.size() != shape.size())
    throw ShapeError("training input has " + std::to_string(input.size()) + " values, expected " + shape.str());
  inputs.insert(inputs.end(), input.begin(), input.end());
  devices.push_back(device);
  cfo.push_back(cfo_estimate);
}

TrainResult train(const nn::CnnSpec& spec, const TrainConfig& cfg, const TrainingSet& data, double lambda,
                  const EpochCallback& on_epoch) {
  cfg.validate();
  if (!(lambda > 0.0)) throw ConfigError("lambda must be positive");
  if (spec.input != data.shape)
    throw ShapeError("network input " + spec.input.str() + " does not match data shape " + data.shape.str());
  if (data.inputs.size() != data.size() * data.shape.size() || data.cfo.size() != data.size())
    throw DatasetError("training set arrays have inconsistent lengths");

  std::set<int> ids(data.devices.begin(), data.devices.end());
  for (int id : data.expected_devices)
    if (!ids.count(id)) throw DatasetError("device " + std::to_string(id) + " has no training examples");
  if (!data.expected_devices.empty()) {
    const std::set<int> expected(data.expected_devices.begin(), data.expected_devices.end());
    for (int id : ids)
      if (!expected.count(id)) throw DatasetError("unexpected device " + std::to_string(id) + " in training set");
  }
  if (ids.size() < 2) throw DatasetError("training needs at least two devices, got " + std::to_string(ids.size()));
  if (spec.num_classes != static_cast<int>(ids.size()))
    throw ShapeError("network has " + std::to_string(spec.num_classes) + " classes but the data has " +
                     std::to_string(ids.size()) + " devices");

  TrainResult result;
  result.model.device_ids.assign(ids.begin(), ids.end());
  const auto& dev = result.model.device_ids;
  std::vector<int> labels(data.size());
  for (std::size_t i = 0; i < data.size(); ++i)
    labels[i] = static_cast<int>(std::lower_bound(dev.begin(), dev.end(), data.devices[i]) - dev.begin());

  // Reference CFO: mean estimate per device.
  result.database.lambda = lambda;
  std::map<int, std::pair<double, std::size_t>> acc;
  for (std::size_t i = 0; i < data.size(); ++i) {
    auto& a = acc[data.devices[i]];
    a.first += data.cfo[i];
    ++a.second;
  }
  for (const auto& [id, a] : acc) result.database.reference[id] = a.first / static_cast<double>(a.second);

  // Validation split, stratified per device.
  std::vector<std::size_t> train_rows, val_rows;
  {
    std::mt19937_64 rng(derive_seed({cfg.seed, kSplitStream}));
    std::vector<std::vector<std::size_t>> per_class(dev.size());
    for (std::size_t i = 0; i < data.size(); ++i) per_class[static_cast<std::size_t>(labels[i])].push_back(i);
    for (auto& rows : per_class) {
      std::shuffle(rows.begin(), rows.end(), rng);
      auto n_val = static_cast<std::size_t>(std::llround(cfg.validation_fraction * static_cast<double>(rows.size())));
      n_val = std::min(n_val, rows.size() - 1);
      val_rows.insert(val_rows.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n_val));
      train_rows.insert(train_rows.end(), rows.begin() + static_cast<std::ptrdiff_t>(n_val), rows.end());
    }
    std::sort(train_rows.begin(), train_rows.end());
    std::sort(val_rows.begin(), val_rows.end());
  }
  auto& hist = result.history;
  hist.train_examples = train_rows.size();
  hist.validation_examples = val_rows.size();

  nn::Network<float> net(spec, derive_seed({cfg.seed}));
  hist.initial_loss = evaluate(net, data, labels, train_rows, cfg.batch_size, nn::Mode::probe).loss;
  nn::Network<float> best = net;
  double best_val = std::numeric_limits<double>::infinity();
  int stagnant = 0;

  auto params = net.parameters();
  Adam adam(cfg, params);
  std::vector<std::size_t> order = train_rows;
  std::vector<int> y;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    EpochStats st;
    st.epoch = epoch;
    st.lr = learning_rate(cfg, epoch);
    std::mt19937_64 rng(derive_seed({cfg.seed, kShuffleStream, static_cast<std::uint64_t>(epoch)}));
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    int batch_index = 0;
    for (std::size_t first = 0; first < order.size(); first += static_cast<std::size_t>(cfg.batch_size)) {
      ++batch_index;
      const std::size_t count = std::min(order.size() - first, static_cast<std::size_t>(cfg.batch_size));
      const std::span<const std::size_t> rows(order.data() + first, count);
      const nn::Tensor<float> x = gather(data, rows);
      y.resize(count);
      for (std::size_t i = 0; i < count; ++i) y[i] = labels[rows[i]];
      const float loss = net.loss_and_gradient(x, y, nn::Mode::training);
      if (!std::isfinite(loss)) throw DivergenceError(epoch, batch_index);
      adam.update(params, st.lr);
      loss_sum += static_cast<double>(loss) * static_cast<double>(count);
    }
    st.train_loss = loss_sum / static_cast<double>(order.size());
    if (epoch == 1)
      hist.first_epoch_loss = evaluate(net, data, labels, train_rows, cfg.batch_size, nn::Mode::probe).loss;

    if (!val_rows.empty()) {
      const auto v = evaluate(net, data, labels, val_rows, cfg.batch_size, nn::Mode::inference);
      st.val_loss = v.loss;
      st.val_accuracy = v.accuracy;
      if (v.loss < best_val) {
        best_val = v.loss;
        best = net;
        hist.best_epoch = epoch;
        stagnant = 0;
      } else {
        ++stagnant;
      }
    } else {
      best = net;
      hist.best_epoch = epoch;
    }
    hist.epochs.push_back(st);
    if (on_epoch) on_epoch(st);
    if (cfg.patience > 0 && stagnant >= cfg.patience) break;
  }

  // Replace the running averages with exact statistics of the training portion.
  best.begin_population_statistics();
  for (std::size_t first = 0; first < train_rows.size(); first += static_cast<std::size_t>(cfg.batch_size)) {
    const std::size_t count = std::min(train_rows.size() - first, static_cast<std::size_t>(cfg.batch_size));
    best.forward(gather(data, std::span<const std::size_t>(train_rows.data() + first, count)), nn::Mode::population);
  }
  best.end_population_statistics();
  result.model.net = std::move(best);
  return result;
}

std::size_t argmax(std::span<const double> values) {
  if (values.empty()) throw ShapeError("argmax of an empty vector");
  return static_cast<std::size_t>(std::max_element(values.begin(), values.end()) - values.begin());
}

std::vector<SoftmaxOutput> forward(Classifier& model, const nn::Tensor<float>& batch) {
  model.net.forward(batch, nn::Mode::inference);
  const auto& z = model.net.logits();
  const auto k = static_cast<std::size_t>(model.num_classes());
  std::vector<SoftmaxOutput> out(static_cast<std::size_t>(batch.n));
  std::vector<double> row(k);
  for (std::size_t b = 0; b < out.size(); ++b) {
    for (std::size_t j = 0; j < k; ++j) row[j] = static_cast<double>(z[b * k + j]);
    out[b].probs = nn::softmax<double>(row);
  }
  return out;
}

Prediction decide_cnn(const std::vector<int>& device_ids, SoftmaxOutput output) {
  if (output.probs.size() != device_ids.size()) throw ShapeError("probability vector does not match the class list");
  Prediction p;
  p.label = device_ids[argmax(output.probs)];
  p.output = std::move(output);
  return p;
}

Prediction decide_hybrid(const std::vector<int>& device_ids, SoftmaxOutput output, double dut_cfo,
                         const CfoDatabase& db) {
  if (output.probs.size() != device_ids.size()) throw ShapeError("probability vector does not match the class list");
  SoftmaxOutput gated = output;
  std::optional<std::size_t> best;
  for (std::size_t k = 0; k < device_ids.size(); ++k) {
    const auto it = db.reference.find(device_ids[k]);
    if (it == db.reference.end())
      throw DatabaseIntegrityError("device " + std::to_string(device_ids[k]) + " has no reference CFO");
    if (std::abs(dut_cfo - it->second) > db.lambda)
      gated.probs[k] = 0.0;
    else if (!best || gated.probs[k] > gated.probs[*best])
      best = k;
  }
  if (!best) {
    Prediction p = decide_cnn(device_ids, std::move(output));
    p.out_of_database = true;
    return p;
  }
  // Survivors only, so a surviving class whose probability underflowed to zero still beats gated ones.
  Prediction p;
  p.label = device_ids[*best];
  p.output = std::move(gated);
  return p;
}

Prediction predict_cnn(Classifier& model, const nn::Tensor<float>& input) {
  if (input.n != 1) throw ShapeError("predict takes a single example");
  return decide_cnn(model.device_ids, std::move(forward(model, input).front()));
}

Prediction predict_hybrid(Classifier& model, const nn::Tensor<float>& input, double dut_cfo, const CfoDatabase& db) {
  if (input.n != 1) throw ShapeError("predict takes a single example");
  return decide_hybrid(model.device_ids, std::move(forward(model, input).front()), dut_cfo, db);
}

double gradient_check(const nn::CnnSpec& spec, const nn::Tensor<double>& input, std::span<const int> labels,
                      std::uint64_t seed, double step, double floor) {
  nn::Network<double> net(spec, seed);
  net.loss_and_gradient(input, labels, nn::Mode::probe);
  double worst = 0.0;
  for (auto& p : net.parameters()) {
    const std::vector<double> analytic(p.grad.begin(), p.grad.end());
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double saved = p.value[i];
      p.value[i] = saved + step;
      const double up = net.loss(input, labels, nn::Mode::probe);
      p.value[i] = saved - step;
      const double down = net.loss(input, labels, nn::Mode::probe);
      p.value[i] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), floor});
      worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
    }
  }
  return worst;
}

}  // namespace lorafp
