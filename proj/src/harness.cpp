#include "lorafp/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <exception>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

#include "lorafp/error.hpp"

namespace lorafp {

namespace {

void say(const LogFn& log, const std::string& msg) {
  if (log) log(msg);
}

ChainOptions chain_for(const DatasetManifest& m, Representation rep, bool compensate, const SpectrogramConfig& sc) {
  ChainOptions o;
  o.params = m.params;
  o.compensate = compensate;
  o.representation = rep;
  o.spectrogram = sc;
  o.synchronize = m.schedule.leading_padding > 0;
  return o;
}

void refuse_existing(const std::filesystem::path& out, bool force) {
  if (!force && std::filesystem::exists(out))
    throw IoError(out.string() + " already exists; pass --force to overwrite");
}

std::string dataset_tag(const DatasetManifest& m) {
  return m.profiles_digest() + "/seed=" + std::to_string(m.master_seed);
}

// Running sums for CFO statistics of one device-session.
struct CfoAccumulator {
  std::size_t n = 0;
  double sum_true = 0.0, sum_est = 0.0, sum_est_sq = 0.0, sum_err_sq = 0.0, max_err = 0.0;

  void add(double truth, double estimate) {
    ++n;
    sum_true += truth;
    sum_est += estimate;
    sum_est_sq += estimate * estimate;
    const double e = estimate - truth;
    sum_err_sq += e * e;
    max_err = std::max(max_err, std::abs(e));
  }

  CfoSessionStats stats(int device, int session) const {
    CfoSessionStats s;
    s.device_id = device;
    s.session_index = session;
    s.packets = n;
    if (n == 0) return s;
    const double dn = static_cast<double>(n);
    s.mean_true = sum_true / dn;
    s.mean_estimate = sum_est / dn;
    s.std_estimate = std::sqrt(std::max(0.0, sum_est_sq / dn - s.mean_estimate * s.mean_estimate));
    s.rms_error = std::sqrt(sum_err_sq / dn);
    s.max_abs_error = max_err;
    return s;
  }
};

std::string fixed(double v, int digits) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

std::string significant(double v, int digits) {
  std::ostringstream s;
  s << std::setprecision(digits) << v;
  return s.str();
}

std::string number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

}  // namespace

std::vector<std::size_t> select_records(const DatasetManifest& m, const Selection& sel) {
  std::vector<int> sessions;
  for (const SessionPlan& p : m.schedule.sessions)
    if (sel.sessions.empty() || std::count(sel.sessions.begin(), sel.sessions.end(), p.session_index))
      sessions.push_back(p.session_index);
  for (int s : sel.sessions)
    if (std::find(sessions.begin(), sessions.end(), s) == sessions.end())
      throw DatasetError("dataset has no session " + std::to_string(s));
  std::vector<std::size_t> out;
  for (int s : sessions)
    for (const DeviceProfile& p : m.profiles) {
      const RecordGroup& g = m.group(s, p.device_id);
      const std::size_t end = sel.count == 0 ? g.count : sel.first + sel.count;
      if (sel.first >= g.count || end > g.count)
        throw DatasetError("selection " + sel.describe() + " needs packets up to " + std::to_string(end) +
                           " but device " + std::to_string(p.device_id) + " has " + std::to_string(g.count) +
                           " in session " + std::to_string(s));
      for (std::size_t k = sel.first; k < end; ++k) out.push_back(g.first_record + k);
    }
  return out;
}

void for_each_chain_chunk(DatasetReader& reader, const std::vector<std::size_t>& records, const ChainOptions& options,
                          const std::function<void(const std::vector<RecordMeta>&, std::vector<ChainOutput>&)>& sink,
                          std::size_t chunk) {
  std::vector<PacketRecord> packets;
  std::vector<RecordMeta> metas;
  std::vector<ChainOutput> outputs;
  for (std::size_t first = 0; first < records.size(); first += chunk) {
    const std::size_t count = std::min(chunk, records.size() - first);
    packets.clear();
    metas.clear();
    for (std::size_t i = 0; i < count; ++i) {
      packets.push_back(reader.record(records[first + i]));
      const PacketRecord& r = packets.back();
      metas.push_back({r.true_device, r.context.session_index, r.true_cfo, r.context.elapsed, r.context.snr_db,
                       r.context.rng_seed});
    }
    outputs.assign(count, {});
    std::vector<std::exception_ptr> errors(count);
#pragma omp parallel for schedule(dynamic)
    for (std::size_t i = 0; i < count; ++i) {
      try {
        outputs[i] = run_chain(packets[i].signal, options);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
    for (const auto& e : errors)
      if (e) std::rethrow_exception(e);
    sink(metas, outputs);
  }
}

GenerateSummary cli_generate(const ExperimentConfig& cfg, const std::filesystem::path& out, bool force,
                             const LogFn& log) {
  cfg.validate();
  refuse_existing(out, force);
  generate_dataset(cfg.lora, cfg.profiles, cfg.schedule, cfg.seed, out);
  GenerateSummary s;
  s.devices = cfg.profiles.size();
  s.packets = cfg.profiles.size() * cfg.schedule.packets_per_device();
  s.bytes = std::filesystem::file_size(out);
  say(log, "wrote " + out.string() + ": " + std::to_string(s.devices) + " devices, " + std::to_string(s.packets) +
               " packets, " + std::to_string(s.bytes) + " bytes");
  return s;
}

TrainSummary cli_train(const std::filesystem::path& dataset, const ExperimentConfig& cfg, const TrainRequest& request,
                       const std::filesystem::path& out, bool force, const LogFn& log) {
  refuse_existing(out, force);
  DatasetReader reader(dataset);
  const DatasetManifest& m = reader.manifest();
  const ChainOptions chain = chain_for(m, request.representation, request.compensate, cfg.spectrogram);
  const auto records = select_records(m, cfg.train_selection);

  TrainingSet data;
  data.shape = chain_shape(chain);
  data.expected_devices = m.device_ids();
  data.inputs.reserve(records.size() * data.shape.size());
  for_each_chain_chunk(reader, records, chain,
                       [&](const std::vector<RecordMeta>& metas, std::vector<ChainOutput>& outs) {
                         for (std::size_t i = 0; i < metas.size(); ++i)
                           data.add(outs[i].features, metas[i].true_device, outs[i].cfo.total);
                       });
  say(log, "training on " + std::to_string(data.size()) + " packets (" + cfg.train_selection.describe() + "), input " +
               data.shape.str());

  const auto spec = make_spec(request.representation, data.shape, static_cast<int>(m.profiles.size()), cfg.model);
  TrainResult r = train(spec, cfg.train, data, cfg.lambda, [&](const EpochStats& e) {
    say(log, "epoch " + std::to_string(e.epoch) + " lr " + significant(e.lr, 6) + " train_loss " +
                 fixed(e.train_loss, 5) + " val_loss " + fixed(e.val_loss, 5) + " val_acc " + fixed(e.val_accuracy, 4));
  });

  Checkpoint ckpt;
  ckpt.model = std::move(r.model);
  ckpt.database = r.database;
  ckpt.representation = request.representation;
  ckpt.compensated = request.compensate;
  ckpt.spectrogram = cfg.spectrogram;
  ckpt.lora = m.params;
  ckpt.dataset = {m.profiles_digest(), m.master_seed};
  ckpt.train_selection = cfg.train_selection;
  save_checkpoint(ckpt, out);
  say(log, "wrote " + out.string());

  TrainSummary s;
  s.history = std::move(r.history);
  s.database = std::move(r.database);
  s.examples = data.size();
  return s;
}

ClassifierKind parse_classifier(const std::string& name) {
  if (name == "cnn") return ClassifierKind::cnn;
  if (name == "hybrid") return ClassifierKind::hybrid;
  throw ConfigError("unknown classifier '" + name + "' (expected cnn or hybrid)");
}

std::string to_string(ClassifierKind kind) { return kind == ClassifierKind::cnn ? "cnn" : "hybrid"; }

EvalReport cli_eval(const std::filesystem::path& checkpoint, const std::filesystem::path& dataset,
                    const EvalRequest& request, const LogFn& log) {
  Checkpoint ckpt = load_checkpoint(checkpoint);
  if (request.compensate && *request.compensate != ckpt.compensated)
    throw ConfigError(std::string("checkpoint was trained with compensation ") + (ckpt.compensated ? "on" : "off") +
                      "; refusing to evaluate with compensation " + (*request.compensate ? "on" : "off"));
  DatasetReader reader(dataset);
  const DatasetManifest& m = reader.manifest();
  if (!(m.params == ckpt.lora)) throw ConfigError("dataset LoRa parameters differ from the checkpoint's");
  for (int id : m.device_ids())
    if (!std::binary_search(ckpt.model.device_ids.begin(), ckpt.model.device_ids.end(), id))
      throw DatasetError("dataset device " + std::to_string(id) + " is unknown to the checkpoint");
  const DatasetIdentity identity{m.profiles_digest(), m.master_seed};
  if (!request.allow_overlap && identity == ckpt.dataset &&
      overlaps(ckpt.train_selection, request.test_selection, m.schedule.sessions))
    throw DatasetError("test selection " + request.test_selection.describe() + " overlaps the training selection " +
                       ckpt.train_selection.describe() + "; pass --allow-overlap to proceed");

  CfoDatabase db = ckpt.database;
  if (request.lambda) db.lambda = *request.lambda;
  db.validate();
  for (int id : ckpt.model.device_ids)
    if (!db.reference.count(id)) throw DatabaseIntegrityError("device " + std::to_string(id) + " has no reference CFO");

  const ChainOptions chain = chain_for(m, ckpt.representation, ckpt.compensated, ckpt.spectrogram);
  const nn::Shape shape = chain_shape(chain);
  if (shape != ckpt.model.net.spec().input)
    throw ShapeError("dataset yields inputs " + shape.str() + " but the model expects " +
                     ckpt.model.net.spec().input.str());
  const auto records = select_records(m, request.test_selection);

  EvalReport rep;
  rep.representation = ckpt.representation;
  rep.compensated = ckpt.compensated;
  rep.classifier = request.classifier;
  rep.lambda = db.lambda;
  rep.device_ids = ckpt.model.device_ids;
  rep.train_selection = ckpt.train_selection;
  rep.test_selection = request.test_selection;
  rep.test_dataset = dataset_tag(m);
  const std::size_t k = rep.device_ids.size();
  const auto index_of = [&](int id) {
    return static_cast<std::size_t>(std::lower_bound(rep.device_ids.begin(), rep.device_ids.end(), id) -
                                    rep.device_ids.begin());
  };
  std::vector<std::vector<std::size_t>> conf_cnn(k, std::vector<std::size_t>(k, 0)), conf_hybrid = conf_cnn;
  std::map<std::pair<int, int>, CfoAccumulator> cfo;

  for_each_chain_chunk(reader, records, chain,
                       [&](const std::vector<RecordMeta>& metas, std::vector<ChainOutput>& outs) {
                         for (std::size_t first = 0; first < metas.size(); first += request.batch_size) {
                           const std::size_t count = std::min(request.batch_size, metas.size() - first);
                           nn::Tensor<float> batch;
                           batch.reshape(static_cast<int>(count), shape);
                           for (std::size_t i = 0; i < count; ++i)
                             std::copy(outs[first + i].features.begin(), outs[first + i].features.end(),
                                       batch.sample(static_cast<int>(i)));
                           auto probs = forward(ckpt.model, batch);
                           for (std::size_t i = 0; i < count; ++i) {
                             const RecordMeta& meta = metas[first + i];
                             const double est = outs[first + i].cfo.total;
                             const std::size_t truth = index_of(meta.true_device);
                             const Prediction pc = decide_cnn(rep.device_ids, probs[i]);
                             const Prediction ph = decide_hybrid(rep.device_ids, std::move(probs[i]), est, db);
                             ++conf_cnn[truth][index_of(pc.label)];
                             ++conf_hybrid[truth][index_of(ph.label)];
                             if (ph.out_of_database) ++rep.out_of_database;
                             cfo[{meta.true_device, meta.session_index}].add(meta.true_cfo, est);
                           }
                         }
                         say(log, "classified " + std::to_string(metas.size()) + " packets");
                       });

  const auto trace = [k](const std::vector<std::vector<std::size_t>>& c) {
    std::size_t t = 0;
    for (std::size_t i = 0; i < k; ++i) t += c[i][i];
    return t;
  };
  rep.total = records.size();
  const double total = static_cast<double>(std::max<std::size_t>(rep.total, 1));
  rep.cnn_accuracy = static_cast<double>(trace(conf_cnn)) / total;
  rep.hybrid_accuracy = static_cast<double>(trace(conf_hybrid)) / total;
  rep.confusion = request.classifier == ClassifierKind::cnn ? conf_cnn : conf_hybrid;
  rep.accuracy = request.classifier == ClassifierKind::cnn ? rep.cnn_accuracy : rep.hybrid_accuracy;
  rep.per_device_accuracy.resize(k);
  for (std::size_t i = 0; i < k; ++i) {
    std::size_t row = 0;
    for (std::size_t j = 0; j < k; ++j) row += rep.confusion[i][j];
    rep.per_device_accuracy[i] = row ? static_cast<double>(rep.confusion[i][i]) / static_cast<double>(row) : 0.0;
  }
  for (const auto& [key, acc] : cfo) rep.cfo.push_back(acc.stats(key.first, key.second));
  return rep;
}

std::string format_report_text(const EvalReport& r, const std::string& timestamp) {
  std::ostringstream s;
  s << "# lorafp evaluation report, generated " << timestamp << "\n";
  s << "representation: " << to_string(r.representation) << "\n";
  s << "compensation: " << (r.compensated ? "on" : "off") << "\n";
  s << "classifier: " << to_string(r.classifier) << "\n";
  s << "lambda_hz: " << number(r.lambda) << "\n";
  s << "train_selection: " << r.train_selection.describe() << "\n";
  s << "test_selection: " << r.test_selection.describe() << "\n";
  s << "test_dataset: " << r.test_dataset << "\n";
  s << "packets: " << r.total << "\n";
  s << "accuracy: " << fixed(r.accuracy, 6) << "\n";
  s << "cnn_accuracy: " << fixed(r.cnn_accuracy, 6) << "\n";
  s << "hybrid_accuracy: " << fixed(r.hybrid_accuracy, 6) << "\n";
  s << "out_of_database: " << r.out_of_database << "\n\n";
  s << "per-device accuracy\n";
  for (std::size_t i = 0; i < r.device_ids.size(); ++i)
    s << "  device " << std::setw(4) << r.device_ids[i] << ": " << fixed(r.per_device_accuracy[i], 6) << "\n";
  s << "\nconfusion (rows true, columns predicted)\n      ";
  for (int id : r.device_ids) s << std::setw(7) << id;
  s << "\n";
  for (std::size_t i = 0; i < r.device_ids.size(); ++i) {
    s << std::setw(6) << r.device_ids[i];
    for (std::size_t v : r.confusion[i]) s << std::setw(7) << v;
    s << "\n";
  }
  s << "\nCFO estimates [Hz]\n";
  s << "  device session packets   mean_true    mean_est     std_est   rms_error   max_error\n";
  for (const CfoSessionStats& c : r.cfo)
    s << "  " << std::setw(6) << c.device_id << std::setw(8) << c.session_index << std::setw(8) << c.packets
      << std::setw(12) << fixed(c.mean_true, 2) << std::setw(12) << fixed(c.mean_estimate, 2) << std::setw(12)
      << fixed(c.std_estimate, 2) << std::setw(12) << fixed(c.rms_error, 3) << std::setw(12)
      << fixed(c.max_abs_error, 3) << "\n";
  return s.str();
}

std::string format_report_csv(const EvalReport& r) {
  std::ostringstream s;
  s << "section,device,predicted,session,metric,value\n";
  s << "summary,,,,representation," << to_string(r.representation) << "\n";
  s << "summary,,,,compensated," << (r.compensated ? 1 : 0) << "\n";
  s << "summary,,,,classifier," << to_string(r.classifier) << "\n";
  s << "summary,,,,lambda_hz," << number(r.lambda) << "\n";
  s << "summary,,,,packets," << r.total << "\n";
  s << "summary,,,,accuracy," << number(r.accuracy) << "\n";
  s << "summary,,,,cnn_accuracy," << number(r.cnn_accuracy) << "\n";
  s << "summary,,,,hybrid_accuracy," << number(r.hybrid_accuracy) << "\n";
  s << "summary,,,,out_of_database," << r.out_of_database << "\n";
  for (std::size_t i = 0; i < r.device_ids.size(); ++i)
    s << "device," << r.device_ids[i] << ",,,accuracy," << number(r.per_device_accuracy[i]) << "\n";
  for (std::size_t i = 0; i < r.device_ids.size(); ++i)
    for (std::size_t j = 0; j < r.device_ids.size(); ++j)
      s << "confusion," << r.device_ids[i] << "," << r.device_ids[j] << ",,count," << r.confusion[i][j] << "\n";
  for (const CfoSessionStats& c : r.cfo) {
    const std::string key = "cfo," + std::to_string(c.device_id) + ",," + std::to_string(c.session_index) + ",";
    s << key << "packets," << c.packets << "\n";
    s << key << "mean_true_hz," << number(c.mean_true) << "\n";
    s << key << "mean_estimate_hz," << number(c.mean_estimate) << "\n";
    s << key << "std_estimate_hz," << number(c.std_estimate) << "\n";
    s << key << "rms_error_hz," << number(c.rms_error) << "\n";
    s << key << "max_abs_error_hz," << number(c.max_abs_error) << "\n";
  }
  return s.str();
}

void write_report(const EvalReport& report, const std::filesystem::path& path, const std::string& timestamp) {
  if (path.extension() == ".csv") throw ConfigError("--out names the text report; the CSV is written next to it");
  const std::string text = format_report_text(report, timestamp);
  const std::string csv = format_report_csv(report);
  write_file(path, text);
  write_file(std::filesystem::path(path).replace_extension(".csv"), csv);
}

CfoReport cli_cfo_report(const std::filesystem::path& dataset, const LogFn& log) {
  DatasetReader reader(dataset);
  const DatasetManifest& m = reader.manifest();
  ChainOptions chain = chain_for(m, Representation::iq, true, {});
  std::vector<std::size_t> all(m.record_count);
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;

  CfoReport rep;
  rep.series.reserve(all.size());
  std::vector<PacketRecord> packets;
  const std::size_t chunk = 512;
  for (std::size_t first = 0; first < all.size(); first += chunk) {
    const std::size_t count = std::min(chunk, all.size() - first);
    packets.clear();
    for (std::size_t i = 0; i < count; ++i) packets.push_back(reader.record(first + i));
    std::vector<double> est(count);
    std::vector<std::exception_ptr> errors(count);
#pragma omp parallel for schedule(dynamic)
    for (std::size_t i = 0; i < count; ++i) {
      try {
        est[i] = estimate_cfo(packets[i].signal, chain).total;
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
    for (const auto& e : errors)
      if (e) std::rethrow_exception(e);
    for (std::size_t i = 0; i < count; ++i) {
      CfoSeriesPoint p;
      p.device_id = packets[i].true_device;
      p.session_index = packets[i].context.session_index;
      p.elapsed = packets[i].context.elapsed;
      p.true_cfo = packets[i].true_cfo;
      p.estimate = est[i];
      rep.series.push_back(p);
    }
  }
  say(log, "estimated CFO of " + std::to_string(rep.series.size()) + " packets");

  std::map<std::pair<int, int>, CfoAccumulator> acc;
  double sum_err = 0.0, sum_err_sq = 0.0;
  // Records of one device-session are contiguous, so the trailing window restarts at each group.
  std::size_t group_start = 0;
  double window_sum = 0.0;
  for (std::size_t i = 0; i < rep.series.size(); ++i) {
    CfoSeriesPoint& p = rep.series[i];
    if (i > 0 && (p.device_id != rep.series[i - 1].device_id || p.session_index != rep.series[i - 1].session_index)) {
      group_start = i;
      window_sum = 0.0;
    }
    p.packet = i - group_start;
    window_sum += p.estimate;
    if (p.packet >= kCfoSmoothingWindow) window_sum -= rep.series[i - kCfoSmoothingWindow].estimate;
    p.smoothed = window_sum / static_cast<double>(std::min(p.packet + 1, kCfoSmoothingWindow));
    acc[{p.device_id, p.session_index}].add(p.true_cfo, p.estimate);
    const double e = p.estimate - p.true_cfo;
    sum_err += e;
    sum_err_sq += e * e;
    rep.max_abs_error = std::max(rep.max_abs_error, std::abs(e));
  }
  for (const auto& [key, a] : acc) rep.sessions.push_back(a.stats(key.first, key.second));
  if (!rep.series.empty()) {
    rep.mean_error = sum_err / static_cast<double>(rep.series.size());
    rep.rms_error = std::sqrt(sum_err_sq / static_cast<double>(rep.series.size()));
  }
  return rep;
}

void write_cfo_report(const CfoReport& r, const std::filesystem::path& dir, const std::string& timestamp) {
  std::filesystem::create_directories(dir);
  std::ostringstream series, sessions, summary;
  series << "device,session,packet,elapsed_s,true_cfo_hz,estimated_cfo_hz,smoothed_cfo_hz\n";
  for (const CfoSeriesPoint& p : r.series)
    series << p.device_id << "," << p.session_index << "," << p.packet << "," << number(p.elapsed) << ","
           << number(p.true_cfo) << "," << number(p.estimate) << "," << number(p.smoothed) << "\n";
  sessions << "device,session,packets,mean_true_hz,mean_estimate_hz,std_estimate_hz,rms_error_hz,max_abs_error_hz\n";
  for (const CfoSessionStats& c : r.sessions)
    sessions << c.device_id << "," << c.session_index << "," << c.packets << "," << number(c.mean_true) << ","
             << number(c.mean_estimate) << "," << number(c.std_estimate) << "," << number(c.rms_error) << ","
             << number(c.max_abs_error) << "\n";
  summary << "# lorafp CFO report, generated " << timestamp << "\n";
  summary << "packets: " << r.series.size() << "\n";
  summary << "mean_error_hz: " << fixed(r.mean_error, 4) << "\n";
  summary << "rms_error_hz: " << fixed(r.rms_error, 4) << "\n";
  summary << "max_abs_error_hz: " << fixed(r.max_abs_error, 4) << "\n";
  write_file(dir / "series.csv", series.str());
  write_file(dir / "sessions.csv", sessions.str());
  write_file(dir / "summary.txt", summary.str());
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream s;
  s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return s.str();
}

}  // namespace lorafp
