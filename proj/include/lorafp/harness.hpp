#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "lorafp/checkpoint.hpp"
#include "lorafp/config.hpp"
#include "lorafp/dataset.hpp"
#include "lorafp/pipeline.hpp"

namespace lorafp {

using LogFn = std::function<void(const std::string&)>;

/// Record indices of a selection in container order. Throws DatasetError when a selected
/// device-session holds fewer packets than requested or a session does not exist.
std::vector<std::size_t> select_records(const DatasetManifest& manifest, const Selection& selection);

/// Runs the receiver chain over records in parallel chunks and hands each chunk (in record order)
/// to sink together with the record metadata.
void for_each_chain_chunk(DatasetReader& reader, const std::vector<std::size_t>& records, const ChainOptions& options,
                          const std::function<void(const std::vector<RecordMeta>&, std::vector<ChainOutput>&)>& sink,
                          std::size_t chunk = 256);

struct GenerateSummary {
  std::size_t devices = 0;
  std::size_t packets = 0;
  std::uintmax_t bytes = 0;
};

/// Writes the configured capture. Refuses to overwrite an existing file unless force is set.
GenerateSummary cli_generate(const ExperimentConfig& cfg, const std::filesystem::path& out, bool force,
                             const LogFn& log = {});

struct TrainRequest {
  Representation representation = Representation::spectrogram;
  bool compensate = true;
};

struct TrainSummary {
  TrainHistory history;
  CfoDatabase database;
  std::size_t examples = 0;
};

/// Trains on cfg.train_selection of the dataset and writes a checkpoint.
TrainSummary cli_train(const std::filesystem::path& dataset, const ExperimentConfig& cfg, const TrainRequest& request,
                       const std::filesystem::path& out, bool force, const LogFn& log = {});

enum class ClassifierKind { cnn, hybrid };
ClassifierKind parse_classifier(const std::string& name);
std::string to_string(ClassifierKind kind);

struct EvalRequest {
  ClassifierKind classifier = ClassifierKind::hybrid;
  std::optional<double> lambda;    ///< overrides the checkpoint's threshold
  std::optional<bool> compensate;  ///< must agree with the checkpoint when given
  Selection test_selection{{1}, 1000, 0};
  bool allow_overlap = false;
  std::size_t batch_size = 64;
};

/// CFO estimate statistics of one device in one session.
struct CfoSessionStats {
  int device_id = 0;
  int session_index = 0;
  std::size_t packets = 0;
  double mean_true = 0.0;
  double mean_estimate = 0.0;
  double std_estimate = 0.0;
  double rms_error = 0.0;
  double max_abs_error = 0.0;
};

struct EvalReport {
  Representation representation = Representation::spectrogram;
  bool compensated = true;
  ClassifierKind classifier = ClassifierKind::hybrid;
  double lambda = 0.0;
  std::vector<int> device_ids;
  /// Rows are true devices, columns predicted devices, for the selected classifier.
  std::vector<std::vector<std::size_t>> confusion;
  std::size_t total = 0;
  double accuracy = 0.0;
  std::vector<double> per_device_accuracy;
  double cnn_accuracy = 0.0;
  double hybrid_accuracy = 0.0;
  std::size_t out_of_database = 0;  ///< hybrid predictions where every class was gated
  std::vector<CfoSessionStats> cfo;
  Selection train_selection;
  Selection test_selection;
  std::string test_dataset;  ///< profiles digest and seed of the evaluated dataset
};

/// Classifies the test selection with the checkpoint and accumulates the report.
/// Throws ConfigError on a compensation mode mismatch and DatasetError on label or overlap problems.
EvalReport cli_eval(const std::filesystem::path& checkpoint, const std::filesystem::path& dataset,
                    const EvalRequest& request, const LogFn& log = {});

/// Human-readable report; the first line is the only one carrying the timestamp.
std::string format_report_text(const EvalReport& report, const std::string& timestamp);
/// Long-format table: section,device,predicted,session,metric,value.
std::string format_report_csv(const EvalReport& report);
/// Writes path (text) and path with extension .csv.
void write_report(const EvalReport& report, const std::filesystem::path& path, const std::string& timestamp);

struct CfoSeriesPoint {
  int device_id = 0;
  int session_index = 0;
  std::size_t packet = 0;
  double elapsed = 0.0;
  double true_cfo = 0.0;
  double estimate = 0.0;
  double smoothed = 0.0;  ///< trailing mean of the last kCfoSmoothingWindow estimates of the device-session
};

inline constexpr std::size_t kCfoSmoothingWindow = 50;

struct CfoReport {
  std::vector<CfoSeriesPoint> series;
  std::vector<CfoSessionStats> sessions;
  double rms_error = 0.0;
  double max_abs_error = 0.0;
  double mean_error = 0.0;
};

/// Estimates the CFO of every packet and summarizes it per device and session.
CfoReport cli_cfo_report(const std::filesystem::path& dataset, const LogFn& log = {});
/// Writes series.csv, sessions.csv and summary.txt into dir.
void write_cfo_report(const CfoReport& report, const std::filesystem::path& dir, const std::string& timestamp);

/// UTC time as ISO 8601.
std::string utc_timestamp();

}  // namespace lorafp
