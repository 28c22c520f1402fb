#include <CLI11.hpp>
#include <iostream>
#include <optional>
#include <string>

#include "lorafp/error.hpp"
#include "lorafp/harness.hpp"

namespace {

void log_line(const std::string& msg) { std::cerr << msg << "\n"; }

std::optional<bool> tri_state(int compensate_count, int no_compensate_count) {
  if (compensate_count > 0 && no_compensate_count > 0)
    throw lorafp::ConfigError("--compensate and --no-compensate are mutually exclusive");
  if (compensate_count > 0) return true;
  if (no_compensate_count > 0) return false;
  return std::nullopt;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LoRa RF fingerprinting: simulate, train, evaluate"};
  app.require_subcommand(1);

  std::string config, dataset, checkpoint, out, representation = "spectrogram", classifier = "hybrid";
  std::optional<std::uint64_t> seed;
  std::optional<double> lambda;
  // Flags get one variable per subcommand: CLI11 resets a flag's target when a sibling
  // subcommand that shares it is not invoked.
  bool gen_force = false, train_force = false, allow_overlap = false;
  int train_compensate = 0, train_no_compensate = 0, eval_compensate = 0, eval_no_compensate = 0;
  std::vector<int> test_sessions;
  std::optional<std::size_t> test_first, test_count;

  auto* gen = app.add_subcommand("generate", "simulate a capture and write a dataset container");
  gen->add_option("--config", config, "experiment YAML")->required()->check(CLI::ExistingFile);
  gen->add_option("--out", out, "dataset path")->required();
  gen->add_option("--seed", seed, "dataset master seed (overrides the config)");
  gen->add_flag("--force", gen_force, "overwrite an existing file");

  auto* tr = app.add_subcommand("train", "train a classifier and write a checkpoint");
  tr->add_option("--config", config, "experiment YAML")->required()->check(CLI::ExistingFile);
  tr->add_option("--dataset", dataset, "dataset path")->required()->check(CLI::ExistingFile);
  tr->add_option("--representation", representation, "iq | fft | spectrogram")
      ->check(CLI::IsMember({"iq", "fft", "spectrogram"}));
  tr->add_flag("--compensate", train_compensate, "apply CFO compensation (default)");
  tr->add_flag("--no-compensate", train_no_compensate, "skip CFO compensation");
  tr->add_option("--lambda", lambda, "CFO gate threshold stored in the checkpoint [Hz]");
  tr->add_option("--seed", seed, "training seed (overrides the config)");
  tr->add_option("--out", out, "checkpoint path")->required();
  tr->add_flag("--force", train_force, "overwrite an existing file");

  auto* ev = app.add_subcommand("eval", "classify a test selection and write a report");
  ev->add_option("--checkpoint", checkpoint, "checkpoint path")->required()->check(CLI::ExistingFile);
  ev->add_option("--dataset", dataset, "dataset path")->required()->check(CLI::ExistingFile);
  ev->add_option("--config", config, "experiment YAML (test selection)")->check(CLI::ExistingFile);
  ev->add_option("--classifier", classifier, "cnn | hybrid")->check(CLI::IsMember({"cnn", "hybrid"}));
  ev->add_option("--lambda", lambda, "CFO gate threshold [Hz]; inf disables the gate");
  ev->add_flag("--compensate", eval_compensate, "assert the checkpoint uses CFO compensation");
  ev->add_flag("--no-compensate", eval_no_compensate, "assert the checkpoint skips CFO compensation");
  ev->add_option("--test-sessions", test_sessions, "sessions to test");
  ev->add_option("--test-first", test_first, "first packet index per device-session");
  ev->add_option("--test-count", test_count, "packets per device-session (0 = to the end)");
  ev->add_flag("--allow-overlap", allow_overlap, "permit test packets that were used for training");
  ev->add_option("--out", out, "text report path; the CSV table goes next to it")->required();

  auto* cr = app.add_subcommand("cfo-report", "estimate the CFO of every packet");
  cr->add_option("--dataset", dataset, "dataset path")->required()->check(CLI::ExistingFile);
  cr->add_option("--out", out, "output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      auto cfg = lorafp::load_config(config);
      if (seed) cfg.seed = *seed;
      const auto s = lorafp::cli_generate(cfg, out, gen_force, log_line);
      std::cout << "devices " << s.devices << "\npackets " << s.packets << "\nbytes " << s.bytes << "\n";
    } else if (tr->parsed()) {
      auto cfg = lorafp::load_config(config);
      if (seed) cfg.train.seed = *seed;
      if (lambda) cfg.lambda = *lambda;
      cfg.validate();
      lorafp::TrainRequest req;
      req.representation = lorafp::parse_representation(representation);
      req.compensate = tri_state(train_compensate, train_no_compensate).value_or(true);
      const auto s = lorafp::cli_train(dataset, cfg, req, out, train_force, log_line);
      std::cout << "examples " << s.examples << "\nepochs " << s.history.epochs.size() << "\nbest_epoch "
                << s.history.best_epoch << "\n";
    } else if (ev->parsed()) {
      lorafp::EvalRequest req;
      if (!config.empty()) req.test_selection = lorafp::load_config(config).test_selection;
      if (!test_sessions.empty()) req.test_selection.sessions = test_sessions;
      if (test_first) req.test_selection.first = *test_first;
      if (test_count) req.test_selection.count = *test_count;
      req.classifier = lorafp::parse_classifier(classifier);
      req.lambda = lambda;
      req.compensate = tri_state(eval_compensate, eval_no_compensate);
      req.allow_overlap = allow_overlap;
      const auto r = lorafp::cli_eval(checkpoint, dataset, req, log_line);
      lorafp::write_report(r, out, lorafp::utc_timestamp());
      std::cout << "accuracy " << r.accuracy << "\ncnn_accuracy " << r.cnn_accuracy << "\nhybrid_accuracy "
                << r.hybrid_accuracy << "\n";
    } else if (cr->parsed()) {
      const auto r = lorafp::cli_cfo_report(dataset, log_line);
      lorafp::write_cfo_report(r, out, lorafp::utc_timestamp());
      std::cout << "packets " << r.series.size() << "\nrms_error_hz " << r.rms_error << "\n";
    }
  } catch (const lorafp::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
