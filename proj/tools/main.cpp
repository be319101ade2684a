// lrisk command-line tool. Talks to the library only through the C interface.

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "lrisk/lrisk.h"

namespace {

int report(lrisk_status s) {
  if (s == LRISK_OK) return 0;
  std::fprintf(stderr, "error: %s\n", lrisk_last_error());
  if (s == LRISK_ERR_ARGUMENT) return 2;
  return static_cast<int>(s);
}

// Owns a configuration handle.
struct Config {
  lrisk_config* handle = nullptr;
  ~Config() { lrisk_config_free(handle); }
};

// --config FILE if given; otherwise DATA/pipeline.cfg when present; otherwise
// the built-in defaults.
lrisk_status open_config(const std::string& path, const std::string& data_dir, Config& out) {
  if (!path.empty()) return lrisk_config_load(path.c_str(), &out.handle);
  const auto fallback = std::filesystem::path(data_dir) / "pipeline.cfg";
  if (!data_dir.empty() && std::filesystem::exists(fallback))
    return lrisk_config_load(fallback.c_str(), &out.handle);
  return lrisk_config_new("default", &out.handle);
}

void print_metrics(const lrisk_metrics& m) {
  std::printf("%-8s %9s %9s %9s\n", "class", "precision", "recall", "f_measure");
  for (int k = 0; k < LRISK_CLASS_COUNT; ++k)
    std::printf("%-8s %9.4f %9.4f %9.4f\n", lrisk_class_name(k), m.precision[k], m.recall[k],
                m.f_measure[k]);
  std::printf("accuracy %.4f\nrk       %.4f%s\n", m.accuracy, m.rk,
              m.rk_degenerate ? " (degenerate)" : "");
  std::printf("confusion [true][predicted]:\n");
  for (int t = 0; t < LRISK_CLASS_COUNT; ++t) {
    std::printf("  %-8s", lrisk_class_name(t));
    for (int p = 0; p < LRISK_CLASS_COUNT; ++p)
      std::printf(" %6lld", static_cast<long long>(m.confusion[t * LRISK_CLASS_COUNT + p]));
    std::printf("\n");
  }
}

void on_epoch(int epoch, double loss, double accuracy, void* user) {
  if (*static_cast<bool*>(user)) return;
  std::fprintf(stderr, "epoch %4d  loss %.6f  accuracy %.4f\n", epoch, loss, accuracy);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lifting risk classification from wearable IMU data"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(lrisk_version()));

  std::string out_dir, profile = "default";
  std::uint64_t seed = 42;
  bool force = false;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic lifting dataset");
  synth->add_option("--out", out_dir, "Output directory")->required();
  synth->add_option("--seed", seed, "Generator seed")->capture_default_str();
  synth->add_option("--profile", profile, "Dataset profile")
      ->check(CLI::IsMember({"default", "desk"}))
      ->capture_default_str();
  synth->add_flag("--force", force, "Overwrite a non-empty output directory");

  std::string data_dir, config_path, checkpoint;
  bool quiet = false;
  auto* train = app.add_subcommand("train", "Train a model and evaluate it on the test split");
  train->add_option("--data", data_dir, "Dataset directory")->required();
  train->add_option("--config", config_path, "Pipeline configuration file");
  train->add_option("--out", checkpoint, "Checkpoint path")->required();
  train->add_flag("--quiet", quiet, "Do not print per-epoch progress");

  std::string metrics_out;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on the test split");
  eval->add_option("--model", checkpoint, "Checkpoint path")->required();
  eval->add_option("--data", data_dir, "Dataset directory")->required();
  eval->add_option("--config", config_path, "Configuration to check against the checkpoint");
  eval->add_option("--out", metrics_out, "Metrics CSV path (default: print to stdout)");

  std::string class_name;
  auto* saliency = app.add_subcommand("saliency", "Saliency maps for one class's test images");
  saliency->add_option("--model", checkpoint, "Checkpoint path")->required();
  saliency->add_option("--data", data_dir, "Dataset directory")->required();
  saliency->add_option("--class", class_name, "Risk class")
      ->required()
      ->check(CLI::IsMember({"low", "medium", "high"}));
  saliency->add_option("--out", out_dir, "Output directory")->required();
  saliency->add_option("--config", config_path, "Configuration to check against the checkpoint");

  std::string grid_path, tune_out = "tune.csv";
  std::size_t jobs = 1;
  auto* tune = app.add_subcommand("tune", "Grid search over l2 lambda, learning rate and dropout");
  tune->add_option("--data", data_dir, "Dataset directory")->required();
  tune->add_option("--grid", grid_path, "Grid file")->required();
  tune->add_option("--config", config_path, "Pipeline configuration file");
  tune->add_option("--out", tune_out, "Result CSV path")->capture_default_str();
  tune->add_option("--jobs", jobs, "Cells trained concurrently")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (*synth) {
    lrisk_synth_summary s{};
    if (auto st = lrisk_synth(out_dir.c_str(), seed, profile.c_str(), force ? 1 : 0, &s)) return report(st);
    std::printf("wrote %zu trials to %s (low %zu, medium %zu, high %zu)\n", s.trials, out_dir.c_str(),
                s.class_counts[0], s.class_counts[1], s.class_counts[2]);
    return 0;
  }

  if (*train) {
    Config cfg;
    if (auto st = open_config(config_path, data_dir, cfg)) return report(st);
    lrisk_train_summary s{};
    if (auto st = lrisk_train(cfg.handle, data_dir.c_str(), checkpoint.c_str(), on_epoch, &quiet, &s))
      return report(st);
    std::printf("trained %d epochs, best epoch %d (loss %.6f)\n", s.epochs_run, s.best_epoch, s.best_loss);
    print_metrics(s.test);
    return 0;
  }

  if (*eval) {
    Config cfg;
    if (!config_path.empty())
      if (auto st = lrisk_config_load(config_path.c_str(), &cfg.handle)) return report(st);
    lrisk_metrics m{};
    const char* out = metrics_out.empty() ? nullptr : metrics_out.c_str();
    if (auto st = lrisk_eval(checkpoint.c_str(), data_dir.c_str(), cfg.handle, out, &m)) return report(st);
    print_metrics(m);
    return 0;
  }

  if (*saliency) {
    Config cfg;
    if (!config_path.empty())
      if (auto st = lrisk_config_load(config_path.c_str(), &cfg.handle)) return report(st);
    int cls = 0;
    if (auto st = lrisk_parse_class(class_name.c_str(), &cls)) return report(st);
    lrisk_saliency_summary s{};
    if (auto st = lrisk_saliency(checkpoint.c_str(), data_dir.c_str(), cls, out_dir.c_str(), cfg.handle, &s))
      return report(st);
    std::printf("class %s: %zu test images\nsensor ranking:\n", class_name.c_str(), s.images);
    for (std::size_t r = 0; r < LRISK_SENSOR_COUNT; ++r)
      std::printf("  %2zu %-13s %.6g\n", r + 1, lrisk_sensor_name(s.ranking[r]),
                  s.sensor_totals[s.ranking[r]]);
    return 0;
  }

  if (*tune) {
    Config cfg;
    if (auto st = open_config(config_path, data_dir, cfg)) return report(st);
    lrisk_tune_summary s{};
    if (auto st = lrisk_tune(cfg.handle, data_dir.c_str(), grid_path.c_str(), tune_out.c_str(), jobs, &s))
      return report(st);
    std::printf("%zu cells, %zu failed\n", s.rows, s.failed);
    if (s.rows > s.failed) std::printf("best cell %zu, rk %.4f\n", s.best_cell, s.best_rk);
    return 0;
  }
  return 2;
}
