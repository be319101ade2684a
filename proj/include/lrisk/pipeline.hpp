#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "lrisk/checkpoint.hpp"
#include "lrisk/hypertune.hpp"
#include "lrisk/imaging.hpp"
#include "lrisk/metrics.hpp"
#include "lrisk/model.hpp"
#include "lrisk/saliency.hpp"
#include "lrisk/signal.hpp"
#include "lrisk/synthdata.hpp"
#include "lrisk/trainer.hpp"

namespace lrisk {

/// Every tunable of the pipeline. Text form is flat `key = value` lines with
/// `#` comments; unknown keys are rejected.
struct PipelineConfig {
  int filter_order = 2;
  double low_hz = 2.0;
  double high_hz = 12.0;
  std::size_t frames = 750;
  ScalerMode scaler = ScalerMode::standardize;
  std::size_t image_width = 95;
  std::string model = "vgg_b_avg";
  ModelScale scale;
  TrainConfig train;  // train.seed doubles as the split seed
  double train_fraction = 0.75;
  std::size_t threads = 0;
  std::string data_dir;
  std::string out_dir;

  /// 250 frames, width-55 images, 8/16/32 filters, 128 dense units.
  static PipelineConfig desk();

  static const std::vector<std::string>& keys();
  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;

  static PipelineConfig parse(std::string_view text);
  static PipelineConfig load(const std::filesystem::path& path);
  std::string to_text() const;
  /// to_text() as comment lines for CSV headers.
  std::vector<std::string> provenance() const;

  void validate() const;

  std::size_t image_height() const;

  friend bool operator==(const PipelineConfig&, const PipelineConfig&) = default;
};

struct PreparedData {
  Manifest manifest;  // with the split used
  ChannelScaler scaler;
  LabeledSet train;
  LabeledSet test;
  std::vector<EncodedImage> test_images;
  std::vector<std::size_t> test_trials;  // dataset index of each test image
  std::size_t height = 0;
  std::size_t width = 0;
};

/// filter -> pad/truncate -> scale (fitted on the train split unless a
/// scaler is supplied) -> channel matrix -> wrapped image. Uses the split
/// recorded in the manifest, or draws one from the config seed.
PreparedData prepare_data(const Dataset& dataset, const PipelineConfig& config,
                          const ChannelScaler* scaler = nullptr);

Model build_model(const PipelineConfig& config, std::size_t height, std::size_t width,
                  const TrainConfig& train);

/// Output files that sit next to a checkpoint, e.g. model.ckpt ->
/// model.history.csv, model.metrics.csv, model.split.csv.
std::filesystem::path sibling_path(const std::filesystem::path& checkpoint, std::string_view suffix);

struct TrainRunResult {
  TrainHistory history;
  ConfusionMatrix test_confusion;
  std::filesystem::path checkpoint;
  std::filesystem::path history_csv;
  std::filesystem::path metrics_csv;
  std::filesystem::path split_csv;
};

TrainRunResult run_train(const PipelineConfig& config, const std::filesystem::path& data_dir,
                         const std::filesystem::path& checkpoint, const EpochObserver& observer = {});

/// Checkpoint's pipeline configuration; when `override_config` is given its
/// image width must agree with the checkpoint's.
PipelineConfig checkpoint_config(const Checkpoint& checkpoint,
                                 const PipelineConfig* override_config = nullptr);

struct EvalResult {
  ConfusionMatrix confusion;
  std::string csv;
};

EvalResult run_eval(const std::filesystem::path& checkpoint, const std::filesystem::path& data_dir,
                    const std::filesystem::path& out_csv = {},
                    const PipelineConfig* override_config = nullptr);

struct SaliencyRunResult {
  std::size_t images = 0;
  SensorAttribution attribution;  // of the class mean map
  std::filesystem::path mean_pgm;
  std::filesystem::path attribution_csv;
  std::vector<std::filesystem::path> image_pgms;
};

SaliencyRunResult run_saliency(const std::filesystem::path& checkpoint,
                               const std::filesystem::path& data_dir, RiskLevel level,
                               const std::filesystem::path& out_dir,
                               const PipelineConfig* override_config = nullptr);

TuneResult run_tune(const PipelineConfig& config, const std::filesystem::path& data_dir,
                    const std::filesystem::path& grid_path, const std::filesystem::path& out_csv,
                    std::size_t parallel_cells = 1);

struct SynthResult {
  std::size_t trials = 0;
  std::array<std::size_t, kClassCount> class_counts{};
};

/// Writes a synthetic dataset plus a matching `pipeline.cfg`. Profiles:
/// "default" and "desk". Refuses a non-empty directory unless `force`.
SynthResult run_synth(const std::filesystem::path& out_dir, std::uint64_t seed,
                      const std::string& profile, bool force);

}  // namespace lrisk
