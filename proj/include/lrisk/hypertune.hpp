#pragma once

#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lrisk/metrics.hpp"
#include "lrisk/model.hpp"
#include "lrisk/trainer.hpp"

namespace lrisk {

struct GridSpec {
  std::vector<double> lambdas = {1e-1, 1e-3, 1e-5, 1e-7, 1e-10};
  std::vector<double> alphas = {1e-2, 1e-3, 1e-4};
  std::vector<double> dropouts = {0.0, 0.25, 0.5};
  int repeats = 1;
  TrainConfig base;

  std::size_t cell_count() const;
  void validate() const;

  /// Flat `key = value` text; keys lambdas, alphas, dropouts (comma lists)
  /// and repeats. Unknown keys are rejected.
  static GridSpec parse(std::string_view text, const TrainConfig& base);
  static GridSpec load(const std::filesystem::path& path, const TrainConfig& base);
};

struct TuneRow {
  std::size_t cell = 0;  // position in grid order, repeats innermost
  int repeat = 0;
  TrainConfig config;
  bool failed = false;
  std::string error;
  double rk = 0.0;
  double accuracy = 0.0;
  double final_loss = 0.0;
  int epochs_run = 0;
  TrainHistory history;
};

struct TuneResult {
  std::vector<TuneRow> rows;  // grid order

  /// Indices of non-failed rows by descending R_K, ties by lower final loss.
  std::vector<std::size_t> ranking() const;
};

/// Builds a freshly initialised model for one cell's configuration.
using ModelFactory = std::function<Model(const TrainConfig&)>;

struct LabeledSet {
  Tensor images;
  std::vector<int> labels;
};

/// Trains the model for one configuration and evaluates it on `test`.
TuneRow run_cell(const TrainConfig& config, const LabeledSet& train_set, const LabeledSet& test_set,
                 const ModelFactory& factory);

/// Trains one model per grid cell (seed = base seed + cell index) and
/// evaluates it on the shared test split. Cells that diverge are recorded as
/// failed. `parallel_cells` > 1 runs cells concurrently; the table is always
/// assembled in grid order.
TuneResult grid_search(const GridSpec& grid, const LabeledSet& train_set, const LabeledSet& test_set,
                       const ModelFactory& factory, std::size_t parallel_cells = 1,
                       const std::function<void(const TuneRow&)>& progress = {});

void write_tune_csv(const TuneResult& result, const std::filesystem::path& path,
                    const std::vector<std::string>& comments = {});

}  // namespace lrisk
