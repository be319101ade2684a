#include "lrisk/hypertune.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "csv.hpp"
#include "lrisk/error.hpp"

namespace lrisk {

std::size_t GridSpec::cell_count() const {
  return lambdas.size() * alphas.size() * dropouts.size() * static_cast<std::size_t>(repeats);
}

void GridSpec::validate() const {
  auto bad = [](const std::string& what) { throw Error(ErrorCode::config, what); };
  if (lambdas.empty() || alphas.empty() || dropouts.empty()) bad("grid axes must be non-empty");
  if (repeats < 1) bad("grid repeats must be >= 1");
  for (double l : lambdas)
    if (!(l >= 0.0)) bad("grid lambda values must be >= 0");
  for (double a : alphas)
    if (!(a > 0.0)) bad("grid alpha values must be > 0");
  for (double d : dropouts)
    if (!(d >= 0.0 && d < 1.0)) bad("grid dropout values must lie in [0, 1)");
}

namespace {

std::vector<double> parse_list(const std::string& key, std::string_view value) {
  std::vector<double> out;
  for (auto item : csv::split(value)) {
    const auto v = csv::parse_double(csv::trim(item));
    if (!v) throw Error(ErrorCode::config, "grid key '" + key + "' has a non-numeric entry");
    out.push_back(*v);
  }
  return out;
}

}  // namespace

GridSpec GridSpec::parse(std::string_view text, const TrainConfig& base) {
  GridSpec g;
  g.base = base;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto view = csv::trim(line);
    if (view.empty()) continue;
    const auto eq = view.find('=');
    if (eq == std::string_view::npos)
      throw Error(ErrorCode::config, "grid line without '=': " + std::string(view));
    const std::string key(csv::trim(view.substr(0, eq)));
    const auto value = csv::trim(view.substr(eq + 1));
    if (key == "lambdas")
      g.lambdas = parse_list(key, value);
    else if (key == "alphas")
      g.alphas = parse_list(key, value);
    else if (key == "dropouts")
      g.dropouts = parse_list(key, value);
    else if (key == "repeats") {
      const auto r = csv::parse_int<int>(value);
      if (!r) throw Error(ErrorCode::config, "grid key 'repeats' must be an integer");
      g.repeats = *r;
    } else {
      throw Error(ErrorCode::config, "unknown grid key '" + key + "'");
    }
  }
  g.validate();
  return g;
}

GridSpec GridSpec::load(const std::filesystem::path& path, const TrainConfig& base) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::config, "cannot read grid file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), base);
}

std::vector<std::size_t> TuneResult::ranking() const {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < rows.size(); ++i)
    if (!rows[i].failed) idx.push_back(i);
  std::stable_sort(idx.begin(), idx.end(), [this](std::size_t a, std::size_t b) {
    if (rows[a].rk != rows[b].rk) return rows[a].rk > rows[b].rk;
    return rows[a].final_loss < rows[b].final_loss;
  });
  return idx;
}

TuneRow run_cell(const TrainConfig& config, const LabeledSet& train_set, const LabeledSet& test_set,
                 const ModelFactory& factory) {
  TuneRow row;
  row.config = config;
  try {
    Model model = factory(config);
    row.history = train(model, train_set.images, train_set.labels, config);
    row.final_loss = row.history.best_loss();
    row.epochs_run = row.history.stopped_epoch;
    const auto preds = predict(model, test_set.images);
    std::vector<int> labels;
    labels.reserve(preds.size());
    for (const auto& p : preds) labels.push_back(p.label);
    const auto cm = confusion(labels, test_set.labels, model.num_classes());
    row.rk = rk(cm).value;
    row.accuracy = accuracy(cm);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::divergence) throw;
    row.failed = true;
    row.error = e.what();
  }
  return row;
}

TuneResult grid_search(const GridSpec& grid, const LabeledSet& train_set, const LabeledSet& test_set,
                       const ModelFactory& factory, std::size_t parallel_cells,
                       const std::function<void(const TuneRow&)>& progress) {
  grid.validate();
  std::vector<TrainConfig> configs;
  std::vector<int> repeats;
  for (double lambda : grid.lambdas)
    for (double alpha : grid.alphas)
      for (double dropout : grid.dropouts)
        for (int r = 0; r < grid.repeats; ++r) {
          TrainConfig c = grid.base;
          c.l2_lambda = lambda;
          c.learning_rate = alpha;
          c.dropout_rate = dropout;
          c.seed = grid.base.seed + configs.size();
          configs.push_back(c);
          repeats.push_back(r);
        }

  TuneResult result;
  result.rows.resize(configs.size());
  std::mutex progress_mutex;
  auto run = [&](std::size_t i) {
    TuneRow row = run_cell(configs[i], train_set, test_set, factory);
    row.cell = i;
    row.repeat = repeats[i];
    result.rows[i] = std::move(row);
    if (progress) {
      std::lock_guard lock(progress_mutex);
      progress(result.rows[i]);
    }
  };

  if (parallel_cells <= 1) {
    for (std::size_t i = 0; i < configs.size(); ++i) run(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    std::vector<std::jthread> workers;
    for (std::size_t w = 0; w < std::min(parallel_cells, configs.size()); ++w)
      workers.emplace_back([&] {
        for (std::size_t i = next++; i < configs.size(); i = next++) {
          try {
            run(i);
          } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!first_error) first_error = std::current_exception();
          }
        }
      });
    workers.clear();
    if (first_error) std::rethrow_exception(first_error);
  }
  return result;
}

void write_tune_csv(const TuneResult& result, const std::filesystem::path& path,
                    const std::vector<std::string>& comments) {
  using csv::format_double;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
  for (const auto& c : comments) out << "# " << c << "\n";
  out << "rank,cell,repeat,seed,l2_lambda,learning_rate,dropout,status,rk,accuracy,final_loss,"
         "epochs\n";
  std::vector<std::size_t> rank(result.rows.size(), 0);
  const auto order = result.ranking();
  for (std::size_t r = 0; r < order.size(); ++r) rank[order[r]] = r + 1;
  for (std::size_t i = 0; i < result.rows.size(); ++i) {
    const auto& row = result.rows[i];
    out << (row.failed ? std::string() : std::to_string(rank[i])) << "," << row.cell << ","
        << row.repeat << "," << row.config.seed << "," << format_double(row.config.l2_lambda) << ","
        << format_double(row.config.learning_rate) << "," << format_double(row.config.dropout_rate)
        << "," << (row.failed ? "failed" : "ok") << "," << format_double(row.rk) << ","
        << format_double(row.accuracy) << "," << format_double(row.final_loss) << ","
        << row.epochs_run << "\n";
  }
  if (!out) throw Error(ErrorCode::io, "failed writing " + path.string());
}

}  // namespace lrisk
