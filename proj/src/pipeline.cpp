#include "lrisk/pipeline.hpp"

#include <fstream>
#include <sstream>

#include "csv.hpp"
#include "lrisk/error.hpp"
#include "lrisk/parallel.hpp"

namespace fs = std::filesystem;

namespace lrisk {

namespace {

[[noreturn]] void config_error(const std::string& what) { throw Error(ErrorCode::config, what); }

double to_real(const std::string& key, const std::string& value) {
  const auto v = csv::parse_double(value);
  if (!v) config_error("config key '" + key + "': expected a number, got '" + value + "'");
  return *v;
}

template <class Int>
Int to_int(const std::string& key, const std::string& value) {
  const auto v = csv::parse_int<Int>(value);
  if (!v) config_error("config key '" + key + "': expected an integer, got '" + value + "'");
  return *v;
}

std::string real_text(double v) { return csv::format_double(v); }

std::vector<std::string> class_names() { return {kRiskNames.begin(), kRiskNames.end()}; }

std::vector<int> predicted_labels(const std::vector<Prediction>& preds) {
  std::vector<int> out;
  out.reserve(preds.size());
  for (const auto& p : preds) out.push_back(p.label);
  return out;
}

void ensure_parent(const fs::path& path) {
  const fs::path parent = path.parent_path();
  if (parent.empty()) return;
  std::error_code ec;
  fs::create_directories(parent, ec);
  if (ec) throw Error(ErrorCode::io, "cannot create directory " + parent.string() + ": " + ec.message());
}

Checkpoint open_checkpoint(const fs::path& path) {
  try {
    return load_checkpoint(path);
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(ErrorCode::data, "cannot read checkpoint " + path.string() + ": " + e.what());
  }
}

/// Checkpoint, its configuration and the preprocessed dataset, with the model
/// input shape checked against the configuration.
struct Loaded {
  Checkpoint checkpoint;
  PipelineConfig config;
  PreparedData data;
};

Loaded load_for_inference(const fs::path& checkpoint, const fs::path& data_dir,
                          const PipelineConfig* override_config) {
  Loaded l{open_checkpoint(checkpoint), {}, {}};
  l.config = checkpoint_config(l.checkpoint, override_config);
  if (override_config) set_thread_count(override_config->threads);
  const Shape expected = {l.config.image_height(), l.config.image_width, kAxisCount};
  if (l.checkpoint.model.input_shape() != expected)
    throw Error(ErrorCode::mismatch, "checkpoint model input " +
                                         shape_string(l.checkpoint.model.input_shape()) +
                                         " does not match its pipeline image " + shape_string(expected));
  const Dataset dataset = load_dataset(data_dir);
  l.data = prepare_data(dataset, l.config, &l.checkpoint.scaler);
  return l;
}

}  // namespace

PipelineConfig PipelineConfig::desk() {
  PipelineConfig c;
  c.frames = 250;
  c.image_width = 55;
  c.scale.filters = {8, 16, 32};
  c.scale.dense = 128;
  return c;
}

const std::vector<std::string>& PipelineConfig::keys() {
  static const std::vector<std::string> k = {
      "filter.order",       "filter.low_hz",      "filter.high_hz",   "frames",
      "scaler",             "image.width",        "model",            "model.filters",
      "model.dense",        "train.l2_lambda",    "train.learning_rate", "train.dropout",
      "train.batch_size",   "train.patience",     "train.min_delta",  "train.max_epochs",
      "train.adam_beta1",   "train.adam_beta2",   "train.adam_epsilon", "split.train_fraction",
      "seed",               "threads",            "data.dir",         "out.dir"};
  return k;
}

void PipelineConfig::set(const std::string& key, const std::string& value) {
  if (key == "filter.order") filter_order = to_int<int>(key, value);
  else if (key == "filter.low_hz") low_hz = to_real(key, value);
  else if (key == "filter.high_hz") high_hz = to_real(key, value);
  else if (key == "frames") frames = to_int<std::size_t>(key, value);
  else if (key == "scaler") {
    try {
      scaler = parse_scaler_mode(value);
    } catch (const std::exception&) {
      config_error("config key 'scaler': unknown mode '" + value + "'");
    }
  } else if (key == "image.width") image_width = to_int<std::size_t>(key, value);
  else if (key == "model") {
    if (!is_preset(value)) config_error("config key 'model': unknown preset '" + value + "'");
    model = value;
  } else if (key == "model.filters") {
    const auto parts = csv::split(value, ',');
    if (parts.size() != 3) config_error("config key 'model.filters': expected three counts");
    for (std::size_t i = 0; i < 3; ++i)
      scale.filters[i] = to_int<std::size_t>(key, std::string(csv::trim(parts[i])));
  } else if (key == "model.dense") scale.dense = to_int<std::size_t>(key, value);
  else if (key == "train.l2_lambda") train.l2_lambda = to_real(key, value);
  else if (key == "train.learning_rate") train.learning_rate = to_real(key, value);
  else if (key == "train.dropout") train.dropout_rate = to_real(key, value);
  else if (key == "train.batch_size") train.batch_size = to_int<std::size_t>(key, value);
  else if (key == "train.patience") train.patience = to_int<int>(key, value);
  else if (key == "train.min_delta") train.min_delta = to_real(key, value);
  else if (key == "train.max_epochs") train.max_epochs = to_int<int>(key, value);
  else if (key == "train.adam_beta1") train.adam_beta1 = to_real(key, value);
  else if (key == "train.adam_beta2") train.adam_beta2 = to_real(key, value);
  else if (key == "train.adam_epsilon") train.adam_epsilon = to_real(key, value);
  else if (key == "split.train_fraction") train_fraction = to_real(key, value);
  else if (key == "seed") train.seed = to_int<std::uint64_t>(key, value);
  else if (key == "threads") threads = to_int<std::size_t>(key, value);
  else if (key == "data.dir") data_dir = value;
  else if (key == "out.dir") out_dir = value;
  else config_error("unknown config key '" + key + "'");
}

std::string PipelineConfig::get(const std::string& key) const {
  if (key == "filter.order") return std::to_string(filter_order);
  if (key == "filter.low_hz") return real_text(low_hz);
  if (key == "filter.high_hz") return real_text(high_hz);
  if (key == "frames") return std::to_string(frames);
  if (key == "scaler") return to_string(scaler);
  if (key == "image.width") return std::to_string(image_width);
  if (key == "model") return model;
  if (key == "model.filters")
    return std::to_string(scale.filters[0]) + "," + std::to_string(scale.filters[1]) + "," +
           std::to_string(scale.filters[2]);
  if (key == "model.dense") return std::to_string(scale.dense);
  if (key == "train.l2_lambda") return real_text(train.l2_lambda);
  if (key == "train.learning_rate") return real_text(train.learning_rate);
  if (key == "train.dropout") return real_text(train.dropout_rate);
  if (key == "train.batch_size") return std::to_string(train.batch_size);
  if (key == "train.patience") return std::to_string(train.patience);
  if (key == "train.min_delta") return real_text(train.min_delta);
  if (key == "train.max_epochs") return std::to_string(train.max_epochs);
  if (key == "train.adam_beta1") return real_text(train.adam_beta1);
  if (key == "train.adam_beta2") return real_text(train.adam_beta2);
  if (key == "train.adam_epsilon") return real_text(train.adam_epsilon);
  if (key == "split.train_fraction") return real_text(train_fraction);
  if (key == "seed") return std::to_string(train.seed);
  if (key == "threads") return std::to_string(threads);
  if (key == "data.dir") return data_dir;
  if (key == "out.dir") return out_dir;
  config_error("unknown config key '" + key + "'");
}

PipelineConfig PipelineConfig::parse(std::string_view text) {
  PipelineConfig c;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    std::string_view view = line;
    if (const auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
    view = csv::trim(view);
    if (view.empty()) continue;
    const auto eq = view.find('=');
    if (eq == std::string_view::npos)
      config_error("config line " + std::to_string(number) + ": expected 'key = value'");
    c.set(std::string(csv::trim(view.substr(0, eq))), std::string(csv::trim(view.substr(eq + 1))));
  }
  c.validate();
  return c;
}

PipelineConfig PipelineConfig::load(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) config_error("cannot read config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::string PipelineConfig::to_text() const {
  std::string out;
  for (const auto& k : keys()) {
    const std::string v = get(k);
    if (v.empty() && (k == "data.dir" || k == "out.dir")) continue;
    out += k + " = " + v + "\n";
  }
  return out;
}

std::vector<std::string> PipelineConfig::provenance() const {
  std::vector<std::string> lines;
  std::istringstream in(to_text());
  std::string line;
  while (std::getline(in, line)) lines.push_back("config " + line);
  return lines;
}

void PipelineConfig::validate() const {
  try {
    require(filter_order >= 1, "filter.order must be at least 1");
    require(low_hz > 0.0 && low_hz < high_hz, "filter band must satisfy 0 < low_hz < high_hz");
    require(frames >= 1, "frames must be at least 1");
    require(image_width >= kSensorCount, "image.width must be at least 12");
    require(is_preset(model), "unknown model preset '" + model + "'");
    for (auto f : scale.filters) require(f >= 1, "model.filters must be positive");
    require(scale.dense >= 2, "model.dense must be at least 2");
    require(train_fraction > 0.0 && train_fraction <= 1.0,
            "split.train_fraction must lie in (0, 1]");
    train.validate();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::config) throw;
    config_error(std::string("invalid config: ") + e.what());
  }
}

std::size_t PipelineConfig::image_height() const { return lrisk::image_height(frames, image_width); }

PreparedData prepare_data(const Dataset& dataset, const PipelineConfig& config,
                          const ChannelScaler* scaler) {
  config.validate();
  if (dataset.trials.empty()) throw Error(ErrorCode::data, "dataset has no trials");
  if (dataset.trials.size() != dataset.manifest.entries.size())
    throw Error(ErrorCode::data, "dataset trial count does not match its manifest");

  PreparedData out;
  out.manifest = dataset.manifest.has_split()
                     ? dataset.manifest
                     : split_dataset(dataset.manifest, config.train_fraction, config.train.seed);
  out.height = config.image_height();
  out.width = config.image_width;

  const double fs = dataset.trials.front().sample_rate_hz;
  for (const auto& t : dataset.trials) {
    if (t.sample_rate_hz != fs) throw Error(ErrorCode::data, "trials have differing sample rates");
    try {
      t.validate();
    } catch (const std::exception& e) {
      throw Error(ErrorCode::data, e.what());
    }
  }
  const BandpassFilter filter = design_bandpass(config.filter_order, config.low_hz, config.high_hz, fs);

  const std::size_t n = dataset.trials.size();
  std::vector<TrialRecording> cleaned(n);
  parallel_for(n, [&](std::size_t i) {
    cleaned[i] = pad_or_truncate(filter_trial(dataset.trials[i], filter), config.frames);
  });

  std::vector<std::size_t> train_idx, test_idx;
  for (std::size_t i = 0; i < n; ++i) {
    const Split s = out.manifest.entries[i].split;
    if (s == Split::train) train_idx.push_back(i);
    else if (s == Split::test) test_idx.push_back(i);
  }
  if (train_idx.empty()) throw Error(ErrorCode::data, "split has no training trials");

  if (scaler) {
    if (!scaler->fitted() || scaler->first().size() != kChannelCount)
      throw Error(ErrorCode::mismatch, "stored channel scaler is not fitted for 36 channels");
    out.scaler = *scaler;
  } else {
    std::vector<TrialRecording> fit_set;
    fit_set.reserve(train_idx.size());
    for (auto i : train_idx) fit_set.push_back(cleaned[i]);
    out.scaler = ChannelScaler::fit(fit_set, config.scaler);
  }

  std::vector<EncodedImage> images(n);
  parallel_for(n, [&](std::size_t i) {
    images[i] = wrap_image(to_channel_matrix(out.scaler.apply(cleaned[i])), config.image_width);
  });

  const std::size_t per = out.height * out.width * kAxisCount;
  auto fill = [&](const std::vector<std::size_t>& idx, LabeledSet& set) {
    set.images = Tensor({idx.size(), out.height, out.width, kAxisCount});
    set.labels.clear();
    for (std::size_t j = 0; j < idx.size(); ++j) {
      const auto& px = images[idx[j]].pixels;
      std::copy(px.begin(), px.end(), set.images.data() + j * per);
      set.labels.push_back(zone_to_risk(dataset.trials[idx[j]].zone).index());
    }
  };
  fill(train_idx, out.train);
  fill(test_idx, out.test);
  out.test_trials = test_idx;
  out.test_images.reserve(test_idx.size());
  for (auto i : test_idx) out.test_images.push_back(std::move(images[i]));
  return out;
}

Model build_model(const PipelineConfig& config, std::size_t height, std::size_t width,
                  const TrainConfig& train) {
  return Model({height, width, kAxisCount},
               preset_layers(config.model, config.scale, train.dropout_rate, kClassCount,
                             train.l2_lambda),
               train.seed);
}

fs::path sibling_path(const fs::path& checkpoint, std::string_view suffix) {
  fs::path p = checkpoint;
  p.replace_filename(checkpoint.stem().string() + std::string(suffix));
  return p;
}

TrainRunResult run_train(const PipelineConfig& config, const fs::path& data_dir,
                         const fs::path& checkpoint, const EpochObserver& observer) {
  config.validate();
  set_thread_count(config.threads);
  const Dataset dataset = load_dataset(data_dir);
  PreparedData data = prepare_data(dataset, config);

  Model model = build_model(config, data.height, data.width, config.train);
  TrainRunResult r;
  r.history = train(model, data.train.images, data.train.labels, config.train, observer);
  r.test_confusion = confusion(predicted_labels(predict(model, data.test.images)), data.test.labels,
                               kClassCount, class_names());

  r.checkpoint = checkpoint;
  r.history_csv = sibling_path(checkpoint, ".history.csv");
  r.metrics_csv = sibling_path(checkpoint, ".metrics.csv");
  r.split_csv = sibling_path(checkpoint, ".split.csv");
  ensure_parent(checkpoint);
  const auto comments = config.provenance();
  save_checkpoint(checkpoint, model, config.to_text(), data.scaler);
  write_history_csv(r.history, r.history_csv, comments);
  write_metrics_csv(r.test_confusion, r.metrics_csv, comments);
  Manifest split = data.manifest;
  split.comments = comments;
  save_manifest(split, r.split_csv);
  return r;
}

PipelineConfig checkpoint_config(const Checkpoint& checkpoint, const PipelineConfig* override_config) {
  PipelineConfig c;
  try {
    c = PipelineConfig::parse(checkpoint.pipeline_text);
  } catch (const Error& e) {
    throw Error(ErrorCode::data, std::string("checkpoint pipeline configuration: ") + e.what());
  }
  if (override_config && override_config->image_width != c.image_width)
    throw Error(ErrorCode::mismatch, "image width mismatch: checkpoint " +
                                         std::to_string(c.image_width) + ", config " +
                                         std::to_string(override_config->image_width));
  return c;
}

EvalResult run_eval(const fs::path& checkpoint, const fs::path& data_dir, const fs::path& out_csv,
                    const PipelineConfig* override_config) {
  const Loaded l = load_for_inference(checkpoint, data_dir, override_config);
  EvalResult r;
  r.confusion = confusion(predicted_labels(predict(l.checkpoint.model, l.data.test.images)),
                          l.data.test.labels, kClassCount, class_names());
  r.csv = metrics_csv(r.confusion, l.config.provenance());
  if (!out_csv.empty()) {
    ensure_parent(out_csv);
    write_metrics_csv(r.confusion, out_csv, l.config.provenance());
  }
  return r;
}

SaliencyRunResult run_saliency(const fs::path& checkpoint, const fs::path& data_dir, RiskLevel level,
                               const fs::path& out_dir, const PipelineConfig* override_config) {
  const Loaded l = load_for_inference(checkpoint, data_dir, override_config);
  const int cls = static_cast<int>(level);
  const std::string name = to_string(level);

  std::vector<std::size_t> picks;
  for (std::size_t j = 0; j < l.data.test.labels.size(); ++j)
    if (l.data.test.labels[j] == cls) picks.push_back(j);
  if (picks.empty()) throw Error(ErrorCode::data, "no test images of class " + name);

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorCode::io, "cannot create directory " + out_dir.string() + ": " + ec.message());

  SaliencyRunResult r;
  std::vector<SaliencyMap> maps;
  maps.reserve(picks.size());
  for (auto j : picks) {
    maps.push_back(class_score_gradient(l.checkpoint.model, l.data.test_images[j], cls));
    const auto& entry = l.data.manifest.entries[l.data.test_trials[j]];
    const fs::path p =
        out_dir / ("saliency_" + name + "_" + fs::path(entry.trial_file).stem().string() + ".pgm");
    export_saliency(maps.back(), p);
    r.image_pgms.push_back(p);
  }
  const SaliencyMap mean = mean_saliency(maps);
  r.images = maps.size();
  r.mean_pgm = out_dir / ("saliency_" + name + "_mean.pgm");
  export_saliency(mean, r.mean_pgm);
  r.attribution = sensor_attribution(mean, l.data.test_images[picks.front()]);
  r.attribution_csv = out_dir / ("attribution_" + name + ".csv");
  auto comments = l.config.provenance();
  comments.push_back("class " + name + ", mean over " + std::to_string(r.images) + " test images");
  write_attribution_csv(r.attribution, r.attribution_csv, comments);
  return r;
}

TuneResult run_tune(const PipelineConfig& config, const fs::path& data_dir, const fs::path& grid_path,
                    const fs::path& out_csv, std::size_t parallel_cells) {
  config.validate();
  set_thread_count(config.threads);
  const GridSpec grid = GridSpec::load(grid_path, config.train);
  const Dataset dataset = load_dataset(data_dir);
  const PreparedData data = prepare_data(dataset, config);
  const ModelFactory factory = [&](const TrainConfig& tc) {
    return build_model(config, data.height, data.width, tc);
  };
  TuneResult result = grid_search(grid, data.train, data.test, factory, parallel_cells);

  ensure_parent(out_csv);
  const auto comments = config.provenance();
  write_tune_csv(result, out_csv, comments);
  for (const auto& row : result.rows) {
    auto c = comments;
    c.push_back("cell " + std::to_string(row.cell) + " seed " + std::to_string(row.config.seed) +
                " l2_lambda " + real_text(row.config.l2_lambda) + " learning_rate " +
                real_text(row.config.learning_rate) + " dropout " + real_text(row.config.dropout_rate));
    write_history_csv(row.history, sibling_path(out_csv, ".cell" + std::to_string(row.cell) + ".history.csv"),
                      c);
  }
  return result;
}

SynthResult run_synth(const fs::path& out_dir, std::uint64_t seed, const std::string& profile,
                      bool force) {
  DatasetProfile p;
  PipelineConfig cfg;
  if (profile == "default") {
    p = default_profile(seed);
  } else if (profile == "desk") {
    p = desk_profile(seed);
    cfg = PipelineConfig::desk();
  } else {
    config_error("unknown profile '" + profile + "' (expected default or desk)");
  }
  cfg.train.seed = seed;

  std::error_code ec;
  if (fs::exists(out_dir, ec) && !fs::is_empty(out_dir, ec)) {
    if (!force)
      throw Error(ErrorCode::exists, "output directory " + out_dir.string() +
                                         " is not empty (use --force to overwrite)");
    fs::remove_all(out_dir, ec);
    if (ec) throw Error(ErrorCode::io, "cannot clear " + out_dir.string() + ": " + ec.message());
  }
  fs::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorCode::io, "cannot create directory " + out_dir.string() + ": " + ec.message());

  const Dataset ds = generate_dataset(p);
  save_dataset(ds, out_dir);
  std::ofstream cfg_out(out_dir / "pipeline.cfg", std::ios::binary);
  cfg_out << "# pipeline configuration for the " << profile << " profile, seed " << seed << "\n"
          << cfg.to_text();
  if (!cfg_out) throw Error(ErrorCode::io, "cannot write " + (out_dir / "pipeline.cfg").string());

  SynthResult r;
  r.trials = ds.trials.size();
  for (const auto& t : ds.trials) ++r.class_counts[static_cast<std::size_t>(zone_to_risk(t.zone).index())];
  return r;
}

}  // namespace lrisk
