#include "lrisk/lrisk.h"

#include <algorithm>
#include <cstring>
#include <new>
#include <string>

#include "lrisk/error.hpp"
#include "lrisk/pipeline.hpp"

using namespace lrisk;

struct lrisk_config {
  PipelineConfig config;
};

struct lrisk_model {
  Checkpoint checkpoint;
  PipelineConfig config;
};

struct lrisk_dataset {
  Dataset dataset;
};

namespace {

thread_local std::string g_last_error;

lrisk_status status_of(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument: return LRISK_ERR_ARGUMENT;
    case ErrorCode::config: return LRISK_ERR_CONFIG;
    case ErrorCode::data: return LRISK_ERR_DATA;
    case ErrorCode::divergence: return LRISK_ERR_DIVERGED;
    case ErrorCode::mismatch: return LRISK_ERR_MISMATCH;
    case ErrorCode::io: return LRISK_ERR_IO;
    case ErrorCode::exists: return LRISK_ERR_EXISTS;
  }
  return LRISK_ERR_INTERNAL;
}

template <class Fn>
lrisk_status guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return LRISK_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return status_of(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return LRISK_ERR_INTERNAL;
  } catch (const std::filesystem::filesystem_error& e) {
    g_last_error = e.what();
    return LRISK_ERR_IO;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return LRISK_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return LRISK_ERR_INTERNAL;
  }
}

void need(const void* p, const char* name) {
  if (!p) fail(std::string(name) + " must not be null");
}

void copy_out(const std::string& s, char* buf, size_t cap, size_t* needed) {
  if (needed) *needed = s.size() + 1;
  if (buf && cap > 0) {
    const size_t n = std::min(cap - 1, s.size());
    std::memcpy(buf, s.data(), n);
    buf[n] = '\0';
  }
}

void fill_metrics(const ConfusionMatrix& c, lrisk_metrics* m) {
  if (!m) return;
  *m = {};
  for (size_t i = 0; i < LRISK_CLASS_COUNT * LRISK_CLASS_COUNT && i < c.counts.size(); ++i)
    m->confusion[i] = c.counts[i];
  for (size_t k = 0; k < LRISK_CLASS_COUNT && k < c.k; ++k) {
    m->precision[k] = precision(c, k).value;
    m->recall[k] = recall(c, k).value;
    m->f_measure[k] = f_measure(c, k).value;
  }
  m->accuracy = accuracy(c);
  const Score r = rk(c);
  m->rk = r.value;
  m->rk_degenerate = r.degenerate ? 1 : 0;
}

std::filesystem::path opt_path(const char* p) { return p ? std::filesystem::path(p) : std::filesystem::path(); }

}  // namespace

extern "C" {

const char* lrisk_version(void) { return "1.0.0"; }

const char* lrisk_last_error(void) { return g_last_error.c_str(); }

const char* lrisk_status_name(lrisk_status status) {
  switch (status) {
    case LRISK_OK: return "ok";
    case LRISK_ERR_INTERNAL: return "internal error";
    case LRISK_ERR_CONFIG: return "invalid configuration";
    case LRISK_ERR_DATA: return "unreadable data";
    case LRISK_ERR_DIVERGED: return "training diverged";
    case LRISK_ERR_MISMATCH: return "checkpoint/configuration mismatch";
    case LRISK_ERR_IO: return "i/o error";
    case LRISK_ERR_ARGUMENT: return "invalid argument";
    case LRISK_ERR_EXISTS: return "output exists";
  }
  return "unknown status";
}

const char* lrisk_class_name(int class_index) {
  if (class_index < 0 || class_index >= static_cast<int>(kClassCount)) return nullptr;
  return kRiskNames[static_cast<size_t>(class_index)];
}

const char* lrisk_sensor_name(size_t sensor) {
  if (sensor >= kSensorCount) return nullptr;
  return kSensorNames[sensor].data();
}

lrisk_status lrisk_parse_class(const char* name, int* class_index) {
  return guarded([&] {
    need(name, "name");
    need(class_index, "class_index");
    *class_index = static_cast<int>(parse_risk_level(name));
  });
}

lrisk_status lrisk_config_new(const char* profile, lrisk_config** out) {
  return guarded([&] {
    need(out, "out");
    *out = nullptr;
    const std::string p = profile ? profile : "default";
    if (p != "default" && p != "desk") throw Error(ErrorCode::config, "unknown profile '" + p + "'");
    *out = new lrisk_config{p == "desk" ? PipelineConfig::desk() : PipelineConfig{}};
  });
}

lrisk_status lrisk_config_load(const char* path, lrisk_config** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = nullptr;
    *out = new lrisk_config{PipelineConfig::load(path)};
  });
}

lrisk_status lrisk_config_parse(const char* text, lrisk_config** out) {
  return guarded([&] {
    need(text, "text");
    need(out, "out");
    *out = nullptr;
    *out = new lrisk_config{PipelineConfig::parse(text)};
  });
}

lrisk_status lrisk_config_set(lrisk_config* config, const char* key, const char* value) {
  return guarded([&] {
    need(config, "config");
    need(key, "key");
    need(value, "value");
    PipelineConfig next = config->config;
    next.set(key, value);
    next.validate();
    config->config = next;
  });
}

lrisk_status lrisk_config_get(const lrisk_config* config, const char* key, char* buf, size_t cap,
                              size_t* needed) {
  return guarded([&] {
    need(config, "config");
    need(key, "key");
    copy_out(config->config.get(key), buf, cap, needed);
  });
}

lrisk_status lrisk_config_text(const lrisk_config* config, char* buf, size_t cap, size_t* needed) {
  return guarded([&] {
    need(config, "config");
    copy_out(config->config.to_text(), buf, cap, needed);
  });
}

void lrisk_config_free(lrisk_config* config) { delete config; }

lrisk_status lrisk_synth(const char* out_dir, uint64_t seed, const char* profile, int force,
                         lrisk_synth_summary* summary) {
  return guarded([&] {
    need(out_dir, "out_dir");
    const SynthResult r = run_synth(out_dir, seed, profile ? profile : "default", force != 0);
    if (summary) {
      summary->trials = r.trials;
      for (size_t k = 0; k < LRISK_CLASS_COUNT; ++k) summary->class_counts[k] = r.class_counts[k];
    }
  });
}

lrisk_status lrisk_dataset_load(const char* dir, lrisk_dataset** out) {
  return guarded([&] {
    need(dir, "dir");
    need(out, "out");
    *out = nullptr;
    *out = new lrisk_dataset{load_dataset(dir)};
  });
}

size_t lrisk_dataset_size(const lrisk_dataset* dataset) {
  return dataset ? dataset->dataset.trials.size() : 0;
}

lrisk_status lrisk_dataset_class_counts(const lrisk_dataset* dataset, size_t counts[LRISK_CLASS_COUNT]) {
  return guarded([&] {
    need(dataset, "dataset");
    need(counts, "counts");
    std::fill(counts, counts + LRISK_CLASS_COUNT, size_t{0});
    for (const auto& t : dataset->dataset.trials)
      ++counts[static_cast<size_t>(zone_to_risk(t.zone).index())];
  });
}

void lrisk_dataset_free(lrisk_dataset* dataset) { delete dataset; }

lrisk_status lrisk_train(const lrisk_config* config, const char* data_dir, const char* checkpoint,
                         lrisk_epoch_callback callback, void* user, lrisk_train_summary* summary) {
  return guarded([&] {
    need(config, "config");
    need(data_dir, "data_dir");
    need(checkpoint, "checkpoint");
    EpochObserver observer;
    if (callback)
      observer = [&](const EpochRecord& e) { callback(e.epoch, e.loss, e.accuracy, user); };
    const TrainRunResult r = run_train(config->config, data_dir, checkpoint, observer);
    if (summary) {
      *summary = {};
      summary->epochs_run = static_cast<int>(r.history.epochs.size());
      summary->best_epoch = r.history.best_epoch;
      summary->best_loss = r.history.best_loss();
      fill_metrics(r.test_confusion, &summary->test);
    }
  });
}

lrisk_status lrisk_eval(const char* checkpoint, const char* data_dir, const lrisk_config* config,
                        const char* out_csv, lrisk_metrics* metrics) {
  return guarded([&] {
    need(checkpoint, "checkpoint");
    need(data_dir, "data_dir");
    const EvalResult r =
        run_eval(checkpoint, data_dir, opt_path(out_csv), config ? &config->config : nullptr);
    fill_metrics(r.confusion, metrics);
  });
}

lrisk_status lrisk_saliency(const char* checkpoint, const char* data_dir, int class_index,
                            const char* out_dir, const lrisk_config* config,
                            lrisk_saliency_summary* summary) {
  return guarded([&] {
    need(checkpoint, "checkpoint");
    need(data_dir, "data_dir");
    need(out_dir, "out_dir");
    if (class_index < 0 || class_index >= static_cast<int>(kClassCount))
      fail("class index " + std::to_string(class_index) + " out of range");
    const SaliencyRunResult r = run_saliency(checkpoint, data_dir, static_cast<RiskLevel>(class_index),
                                             out_dir, config ? &config->config : nullptr);
    if (summary) {
      summary->images = r.images;
      for (size_t s = 0; s < LRISK_SENSOR_COUNT; ++s) {
        summary->sensor_totals[s] = r.attribution.per_sensor[s];
        summary->ranking[s] = r.attribution.ranking[s];
      }
    }
  });
}

lrisk_status lrisk_tune(const lrisk_config* config, const char* data_dir, const char* grid_path,
                        const char* out_csv, size_t parallel_cells, lrisk_tune_summary* summary) {
  return guarded([&] {
    need(config, "config");
    need(data_dir, "data_dir");
    need(grid_path, "grid_path");
    need(out_csv, "out_csv");
    const TuneResult r = run_tune(config->config, data_dir, grid_path, out_csv,
                                  std::max<size_t>(parallel_cells, 1));
    if (summary) {
      *summary = {};
      summary->rows = r.rows.size();
      for (const auto& row : r.rows)
        if (row.failed) ++summary->failed;
      const auto ranking = r.ranking();
      if (!ranking.empty()) {
        summary->best_cell = r.rows[ranking.front()].cell;
        summary->best_rk = r.rows[ranking.front()].rk;
      }
    }
  });
}

lrisk_status lrisk_model_load(const char* checkpoint, lrisk_model** out) {
  return guarded([&] {
    need(checkpoint, "checkpoint");
    need(out, "out");
    *out = nullptr;
    Checkpoint c = load_checkpoint(checkpoint);
    PipelineConfig cfg = checkpoint_config(c);
    *out = new lrisk_model{std::move(c), std::move(cfg)};
  });
}

lrisk_status lrisk_model_save(const lrisk_model* model, const char* checkpoint) {
  return guarded([&] {
    need(model, "model");
    need(checkpoint, "checkpoint");
    save_checkpoint(checkpoint, model->checkpoint.model, model->checkpoint.pipeline_text,
                    model->checkpoint.scaler);
  });
}

size_t lrisk_model_image_width(const lrisk_model* model) {
  return model ? model->config.image_width : 0;
}

size_t lrisk_model_image_height(const lrisk_model* model) {
  return model ? model->config.image_height() : 0;
}

size_t lrisk_model_parameter_count(const lrisk_model* model) {
  return model ? model->checkpoint.model.parameter_count() : 0;
}

void lrisk_model_free(lrisk_model* model) { delete model; }

lrisk_status lrisk_rk(const int64_t* counts, size_t k, double* value, int* degenerate) {
  return guarded([&] {
    need(counts, "counts");
    need(value, "value");
    if (k < 2) fail("rk needs at least two classes");
    ConfusionMatrix c(k);
    std::copy(counts, counts + k * k, c.counts.begin());
    const Score s = rk(c);
    *value = s.value;
    if (degenerate) *degenerate = s.degenerate ? 1 : 0;
  });
}

}  // extern "C"
