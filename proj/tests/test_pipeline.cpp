#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "doctest.h"
#include "lrisk/error.hpp"
#include "lrisk/pipeline.hpp"

using namespace lrisk;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("lrisk_pipeline_" + name);
  fs::remove_all(p);
  return p;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) files[fs::relative(e.path(), dir).string()] = read_file(e.path());
  return files;
}

PipelineConfig small_config() {
  PipelineConfig c = PipelineConfig::desk();
  c.scale = ModelScale{{4, 6, 6}, 16};
  c.train.max_epochs = 3;
  c.train.batch_size = 8;
  c.train.seed = 7;
  return c;
}

// A small dataset on disk, shared by the end-to-end cases.
const fs::path& small_dataset() {
  static const fs::path dir = [] {
    const fs::path d = scratch("data");
    DatasetProfile p = desk_profile(3);
    p.n_subjects = 2;
    p.trials_per_zone_per_subject = 2;
    save_dataset(generate_dataset(p), d);
    return d;
  }();
  return dir;
}

}  // namespace

TEST_CASE("config text round trip") {
  PipelineConfig c = PipelineConfig::desk();
  c.train.l2_lambda = 1e-7;
  c.train.learning_rate = 3e-4;
  c.model = "vgg_b_max";
  c.data_dir = "some/dir";
  c.out_dir = "runs";
  const PipelineConfig back = PipelineConfig::parse(c.to_text());
  CHECK(back == c);
  CHECK(PipelineConfig::parse(PipelineConfig{}.to_text()) == PipelineConfig{});
  for (const auto& key : PipelineConfig::keys()) CHECK(c.to_text().find(key + " = ") != std::string::npos);

  const auto prov = c.provenance();
  REQUIRE(!prov.empty());
  CHECK(prov[0].rfind("config ", 0) == 0);
}

TEST_CASE("config parsing") {
  const PipelineConfig c = PipelineConfig::parse(
      "# comment\n\n  frames = 500  \nmodel.filters = 4,8,12\nseed = 9 # trailing\nscaler = minmax_unit\n");
  CHECK(c.frames == 500);
  CHECK(c.scale.filters == std::array<std::size_t, 3>{4, 8, 12});
  CHECK(c.train.seed == 9);
  CHECK(c.get("seed") == "9");
  CHECK(c.get("model.filters") == "4,8,12");
  CHECK(c.scaler == ScalerMode::minmax_unit);
  CHECK(c.image_width == 95);

  try {
    PipelineConfig::parse("foo = 1\n");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::config);
    CHECK(std::string(e.what()).find("'foo'") != std::string::npos);
  }
  CHECK_THROWS_AS(PipelineConfig::parse("frames = many\n"), Error);
  CHECK_THROWS_AS(PipelineConfig::parse("just words\n"), Error);
  CHECK_THROWS_AS(PipelineConfig::parse("model = resnet\n"), Error);
  CHECK_THROWS_AS(PipelineConfig::parse("image.width = 11\n"), Error);
  CHECK_THROWS_AS(PipelineConfig::parse("train.dropout = 1.5\n"), Error);
  CHECK_THROWS_AS(PipelineConfig{}.get("nope"), Error);
}

TEST_CASE("desk config geometry") {
  const PipelineConfig d = PipelineConfig::desk();
  CHECK(d.frames == 250);
  CHECK(d.image_width == 55);
  CHECK(d.image_height() == 55);
  CHECK(PipelineConfig{}.image_height() == 95);
}

TEST_CASE("synth writes a dataset and refuses to overwrite") {
  const fs::path dir = scratch("synth");
  const SynthResult r = run_synth(dir, 42, "desk", false);
  const DatasetProfile p = desk_profile(42);
  CHECK(r.trials == p.trial_count());
  CHECK(r.class_counts == p.class_counts());
  CHECK(fs::exists(dir / "manifest.csv"));
  const PipelineConfig cfg = PipelineConfig::load(dir / "pipeline.cfg");
  CHECK(cfg.train.seed == 42);
  CHECK(cfg.frames == 250);
  try {
    run_synth(dir, 42, "desk", false);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::exists);
  }
  CHECK(run_synth(dir, 43, "desk", true).trials == r.trials);
  CHECK(PipelineConfig::load(dir / "pipeline.cfg").train.seed == 43);
  CHECK_THROWS_AS(run_synth(scratch("synth_bad"), 1, "huge", false), Error);
  fs::remove_all(dir);
}

TEST_CASE("prepare_data builds images from the train-fitted scaler") {
  const Dataset ds = load_dataset(small_dataset());
  const PipelineConfig c = small_config();
  const PreparedData a = prepare_data(ds, c);
  CHECK(a.height == 55);
  CHECK(a.width == 55);
  CHECK(a.manifest.has_split());
  CHECK(a.train.labels.size() + a.test.labels.size() == ds.trials.size());
  CHECK(a.test_images.size() == a.test.labels.size());
  CHECK(a.train.images.dim(1) == 55);
  CHECK(a.train.images.dim(3) == 3);
  const PreparedData b = prepare_data(ds, c);
  CHECK(a.train.images == b.train.images);
  CHECK(a.scaler.first() == b.scaler.first());
  CHECK(a.scaler.second() == b.scaler.second());
  // a supplied scaler is used as is
  const PreparedData s = prepare_data(ds, c, &a.scaler);
  CHECK(s.test.images == a.test.images);
}

TEST_CASE("train then eval agree and leave the data directory untouched") {
  const fs::path data = small_dataset();
  const auto before = snapshot(data);
  const fs::path out = scratch("train");
  const PipelineConfig c = small_config();
  int epochs_seen = 0;
  const TrainRunResult r = run_train(c, data, out / "model.ckpt", [&](const EpochRecord&) { ++epochs_seen; });
  CHECK(epochs_seen == static_cast<int>(r.history.epochs.size()));
  CHECK(fs::exists(r.checkpoint));
  CHECK(r.history_csv == out / "model.history.csv");
  CHECK(fs::exists(r.history_csv));
  CHECK(fs::exists(r.metrics_csv));
  CHECK(fs::exists(r.split_csv));
  CHECK(snapshot(data) == before);

  const EvalResult e = run_eval(r.checkpoint, data, out / "eval.csv");
  CHECK(e.confusion == r.test_confusion);
  CHECK(read_file(out / "eval.csv") == read_file(r.metrics_csv));
  CHECK(e.csv == read_file(r.metrics_csv));

  const Checkpoint ck = load_checkpoint(r.checkpoint);
  CHECK(checkpoint_config(ck) == c);
  PipelineConfig wide = c;
  wide.image_width = 95;
  try {
    run_eval(r.checkpoint, data, {}, &wide);
    FAIL("expected an error");
  } catch (const Error& err) {
    CHECK(err.code() == ErrorCode::mismatch);
    CHECK(std::string(err.what()).find("55") != std::string::npos);
  }

  const SaliencyRunResult s = run_saliency(r.checkpoint, data, RiskLevel::high, out / "sal");
  CHECK(s.images > 0);
  CHECK(s.image_pgms.size() == s.images);
  CHECK(fs::exists(s.mean_pgm));
  CHECK(fs::exists(s.attribution_csv));
  double total = 0.0;
  for (double v : s.attribution.per_sensor) {
    CHECK(v >= 0.0);
    total += v;
  }
  CHECK(total > 0.0);
  CHECK(snapshot(data) == before);

  // a rerun produces identical artifacts
  const TrainRunResult again = run_train(c, data, out / "again.ckpt");
  CHECK(read_file(again.metrics_csv) == read_file(r.metrics_csv));
  CHECK(read_file(again.checkpoint) == read_file(r.checkpoint));
  fs::remove_all(out);
}

TEST_CASE("tune over a small grid") {
  const fs::path out = scratch("tune");
  fs::create_directories(out);
  std::ofstream(out / "grid.cfg") << "lambdas = 1e-3\nalphas = 1e-2, 1e-3\ndropouts = 0.0\n";
  PipelineConfig c = small_config();
  c.train.max_epochs = 2;
  const TuneResult r = run_tune(c, small_dataset(), out / "grid.cfg", out / "tune.csv");
  CHECK(r.rows.size() == 2);
  CHECK(fs::exists(out / "tune.csv"));
  CHECK(fs::exists(out / "tune.cell0.history.csv"));
  CHECK(fs::exists(out / "tune.cell1.history.csv"));
  std::ofstream(out / "bad.cfg") << "gammas = 1\n";
  CHECK_THROWS_AS(run_tune(c, small_dataset(), out / "bad.cfg", out / "t2.csv"), Error);
  fs::remove_all(out);
}

TEST_CASE("missing data directory is a data error") {
  try {
    run_train(small_config(), scratch("nothing"), scratch("x") / "m.ckpt");
    FAIL("expected an error");
  } catch (const DataError&) {
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::data);
  }
}
