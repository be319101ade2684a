#include "lrisk/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include "csv.hpp"
#include "lrisk/error.hpp"

namespace lrisk {

namespace fs = std::filesystem;

std::string to_string(RiskLevel level) { return kRiskNames[static_cast<std::size_t>(level)]; }

RiskLevel parse_risk_level(const std::string& text) {
  for (std::size_t i = 0; i < kClassCount; ++i)
    if (text == kRiskNames[i]) return static_cast<RiskLevel>(i);
  fail("unknown risk class '" + text + "' (expected low, medium or high)");
}

RiskLabel zone_to_risk(int zone) {
  require(zone >= 1 && zone <= 12, "zone " + std::to_string(zone) + " outside [1, 12]");
  RiskLevel level = RiskLevel::high;
  if (zone == 4 || zone == 5)
    level = RiskLevel::low;
  else if (zone >= 6 && zone <= 9)
    level = RiskLevel::medium;
  return {level, zone};
}

std::size_t DatasetProfile::max_frames() const {
  return static_cast<std::size_t>(std::lround(max_seconds * sample_rate_hz));
}

std::size_t DatasetProfile::trial_count() const {
  return static_cast<std::size_t>(n_subjects) * zones * trials_per_zone_per_subject;
}

std::array<std::size_t, kClassCount> DatasetProfile::class_counts() const {
  std::array<std::size_t, kClassCount> counts{};
  for (int z = 1; z <= zones; ++z)
    counts[zone_to_risk(z).index()] +=
        static_cast<std::size_t>(n_subjects) * trials_per_zone_per_subject;
  return counts;
}

DatasetProfile default_profile(std::uint64_t seed) {
  DatasetProfile p;
  p.seed = seed;
  return p;
}

DatasetProfile desk_profile(std::uint64_t seed) {
  DatasetProfile p;
  p.seed = seed;
  p.max_seconds = 10.0;
  p.min_duration_s = 6.0;
  p.max_duration_s = 10.0;
  return p;
}

std::string to_string(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::test: return "test";
    default: return "unassigned";
  }
}

Split parse_split(const std::string& text) {
  if (text == "train") return Split::train;
  if (text == "test") return Split::test;
  if (text == "unassigned" || text.empty()) return Split::unassigned;
  fail("unknown split '" + text + "'");
}

bool Manifest::has_split() const {
  return std::any_of(entries.begin(), entries.end(),
                     [](const ManifestEntry& e) { return e.split != Split::unassigned; });
}

std::size_t Manifest::count(Split split) const {
  return static_cast<std::size_t>(std::count_if(
      entries.begin(), entries.end(), [split](const ManifestEntry& e) { return e.split == split; }));
}

std::string trial_file_name(int subject_id, int zone, int trial_index) {
  return "trials/trial_" + std::to_string(subject_id) + "_" + std::to_string(zone) + "_" +
         std::to_string(trial_index) + ".csv";
}

namespace {

// Body location of sensor s: side, lwrist, rwrist, back, arm, thigh.
constexpr std::array<double, 6> kLocationWeight = {0.3, 0.8, 0.8, 1.0, 0.5, 0.3};

double hann_window(double t, double center, double half_width) {
  const double d = t - center;
  if (std::abs(d) >= half_width) return 0.0;
  return 0.5 * (1.0 + std::cos(std::numbers::pi * d / half_width));
}

double emphasis(std::size_t sensor, int risk, const GeneratorParams& g) {
  const std::size_t location = sensor / 2;
  if (location == 3) return 1.0 + g.back_emphasis * risk;
  if (location == 1 || location == 2) return 1.0 + g.wrist_emphasis * risk;
  return 1.0;
}

}  // namespace

Dataset generate_dataset(const DatasetProfile& profile, const GeneratorParams& g) {
  require(profile.n_subjects >= 1 && profile.trials_per_zone_per_subject >= 1,
          "profile needs at least one subject and one trial per zone");
  require(profile.zones == 12, "the zone mapping covers exactly 12 zones");
  require(profile.sample_rate_hz > 0.0, "sample rate must be positive");
  require(profile.min_duration_s > 0.0 && profile.min_duration_s <= profile.max_duration_s,
          "invalid trial duration range");

  std::mt19937_64 rng(profile.seed);
  auto uniform = [&rng](double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
  };
  std::normal_distribution<double> noise(0.0, g.noise_sd);
  const double fs = profile.sample_rate_hz;
  const double two_pi = 2.0 * std::numbers::pi;

  Dataset ds;
  ds.trials.reserve(profile.trial_count());
  for (int subject = 1; subject <= profile.n_subjects; ++subject) {
    const double gain = uniform(1.0 - g.subject_gain_spread, 1.0 + g.subject_gain_spread);
    const double offset = uniform(0.0, g.subject_offset_max_s);
    std::array<double, kSensorCount> sensor_gain{};
    for (double& sg : sensor_gain) sg = uniform(0.9, 1.1);

    for (int zone = 1; zone <= profile.zones; ++zone) {
      const int risk = zone_to_risk(zone).index();
      const double zone_mod = 1.0 + 0.05 * ((zone % 3) - 1);
      for (int index = 1; index <= profile.trials_per_zone_per_subject; ++index) {
        const double duration = uniform(profile.min_duration_s, profile.max_duration_s);
        const auto frames = static_cast<std::size_t>(std::max(1L, std::lround(duration * fs)));
        const double amplitude = g.class_amplitude[risk] * gain * zone_mod;
        const double t1 = uniform(g.first_burst_min_s, g.first_burst_max_s) + offset;
        const double t2 = t1 + g.class_gap_s[risk] + uniform(-g.gap_jitter_s, g.gap_jitter_s);
        const double f1 = uniform(g.burst_min_hz, g.burst_max_hz);
        const double f2 = uniform(g.burst_min_hz, g.burst_max_hz);

        TrialRecording trial = make_trial(frames, subject, zone, index, fs);
        for (std::size_t s = 0; s < kSensorCount; ++s) {
          const double weight = kLocationWeight[s / 2] * sensor_gain[s] * emphasis(s, risk, g);
          const bool accel = s % 2 == 0;
          for (std::size_t k = 0; k < kAxisCount; ++k) {
            const double axis_weight = uniform(0.5, 1.0);
            const double phase1 = uniform(0.0, two_pi);
            const double phase2 = uniform(0.0, two_pi);
            const double scale = amplitude * weight * axis_weight;
            auto& ch = trial.channels[s * kAxisCount + k];
            for (std::size_t n = 0; n < frames; ++n) {
              const double t = static_cast<double>(n) / fs;
              double v = noise(rng);
              if (accel && k == 2) v += g.gravity;
              v += scale * hann_window(t, t1, g.burst_half_width_s) *
                   std::sin(two_pi * f1 * t + phase1);
              v += scale * g.return_burst_ratio * hann_window(t, t2, g.burst_half_width_s) *
                   std::sin(two_pi * f2 * t + phase2);
              ch[n] = v;
            }
          }
        }
        ds.manifest.entries.push_back(
            {trial_file_name(subject, zone, index), subject, zone, index, frames, Split::unassigned});
        ds.trials.push_back(std::move(trial));
      }
    }
  }
  ds.manifest.comments.push_back("generator seed=" + std::to_string(profile.seed) +
                                 " subjects=" + std::to_string(profile.n_subjects) +
                                 " trials_per_zone=" +
                                 std::to_string(profile.trials_per_zone_per_subject) +
                                 " max_seconds=" + csv::format_double(profile.max_seconds));
  return ds;
}

Manifest split_dataset(Manifest manifest, double train_fraction, std::uint64_t seed) {
  require(train_fraction > 0.0 && train_fraction < 1.0, "train fraction must lie in (0, 1)");
  const std::size_t n = manifest.entries.size();
  const auto n_train = static_cast<std::size_t>(std::llround(static_cast<double>(n) * train_fraction));
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  for (std::size_t i = 0; i < n; ++i)
    manifest.entries[order[i]].split = i < n_train ? Split::train : Split::test;
  return manifest;
}

namespace {

constexpr const char* kManifestHeader = "trial_file,subject_id,zone,trial_index,frame_count,split";

std::string trial_header() {
  std::string h = "frame";
  const char axes[] = {'x', 'y', 'z'};
  for (std::size_t s = 0; s < kSensorCount; ++s)
    for (char a : axes) h += ",s" + std::to_string(s) + a;
  return h;
}

void write_trial(const TrialRecording& trial, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
  std::string buf = trial_header() + "\n";
  const std::size_t frames = trial.frame_count();
  for (std::size_t t = 0; t < frames; ++t) {
    buf += std::to_string(t);
    for (const auto& ch : trial.channels) {
      buf += ',';
      buf += csv::format_double(ch[t]);
    }
    buf += '\n';
  }
  out << buf;
  if (!out) throw Error(ErrorCode::io, "failed writing " + path.string());
}

}  // namespace

void save_manifest(const Manifest& manifest, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
  for (const auto& c : manifest.comments) out << "# " << c << "\n";
  out << kManifestHeader << "\n";
  for (const auto& e : manifest.entries)
    out << e.trial_file << "," << e.subject_id << "," << e.zone << "," << e.trial_index << ","
        << e.frame_count << "," << to_string(e.split) << "\n";
  if (!out) throw Error(ErrorCode::io, "failed writing " + path.string());
}

void save_dataset(const Dataset& dataset, const fs::path& directory) {
  require(dataset.trials.size() == dataset.manifest.entries.size(),
          "manifest and trial list differ in length");
  std::error_code ec;
  fs::create_directories(directory / "trials", ec);
  if (ec) throw Error(ErrorCode::io, "cannot create " + (directory / "trials").string());
  std::set<std::string> seen;
  for (std::size_t i = 0; i < dataset.trials.size(); ++i) {
    const auto& entry = dataset.manifest.entries[i];
    require(seen.insert(entry.trial_file).second, "duplicate trial file " + entry.trial_file);
    write_trial(dataset.trials[i], directory / entry.trial_file);
  }
  save_manifest(dataset.manifest, directory / "manifest.csv");
}

Manifest load_manifest(const fs::path& path) {
  using Kind = DataError::Kind;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(Kind::missing_file, path.string(), 0, "");
  Manifest m;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  std::set<std::string> seen;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view view = csv::trim(line);
    if (view.empty()) continue;
    if (view.front() == '#') {
      m.comments.emplace_back(csv::trim(view.substr(1)));
      continue;
    }
    if (!header_seen) {
      if (view != kManifestHeader)
        throw DataError(Kind::bad_manifest, path.string(), line_no, "unexpected header");
      header_seen = true;
      continue;
    }
    const auto cols = csv::split(view);
    if (cols.size() != 6)
      throw DataError(Kind::malformed_row, path.string(), line_no,
                      "expected 6 columns, found " + std::to_string(cols.size()));
    ManifestEntry e;
    e.trial_file = std::string(csv::trim(cols[0]));
    const auto subject = csv::parse_int<int>(cols[1]);
    const auto zone = csv::parse_int<int>(cols[2]);
    const auto index = csv::parse_int<int>(cols[3]);
    const auto frames = csv::parse_int<std::size_t>(cols[4]);
    if (!subject || !zone || !index || !frames || e.trial_file.empty())
      throw DataError(Kind::malformed_row, path.string(), line_no, "unparseable field");
    if (*zone < 1 || *zone > 12)
      throw DataError(Kind::malformed_row, path.string(), line_no, "zone outside [1, 12]");
    e.subject_id = *subject;
    e.zone = *zone;
    e.trial_index = *index;
    e.frame_count = *frames;
    try {
      e.split = parse_split(std::string(csv::trim(cols[5])));
    } catch (const Error&) {
      throw DataError(Kind::malformed_row, path.string(), line_no, "unknown split");
    }
    if (!seen.insert(e.trial_file).second)
      throw DataError(Kind::bad_manifest, path.string(), line_no, "duplicate trial file");
    m.entries.push_back(std::move(e));
  }
  if (!header_seen) throw DataError(Kind::bad_manifest, path.string(), 0, "missing header");
  return m;
}

TrialRecording load_trial(const fs::path& path) {
  using Kind = DataError::Kind;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(Kind::missing_file, path.string(), 0, "");
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();

  TrialRecording t = make_trial(0);
  std::size_t line_no = 0;
  std::size_t pos = 0;
  bool header_seen = false;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    const std::string_view line = csv::trim(std::string_view(text).substr(pos, end - pos));
    pos = end + 1;
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    const auto cols = csv::split(line);
    if (!header_seen) {
      if (cols.size() != kChannelCount + 1)
        throw DataError(Kind::channel_count, path.string(), line_no,
                        "header has " + std::to_string(cols.size() - 1) + " channels, expected 36");
      header_seen = true;
      continue;
    }
    if (cols.size() != kChannelCount + 1)
      throw DataError(Kind::malformed_row, path.string(), line_no,
                      "expected 37 columns, found " + std::to_string(cols.size()));
    for (std::size_t c = 0; c < kChannelCount; ++c) {
      const auto v = csv::parse_double(cols[c + 1]);
      if (!v)
        throw DataError(Kind::malformed_row, path.string(), line_no,
                        "unparseable value in column " + std::to_string(c + 2));
      t.channels[c].push_back(*v);
    }
  }
  if (!header_seen) throw DataError(Kind::channel_count, path.string(), 0, "missing header");
  if (t.frame_count() == 0) throw DataError(Kind::malformed_row, path.string(), 0, "no frames");
  t.original_frames = t.frame_count();
  return t;
}

Dataset load_dataset(const fs::path& directory) {
  Dataset ds;
  ds.manifest = load_manifest(directory / "manifest.csv");
  ds.trials.reserve(ds.manifest.entries.size());
  for (const auto& e : ds.manifest.entries) {
    TrialRecording t = load_trial(directory / e.trial_file);
    if (t.frame_count() != e.frame_count)
      throw DataError(DataError::Kind::bad_manifest, (directory / e.trial_file).string(), 0,
                      "manifest lists " + std::to_string(e.frame_count) + " frames, file has " +
                          std::to_string(t.frame_count()));
    t.subject_id = e.subject_id;
    t.zone = e.zone;
    t.trial_index = e.trial_index;
    ds.trials.push_back(std::move(t));
  }
  return ds;
}

double back_band_energy(const TrialRecording& trial) {
  const BandpassFilter filter = design_bandpass(2, 2.0, 12.0, trial.sample_rate_hz);
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t s : {std::size_t{6}, std::size_t{7}})
    for (std::size_t k = 0; k < kAxisCount; ++k) {
      const auto y = filter_channel(trial.channels[s * kAxisCount + k], filter);
      for (double v : y) sum += v * v;
      count += y.size();
    }
  return sum / static_cast<double>(count);
}

}  // namespace lrisk
