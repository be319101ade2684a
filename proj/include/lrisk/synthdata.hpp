#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lrisk/signal.hpp"

namespace lrisk {

inline constexpr std::size_t kClassCount = 3;

enum class RiskLevel { low = 0, medium = 1, high = 2 };

inline constexpr std::array<const char*, kClassCount> kRiskNames = {"low", "medium", "high"};

std::string to_string(RiskLevel level);
RiskLevel parse_risk_level(const std::string& text);

struct RiskLabel {
  RiskLevel value = RiskLevel::low;
  int source_zone = 4;

  int index() const { return static_cast<int>(value); }
};

/// ACGIH lifting zone (1-12) to relative risk: {4,5} low, {6..9} medium,
/// {1,2,3,10,11,12} high.
RiskLabel zone_to_risk(int zone);

struct DatasetProfile {
  int n_subjects = 10;
  int trials_per_zone_per_subject = 6;
  int zones = 12;
  double sample_rate_hz = 25.0;
  double max_seconds = 30.0;
  /// Trial durations are drawn uniformly from [min_duration_s, max_duration_s].
  double min_duration_s = 10.0;
  double max_duration_s = 15.0;
  std::uint64_t seed = 42;

  std::size_t max_frames() const;
  std::size_t trial_count() const;
  /// Expected trials per risk class implied by the zone mapping.
  std::array<std::size_t, kClassCount> class_counts() const;
};

/// Full-sized profile: 30 s window, 10-15 s lifts.
DatasetProfile default_profile(std::uint64_t seed = 42);
/// Reduced profile: 10 s window (250 frames), 6-10 s lifts.
DatasetProfile desk_profile(std::uint64_t seed = 42);

/// Shape of the synthetic lift signal. Each trial carries two windowed
/// sinusoid bursts (lift and return to upright) over Gaussian noise; burst
/// amplitude, the gap between bursts and back/wrist emphasis grow with risk.
struct GeneratorParams {
  double noise_sd = 0.05;
  double gravity = 1.0;
  std::array<double, kClassCount> class_amplitude = {0.6, 1.0, 1.4};
  std::array<double, kClassCount> class_gap_s = {1.6, 2.4, 3.2};
  double gap_jitter_s = 0.3;
  double first_burst_min_s = 0.6;
  double first_burst_max_s = 1.2;
  double burst_half_width_s = 0.6;
  double burst_min_hz = 3.0;
  double burst_max_hz = 6.0;
  double return_burst_ratio = 0.8;
  double subject_gain_spread = 0.15;
  double subject_offset_max_s = 0.4;
  /// Extra per-class emphasis multipliers for back and wrist sensors.
  double back_emphasis = 0.25;
  double wrist_emphasis = 0.15;
};

enum class Split { unassigned, train, test };

std::string to_string(Split split);
Split parse_split(const std::string& text);

struct ManifestEntry {
  std::string trial_file;  // relative to the dataset directory
  int subject_id = 0;
  int zone = 1;
  int trial_index = 0;
  std::size_t frame_count = 0;
  Split split = Split::unassigned;

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct Manifest {
  std::vector<ManifestEntry> entries;
  /// Free-form provenance lines written as `#` comments.
  std::vector<std::string> comments;

  bool has_split() const;
  std::size_t count(Split split) const;
  friend bool operator==(const Manifest& a, const Manifest& b) { return a.entries == b.entries; }
};

struct Dataset {
  std::vector<TrialRecording> trials;
  Manifest manifest;
};

std::string trial_file_name(int subject_id, int zone, int trial_index);

Dataset generate_dataset(const DatasetProfile& profile, const GeneratorParams& params = {});

/// Uniform random train/test assignment without replacement;
/// round(n * train_fraction) entries go to train.
Manifest split_dataset(Manifest manifest, double train_fraction, std::uint64_t seed);

/// Writes `manifest.csv` and `trials/trial_<subject>_<zone>_<index>.csv`.
void save_dataset(const Dataset& dataset, const std::filesystem::path& directory);
void save_manifest(const Manifest& manifest, const std::filesystem::path& path);
Manifest load_manifest(const std::filesystem::path& path);
TrialRecording load_trial(const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& directory);

/// Mean squared value of the back sensor channels, a class-separation probe.
double back_band_energy(const TrialRecording& trial);

}  // namespace lrisk
