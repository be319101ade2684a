#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace lrisk {

inline constexpr std::size_t kSensorCount = 12;
inline constexpr std::size_t kAxisCount = 3;
inline constexpr std::size_t kChannelCount = kSensorCount * kAxisCount;

/// One lift trial. Channel 3*s + k holds axis k of sensor s.
struct TrialRecording {
  int subject_id = 0;
  int zone = 1;
  int trial_index = 0;
  double sample_rate_hz = 25.0;
  std::vector<std::vector<double>> channels;
  /// Frame count before any padding or truncation.
  std::size_t original_frames = 0;

  std::size_t frame_count() const { return channels.empty() ? 0 : channels.front().size(); }

  /// Throws if the channel layout or labels are inconsistent.
  void validate() const;
};

TrialRecording make_trial(std::size_t frames, int subject_id = 0, int zone = 1,
                          int trial_index = 0, double sample_rate_hz = 25.0);

/// Transposed direct form II biquad with a0 normalised to 1.
struct Biquad {
  double b0 = 1.0, b1 = 0.0, b2 = 0.0;
  double a1 = 0.0, a2 = 0.0;

  std::complex<double> response(std::complex<double> z) const;
  std::array<std::complex<double>, 2> poles() const;
};

struct BandpassFilter {
  int order = 2;
  double low_hz = 2.0;
  double high_hz = 12.0;
  double sample_rate_hz = 25.0;
  std::vector<Biquad> sections;
  /// Non-fatal adjustments made during design (e.g. a clamped upper edge).
  std::vector<std::string> warnings;

  /// Complex frequency response of the cascade at `hz`.
  std::complex<double> response(double hz) const;
  double magnitude(double hz) const { return std::abs(response(hz)); }
};

/// Digital Butterworth bandpass: analog prototype of the given order, lowpass
/// to bandpass transform and bilinear transform with pre-warped band edges.
/// Produces `order` second-order sections.
BandpassFilter design_bandpass(int order, double low_hz, double high_hz, double sample_rate_hz);

/// Causal single pass through the section cascade from zero state.
std::vector<double> filter_channel(std::span<const double> x, const BandpassFilter& filter);

TrialRecording filter_trial(const TrialRecording& trial, const BandpassFilter& filter);

/// Suffix zero-pads or truncates every channel to `target_frames`.
TrialRecording pad_or_truncate(const TrialRecording& trial, std::size_t target_frames);

enum class ScalerMode { standardize, minmax_unit };

std::string to_string(ScalerMode mode);
ScalerMode parse_scaler_mode(const std::string& text);

/// Per-channel affine scaling fitted on training trials only.
///
/// minmax_unit maps [min, max] to [-1, 1]; standardize maps to zero mean and
/// unit population standard deviation. Degenerate channels (zero range or
/// sd below 1e-12) map to all zeros.
class ChannelScaler {
 public:
  ChannelScaler() = default;

  static ChannelScaler fit(std::span<const TrialRecording> training_trials, ScalerMode mode);
  /// Rebuilds a fitted scaler from stored parameters (checkpoint loading).
  static ChannelScaler from_params(ScalerMode mode, std::vector<double> first,
                                   std::vector<double> second);

  bool fitted() const noexcept { return fitted_; }
  ScalerMode mode() const noexcept { return mode_; }
  /// min (minmax) or mean (standardize), per channel.
  const std::vector<double>& first() const noexcept { return first_; }
  /// max (minmax) or sd (standardize), per channel.
  const std::vector<double>& second() const noexcept { return second_; }

  TrialRecording apply(const TrialRecording& trial) const;

 private:
  ScalerMode mode_ = ScalerMode::standardize;
  bool fitted_ = false;
  std::vector<double> first_;
  std::vector<double> second_;
};

}  // namespace lrisk
