#include "lrisk/signal.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "lrisk/error.hpp"

namespace lrisk {

using cplx = std::complex<double>;

void TrialRecording::validate() const {
  require(channels.size() == kChannelCount,
          "trial has " + std::to_string(channels.size()) + " channels, expected 36");
  const std::size_t n = channels.front().size();
  require(n >= 1, "trial has no frames");
  for (const auto& ch : channels) require(ch.size() == n, "trial channels differ in length");
  require(zone >= 1 && zone <= 12, "zone " + std::to_string(zone) + " outside [1, 12]");
  require(sample_rate_hz > 0.0, "sample rate must be positive");
}

TrialRecording make_trial(std::size_t frames, int subject_id, int zone, int trial_index,
                          double sample_rate_hz) {
  TrialRecording t;
  t.subject_id = subject_id;
  t.zone = zone;
  t.trial_index = trial_index;
  t.sample_rate_hz = sample_rate_hz;
  t.channels.assign(kChannelCount, std::vector<double>(frames, 0.0));
  t.original_frames = frames;
  return t;
}

cplx Biquad::response(cplx z) const {
  const cplx zi = 1.0 / z;
  return (b0 + zi * (b1 + zi * b2)) / (1.0 + zi * (a1 + zi * a2));
}

std::array<cplx, 2> Biquad::poles() const {
  // roots of z^2 + a1 z + a2
  const cplx disc = std::sqrt(cplx(a1 * a1 - 4.0 * a2, 0.0));
  return {(-a1 + disc) / 2.0, (-a1 - disc) / 2.0};
}

cplx BandpassFilter::response(double hz) const {
  const double w = 2.0 * std::numbers::pi * hz / sample_rate_hz;
  const cplx z = std::polar(1.0, w);
  cplx h = 1.0;
  for (const auto& s : sections) h *= s.response(z);
  return h;
}

BandpassFilter design_bandpass(int order, double low_hz, double high_hz, double sample_rate_hz) {
  require(order >= 1, "filter order must be >= 1");
  require(low_hz > 0.0 && high_hz > 0.0, "band edges must be positive");
  require(sample_rate_hz > 0.0, "sample rate must be positive");
  require(low_hz < high_hz, "low band edge must be below the high band edge");
  require(sample_rate_hz > 2.0 * low_hz, "low band edge must be below Nyquist");

  BandpassFilter f;
  f.order = order;
  f.low_hz = low_hz;
  f.high_hz = high_hz;
  f.sample_rate_hz = sample_rate_hz;

  const double nyquist = sample_rate_hz / 2.0;
  if (high_hz >= nyquist) {
    f.high_hz = 0.99 * nyquist;
    f.warnings.push_back("high band edge " + std::to_string(high_hz) + " Hz clamped to " +
                         std::to_string(f.high_hz) + " Hz (0.99 of Nyquist)");
    require(low_hz < f.high_hz, "low band edge is above the clamped high band edge");
  }

  const double fs2 = 2.0 * sample_rate_hz;
  const double w1 = fs2 * std::tan(std::numbers::pi * f.low_hz / sample_rate_hz);
  const double w2 = fs2 * std::tan(std::numbers::pi * f.high_hz / sample_rate_hz);
  const double bw = w2 - w1;
  const double w0sq = w1 * w2;

  // Analog lowpass prototype poles on the left half of the unit circle, each
  // split into a bandpass pole pair, then mapped through the bilinear transform.
  std::vector<cplx> poles;
  poles.reserve(2 * order);
  cplx denom = 1.0;
  for (int k = 1; k <= order; ++k) {
    const cplx p = std::polar(1.0, std::numbers::pi * (2.0 * k + order - 1.0) / (2.0 * order));
    const cplx a = p * (bw / 2.0);
    const cplx d = std::sqrt(a * a - w0sq);
    for (const cplx s : {a + d, a - d}) {
      denom *= (fs2 - s);
      poles.push_back((fs2 + s) / (fs2 - s));
    }
  }
  // Analog gain bw^N; the N zeros at s = 0 contribute fs2^N.
  const double gain = (std::pow(bw, order) * std::pow(fs2, order) / denom).real();

  // Pair each upper-half-plane pole with its conjugate; leftover real poles
  // are paired in sorted order.
  constexpr double tol = 1e-12;
  std::vector<std::pair<cplx, cplx>> pairs;
  std::vector<double> reals;
  for (const cplx& p : poles) {
    if (p.imag() > tol)
      pairs.emplace_back(p, std::conj(p));
    else if (std::abs(p.imag()) <= tol)
      reals.push_back(p.real());
  }
  std::sort(reals.begin(), reals.end());
  for (std::size_t i = 0; i + 1 < reals.size(); i += 2) pairs.emplace_back(reals[i], reals[i + 1]);
  require(static_cast<int>(pairs.size()) == order, "pole pairing failed");

  const double section_gain = std::pow(std::abs(gain), 1.0 / order);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& [p1, p2] = pairs[i];
    Biquad s;
    const double g = (i == 0 && gain < 0.0) ? -section_gain : section_gain;
    // zeros at z = 1 and z = -1
    s.b0 = g;
    s.b1 = 0.0;
    s.b2 = -g;
    s.a1 = -(p1 + p2).real();
    s.a2 = (p1 * p2).real();
    f.sections.push_back(s);
  }
  return f;
}

std::vector<double> filter_channel(std::span<const double> x, const BandpassFilter& filter) {
  require(!x.empty(), "cannot filter an empty sequence");
  std::vector<double> y(x.begin(), x.end());
  for (const auto& s : filter.sections) {
    double z1 = 0.0, z2 = 0.0;
    for (double& v : y) {
      const double in = v;
      const double out = s.b0 * in + z1;
      z1 = s.b1 * in - s.a1 * out + z2;
      z2 = s.b2 * in - s.a2 * out;
      v = out;
    }
  }
  return y;
}

TrialRecording filter_trial(const TrialRecording& trial, const BandpassFilter& filter) {
  TrialRecording out = trial;
  for (auto& ch : out.channels) ch = filter_channel(ch, filter);
  return out;
}

TrialRecording pad_or_truncate(const TrialRecording& trial, std::size_t target_frames) {
  require(target_frames >= 1, "target frame count must be >= 1");
  TrialRecording out = trial;
  if (out.original_frames == 0) out.original_frames = trial.frame_count();
  for (auto& ch : out.channels) ch.resize(target_frames, 0.0);
  return out;
}

std::string to_string(ScalerMode mode) {
  return mode == ScalerMode::standardize ? "standardize" : "minmax";
}

ScalerMode parse_scaler_mode(const std::string& text) {
  if (text == "standardize") return ScalerMode::standardize;
  if (text == "minmax" || text == "minmax_unit") return ScalerMode::minmax_unit;
  fail("unknown scaler mode '" + text + "' (expected standardize or minmax)");
}

ChannelScaler ChannelScaler::fit(std::span<const TrialRecording> training_trials, ScalerMode mode) {
  require(!training_trials.empty(), "cannot fit a scaler on an empty training set");
  for (const auto& t : training_trials)
    require(t.channels.size() == kChannelCount, "scaler input must have 36 channels");

  ChannelScaler s;
  s.mode_ = mode;
  s.fitted_ = true;
  s.first_.assign(kChannelCount, 0.0);
  s.second_.assign(kChannelCount, 0.0);

  for (std::size_t c = 0; c < kChannelCount; ++c) {
    if (mode == ScalerMode::minmax_unit) {
      double lo = training_trials.front().channels[c].front();
      double hi = lo;
      for (const auto& t : training_trials) {
        const auto [mn, mx] = std::minmax_element(t.channels[c].begin(), t.channels[c].end());
        lo = std::min(lo, *mn);
        hi = std::max(hi, *mx);
      }
      s.first_[c] = lo;
      s.second_[c] = hi;
    } else {
      double sum = 0.0;
      std::size_t count = 0;
      for (const auto& t : training_trials) {
        for (double v : t.channels[c]) sum += v;
        count += t.channels[c].size();
      }
      const double mean = sum / static_cast<double>(count);
      double ss = 0.0;
      for (const auto& t : training_trials)
        for (double v : t.channels[c]) ss += (v - mean) * (v - mean);
      s.first_[c] = mean;
      s.second_[c] = std::sqrt(ss / static_cast<double>(count));
    }
  }
  return s;
}

ChannelScaler ChannelScaler::from_params(ScalerMode mode, std::vector<double> first,
                                         std::vector<double> second) {
  require(first.size() == kChannelCount && second.size() == kChannelCount,
          "scaler parameters must cover 36 channels");
  ChannelScaler s;
  s.mode_ = mode;
  s.fitted_ = true;
  s.first_ = std::move(first);
  s.second_ = std::move(second);
  return s;
}

TrialRecording ChannelScaler::apply(const TrialRecording& trial) const {
  require(fitted_, "scaler applied before fitting");
  require(trial.channels.size() == kChannelCount, "scaler input must have 36 channels");
  TrialRecording out = trial;
  for (std::size_t c = 0; c < kChannelCount; ++c) {
    auto& ch = out.channels[c];
    if (mode_ == ScalerMode::minmax_unit) {
      const double lo = first_[c];
      const double range = second_[c] - lo;
      for (double& v : ch) v = range > 0.0 ? 2.0 * (v - lo) / range - 1.0 : 0.0;
    } else {
      const double mean = first_[c];
      const double sd = second_[c];
      for (double& v : ch) v = sd < 1e-12 ? 0.0 : (v - mean) / sd;
    }
  }
  return out;
}

}  // namespace lrisk
