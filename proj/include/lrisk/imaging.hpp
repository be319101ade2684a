#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "lrisk/signal.hpp"

namespace lrisk {

/// Fixed sensor order; sensor s owns channels 3s, 3s+1, 3s+2.
inline constexpr std::array<std::string_view, kSensorCount> kSensorNames = {
    "side-accel",   "side-gyro",   "lwrist-accel", "lwrist-gyro", "rwrist-accel", "rwrist-gyro",
    "back-accel",   "back-gyro",   "arm-accel",    "arm-gyro",    "thigh-accel",  "thigh-gyro"};

/// Sensor-by-frame-by-axis view of a trial, stored [sensor][frame][axis].
struct ChannelMatrix {
  std::size_t frames = 0;
  std::vector<double> values;

  explicit ChannelMatrix(std::size_t frames = 0)
      : frames(frames), values(kSensorCount * frames * kAxisCount, 0.0) {}

  double& at(std::size_t sensor, std::size_t frame, std::size_t axis) {
    return values[(sensor * frames + frame) * kAxisCount + axis];
  }
  double at(std::size_t sensor, std::size_t frame, std::size_t axis) const {
    return values[(sensor * frames + frame) * kAxisCount + axis];
  }
};

ChannelMatrix to_channel_matrix(const TrialRecording& trial);
/// Inverse of to_channel_matrix for the channel data (labels are defaulted).
TrialRecording to_trial(const ChannelMatrix& matrix);

struct CellIndex {
  std::size_t row = 0;
  std::size_t col = 0;
  friend bool operator==(const CellIndex&, const CellIndex&) = default;
};

struct SensorFrame {
  std::size_t sensor = 0;
  std::size_t frame = 0;
  friend bool operator==(const SensorFrame&, const SensorFrame&) = default;
};

/// Line-wrapped image. Each axis becomes one colour channel; within a channel
/// the flat index k = frame * 12 + sensor fills rows of `width` cells, and
/// cells from `pad_start` on hold the padding value 0.
struct EncodedImage {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t frames = 0;
  std::size_t pad_start = 0;
  std::vector<double> pixels;  // [height][width][3]

  std::size_t cell_count() const { return height * width; }
  double pixel(std::size_t row, std::size_t col, std::size_t ch) const {
    return pixels[(row * width + col) * kAxisCount + ch];
  }

  CellIndex cell_of(std::size_t sensor, std::size_t frame) const;
  /// Empty for padding cells.
  std::optional<SensorFrame> source_of(std::size_t row, std::size_t col) const;
};

std::size_t image_height(std::size_t frames, std::size_t width);

EncodedImage wrap_image(const ChannelMatrix& matrix, std::size_t width = 95);
/// Exact inverse of wrap_image on the non-padded cells.
ChannelMatrix unwrap_image(const EncodedImage& image);

/// Routes a per-cell attribution plane [height][width] back to [sensor][frame];
/// padding cells are dropped.
std::vector<double> unwrap_attribution(std::span<const double> plane, std::size_t height,
                                       std::size_t width, const EncodedImage& image);

/// Binary PPM (P6), each channel mapped affinely from the image min/max.
void write_ppm(const EncodedImage& image, const std::filesystem::path& path);

}  // namespace lrisk
