#include "lrisk/imaging.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "lrisk/error.hpp"

namespace lrisk {

ChannelMatrix to_channel_matrix(const TrialRecording& trial) {
  require(trial.channels.size() == kChannelCount,
          "expected 36 channels, got " + std::to_string(trial.channels.size()));
  const std::size_t frames = trial.frame_count();
  ChannelMatrix m(frames);
  for (std::size_t s = 0; s < kSensorCount; ++s)
    for (std::size_t k = 0; k < kAxisCount; ++k) {
      const auto& ch = trial.channels[s * kAxisCount + k];
      require(ch.size() == frames, "trial channels differ in length");
      for (std::size_t t = 0; t < frames; ++t) m.at(s, t, k) = ch[t];
    }
  return m;
}

TrialRecording to_trial(const ChannelMatrix& matrix) {
  TrialRecording t = make_trial(matrix.frames);
  for (std::size_t s = 0; s < kSensorCount; ++s)
    for (std::size_t k = 0; k < kAxisCount; ++k)
      for (std::size_t f = 0; f < matrix.frames; ++f)
        t.channels[s * kAxisCount + k][f] = matrix.at(s, f, k);
  return t;
}

std::size_t image_height(std::size_t frames, std::size_t width) {
  require(width >= kSensorCount, "image width must be >= 12");
  return (kSensorCount * frames + width - 1) / width;
}

CellIndex EncodedImage::cell_of(std::size_t sensor, std::size_t frame) const {
  require(sensor < kSensorCount && frame < frames, "sensor/frame outside the image");
  const std::size_t k = frame * kSensorCount + sensor;
  return {k / width, k % width};
}

std::optional<SensorFrame> EncodedImage::source_of(std::size_t row, std::size_t col) const {
  require(row < height && col < width, "cell outside the image");
  const std::size_t k = row * width + col;
  if (k >= pad_start) return std::nullopt;
  return SensorFrame{k % kSensorCount, k / kSensorCount};
}

EncodedImage wrap_image(const ChannelMatrix& matrix, std::size_t width) {
  EncodedImage img;
  img.width = width;
  img.frames = matrix.frames;
  img.height = image_height(matrix.frames, width);
  img.pad_start = kSensorCount * matrix.frames;
  img.pixels.assign(img.height * width * kAxisCount, 0.0);
  for (std::size_t t = 0; t < matrix.frames; ++t)
    for (std::size_t s = 0; s < kSensorCount; ++s) {
      const std::size_t cell = t * kSensorCount + s;
      for (std::size_t k = 0; k < kAxisCount; ++k)
        img.pixels[cell * kAxisCount + k] = matrix.at(s, t, k);
    }
  return img;
}

ChannelMatrix unwrap_image(const EncodedImage& image) {
  ChannelMatrix m(image.frames);
  for (std::size_t cell = 0; cell < image.pad_start; ++cell) {
    const std::size_t s = cell % kSensorCount;
    const std::size_t t = cell / kSensorCount;
    for (std::size_t k = 0; k < kAxisCount; ++k) m.at(s, t, k) = image.pixels[cell * kAxisCount + k];
  }
  return m;
}

std::vector<double> unwrap_attribution(std::span<const double> plane, std::size_t height,
                                       std::size_t width, const EncodedImage& image) {
  if (height != image.height || width != image.width || plane.size() != height * width)
    throw Error(ErrorCode::mismatch, "attribution plane " + std::to_string(height) + "x" +
                                         std::to_string(width) + " does not match image " +
                                         std::to_string(image.height) + "x" +
                                         std::to_string(image.width));
  std::vector<double> out(kSensorCount * image.frames, 0.0);
  for (std::size_t cell = 0; cell < image.pad_start; ++cell) {
    const std::size_t s = cell % kSensorCount;
    const std::size_t t = cell / kSensorCount;
    out[s * image.frames + t] = plane[cell];
  }
  return out;
}

void write_ppm(const EncodedImage& image, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
  out << "P6\n" << image.width << " " << image.height << "\n255\n";
  const auto [mn, mx] = std::minmax_element(image.pixels.begin(), image.pixels.end());
  const double lo = image.pixels.empty() ? 0.0 : *mn;
  const double range = image.pixels.empty() ? 0.0 : *mx - lo;
  std::vector<unsigned char> bytes(image.pixels.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    const double v = range > 0.0 ? (image.pixels[i] - lo) / range * 255.0 : 128.0;
    bytes[i] = static_cast<unsigned char>(std::clamp(std::lround(v), 0L, 255L));
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::io, "failed writing " + path.string());
}

}  // namespace lrisk
