#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "lrisk/imaging.hpp"
#include "lrisk/model.hpp"

namespace lrisk {

/// Gradient of one class's pre-softmax score with respect to the input image.
struct SaliencyMap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;
  int class_index = 0;
  std::vector<double> gradient;   // [height][width][channels]
  std::vector<double> magnitude;  // [height][width], max |gradient| over channels
};

/// image is one sample [H,W,C] (or [1,H,W,C]). Runs the model in inference
/// mode, so the result is deterministic and the model is not modified.
SaliencyMap class_score_gradient(const Model& model, const Tensor& image, int class_index);
SaliencyMap class_score_gradient(const Model& model, const EncodedImage& image, int class_index);

Tensor image_tensor(const EncodedImage& image);

/// Element-wise mean of several maps of one class (gradient and magnitude).
SaliencyMap mean_saliency(std::span<const SaliencyMap> maps);

struct SensorAttribution {
  std::array<double, kSensorCount> per_sensor{};
  std::vector<double> per_sensor_frame;  // [sensor][frame]
  std::array<std::size_t, kSensorCount> ranking{};  // sensors by descending total
};

SensorAttribution sensor_attribution(const SaliencyMap& map, const EncodedImage& image);

void write_attribution_csv(const SensorAttribution& attribution, const std::filesystem::path& path,
                           const std::vector<std::string>& comments = {});

/// Binary PGM (P5) of the magnitude plane, min -> 0 and max -> 255; a
/// constant plane maps to 128.
void export_saliency(const SaliencyMap& map, const std::filesystem::path& path);

struct GrayImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<unsigned char> pixels;
};

GrayImage read_pgm(const std::filesystem::path& path);

}  // namespace lrisk
