#include "lrisk/saliency.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "csv.hpp"
#include "lrisk/error.hpp"

namespace lrisk {

Tensor image_tensor(const EncodedImage& image) {
  return Tensor({1, image.height, image.width, kAxisCount}, image.pixels);
}

SaliencyMap class_score_gradient(const Model& model, const Tensor& image, int class_index) {
  if (class_index < 0 || static_cast<std::size_t>(class_index) >= model.num_classes())
    fail("class index " + std::to_string(class_index) + " outside [0, " +
         std::to_string(model.num_classes()) + ")");
  Tensor x = image;
  if (x.rank() == model.input_shape().size()) {
    Shape batched = {1};
    batched.insert(batched.end(), x.shape().begin(), x.shape().end());
    x = x.reshaped(batched);
  }
  require(x.dim(0) == 1, "saliency takes a single image");

  Trace trace;
  model.infer(x, &trace);
  Tensor seed({1, model.num_classes()});
  seed[static_cast<std::size_t>(class_index)] = 1.0;
  const Tensor grad = model.input_gradient(trace, seed);

  SaliencyMap map;
  map.class_index = class_index;
  const Shape& in = model.input_shape();
  map.height = in.size() >= 1 ? in[0] : 1;
  map.width = in.size() >= 2 ? in[1] : 1;
  map.channels = in.size() >= 3 ? in[2] : 1;
  map.gradient.assign(grad.values().begin(), grad.values().end());
  map.magnitude.assign(map.height * map.width, 0.0);
  for (std::size_t cell = 0; cell < map.height * map.width; ++cell) {
    double m = 0.0;
    for (std::size_t c = 0; c < map.channels; ++c)
      m = std::max(m, std::abs(map.gradient[cell * map.channels + c]));
    map.magnitude[cell] = m;
  }
  return map;
}

SaliencyMap class_score_gradient(const Model& model, const EncodedImage& image, int class_index) {
  return class_score_gradient(model, image_tensor(image), class_index);
}

SaliencyMap mean_saliency(std::span<const SaliencyMap> maps) {
  require(!maps.empty(), "cannot average zero saliency maps");
  SaliencyMap mean = maps.front();
  for (std::size_t i = 1; i < maps.size(); ++i) {
    const auto& m = maps[i];
    require(m.height == mean.height && m.width == mean.width && m.channels == mean.channels,
            "saliency maps differ in shape");
    for (std::size_t j = 0; j < mean.gradient.size(); ++j) mean.gradient[j] += m.gradient[j];
    for (std::size_t j = 0; j < mean.magnitude.size(); ++j) mean.magnitude[j] += m.magnitude[j];
  }
  const double inv = 1.0 / static_cast<double>(maps.size());
  for (double& v : mean.gradient) v *= inv;
  for (double& v : mean.magnitude) v *= inv;
  return mean;
}

SensorAttribution sensor_attribution(const SaliencyMap& map, const EncodedImage& image) {
  SensorAttribution a;
  a.per_sensor_frame = unwrap_attribution(map.magnitude, map.height, map.width, image);
  for (std::size_t s = 0; s < kSensorCount; ++s) {
    double total = 0.0;
    for (std::size_t t = 0; t < image.frames; ++t) total += a.per_sensor_frame[s * image.frames + t];
    a.per_sensor[s] = total;
  }
  std::iota(a.ranking.begin(), a.ranking.end(), std::size_t{0});
  std::stable_sort(a.ranking.begin(), a.ranking.end(), [&a](std::size_t x, std::size_t y) {
    return a.per_sensor[x] > a.per_sensor[y];
  });
  return a;
}

void write_attribution_csv(const SensorAttribution& attribution, const std::filesystem::path& path,
                           const std::vector<std::string>& comments) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
  for (const auto& c : comments) out << "# " << c << "\n";
  out << "sensor,total,rank\n";
  std::array<std::size_t, kSensorCount> rank{};
  for (std::size_t r = 0; r < kSensorCount; ++r) rank[attribution.ranking[r]] = r + 1;
  for (std::size_t s = 0; s < kSensorCount; ++s)
    out << kSensorNames[s] << "," << csv::format_double(attribution.per_sensor[s]) << ","
        << rank[s] << "\n";
  if (!out) throw Error(ErrorCode::io, "failed writing " + path.string());
}

void export_saliency(const SaliencyMap& map, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
  out << "P5 " << map.width << " " << map.height << " 255\n";
  const auto [mn, mx] = std::minmax_element(map.magnitude.begin(), map.magnitude.end());
  const double lo = *mn;
  const double range = *mx - lo;
  std::vector<unsigned char> bytes(map.magnitude.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    const double v = range > 0.0 ? (map.magnitude[i] - lo) / range * 255.0 : 128.0;
    bytes[i] = static_cast<unsigned char>(std::clamp(std::lround(v), 0L, 255L));
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::io, "failed writing " + path.string());
}

GrayImage read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::data, "cannot read " + path.string());
  std::string magic;
  GrayImage img;
  int maxval = 0;
  in >> magic >> img.width >> img.height >> maxval;
  if (magic != "P5" || maxval != 255 || !in) throw Error(ErrorCode::data, "not an 8-bit P5 PGM: " + path.string());
  in.get();
  img.pixels.resize(img.width * img.height);
  in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
  if (static_cast<std::size_t>(in.gcount()) != img.pixels.size())
    throw Error(ErrorCode::data, "truncated PGM: " + path.string());
  return img;
}

}  // namespace lrisk
