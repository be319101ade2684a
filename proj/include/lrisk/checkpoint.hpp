#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>

#include "lrisk/model.hpp"
#include "lrisk/signal.hpp"

namespace lrisk {

/// Model checkpoint container, all integers and reals little-endian:
///
///   "LRISK"            5-byte magic
///   u32                format version
///   u64 + bytes        model spec text (Model::spec_text)
///   u32                tensor count: every parameter then every buffer, in layer order
///     u32 rank, u64 dims[rank], f64 values[]
///   u64 + bytes        pipeline configuration text
///   u8 fitted, u8 mode, u32 n, f64 first[n], f64 second[n]    channel scaler
struct Checkpoint {
  Model model;
  std::string pipeline_text;
  ChannelScaler scaler;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

void write_checkpoint(std::ostream& out, const Model& model, std::string_view pipeline_text,
                      const ChannelScaler& scaler);
Checkpoint read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, const Model& model,
                     std::string_view pipeline_text, const ChannelScaler& scaler);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace lrisk
