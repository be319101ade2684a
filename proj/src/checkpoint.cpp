#include "lrisk/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "lrisk/error.hpp"

namespace lrisk {

namespace {

constexpr char kMagic[5] = {'L', 'R', 'I', 'S', 'K'};

template <class UInt>
void put_uint(std::ostream& out, UInt v) {
  char bytes[sizeof(UInt)];
  for (std::size_t i = 0; i < sizeof(UInt); ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(bytes, sizeof(UInt));
}

void put_double(std::ostream& out, double v) { put_uint(out, std::bit_cast<std::uint64_t>(v)); }

void put_string(std::ostream& out, std::string_view s) {
  put_uint<std::uint64_t>(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void put_tensor(std::ostream& out, const Tensor& t) {
  put_uint<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
  for (std::size_t d : t.shape()) put_uint<std::uint64_t>(out, d);
  for (double v : t.values()) put_double(out, v);
}

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  template <class UInt>
  UInt uint() {
    unsigned char bytes[sizeof(UInt)];
    read(bytes, sizeof(UInt));
    UInt v = 0;
    for (std::size_t i = 0; i < sizeof(UInt); ++i) v |= static_cast<UInt>(bytes[i]) << (8 * i);
    return v;
  }

  double real() { return std::bit_cast<double>(uint<std::uint64_t>()); }

  std::string string() {
    const auto n = uint<std::uint64_t>();
    if (n > (1ULL << 30)) corrupt("string length");
    std::string s(n, '\0');
    read(s.data(), n);
    return s;
  }

  Tensor tensor() {
    const auto rank = uint<std::uint32_t>();
    if (rank > 8) corrupt("tensor rank");
    Shape shape(rank);
    for (auto& d : shape) d = uint<std::uint64_t>();
    const std::size_t n = shape_size(shape);
    if (n > (1ULL << 32)) corrupt("tensor size");
    std::vector<double> data(n);
    for (double& v : data) v = real();
    return Tensor(std::move(shape), std::move(data));
  }

  void read(void* dst, std::size_t n) {
    in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) corrupt("unexpected end of file");
  }

  [[noreturn]] static void corrupt(const std::string& what) {
    throw Error(ErrorCode::data, "corrupt checkpoint: " + what);
  }

 private:
  std::istream& in_;
};

}  // namespace

void write_checkpoint(std::ostream& out, const Model& model, std::string_view pipeline_text,
                      const ChannelScaler& scaler) {
  out.write(kMagic, sizeof(kMagic));
  put_uint<std::uint32_t>(out, kCheckpointVersion);
  put_string(out, model.spec_text());

  std::uint32_t count = 0;
  for (const auto& layer : model.params()) count += static_cast<std::uint32_t>(layer.size());
  for (const auto& layer : model.buffers()) count += static_cast<std::uint32_t>(layer.size());
  put_uint(out, count);
  for (const auto& layer : model.params())
    for (const auto& t : layer) put_tensor(out, t);
  for (const auto& layer : model.buffers())
    for (const auto& t : layer) put_tensor(out, t);

  put_string(out, pipeline_text);
  out.put(scaler.fitted() ? 1 : 0);
  out.put(scaler.mode() == ScalerMode::standardize ? 0 : 1);
  put_uint<std::uint32_t>(out, static_cast<std::uint32_t>(scaler.first().size()));
  for (double v : scaler.first()) put_double(out, v);
  for (double v : scaler.second()) put_double(out, v);
}

Checkpoint read_checkpoint(std::istream& in) {
  Reader r(in);
  char magic[5];
  r.read(magic, sizeof(magic));
  if (std::memcmp(magic, kMagic, sizeof(magic)) != 0) Reader::corrupt("bad magic");
  const auto version = r.uint<std::uint32_t>();
  if (version != kCheckpointVersion)
    Reader::corrupt("unsupported format version " + std::to_string(version));

  auto [shape, layers] = parse_spec_text(r.string());
  Checkpoint ck{Model(std::move(shape), std::move(layers), 0), {}, {}};

  const auto count = r.uint<std::uint32_t>();
  std::uint32_t expected = 0;
  for (const auto& layer : ck.model.params()) expected += static_cast<std::uint32_t>(layer.size());
  for (const auto& layer : ck.model.buffers()) expected += static_cast<std::uint32_t>(layer.size());
  if (count != expected) Reader::corrupt("tensor count does not match the model spec");
  auto load_into = [&r](std::vector<std::vector<Tensor>>& groups) {
    for (auto& layer : groups)
      for (auto& t : layer) {
        Tensor loaded = r.tensor();
        if (loaded.shape() != t.shape())
          Reader::corrupt("tensor shape " + shape_string(loaded.shape()) + " does not match " +
                          shape_string(t.shape()));
        t = std::move(loaded);
      }
  };
  load_into(ck.model.params());
  load_into(ck.model.buffers());

  ck.pipeline_text = r.string();
  unsigned char flags[2];
  r.read(flags, 2);
  const auto n = r.uint<std::uint32_t>();
  std::vector<double> first(n), second(n);
  for (double& v : first) v = r.real();
  for (double& v : second) v = r.real();
  if (flags[0] != 0)
    ck.scaler = ChannelScaler::from_params(
        flags[1] == 0 ? ScalerMode::standardize : ScalerMode::minmax_unit, std::move(first),
        std::move(second));
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const Model& model,
                     std::string_view pipeline_text, const ChannelScaler& scaler) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io, "cannot write checkpoint " + path.string());
  write_checkpoint(out, model, pipeline_text, scaler);
  if (!out) throw Error(ErrorCode::io, "failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::data, "cannot read checkpoint " + path.string());
  return read_checkpoint(in);
}

}  // namespace lrisk
