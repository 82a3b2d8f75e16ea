#include "udi/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <fstream>

namespace udi {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format is little-endian; big-endian hosts need byte swaps");

namespace {
constexpr char kMagic[8] = {'U', 'D', 'I', 'P', 'S', '1', '\n', '\0'};

template <typename T>
void write_pod(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw ParseError("checkpoint truncated");
  return v;
}
}  // namespace

void save_checkpoint(const ParamSet& params, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw ParseError("cannot open checkpoint for writing: " + path);
  os.write(kMagic, sizeof(kMagic));
  write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(params.size()));
  for (const auto& e : params.entries()) {
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(e.key.size()));
    os.write(e.key.data(), static_cast<std::streamsize>(e.key.size()));
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(e.value.shape().size()));
    for (int d : e.value.shape()) write_pod<std::uint64_t>(os, static_cast<std::uint64_t>(d));
    os.write(reinterpret_cast<const char*>(e.value.data().data()),
             static_cast<std::streamsize>(e.value.size() * sizeof(double)));
  }
  if (!os) throw ParseError("checkpoint write failed: " + path);
}

ParamSet load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ParseError("cannot open checkpoint: " + path);
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::string(magic, 8) != std::string(kMagic, 8))
    throw ParseError("not a checkpoint file: " + path);
  const auto count = read_pod<std::uint32_t>(is);
  ParamSet out;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto klen = read_pod<std::uint32_t>(is);
    std::string key(klen, '\0');
    is.read(key.data(), klen);
    const auto ndim = read_pod<std::uint32_t>(is);
    std::vector<int> shape(ndim);
    for (auto& d : shape) d = static_cast<int>(read_pod<std::uint64_t>(is));
    std::vector<double> data(shape_size(shape));
    is.read(reinterpret_cast<char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(double)));
    if (!is) throw ParseError("checkpoint truncated: " + path);
    out.add(key, Tensor::param(std::move(shape), std::move(data)));
  }
  return out;
}

}  // namespace udi
