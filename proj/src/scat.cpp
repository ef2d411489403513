#include "scaseg/scat.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <fstream>
#include <limits>

namespace scaseg::io {

namespace {

constexpr std::array<char, 4> kMagic{'S', 'C', 'A', 'T'};
constexpr std::uint8_t kVersion = 1;

void put_u32(std::ostream& os, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF),
                     static_cast<char>((v >> 16) & 0xFF), static_cast<char>((v >> 24) & 0xFF)};
  os.write(b, 4);
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw FormatError("SCAT: truncated file");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void write_scat(std::ostream& os, const Tensor& t) {
  if (t.rank() > std::numeric_limits<std::uint8_t>::max()) {
    throw FormatError("SCAT: rank " + std::to_string(t.rank()) + " exceeds 255");
  }
  os.write(kMagic.data(), kMagic.size());
  os.put(static_cast<char>(kVersion));
  os.put(static_cast<char>(t.rank()));
  for (auto e : t.shape()) {
    if (e > std::numeric_limits<std::uint32_t>::max()) {
      throw FormatError("SCAT: extent too large in " + to_string(t.shape()));
    }
    put_u32(os, static_cast<std::uint32_t>(e));
  }
  for (double v : t.data()) put_u32(os, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  if (!os) throw FormatError("SCAT: write failed");
}

void write_scat(const std::filesystem::path& path, const Tensor& t) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_scat(out, t);
}

Tensor read_scat(std::istream& is) {
  std::array<char, 4> magic{};
  if (!is.read(magic.data(), magic.size()) || magic != kMagic) {
    throw FormatError("SCAT: bad magic");
  }
  const int version = is.get();
  if (version != kVersion) throw FormatError("SCAT: unsupported version " + std::to_string(version));
  const int ndim = is.get();
  if (ndim <= 0) throw FormatError("SCAT: missing or zero rank");
  Shape shape(static_cast<std::size_t>(ndim));
  for (auto& e : shape) {
    e = get_u32(is);
    if (e == 0) throw FormatError("SCAT: zero extent");
  }
  Tensor t(shape, 0.0);
  for (double& v : t.data()) v = static_cast<double>(std::bit_cast<float>(get_u32(is)));
  return t;
}

Tensor read_scat(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read_scat(in);
}

}  // namespace scaseg::io
