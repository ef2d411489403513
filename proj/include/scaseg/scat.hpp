#pragma once

#include <filesystem>
#include <iosfwd>
#include <stdexcept>

#include "scaseg/tensor.hpp"

// "SCAT v1" tensor files:
//   bytes 0-3  magic "SCAT"
//   byte  4    version (1)
//   byte  5    ndim (u8)
//   then ndim little-endian u32 extents, then the row-major payload as
//   little-endian float32 (values narrowed from float64).
namespace scaseg::io {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void write_scat(std::ostream& os, const Tensor& t);
void write_scat(const std::filesystem::path& path, const Tensor& t);
Tensor read_scat(std::istream& is);
Tensor read_scat(const std::filesystem::path& path);

}  // namespace scaseg::io
