#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace chunkstitch {

enum class DType : std::uint32_t { Float32 = 1, Float64 = 2, UInt8 = 3 };

std::size_t dtype_size(DType t);

/// N-dimensional array in the on-disk layout: row-major, payload kept as
/// little-endian bytes so a decode/encode cycle reproduces the file exactly.
///
///   bytes 0-7   "CSTENSR\0"
///   u32         version (1)
///   u32         rank (<= 8)
///   u64 x rank  dims
///   u32         dtype code
///   payload     product(dims) * dtype_size bytes
struct Tensor {
  DType dtype = DType::Float64;
  std::vector<std::uint64_t> dims;
  std::vector<std::uint8_t> payload;

  std::size_t element_count() const;
  /// Values widened to double, row-major.
  std::vector<double> to_doubles() const;
  /// Values narrowed to dtype (float32 rounding, uint8 clamp-free cast).
  static Tensor from_doubles(DType dtype, std::vector<std::uint64_t> dims, const std::vector<double>& values);
};

inline constexpr std::uint32_t kTensorVersion = 1;
inline constexpr std::uint32_t kMaxTensorRank = 8;

std::vector<std::uint8_t> encode_tensor(const Tensor& t);
/// `source` names the file in error messages. Throws BadMagic,
/// TruncatedPayload, DimOverflow or ParseError.
Tensor decode_tensor(const std::vector<std::uint8_t>& bytes, const std::string& source);

void write_tensor(const std::string& path, const Tensor& t);
/// Also throws MissingFile.
Tensor read_tensor(const std::string& path);

}  // namespace chunkstitch
