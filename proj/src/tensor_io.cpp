#include "chunkstitch/tensor_io.hpp"

#include <cstring>
#include <limits>

#include "binary.hpp"
#include "chunkstitch/error.hpp"

namespace chunkstitch {

namespace {

constexpr char kMagic[8] = {'C', 'S', 'T', 'E', 'N', 'S', 'R', '\0'};

// Product of dims, or throws DimOverflow when it (times the element size)
// does not fit in size_t.
std::size_t checked_count(const std::vector<std::uint64_t>& dims, std::size_t elem, const std::string& source) {
  std::uint64_t n = 1;
  for (const auto d : dims) {
    if (d != 0 && n > std::numeric_limits<std::uint64_t>::max() / d) {
      throw Error(ErrorCode::DimOverflow, "element count overflows in '" + source + "'");
    }
    n *= d;
  }
  if (n > std::numeric_limits<std::size_t>::max() / elem) {
    throw Error(ErrorCode::DimOverflow, "payload size overflows in '" + source + "'");
  }
  return static_cast<std::size_t>(n);
}

}  // namespace

std::size_t dtype_size(DType t) {
  switch (t) {
    case DType::Float32:
      return 4;
    case DType::Float64:
      return 8;
    case DType::UInt8:
      return 1;
  }
  throw Error(ErrorCode::ParseError, "unknown dtype");
}

std::size_t Tensor::element_count() const { return checked_count(dims, dtype_size(dtype), "tensor"); }

std::vector<double> Tensor::to_doubles() const {
  const std::size_t n = element_count();
  if (payload.size() != n * dtype_size(dtype)) throw Error(ErrorCode::TruncatedPayload, "tensor payload size mismatch");
  std::vector<double> out(n);
  const std::uint8_t* p = payload.data();
  for (std::size_t i = 0; i < n; ++i) {
    switch (dtype) {
      case DType::Float32:
        out[i] = detail::get_le<float>(p + 4 * i);
        break;
      case DType::Float64:
        out[i] = detail::get_le<double>(p + 8 * i);
        break;
      case DType::UInt8:
        out[i] = p[i];
        break;
    }
  }
  return out;
}

Tensor Tensor::from_doubles(DType dtype, std::vector<std::uint64_t> dims, const std::vector<double>& values) {
  Tensor t;
  t.dtype = dtype;
  t.dims = std::move(dims);
  if (t.dims.size() > kMaxTensorRank) throw Error(ErrorCode::DimOverflow, "rank exceeds 8");
  if (t.element_count() != values.size()) {
    throw Error(ErrorCode::ShapeMismatch, "value count does not match tensor dims");
  }
  t.payload.reserve(values.size() * dtype_size(dtype));
  for (const double v : values) {
    switch (dtype) {
      case DType::Float32:
        detail::put_le(t.payload, static_cast<float>(v));
        break;
      case DType::Float64:
        detail::put_le(t.payload, v);
        break;
      case DType::UInt8:
        t.payload.push_back(static_cast<std::uint8_t>(v));
        break;
    }
  }
  return t;
}

std::vector<std::uint8_t> encode_tensor(const Tensor& t) {
  if (t.dims.size() > kMaxTensorRank) throw Error(ErrorCode::DimOverflow, "rank exceeds 8");
  if (t.payload.size() != t.element_count() * dtype_size(t.dtype)) {
    throw Error(ErrorCode::TruncatedPayload, "tensor payload size does not match its dims");
  }
  std::vector<std::uint8_t> out(kMagic, kMagic + 8);
  detail::put_le<std::uint32_t>(out, kTensorVersion);
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.dims.size()));
  for (const auto d : t.dims) detail::put_le<std::uint64_t>(out, d);
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.dtype));
  out.insert(out.end(), t.payload.begin(), t.payload.end());
  return out;
}

Tensor decode_tensor(const std::vector<std::uint8_t>& bytes, const std::string& source) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kMagic, 8) != 0) {
    throw Error(ErrorCode::BadMagic, "'" + source + "' is not a tensor file");
  }
  std::size_t pos = 8;
  auto need = [&](std::size_t n, const char* what) {
    if (bytes.size() - pos < n) {
      throw Error(ErrorCode::TruncatedPayload, "'" + source + "' ends inside the " + std::string(what));
    }
  };
  need(8, "header");
  const auto version = detail::get_le<std::uint32_t>(bytes.data() + pos);
  const auto rank = detail::get_le<std::uint32_t>(bytes.data() + pos + 4);
  pos += 8;
  if (version != kTensorVersion) {
    throw Error(ErrorCode::BadMagic, "'" + source + "' has unsupported version " + std::to_string(version));
  }
  if (rank > kMaxTensorRank) {
    throw Error(ErrorCode::DimOverflow, "'" + source + "' declares rank " + std::to_string(rank) + " (max 8)");
  }
  Tensor t;
  need(8 * static_cast<std::size_t>(rank) + 4, "header");
  for (std::uint32_t i = 0; i < rank; ++i, pos += 8) t.dims.push_back(detail::get_le<std::uint64_t>(bytes.data() + pos));
  const auto code = detail::get_le<std::uint32_t>(bytes.data() + pos);
  pos += 4;
  if (code < 1 || code > 3) {
    throw Error(ErrorCode::ParseError, "'" + source + "' has unknown dtype code " + std::to_string(code));
  }
  t.dtype = static_cast<DType>(code);
  const std::size_t n = checked_count(t.dims, dtype_size(t.dtype), source);
  const std::size_t size = n * dtype_size(t.dtype);
  need(size, "payload");
  if (bytes.size() - pos != size) {
    throw Error(ErrorCode::ParseError, "'" + source + "' has " + std::to_string(bytes.size() - pos - size) +
                                           " trailing bytes after the payload");
  }
  t.payload.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos), bytes.end());
  return t;
}

void write_tensor(const std::string& path, const Tensor& t) { detail::write_file_bytes(path, encode_tensor(t)); }

Tensor read_tensor(const std::string& path) { return decode_tensor(detail::read_file_bytes(path), path); }

}  // namespace chunkstitch
