#include "fcdm/tensor_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <json.hpp>

#include "fcdm/error.hpp"

namespace fcdm::io {
namespace {

constexpr std::size_t kMagicLen = sizeof(kMagic) - 1;

template <typename T>
void append_le(std::vector<std::uint8_t>& out, T value) {
  std::uint8_t bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(std::begin(bytes), std::end(bytes));
  out.insert(out.end(), std::begin(bytes), std::end(bytes));
}

template <typename T>
T read_le(const std::uint8_t* p) {
  std::uint8_t bytes[sizeof(T)];
  std::memcpy(bytes, p, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(std::begin(bytes), std::end(bytes));
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

}  // namespace

std::vector<std::uint8_t> encode_tensor(const Tensor& t) {
  nlohmann::ordered_json header;
  header["dtype"] = to_string(t.dtype());
  header["shape"] = t.shape();
  header["order"] = "row-major";
  const std::string text = header.dump();

  std::vector<std::uint8_t> out(kMagic, kMagic + kMagicLen);
  append_le<std::uint32_t>(out, static_cast<std::uint32_t>(text.size()));
  out.insert(out.end(), text.begin(), text.end());
  out.reserve(out.size() + t.numel() * (t.dtype() == DType::f32 ? 4 : 8));
  for (double v : t.data()) {
    if (t.dtype() == DType::f32) {
      append_le<float>(out, static_cast<float>(v));
    } else {
      append_le<double>(out, v);
    }
  }
  return out;
}

Tensor decode_tensor(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < kMagicLen + 4 || std::memcmp(bytes.data(), kMagic, kMagicLen) != 0) {
    throw IoError("tensor file: bad magic");
  }
  const auto header_len = read_le<std::uint32_t>(bytes.data() + kMagicLen);
  const std::size_t payload_at = kMagicLen + 4 + header_len;
  if (bytes.size() < payload_at) throw IoError("tensor file: truncated header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.begin() + kMagicLen + 4, bytes.begin() + static_cast<long>(payload_at));
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("tensor file: header is not JSON: ") + e.what());
  }
  if (!header.is_object() || !header.contains("dtype") || !header.contains("shape")) {
    throw IoError("tensor file: header lacks dtype/shape");
  }
  if (header.value("order", "row-major") != "row-major") throw IoError("tensor file: unsupported order");
  const std::string dtype_name = header["dtype"].get<std::string>();
  if (dtype_name != "f32" && dtype_name != "f64") throw IoError("tensor file: unknown dtype " + dtype_name);
  const DType dtype = dtype_name == "f32" ? DType::f32 : DType::f64;
  const Shape shape = header["shape"].get<Shape>();
  const std::size_t n = shape_numel(shape);
  const std::size_t width = dtype == DType::f32 ? 4 : 8;
  if (bytes.size() != payload_at + n * width) throw IoError("tensor file: payload size does not match shape");

  std::vector<double> data(n);
  const std::uint8_t* p = bytes.data() + payload_at;
  for (std::size_t i = 0; i < n; ++i) {
    data[i] = dtype == DType::f32 ? static_cast<double>(read_le<float>(p + 4 * i)) : read_le<double>(p + 8 * i);
  }
  try {
    return Tensor::from(shape, std::move(data), dtype);
  } catch (const ContractViolation& e) {
    throw IoError(std::string("tensor file: ") + e.what());
  }
}

void write_tensor(const std::filesystem::path& path, const Tensor& t) {
  const auto bytes = encode_tensor(t);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw IoError("failed writing " + path.string());
}

Tensor read_tensor(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  try {
    return decode_tensor(bytes);
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

void write_pgm(const std::filesystem::path& path, const Tensor& image2d) {
  std::size_t rows = 0, cols = 0;
  if (image2d.rank() == 2) {
    rows = image2d.dim(0);
    cols = image2d.dim(1);
  } else if (image2d.rank() == 3 && image2d.dim(0) == 1) {
    rows = image2d.dim(1);
    cols = image2d.dim(2);
  } else {
    throw ContractViolation("write_pgm: expected a single plane, got " + shape_string(image2d.shape()));
  }
  const auto data = image2d.data();
  const auto [lo_it, hi_it] = std::minmax_element(data.begin(), data.end());
  const double lo = *lo_it, hi = *hi_it;
  const double span = hi > lo ? hi - lo : 1.0;

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << "P5\n" << cols << ' ' << rows << "\n255\n";
  for (double v : data) {
    const double u = std::clamp((v - lo) / span, 0.0, 1.0);
    os.put(static_cast<char>(static_cast<std::uint8_t>(std::lround(u * 255.0))));
  }
  if (!os) throw IoError("failed writing " + path.string());

  nlohmann::ordered_json side;
  side["min"] = lo;
  side["max"] = hi;
  write_text(path.string() + ".json", side.dump(2) + "\n");
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << text;
  if (!os) throw IoError("failed writing " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

}  // namespace fcdm::io
