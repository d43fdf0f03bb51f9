#include "binio.hpp"

#include <bit>
#include <cstring>

namespace eviscreen::detail {

void write_bytes(std::ostream& os, const void* data, std::size_t n) {
  os.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
  if (!os) throw IoError("write failed");
}

namespace {

void read_exact(std::istream& is, void* out, std::size_t n, const std::string& context) {
  is.read(static_cast<char*>(out), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(is.gcount()) != n) {
    throw FormatError(context + ": truncated payload");
  }
}

template <typename T>
void write_le(std::ostream& os, T v) {
  unsigned char buf[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
  }
  write_bytes(os, buf, sizeof(T));
}

template <typename T>
T read_le(std::istream& is, const std::string& context) {
  unsigned char buf[sizeof(T)];
  read_exact(is, buf, sizeof(T), context);
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    v |= static_cast<T>(buf[i]) << (8 * i);
  }
  return v;
}

}  // namespace

void write_u8(std::ostream& os, std::uint8_t v) { write_le<std::uint8_t>(os, v); }
void write_u16(std::ostream& os, std::uint16_t v) { write_le<std::uint16_t>(os, v); }
void write_u32(std::ostream& os, std::uint32_t v) { write_le<std::uint32_t>(os, v); }
void write_u64(std::ostream& os, std::uint64_t v) { write_le<std::uint64_t>(os, v); }

void write_f32(std::ostream& os, float v) {
  write_le<std::uint32_t>(os, std::bit_cast<std::uint32_t>(v));
}

void write_f64(std::ostream& os, double v) {
  write_le<std::uint64_t>(os, std::bit_cast<std::uint64_t>(v));
}

void write_f32_array(std::ostream& os, const float* data, std::size_t n) {
  if constexpr (std::endian::native == std::endian::little) {
    write_bytes(os, data, n * sizeof(float));
  } else {
    for (std::size_t i = 0; i < n; ++i) write_f32(os, data[i]);
  }
}

void write_f64_array(std::ostream& os, const double* data, std::size_t n) {
  if constexpr (std::endian::native == std::endian::little) {
    write_bytes(os, data, n * sizeof(double));
  } else {
    for (std::size_t i = 0; i < n; ++i) write_f64(os, data[i]);
  }
}

std::uint8_t read_u8(std::istream& is, const std::string& context) {
  return read_le<std::uint8_t>(is, context);
}
std::uint16_t read_u16(std::istream& is, const std::string& context) {
  return read_le<std::uint16_t>(is, context);
}
std::uint32_t read_u32(std::istream& is, const std::string& context) {
  return read_le<std::uint32_t>(is, context);
}
std::uint64_t read_u64(std::istream& is, const std::string& context) {
  return read_le<std::uint64_t>(is, context);
}

float read_f32(std::istream& is, const std::string& context) {
  return std::bit_cast<float>(read_le<std::uint32_t>(is, context));
}

double read_f64(std::istream& is, const std::string& context) {
  return std::bit_cast<double>(read_le<std::uint64_t>(is, context));
}

void read_f32_array(std::istream& is, float* out, std::size_t n, const std::string& context) {
  if constexpr (std::endian::native == std::endian::little) {
    read_exact(is, out, n * sizeof(float), context);
  } else {
    for (std::size_t i = 0; i < n; ++i) out[i] = read_f32(is, context);
  }
}

void read_f64_array(std::istream& is, double* out, std::size_t n, const std::string& context) {
  if constexpr (std::endian::native == std::endian::little) {
    read_exact(is, out, n * sizeof(double), context);
  } else {
    for (std::size_t i = 0; i < n; ++i) out[i] = read_f64(is, context);
  }
}

void write_magic(std::ostream& os, const char magic[4]) { write_bytes(os, magic, 4); }

void expect_magic(std::istream& is, const char magic[4], const std::string& context) {
  char buf[4];
  read_exact(is, buf, 4, context);
  if (std::memcmp(buf, magic, 4) != 0) {
    throw FormatError(context + ": bad magic, expected \"" + std::string(magic, 4) + "\"");
  }
}

void require_eof(std::istream& is, const std::string& context) {
  char c;
  if (is.read(&c, 1)) {
    throw FormatError(context + ": trailing bytes after payload");
  }
}

}  // namespace eviscreen::detail
