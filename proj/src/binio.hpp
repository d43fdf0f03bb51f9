#pragma once

// Little-endian binary stream primitives shared by the EVFM/EVKB/EVRP
// readers and writers. All multi-byte values are encoded explicitly byte
// by byte so the formats are portable across host endianness.

#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "eviscreen/error.hpp"

namespace eviscreen::detail {

void write_bytes(std::ostream& os, const void* data, std::size_t n);
void write_u8(std::ostream& os, std::uint8_t v);
void write_u16(std::ostream& os, std::uint16_t v);
void write_u32(std::ostream& os, std::uint32_t v);
void write_u64(std::ostream& os, std::uint64_t v);
void write_f32(std::ostream& os, float v);
void write_f64(std::ostream& os, double v);
void write_f32_array(std::ostream& os, const float* data, std::size_t n);
void write_f64_array(std::ostream& os, const double* data, std::size_t n);

// Readers throw FormatError with `context` in the message on truncation.
std::uint8_t read_u8(std::istream& is, const std::string& context);
std::uint16_t read_u16(std::istream& is, const std::string& context);
std::uint32_t read_u32(std::istream& is, const std::string& context);
std::uint64_t read_u64(std::istream& is, const std::string& context);
float read_f32(std::istream& is, const std::string& context);
double read_f64(std::istream& is, const std::string& context);
void read_f32_array(std::istream& is, float* out, std::size_t n, const std::string& context);
void read_f64_array(std::istream& is, double* out, std::size_t n, const std::string& context);

void write_magic(std::ostream& os, const char magic[4]);
void expect_magic(std::istream& is, const char magic[4], const std::string& context);

void require_eof(std::istream& is, const std::string& context);

}  // namespace eviscreen::detail
