#pragma once

// Little-endian binary readers/writers and file checksums.

#include <zlib.h>

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "stylesplat/core/errors.hpp"

namespace stylesplat {

static_assert(std::endian::native == std::endian::little,
              "file formats are defined little-endian; big-endian hosts are unsupported");

inline void write_bytes(std::ostream& os, const void* p, size_t n) {
  os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

inline void read_bytes(std::istream& is, void* p, size_t n) {
  is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (static_cast<size_t>(is.gcount()) != n) throw DataError("unexpected end of file");
}

template <typename T>
void write_pod(std::ostream& os, const T& v) {
  write_bytes(os, &v, sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
  T v;
  read_bytes(is, &v, sizeof(T));
  return v;
}

inline void write_f32s(std::ostream& os, const float* p, size_t n) {
  write_bytes(os, p, n * sizeof(float));
}

inline void read_f32s(std::istream& is, float* p, size_t n) {
  read_bytes(is, p, n * sizeof(float));
}

inline void write_string(std::ostream& os, const std::string& s) {
  write_pod<uint64_t>(os, s.size());
  write_bytes(os, s.data(), s.size());
}

inline std::string read_string(std::istream& is) {
  uint64_t n = read_pod<uint64_t>(is);
  std::string s(n, '\0');
  read_bytes(is, s.data(), n);
  return s;
}

inline std::vector<uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open file: " + path.string());
  f.seekg(0, std::ios::end);
  auto size = f.tellg();
  f.seekg(0);
  std::vector<uint8_t> buf(static_cast<size_t>(size));
  if (size > 0) read_bytes(f, buf.data(), buf.size());
  return buf;
}

inline void write_file_bytes(const std::filesystem::path& path, const void* p, size_t n) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot write file: " + path.string());
  write_bytes(f, p, n);
  if (!f) throw DataError("write failed: " + path.string());
}

inline uint32_t crc32_of(const void* p, size_t n) {
  return static_cast<uint32_t>(
      ::crc32(0L, static_cast<const Bytef*>(p), static_cast<uInt>(n)));
}

inline uint32_t crc32_of_file(const std::filesystem::path& path) {
  auto bytes = read_file_bytes(path);
  return crc32_of(bytes.data(), bytes.size());
}

}  // namespace stylesplat
