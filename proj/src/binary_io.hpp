#pragma once

// Little-endian primitive IO shared by the dataset cache and checkpoints.

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "gnmr/error.hpp"

namespace gnmr::detail {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

template <typename T>
void write_pod(std::ostream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in, const char* what) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw LoadError(std::string("truncated payload while reading ") + what);
  return value;
}

inline void write_doubles(std::ostream& out, const std::vector<double>& values) {
  out.write(reinterpret_cast<const char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(double)));
}

inline std::vector<double> read_doubles(std::istream& in, std::size_t n, const char* what) {
  std::vector<double> values(n);
  in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(n * sizeof(double)));
  if (!in) throw LoadError(std::string("truncated payload while reading ") + what);
  return values;
}

inline void write_string(std::ostream& out, const std::string& s) {
  write_pod<std::uint64_t>(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& in, const char* what, std::uint64_t limit = 1ULL << 30) {
  const auto n = read_pod<std::uint64_t>(in, what);
  if (n > limit) throw LoadError(std::string("implausible length for ") + what);
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  if (!in) throw LoadError(std::string("truncated payload while reading ") + what);
  return s;
}

inline std::uint64_t fnv1a(const char* data, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (std::size_t i = 0; i < n; ++i) {
    h ^= static_cast<unsigned char>(data[i]);
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace gnmr::detail
