#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

namespace egoloc::io {

/// FNV-1a 64-bit hash.
constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
inline std::uint64_t fnv1a64(const void* data, std::size_t n, std::uint64_t h = kFnvOffset) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}
inline std::uint64_t fnv1a64(std::string_view s, std::uint64_t h = kFnvOffset) {
  return fnv1a64(s.data(), s.size(), h);
}
std::string hex64(std::uint64_t v);

/// Little-endian append/read helpers. The build targets little-endian hosts
/// only, which is checked at compile time in io.cpp.
template <typename T>
void put(std::vector<char>& buf, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  const auto* p = reinterpret_cast<const char*>(&v);
  buf.insert(buf.end(), p, p + sizeof(T));
}

class Reader {
 public:
  Reader(const std::vector<char>& buf, std::string what) : buf_(buf), what_(std::move(what)) {}
  template <typename T>
  T get() {
    static_assert(std::is_trivially_copyable_v<T>);
    need(sizeof(T));
    T v;
    std::memcpy(&v, buf_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s(buf_.data() + pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return buf_.size() - pos_; }
  void need(std::size_t n) const;

 private:
  const std::vector<char>& buf_;
  std::string what_;
  std::size_t pos_ = 0;
};

/// Reads a whole file; throws IoError if it cannot be opened.
std::vector<char> read_file(const std::filesystem::path& path);
std::string read_text(const std::filesystem::path& path);
/// Writes via a temporary sibling and rename; throws IoError on failure.
void write_file(const std::filesystem::path& path, const std::vector<char>& bytes);
void write_text(const std::filesystem::path& path, std::string_view text);

/// Shortest round-trip decimal form of a double ("%.17g").
std::string fmt_double(double v);

}  // namespace egoloc::io
