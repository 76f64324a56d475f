#include "egoloc/io.hpp"

#include <bit>
#include <cstdio>
#include <fstream>
#include <iterator>

#include "egoloc/error.hpp"

namespace egoloc::io {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void Reader::need(std::size_t n) const {
  if (buf_.size() - pos_ < n) {
    throw DataError(what_ + ": truncated (need " + std::to_string(n) + " more bytes at offset " +
                    std::to_string(pos_) + ")");
  }
}

std::vector<char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string read_text(const std::filesystem::path& path) {
  auto b = read_file(path);
  return {b.begin(), b.end()};
}

void write_file(const std::filesystem::path& path, const std::vector<char>& bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for '" + path.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move '" + tmp.string() + "' into place: " + ec.message());
}

void write_text(const std::filesystem::path& path, std::string_view text) {
  write_file(path, std::vector<char>(text.begin(), text.end()));
}

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace egoloc::io
