#include "wvt/binary_io.hpp"

#include <fstream>
#include <iterator>

namespace wvt::io {

void ByteReader::require(std::size_t n) const {
  if (data_.size() - pos_ < n) {
    fail("truncated: expected at least " + std::to_string(pos_ + n) + " bytes, file has " +
         std::to_string(data_.size()));
  }
}

void ByteReader::expect_magic(std::string_view magic) {
  if (data_.size() < magic.size() || std::string_view(data_).substr(0, magic.size()) != magic)
    fail("bad magic, expected '" + std::string(magic) + "'");
  pos_ = magic.size();
}

void ByteReader::expect_end() const {
  if (!at_end())
    fail("trailing bytes: expected length " + std::to_string(pos_) + ", file has " +
         std::to_string(data_.size()));
}

void ByteReader::fail(const std::string& msg) const { throw DataError(what_ + ": " + msg); }

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed: " + path.string());
}

}  // namespace wvt::io
