#pragma once

// Little-endian packing for the small binary formats (heatmaps, features).

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>
#include <vector>

#include "occsim/common.hpp"

namespace occsim::detail {

class ByteWriter {
 public:
  void raw(std::string_view s) { out_.insert(out_.end(), s.begin(), s.end()); }
  template <typename T>
  void le(T v) {
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
    static_assert(sizeof(T) == sizeof(U));
    const U u = std::bit_cast<U>(v);
    for (std::size_t k = 0; k < sizeof(U); ++k) out_.push_back(static_cast<std::uint8_t>(u >> (8 * k)));
  }
  std::vector<std::uint8_t>& bytes() { return out_; }

 private:
  std::vector<std::uint8_t> out_;
};

class ByteReader {
 public:
  explicit ByteReader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  void expect(std::string_view magic, const char* what) {
    need(magic.size(), what);
    if (std::memcmp(bytes_.data() + pos_, magic.data(), magic.size()) != 0)
      throw FormatError(std::string("bad magic for ") + what, pos_);
    pos_ += magic.size();
  }
  template <typename T>
  T le(const char* what) {
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
    need(sizeof(U), what);
    U u = 0;
    for (std::size_t k = 0; k < sizeof(U); ++k) u |= static_cast<U>(bytes_[pos_ + k]) << (8 * k);
    pos_ += sizeof(U);
    return std::bit_cast<T>(u);
  }
  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }
  void need(std::size_t n, const char* what) const {
    if (remaining() < n)
      throw FormatError(std::string("truncated ") + what + ": expected " + std::to_string(n) +
                            " bytes, have " + std::to_string(remaining()),
                        pos_);
  }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace occsim::detail
