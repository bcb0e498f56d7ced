#pragma once

#include "hemo/error.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

namespace hemo::detail {

template <class T>
T to_little(T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  if constexpr (std::endian::native == std::endian::big) {
    std::array<char, sizeof(T)> b;
    std::memcpy(b.data(), &v, sizeof(T));
    std::reverse(b.begin(), b.end());
    std::memcpy(&v, b.data(), sizeof(T));
  }
  return v;
}

class BinaryWriter {
 public:
  explicit BinaryWriter(const std::filesystem::path& path)
      : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw Error(ErrorKind::MalformedFile, "cannot open for writing: " + path.string());
  }

  void magic(std::string_view m) { out_.write(m.data(), static_cast<std::streamsize>(m.size())); }

  template <class T>
  void put(T v) {
    v = to_little(v);
    out_.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }

  template <class T>
  void put_array(const T* data, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) put(data[i]);
  }

  void close() {
    out_.flush();
    if (!out_) throw Error(ErrorKind::MalformedFile, "write failed: " + path_.string());
    out_.close();
  }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

class BinaryReader {
 public:
  explicit BinaryReader(const std::filesystem::path& path) : path_(path), in_(path, std::ios::binary) {
    if (!in_) throw Error(ErrorKind::MalformedFile, "cannot open: " + path.string());
  }

  // Returns false when the magic does not match; throws when the file is too short.
  bool magic(std::string_view expected) {
    std::string got(expected.size(), '\0');
    in_.read(got.data(), static_cast<std::streamsize>(got.size()));
    if (!in_) throw Error(ErrorKind::MalformedFile, "truncated header in " + path_.string());
    return got == expected;
  }

  template <class T>
  T get() {
    T v{};
    in_.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in_) throw Error(ErrorKind::MalformedFile, "truncated file " + path_.string());
    return to_little(v);
  }

  template <class T>
  void get_array(T* data, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) data[i] = get<T>();
  }

  // Guards against absurd sizes in corrupt headers before allocating.
  void require_remaining(std::uint64_t bytes) {
    const auto pos = in_.tellg();
    in_.seekg(0, std::ios::end);
    const auto end = in_.tellg();
    in_.seekg(pos);
    if (pos < 0 || end < pos || static_cast<std::uint64_t>(end - pos) < bytes)
      throw Error(ErrorKind::MalformedFile, "truncated file " + path_.string());
  }

  void expect_end() {
    in_.peek();
    if (!in_.eof()) throw Error(ErrorKind::MalformedFile, "trailing bytes in " + path_.string());
  }

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::ifstream in_;
};

}  // namespace hemo::detail
