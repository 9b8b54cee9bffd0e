#pragma once

// Byte-level NIfTI-1 writer for tests, independent of the library reader.

#include <array>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace fixture {

struct Header {
  std::vector<unsigned char> bytes = std::vector<unsigned char>(352, 0);
  template <typename T>
  void put(std::size_t off, T v) {
    std::memcpy(bytes.data() + off, &v, sizeof v);
  }
};

// 348-byte header, 4 pad bytes, voxel data at offset 352.
inline Header make_header(std::int16_t datatype, std::int16_t bitpix, std::array<std::int16_t, 3> dims,
                          std::array<float, 3> pixdim, float slope = 0.0f, float inter = 0.0f) {
  Header h;
  h.put<std::int32_t>(0, 348);
  h.put<std::int16_t>(40, 3);
  for (int i = 0; i < 3; ++i) h.put<std::int16_t>(42 + 2 * i, dims[i]);
  h.put<std::int16_t>(48, 1);
  h.put<std::int16_t>(70, datatype);
  h.put<std::int16_t>(72, bitpix);
  h.put<float>(76, 1.0f);
  for (int i = 0; i < 3; ++i) h.put<float>(80 + 4 * i, pixdim[i]);
  h.put<float>(108, 352.0f);
  h.put<float>(112, slope);
  h.put<float>(116, inter);
  std::memcpy(h.bytes.data() + 344, "n+1\0", 4);
  return h;
}

inline std::filesystem::path temp_path(const std::string& dir, const std::string& name) {
  const auto d = std::filesystem::temp_directory_path() / dir;
  std::filesystem::create_directories(d);
  return d / name;
}

template <typename T>
void write(const std::filesystem::path& p, const Header& h, const std::vector<T>& data) {
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(h.bytes.data()), static_cast<std::streamsize>(h.bytes.size()));
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(T)));
}

}  // namespace fixture
