#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace unireid {

// 8-bit RGB, row-major HWC.
struct RgbImage {
  int64_t height = 0;
  int64_t width = 0;
  std::vector<uint8_t> pixels;
};

void write_png(const std::filesystem::path& path, const RgbImage& image);
RgbImage read_png(const std::filesystem::path& path);

}  // namespace unireid
