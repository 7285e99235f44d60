#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace midsg {

// 8-bit image, interleaved channels, row-major.
struct Image8 {
  int width = 0;
  int height = 0;
  int channels = 1;  // 1 (gray) or 3 (RGB)
  std::vector<std::uint8_t> pixels;
};

// Throws IoError naming the path on any failure.
void write_png(const std::filesystem::path& path, const Image8& image);
Image8 read_png(const std::filesystem::path& path);

// Planar [C,H,W] values in [-1,1] <-> 8-bit interleaved. 0 -> -1, 255 -> +1.
std::vector<double> to_planar_unit(const Image8& image);
Image8 from_planar_unit(const double* planar, int channels, int height, int width);

}  // namespace midsg
