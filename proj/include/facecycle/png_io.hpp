#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace facecycle {

/// Interleaved 8-bit pixels, row-major, H x W x C.
struct Pixels {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<std::uint8_t> data;

  std::uint8_t& at(int row, int col, int ch) { return data[(static_cast<std::size_t>(row) * width + col) * channels + ch]; }
  std::uint8_t at(int row, int col, int ch) const {
    return data[(static_cast<std::size_t>(row) * width + col) * channels + ch];
  }
};

Pixels make_pixels(int height, int width, int channels, std::uint8_t fill = 0);

/// Reads any PNG as 8-bit RGB (channels == 3) or grayscale (channels == 1).
Pixels read_png(const std::filesystem::path& path, int channels = 3);
void write_png(const std::filesystem::path& path, const Pixels& pixels);

}  // namespace facecycle
