#include "facecycle/png_io.hpp"

#include <cstring>

#include <png.h>

#include "facecycle/errors.hpp"

namespace facecycle {

namespace fs = std::filesystem;

Pixels make_pixels(int height, int width, int channels, std::uint8_t fill) {
  Pixels p;
  p.height = height;
  p.width = width;
  p.channels = channels;
  p.data.assign(static_cast<std::size_t>(height) * width * channels, fill);
  return p;
}

Pixels read_png(const fs::path& path, int channels) {
  if (channels != 1 && channels != 3) throw Error(Errc::IoError, "unsupported channel count");
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str()))
    throw Error(Errc::IoError, "cannot read " + path.string() + ": " + image.message);
  image.format = channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  Pixels out = make_pixels(static_cast<int>(image.height), static_cast<int>(image.width), channels);
  if (!png_image_finish_read(&image, nullptr, out.data.data(), 0, nullptr)) {
    png_image_free(&image);
    throw Error(Errc::IoError, "cannot decode " + path.string() + ": " + image.message);
  }
  return out;
}

void write_png(const fs::path& path, const Pixels& pixels) {
  if (pixels.channels != 1 && pixels.channels != 3) throw Error(Errc::IoError, "unsupported channel count");
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(pixels.width);
  image.height = static_cast<png_uint_32>(pixels.height);
  image.format = pixels.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&image, path.c_str(), 0, pixels.data.data(), 0, nullptr))
    throw Error(Errc::IoError, "cannot write " + path.string() + ": " + image.message);
}

}  // namespace facecycle
