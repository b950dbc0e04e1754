#pragma once

// 8-bit RGB PNG import/export through libpng's simplified API.

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "disguise/errors.hpp"
#include "disguise/tensor.hpp"

namespace disguise::io {

/// Byte b maps to b / 255.
inline Image load_png(const std::filesystem::path& path) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str()))
    throw FormatError("png: " + std::string(img.message) + " in " + path.string(), 0);
  img.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr)) {
    png_image_free(&img);
    throw FormatError("png: " + std::string(img.message) + " in " + path.string(), 0);
  }
  const int h = static_cast<int>(img.height), w = static_cast<int>(img.width);
  Image out(Shape{h, w, 3});
  for (std::size_t i = 0; i < buf.size(); ++i) out[i] = static_cast<float>(buf[i]) / 255.0f;
  return out;
}

/// Values are clamped to [0,1] and rounded to the nearest of 256 levels.
inline void save_png(const std::filesystem::path& path, const Image& image) {
  if (image.shape().rank() != 3 || image.channels() != 3)
    throw ShapeError("png: expected H x W x 3 image, got " + image.shape().str());
  std::vector<std::uint8_t> buf(image.size());
  for (std::size_t i = 0; i < buf.size(); ++i) {
    const float v = std::isfinite(image[i]) ? std::clamp(image[i], 0.0f, 1.0f) : 0.0f;
    buf[i] = static_cast<std::uint8_t>(std::lround(v * 255.0f));
  }
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.width());
  img.height = static_cast<png_uint_32>(image.height());
  img.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&img, path.c_str(), 0, buf.data(), 0, nullptr))
    throw std::runtime_error("png: " + std::string(img.message) + " writing " + path.string());
}

}  // namespace disguise::io
