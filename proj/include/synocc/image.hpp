#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace synocc {

/// Interleaved 8-bit raster. Channel count is 1 (indexed/gray), 3 (RGB) or 4 (RGBA).
///
/// Pixel (x, y) covers the continuous square [x, x+1) x [y, y+1); its center sits at
/// (x + 0.5, y + 0.5). Every geometric routine in the library uses this convention.
class Image {
 public:
  Image() = default;
  Image(int width, int height, int channels, std::uint8_t fill = 0);

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return channels_; }
  bool empty() const { return data_.empty(); }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width_) * height_; }

  std::uint8_t& at(int x, int y, int c) { return data_[index(x, y, c)]; }
  std::uint8_t at(int x, int y, int c) const { return data_[index(x, y, c)]; }

  std::span<std::uint8_t> data() { return data_; }
  std::span<const std::uint8_t> data() const { return data_; }

  bool same_shape(const Image& other) const {
    return width_ == other.width_ && height_ == other.height_ && channels_ == other.channels_;
  }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  std::size_t index(int x, int y, int c) const {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }

  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<std::uint8_t> data_;
};

class ImageIoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// PNG. Gray/palette inputs are expanded to RGB unless read with read_png_indexed.
Image read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Image& image);
std::vector<std::uint8_t> encode_png(const Image& image);

/// Reads a palette (or 8-bit gray) PNG as raw per-pixel indices, one channel.
Image read_png_indexed(const std::filesystem::path& path);
/// Writes a one-channel index image as a palette PNG using the VOC color map.
void write_png_indexed(const std::filesystem::path& path, const Image& indices);

Image read_jpeg(const std::filesystem::path& path);
void write_jpeg(const std::filesystem::path& path, const Image& image, int quality = 95);

/// Dispatches on extension (.png, .jpg, .jpeg); result is RGB.
Image read_color_image(const std::filesystem::path& path);

}  // namespace synocc
