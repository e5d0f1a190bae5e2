#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace mmfuse {

// Row-major grid of integer intensities in [0, 2^bit_depth - 1].
class GrayImage {
public:
  using Pixel = std::uint16_t;

  GrayImage() = default;
  GrayImage(int width, int height, int bit_depth);
  GrayImage(int width, int height, int bit_depth, std::vector<Pixel> pixels);

  // Convenience for tests and small fixtures: rows[y][x].
  static GrayImage from_rows(const std::vector<std::vector<int>>& rows, int bit_depth);

  int width() const { return width_; }
  int height() const { return height_; }
  int bit_depth() const { return bit_depth_; }
  std::size_t size() const { return pixels_.size(); }
  std::uint32_t max_value() const { return (std::uint32_t{1} << bit_depth_) - 1; }

  Pixel at(int x, int y) const { return pixels_[static_cast<std::size_t>(y) * width_ + x]; }
  void set(int x, int y, Pixel v);

  const std::vector<Pixel>& pixels() const { return pixels_; }

  GrayImage transposed() const;

  bool operator==(const GrayImage&) const = default;

private:
  int width_ = 0;
  int height_ = 0;
  int bit_depth_ = 8;
  std::vector<Pixel> pixels_;
};

// 8-bit interleaved RGB raster.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::array<std::uint8_t, 3>> pixels;

  const std::array<std::uint8_t, 3>& at(int x, int y) const {
    return pixels[static_cast<std::size_t>(y) * width + x];
  }
};

// Ordered slices of one contoured volume; all slices share a bit depth.
class ImageStack {
public:
  ImageStack() = default;
  ImageStack(std::string stack_id, std::vector<GrayImage> slices);

  const std::string& id() const { return id_; }
  const std::vector<GrayImage>& slices() const { return slices_; }
  bool empty() const { return slices_.empty(); }

private:
  std::string id_;
  std::vector<GrayImage> slices_;
};

}  // namespace mmfuse
