#include "mmfuse/image.hpp"

#include <utility>

#include "mmfuse/error.hpp"

namespace mmfuse {

GrayImage::GrayImage(int width, int height, int bit_depth)
    : GrayImage(width, height, bit_depth,
                std::vector<Pixel>(static_cast<std::size_t>(width > 0 ? width : 0) *
                                   static_cast<std::size_t>(height > 0 ? height : 0))) {}

GrayImage::GrayImage(int width, int height, int bit_depth, std::vector<Pixel> pixels)
    : width_(width), height_(height), bit_depth_(bit_depth), pixels_(std::move(pixels)) {
  if (width_ < 1 || height_ < 1) {
    throw DataError("image dimensions must be at least 1x1");
  }
  if (bit_depth_ < 1 || bit_depth_ > 16) {
    throw DataError("bit depth must be in [1, 16], got " + std::to_string(bit_depth_));
  }
  if (pixels_.size() != static_cast<std::size_t>(width_) * height_) {
    throw DataError("pixel buffer size does not match image dimensions");
  }
  const auto limit = max_value();
  for (auto v : pixels_) {
    if (v > limit) {
      throw DataError("pixel value " + std::to_string(v) + " exceeds bit depth " +
                      std::to_string(bit_depth_));
    }
  }
}

GrayImage GrayImage::from_rows(const std::vector<std::vector<int>>& rows, int bit_depth) {
  if (rows.empty() || rows.front().empty()) {
    throw DataError("empty pixel rows");
  }
  const int h = static_cast<int>(rows.size());
  const int w = static_cast<int>(rows.front().size());
  std::vector<Pixel> px;
  px.reserve(static_cast<std::size_t>(w) * h);
  for (const auto& row : rows) {
    if (static_cast<int>(row.size()) != w) {
      throw DataError("ragged pixel rows");
    }
    for (int v : row) {
      if (v < 0 || v > 0xFFFF) {
        throw DataError("pixel value out of range");
      }
      px.push_back(static_cast<Pixel>(v));
    }
  }
  return GrayImage(w, h, bit_depth, std::move(px));
}

void GrayImage::set(int x, int y, Pixel v) {
  if (v > max_value()) {
    throw DataError("pixel value exceeds bit depth");
  }
  pixels_[static_cast<std::size_t>(y) * width_ + x] = v;
}

GrayImage GrayImage::transposed() const {
  std::vector<Pixel> out(pixels_.size());
  for (int y = 0; y < height_; ++y) {
    for (int x = 0; x < width_; ++x) {
      out[static_cast<std::size_t>(x) * height_ + y] = at(x, y);
    }
  }
  return GrayImage(height_, width_, bit_depth_, std::move(out));
}

ImageStack::ImageStack(std::string stack_id, std::vector<GrayImage> slices)
    : id_(std::move(stack_id)), slices_(std::move(slices)) {
  for (const auto& s : slices_) {
    if (s.bit_depth() != slices_.front().bit_depth()) {
      throw DataError("stack '" + id_ + "' mixes bit depths");
    }
  }
}

}  // namespace mmfuse
