#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "mmfuse/feature_vector.hpp"
#include "mmfuse/image.hpp"

namespace mmfuse {

using BackgroundPredicate = std::function<bool(GrayImage::Pixel)>;

// Every window x window sub-image whose top-left corner sits on the stride
// lattice and fits inside the image, in row-major corner order. Throws
// DataError when the window exceeds the image.
std::vector<GrayImage> extract_patches(const GrayImage& image, int window, int stride);

// Number of patches extract_patches would return.
std::size_t patch_count(int width, int height, int window, int stride);

double background_fraction(const GrayImage& patch, const BackgroundPredicate& is_background);

// Pixels at or above `threshold` count as background (bright slide glass).
struct BrightnessBackground {
  GrayImage::Pixel threshold = 220;
  bool operator()(GrayImage::Pixel v) const { return v >= threshold; }
};

// A patch is discarded when its background fraction is strictly greater
// than `max_fraction`.
bool is_mostly_background(const GrayImage& patch, const BackgroundPredicate& is_background,
                          double max_fraction = 0.2);

// Patches surviving the background filter, in extraction order.
std::vector<GrayImage> extract_tissue_patches(const GrayImage& image, int window, int stride,
                                              const BackgroundPredicate& is_background,
                                              double max_fraction = 0.2);

std::vector<std::pair<std::size_t, GrayImage>> decompose_volume(const ImageStack& stack);

int encode_ordinal(const std::string& value, const std::vector<std::string>& ordering);
std::vector<int> encode_onehot(const std::string& value, const std::vector<std::string>& domain);

// HSV saturation scaled to [0, 255]; 0 where the pixel is black.
GrayImage saturation_channel(const RgbImage& rgb);

// -- tabular records ---------------------------------------------------------

struct TabularRecord {
  std::vector<std::pair<std::string, std::string>> attributes;

  const std::string& get(const std::string& name) const;
};

struct ColumnEncoding {
  enum class Kind { Numeric, Ordinal, OneHot };
  std::string column;
  Kind kind = Kind::Numeric;
  std::vector<std::string> categories;  // ordering (ordinal) or domain (one-hot)
};

using TabularSchema = std::vector<ColumnEncoding>;

// Encodes the schema's columns in schema order. One-hot columns expand to one
// feature per category, named "column=category".
FeatureVector encode_record(const TabularRecord& record, const TabularSchema& schema);

}  // namespace mmfuse
