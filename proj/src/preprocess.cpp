#include "mmfuse/preprocess.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <unordered_set>

#include "mmfuse/error.hpp"

namespace mmfuse {

std::size_t patch_count(int width, int height, int window, int stride) {
  if (window < 1 || stride < 1 || window > width || window > height) {
    return 0;
  }
  const auto nx = static_cast<std::size_t>((width - window) / stride + 1);
  const auto ny = static_cast<std::size_t>((height - window) / stride + 1);
  return nx * ny;
}

std::vector<GrayImage> extract_patches(const GrayImage& image, int window, int stride) {
  if (window < 1 || stride < 1) {
    throw DataError("patch window and stride must be >= 1");
  }
  if (window > image.width() || window > image.height()) {
    throw DataError("image too small: " + std::to_string(image.width()) + "x" +
                    std::to_string(image.height()) + " cannot hold a " + std::to_string(window) +
                    "x" + std::to_string(window) + " window");
  }
  std::vector<GrayImage> patches;
  patches.reserve(patch_count(image.width(), image.height(), window, stride));
  const auto& src = image.pixels();
  for (int y0 = 0; y0 + window <= image.height(); y0 += stride) {
    for (int x0 = 0; x0 + window <= image.width(); x0 += stride) {
      std::vector<GrayImage::Pixel> px;
      px.reserve(static_cast<std::size_t>(window) * window);
      for (int y = y0; y < y0 + window; ++y) {
        const auto row = src.begin() + static_cast<std::ptrdiff_t>(y) * image.width() + x0;
        px.insert(px.end(), row, row + window);
      }
      patches.emplace_back(window, window, image.bit_depth(), std::move(px));
    }
  }
  return patches;
}

double background_fraction(const GrayImage& patch, const BackgroundPredicate& is_background) {
  const auto& px = patch.pixels();
  const auto n = std::count_if(px.begin(), px.end(), is_background);
  return static_cast<double>(n) / static_cast<double>(px.size());
}

bool is_mostly_background(const GrayImage& patch, const BackgroundPredicate& is_background,
                          double max_fraction) {
  return background_fraction(patch, is_background) > max_fraction;
}

std::vector<GrayImage> extract_tissue_patches(const GrayImage& image, int window, int stride,
                                              const BackgroundPredicate& is_background,
                                              double max_fraction) {
  auto patches = extract_patches(image, window, stride);
  std::erase_if(patches, [&](const GrayImage& p) {
    return is_mostly_background(p, is_background, max_fraction);
  });
  return patches;
}

std::vector<std::pair<std::size_t, GrayImage>> decompose_volume(const ImageStack& stack) {
  if (stack.empty()) {
    throw DataError("cannot decompose empty stack '" + stack.id() + "'");
  }
  std::vector<std::pair<std::size_t, GrayImage>> out;
  out.reserve(stack.slices().size());
  for (std::size_t i = 0; i < stack.slices().size(); ++i) {
    out.emplace_back(i, stack.slices()[i]);
  }
  return out;
}

int encode_ordinal(const std::string& value, const std::vector<std::string>& ordering) {
  const auto it = std::find(ordering.begin(), ordering.end(), value);
  if (it == ordering.end()) {
    throw DataError("unknown category '" + value + "'");
  }
  return static_cast<int>(it - ordering.begin());
}

std::vector<int> encode_onehot(const std::string& value, const std::vector<std::string>& domain) {
  std::vector<int> out(domain.size(), 0);
  out[static_cast<std::size_t>(encode_ordinal(value, domain))] = 1;
  return out;
}

GrayImage saturation_channel(const RgbImage& rgb) {
  if (rgb.width < 1 || rgb.height < 1 ||
      rgb.pixels.size() != static_cast<std::size_t>(rgb.width) * rgb.height) {
    throw DataError("malformed RGB image");
  }
  std::vector<GrayImage::Pixel> out;
  out.reserve(rgb.pixels.size());
  for (const auto& p : rgb.pixels) {
    const unsigned hi = std::max({p[0], p[1], p[2]});
    const unsigned lo = std::min({p[0], p[1], p[2]});
    if (hi == 0) {
      out.push_back(0);
      continue;
    }
    // round((hi - lo) / hi * 255), half away from zero, in integers
    const unsigned s = (2 * (hi - lo) * 255 + hi) / (2 * hi);
    out.push_back(static_cast<GrayImage::Pixel>(s));
  }
  return GrayImage(rgb.width, rgb.height, 8, std::move(out));
}

const std::string& TabularRecord::get(const std::string& name) const {
  for (const auto& [k, v] : attributes) {
    if (k == name) {
      return v;
    }
  }
  throw DataError("record has no attribute '" + name + "'");
}

FeatureVector encode_record(const TabularRecord& record, const TabularSchema& schema) {
  {
    std::unordered_set<std::string> seen;
    for (const auto& [k, v] : record.attributes) {
      if (!seen.insert(k).second) {
        throw DataError("duplicate attribute '" + k + "' in record");
      }
    }
  }
  std::vector<std::string> names;
  std::vector<double> values;
  for (const auto& col : schema) {
    const auto& raw = record.get(col.column);
    switch (col.kind) {
      case ColumnEncoding::Kind::Numeric: {
        double v = 0.0;
        const auto* first = raw.data();
        const auto* last = raw.data() + raw.size();
        auto [ptr, ec] = std::from_chars(first, last, v);
        if (ec != std::errc{} || ptr != last || !std::isfinite(v)) {
          throw DataError("column '" + col.column + "': '" + raw + "' is not a number");
        }
        names.push_back(col.column);
        values.push_back(v);
        break;
      }
      case ColumnEncoding::Kind::Ordinal:
        names.push_back(col.column);
        values.push_back(encode_ordinal(raw, col.categories));
        break;
      case ColumnEncoding::Kind::OneHot: {
        const auto bits = encode_onehot(raw, col.categories);
        for (std::size_t i = 0; i < bits.size(); ++i) {
          names.push_back(col.column + "=" + col.categories[i]);
          values.push_back(bits[i]);
        }
        break;
      }
    }
  }
  return FeatureVector(std::move(names), std::move(values));
}

}  // namespace mmfuse
