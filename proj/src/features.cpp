#include "mmfuse/features.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mmfuse/error.hpp"
#include "mmfuse/parallel.hpp"

namespace mmfuse {

std::string_view orientation_label(Orientation o) {
  switch (o) {
    case Orientation::Deg0: return "0";
    case Orientation::Deg45: return "45";
    case Orientation::Deg90: return "90";
    case Orientation::Deg135: return "135";
  }
  return "?";
}

std::pair<int, int> glcm_offset(int distance, Orientation o) {
  switch (o) {
    case Orientation::Deg0: return {distance, 0};
    case Orientation::Deg45: return {distance, -distance};
    case Orientation::Deg90: return {0, -distance};
    case Orientation::Deg135: return {-distance, -distance};
  }
  throw InvariantError("unknown orientation");
}

GrayImage quantize(const GrayImage& image, int levels) {
  if (levels < 2) {
    throw DataError("GLCM needs at least 2 gray levels");
  }
  if (image.max_value() < static_cast<std::uint32_t>(levels)) {
    return image;
  }
  std::vector<GrayImage::Pixel> px;
  px.reserve(image.size());
  const int shift = image.bit_depth();
  for (auto v : image.pixels()) {
    px.push_back(static_cast<GrayImage::Pixel>((std::uint64_t{v} * levels) >> shift));
  }
  int depth = 1;
  while ((1 << depth) < levels) {
    ++depth;
  }
  return GrayImage(image.width(), image.height(), depth, std::move(px));
}

Glcm compute_glcm(const GrayImage& image, const GlcmParams& params) {
  if (params.distance < 1) {
    throw DataError("GLCM distance must be >= 1");
  }
  if (params.levels < 1) {
    throw DataError("GLCM levels must be >= 1");
  }
  const auto [dx, dy] = glcm_offset(params.distance, params.orientation);
  if (std::abs(dx) >= image.width() || std::abs(dy) >= image.height()) {
    throw DataError("GLCM offset (" + std::to_string(dx) + "," + std::to_string(dy) +
                    ") leaves no pixel pair in a " + std::to_string(image.width()) + "x" +
                    std::to_string(image.height()) + " image");
  }
  const auto levels = static_cast<std::size_t>(params.levels);
  for (auto v : image.pixels()) {
    if (v >= levels) {
      throw DataError("pixel level " + std::to_string(v) + " >= GLCM levels " +
                      std::to_string(params.levels) + "; quantize first");
    }
  }
  Glcm g;
  g.params = params;
  g.counts.assign(levels * levels, 0);
  const int x_begin = std::max(0, -dx);
  const int x_end = std::min(image.width(), image.width() - dx);
  const int y_begin = std::max(0, -dy);
  const int y_end = std::min(image.height(), image.height() - dy);
  const auto& px = image.pixels();
  const auto w = static_cast<std::size_t>(image.width());
  for (int y = y_begin; y < y_end; ++y) {
    const auto* ref = px.data() + static_cast<std::size_t>(y) * w;
    const auto* nbr = px.data() + static_cast<std::size_t>(y + dy) * w;
    for (int x = x_begin; x < x_end; ++x) {
      ++g.counts[ref[x] * levels + nbr[x + dx]];
    }
  }
  g.total_pairs = static_cast<std::uint64_t>(x_end - x_begin) * (y_end - y_begin);
  return g;
}

HaralickDescriptors haralick(const Glcm& glcm) {
  if (glcm.total_pairs == 0) {
    throw DataError("GLCM has no pixel pairs");
  }
  std::vector<double> p(glcm.counts.size());
  const auto total = static_cast<double>(glcm.total_pairs);
  for (std::size_t k = 0; k < p.size(); ++k) {
    p[k] = static_cast<double>(glcm.counts[k]) / total;
  }
  return haralick_from_probabilities(p, glcm.levels());
}

HaralickDescriptors haralick_from_probabilities(std::span<const double> p, int levels) {
  const auto n = static_cast<std::size_t>(levels);
  if (levels < 1 || p.size() != n * n) {
    throw DataError("probability matrix does not match level count");
  }
  HaralickDescriptors h;
  std::vector<double> row_marginal(n, 0.0);
  std::vector<double> col_marginal(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double pij = p[i * n + j];
      const double d = static_cast<double>(i) - static_cast<double>(j);
      h.contrast += pij * d * d;
      h.dissimilarity += pij * std::abs(d);
      h.homogeneity += pij / (1.0 + d * d);
      h.asm_ += pij * pij;
      row_marginal[i] += pij;
      col_marginal[j] += pij;
    }
  }
  h.energy = std::sqrt(h.asm_);

  auto moments = [n](const std::vector<double>& m) {
    double mu = 0.0;
    std::size_t support = 0;
    for (std::size_t k = 0; k < n; ++k) {
      mu += static_cast<double>(k) * m[k];
      support += m[k] > 0.0 ? 1 : 0;
    }
    double var = 0.0;
    if (support > 1) {
      for (std::size_t k = 0; k < n; ++k) {
        const double d = static_cast<double>(k) - mu;
        var += d * d * m[k];
      }
    }
    return std::pair{mu, var};
  };
  const auto [mu_i, var_i] = moments(row_marginal);
  const auto [mu_j, var_j] = moments(col_marginal);
  if (var_i == 0.0 || var_j == 0.0) {
    h.correlation = 1.0;
  } else {
    double cov = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        cov += p[i * n + j] * (static_cast<double>(i) - mu_i) * (static_cast<double>(j) - mu_j);
      }
    }
    h.correlation = cov / std::sqrt(var_i * var_j);
  }
  return h;
}

std::array<double, 6> as_array(const HaralickDescriptors& h) {
  return {h.contrast, h.dissimilarity, h.homogeneity, h.asm_, h.energy, h.correlation};
}

// ---------------------------------------------------------------------------

int riu2_code(std::span<const double> neighbours, double centre) {
  const auto n = neighbours.size();
  if (n < 2) {
    throw DataError("LBP needs at least two neighbours");
  }
  auto bit = [&](std::size_t p) { return neighbours[p] - centre >= -kLbpTieTolerance ? 1 : 0; };
  int ones = 0;
  int transitions = std::abs(bit(n - 1) - bit(0));
  for (std::size_t p = 0; p < n; ++p) {
    ones += bit(p);
    if (p > 0) {
      transitions += std::abs(bit(p) - bit(p - 1));
    }
  }
  return transitions <= 2 ? ones : static_cast<int>(n) + 1;
}

namespace {

struct NeighbourSample {
  int x0, y0, x1, y1;  // relative to the centre
  double fx, fy;
};

double snap(double v) {
  const double r = std::round(v);
  return std::abs(v - r) < 1e-9 ? r : v;
}

std::vector<NeighbourSample> neighbour_layout(const LbpParams& params) {
  if (params.points < 4 || params.radius < 1) {
    throw DataError("LBP requires P >= 4 and R >= 1");
  }
  std::vector<NeighbourSample> out;
  out.reserve(static_cast<std::size_t>(params.points));
  for (int p = 0; p < params.points; ++p) {
    const double angle = 2.0 * std::numbers::pi * p / params.points;
    const double sx = snap(params.radius * std::cos(angle));
    const double sy = snap(-params.radius * std::sin(angle));
    NeighbourSample s{};
    s.x0 = static_cast<int>(std::floor(sx));
    s.y0 = static_cast<int>(std::floor(sy));
    s.fx = sx - s.x0;
    s.fy = sy - s.y0;
    s.x1 = s.fx > 0.0 ? s.x0 + 1 : s.x0;
    s.y1 = s.fy > 0.0 ? s.y0 + 1 : s.y0;
    out.push_back(s);
  }
  return out;
}

double lerp(double a, double b, double t) { return a + t * (b - a); }

void sample_neighbours(const GrayImage& image, int x, int y,
                       const std::vector<NeighbourSample>& layout, std::vector<double>& out) {
  out.resize(layout.size());
  for (std::size_t p = 0; p < layout.size(); ++p) {
    const auto& s = layout[p];
    const double top = lerp(image.at(x + s.x0, y + s.y0), image.at(x + s.x1, y + s.y0), s.fx);
    const double bottom = lerp(image.at(x + s.x0, y + s.y1), image.at(x + s.x1, y + s.y1), s.fx);
    out[p] = lerp(top, bottom, s.fy);
  }
}

bool neighbourhood_fits(const GrayImage& image, int x, int y, int r) {
  return x - r >= 0 && y - r >= 0 && x + r < image.width() && y + r < image.height();
}

}  // namespace

std::vector<double> lbp_neighbours(const GrayImage& image, int x, int y, const LbpParams& params) {
  const auto layout = neighbour_layout(params);
  if (!neighbourhood_fits(image, x, y, params.radius)) {
    throw DataError("LBP neighbourhood of (" + std::to_string(x) + "," + std::to_string(y) +
                    ") leaves the image");
  }
  std::vector<double> out;
  sample_neighbours(image, x, y, layout, out);
  return out;
}

int lbp_code(const GrayImage& image, int x, int y, const LbpParams& params) {
  return riu2_code(lbp_neighbours(image, x, y, params), image.at(x, y));
}

std::uint64_t LbpHistogram::total() const {
  std::uint64_t t = 0;
  for (auto b : bins) {
    t += b;
  }
  return t;
}

LbpHistogram lbp_histogram(const GrayImage& image, const LbpParams& params) {
  const auto layout = neighbour_layout(params);
  const int r = params.radius;
  if (image.width() <= 2 * r || image.height() <= 2 * r) {
    throw DataError("image too small for an LBP neighbourhood of radius " + std::to_string(r));
  }
  LbpHistogram h;
  h.bins.assign(static_cast<std::size_t>(params.points) + 2, 0);
  std::vector<double> nb;
  for (int y = r; y < image.height() - r; ++y) {
    for (int x = r; x < image.width() - r; ++x) {
      sample_neighbours(image, x, y, layout, nb);
      ++h.bins[static_cast<std::size_t>(riu2_code(nb, image.at(x, y)))];
    }
  }
  return h;
}

// ---------------------------------------------------------------------------

HistogramStats histogram_stats(std::span<const double> values,
                               std::span<const double> probabilities) {
  const auto n = probabilities.size();
  if (n == 0 || values.size() != n) {
    throw DataError("histogram values and probabilities must be non-empty and aligned");
  }
  double total = 0.0;
  for (double p : probabilities) {
    if (!(p >= 0.0)) {
      throw DataError("histogram probabilities must be non-negative");
    }
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw DataError("histogram is not normalized (sum = " + std::to_string(total) + ")");
  }

  HistogramStats s;
  std::size_t first = n;
  std::size_t last = 0;
  std::size_t arg_max = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const double p = probabilities[k];
    s.mean += values[k] * p;
    s.energy += p * p;
    if (p > 0.0) {
      s.entropy -= p * std::log2(p);
      first = std::min(first, k);
      last = k;
    }
    if (p > probabilities[arg_max]) {
      arg_max = k;
    }
  }
  for (std::size_t k = 0; k < n; ++k) {
    const double d = values[k] - s.mean;
    const double p = probabilities[k];
    s.std_dev += d * d * p;
    s.skewness += d * d * d * p;
    s.kurtosis += d * d * d * d * p;
  }
  const double variance = s.std_dev;
  s.std_dev = std::sqrt(variance);
  s.smoothness = 1.0 - 1.0 / (1.0 + variance);
  s.width = first < n ? static_cast<double>(last - first) : 0.0;
  s.max_probability = probabilities[arg_max];
  s.max_value = values[arg_max];
  const std::size_t lo = arg_max >= 2 ? arg_max - 2 : 0;
  const std::size_t hi = std::min(n - 1, arg_max + 2);
  for (std::size_t k = lo; k <= hi; ++k) {
    s.energy_around_max += probabilities[k] * probabilities[k];
  }
  for (std::size_t k = 1; k + 1 < n; ++k) {
    const double p = probabilities[k];
    if (probabilities[k - 1] < p && p > probabilities[k + 1]) {
      s.relative_maxima += 1.0;
      s.relative_maxima_energy += p * p;
    }
  }
  return s;
}

FeatureVector stats_features(const HistogramStats& s, const std::string& prefix,
                             bool with_smoothness) {
  std::vector<double> v = {s.mean,    s.std_dev,          s.skewness,          s.kurtosis,
                           s.width,   s.energy,           s.entropy,           s.max_probability,
                           s.max_value, s.energy_around_max, s.relative_maxima,
                           s.relative_maxima_energy};
  std::vector<std::string> names;
  for (auto n : kHistogramStatNames) {
    names.push_back(prefix + std::string(n));
  }
  if (with_smoothness) {
    names.push_back(prefix + "smoothness");
    v.push_back(s.smoothness);
  }
  return FeatureVector(std::move(names), std::move(v));
}

std::vector<double> gray_level_probabilities(const GrayImage& image) {
  std::vector<double> p(static_cast<std::size_t>(image.max_value()) + 1, 0.0);
  for (auto v : image.pixels()) {
    p[v] += 1.0;
  }
  const auto total = static_cast<double>(image.size());
  for (auto& x : p) {
    x /= total;
  }
  return p;
}

namespace {

std::vector<double> index_values(std::size_t n) {
  std::vector<double> r(n);
  for (std::size_t k = 0; k < n; ++k) {
    r[k] = static_cast<double>(k);
  }
  return r;
}

}  // namespace

FeatureVector glcm_texture_features(const GrayImage& image, const FeatureParams& params) {
  const auto q = quantize(image, params.glcm_levels);
  std::vector<std::string> names;
  std::vector<double> values;
  names.reserve(24);
  values.reserve(24);
  for (auto o : kOrientations) {
    const auto h = as_array(haralick(compute_glcm(q, {params.glcm_distance, o, params.glcm_levels})));
    for (std::size_t k = 0; k < h.size(); ++k) {
      names.push_back("glcm" + std::string(orientation_label(o)) + "_" + std::string(kHaralickNames[k]));
      values.push_back(h[k]);
    }
  }
  return FeatureVector(std::move(names), std::move(values));
}

FeatureVector pathomics_features(const GrayImage& patch, const FeatureParams& params) {
  return glcm_texture_features(patch, params);
}

FeatureVector radiomics_features(const GrayImage& slice, const FeatureParams& params) {
  const auto gray_p = gray_level_probabilities(slice);
  auto out = stats_features(histogram_stats(index_values(gray_p.size()), gray_p), "hist_",
                            params.smoothness);
  out.append(glcm_texture_features(slice, params));

  const auto lbp = lbp_histogram(slice, params.lbp);
  const auto total = static_cast<double>(lbp.total());
  std::vector<double> lbp_p;
  lbp_p.reserve(lbp.bins.size());
  for (auto b : lbp.bins) {
    lbp_p.push_back(static_cast<double>(b) / total);
  }
  out.append(stats_features(histogram_stats(index_values(lbp_p.size()), lbp_p), "lbp_",
                            params.smoothness));
  return out;
}

namespace {

FeatureVector extract_one(const GrayImage& img, FeatureKind kind, const FeatureParams& params) {
  return kind == FeatureKind::Pathomics ? pathomics_features(img, params)
                                        : radiomics_features(img, params);
}

}  // namespace

std::vector<FeatureVector> extract_batch_serial(std::span<const GrayImage> images,
                                                FeatureKind kind, const FeatureParams& params) {
  std::vector<FeatureVector> out;
  out.reserve(images.size());
  for (const auto& img : images) {
    out.push_back(extract_one(img, kind, params));
  }
  return out;
}

std::vector<FeatureVector> extract_batch(std::span<const GrayImage> images, FeatureKind kind,
                                         const FeatureParams& params, int workers) {
  std::vector<FeatureVector> out(images.size());
  parallel_for(images.size(), workers,
               [&](std::size_t i) { out[i] = extract_one(images[i], kind, params); });
  return out;
}

}  // namespace mmfuse
