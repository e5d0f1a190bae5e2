#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mmfuse/feature_vector.hpp"
#include "mmfuse/image.hpp"

namespace mmfuse {

// ---------------------------------------------------------------------------
// Gray-level co-occurrence matrix
// ---------------------------------------------------------------------------

// Angles are counter-clockwise with the image y axis pointing down.
enum class Orientation { Deg0, Deg45, Deg90, Deg135 };

inline constexpr std::array<Orientation, 4> kOrientations = {
    Orientation::Deg0, Orientation::Deg45, Orientation::Deg90, Orientation::Deg135};

std::string_view orientation_label(Orientation o);

struct GlcmParams {
  int distance = 1;
  Orientation orientation = Orientation::Deg0;
  int levels = 32;
};

// (dx, dy) pairing pixel (x, y) with (x + dx, y + dy):
// 0 -> (d, 0), 45 -> (d, -d), 90 -> (0, -d), 135 -> (-d, -d).
std::pair<int, int> glcm_offset(int distance, Orientation o);

// Directed co-occurrence counts, row index = reference pixel level.
struct Glcm {
  GlcmParams params;
  std::vector<std::uint64_t> counts;  // levels x levels, row-major
  std::uint64_t total_pairs = 0;

  int levels() const { return params.levels; }
  std::uint64_t count(int i, int j) const {
    return counts[static_cast<std::size_t>(i) * params.levels + j];
  }
};

// Linear re-quantization floor(v * levels / 2^bit_depth). Images whose range
// already fits in `levels` are returned unchanged.
GrayImage quantize(const GrayImage& image, int levels);

// Every pixel must already be < params.levels. Throws DataError when the
// offset leaves no in-bounds pair.
Glcm compute_glcm(const GrayImage& image, const GlcmParams& params);

struct HaralickDescriptors {
  double contrast = 0;
  double dissimilarity = 0;
  double homogeneity = 0;
  double asm_ = 0;
  double energy = 0;
  double correlation = 0;
};

inline constexpr std::array<std::string_view, 6> kHaralickNames = {
    "contrast", "dissimilarity", "homogeneity", "asm", "energy", "correlation"};

HaralickDescriptors haralick(const Glcm& glcm);

// Descriptors of an already normalized levels x levels matrix. Correlation is
// 1 when either marginal distribution is concentrated on a single level.
HaralickDescriptors haralick_from_probabilities(std::span<const double> p, int levels);

std::array<double, 6> as_array(const HaralickDescriptors& h);

// ---------------------------------------------------------------------------
// Rotation-invariant uniform local binary patterns
// ---------------------------------------------------------------------------

struct LbpParams {
  int points = 8;
  int radius = 1;
};

// Neighbour differences >= -kLbpTieTolerance count as non-negative, so that
// interpolated samples equal to the centre in exact arithmetic map to 1.
inline constexpr double kLbpTieTolerance = 1e-9;

// riu2 code of a sampled circular neighbourhood: number of non-negative
// differences when the pattern has at most two 0/1 transitions, else P + 1.
int riu2_code(std::span<const double> neighbours, double centre);

// Samples the P neighbours of (x, y) at angles 2*pi*p/P, bilinearly
// interpolated; throws DataError if the circle leaves the image.
std::vector<double> lbp_neighbours(const GrayImage& image, int x, int y, const LbpParams& params);

int lbp_code(const GrayImage& image, int x, int y, const LbpParams& params);

struct LbpHistogram {
  std::vector<std::uint64_t> bins;  // P + 2 codes
  std::uint64_t total() const;
};

LbpHistogram lbp_histogram(const GrayImage& image, const LbpParams& params);

// ---------------------------------------------------------------------------
// First-order histogram statistics
// ---------------------------------------------------------------------------

struct HistogramStats {
  double mean = 0;
  double std_dev = 0;
  double skewness = 0;  // third central moment
  double kurtosis = 0;  // fourth central moment
  double width = 0;     // index span of the non-zero bins
  double energy = 0;
  double entropy = 0;   // bits
  double max_probability = 0;
  double max_value = 0;  // r_k at the (first) absolute maximum
  double energy_around_max = 0;  // sum p^2 over +-2 bins of the maximum
  double relative_maxima = 0;    // strict interior local maxima
  double relative_maxima_energy = 0;
  double smoothness = 0;  // 1 - 1/(1 + sigma^2), optional output
};

inline constexpr std::array<std::string_view, 12> kHistogramStatNames = {
    "mean",    "std",          "skewness",  "kurtosis",          "width",         "energy",
    "entropy", "max_prob",     "max_value", "energy_around_max", "relmax_count",  "relmax_energy"};

// `values` are the bin positions r_k, `probabilities` sum to 1 within 1e-9.
HistogramStats histogram_stats(std::span<const double> values,
                               std::span<const double> probabilities);

FeatureVector stats_features(const HistogramStats& s, const std::string& prefix,
                             bool with_smoothness);

// Normalized histogram over levels 0 .. 2^bit_depth - 1.
std::vector<double> gray_level_probabilities(const GrayImage& image);

// ---------------------------------------------------------------------------
// Per-modality descriptor sets
// ---------------------------------------------------------------------------

struct FeatureParams {
  int glcm_levels = 32;
  int glcm_distance = 1;
  LbpParams lbp;
  bool smoothness = false;
};

// Six Haralick descriptors for each of the four orientations (24 values).
FeatureVector glcm_texture_features(const GrayImage& image, const FeatureParams& params);

FeatureVector pathomics_features(const GrayImage& patch, const FeatureParams& params = {});

// Gray-level histogram statistics, GLCM texture and LBP histogram statistics
// (48 values, 50 with smoothness).
FeatureVector radiomics_features(const GrayImage& slice, const FeatureParams& params = {});

enum class FeatureKind { Pathomics, Radiomics };

// Reference implementation: one sample after another.
std::vector<FeatureVector> extract_batch_serial(std::span<const GrayImage> images,
                                                FeatureKind kind, const FeatureParams& params);

// OpenMP version; output is identical to extract_batch_serial.
std::vector<FeatureVector> extract_batch(std::span<const GrayImage> images, FeatureKind kind,
                                         const FeatureParams& params, int workers);

}  // namespace mmfuse
