#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "mmfuse/error.hpp"
#include "mmfuse/features.hpp"
#include "oracles.hpp"

using namespace mmfuse;

namespace {

oracle::Grid random_grid(std::mt19937& rng, int w, int h, int levels) {
  oracle::Grid g(h, std::vector<int>(w));
  for (auto& row : g) {
    for (auto& v : row) {
      v = static_cast<int>(rng() % levels);
    }
  }
  return g;
}

int degrees(Orientation o) {
  switch (o) {
    case Orientation::Deg0: return 0;
    case Orientation::Deg45: return 45;
    case Orientation::Deg90: return 90;
    case Orientation::Deg135: return 135;
  }
  return 0;
}

}  // namespace

TEST_CASE("glcm hand example") {
  const auto img = GrayImage::from_rows({{0, 1}, {0, 1}}, 1);
  const auto g = compute_glcm(img, {1, Orientation::Deg0, 2});
  CHECK(g.count(0, 0) == 0);
  CHECK(g.count(0, 1) == 2);
  CHECK(g.count(1, 0) == 0);
  CHECK(g.count(1, 1) == 0);
  CHECK(g.total_pairs == 2);
}

TEST_CASE("glcm offsets follow the angle") {
  CHECK(glcm_offset(2, Orientation::Deg0) == std::pair{2, 0});
  CHECK(glcm_offset(2, Orientation::Deg45) == std::pair{2, -2});
  CHECK(glcm_offset(2, Orientation::Deg90) == std::pair{0, -2});
  CHECK(glcm_offset(2, Orientation::Deg135) == std::pair{-2, -2});
  for (auto o : kOrientations) {
    CHECK(glcm_offset(3, o) == oracle::offset(3, degrees(o)));
  }
}

TEST_CASE("glcm errors") {
  CHECK_THROWS_AS(compute_glcm(GrayImage(1, 1, 8), {1, Orientation::Deg0, 256}), DataError);
  CHECK_THROWS_AS(compute_glcm(GrayImage::from_rows({{0, 5}}, 3), {1, Orientation::Deg0, 4}), DataError);
  CHECK_THROWS_AS(compute_glcm(GrayImage(4, 4, 2), {4, Orientation::Deg0, 4}), DataError);
}

TEST_CASE("glcm of a constant image puts all mass on one diagonal cell") {
  const GrayImage img(6, 5, 2, std::vector<GrayImage::Pixel>(30, 3));
  for (auto o : kOrientations) {
    const auto g = compute_glcm(img, {1, o, 4});
    CHECK(g.count(3, 3) == g.total_pairs);
    const auto h = haralick(g);
    CHECK(h.contrast == 0.0);
    CHECK(h.dissimilarity == 0.0);
    CHECK(h.homogeneity == 1.0);
    CHECK(h.asm_ == 1.0);
    CHECK(h.energy == 1.0);
    CHECK(h.correlation == 1.0);
  }
}

TEST_CASE("glcm matches the brute-force pair loop and conserves pair counts") {
  std::mt19937 rng(11);
  for (int trial = 0; trial < 300; ++trial) {
    const int w = 1 + static_cast<int>(rng() % 8);
    const int h = 1 + static_cast<int>(rng() % 8);
    const int levels = 1 + static_cast<int>(rng() % 4);
    const auto grid = random_grid(rng, w, h, levels);
    const auto img = GrayImage::from_rows(grid, 2);
    for (int delta = 1; delta <= 3; ++delta) {
      for (auto o : kOrientations) {
        const auto [dx, dy] = oracle::offset(delta, degrees(o));
        const std::int64_t pairs =
            static_cast<std::int64_t>(std::max(0, w - std::abs(dx))) * std::max(0, h - std::abs(dy));
        if (pairs == 0) {
          CHECK_THROWS_AS(compute_glcm(img, {delta, o, 4}), DataError);
          continue;
        }
        const auto g = compute_glcm(img, {delta, o, 4});
        const auto ref = oracle::glcm(grid, 4, dx, dy);
        REQUIRE(static_cast<std::int64_t>(g.total_pairs) == ref.total);
        REQUIRE(ref.total == pairs);
        std::uint64_t sum = 0;
        for (int i = 0; i < 4; ++i) {
          for (int j = 0; j < 4; ++j) {
            REQUIRE(static_cast<std::int64_t>(g.count(i, j)) == ref.counts[i][j]);
            sum += g.count(i, j);
          }
        }
        CHECK(sum == g.total_pairs);
      }
    }
  }
}

TEST_CASE("haralick hand examples") {
  const std::vector<double> off = {0, 1, 0, 0};
  const auto a = haralick_from_probabilities(off, 2);
  CHECK(a.contrast == 1.0);
  CHECK(a.dissimilarity == 1.0);
  CHECK(a.homogeneity == 0.5);
  CHECK(a.asm_ == 1.0);
  CHECK(a.energy == 1.0);
  const std::vector<double> diag = {0.5, 0, 0, 0.5};
  const auto b = haralick_from_probabilities(diag, 2);
  CHECK(b.contrast == 0.0);
  CHECK(b.correlation == doctest::Approx(1.0).epsilon(1e-15));
  CHECK_THROWS_AS(haralick(Glcm{{1, Orientation::Deg0, 2}, {0, 0, 0, 0}, 0}), DataError);
}

TEST_CASE("haralick matches the oracle and its range properties") {
  std::mt19937 rng(12);
  for (int trial = 0; trial < 300; ++trial) {
    const int w = 2 + static_cast<int>(rng() % 7);
    const int h = 2 + static_cast<int>(rng() % 7);
    const auto grid = random_grid(rng, w, h, 4);
    const auto g = compute_glcm(GrayImage::from_rows(grid, 2), {1, Orientation::Deg0, 4});
    const auto mine = haralick(g);
    const auto ref = oracle::haralick(oracle::glcm(grid, 4, 1, 0));
    CHECK(mine.contrast == doctest::Approx(ref.contrast).epsilon(1e-12));
    CHECK(std::abs(mine.dissimilarity - ref.dissimilarity) < 1e-10);
    CHECK(std::abs(mine.homogeneity - ref.homogeneity) < 1e-10);
    CHECK(std::abs(mine.asm_ - ref.asm_) < 1e-10);
    CHECK(std::abs(mine.energy - ref.energy) < 1e-10);
    CHECK(std::abs(mine.correlation - ref.correlation) < 1e-10);
    CHECK(mine.energy == std::sqrt(mine.asm_));
    CHECK(mine.homogeneity > 0.0);
    CHECK(mine.homogeneity <= 1.0);
    CHECK(mine.asm_ > 0.0);
    CHECK(mine.asm_ <= 1.0);
    bool diagonal = true;
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 4; ++j) {
        diagonal = diagonal && (i == j || g.count(i, j) == 0);
      }
    }
    CHECK((mine.contrast == 0.0) == diagonal);
  }
}

TEST_CASE("quantization") {
  const auto img = GrayImage::from_rows({{0, 7, 8, 255}}, 8);
  const auto q = quantize(img, 32);
  CHECK(q.at(0, 0) == 0);
  CHECK(q.at(1, 0) == 0);
  CHECK(q.at(2, 0) == 1);
  CHECK(q.at(3, 0) == 31);
  const auto small = GrayImage::from_rows({{0, 3}}, 2);
  CHECK(quantize(small, 32) == small);
}

TEST_CASE("riu2 codes") {
  const std::vector<double> flat(8, 5.0);
  CHECK(riu2_code(flat, 5.0) == 8);
  const std::vector<double> alternating = {0, 1, 0, 1, 0, 1, 0, 1};
  CHECK(riu2_code(alternating, 0.5) == 9);
  const std::vector<double> half = {0, 0, 0, 0, 1, 1, 1, 1};
  CHECK(riu2_code(half, 0.5) == 4);
  const auto constant = GrayImage::from_rows({{4, 4, 4}, {4, 4, 4}, {4, 4, 4}}, 3);
  CHECK(lbp_code(constant, 1, 1, {}) == 8);
  CHECK_THROWS_AS(lbp_code(constant, 0, 1, {}), DataError);
}

TEST_CASE("riu2 code is invariant to rotation and monotone transforms of the neighbourhood") {
  std::mt19937 rng(13);
  std::uniform_real_distribution<double> u(-5, 5);
  for (int trial = 0; trial < 2000; ++trial) {
    const int P = 4 + static_cast<int>(rng() % 13);
    std::vector<double> n(P);
    for (auto& v : n) {
      v = std::round(u(rng));
    }
    const double c = std::round(u(rng));
    const int code = riu2_code(n, c);
    const int shift = static_cast<int>(rng() % P);
    std::vector<double> rotated(P);
    for (int p = 0; p < P; ++p) {
      rotated[p] = n[(p + shift) % P];
    }
    CHECK(riu2_code(rotated, c) == code);
    std::vector<double> transformed(P);
    const auto f = [](double v) { return std::exp(0.3 * v) + 2.0 * v; };
    for (int p = 0; p < P; ++p) {
      transformed[p] = f(n[p]);
    }
    CHECK(riu2_code(transformed, f(c)) == code);
  }
}

TEST_CASE("lbp histogram matches the oracle") {
  std::mt19937 rng(14);
  for (int trial = 0; trial < 300; ++trial) {
    const int w = 3 + static_cast<int>(rng() % 6);
    const int h = 3 + static_cast<int>(rng() % 6);
    const auto grid = random_grid(rng, w, h, 4);
    const auto hist = lbp_histogram(GrayImage::from_rows(grid, 2), {8, 1});
    const auto ref = oracle::lbp_histogram(grid, 8, 1);
    REQUIRE(hist.bins.size() == 10);
    for (std::size_t k = 0; k < 10; ++k) {
      REQUIRE(static_cast<std::int64_t>(hist.bins[k]) == ref[k]);
    }
    CHECK(hist.total() == static_cast<std::uint64_t>((w - 2) * (h - 2)));
  }
  // radius 2, 16 points
  for (int trial = 0; trial < 50; ++trial) {
    const auto grid = random_grid(rng, 7, 6, 4);
    const auto hist = lbp_histogram(GrayImage::from_rows(grid, 2), {16, 2});
    const auto ref = oracle::lbp_histogram(grid, 16, 2);
    for (std::size_t k = 0; k < ref.size(); ++k) {
      REQUIRE(static_cast<std::int64_t>(hist.bins[k]) == ref[k]);
    }
  }
  CHECK_THROWS_AS(lbp_histogram(GrayImage(2, 5, 8), {8, 1}), DataError);
}

TEST_CASE("lbp histogram is unchanged by an intensity offset and by monotone maps") {
  std::mt19937 rng(15);
  for (int trial = 0; trial < 100; ++trial) {
    const auto grid = random_grid(rng, 8, 8, 16);
    oracle::Grid shifted = grid;
    oracle::Grid squared = grid;
    for (int y = 0; y < 8; ++y) {
      for (int x = 0; x < 8; ++x) {
        shifted[y][x] += 100;
        squared[y][x] = grid[y][x] * grid[y][x];
      }
    }
    const auto base = lbp_histogram(GrayImage::from_rows(grid, 8), {});
    CHECK(lbp_histogram(GrayImage::from_rows(shifted, 8), {}).bins == base.bins);
    // integer-grid neighbours only, so squaring cannot reorder interpolated values
    const auto axis = lbp_histogram(GrayImage::from_rows(grid, 8), {4, 1});
    CHECK(lbp_histogram(GrayImage::from_rows(squared, 8), {4, 1}).bins == axis.bins);
  }
  const GrayImage constant(5, 5, 8, std::vector<GrayImage::Pixel>(25, 9));
  const auto h = lbp_histogram(constant, {});
  CHECK(h.bins[8] == 9);
}

TEST_CASE("histogram statistics hand examples") {
  const std::vector<double> r2 = {0, 1};
  const std::vector<double> p2 = {0.5, 0.5};
  const auto a = histogram_stats(r2, p2);
  CHECK(a.mean == 0.5);
  CHECK(a.entropy == 1.0);
  CHECK(a.energy == 0.5);
  CHECK(a.max_probability == 0.5);

  const std::vector<double> r1 = {3};
  const std::vector<double> p1 = {1};
  const auto b = histogram_stats(r1, p1);
  CHECK(b.std_dev == 0.0);
  CHECK(b.skewness == 0.0);
  CHECK(b.kurtosis == 0.0);
  CHECK(b.entropy == 0.0);
  CHECK(b.energy == 1.0);

  const std::vector<double> r3 = {0, 1, 2};
  const std::vector<double> p3 = {0.25, 0.5, 0.25};
  const auto c = histogram_stats(r3, p3);
  CHECK(c.mean == 1.0);
  CHECK(c.max_probability == 0.5);
  CHECK(c.max_value == 1.0);
  CHECK(c.relative_maxima == 1.0);
  CHECK(c.width == 2.0);

  const std::vector<double> bad = {0.5, 0.6};
  CHECK_THROWS_AS(histogram_stats(r2, bad), DataError);
  const std::vector<double> negative = {1.5, -0.5};
  CHECK_THROWS_AS(histogram_stats(r2, negative), DataError);
}

TEST_CASE("histogram statistics match the oracle; entropy and energy extremes") {
  std::mt19937 rng(16);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 1 + rng() % 12;
    std::vector<double> r(n), p(n);
    double total = 0;
    for (std::size_t k = 0; k < n; ++k) {
      r[k] = static_cast<double>(k);
      p[k] = rng() % 3 == 0 ? 0.0 : static_cast<double>(rng() % 7);
      total += p[k];
    }
    if (total == 0) {
      p[0] = 1;
      total = 1;
    }
    for (auto& v : p) {
      v /= total;
    }
    const auto s = stats_features(histogram_stats(r, p), "", false).values();
    const auto ref = oracle::histogram_stats(r, p);
    REQUIRE(s.size() == 12);
    for (std::size_t k = 0; k < 12; ++k) {
      CHECK(std::abs(s[k] - ref[k]) <= 1e-10);
    }
    const std::vector<double> uniform(n, 1.0 / static_cast<double>(n));
    const auto u = histogram_stats(r, uniform);
    const auto h = histogram_stats(r, p);
    CHECK(u.entropy >= h.entropy - 1e-12);
    CHECK(u.energy <= h.energy + 1e-12);
  }
}

TEST_CASE("pathomics features of a constant patch") {
  const GrayImage patch(10, 10, 8, std::vector<GrayImage::Pixel>(100, 77));
  const auto fv = pathomics_features(patch);
  REQUIRE(fv.size() == 24);
  const double block[6] = {0, 0, 1, 1, 1, 1};
  for (std::size_t k = 0; k < 24; ++k) {
    CHECK(fv.values()[k] == block[k % 6]);
  }
  CHECK(fv.names()[0] == "glcm0_contrast");
  CHECK(fv.names()[23] == "glcm135_correlation");
}

TEST_CASE("pathomics: the 0 degree block of a patch is the 90 degree block of its transpose") {
  std::mt19937 rng(17);
  for (int trial = 0; trial < 30; ++trial) {
    const auto grid = random_grid(rng, 9, 6, 256);
    const auto img = GrayImage::from_rows(grid, 8);
    const auto a = pathomics_features(img).values();
    const auto b = pathomics_features(img.transposed()).values();
    const auto c = pathomics_features(img).values();
    CHECK(a == c);
    // transposing maps offset (1,0) to (0,1), the reverse of the 90 degree
    // offset (0,-1); reversing the pair direction transposes the GLCM, which
    // leaves every descriptor unchanged
    for (int k = 0; k < 6; ++k) {
      CHECK(std::abs(a[k] - b[12 + k]) < 1e-12);
      CHECK(std::abs(b[k] - a[12 + k]) < 1e-12);
    }
  }
}

TEST_CASE("radiomics features") {
  const GrayImage constant(6, 6, 8, std::vector<GrayImage::Pixel>(36, 40));
  const auto fv = radiomics_features(constant);
  REQUIRE(fv.size() == 48);
  CHECK(fv.names()[0] == "hist_mean");
  CHECK(fv.names()[12] == "glcm0_contrast");
  CHECK(fv.names()[36] == "lbp_mean");
  const auto& v = fv.values();
  CHECK(v[0] == 40.0);  // mean
  CHECK(v[1] == 0.0);   // std
  CHECK(v[6] == 0.0);   // entropy
  CHECK(v[5] == 1.0);   // energy
  CHECK(v[36] == 8.0);  // LBP mean sits at code P
  CHECK(v[37] == 0.0);
  CHECK(v[42] == 0.0);
  CHECK(v[41] == 1.0);

  FeatureParams with_r;
  with_r.smoothness = true;
  CHECK(radiomics_features(constant, with_r).size() == 50);

  std::mt19937 rng(18);
  for (int trial = 0; trial < 20; ++trial) {
    const auto grid = random_grid(rng, 8, 8, 100);
    oracle::Grid shifted = grid;
    for (auto& row : shifted) {
      for (auto& x : row) {
        x += 50;
      }
    }
    const auto a = radiomics_features(GrayImage::from_rows(grid, 8)).values();
    const auto b = radiomics_features(GrayImage::from_rows(shifted, 8)).values();
    for (int k = 36; k < 48; ++k) {
      CHECK(a[k] == b[k]);
    }
  }
}

TEST_CASE("parallel batch extraction equals the serial reference") {
  std::mt19937 rng(19);
  std::vector<GrayImage> images;
  for (int k = 0; k < 40; ++k) {
    images.push_back(GrayImage::from_rows(random_grid(rng, 12, 10, 256), 8));
  }
  for (auto kind : {FeatureKind::Pathomics, FeatureKind::Radiomics}) {
    const auto serial = extract_batch_serial(images, kind, {});
    for (int workers : {1, 3, 8}) {
      const auto par = extract_batch(images, kind, {}, workers);
      REQUIRE(par.size() == serial.size());
      for (std::size_t k = 0; k < par.size(); ++k) {
        CHECK(par[k].values() == serial[k].values());
        CHECK(par[k].names() == serial[k].names());
      }
    }
  }
}
