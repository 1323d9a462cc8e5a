#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "oracles.hpp"
#include "tibcad/error.hpp"
#include "tibcad/texfeat.hpp"

using namespace tibcad;

namespace {

std::size_t feature_index(std::string_view name) {
  const auto& names = glcm_feature_names();
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return i;
  FAIL("unknown feature " << name);
  return 0;
}

Patch random_patch(int n, unsigned seed, int lo, int hi) {
  std::mt19937 gen(seed);
  std::uniform_int_distribution<int> u(lo, hi);
  Patch p;
  p.n = n;
  p.spacing = Spacing{0.7, 0.7, 5};
  p.pixels.resize(static_cast<std::size_t>(n) * n);
  p.maskBits.assign(p.pixels.size(), 1);
  for (auto& v : p.pixels) v = static_cast<std::int16_t>(u(gen));
  return p;
}

} // namespace

TEST_SUITE("texfeat") {
  TEST_CASE("2x2 example by hand") {
    const std::vector<int> lv{0, 0, 1, 1};
    const Glcm h = glcm_from_levels(lv, 2, 2, 2, {{1, 0}});
    CHECK(h(0, 0) == doctest::Approx(0.5));
    CHECK(h(1, 1) == doctest::Approx(0.5));
    CHECK(h(0, 1) == 0.0);
    const TextureFeatures fh = glcm_features(h);
    CHECK(fh[feature_index("contrast")] == doctest::Approx(0.0));
    CHECK(fh[feature_index("energy")] == doctest::Approx(0.5));
    CHECK(fh[feature_index("entropy")] == doctest::Approx(std::log(2.0)));
    CHECK(fh[feature_index("homogeneity")] == doctest::Approx(1.0));
    CHECK(fh[feature_index("autocorrelation")] == doctest::Approx(2.5));
    CHECK(fh[feature_index("correlation")] == doctest::Approx(1.0));

    const Glcm v = glcm_from_levels(lv, 2, 2, 2, {{0, 1}});
    CHECK(v(0, 1) == doctest::Approx(0.5));
    CHECK(v(1, 0) == doctest::Approx(0.5));
    const TextureFeatures fv = glcm_features(v);
    CHECK(fv[feature_index("contrast")] == doctest::Approx(1.0));
    CHECK(fv[feature_index("dissimilarity")] == doctest::Approx(1.0));
    CHECK(fv[feature_index("correlation")] == doctest::Approx(-1.0));
    CHECK(fv[feature_index("sumAverage")] == doctest::Approx(3.0));
  }

  TEST_CASE("constant patch") {
    Patch p = random_patch(9, 1, -700, -700);
    const Glcm g = compute_glcm(p, GlcmParams{});
    const int level = quantize(p, GlcmParams{})[0];
    CHECK(g(level, level) == doctest::Approx(1.0));
    const TextureFeatures f = glcm_features(g);
    CHECK(f[feature_index("energy")] == doctest::Approx(1.0));
    CHECK(f[feature_index("entropy")] == 0.0);
    CHECK(f[feature_index("contrast")] == 0.0);
    CHECK(f[feature_index("correlation")] == 0.0);
    CHECK(f[feature_index("infoCorrelation1")] == 0.0);
    CHECK(f[feature_index("maxProbability")] == doctest::Approx(1.0));
    for (double v : f) CHECK(std::isfinite(v));
  }

  TEST_CASE("quantization bins and clamps") {
    Patch p = random_patch(3, 1, 0, 0);
    p.pixels = {-2000, -1000, -957, -955, 0, 399, 400, 3000, -300};
    const auto lv = quantize(p, GlcmParams{});
    CHECK(lv == std::vector<int>{0, 0, 0, 1, 22, 31, 31, 31, 16});
  }

  TEST_CASE("matches brute-force co-occurrence and textbook statistics on 8x8") {
    std::mt19937 gen(17);
    std::uniform_int_distribution<int> u(0, 7);
    const std::vector<GlcmOffset> offsets = GlcmParams{}.offsets;
    for (int trial = 0; trial < 25; ++trial) {
      std::vector<int> lv(64);
      // Skewed draws so some levels go missing.
      for (auto& v : lv) v = std::min(u(gen), u(gen));
      const Glcm g = glcm_from_levels(lv, 8, 8, 8, offsets);
      const auto ref = oracle::glcm(lv, 8, 8, 8, offsets);
      for (std::size_t k = 0; k < ref.size(); ++k) CHECK(g.p[k] == doctest::Approx(ref[k]).epsilon(1e-12));
      const TextureFeatures f = glcm_features(g);
      const auto h = oracle::haralick(ref, 8);
      for (std::size_t k = 0; k < kGlcmFeatureCount; ++k) {
        INFO(glcm_feature_names()[k]);
        CHECK(f[k] == doctest::Approx(h[k]).epsilon(1e-9).scale(1.0));
      }
    }
  }

  TEST_CASE("matrix sums to one and is symmetric") {
    for (unsigned seed = 0; seed < 10; ++seed) {
      const Glcm g = compute_glcm(random_patch(13, seed, -1000, 400), GlcmParams{});
      double sum = 0;
      for (double v : g.p) sum += v;
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
      for (int i = 0; i < g.levels; ++i)
        for (int j = 0; j < g.levels; ++j) CHECK(g(i, j) == g(j, i));
    }
  }

  TEST_CASE("pooled features do not change under transposition") {
    for (unsigned seed = 0; seed < 5; ++seed) {
      const Patch p = random_patch(9, 100 + seed, -1000, 400);
      Patch t = p;
      for (int y = 0; y < 9; ++y)
        for (int x = 0; x < 9; ++x) t.pixels[static_cast<std::size_t>(x) * 9 + y] = p.pixels[static_cast<std::size_t>(y) * 9 + x];
      const TextureFeatures a = glcm_features(compute_glcm(p, GlcmParams{}));
      const TextureFeatures b = glcm_features(compute_glcm(t, GlcmParams{}));
      for (std::size_t k = 0; k < kGlcmFeatureCount; ++k) CHECK(b[k] == doctest::Approx(a[k]).epsilon(1e-12));
    }
  }

  TEST_CASE("invalid inputs") {
    GlcmParams p;
    p.levels = 1;
    CHECK_THROWS_AS(p.validate(), ConfigError);
    p = {};
    p.huHi = p.huLo;
    CHECK_THROWS_AS(p.validate(), ConfigError);
    const std::vector<int> one{0};
    CHECK_THROWS_AS(glcm_from_levels(one, 1, 1, 2, {{1, 0}}), DataError);
    const std::vector<int> bad{0, 5};
    CHECK_THROWS_AS(glcm_from_levels(bad, 2, 1, 2, {{1, 0}}), DataError);
  }

  TEST_CASE("steering a ramp gives the directional slope") {
    const double a = 3.0, b = -2.0;
    Image2D img(21, 21, 0.7, 0.7);
    for (int y = 0; y < 21; ++y)
      for (int x = 0; x < 21; ++x) img.at(x, y) = a * x * 0.7 + b * y * 0.7;
    const SteerableBasis basis = steerable_basis(img, 1.5);
    for (int k = 0; k < 12; ++k) {
      const double theta = k * std::numbers::pi / 6;
      const Image2D r = steer(basis, theta);
      CHECK(r.at(10, 10) == doctest::Approx(a * std::cos(theta) + b * std::sin(theta)).epsilon(1e-6));
    }
  }

  TEST_CASE("vertical edge responds across, not along") {
    Image2D img(15, 15);
    for (int y = 0; y < 15; ++y)
      for (int x = 8; x < 15; ++x) img.at(x, y) = 100.0;
    const SteerableBasis basis = steerable_basis(img, 1.5);
    CHECK(basis.rx.at(7, 7) > 10.0);
    CHECK(std::abs(basis.ry.at(7, 7)) < 1e-9);
    CHECK(std::abs(steer(basis, std::numbers::pi / 2).at(7, 7)) < 1e-9);
    CHECK(steer(basis, std::numbers::pi).at(7, 7) == doctest::Approx(-basis.rx.at(7, 7)));
  }

  TEST_CASE("steerable feature layout") {
    Patch p = random_patch(9, 8, -900, -100);
    const auto f = steerable_features(p, 1.5);
    REQUIRE(f.size() == 6u * 81u);
    const SteerableBasis basis = steerable_basis(Image2D::from_patch(p), 1.5);
    for (int k = 0; k < kSteerOrientations; ++k) {
      const double theta = k * std::numbers::pi / 6;
      for (std::size_t i = 0; i < 81; ++i)
        CHECK(f[k * 81 + i] == doctest::Approx(std::cos(theta) * basis.rx.data[i] + std::sin(theta) * basis.ry.data[i]));
    }
    Patch c = random_patch(9, 1, -500, -500);
    for (double v : steerable_features(c, 1.5)) CHECK(v == 0.0);
  }
}
