#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "tibcad/error.hpp"
#include "tibcad/fcseg.hpp"
#include "tibcad/phantom.hpp"
#include "tibcad/shapefeat.hpp"

using namespace tibcad;

namespace {

template <class F>
Image2D sample(int size, double spacing, F f) {
  Image2D img(size, size, spacing, spacing);
  const int c = size / 2;
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) img.at(x, y) = f((x - c) * spacing, (y - c) * spacing);
  return img;
}

template <class F>
Patch patch_from(int n, F f) {
  Patch p;
  p.n = n;
  p.spacing = Spacing{1, 1, 1};
  p.pixels.resize(static_cast<std::size_t>(n) * n);
  p.maskBits.assign(p.pixels.size(), 1);
  const int c = n / 2;
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) p.pixels[static_cast<std::size_t>(y) * n + x] = static_cast<std::int16_t>(f(x - c, y - c));
  return p;
}

std::size_t centre(const HessianField& f) { return static_cast<std::size_t>(f.h / 2) * f.w + f.w / 2; }

PatchGate open_gate(std::size_t n, bool enforce = true) {
  return PatchGate{std::vector<std::uint8_t>(n, 1), EnergyInterval{-1e300, 1e300}, enforce};
}

} // namespace

TEST_SUITE("shapefeat") {
  TEST_CASE("eigenvalues ordered by magnitude") {
    auto [a, b] = ordered_eigenvalues(-5, 0, 2);
    CHECK(a == doctest::Approx(-5));
    CHECK(b == doctest::Approx(2));
    std::tie(a, b) = ordered_eigenvalues(1, 2, 1);
    CHECK(a == doctest::Approx(3));
    CHECK(b == doctest::Approx(-1));
  }

  TEST_CASE("Hessian of quadratics within 5%") {
    std::mt19937 gen(3);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    for (double spacing : {1.0, 0.7}) {
      for (int t = 0; t < 20; ++t) {
        const double a = u(gen), b = u(gen), c = u(gen);
        const Image2D img = sample(31, spacing, [&](double x, double y) { return a * x * x + b * x * y + c * y * y; });
        const HessianField f = hessian_eigen(img, 1.5);
        auto [e1, e2] = ordered_eigenvalues(2 * a, b, 2 * c);
        const double scale = std::max(std::abs(e1), 1.0);
        CHECK(std::abs(f.k1[centre(f)] - e1) <= 0.05 * scale);
        CHECK(std::abs(f.k2[centre(f)] - e2) <= 0.05 * scale);
      }
    }
  }

  TEST_CASE("Gaussian bump matches the analytic smoothed curvature") {
    const double s = 3.0, sigma = 1.5, amp = 1000.0;
    const Image2D img = sample(41, 1.0, [&](double x, double y) { return amp * std::exp(-(x * x + y * y) / (2 * s * s)); });
    const HessianField f = hessian_eigen(img, sigma);
    const double v = s * s + sigma * sigma;
    const double expected = -amp * s * s / (v * v);
    CHECK(f.k1[centre(f)] == doctest::Approx(expected).epsilon(0.05));
    CHECK(f.k2[centre(f)] == doctest::Approx(expected).epsilon(0.05));
  }

  TEST_CASE("Willmore integrand is never negative") {
    std::mt19937 gen(11);
    std::uniform_real_distribution<double> u(-1000.0, 400.0);
    Image2D img(17, 17);
    for (auto& v : img.data) v = u(gen);
    const CurvatureMaps m = curvature_maps(hessian_eigen(img, 1.5));
    for (std::size_t i = 0; i < m.W.size(); ++i) {
      CHECK(m.W[i] >= -1e-9);
      CHECK(m.W[i] == doctest::Approx(m.H[i] * m.H[i] - m.K[i]));
    }
  }

  TEST_CASE("umbilic point: zero energy and the expected feature vector") {
    const Patch p = patch_from(21, [](int x, int y) { return x * x + y * y; });
    const HessianField f = hessian_eigen(p, 1.5);
    const CurvatureMaps m = curvature_maps(f);
    const std::size_t i = centre(f);
    CHECK(f.k1[i] == doctest::Approx(2.0).epsilon(0.02));
    CHECK(m.W[i] == 0.0);
    CHECK(shape_index(f.k1[i], f.k2[i]) == doctest::Approx(1.0));

    // One gated pixel: the centre.
    PatchGate gate = open_gate(f.k1.size());
    Patch one = p;
    std::fill(one.maskBits.begin(), one.maskBits.end(), 0);
    one.maskBits[i] = 1;
    const auto v = shape_vector(one, f, m, gate);
    REQUIRE(v);
    CHECK((*v)[0] == doctest::Approx(0.0).epsilon(1e-6));
    CHECK((*v)[1] == doctest::Approx(2.0).epsilon(0.02));
    CHECK((*v)[2] == doctest::Approx(4.0).epsilon(0.04));
    CHECK((*v)[3] == doctest::Approx(1.0));
    CHECK((*v)[4] == doctest::Approx(1.0).epsilon(1e-3));
    CHECK((*v)[5] == doctest::Approx(0.0).epsilon(1e-6));
    CHECK((*v)[6] == doctest::Approx(0.25).epsilon(0.04));
    CHECK((*v)[7] == doctest::Approx(0.0).epsilon(1e-6));
  }

  TEST_CASE("shape index examples and range") {
    CHECK(shape_index(1, 1) == 1.0);
    CHECK(shape_index(-2, -2) == -1.0);
    CHECK(shape_index(0, 0) == 0.0);
    CHECK(shape_index(1, -1) == doctest::Approx(0.0));
    CHECK(shape_index(2, 0) == doctest::Approx(0.5));
    CHECK(shape_index(-2, 0) == doctest::Approx(-0.5));
    std::mt19937 gen(5);
    std::normal_distribution<double> nd(0, 10);
    for (int t = 0; t < 1000; ++t) {
      const double a = nd(gen), b = nd(gen);
      const double si = shape_index(a, b);
      CHECK((si >= -1.0 && si <= 1.0));
      CHECK(shape_index(-a, -b) == doctest::Approx(-si));
    }
  }

  TEST_CASE("saddle: energy over ten pixels is ten") {
    const Patch p = patch_from(21, [](int x, int y) { return 10 * (x * x - y * y); });
    const HessianField f = hessian_eigen(p, 1.5);
    CurvatureMaps m = curvature_maps(f);
    // Integer rounding would blur the unit curvature, so scale back by hand.
    for (auto& w : m.W) w /= 400.0;
    std::vector<std::uint8_t> region(m.W.size(), 0);
    for (int k = 0; k < 10; ++k) region[static_cast<std::size_t>(8 + k / 5) * 21 + 8 + k % 5] = 1;
    CHECK(willmore_energy(m, region, 1.0) == doctest::Approx(10.0).epsilon(0.02));
    CHECK(willmore_energy(m, region, 0.49) == doctest::Approx(4.9).epsilon(0.02));
    std::vector<std::uint8_t> none(m.W.size(), 0);
    CHECK_THROWS_AS(willmore_energy(m, none, 1.0), DataError);
  }

  TEST_CASE("features are invariant to rotation by 90 degrees and intensity shift") {
    std::mt19937 gen(21);
    std::uniform_int_distribution<int> u(-900, -300);
    const int n = 13;
    Patch p;
    p.n = n;
    p.spacing = Spacing{0.7, 0.7, 5};
    p.pixels.resize(n * n);
    p.maskBits.assign(n * n, 1);
    for (auto& v : p.pixels) v = static_cast<std::int16_t>(u(gen));
    Patch r = p, s = p;
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x) r.pixels[static_cast<std::size_t>(x) * n + (n - 1 - y)] = p.pixels[static_cast<std::size_t>(y) * n + x];
    for (auto& v : s.pixels) v = static_cast<std::int16_t>(v + 250);

    const auto features = [](const Patch& q) {
      const HessianField f = hessian_eigen(q, 1.5);
      return *shape_vector(q, f, curvature_maps(f), open_gate(f.k1.size()));
    };
    const ShapeFeatures a = features(p), b = features(r), c = features(s);
    for (std::size_t k = 0; k < kShapeFeatureCount; ++k) {
      CHECK(b[k] == doctest::Approx(a[k]).epsilon(1e-9));
      CHECK(c[k] == a[k]);
    }
  }

  TEST_CASE("gating: skips, fallbacks and agreement") {
    const Patch p = patch_from(9, [](int x, int y) { return -800 + 30 * x * x - 10 * y * y + 7 * x * y; });
    const HessianField f = hessian_eigen(p, 1.5);
    const CurvatureMaps m = curvature_maps(f);
    const std::size_t n = f.k1.size();

    PatchGate noCandidates{std::vector<std::uint8_t>(n, 0), EnergyInterval{-1e300, 1e300}, true};
    CHECK_FALSE(shape_vector(p, f, m, noCandidates).has_value());

    PatchGate empty{std::vector<std::uint8_t>(n, 1), EnergyInterval{-2, -1}, true};
    CHECK_FALSE(shape_vector(p, f, m, empty).has_value());

    // Gate off with an empty interval falls back to the lung pixels.
    PatchGate off = empty;
    off.enforce = false;
    const auto fallback = shape_vector(p, f, m, off);
    const auto everything = shape_vector(p, f, m, open_gate(n));
    REQUIRE(fallback);
    REQUIRE(everything);
    for (std::size_t k = 0; k < kShapeFeatureCount; ++k) CHECK((*fallback)[k] == (*everything)[k]);

    // Patches that pass give the same values with or without enforcement.
    CHECK(*shape_vector(p, f, m, open_gate(n, false)) == *everything);

    // Lung window empty and gate off: every pixel.
    Patch outside = p;
    std::fill(outside.maskBits.begin(), outside.maskBits.end(), 0);
    const auto all = shape_vector(outside, f, m, off);
    REQUIRE(all);
    CHECK((*all)[1] == doctest::Approx((*everything)[1]));

    PatchGate wrong{std::vector<std::uint8_t>(n + 1, 1), EnergyInterval{}, true};
    CHECK_THROWS_AS(shape_vector(p, f, m, wrong), DataError);
  }

  TEST_CASE("energy interval quantiles") {
    std::vector<double> s;
    for (int i = 0; i <= 100; ++i) s.push_back(100 - i);
    const EnergyInterval e = learn_energy_interval(s);
    CHECK(e.lo == doctest::Approx(5));
    CHECK(e.hi == doctest::Approx(95));
    CHECK(e.contains(5));
    CHECK_FALSE(e.contains(95.5));
    CHECK_THROWS_AS(learn_energy_interval({}), DataError);
    CHECK_THROWS_AS(learn_energy_interval({1.0}, 0.9, 0.1), ConfigError);
  }

  TEST_CASE("bump energy agrees across grid resolutions h and h/2") {
    // Same physical bump and smoothing scale (1.05 mm), sampled twice as densely.
    const auto energy = [](double h, double s) {
      const int n = static_cast<int>(std::lround(24.0 / h)) + 1;
      const Image2D img = sample(n, h, [&](double x, double y) { return 300.0 * std::exp(-(x * x + y * y) / (2 * s * s)); });
      const CurvatureMaps m = curvature_maps(hessian_eigen(img, 1.05 / h));
      std::vector<std::uint8_t> all(m.W.size(), 1);
      return willmore_energy(m, all, h * h);
    };
    for (double s : {1.5, 2.0, 3.0}) CHECK(energy(0.7, s) == doctest::Approx(energy(0.35, s)).epsilon(0.10));
  }

  TEST_CASE("tree-in-bud pixels carry more energy than clear lung") {
    PhantomSpec spec;
    spec.seed = 5;
    const Phantom ph = generate_phantom(spec);
    const Dims d = ph.volume.dims();
    double tibSum = 0, lungSum = 0;
    std::size_t tibN = 0, lungN = 0;
    for (int z = 0; z < d.nz; ++z) {
      Image2D img(d.nx, d.ny, ph.volume.spacing().sx, ph.volume.spacing().sy);
      for (int y = 0; y < d.ny; ++y)
        for (int x = 0; x < d.nx; ++x) img.at(x, y) = ph.volume.at(x, y, z);
      const CurvatureMaps m = curvature_maps(hessian_eigen(img, 1.5));
      for (int y = 0; y < d.ny; ++y)
        for (int x = 0; x < d.nx; ++x) {
          const double w = m.W[static_cast<std::size_t>(y) * d.nx + x];
          if (ph.tibMask.at(x, y, z)) {
            tibSum += w;
            ++tibN;
          } else if (ph.lungMask.at(x, y, z) && ph.volume.at(x, y, z) < -700) {
            lungSum += w;
            ++lungN;
          }
        }
    }
    REQUIRE(tibN > 0);
    REQUIRE(lungN > 0);
    CHECK(tibSum / tibN > 1.5 * lungSum / lungN);
  }

  TEST_CASE("kernel and size errors") {
    CHECK_THROWS_AS(gaussian_kernel(0.0), ConfigError);
    CHECK_THROWS_AS(gaussian_kernel(-1.0), ConfigError);
    CHECK_THROWS_AS(hessian_eigen(Image2D(4, 9), 1.0), ConfigError);
    const Kernel1D g = gaussian_kernel(1.5);
    CHECK(g.radius == 5);
    double sum = 0;
    for (double t : g.taps) sum += t;
    CHECK(sum == doctest::Approx(1.0));
  }
}
