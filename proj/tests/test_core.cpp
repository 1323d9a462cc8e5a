#include <doctest.h>

#include <atomic>
#include <cmath>
#include <limits>
#include <sstream>

#include "tibcad/error.hpp"
#include "tibcad/keyvalue.hpp"
#include "tibcad/parallel.hpp"
#include "tibcad/random.hpp"

using namespace tibcad;

TEST_SUITE("core") {
  TEST_CASE("key-value parsing accepts colon, equals and comments") {
    std::istringstream in("# header\nalpha: 1.5\n\nbeta = two words  \nlist: 1, 2 3\n");
    const KeyValues kv = KeyValues::parse(in);
    CHECK(kv.get_double("alpha") == 1.5);
    CHECK(kv.get("beta") == "two words");
    CHECK(kv.get_ints("list") == std::vector<long long>{1, 2, 3});
    CHECK(kv.get_or("missing", "x") == "x");
    CHECK_THROWS_AS(kv.get("missing"), DataError);
    CHECK_THROWS_AS(kv.get_int("alpha"), DataError);
  }

  TEST_CASE("malformed key-value line is rejected") {
    std::istringstream in("just text\n");
    CHECK_THROWS_AS(KeyValues::parse(in), DataError);
  }

  TEST_CASE("key-value output keeps insertion order and round-trips") {
    KeyValues kv;
    kv.set("z", 0.1);
    kv.set("a", static_cast<long long>(-3));
    kv.set("m", std::string("text"));
    std::ostringstream out;
    kv.write(out);
    CHECK(out.str() == "z: 0.1\na: -3\nm: text\n");
    std::istringstream in(out.str());
    CHECK(KeyValues::parse(in).get_double("z") == 0.1);
  }

  TEST_CASE("format_double round-trips random doubles") {
    std::mt19937_64 gen(3);
    for (int i = 0; i < 1000; ++i) {
      const double v = std::ldexp(static_cast<double>(gen()) / 1e19 - 0.9, static_cast<int>(gen() % 200) - 100);
      CHECK(parse_double(format_double(v), "v") == v);
    }
    CHECK(parse_double(format_double(std::numeric_limits<double>::infinity()), "v") ==
          std::numeric_limits<double>::infinity());
  }

  TEST_CASE("rng is reproducible and in range") {
    Rng a(5), b(5);
    for (int i = 0; i < 100; ++i) {
      const double u = a.uniform();
      CHECK(u == b.uniform());
      CHECK(u >= 0.0);
      CHECK(u < 1.0);
      const auto k = a.uniform_int(-2, 3);
      CHECK(k == b.uniform_int(-2, 3));
      CHECK(k >= -2);
      CHECK(k <= 3);
    }
    CHECK(derive_seed(1, 2) != derive_seed(1, 3));
    CHECK(derive_seed(1, 2) == derive_seed(1, 2));
  }

  TEST_CASE("rng normal has unit moments") {
    Rng r(11);
    double s = 0, s2 = 0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
      const double v = r.normal();
      s += v;
      s2 += v * v;
    }
    CHECK(std::abs(s / n) < 0.01);
    CHECK(std::abs(s2 / n - 1.0) < 0.02);
  }

  TEST_CASE("parallel_for visits each index once and rethrows") {
    std::vector<std::atomic<int>> hits(1000);
    parallel_for(hits.size(), [&](std::size_t i) { hits[i]++; }, 4);
    for (auto& h : hits) CHECK(h.load() == 1);
    CHECK_THROWS_AS(parallel_for(10, [](std::size_t i) {
      if (i == 7) throw DataError("boom");
    }, 3), DataError);
  }

  TEST_CASE("error exit codes") {
    CHECK(ConfigError("x").exit_code() == 2);
    CHECK(DataError("x").exit_code() == 3);
    CHECK(DegenerateError("x").exit_code() == 4);
  }
}
