#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <array>
#include <numeric>
#include <vector>

#include "trajclass/rng.hpp"

using namespace trajclass;

TEST_CASE("derived seeds differ by stream and index", "[rng]") {
  CHECK(derive_seed(1, "sim") != derive_seed(1, "split"));
  CHECK(derive_seed(1, "sim", 0) != derive_seed(1, "sim", 1));
  CHECK(derive_seed(1, "sim", 7) == derive_seed(1, "sim", 7));
  CHECK(derive_seed(1, "sim") != derive_seed(2, "sim"));
}

TEST_CASE("same seed gives the same stream", "[rng]") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) REQUIRE(a.next() == b.next());
}

TEST_CASE("uniform_int stays in range and hits both ends", "[rng]") {
  Rng r(3);
  std::array<int, 5> seen{};
  for (int i = 0; i < 10000; ++i) {
    const auto v = r.uniform_int(-2, 2);
    REQUIRE(v >= -2);
    REQUIRE(v <= 2);
    ++seen[static_cast<std::size_t>(v + 2)];
  }
  for (int c : seen) CHECK(c > 1700);
}

TEST_CASE("uniform01 is in [0, 1)", "[rng]") {
  Rng r(9);
  double lo = 1.0, hi = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const double u = r.uniform01();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    lo = std::min(lo, u);
    hi = std::max(hi, u);
  }
  CHECK(lo < 0.01);
  CHECK(hi > 0.99);
}

TEST_CASE("shuffle permutes", "[rng]") {
  Rng r(11);
  std::vector<int> v(50);
  std::iota(v.begin(), v.end(), 0);
  auto w = v;
  r.shuffle(w.begin(), w.end());
  CHECK(w != v);
  std::sort(w.begin(), w.end());
  CHECK(w == v);
}
