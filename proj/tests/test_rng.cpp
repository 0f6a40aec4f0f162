#include <cmath>

#include "dcflex/rng.hpp"
#include "doctest.h"

using namespace dcflex;

TEST_SUITE("rng") {

TEST_CASE("same seed, same stream") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.uniform01() == b.uniform01());
  Rng c(43);
  CHECK(Rng(42).uniform01() != c.uniform01());
}

TEST_CASE("uniform bounds and mean") {
  Rng rng(7);
  double sum = 0.0;
  for (int i = 0; i < 20000; ++i) {
    double v = rng.uniform(2.0, 5.0);
    CHECK(v >= 2.0);
    CHECK(v < 5.0);
    sum += v;
  }
  CHECK(sum / 20000 == doctest::Approx(3.5).epsilon(0.01));
}

TEST_CASE("normal moments") {
  Rng rng(11);
  double s1 = 0.0, s2 = 0.0;
  const int N = 50000;
  for (int i = 0; i < N; ++i) {
    double v = rng.normal01();
    s1 += v;
    s2 += v * v;
  }
  CHECK(std::abs(s1 / N) < 0.02);
  CHECK(s2 / N == doctest::Approx(1.0).epsilon(0.03));
}

TEST_CASE("truncated normal stays positive") {
  Rng rng(13);
  for (int i = 0; i < 5000; ++i) CHECK(rng.truncated_normal_pos(0.5, 1.0) > 0.0);
}

}  // TEST_SUITE
