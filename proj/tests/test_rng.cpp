#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <vector>

#include "doctest.h"
#include "postbc/parallel.hpp"
#include "postbc/rng.hpp"

using namespace postbc;

TEST_CASE("same seed reproduces the draw sequence") {
  Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("streams with different ids differ") {
  Rng a = Rng::stream(7, 0);
  Rng b = Rng::stream(7, 1);
  int equal = 0;
  for (int i = 0; i < 64; ++i)
    if (a.next_u64() == b.next_u64()) ++equal;
  CHECK(equal == 0);
}

TEST_CASE("uniform lies in [0,1) and has the right mean") {
  Rng rng(3);
  double sum = 0.0;
  for (int i = 0; i < 100000; ++i) {
    double u = rng.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
  }
  CHECK(std::abs(sum / 100000 - 0.5) < 0.005);
}

TEST_CASE("normal has mean 0 and variance 1") {
  Rng rng(4);
  double sum = 0.0, sq = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    double z = rng.normal();
    sum += z;
    sq += z * z;
  }
  CHECK(std::abs(sum / n) < 0.01);
  CHECK(std::abs(sq / n - 1.0) < 0.02);
}

TEST_CASE("categorical matches probabilities") {
  Rng rng(5);
  const double probs[3] = {0.2, 0.5, 0.3};
  int counts[3] = {0, 0, 0};
  const int n = 100000;
  for (int i = 0; i < n; ++i) counts[rng.categorical(probs, 3)]++;
  CHECK(std::abs(counts[0] / double(n) - 0.2) < 0.01);
  CHECK(std::abs(counts[1] / double(n) - 0.5) < 0.01);
  CHECK(std::abs(counts[2] / double(n) - 0.3) < 0.01);
}

TEST_CASE("parallel_for merge is independent of worker count") {
  auto run = [](int workers) {
    std::vector<double> out(500);
    parallel_for(500, workers, [&](std::int64_t i) {
      Rng rng = Rng::stream(99, static_cast<std::uint64_t>(i));
      double acc = 0.0;
      for (int k = 0; k < 10; ++k) acc += rng.normal();
      out[i] = acc;
    });
    return out;
  };
  CHECK(run(1) == run(3));
  CHECK(run(1) == run(8));
}
