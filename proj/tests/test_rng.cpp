#include <doctest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "crcnet/rng.hpp"

using crcnet::CounterRng;

TEST_CASE("counter rng is a pure function of key and counter") {
  CounterRng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  CHECK(a.at(7) == CounterRng(42).at(7));
  CHECK(CounterRng(42).at(7) != CounterRng(43).at(7));
}

TEST_CASE("substreams are independent of draw position") {
  CounterRng root(9);
  root.next_u64();
  root.next_u64();
  CHECK(root.substream(3).next_u64() == CounterRng(9).substream(3).next_u64());
  CHECK(root.substream(3).next_u64() != root.substream(4).next_u64());
}

TEST_CASE("uniform draws live in [0,1) with the right mean") {
  CounterRng rng(1);
  double sum = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.next_unit();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
  }
  CHECK(std::abs(sum / n - 0.5) < 0.01);
}

TEST_CASE("box-muller normals have unit variance") {
  CounterRng rng(2);
  double sum = 0.0, sum2 = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const auto [z1, z2] = rng.next_normal_pair();
    sum += z1 + z2;
    sum2 += z1 * z1 + z2 * z2;
  }
  CHECK(std::abs(sum / (2 * n)) < 0.02);
  CHECK(std::abs(sum2 / (2 * n) - 1.0) < 0.03);
}

TEST_CASE("exponential draws match the target rate") {
  CounterRng rng(3);
  double sum = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) sum += rng.next_exponential(0.25);
  CHECK(std::abs(sum / n - 4.0) < 0.1);
}

TEST_CASE("bounded draws stay in range and shuffles are seeded") {
  CounterRng rng(4);
  for (int i = 0; i < 1000; ++i) CHECK(rng.next_below(7) < 7);

  std::vector<int> v(20), w(20);
  std::iota(v.begin(), v.end(), 0);
  std::iota(w.begin(), w.end(), 0);
  CounterRng r1(5), r2(5);
  crcnet::shuffle(v, r1);
  crcnet::shuffle(w, r2);
  CHECK(v == w);
  std::vector<int> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  std::vector<int> expect(20);
  std::iota(expect.begin(), expect.end(), 0);
  CHECK(sorted == expect);  // still a permutation
}
