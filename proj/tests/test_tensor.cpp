#include <catch2/catch_amalgamated.hpp>

#include "growthgr/rng.hpp"
#include "growthgr/tensor.hpp"

using namespace growthgr;

TEST_CASE("tensor construction validates shape and values") {
  auto t = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
  REQUIRE(t.numel() == 6);
  REQUIRE(t.at(1, 2) == 6.0);

  CHECK_THROWS_AS(Tensor::from({2, 2}, {1, 2, 3}), Error);
  CHECK_THROWS_AS(Tensor::from({2}, {1.0, std::nan("")}), Error);
  CHECK_THROWS_AS(Tensor::from({2}, {1.0, std::numeric_limits<double>::infinity()}), Error);
  CHECK_THROWS_AS(Tensor::zeros({0, 3}), Error);
  CHECK_THROWS_AS(Tensor::zeros({1, 1, 1, 1}), Error);
}

TEST_CASE("matmul identity, zero and hand-computed product") {
  auto a = Tensor::from({3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
  auto eye = Tensor::from({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  auto c = matmul_raw(a, eye);
  REQUIRE(c.v == a.v);

  auto zero = Tensor::zeros({3, 2});
  auto z = matmul_raw(a, zero);
  for (double x : z.v) REQUIRE(x == 0.0);

  auto p = matmul_raw(Tensor::from({2, 2}, {1, 2, 3, 4}), Tensor::from({2, 2}, {5, 6, 7, 8}));
  REQUIRE(p.v == std::vector<double>{19, 22, 43, 50});

  CHECK_THROWS_AS(matmul_raw(Tensor::zeros({2, 3}), Tensor::zeros({2, 3})), Error);
}

TEST_CASE("matmul transpose flags agree with explicit transposition") {
  Rng rng(3);
  auto a = Tensor::zeros({4, 3});
  auto b = Tensor::zeros({4, 5});
  for (double& x : a.v) x = rng.normal();
  for (double& x : b.v) x = rng.normal();
  auto at = Tensor::zeros({3, 4});
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 3; ++j) at.at(j, i) = a.at(i, j);
  auto c1 = matmul_raw(a, b, true, false);
  auto c2 = matmul_raw(at, b, false, false);
  REQUIRE(c1.v == c2.v);
}

TEST_CASE("rng streams are deterministic and separable") {
  Rng a(42), b(42), c(43);
  for (int i = 0; i < 100; ++i) {
    double x = a.uniform();
    REQUIRE(x == b.uniform());
    REQUIRE(x >= 0.0);
    REQUIRE(x < 1.0);
  }
  REQUIRE(a.u64() != c.u64());
  REQUIRE(seed_mix(1, 2) != seed_mix(2, 1));
  REQUIRE(seed_mix(1, 2, 3) == seed_mix(1, 2, 3));
}

TEST_CASE("rng normal has sane moments") {
  Rng rng(7);
  double s = 0, s2 = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    double x = rng.normal();
    s += x;
    s2 += x * x;
  }
  double mean = s / n;
  double var = s2 / n - mean * mean;
  CHECK(std::abs(mean) < 0.01);
  CHECK(std::abs(var - 1.0) < 0.02);
}
