#include <doctest.h>

#include <cmath>
#include <vector>

#include "dctrain/kernels.hpp"
#include "dctrain/rng.hpp"

using namespace dctrain;

namespace {

std::vector<double> random_vec(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

}  // namespace

TEST_CASE("parallel matmul matches serial reference for all transpose variants") {
  Rng rng(42);
  const std::size_t n = 17, k = 9, m = 13;
  for (bool ta : {false, true})
    for (bool tb : {false, true}) {
      auto a = random_vec(n * k, rng);
      auto b = random_vec(k * m, rng);
      std::vector<double> c1(n * m), c2(n * m);
      kernels::matmul(a.data(), b.data(), c1.data(), n, k, m, ta, tb);
      kernels::ref::matmul(a.data(), b.data(), c2.data(), n, k, m, ta, tb);
      for (std::size_t i = 0; i < n * m; ++i)
        CHECK(c1[i] == doctest::Approx(c2[i]).epsilon(1e-14));
    }
}

TEST_CASE("parallel kernels are bit-identical across thread counts") {
  Rng rng(7);
  const std::size_t n = 64, k = 32, m = 48;
  auto a = random_vec(n * k, rng);
  auto b = random_vec(k * m, rng);
  int saved = kernels::num_threads();

  kernels::set_num_threads(1);
  std::vector<double> c1(n * m);
  kernels::matmul(a.data(), b.data(), c1.data(), n, k, m, false, false);

  kernels::set_num_threads(4);
  std::vector<double> c4(n * m);
  kernels::matmul(a.data(), b.data(), c4.data(), n, k, m, false, false);

  kernels::set_num_threads(saved);
  CHECK(c1 == c4);
}

TEST_CASE("elementwise and reductions match reference exactly") {
  Rng rng(3);
  auto a = random_vec(10000, rng);
  auto b = random_vec(10000, rng);
  std::vector<double> o1(10000), o2(10000);
  kernels::add(a.data(), b.data(), o1.data(), a.size());
  kernels::ref::add(a.data(), b.data(), o2.data(), a.size());
  CHECK(o1 == o2);
  kernels::mul(a.data(), b.data(), o1.data(), a.size());
  kernels::ref::mul(a.data(), b.data(), o2.data(), a.size());
  CHECK(o1 == o2);
  CHECK(kernels::sum(a.data(), a.size()) == kernels::ref::sum(a.data(), a.size()));

  std::vector<double> cs1(100), cs2(100);
  kernels::col_sum(a.data(), 100, 100, cs1.data());
  kernels::ref::col_sum(a.data(), 100, 100, cs2.data());
  CHECK(cs1 == cs2);
}

TEST_CASE("broadcast variants") {
  std::vector<double> a = {1, 2, 3, 4, 5, 6};
  std::vector<double> b = {10, 20, 30};
  std::vector<double> out(6);
  kernels::add_bcast(a.data(), b.data(), out.data(), 6, 3);
  CHECK(out == std::vector<double>{11, 22, 33, 14, 25, 36});
  kernels::rsub_bcast(a.data(), b.data(), out.data(), 6, 3);
  CHECK(out == std::vector<double>{9, 18, 27, 6, 15, 24});
  double s = 2.0;
  kernels::mul_bcast(a.data(), &s, out.data(), 6, 1);
  CHECK(out == std::vector<double>{2, 4, 6, 8, 10, 12});
}
