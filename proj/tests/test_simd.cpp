#include <cmath>
#include <random>

#include "doctest.h"
#include "senserate/simd/kernels.hpp"

using namespace senserate::simd;

namespace {

long double ref_dot(const std::vector<double>& a, const std::vector<double>& b) {
  long double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<long double>(a[i]) * b[i];
  return s;
}

}  // namespace

TEST_CASE("scalar comes first and every variant is listed once") {
  const auto ks = available_kernels();
  REQUIRE_FALSE(ks.empty());
  CHECK(ks[0]->name == scalar_kernels().name);
  for (std::size_t i = 1; i < ks.size(); ++i) CHECK(ks[i]->name != ks[0]->name);
}

TEST_CASE("every variant agrees with a long double reference") {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> g;
  for (const auto* k : available_kernels()) {
    INFO(k->name);
    // Lengths around the vector width, including tails.
    for (std::size_t n : {0, 1, 2, 3, 4, 5, 7, 8, 9, 15, 16, 17, 31, 64, 384, 1001}) {
      std::vector<double> a(n), b(n);
      for (auto& x : a) x = g(rng);
      for (auto& x : b) x = g(rng);
      long double dot = 0, na = 0, nb = 0, d2 = 0, l1 = 0;
      for (std::size_t i = 0; i < n; ++i) {
        dot += static_cast<long double>(a[i]) * b[i];
        na += static_cast<long double>(a[i]) * a[i];
        nb += static_cast<long double>(b[i]) * b[i];
        const long double d = static_cast<long double>(a[i]) - b[i];
        d2 += d * d;
        l1 += std::abs(d);
      }
      const double scale = std::sqrt(static_cast<double>(na * nb)) + 1.0;
      const auto m = k->moments(a.data(), b.data(), n);
      CHECK(std::abs(k->dot(a.data(), b.data(), n) - static_cast<double>(ref_dot(a, b))) <=
            1e-12 * scale);
      CHECK(std::abs(m.dot - static_cast<double>(dot)) <= 1e-12 * scale);
      CHECK(std::abs(m.norm_a_sq - static_cast<double>(na)) <= 1e-12 * (na + 1));
      CHECK(std::abs(m.norm_b_sq - static_cast<double>(nb)) <= 1e-12 * (nb + 1));
      CHECK(std::abs(m.dist_sq - static_cast<double>(d2)) <= 1e-12 * (d2 + 1));
      CHECK(std::abs(m.dist_l1 - static_cast<double>(l1)) <= 1e-12 * (l1 + 1));
    }
  }
}

TEST_CASE("variants match scalar closely") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1, 1);
  const auto& s = scalar_kernels();
  for (const auto* k : available_kernels()) {
    for (int t = 0; t < 100; ++t) {
      std::vector<double> a(1 + t * 7), b(a.size());
      for (auto& x : a) x = u(rng);
      for (auto& x : b) x = u(rng);
      const auto ms = s.moments(a.data(), b.data(), a.size());
      const auto mk = k->moments(a.data(), b.data(), a.size());
      CHECK(mk.dot == doctest::Approx(ms.dot).epsilon(1e-12).scale(1.0));
      CHECK(mk.dist_sq == doctest::Approx(ms.dist_sq).epsilon(1e-12));
      CHECK(mk.dist_l1 == doctest::Approx(ms.dist_l1).epsilon(1e-12));
    }
  }
}

TEST_CASE("span helpers reject length mismatch") {
  std::vector<double> a{1, 2, 3};
  std::vector<double> b{1, 2};
  CHECK_THROWS(dot(a, b));
  CHECK_THROWS(moments(a, b));
  CHECK(dot(a, a) == 14.0);
}
