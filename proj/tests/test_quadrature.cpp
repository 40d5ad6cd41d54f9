#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "kfem/quadrature.hpp"

using namespace kfem;
using Catch::Approx;

namespace {

double factorial(int n) { return n <= 1 ? 1.0 : n * factorial(n - 1); }

// exact integral of x^a y^b over the reference triangle
double tri_monomial(int a, int b) {
  return factorial(a) * factorial(b) / factorial(a + b + 2);
}

double apply_1d(const QuadRule1D& r, double (*f)(double)) {
  double s = 0;
  for (std::size_t i = 0; i < r.points.size(); ++i) s += r.weights[i] * f(r.points[i]);
  return s;
}

}  // namespace

TEST_CASE("Gauss-Legendre rules", "[quadrature]") {
  for (int n : {1, 2, 4, 8, 16}) {
    const auto r = gauss_legendre(n);
    double wsum = 0;
    for (double w : r.weights) wsum += w;
    REQUIRE(wsum == Approx(2.0).epsilon(1e-14));
    // exactness through degree 2n-1
    for (int k = 0; k <= 2 * n - 1; ++k) {
      double s = 0;
      for (std::size_t i = 0; i < r.points.size(); ++i)
        s += r.weights[i] * std::pow(r.points[i], k);
      const double exact = (k % 2 == 1) ? 0.0 : 2.0 / (k + 1);
      REQUIRE(s == Approx(exact).margin(1e-13));
    }
  }
  REQUIRE(apply_1d(gauss_legendre(12), [](double x) { return std::cos(x); }) ==
          Approx(2 * std::sin(1.0)).epsilon(1e-14));
}

TEST_CASE("Gauss-Jacobi with weight (1-x)", "[quadrature]") {
  for (int n : {1, 2, 5, 9}) {
    const auto r = gauss_jacobi(n, 1.0);
    for (int k = 0; k <= 2 * n - 1; ++k) {
      double s = 0;
      for (std::size_t i = 0; i < r.points.size(); ++i)
        s += r.weights[i] * std::pow(r.points[i], k);
      // int_{-1}^1 (1-x) x^k dx
      const double exact = (k % 2 == 0 ? 2.0 / (k + 1) : 0.0) -
                           ((k + 1) % 2 == 0 ? 2.0 / (k + 2) : 0.0);
      REQUIRE(s == Approx(exact).margin(1e-13));
    }
  }
}

TEST_CASE("Clenshaw-Curtis rules", "[quadrature]") {
  for (int n : {1, 2, 3, 5, 9, 17}) {
    const auto r = clenshaw_curtis(n);
    double wsum = 0;
    for (double w : r.weights) wsum += w;
    REQUIRE(wsum == Approx(2.0).epsilon(1e-13));
    if (n >= 2) {
      REQUIRE(r.points.front() == Approx(-1.0));
      REQUIRE(r.points.back() == Approx(1.0));
    }
    // closed rule of n points integrates degree n-1 exactly (and more)
    for (int k = 0; k <= n - 1; ++k) {
      double s = 0;
      for (std::size_t i = 0; i < r.points.size(); ++i)
        s += r.weights[i] * std::pow(r.points[i], k);
      const double exact = (k % 2 == 1) ? 0.0 : 2.0 / (k + 1);
      REQUIRE(s == Approx(exact).margin(1e-12));
    }
  }
}

TEST_CASE("triangle rules", "[quadrature]") {
  SECTION("7-point rule is exact through degree 5") {
    const auto r = triangle_rule_7pt();
    REQUIRE(r.points.size() == 7);
    for (int a = 0; a <= 5; ++a)
      for (int b = 0; a + b <= 5; ++b) {
        double s = 0;
        for (std::size_t q = 0; q < r.points.size(); ++q)
          s += r.weights[q] * std::pow(r.points[q].x, a) * std::pow(r.points[q].y, b);
        REQUIRE(s == Approx(tri_monomial(a, b)).margin(1e-15));
      }
  }

  SECTION("Duffy rules reach the requested degree") {
    for (int deg : {6, 8, 11}) {
      const auto r = triangle_rule_for_degree(deg);
      REQUIRE(r.degree >= deg);
      for (int a = 0; a <= deg; ++a)
        for (int b = 0; a + b <= deg; ++b) {
          double s = 0;
          for (std::size_t q = 0; q < r.points.size(); ++q)
            s += r.weights[q] * std::pow(r.points[q].x, a) * std::pow(r.points[q].y, b);
          REQUIRE(s == Approx(tri_monomial(a, b)).margin(1e-14));
        }
    }
  }

  SECTION("mapping carries the Jacobian") {
    const auto r = triangle_rule_7pt();
    const auto m = map_rule(r, {1, 1}, {3, 1}, {1, 4});  // area 3
    double area = 0;
    for (double w : m.weights) area += w;
    REQUIRE(area == Approx(3.0).epsilon(1e-14));
  }
}
