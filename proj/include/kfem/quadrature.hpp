#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "kfem/errors.hpp"
#include "kfem/geometry.hpp"

namespace kfem {

/// Nodes and weights on [-1, 1]; weights sum to the measure of the
/// interval under the rule's weight function (2 for Legendre).
struct QuadRule1D {
  std::vector<double> points;
  std::vector<double> weights;
};

namespace detail {

/// Golub-Welsch: eigenvalues of the symmetric tridiagonal Jacobi matrix give
/// the nodes, scaled squared first eigenvector components the weights.
inline QuadRule1D golub_welsch(const Eigen::VectorXd& diag, const Eigen::VectorXd& sub,
                               double mu0) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
  es.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
  if (es.info() != Eigen::Success)
    throw MathError("eigensolver", "Golub-Welsch tridiagonal eigensolve failed");
  const int n = static_cast<int>(diag.size());
  QuadRule1D rule;
  rule.points.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    rule.points[i] = es.eigenvalues()(i);
    const double v0 = es.eigenvectors()(0, i);
    rule.weights[i] = mu0 * v0 * v0;
  }
  return rule;
}

}  // namespace detail

/// n-point Gauss-Legendre rule on [-1, 1] (degree of exactness 2n-1).
inline QuadRule1D gauss_legendre(int n) {
  if (n < 1) throw ValidationError("quadrature-order", "Gauss rule needs n >= 1");
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd sub(n - 1 > 0 ? n - 1 : 0);
  for (int k = 1; k < n; ++k) sub(k - 1) = k / std::sqrt(4.0 * k * k - 1.0);
  return detail::golub_welsch(diag, sub, 2.0);
}

/// n-point Gauss-Jacobi rule on [-1, 1] with weight (1-x)^alpha.
inline QuadRule1D gauss_jacobi(int n, double alpha) {
  if (n < 1) throw ValidationError("quadrature-order", "Gauss rule needs n >= 1");
  const double beta = 0.0;
  Eigen::VectorXd diag(n);
  Eigen::VectorXd sub(n - 1 > 0 ? n - 1 : 0);
  const double ab = alpha + beta;
  for (int k = 0; k < n; ++k) {
    const double den = (2.0 * k + ab) * (2.0 * k + ab + 2.0);
    diag(k) = den != 0.0 ? (beta * beta - alpha * alpha) / den : (beta - alpha) / (ab + 2.0);
  }
  for (int k = 1; k < n; ++k) {
    const double num = 4.0 * k * (k + alpha) * (k + beta) * (k + ab);
    const double den = (2.0 * k + ab) * (2.0 * k + ab) * (2.0 * k + ab + 1.0) * (2.0 * k + ab - 1.0);
    sub(k - 1) = std::sqrt(num / den);
  }
  // mu0 = int_{-1}^{1} (1-x)^alpha dx = 2^(alpha+1) / (alpha+1)  (beta = 0)
  const double mu0 = std::pow(2.0, alpha + 1.0) / (alpha + 1.0);
  return detail::golub_welsch(diag, sub, mu0);
}

/// n-point Clenshaw-Curtis rule on [-1, 1] (closed; endpoints included).
inline QuadRule1D clenshaw_curtis(int n) {
  if (n < 1) throw ValidationError("quadrature-order", "Clenshaw-Curtis needs n >= 1");
  QuadRule1D rule;
  if (n == 1) {
    rule.points = {0.0};
    rule.weights = {2.0};
    return rule;
  }
  const int m = n - 1;
  constexpr double kPi = 3.14159265358979323846;
  rule.points.resize(n);
  rule.weights.resize(n);
  for (int j = 0; j <= m; ++j) {
    rule.points[j] = -std::cos(j * kPi / m);  // ascending order
    const double cj = (j == 0 || j == m) ? 1.0 : 2.0;
    double s = 0.0;
    for (int k = 1; k <= m / 2; ++k) {
      const double bk = (2 * k == m) ? 1.0 : 2.0;
      s += bk / (4.0 * k * k - 1.0) * std::cos(2.0 * k * j * kPi / m);
    }
    rule.weights[j] = (cj / m) * (1.0 - s);
  }
  return rule;
}

/// Quadrature on the reference triangle (0,0)-(1,0)-(0,1); weights sum to
/// its area 1/2.
struct TriRule {
  std::vector<Vec2> points;
  std::vector<double> weights;
  int degree = 0;
};

/// Classical 7-point degree-5 symmetric rule.
inline TriRule triangle_rule_7pt() {
  TriRule r;
  r.degree = 5;
  const double s15 = std::sqrt(15.0);
  const double a1 = (6.0 - s15) / 21.0, a2 = (9.0 + 2.0 * s15) / 21.0;
  const double b1 = (6.0 + s15) / 21.0, b2 = (9.0 - 2.0 * s15) / 21.0;
  const double w0 = 9.0 / 40.0;
  const double wa = (155.0 - s15) / 1200.0;
  const double wb = (155.0 + s15) / 1200.0;
  auto add = [&](double l1, double l2, double w) {
    // barycentric (l1, l2, 1-l1-l2) on the reference triangle
    r.points.push_back({l1, l2});
    r.weights.push_back(0.5 * w);
  };
  add(1.0 / 3.0, 1.0 / 3.0, w0);
  add(a1, a1, wa);
  add(a1, a2, wa);
  add(a2, a1, wa);
  add(b1, b1, wb);
  add(b1, b2, wb);
  add(b2, b1, wb);
  return r;
}

/// Collapsed (Duffy) tensor rule of arbitrary degree: Gauss-Jacobi in the
/// collapsing direction absorbs the area factor, so an n x n grid is exact
/// for total degree 2n-2 at least.
inline TriRule triangle_rule_duffy(int n) {
  const QuadRule1D gj = gauss_jacobi(n, 1.0);  // weight (1-x) on [-1,1]
  const QuadRule1D gl = gauss_legendre(n);
  TriRule r;
  r.degree = 2 * n - 1;
  for (int i = 0; i < n; ++i) {
    const double u = 0.5 * (gj.points[i] + 1.0);   // in [0,1], weight (1-u)
    const double wu = gj.weights[i] * 0.25;        // du scale 1/2, weight scale 1/2
    for (int j = 0; j < n; ++j) {
      const double v = 0.5 * (gl.points[j] + 1.0);
      const double wv = gl.weights[j] * 0.5;
      r.points.push_back({u, v * (1.0 - u)});
      r.weights.push_back(wu * wv);
    }
  }
  return r;
}

/// Rule exact for the requested total polynomial degree.
inline TriRule triangle_rule_for_degree(int degree) {
  if (degree <= 5) return triangle_rule_7pt();
  return triangle_rule_duffy((degree + 3) / 2);
}

/// Maps a reference rule onto the physical triangle (a, b, c).
struct MappedTriRule {
  std::vector<Vec2> points;
  std::vector<double> weights;  // include the Jacobian
};

inline MappedTriRule map_rule(const TriRule& rule, Vec2 a, Vec2 b, Vec2 c) {
  MappedTriRule m;
  const Vec2 e1 = b - a, e2 = c - a;
  const double jac = std::abs(e1.cross(e2));  // = 2 * area
  m.points.reserve(rule.points.size());
  m.weights.reserve(rule.points.size());
  for (std::size_t q = 0; q < rule.points.size(); ++q) {
    m.points.push_back(a + e1 * rule.points[q].x + e2 * rule.points[q].y);
    m.weights.push_back(rule.weights[q] * jac);
  }
  return m;
}

}  // namespace kfem
