#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "kfem/fespace.hpp"
#include "kfem/geometry.hpp"
#include "kfem/mesh.hpp"
#include "kfem/quadrature.hpp"
#include "kfem/solver.hpp"

namespace kfem {

/// Piecewise-smooth function handle with derivatives up to a declared
/// order. The callback fills the derivative stencil at (x, subdomain) in
/// the layout [u, ux, uy, uxx, uxy, uyy, uxxx, uxxy, uxyy, uyyy].
struct FieldFunction {
  int max_order = 0;
  std::function<void(Vec2, int, double*)> derivs;

  static constexpr int stencil_size(int order) { return (order + 1) * (order + 2) / 2; }

  double value(Vec2 x, int sub) const {
    double buf[10];
    derivs(x, sub, buf);
    return buf[0];
  }

  static FieldFunction from_value(std::function<double(Vec2, int)> f) {
    FieldFunction ff;
    ff.max_order = 0;
    ff.derivs = [f = std::move(f)](Vec2 x, int sub, double* out) { out[0] = f(x, sub); };
    return ff;
  }
};

enum class NormMode { BrokenH, BrokenK, WInf, WeightedWInf };

/// Order/weight/mode selector for broken-norm evaluation. Weighted modes
/// integrate rho^{2(|alpha| - a)} |d^alpha u|^2 per subdomain; plain modes
/// drop rho. Near every singular vertex the quadrature subdivides into
/// geometric dyadic shells; a non-contracting shell sequence is reported
/// as a divergent integral.
struct NormSpec {
  int m = 0;
  double a = 0.0;
  NormMode mode = NormMode::BrokenH;
  int near_v_depth = 48;
  int base_degree = -1;  // -1: auto (2p+4 for FE functions, 10 for handles)

  bool weighted() const { return mode == NormMode::BrokenK || mode == NormMode::WeightedWInf; }
  bool sup_mode() const { return mode == NormMode::WInf || mode == NormMode::WeightedWInf; }
};

struct NormResult {
  double value = 0.0;
  bool divergent = false;

  operator double() const { return value; }
};

namespace detail {

inline double weighted_stencil_sq(const double* d, int m, bool weighted, double rho, double a) {
  static constexpr int order_of[10] = {0, 1, 1, 2, 2, 2, 3, 3, 3, 3};
  double s = 0.0;
  const int n = FieldFunction::stencil_size(m);
  for (int i = 0; i < n; ++i) {
    double w = 1.0;
    if (weighted) w = std::pow(rho, 2.0 * (order_of[i] - a));
    s += w * d[i] * d[i];
  }
  return s;
}

/// Accumulates squared-norm contributions over one triangle, handling the
/// dyadic subdivision toward singular vertices. Returns false on a
/// detected divergence.
template <class Evaluator>
class CellIntegrator {
public:
  CellIntegrator(const NormSpec& spec, const SmoothedDistance& rho,
                 const std::vector<Vec2>& singular, const TriRule& rule, const Evaluator& eval)
      : spec_(spec), rho_(rho), singular_(singular), rule_(rule), eval_(eval) {}

  double total = 0.0;
  double sup = 0.0;

  bool integrate(Vec2 a, Vec2 b, Vec2 c, int sub) {
    bool sa = touches(a), sb = touches(b), sc = touches(c);
    const int count = int(sa) + int(sb) + int(sc);
    if (count == 0) {
      total += plain_cell(a, b, c, sub);
      return true;
    }
    if (count > 1) {  // midpoint split separates the singular vertices
      const Vec2 mab = (a + b) * 0.5, mbc = (b + c) * 0.5, mca = (c + a) * 0.5;
      return integrate(a, mab, mca, sub) && integrate(mab, b, mbc, sub) &&
             integrate(mca, mbc, c, sub) && integrate(mab, mbc, mca, sub);
    }
    Vec2 q = a, u = b, w = c;
    if (sb) q = b, u = c, w = a;
    if (sc) q = c, u = a, w = b;
    return dyadic(q, u, w, sub);
  }

private:
  bool touches(Vec2 p) const {
    for (const auto& q : singular_)
      if (dist(p, q) < 1e-14) return true;
    return false;
  }

  double plain_cell(Vec2 a, Vec2 b, Vec2 c, int sub) {
    const Vec2 e1 = b - a, e2 = c - a;
    const double jac = std::abs(e1.cross(e2));
    double cell = 0.0;
    double stencil[10];
    for (std::size_t k = 0; k < rule_.points.size(); ++k) {
      const Vec2 x = a + e1 * rule_.points[k].x + e2 * rule_.points[k].y;
      eval_(x, sub, stencil);
      const double r = spec_.weighted() ? rho_(x) : 1.0;
      const double v = weighted_stencil_sq(stencil, spec_.m, spec_.weighted(), r, spec_.a);
      if (spec_.sup_mode())
        sup = std::max(sup, std::sqrt(v));
      else
        cell += rule_.weights[k] * jac * v;
    }
    return cell;
  }

  bool dyadic(Vec2 q, Vec2 u, Vec2 w, int sub) {
    std::vector<double> shells;
    double acc = 0.0;
    Vec2 cu = u, cw = w;
    for (int k = 0; k < spec_.near_v_depth; ++k) {
      const Vec2 mu = (q + cu) * 0.5, mw = (q + cw) * 0.5, muw = (cu + cw) * 0.5;
      double shell = plain_cell(mu, cu, muw, sub);
      shell += plain_cell(mw, muw, cw, sub);
      shell += plain_cell(mu, muw, mw, sub);
      shells.push_back(shell);
      acc += shell;
      if (!spec_.sup_mode()) {
        if (shell < 1e-14 * std::max(acc, 1e-300)) break;
        if (diverging(shells)) return false;
      }
      cu = mu;
      cw = mw;
    }
    if (!spec_.sup_mode() && diverging(shells)) return false;
    total += acc + tail(shells);
    return true;
  }

  static bool diverging(const std::vector<double>& shells) {
    if (shells.size() < 8) return false;
    double ratio_sum = 0.0;
    int count = 0;
    for (std::size_t k = shells.size() - 4; k < shells.size(); ++k)
      if (shells[k - 1] > 0) {
        ratio_sum += shells[k] / shells[k - 1];
        ++count;
      }
    return count > 0 && ratio_sum / count >= 0.995;
  }

  static double tail(const std::vector<double>& shells) {
    if (shells.size() < 3) return 0.0;
    const double prev = shells[shells.size() - 2];
    if (prev <= 0.0 || shells.back() <= 0.0) return 0.0;
    const double r = shells.back() / prev;
    if (r >= 0.995) return 0.0;
    return shells.back() * r / (1.0 - r);
  }

  const NormSpec& spec_;
  const SmoothedDistance& rho_;
  const std::vector<Vec2>& singular_;
  const TriRule& rule_;
  const Evaluator& eval_;
};

inline std::vector<Vec2> singular_vertices(const GradedMesh& mesh) {
  std::vector<Vec2> pts;
  for (const auto& [v, kappa] : mesh.grading) pts.push_back(mesh.vertices[v]);
  return pts;
}

}  // namespace detail

/// Broken norm of an analytic / manufactured function handle over a
/// triangulation. Returns the +infinity marker with the divergent flag set
/// when the near-singularity shells fail to contract.
inline NormResult broken_norm(const FieldFunction& u, const GradedMesh& mesh,
                              const NormSpec& spec,
                              const SmoothedDistance& rho = SmoothedDistance{}) {
  if (u.max_order < spec.m)
    throw ValidationError("order", "function handle provides derivatives up to order " +
                                       std::to_string(u.max_order) + " but the norm needs " +
                                       std::to_string(spec.m));
  const TriRule rule = triangle_rule_for_degree(spec.base_degree > 0 ? spec.base_degree : 10);
  const auto singular = detail::singular_vertices(mesh);
  auto eval = [&](Vec2 x, int sub, double* out) { u.derivs(x, sub, out); };
  detail::CellIntegrator<decltype(eval)> cell(spec, rho, singular, rule, eval);
  for (const auto& T : mesh.triangles) {
    if (!cell.integrate(mesh.vertices[T.v[0]], mesh.vertices[T.v[1]], mesh.vertices[T.v[2]],
                        T.subdomain))
      return {std::numeric_limits<double>::infinity(), true};
  }
  return {spec.sup_mode() ? cell.sup : std::sqrt(cell.total), false};
}

/// Broken norm of a finite element coefficient vector. Derivatives are the
/// exact piecewise-polynomial ones; orders above the FE degree are
/// rejected.
inline NormResult broken_norm(const FESpace& space, const Eigen::VectorXd& coeffs,
                              const NormSpec& spec,
                              const SmoothedDistance& rho = SmoothedDistance{}) {
  if (spec.m > space.degree())
    throw ValidationError("order", "norm order " + std::to_string(spec.m) +
                                       " exceeds the FE degree " + std::to_string(space.degree()));
  const auto& mesh = space.mesh();
  const TriRule rule =
      triangle_rule_for_degree(spec.base_degree > 0 ? spec.base_degree : 2 * space.degree() + 4);
  const auto singular = detail::singular_vertices(mesh);
  const int order = std::min(spec.m, 3);

  double total = 0.0, sup = 0.0;
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    const auto& T = mesh.triangles[t];
    const auto emap = space.element_map(static_cast<int>(t));
    auto eval = [&](Vec2 x, int sub, double* out) {
      (void)sub;
      const Eigen::Vector2d xi = emap.Jinv * Eigen::Vector2d(x.x - emap.a.x, x.y - emap.a.y);
      space.eval_derivatives(static_cast<int>(t), emap, {xi(0), xi(1)}, coeffs, order, out);
    };
    detail::CellIntegrator<decltype(eval)> cell(spec, rho, singular, rule, eval);
    if (!cell.integrate(mesh.vertices[T.v[0]], mesh.vertices[T.v[1]], mesh.vertices[T.v[2]],
                        T.subdomain))
      return {std::numeric_limits<double>::infinity(), true};
    total += cell.total;
    sup = std::max(sup, cell.sup);
  }
  return {spec.sup_mode() ? sup : std::sqrt(total), false};
}

/// L2 and broken-H1 errors of a FE function against an exact solution
/// handle (order >= 1), with a high-order rule and exact evaluation of the
/// reference solution.
struct ErrorNorms {
  double l2 = 0.0;
  double h1 = 0.0;  // full broken H1 norm of the error
  double h1_semi = 0.0;
};

inline ErrorNorms compute_error(const FESpace& space, const Eigen::VectorXd& coeffs,
                                const FieldFunction& exact, int quad_degree = -1) {
  if (exact.max_order < 1)
    throw ValidationError("order", "error norms need first derivatives of the exact solution");
  const auto& mesh = space.mesh();
  const int deg = quad_degree > 0 ? quad_degree : 2 * space.degree() + 4;
  const TriRule rule = triangle_rule_for_degree(deg);
  double l2 = 0.0, semi = 0.0;
  double fe[10], ex[10];
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    const auto& T = mesh.triangles[t];
    const auto emap = space.element_map(static_cast<int>(t));
    const double jac = std::abs(emap.detJ);
    for (std::size_t q = 0; q < rule.points.size(); ++q) {
      const Vec2 xi = rule.points[q];
      const Vec2 x = space.to_physical(emap, xi);
      space.eval_derivatives(static_cast<int>(t), emap, xi, coeffs, 1, fe);
      exact.derivs(x, T.subdomain, ex);
      const double w = rule.weights[q] * jac;
      l2 += w * (fe[0] - ex[0]) * (fe[0] - ex[0]);
      semi += w * ((fe[1] - ex[1]) * (fe[1] - ex[1]) + (fe[2] - ex[2]) * (fe[2] - ex[2]));
    }
  }
  ErrorNorms e;
  e.l2 = std::sqrt(l2);
  e.h1_semi = std::sqrt(semi);
  e.h1 = std::sqrt(l2 + semi);
  return e;
}

/// Discrete full H1 norm of a FE coefficient vector via the Gram matrix.
inline double h1_norm(const FESpace& space, const Eigen::VectorXd& coeffs) {
  const Eigen::SparseMatrix<double> G = h1_gram(space);
  return std::sqrt(coeffs.dot(G * coeffs));
}

}  // namespace kfem
