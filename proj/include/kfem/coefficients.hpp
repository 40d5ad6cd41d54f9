#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kfem/errors.hpp"
#include "kfem/expression.hpp"
#include "kfem/geometry.hpp"
#include "kfem/mesh.hpp"
#include "kfem/quadrature.hpp"

namespace kfem {

/// One scalar coefficient of the family: a function of (x, subdomain, y).
/// Expression-backed fields (one expression, or one per subdomain) support
/// exact differentiation in x and y; lambda-backed fields may supply a
/// derivative factory.
class ScalarField {
public:
  using Fn = std::function<double(Vec2, int, std::span<const double>)>;

  ScalarField() : exprs_{expr::Expr()} {}

  static ScalarField constant(double v) {
    ScalarField f;
    f.exprs_ = {expr::Expr(expr::constant(v))};
    return f;
  }

  static ScalarField from_expression(const std::string& src) {
    ScalarField f;
    f.exprs_ = {expr::Expr(src)};
    return f;
  }

  static ScalarField per_subdomain(std::vector<std::string> sources) {
    ScalarField f;
    f.exprs_.clear();
    for (const auto& s : sources) f.exprs_.emplace_back(s);
    return f;
  }

  static ScalarField from_exprs(std::vector<expr::Expr> e) {
    ScalarField f;
    f.exprs_ = std::move(e);
    return f;
  }

  static ScalarField from_function(Fn fn,
                                   std::function<ScalarField(int)> dy_factory = nullptr,
                                   std::function<ScalarField(int)> dx_factory = nullptr) {
    ScalarField f;
    f.exprs_.clear();
    f.fn_ = std::move(fn);
    f.dy_factory_ = std::move(dy_factory);
    f.dx_factory_ = std::move(dx_factory);
    return f;
  }

  double operator()(Vec2 x, int subdomain, std::span<const double> y = {}) const {
    if (!exprs_.empty()) {
      const auto& e = exprs_.size() == 1 ? exprs_[0]
                                         : exprs_.at(static_cast<std::size_t>(subdomain));
      return e(x.x, x.y, y);
    }
    return fn_(x, subdomain, y);
  }

  /// Exact partial derivative in parameter y_j (0-based).
  ScalarField dy(int j) const {
    if (!exprs_.empty()) {
      std::vector<expr::Expr> d;
      for (const auto& e : exprs_) d.push_back(e.derivative(expr::VarKind::Y, j));
      return from_exprs(std::move(d));
    }
    if (dy_factory_) return dy_factory_(j);
    throw ValidationError("not-differentiable",
                          "coefficient has no symbolic form or derivative factory");
  }

  /// Exact partial derivative in spatial variable x_i (0 or 1).
  ScalarField dx(int i) const {
    if (!exprs_.empty()) {
      std::vector<expr::Expr> d;
      for (const auto& e : exprs_) d.push_back(e.derivative(expr::VarKind::X, i));
      return from_exprs(std::move(d));
    }
    if (dx_factory_) return dx_factory_(i);
    throw ValidationError("not-differentiable",
                          "coefficient has no symbolic form or derivative factory");
  }

  bool symbolic() const { return !exprs_.empty(); }

  bool structurally_zero() const {
    if (exprs_.empty()) return false;
    for (const auto& e : exprs_)
      if (!e.is_zero()) return false;
    return true;
  }

  bool parametric() const {
    if (exprs_.empty()) return true;  // unknown; assume yes
    for (const auto& e : exprs_)
      if (e.parametric()) return true;
    return false;
  }

private:
  std::vector<expr::Expr> exprs_;
  Fn fn_;
  std::function<ScalarField(int)> dy_factory_;
  std::function<ScalarField(int)> dx_factory_;
};

/// Parametric smoothness class declared for a family: finitely many
/// bounded y-derivatives, infinitely many, or analytic.
struct SmoothnessClass {
  enum Kind { Finite, Infinite, Analytic } kind = Infinite;
  int k = 0;  // meaningful for Finite

  bool admits(int order) const { return kind != Finite || order <= k; }
  static SmoothnessClass finite(int k) { return {Finite, k}; }
  static SmoothnessClass analytic() { return {Analytic, 0}; }
};

/// The parametric coefficient map y -> A_y = (a^{ij}, b^i, c), piecewise
/// smooth per subdomain with jumps allowed across the interface only.
/// Parameters live in the box U = [-1, 1]^s.
struct CoefficientFamily {
  int n_params = 0;  // s; 0 means non-parametric
  bool affine = false;
  SmoothnessClass k0;
  int smoothness_m = 2;  // declared broken W^{m,inf} order in x

  ScalarField a11 = ScalarField::constant(1.0);
  ScalarField a12 = ScalarField::constant(0.0);
  ScalarField a22 = ScalarField::constant(1.0);
  ScalarField b1 = ScalarField::constant(0.0);
  ScalarField b2 = ScalarField::constant(0.0);
  ScalarField c = ScalarField::constant(0.0);

  static CoefficientFamily laplacian() { return CoefficientFamily{}; }

  bool has_advection() const {
    return !(b1.structurally_zero() && b2.structurally_zero());
  }

  /// The family whose coefficients are the y_j-derivatives of this one.
  CoefficientFamily dy(int j) const {
    CoefficientFamily d = *this;
    d.a11 = a11.dy(j);
    d.a12 = a12.dy(j);
    d.a22 = a22.dy(j);
    d.b1 = b1.dy(j);
    d.b2 = b2.dy(j);
    d.c = c.dy(j);
    return d;
  }
};

/// Problem data (f, g, h): volume source, Neumann data on the Neumann
/// boundary, and the conormal-flux jump on the interface. g and h are only
/// ever evaluated on their carriers.
struct SourceData {
  ScalarField f = ScalarField::constant(0.0);
  std::optional<ScalarField> g;
  std::optional<ScalarField> h;

  SourceData dy(int j) const {
    SourceData d;
    d.f = f.dy(j);
    if (g) d.g = g->dy(j);
    if (h) d.h = h->dy(j);
    return d;
  }
};

// ---------------------------------------------------------------------------
// Sampling plans and spatial sample sets
// ---------------------------------------------------------------------------

struct SamplePlan {
  enum Kind { Grid, QuasiRandom } kind = Grid;
  int count = 3;  // points per dimension (Grid) or total (QuasiRandom)

  static SamplePlan default_for(int s) {
    if (s <= 4) return {Grid, 3};
    return {QuasiRandom, 200};
  }
};

namespace detail {

inline double halton(int index, int base) {
  double f = 1.0, r = 0.0;
  int i = index;
  while (i > 0) {
    f /= base;
    r += f * (i % base);
    i /= base;
  }
  return r;
}

}  // namespace detail

/// Parameter samples in U = [-1,1]^s per the plan; always includes the
/// center point. s = 0 yields the single empty sample.
inline std::vector<std::vector<double>> parameter_samples(int s, const SamplePlan& plan) {
  std::vector<std::vector<double>> out;
  if (s == 0) {
    out.emplace_back();
    return out;
  }
  if (plan.kind == SamplePlan::Grid) {
    const int n = std::max(1, plan.count);
    std::vector<int> idx(s, 0);
    for (;;) {
      std::vector<double> y(s);
      for (int j = 0; j < s; ++j)
        y[j] = n == 1 ? 0.0 : -1.0 + 2.0 * idx[j] / (n - 1);
      out.push_back(std::move(y));
      int j = 0;
      while (j < s && ++idx[j] == n) idx[j++] = 0;
      if (j == s) break;
    }
  } else {
    static const int primes[] = {2, 3, 5, 7, 11, 13, 17, 19};
    for (int i = 0; i < plan.count; ++i) {
      std::vector<double> y(s);
      for (int j = 0; j < s; ++j) y[j] = 2.0 * detail::halton(i + 1, primes[j % 8]) - 1.0;
      out.push_back(std::move(y));
    }
    out.emplace_back(s, 0.0);
  }
  return out;
}

/// Representative spatial sample points: one low-order quadrature set per
/// element, tagged with the element's subdomain.
inline std::vector<std::pair<Vec2, int>> spatial_samples(const GradedMesh& mesh) {
  std::vector<std::pair<Vec2, int>> pts;
  const TriRule rule = triangle_rule_7pt();
  for (const auto& T : mesh.triangles) {
    const Vec2 a = mesh.vertices[T.v[0]], b = mesh.vertices[T.v[1]], c = mesh.vertices[T.v[2]];
    for (const auto& q : rule.points) pts.push_back({a + (b - a) * q.x + (c - a) * q.y, T.subdomain});
  }
  return pts;
}

// ---------------------------------------------------------------------------
// Ellipticity and positivity reports
// ---------------------------------------------------------------------------

struct EllipticityResult {
  double r_e = 0.0, R_e = 0.0;
  Vec2 worst_x;
  std::vector<double> worst_y;
  bool positive() const { return r_e > 0.0; }
};

/// Pointwise strong ellipticity constants: extreme eigenvalues of the 2x2
/// symmetric matrix [a^{ij}] over the sampled (x, y) set. Asymmetric
/// evaluations beyond 1e-12 are rejected.
inline EllipticityResult check_strong_ellipticity(const CoefficientFamily& fam,
                                                  const GradedMesh& mesh,
                                                  const SamplePlan& plan = SamplePlan{}) {
  const auto ys = parameter_samples(fam.n_params, plan);
  const auto xs = spatial_samples(mesh);
  EllipticityResult res;
  res.r_e = std::numeric_limits<double>::max();
  res.R_e = std::numeric_limits<double>::lowest();
  for (const auto& y : ys) {
    for (const auto& [x, sub] : xs) {
      const double a11 = fam.a11(x, sub, y);
      const double a22 = fam.a22(x, sub, y);
      const double a12 = fam.a12(x, sub, y);
      if (!std::isfinite(a11) || !std::isfinite(a12) || !std::isfinite(a22))
        throw MathError("coefficient-evaluation", "non-finite coefficient value");
      const double mean = 0.5 * (a11 + a22);
      const double rad = std::sqrt(0.25 * (a11 - a22) * (a11 - a22) + a12 * a12);
      const double lo = mean - rad, hi = mean + rad;
      if (lo < res.r_e) {
        res.r_e = lo;
        res.worst_x = x;
        res.worst_y = y;
      }
      res.R_e = std::max(res.R_e, hi);
    }
  }
  return res;
}

/// Report for the scalar-equation sufficient conditions: div b = 0 in the
/// volume, b . nu = 0 on the Neumann boundary, c >= 0, and a non-empty
/// Dirichlet boundary.
struct ScalarConditionsReport {
  struct Item {
    std::string name;
    bool pass = true;
    Vec2 witness;
    double value = 0.0;
  };
  Item div_b, flux_b, c_nonneg, dirichlet_nonempty;

  bool all_pass() const {
    return div_b.pass && flux_b.pass && c_nonneg.pass && dirichlet_nonempty.pass;
  }
};

inline ScalarConditionsReport check_scalar_positivity_conditions(
    const CoefficientFamily& fam, const GradedMesh& mesh,
    const SamplePlan& plan = SamplePlan{}) {
  ScalarConditionsReport rep;
  rep.div_b.name = "div(b) = 0 in Omega";
  rep.flux_b.name = "b . nu = 0 on Neumann boundary";
  rep.c_nonneg.name = "c >= 0";
  rep.dirichlet_nonempty.name = "Dirichlet boundary non-empty";

  const auto ys = parameter_samples(fam.n_params, plan);
  const auto xs = spatial_samples(mesh);
  const double tol = 1e-8;

  const bool zero_b = !fam.has_advection();
  if (!zero_b) {
    const ScalarField db1 = fam.b1.dx(0);
    const ScalarField db2 = fam.b2.dx(1);
    for (const auto& y : ys)
      for (const auto& [x, sub] : xs) {
        const double div = db1(x, sub, y) + db2(x, sub, y);
        if (std::abs(div) > tol && rep.div_b.pass) {
          rep.div_b.pass = false;
          rep.div_b.witness = x;
          rep.div_b.value = div;
        }
      }
    for (const auto& [key, info] : mesh.edges) {
      if (info.tag != EdgeTag::Neumann) continue;
      const Vec2 a = mesh.vertices[key.a], b = mesh.vertices[key.b];
      // outward normal: boundary edges appear in the loop direction of the
      // owning subdomain, stored as (from, to)
      const Vec2 d = mesh.vertices[info.to] - mesh.vertices[info.from];
      const Vec2 nu = Vec2{d.y, -d.x} * (1.0 / d.norm());
      int sub = -1;
      for (const auto& T : mesh.triangles)
        for (int e = 0; e < 3; ++e)
          if (EdgeKey(T.v[e], T.v[(e + 1) % 3]) == key) sub = T.subdomain;
      for (const auto& y : ys) {
        const Vec2 mid = (a + b) * 0.5;
        const double fl = fam.b1(mid, sub, y) * nu.x + fam.b2(mid, sub, y) * nu.y;
        if (std::abs(fl) > tol && rep.flux_b.pass) {
          rep.flux_b.pass = false;
          rep.flux_b.witness = mid;
          rep.flux_b.value = fl;
        }
      }
    }
  }

  for (const auto& y : ys)
    for (const auto& [x, sub] : xs) {
      const double cv = fam.c(x, sub, y);
      if (cv < -tol && rep.c_nonneg.pass) {
        rep.c_nonneg.pass = false;
        rep.c_nonneg.witness = x;
        rep.c_nonneg.value = cv;
      }
    }

  bool has_dirichlet = false;
  for (const auto& [key, info] : mesh.edges)
    if (info.tag == EdgeTag::Dirichlet) has_dirichlet = true;
  rep.dirichlet_nonempty.pass = has_dirichlet;
  return rep;
}

/// Certified coercivity/continuity constants of the bilinear form over the
/// sampled parameter set, plus the pointwise ellipticity window.
struct PositivityCertificate {
  double r = 0.0, R = 0.0;     // discrete coercivity / continuity estimates
  double r_e = 0.0, R_e = 0.0; // pointwise ellipticity bounds
  std::vector<double> worst_y; // minimizer of r over the sample set
  std::string method;          // sampling plan description
  std::optional<double> affine_lower_bound;  // analytic bound for affine families
  std::vector<double> r_by_level;            // recorded refinement monotonicity
};

}  // namespace kfem
