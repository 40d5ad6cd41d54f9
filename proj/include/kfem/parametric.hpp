#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <map>
#include <memory>
#include <vector>

#include "kfem/coefficients.hpp"
#include "kfem/collocation.hpp"
#include "kfem/norms.hpp"
#include "kfem/solver.hpp"
#include "kfem/splitting.hpp"

namespace kfem {

/// Multi-index over the parameter dimensions.
using MultiIndex = std::vector<int>;

namespace detail {

inline int order_of(const MultiIndex& a) {
  int s = 0;
  for (int v : a) s += v;
  return s;
}

/// All beta with 0 <= beta <= alpha componentwise.
inline std::vector<MultiIndex> sub_indices(const MultiIndex& alpha) {
  std::vector<MultiIndex> out{MultiIndex(alpha.size(), 0)};
  for (std::size_t d = 0; d < alpha.size(); ++d) {
    std::vector<MultiIndex> next;
    for (const auto& b : out)
      for (int k = 0; k <= alpha[d]; ++k) {
        MultiIndex c = b;
        c[d] = k;
        next.push_back(std::move(c));
      }
    out = std::move(next);
  }
  return out;
}

inline double binomial(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r *= static_cast<double>(n - k + i) / i;
  return r;
}

inline double multi_binomial(const MultiIndex& a, const MultiIndex& b) {
  double r = 1.0;
  for (std::size_t d = 0; d < a.size(); ++d) r *= binomial(a[d], b[d]);
  return r;
}

inline CoefficientFamily family_derivative(const CoefficientFamily& fam, const MultiIndex& beta) {
  CoefficientFamily d = fam;
  for (std::size_t j = 0; j < beta.size(); ++j)
    for (int k = 0; k < beta[j]; ++k) d = d.dy(static_cast<int>(j));
  return d;
}

inline SourceData data_derivative(const SourceData& data, const MultiIndex& beta) {
  SourceData d = data;
  for (std::size_t j = 0; j < beta.size(); ++j)
    for (int k = 0; k < beta[j]; ++k) d = d.dy(static_cast<int>(j));
  return d;
}

}  // namespace detail

struct ParametricDerivativeResult {
  MultiIndex alpha;
  Eigen::VectorXd vector;  // full DOF coefficients of d^alpha u at y0
  double h1 = 0.0, l2 = 0.0;
};

/// Directional parametric derivatives at a base point by the recursive
/// Leibniz solve P(y0) u^(alpha) = d^alpha f - sum_{0<beta<=alpha}
/// C(alpha,beta) P^(beta) u^(alpha-beta). Coefficient derivatives come
/// from the symbolic expression backing (affine families terminate after
/// first order). The declared smoothness class bounds |alpha|.
class ParametricDerivatives {
public:
  ParametricDerivatives(const CoefficientFamily& fam, const SourceData& data,
                        std::shared_ptr<const FESpace> space, std::vector<double> y0,
                        AssemblyOptions aopts = {})
      : fam_(fam), data_(data), space_(std::move(space)), y0_(std::move(y0)), aopts_(aopts) {
    base_matrix_ = restrict_to_free(assemble_matrix(fam_, *space_, y0_, aopts_), *space_);
    base_solver_.compute(base_matrix_);
    if (base_solver_.info() != Eigen::Success)
      throw MathError("singular-system", "factorization failed at the base parameter point");
  }

  const Eigen::VectorXd& solution() { return derivative(MultiIndex(y0_.size(), 0)); }

  /// Full-DOF coefficient vector of d^alpha u at y0 (memoized).
  const Eigen::VectorXd& derivative(const MultiIndex& alpha) {
    if (static_cast<int>(alpha.size()) != static_cast<int>(y0_.size()))
      throw ValidationError("parameter", "multi-index dimension mismatch");
    if (!fam_.k0.admits(detail::order_of(alpha)))
      throw ValidationError("smoothness-class",
                            "requested derivative order exceeds the declared class k0");
    auto it = cache_.find(alpha);
    if (it != cache_.end()) return it->second;

    Eigen::VectorXd rhs_free;
    if (detail::order_of(alpha) == 0) {
      rhs_free = restrict_to_free(assemble_load(data_, *space_, y0_, aopts_), *space_);
    } else {
      // d^alpha of the data minus the Leibniz coupling terms
      rhs_free = restrict_to_free(
          assemble_load(detail::data_derivative(data_, alpha), *space_, y0_, aopts_), *space_);
      for (const auto& beta : detail::sub_indices(alpha)) {
        if (detail::order_of(beta) == 0) continue;
        const CoefficientFamily dfam = detail::family_derivative(fam_, beta);
        // structurally vanishing derivative families contribute nothing
        if (dfam.a11.structurally_zero() && dfam.a12.structurally_zero() &&
            dfam.a22.structurally_zero() && dfam.b1.structurally_zero() &&
            dfam.b2.structurally_zero() && dfam.c.structurally_zero())
          continue;
        MultiIndex rest(alpha.size());
        for (std::size_t d = 0; d < alpha.size(); ++d) rest[d] = alpha[d] - beta[d];
        const Eigen::VectorXd& lower = derivative(rest);
        const Eigen::SparseMatrix<double> Ab =
            restrict_to_free(assemble_matrix(dfam, *space_, y0_, aopts_), *space_);
        rhs_free -= detail::multi_binomial(alpha, beta) *
                    (Ab * restrict_to_free(lower, *space_));
      }
    }
    Eigen::VectorXd x = base_solver_.solve(rhs_free);
    // one refinement round keeps the residual at the solver contract
    x += base_solver_.solve(rhs_free - base_matrix_ * x);
    auto [pos, inserted] = cache_.emplace(alpha, expand_from_free(x, *space_));
    return pos->second;
  }

  ParametricDerivativeResult result(const MultiIndex& alpha) {
    ParametricDerivativeResult r;
    r.alpha = alpha;
    r.vector = derivative(alpha);
    NormSpec l2;
    r.l2 = broken_norm(*space_, r.vector, l2).value;
    r.h1 = h1_norm(*space_, r.vector);
    return r;
  }

  /// Central finite-difference cross-check of a first derivative.
  double fd_check(int j, double step = 1e-4) {
    std::vector<double> yp = y0_, ym = y0_;
    yp[j] += step;
    ym[j] -= step;
    const auto up = solve_problem(fam_, data_, space_, yp, aopts_);
    const auto um = solve_problem(fam_, data_, space_, ym, aopts_);
    const Eigen::VectorXd fd = (up.coeffs - um.coeffs) / (2 * step);
    MultiIndex alpha(y0_.size(), 0);
    alpha[j] = 1;
    const Eigen::VectorXd& an = derivative(alpha);
    const double denom = h1_norm(*space_, an);
    if (denom == 0.0) return h1_norm(*space_, fd);
    return h1_norm(*space_, Eigen::VectorXd(fd - an)) / denom;
  }

private:
  CoefficientFamily fam_;
  SourceData data_;
  std::shared_ptr<const FESpace> space_;
  std::vector<double> y0_;
  AssemblyOptions aopts_;
  Eigen::SparseMatrix<double> base_matrix_;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> base_solver_;
  std::map<MultiIndex, Eigen::VectorXd> cache_;
};

// ---------------------------------------------------------------------------
// Uniform-in-y shift ratio scan
// ---------------------------------------------------------------------------

struct UniformBoundSample {
  std::vector<double> y;
  double ratio = 0.0;
};

struct UniformBoundReport {
  std::vector<UniformBoundSample> samples;
  double min_ratio = 0.0, max_ratio = 0.0;
  double max_over_min = 0.0;
  /// Pearson correlation between the ratio and the sample's proximity to
  /// the boundary of U (max_j |y_j|); a strong positive trend flags a
  /// bound degrading toward the boundary.
  double boundary_correlation = 0.0;
  bool uniform = false;
};

/// Shift ratios (as in the shift probe, single level) across a parameter
/// sample set: witnesses Theorem-style uniformity when the ratios stay
/// within a factor 3 and show no boundary-approach trend.
template <class RatioFn>  // double(std::span<const double> y)
UniformBoundReport uniform_bound_scan_impl(int s, const SamplePlan& plan, RatioFn&& ratio_at) {
  const auto ys = parameter_samples(s, plan);
  UniformBoundReport rep;
  rep.samples.resize(ys.size());
  parallel_for(ys.size(), [&](std::size_t i) {
    rep.samples[i].y = ys[i];
    rep.samples[i].ratio = ratio_at(std::span<const double>(ys[i]));
  });
  rep.min_ratio = std::numeric_limits<double>::max();
  rep.max_ratio = 0.0;
  for (const auto& smp : rep.samples) {
    rep.min_ratio = std::min(rep.min_ratio, smp.ratio);
    rep.max_ratio = std::max(rep.max_ratio, smp.ratio);
  }
  rep.max_over_min = rep.min_ratio > 0 ? rep.max_ratio / rep.min_ratio
                                       : std::numeric_limits<double>::infinity();

  // trend test against boundary proximity
  double mx = 0, my = 0;
  for (const auto& smp : rep.samples) {
    double prox = 0;
    for (double v : smp.y) prox = std::max(prox, std::abs(v));
    mx += prox;
    my += smp.ratio;
  }
  mx /= rep.samples.size();
  my /= rep.samples.size();
  double sxy = 0, sxx = 0, syy = 0;
  for (const auto& smp : rep.samples) {
    double prox = 0;
    for (double v : smp.y) prox = std::max(prox, std::abs(v));
    sxy += (prox - mx) * (smp.ratio - my);
    sxx += (prox - mx) * (prox - mx);
    syy += (smp.ratio - my) * (smp.ratio - my);
  }
  rep.boundary_correlation = (sxx > 0 && syy > 0) ? sxy / std::sqrt(sxx * syy) : 0.0;
  rep.uniform = rep.max_over_min <= 3.0 &&
                !(rep.boundary_correlation > 0.9 && rep.max_over_min > 2.0);
  return rep;
}

}  // namespace kfem
