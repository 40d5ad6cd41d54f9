#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <memory>
#include <string>
#include <vector>

#include "kfem/assembly.hpp"
#include "kfem/parallel.hpp"
#include "kfem/solver.hpp"

namespace kfem {

/// Raised when the symmetric part of the form fails to be positive
/// definite against the H1 inner product; carries the offending direction.
class PositivityViolation : public MathError {
public:
  PositivityViolation(double r_h, Eigen::VectorXd eigenvector)
      : MathError("not-positive-definite",
                  "discrete form is not positive definite (r_h = " + std::to_string(r_h) + ")"),
        r_h_(r_h),
        eigenvector_(std::move(eigenvector)) {}
  double r_h() const { return r_h_; }
  const Eigen::VectorXd& eigenvector() const { return eigenvector_; }

private:
  double r_h_;
  Eigen::VectorXd eigenvector_;
};

struct PositivityEstimate {
  double r_h = 0.0, R_h = 0.0;
  Eigen::VectorXd min_direction;  // free-DOF vector attaining r_h
};

/// Extreme generalized eigenvalues of the symmetric part of B(y; .,.)
/// against the H1 Gram matrix on the free DOFs: discrete estimates of the
/// coercivity and continuity constants. Dense eigensolve; desk scale.
inline PositivityEstimate estimate_positivity_constants(const CoefficientFamily& fam,
                                                        const std::shared_ptr<const FESpace>& space,
                                                        std::span<const double> y,
                                                        int dense_dof_limit = 3200) {
  if (space->n_free() > dense_dof_limit)
    throw ValidationError("too-large",
                          "positivity certification uses a dense eigensolve; use a coarser mesh (" +
                              std::to_string(space->n_free()) + " free DOFs)");
  const Eigen::SparseMatrix<double> A_full = assemble_matrix(fam, *space, y);
  const Eigen::SparseMatrix<double> A = restrict_to_free(A_full, *space);
  const Eigen::SparseMatrix<double> G = restrict_to_free(h1_gram(*space), *space);
  Eigen::SparseMatrix<double> At = A.transpose();
  const Eigen::MatrixXd S = Eigen::MatrixXd(0.5 * (A + At));
  const Eigen::MatrixXd Gd = Eigen::MatrixXd(G);
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(S, Gd);
  if (es.info() != Eigen::Success)
    throw MathError("eigensolver", "generalized eigensolve failed in positivity estimate");
  PositivityEstimate est;
  const auto& ev = es.eigenvalues();
  est.r_h = ev(0);
  est.R_h = ev(ev.size() - 1);
  est.min_direction = es.eigenvectors().col(0);
  if (est.r_h <= 1e-10 * std::max(1.0, std::abs(est.R_h)))
    throw PositivityViolation(est.r_h, est.min_direction);
  return est;
}

/// r_h across uniform refinements of the given mesh (recorded evidence of
/// the discrete constants' monotone behavior).
inline std::vector<double> positivity_across_levels(const CoefficientFamily& fam,
                                                    const GradedMesh& mesh0, int levels, int degree,
                                                    std::span<const double> y) {
  std::vector<double> r;
  GradedMesh mesh = mesh0;
  for (int l = 0; l <= levels; ++l) {
    auto space = std::make_shared<FESpace>(std::make_shared<GradedMesh>(mesh), degree);
    r.push_back(estimate_positivity_constants(fam, space, y).r_h);
    if (l < levels) mesh = refine(mesh, RefineMode::Uniform);
  }
  return r;
}

namespace detail {

struct AffineDecomposition {
  bool valid = false;
  double diffusion_bound = 0.0;  // ess-inf lambda_min(abar) - sum_j sup |psi_j|
  double c_bound = 0.0;
};

inline AffineDecomposition affine_lower_bound(const CoefficientFamily& fam,
                                              const GradedMesh& mesh) {
  AffineDecomposition out;
  if (fam.n_params == 0 || fam.has_advection()) return out;
  const auto xs = spatial_samples(mesh);
  const std::vector<double> y0(fam.n_params, 0.0);

  auto lam_min = [](double a11, double a12, double a22) {
    const double mean = 0.5 * (a11 + a22);
    const double rad = std::sqrt(0.25 * (a11 - a22) * (a11 - a22) + a12 * a12);
    return mean - rad;
  };
  auto lam_abs_max = [](double a11, double a12, double a22) {
    const double mean = 0.5 * (a11 + a22);
    const double rad = std::sqrt(0.25 * (a11 - a22) * (a11 - a22) + a12 * a12);
    return std::max(std::abs(mean - rad), std::abs(mean + rad));
  };

  double abar_min = std::numeric_limits<double>::max();
  double cbar_min = std::numeric_limits<double>::max();
  for (const auto& [x, sub] : xs) {
    abar_min = std::min(abar_min, lam_min(fam.a11(x, sub, y0), fam.a12(x, sub, y0),
                                          fam.a22(x, sub, y0)));
    cbar_min = std::min(cbar_min, fam.c(x, sub, y0));
  }
  double psi_sum = 0.0, cpsi_sum = 0.0;
  for (int j = 0; j < fam.n_params; ++j) {
    CoefficientFamily d;
    try {
      d = fam.dy(j);
    } catch (const ValidationError&) {
      return out;  // no symbolic form; analytic bound unavailable
    }
    double psi_max = 0.0, cpsi_max = 0.0;
    for (const auto& [x, sub] : xs) {
      psi_max = std::max(psi_max, lam_abs_max(d.a11(x, sub, y0), d.a12(x, sub, y0),
                                              d.a22(x, sub, y0)));
      cpsi_max = std::max(cpsi_max, std::abs(d.c(x, sub, y0)));
    }
    psi_sum += psi_max;
    cpsi_sum += cpsi_max;
  }
  out.valid = true;
  out.diffusion_bound = abar_min - psi_sum;
  out.c_bound = cbar_min - cpsi_sum;
  return out;
}

}  // namespace detail

/// Sweeps the parameter box with the sampling plan, certifying inf r_h and
/// sup R_h. For affine families the analytic coefficient bound
/// min(ess-inf abar - sum ||psi_j||, ess-inf cbar - sum ||c_j||) is
/// recorded and cross-checked. Any sampled positivity failure aborts with
/// the witness parameter.
inline PositivityCertificate verify_uniform_positivity(const CoefficientFamily& fam,
                                                       const std::shared_ptr<const FESpace>& space,
                                                       SamplePlan plan = SamplePlan{}) {
  if (fam.n_params == 0) plan = SamplePlan{SamplePlan::Grid, 1};
  const auto ys = parameter_samples(fam.n_params, plan);

  PositivityCertificate cert;
  cert.method = (plan.kind == SamplePlan::Grid)
                    ? "tensor-grid-" + std::to_string(plan.count)
                    : "quasi-random-" + std::to_string(plan.count);
  cert.r = std::numeric_limits<double>::max();
  cert.R = std::numeric_limits<double>::lowest();

  std::vector<PositivityEstimate> ests(ys.size());
  std::vector<std::string> failures(ys.size());
  parallel_for(ys.size(), [&](std::size_t i) {
    try {
      ests[i] = estimate_positivity_constants(fam, space, ys[i]);
    } catch (const PositivityViolation& v) {
      failures[i] = "r_h = " + std::to_string(v.r_h());
    }
  });
  for (std::size_t i = 0; i < ys.size(); ++i) {
    if (!failures[i].empty()) {
      std::string ystr;
      for (double v : ys[i]) ystr += (ystr.empty() ? "" : ",") + std::to_string(v);
      throw MathError("uniform-positivity-failure",
                      "positivity fails at y = (" + ystr + "): " + failures[i]);
    }
    if (ests[i].r_h < cert.r) {
      cert.r = ests[i].r_h;
      cert.worst_y = ys[i];
    }
    cert.R = std::max(cert.R, ests[i].R_h);
  }

  const EllipticityResult ell = check_strong_ellipticity(fam, space->mesh());
  cert.r_e = ell.r_e;
  cert.R_e = ell.R_e;

  if (fam.affine) {
    const auto bound = detail::affine_lower_bound(fam, space->mesh());
    if (bound.valid) cert.affine_lower_bound = std::min(bound.diffusion_bound, bound.c_bound);
  }
  return cert;
}

}  // namespace kfem
