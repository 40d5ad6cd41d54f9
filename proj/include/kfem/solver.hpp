#pragma once

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "kfem/assembly.hpp"
#include "kfem/errors.hpp"

namespace kfem {

struct SolveOptions {
  double rtol = 1e-12;         // relative algebraic residual target
  int direct_dof_limit = 20000;
  bool force_iterative = false;
  /// Caller override: accept an indefinite factorization (used by tests and
  /// by derivative solves where positivity was certified upstream).
  bool allow_indefinite = false;
  int max_refinement_rounds = 3;
};

struct DiscreteSolution {
  std::shared_ptr<const FESpace> space;
  Eigen::VectorXd coeffs;  // full DOF vector; Dirichlet entries are exactly 0
  std::vector<double> y;
  double residual = 0.0;
  int iterations = 0;
  std::string method;
  std::map<int, double> ws_coefficients;  // singular vertex -> c_Q (augmented solves)

  double value_at_vertex(int vertex) const { return coeffs(vertex); }
};

namespace detail {

inline double relative_residual(const Eigen::SparseMatrix<double>& A, const Eigen::VectorXd& x,
                                const Eigen::VectorXd& b) {
  const double nb = b.norm();
  if (nb == 0.0) return (A * x).norm();
  return (b - A * x).norm() / nb;
}

template <class Factorization>
inline Eigen::VectorXd refine_solution(const Factorization& fac,
                                       const Eigen::SparseMatrix<double>& A,
                                       const Eigen::VectorXd& b, Eigen::VectorXd x, double rtol,
                                       int rounds, int* used) {
  for (int k = 0; k < rounds; ++k) {
    const Eigen::VectorXd r = b - A * x;
    if (b.norm() > 0 && r.norm() / b.norm() <= rtol) break;
    x += fac.solve(r);
    if (used) ++(*used);
  }
  return x;
}

}  // namespace detail

/// Solves the assembled system. Symmetric problems take the SPD path
/// (Cholesky-type factorization or preconditioned CG above the direct
/// limit) and report indefiniteness as a positivity violation; general
/// problems use sparse LU / BiCGSTAB. A step of iterative refinement
/// drives the relative residual to the 1e-12 contract.
inline DiscreteSolution solve(const DiscreteSystem& sys, const SolveOptions& opts = {}) {
  const auto& space = *sys.space;
  DiscreteSolution sol;
  sol.space = sys.space;
  sol.y = sys.y;

  const int n = static_cast<int>(sys.A.rows());
  if (n == 0) {
    sol.coeffs = Eigen::VectorXd::Zero(space.n_dofs());
    sol.method = "empty";
    return sol;
  }
  if (sys.rhs.norm() == 0.0) {
    sol.coeffs = Eigen::VectorXd::Zero(space.n_dofs());
    sol.method = "zero-data";
    return sol;
  }

  Eigen::VectorXd x_free;
  int refinement_steps = 0;

  const bool direct = !opts.force_iterative && n <= opts.direct_dof_limit;
  if (sys.structurally_symmetric && direct) {
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
    ldlt.compute(sys.A);
    bool usable = ldlt.info() == Eigen::Success;
    if (usable) {
      const Eigen::VectorXd d = ldlt.vectorD();
      const double dmax = d.cwiseAbs().maxCoeff();
      if (d.minCoeff() <= 1e-14 * dmax) usable = false;
    }
    if (!usable) {
      if (!opts.allow_indefinite)
        throw MathError("positivity-violation",
                        "symmetric system is not positive definite (non-positive pivot)");
      Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
      lu.compute(sys.A);
      if (lu.info() != Eigen::Success)
        throw MathError("singular-system", "sparse LU factorization failed");
      x_free = detail::refine_solution(lu, sys.A, sys.rhs, lu.solve(sys.rhs), opts.rtol,
                                       opts.max_refinement_rounds, &refinement_steps);
      sol.method = "sparse-lu";
    } else {
      x_free = detail::refine_solution(ldlt, sys.A, sys.rhs, ldlt.solve(sys.rhs), opts.rtol,
                                       opts.max_refinement_rounds, &refinement_steps);
      sol.method = "ldlt";
    }
  } else if (direct) {
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(sys.A);
    if (lu.info() != Eigen::Success)
      throw MathError("singular-system", "sparse LU factorization failed");
    x_free = detail::refine_solution(lu, sys.A, sys.rhs, lu.solve(sys.rhs), opts.rtol,
                                     opts.max_refinement_rounds, &refinement_steps);
    sol.method = "sparse-lu";
  } else if (sys.structurally_symmetric) {
    Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper,
                             Eigen::IncompleteCholesky<double>>
        cg;
    cg.setTolerance(opts.rtol * 0.1);
    cg.setMaxIterations(20L * n);
    cg.compute(sys.A);
    if (cg.info() != Eigen::Success)
      throw MathError("positivity-violation",
                      "incomplete Cholesky preconditioner failed; system may be indefinite");
    x_free = cg.solve(sys.rhs);
    sol.iterations = static_cast<int>(cg.iterations());
    sol.method = "pcg";
  } else {
    Eigen::BiCGSTAB<Eigen::SparseMatrix<double>, Eigen::IncompleteLUT<double>> bicg;
    bicg.setTolerance(opts.rtol * 0.1);
    bicg.setMaxIterations(20L * n);
    bicg.compute(sys.A);
    x_free = bicg.solve(sys.rhs);
    sol.iterations = static_cast<int>(bicg.iterations());
    sol.method = "bicgstab";
  }

  sol.residual = detail::relative_residual(sys.A, x_free, sys.rhs);
  sol.iterations += refinement_steps;
  if (sol.residual > opts.rtol * 100)
    throw MathError("residual-stagnation",
                    "solver stalled at relative residual " + std::to_string(sol.residual));
  sol.coeffs = expand_from_free(x_free, space);
  return sol;
}

inline DiscreteSolution solve_problem(const CoefficientFamily& fam, const SourceData& data,
                                      const std::shared_ptr<const FESpace>& space,
                                      std::span<const double> y,
                                      const AssemblyOptions& aopts = {},
                                      const SolveOptions& sopts = {}) {
  return solve(assemble_system(fam, data, space, y, aopts), sopts);
}

/// Discrete H1 Gram matrix (stiffness + mass with unit coefficients) over
/// all DOFs; the norm backing the positivity constants.
inline Eigen::SparseMatrix<double> h1_gram(const FESpace& space) {
  CoefficientFamily unit;
  unit.c = ScalarField::constant(1.0);
  return assemble_matrix(unit, space, {});
}

}  // namespace kfem
