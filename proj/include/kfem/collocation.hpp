#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "kfem/coefficients.hpp"
#include "kfem/norms.hpp"
#include "kfem/parallel.hpp"
#include "kfem/quadrature.hpp"
#include "kfem/solver.hpp"

namespace kfem {

/// Full tensor-product collocation grid on U = [-1, 1]^s with per-node
/// weights for the uniform probability measure (weights sum to 1).
class CollocationGrid {
public:
  enum class Family { GaussLegendre, ClenshawCurtis };

  static CollocationGrid tensor(std::vector<int> counts,
                                Family family = Family::GaussLegendre) {
    CollocationGrid g;
    g.counts_ = std::move(counts);
    g.family_ = family;
    for (int n : g.counts_) {
      if (n < 1) throw ValidationError("grid", "node counts must be >= 1");
      QuadRule1D r = family == Family::GaussLegendre ? gauss_legendre(n) : clenshaw_curtis(n);
      for (double& w : r.weights) w *= 0.5;  // uniform probability measure on [-1,1]
      g.nodes1d_.push_back(r.points);
      g.weights1d_.push_back(r.weights);
    }
    g.build_tensor();
    return g;
  }

  int dims() const { return static_cast<int>(counts_.size()); }
  const std::vector<int>& counts() const { return counts_; }
  Family family() const { return family_; }
  std::size_t size() const { return nodes_.size(); }
  const std::vector<std::vector<double>>& nodes() const { return nodes_; }
  const std::vector<double>& weights() const { return weights_; }
  const std::vector<double>& nodes1d(int d) const { return nodes1d_[d]; }

  /// Barycentric weights of dimension d (computed on demand, cached).
  const std::vector<double>& bary(int d) const {
    if (bary_.empty()) {
      bary_.resize(dims());
      for (int k = 0; k < dims(); ++k) {
        const auto& x = nodes1d_[k];
        auto& w = bary_[k];
        w.assign(x.size(), 1.0);
        for (std::size_t i = 0; i < x.size(); ++i)
          for (std::size_t j = 0; j < x.size(); ++j)
            if (i != j) w[i] /= (x[i] - x[j]);
      }
    }
    return bary_[d];
  }

  /// 1D Lagrange basis values at y for dimension d (barycentric form,
  /// exact indicator at the nodes).
  std::vector<double> basis1d(int d, double y) const {
    const auto& x = nodes1d_[d];
    const auto& w = bary(d);
    std::vector<double> l(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (std::abs(y - x[i]) < 1e-14) {
        std::fill(l.begin(), l.end(), 0.0);
        l[i] = 1.0;
        return l;
      }
    }
    double denom = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      l[i] = w[i] / (y - x[i]);
      denom += l[i];
    }
    for (double& v : l) v /= denom;
    return l;
  }

private:
  void build_tensor() {
    const int s = dims();
    if (s == 0) {
      nodes_.push_back({});
      weights_.push_back(1.0);
      return;
    }
    std::vector<int> idx(s, 0);
    for (;;) {
      std::vector<double> y(s);
      double w = 1.0;
      for (int d = 0; d < s; ++d) {
        y[d] = nodes1d_[d][idx[d]];
        w *= weights1d_[d][idx[d]];
      }
      nodes_.push_back(std::move(y));
      weights_.push_back(w);
      int d = 0;
      while (d < s && ++idx[d] == static_cast<int>(nodes1d_[d].size())) idx[d++] = 0;
      if (d == s) break;
    }
  }

  std::vector<int> counts_;
  Family family_ = Family::GaussLegendre;
  std::vector<std::vector<double>> nodes1d_, weights1d_;
  std::vector<std::vector<double>> nodes_;
  std::vector<double> weights_;
  mutable std::vector<std::vector<double>> bary_;
};

/// Tensorized Lagrange interpolant of y -> u_y: one FE solve per grid
/// node, all sharing a single spatial space, evaluated by barycentric
/// interpolation per parameter dimension.
class Surrogate {
public:
  Surrogate(CollocationGrid grid, std::shared_ptr<const FESpace> space,
            Eigen::MatrixXd node_values)
      : grid_(std::move(grid)), space_(std::move(space)), values_(std::move(node_values)) {}

  const CollocationGrid& grid() const { return grid_; }
  const FESpace& space() const { return *space_; }
  const std::shared_ptr<const FESpace>& space_ptr() const { return space_; }
  const Eigen::MatrixXd& node_values() const { return values_; }

  /// dim(S_n) = spatial DOFs times parametric grid size.
  std::size_t dim() const { return static_cast<std::size_t>(values_.rows()) * grid_.size(); }

  Eigen::VectorXd evaluate(std::span<const double> y) const {
    if (static_cast<int>(y.size()) != grid_.dims())
      throw ValidationError("grid", "parameter point has the wrong dimension");
    const int s = grid_.dims();
    if (s == 0) return values_.col(0);
    std::vector<std::vector<double>> l(s);
    for (int d = 0; d < s; ++d) l[d] = grid_.basis1d(d, y[d]);
    Eigen::VectorXd out = Eigen::VectorXd::Zero(values_.rows());
    const auto& counts = grid_.counts();
    std::vector<int> idx(s, 0);
    for (std::size_t k = 0; k < grid_.size(); ++k) {
      double w = 1.0;
      for (int d = 0; d < s; ++d) w *= l[d][idx[d]];
      if (w != 0.0) out += w * values_.col(static_cast<Eigen::Index>(k));
      int d = 0;
      while (d < s && ++idx[d] == counts[d]) idx[d++] = 0;
    }
    return out;
  }

private:
  CollocationGrid grid_;
  std::shared_ptr<const FESpace> space_;
  Eigen::MatrixXd values_;  // n_dofs x grid size
};

/// One solve per collocation node (embarrassingly parallel, gathered in
/// node order). Any node failure aborts with the failing parameter point.
inline Surrogate build_surrogate(const CoefficientFamily& fam, const SourceData& data,
                                 const std::shared_ptr<const FESpace>& space,
                                 const CollocationGrid& grid, const AssemblyOptions& aopts = {},
                                 const SolveOptions& sopts = {}) {
  Eigen::MatrixXd values(space->n_dofs(), grid.size());
  std::vector<std::string> failures(grid.size());
  parallel_for(grid.size(), [&](std::size_t k) {
    try {
      const auto sol = solve_problem(fam, data, space, grid.nodes()[k], aopts, sopts);
      values.col(static_cast<Eigen::Index>(k)) = sol.coeffs;
    } catch (const std::exception& e) {
      failures[k] = e.what();
    }
  });
  for (std::size_t k = 0; k < grid.size(); ++k)
    if (!failures[k].empty()) {
      std::string ystr;
      for (double v : grid.nodes()[k]) ystr += (ystr.empty() ? "" : ",") + std::to_string(v);
      throw MathError("node-solve-failure",
                      "collocation solve failed at y = (" + ystr + "): " + failures[k]);
    }
  return Surrogate(grid, space, std::move(values));
}

/// L2(U; V) error estimate of a surrogate against direct solves, V being
/// the broken H1 norm on the shared space.
struct L2UVEstimate {
  double value = 0.0;
  double stderr_value = 0.0;  // Monte Carlo only
  std::size_t samples = 0;
  bool node_offset_applied = false;
};

struct L2UVSampler {
  enum Kind { MonteCarlo, TensorQuadrature } kind = MonteCarlo;
  int count = 100;       // MC samples or quadrature points per dimension
  std::uint64_t seed = 0;
};

inline L2UVEstimate l2uv_error(const Surrogate& surrogate, const CoefficientFamily& fam,
                               const SourceData& data, const L2UVSampler& sampler,
                               const AssemblyOptions& aopts = {}, const SolveOptions& sopts = {}) {
  const auto& space = surrogate.space_ptr();
  const int s = surrogate.grid().dims();
  const Eigen::SparseMatrix<double> G = restrict_to_free(h1_gram(*space), *space);

  std::vector<std::vector<double>> ys;
  std::vector<double> ws;
  L2UVEstimate est;

  if (sampler.kind == L2UVSampler::MonteCarlo) {
    std::mt19937_64 rng(sampler.seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int k = 0; k < sampler.count; ++k) {
      std::vector<double> y(s);
      for (int d = 0; d < s; ++d) y[d] = u(rng);
      ys.push_back(std::move(y));
      ws.push_back(1.0 / sampler.count);
    }
  } else {
    int n = sampler.count;
    // a quadrature grid that coincides with the surrogate nodes samples
    // only the interpolation zeros; offset by one node
    bool collides = surrogate.grid().family() == CollocationGrid::Family::GaussLegendre;
    for (int d = 0; d < s && collides; ++d)
      if (surrogate.grid().counts()[d] != n) collides = false;
    if (collides && s > 0) {
      n += 1;
      est.node_offset_applied = true;
    }
    const CollocationGrid fine = CollocationGrid::tensor(std::vector<int>(s, n));
    ys = fine.nodes();
    ws = fine.weights();
  }

  std::vector<double> sq(ys.size());
  std::vector<std::string> failures(ys.size());
  parallel_for(ys.size(), [&](std::size_t k) {
    try {
      const auto direct = solve_problem(fam, data, space, ys[k], aopts, sopts);
      const Eigen::VectorXd diff =
          restrict_to_free(Eigen::VectorXd(direct.coeffs - surrogate.evaluate(ys[k])), *space);
      sq[k] = diff.dot(G * diff);
    } catch (const std::exception& e) {
      failures[k] = e.what();
    }
  });
  for (std::size_t k = 0; k < ys.size(); ++k)
    if (!failures[k].empty())
      throw MathError("sample-solve-failure", failures[k]);

  double mean = 0.0;
  for (std::size_t k = 0; k < ys.size(); ++k) mean += ws[k] * sq[k];
  est.value = std::sqrt(std::max(0.0, mean));
  est.samples = ys.size();
  if (sampler.kind == L2UVSampler::MonteCarlo && ys.size() > 1) {
    double var = 0.0;
    for (std::size_t k = 0; k < ys.size(); ++k) var += (sq[k] - mean) * (sq[k] - mean);
    var /= (ys.size() - 1.0) * ys.size();
    // delta method for sqrt of the mean
    est.stderr_value = est.value > 0 ? 0.5 * std::sqrt(var) / est.value : std::sqrt(var);
  }
  return est;
}

}  // namespace kfem
