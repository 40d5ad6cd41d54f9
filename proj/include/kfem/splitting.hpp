#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <map>
#include <vector>

#include "kfem/fespace.hpp"
#include "kfem/geometry.hpp"
#include "kfem/norms.hpp"
#include "kfem/solver.hpp"

namespace kfem {

/// C^2 radial cutoffs chi_Q for the W_s augmentation: identically 1 inside
/// r1, identically 0 outside r2, quintic smoothstep between. Radii default
/// to 0.25 / 0.75 of the singular point's cap, so supports are disjoint.
class CutoffSet {
public:
  struct Item {
    int vertex = -1;
    Vec2 center;
    double r1 = 0.0, r2 = 0.0;
  };

  CutoffSet() = default;

  explicit CutoffSet(std::vector<Item> items) : items_(std::move(items)) {
    for (std::size_t i = 0; i < items_.size(); ++i) {
      if (!(items_[i].r1 > 0) || !(items_[i].r2 > items_[i].r1))
        throw ValidationError("cutoff-config", "cutoff radii must satisfy 0 < r1 < r2");
      for (std::size_t j = i + 1; j < items_.size(); ++j)
        if (dist(items_[i].center, items_[j].center) < items_[i].r2 + items_[j].r2)
          throw ValidationError("cutoff-config", "cutoff supports overlap");
    }
  }

  /// One cutoff per V_s point of the domain.
  static CutoffSet for_domain(const DomainSpec& dom) {
    const auto points = classify_singular_points(dom);
    std::vector<Vec2> locs;
    for (const auto& p : points) locs.push_back(p.location);
    const auto rho = SmoothedDistance::from_points(locs);
    std::vector<Item> items;
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (!points[i].in_Vs) continue;
      Item it;
      it.vertex = points[i].vertex;
      it.center = points[i].location;
      it.r1 = 0.25 * rho.caps()[i];
      it.r2 = 0.75 * rho.caps()[i];
      items.push_back(it);
    }
    return CutoffSet(std::move(items));
  }

  const std::vector<Item>& items() const { return items_; }
  bool empty() const { return items_.empty(); }
  std::size_t size() const { return items_.size(); }

  /// Quintic smoothstep: s(t) = 1 - (10 t^3 - 15 t^4 + 6 t^5) on [0, 1].
  static void smoothstep(double t, double& s, double& ds, double& dds) {
    if (t <= 0) {
      s = 1;
      ds = dds = 0;
      return;
    }
    if (t >= 1) {
      s = ds = dds = 0;
      return;
    }
    const double t2 = t * t, t3 = t2 * t;
    s = 1.0 - (10 * t3 - 15 * t3 * t + 6 * t3 * t2);
    ds = -(30 * t2 - 60 * t3 + 30 * t2 * t2);
    dds = -(60 * t - 180 * t2 + 120 * t3);
  }

  double value(std::size_t i, Vec2 x) const {
    const auto& it = items_[i];
    const double r = dist(x, it.center);
    double s, ds, dds;
    smoothstep((r - it.r1) / (it.r2 - it.r1), s, ds, dds);
    return s;
  }

  /// Analytic field with two derivative orders (enough to apply a
  /// second-order operator to chi_Q when manufacturing forcings).
  FieldFunction field(std::size_t i, double scale = 1.0) const {
    const Item it = items_[i];
    FieldFunction ff;
    ff.max_order = 2;
    ff.derivs = [it, scale](Vec2 x, int, double* out) {
      const double dx = x.x - it.center.x, dy = x.y - it.center.y;
      const double r = std::sqrt(dx * dx + dy * dy);
      const double w = it.r2 - it.r1;
      if (r <= it.r1 || r >= it.r2) {
        out[0] = (r <= it.r1) ? scale : 0.0;
        out[1] = out[2] = out[3] = out[4] = out[5] = 0.0;
        return;
      }
      double s, ds, dds;
      smoothstep((r - it.r1) / w, s, ds, dds);
      const double cp = scale * ds / w;         // chi'(r)
      const double cpp = scale * dds / (w * w); // chi''(r)
      const double nx = dx / r, ny = dy / r;
      out[0] = scale * s;
      out[1] = cp * nx;
      out[2] = cp * ny;
      out[3] = cpp * nx * nx + cp * (1 - nx * nx) / r;
      out[4] = cpp * nx * ny - cp * nx * ny / r;
      out[5] = cpp * ny * ny + cp * (1 - ny * ny) / r;
    };
    return ff;
  }

  /// FE interpolant of chi_Q (a member of V_h, zero off the support).
  Eigen::VectorXd interpolant(std::size_t i, const FESpace& space) const {
    return space.interpolate([&](Vec2 x) { return value(i, x); });
  }

private:
  std::vector<Item> items_;
};

/// The augmented solve: since the cutoffs are FE interpolants the linear
/// system is unchanged; the operation extracts c_Q = u_h(Q) per V_s vertex
/// and attaches them to the solution.
inline DiscreteSolution solve_augmented(const CoefficientFamily& fam, const SourceData& data,
                                        const std::shared_ptr<const FESpace>& space,
                                        std::span<const double> y, const CutoffSet& cutoffs,
                                        const AssemblyOptions& aopts = {},
                                        const SolveOptions& sopts = {}) {
  DiscreteSolution sol = solve_problem(fam, data, space, y, aopts, sopts);
  for (const auto& it : cutoffs.items()) {
    if (it.vertex < 0 || it.vertex >= static_cast<int>(space->mesh().vertices.size()))
      throw ValidationError("cutoff-config", "cutoff vertex is not a mesh vertex");
    sol.ws_coefficients[it.vertex] = sol.coeffs(space->vertex_dof(it.vertex));
  }
  return sol;
}

/// u = u_r + u_s decomposition: c_Q = u(Q), u_s = sum c_Q chi_Q (FE
/// interpolants), u_r = u - u_s, plus the norm table entries of the shift
/// estimate's left-hand side.
struct SplittingResult {
  std::map<int, double> c;      // vertex -> c_Q
  Eigen::VectorXd u_regular;    // u_r coefficients
  Eigen::VectorXd u_singular;   // u_s coefficients
  NormResult u_r_norm;          // broken K^{m+1}_{a+1} (or H^{m+1}) of u_r
  double u_s_l2 = 0.0;
};

inline SplittingResult split_solution(const FESpace& space, const Eigen::VectorXd& coeffs,
                                      const CutoffSet& cutoffs, int m, double a,
                                      const SmoothedDistance& rho, bool weighted = true) {
  SplittingResult res;
  res.u_singular = Eigen::VectorXd::Zero(space.n_dofs());
  for (std::size_t i = 0; i < cutoffs.size(); ++i) {
    const auto& it = cutoffs.items()[i];
    if (it.vertex < 0 || it.vertex >= static_cast<int>(space.mesh().vertices.size()))
      throw ValidationError("missing-nodal-value", "cutoff vertex has no nodal value");
    const double cq = coeffs(space.vertex_dof(it.vertex));
    res.c[it.vertex] = cq;
    res.u_singular += cq * cutoffs.interpolant(i, space);
  }
  res.u_regular = coeffs - res.u_singular;

  NormSpec spec;
  spec.m = m + 1;
  spec.a = a + 1.0;
  spec.mode = weighted ? NormMode::BrokenK : NormMode::BrokenH;
  res.u_r_norm = broken_norm(space, res.u_regular, spec, rho);

  NormSpec l2;
  l2.m = 0;
  l2.mode = NormMode::BrokenH;
  res.u_s_l2 = broken_norm(space, res.u_singular, l2, rho).value;
  return res;
}

}  // namespace kfem
