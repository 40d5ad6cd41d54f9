#pragma once

#include <Eigen/Sparse>
#include <cmath>
#include <memory>
#include <vector>

#include "kfem/coefficients.hpp"
#include "kfem/fespace.hpp"
#include "kfem/parallel.hpp"
#include "kfem/quadrature.hpp"

namespace kfem {

struct AssemblyOptions {
  int quad_degree = -1;      // -1: degree 5 for p <= 2, else 2p + 2
  int edge_quad_points = 4;  // Gauss points per boundary/interface edge
};

namespace detail {

struct BasisTable {
  TriRule rule;
  std::vector<std::vector<double>> val;      // [q][k]
  std::vector<std::vector<Vec2>> ref_grad;   // [q][k]
};

inline BasisTable tabulate(const ReferenceBasis& basis, const TriRule& rule) {
  BasisTable t;
  t.rule = rule;
  const int nq = static_cast<int>(rule.points.size());
  const int nloc = basis.size();
  t.val.assign(nq, std::vector<double>(nloc));
  t.ref_grad.assign(nq, std::vector<Vec2>(nloc));
  std::vector<double> gx(nloc), gy(nloc);
  for (int q = 0; q < nq; ++q) {
    basis.values(rule.points[q], t.val[q].data());
    basis.derivatives(rule.points[q], 1, 0, gx.data());
    basis.derivatives(rule.points[q], 0, 1, gy.data());
    for (int k = 0; k < nloc; ++k) t.ref_grad[q][k] = {gx[k], gy[k]};
  }
  return t;
}

inline int default_quad_degree(int p) { return p <= 2 ? 5 : 2 * p + 2; }

/// Owning triangle and local edge index for every tagged mesh edge; for
/// interface edges the + side triangle is chosen.
inline std::map<EdgeKey, std::pair<int, int>> tagged_edge_elements(const GradedMesh& mesh) {
  std::map<EdgeKey, std::pair<int, int>> out;
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    const auto& T = mesh.triangles[t];
    for (int e = 0; e < 3; ++e) {
      const EdgeKey key(T.v[e], T.v[(e + 1) % 3]);
      auto it = mesh.edges.find(key);
      if (it == mesh.edges.end()) continue;
      const auto& info = it->second;
      if (info.tag == EdgeTag::Interface) {
        if (T.subdomain == info.plus_sub) out[key] = {static_cast<int>(t), e};
      } else if (!out.count(key)) {
        out[key] = {static_cast<int>(t), e};
      }
    }
  }
  return out;
}

}  // namespace detail

/// Galerkin matrix of the bilinear form at parameter y over all DOFs
/// (row = test, column = trial): sum_ij a^{ij} d_j(trial) d_i(test)
/// + (b . grad trial) test + c trial test, integrated subdomain by
/// subdomain so coefficient jumps are never straddled.
inline Eigen::SparseMatrix<double> assemble_matrix(const CoefficientFamily& fam,
                                                   const FESpace& space,
                                                   std::span<const double> y,
                                                   const AssemblyOptions& opts = {}) {
  const auto& mesh = space.mesh();
  const int nloc = space.dofs_per_element();
  const int deg = opts.quad_degree > 0 ? opts.quad_degree
                                       : detail::default_quad_degree(space.degree());
  const detail::BasisTable tab = detail::tabulate(space.basis(), triangle_rule_for_degree(deg));
  const int nq = static_cast<int>(tab.rule.points.size());
  const std::size_t nel = mesh.triangles.size();

  std::vector<std::vector<double>> element_matrices(nel);
  parallel_for(nel, [&](std::size_t t) {
    const auto& T = mesh.triangles[t];
    const auto emap = space.element_map(static_cast<int>(t));
    const double adet = std::abs(emap.detJ);
    std::vector<double> Ke(static_cast<std::size_t>(nloc) * nloc, 0.0);
    std::vector<Vec2> grad(nloc);
    for (int q = 0; q < nq; ++q) {
      const Vec2 x = space.to_physical(emap, tab.rule.points[q]);
      const double w = tab.rule.weights[q] * adet;
      for (int k = 0; k < nloc; ++k) {
        const Vec2 g = tab.ref_grad[q][k];
        grad[k] = {emap.Jinv(0, 0) * g.x + emap.Jinv(1, 0) * g.y,
                   emap.Jinv(0, 1) * g.x + emap.Jinv(1, 1) * g.y};
      }
      const double a11 = fam.a11(x, T.subdomain, y);
      const double a12 = fam.a12(x, T.subdomain, y);
      const double a21 = fam.a12(x, T.subdomain, y);
      const double a22 = fam.a22(x, T.subdomain, y);
      const double b1 = fam.b1(x, T.subdomain, y);
      const double b2 = fam.b2(x, T.subdomain, y);
      const double c = fam.c(x, T.subdomain, y);
      if (!std::isfinite(a11) || !std::isfinite(a12) || !std::isfinite(a22) ||
          !std::isfinite(b1) || !std::isfinite(b2) || !std::isfinite(c))
        throw MathError("coefficient-evaluation",
                        "non-finite coefficient at (" + std::to_string(x.x) + ", " +
                            std::to_string(x.y) + ")");
      if (std::abs(a12 - a21) > 1e-12 * (std::abs(a12) + 1.0))
        throw ValidationError("asymmetric-coefficient", "a12 != a21 beyond tolerance");
      for (int i = 0; i < nloc; ++i) {
        const double vi = tab.val[q][i];
        const Vec2 gi = grad[i];
        for (int j = 0; j < nloc; ++j) {
          const double vj = tab.val[q][j];
          const Vec2 gj = grad[j];
          const double diffusion = (a11 * gj.x + a12 * gj.y) * gi.x +
                                   (a12 * gj.x + a22 * gj.y) * gi.y;
          const double advection = (b1 * gj.x + b2 * gj.y) * vi;
          Ke[static_cast<std::size_t>(i) * nloc + j] += w * (diffusion + advection + c * vj * vi);
        }
      }
    }
    element_matrices[t] = std::move(Ke);
  });

  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(nel * nloc * nloc);
  for (std::size_t t = 0; t < nel; ++t) {
    const auto& dofs = space.element_dofs(static_cast<int>(t));
    const auto& Ke = element_matrices[t];
    for (int i = 0; i < nloc; ++i)
      for (int j = 0; j < nloc; ++j)
        trips.emplace_back(dofs[i], dofs[j], Ke[static_cast<std::size_t>(i) * nloc + j]);
  }
  Eigen::SparseMatrix<double> A(space.n_dofs(), space.n_dofs());
  A.setFromTriplets(trips.begin(), trips.end());
  return A;
}

/// Load vector over all DOFs: volume term, Neumann boundary term, and the
/// interface-jump term integrated against the single-valued trace. The
/// jump data h is the difference of conormal derivatives taken with the
/// outward normal of the + side, which puts the term on the right-hand
/// side with a positive sign.
inline Eigen::VectorXd assemble_load(const SourceData& data, const FESpace& space,
                                     std::span<const double> y,
                                     const AssemblyOptions& opts = {}) {
  const auto& mesh = space.mesh();
  const int nloc = space.dofs_per_element();
  const int deg = opts.quad_degree > 0 ? opts.quad_degree
                                       : detail::default_quad_degree(space.degree());
  const detail::BasisTable tab = detail::tabulate(space.basis(), triangle_rule_for_degree(deg));
  const int nq = static_cast<int>(tab.rule.points.size());
  const std::size_t nel = mesh.triangles.size();

  bool mesh_has_interface = false;
  for (const auto& [key, info] : mesh.edges)
    if (info.tag == EdgeTag::Interface) mesh_has_interface = true;
  if (data.h && !mesh_has_interface)
    throw ValidationError("h-without-interface",
                          "interface data h supplied but the domain has no interface");

  std::vector<std::vector<double>> element_loads(nel);
  parallel_for(nel, [&](std::size_t t) {
    const auto& T = mesh.triangles[t];
    const auto emap = space.element_map(static_cast<int>(t));
    const double adet = std::abs(emap.detJ);
    std::vector<double> Fe(nloc, 0.0);
    for (int q = 0; q < nq; ++q) {
      const Vec2 x = space.to_physical(emap, tab.rule.points[q]);
      const double fv = data.f(x, T.subdomain, y);
      if (!std::isfinite(fv))
        throw MathError("coefficient-evaluation",
                        "non-finite source at (" + std::to_string(x.x) + ", " +
                            std::to_string(x.y) + ")");
      const double w = tab.rule.weights[q] * adet;
      for (int k = 0; k < nloc; ++k) Fe[k] += w * fv * tab.val[q][k];
    }
    element_loads[t] = std::move(Fe);
  });

  Eigen::VectorXd F = Eigen::VectorXd::Zero(space.n_dofs());
  for (std::size_t t = 0; t < nel; ++t) {
    const auto& dofs = space.element_dofs(static_cast<int>(t));
    for (int k = 0; k < nloc; ++k) F(dofs[k]) += element_loads[t][k];
  }

  // facet terms
  if (data.g || data.h) {
    const QuadRule1D edge_rule = gauss_legendre(opts.edge_quad_points);
    const auto owners = detail::tagged_edge_elements(mesh);
    const ReferenceBasis& basis = space.basis();
    std::vector<double> bval(nloc);
    for (const auto& [key, owner] : owners) {
      const auto& info = mesh.edges.at(key);
      const bool is_g = info.tag == EdgeTag::Neumann && data.g.has_value();
      const bool is_h = info.tag == EdgeTag::Interface && data.h.has_value();
      if (!is_g && !is_h) continue;
      const auto [t, le] = owner;
      (void)le;
      const auto& T = mesh.triangles[t];
      const auto emap = space.element_map(t);
      const Vec2 pa = mesh.vertices[info.from], pb = mesh.vertices[info.to];
      const double len = dist(pa, pb);
      for (std::size_t q = 0; q < edge_rule.points.size(); ++q) {
        const double s = 0.5 * (edge_rule.points[q] + 1.0);
        const Vec2 x = pa + (pb - pa) * s;
        const double w = 0.5 * len * edge_rule.weights[q];
        const int sub = is_h ? info.plus_sub : T.subdomain;
        const double val = is_g ? (*data.g)(x, sub, y) : (*data.h)(x, sub, y);
        // trace of the basis: evaluate at the reference preimage
        const Eigen::Vector2d rel(x.x - emap.a.x, x.y - emap.a.y);
        const Eigen::Vector2d xi = emap.Jinv * rel;
        basis.values({xi(0), xi(1)}, bval.data());
        const auto& dofs = space.element_dofs(t);
        for (int k = 0; k < nloc; ++k)
          if (std::abs(bval[k]) > 1e-14) F(dofs[k]) += w * val * bval[k];
      }
    }
  }
  return F;
}

/// Assembled discrete problem at one parameter point. The matrix acts on
/// free DOFs (homogeneous Dirichlet constraints are eliminated).
struct DiscreteSystem {
  std::shared_ptr<const FESpace> space;
  Eigen::SparseMatrix<double> A;       // free x free
  Eigen::VectorXd rhs;                 // free
  std::vector<double> y;
  bool structurally_symmetric = false;
  int quad_degree = 0;

  Eigen::SparseMatrix<double> symmetric_part() const {
    Eigen::SparseMatrix<double> At = A.transpose();
    return 0.5 * (A + At);
  }
};

inline Eigen::SparseMatrix<double> restrict_to_free(const Eigen::SparseMatrix<double>& A,
                                                    const FESpace& space) {
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(A.nonZeros());
  for (int k = 0; k < A.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(A, k); it; ++it) {
      const int fi = space.free_index(static_cast<int>(it.row()));
      const int fj = space.free_index(static_cast<int>(it.col()));
      if (fi >= 0 && fj >= 0) trips.emplace_back(fi, fj, it.value());
    }
  Eigen::SparseMatrix<double> R(space.n_free(), space.n_free());
  R.setFromTriplets(trips.begin(), trips.end());
  return R;
}

inline Eigen::VectorXd restrict_to_free(const Eigen::VectorXd& v, const FESpace& space) {
  Eigen::VectorXd r(space.n_free());
  for (int f = 0; f < space.n_free(); ++f) r(f) = v(space.dof_at_free(f));
  return r;
}

inline Eigen::VectorXd expand_from_free(const Eigen::VectorXd& v, const FESpace& space) {
  Eigen::VectorXd full = Eigen::VectorXd::Zero(space.n_dofs());
  for (int f = 0; f < space.n_free(); ++f) full(space.dof_at_free(f)) = v(f);
  return full;
}

inline DiscreteSystem assemble_system(const CoefficientFamily& fam, const SourceData& data,
                                      const std::shared_ptr<const FESpace>& space,
                                      std::span<const double> y,
                                      const AssemblyOptions& opts = {}) {
  DiscreteSystem sys;
  sys.space = space;
  sys.y.assign(y.begin(), y.end());
  sys.quad_degree = opts.quad_degree > 0 ? opts.quad_degree
                                         : detail::default_quad_degree(space->degree());
  const Eigen::SparseMatrix<double> A_full = assemble_matrix(fam, *space, y, opts);
  const Eigen::VectorXd F_full = assemble_load(data, *space, y, opts);
  sys.A = restrict_to_free(A_full, *space);
  sys.rhs = restrict_to_free(F_full, *space);
  sys.structurally_symmetric = !fam.has_advection();
  return sys;
}

}  // namespace kfem
