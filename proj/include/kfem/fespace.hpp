#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <map>
#include <memory>
#include <vector>

#include "kfem/errors.hpp"
#include "kfem/mesh.hpp"

namespace kfem {

/// Nodal Lagrange basis on the reference triangle (0,0)-(1,0)-(0,1) with
/// the lattice nodes (i/p, j/p). Basis polynomials are stored as monomial
/// coefficients, so derivatives of any order are exact.
class ReferenceBasis {
public:
  explicit ReferenceBasis(int degree) : p_(degree) {
    if (degree < 1 || degree > 6)
      throw ValidationError("parameter", "polynomial degree must be in [1, 6]");
    // monomials xi^a eta^b, a+b <= p
    for (int a = 0; a <= p_; ++a)
      for (int b = 0; b <= p_ - a; ++b) monos_.push_back({a, b});
    // nodes: vertices, then edge nodes per local edge, then interior
    nodes_.push_back({0.0, 0.0});
    nodes_.push_back({1.0, 0.0});
    nodes_.push_back({0.0, 1.0});
    const double h = 1.0 / p_;
    for (int k = 1; k < p_; ++k) nodes_.push_back({k * h, 0.0});            // edge 0: v0->v1
    for (int k = 1; k < p_; ++k) nodes_.push_back({(p_ - k) * h, k * h});   // edge 1: v1->v2
    for (int k = 1; k < p_; ++k) nodes_.push_back({0.0, (p_ - k) * h});     // edge 2: v2->v0
    for (int a = 1; a < p_; ++a)
      for (int b = 1; a + b < p_; ++b) nodes_.push_back({a * h, b * h});
    const int n = size();
    Eigen::MatrixXd V(n, n);
    for (int i = 0; i < n; ++i)
      for (int m = 0; m < n; ++m)
        V(i, m) = std::pow(nodes_[i].x, monos_[m][0]) * std::pow(nodes_[i].y, monos_[m][1]);
    coeff_ = V.fullPivLu().inverse();  // column k = monomial coefficients of basis k
  }

  int degree() const { return p_; }
  int size() const { return static_cast<int>(nodes_.size()); }
  const std::vector<Vec2>& nodes() const { return nodes_; }

  /// d^(ax+ay)/dxi^ax deta^ay of every basis function at xi.
  void derivatives(Vec2 xi, int ax, int ay, double* out) const {
    const int n = size();
    std::vector<double> mono_val(n);
    for (int m = 0; m < n; ++m) {
      const int a = monos_[m][0], b = monos_[m][1];
      if (a < ax || b < ay) {
        mono_val[m] = 0.0;
        continue;
      }
      double c = 1.0;
      for (int k = 0; k < ax; ++k) c *= (a - k);
      for (int k = 0; k < ay; ++k) c *= (b - k);
      mono_val[m] = c * std::pow(xi.x, a - ax) * std::pow(xi.y, b - ay);
    }
    for (int k = 0; k < n; ++k) {
      double s = 0.0;
      for (int m = 0; m < n; ++m) s += coeff_(m, k) * mono_val[m];
      out[k] = s;
    }
  }

  void values(Vec2 xi, double* out) const { derivatives(xi, 0, 0, out); }

private:
  int p_;
  std::vector<std::array<int, 2>> monos_;
  std::vector<Vec2> nodes_;
  Eigen::MatrixXd coeff_;
};

/// Continuous Lagrange space of degree p on a GradedMesh. DOFs on the
/// interface are shared by both sides (the conforming realization of
/// u+ - u- = 0); DOFs on the closure of the Dirichlet boundary are
/// constrained to zero.
class FESpace {
public:
  FESpace(std::shared_ptr<const GradedMesh> mesh, int degree)
      : mesh_(std::move(mesh)), basis_(degree), p_(degree) {
    build();
  }

  const GradedMesh& mesh() const { return *mesh_; }
  const std::shared_ptr<const GradedMesh>& mesh_ptr() const { return mesh_; }
  const ReferenceBasis& basis() const { return basis_; }
  int degree() const { return p_; }
  int n_dofs() const { return n_dofs_; }
  int n_free() const { return static_cast<int>(dof_of_free_.size()); }
  int dofs_per_element() const { return basis_.size(); }

  const std::vector<int>& element_dofs(int t) const { return element_dofs_[t]; }
  bool is_dirichlet(int dof) const { return dirichlet_[dof] != 0; }
  int free_index(int dof) const { return free_of_dof_[dof]; }
  int dof_at_free(int f) const { return dof_of_free_[f]; }
  Vec2 dof_point(int dof) const { return dof_points_[dof]; }
  int vertex_dof(int vertex) const { return vertex; }

  /// Affine element map helpers.
  struct ElementMap {
    Vec2 a;
    Eigen::Matrix2d J;     // columns are the edge vectors
    Eigen::Matrix2d Jinv;
    double detJ;
  };

  ElementMap element_map(int t) const {
    const auto& T = mesh_->triangles[t];
    const Vec2 v0 = mesh_->vertices[T.v[0]];
    const Vec2 e1 = mesh_->vertices[T.v[1]] - v0;
    const Vec2 e2 = mesh_->vertices[T.v[2]] - v0;
    ElementMap m;
    m.a = v0;
    m.J << e1.x, e2.x, e1.y, e2.y;
    m.detJ = m.J.determinant();
    m.Jinv = m.J.inverse();
    return m;
  }

  Vec2 to_physical(const ElementMap& m, Vec2 xi) const {
    return {m.a.x + m.J(0, 0) * xi.x + m.J(0, 1) * xi.y,
            m.a.y + m.J(1, 0) * xi.x + m.J(1, 1) * xi.y};
  }

  /// Nodal interpolation of a (continuous) function given per-point values.
  template <class F>  // F: Vec2 -> double
  Eigen::VectorXd interpolate(F&& f) const {
    Eigen::VectorXd u(n_dofs_);
    for (int i = 0; i < n_dofs_; ++i) u(i) = f(dof_points_[i]);
    return u;
  }

  /// Value and physical derivatives (up to max_order <= 3) of a FE
  /// coefficient vector at a reference point of element t. Output layout:
  /// [u, ux, uy, uxx, uxy, uyy, uxxx, uxxy, uxyy, uyyy].
  void eval_derivatives(int t, const ElementMap& m, Vec2 xi, const Eigen::VectorXd& coeffs,
                        int max_order, double* out) const {
    const int nloc = basis_.size();
    std::vector<double> work(nloc);
    const auto& dofs = element_dofs_[t];
    auto ref_deriv = [&](int ax, int ay) {
      basis_.derivatives(xi, ax, ay, work.data());
      double s = 0.0;
      for (int k = 0; k < nloc; ++k) s += coeffs(dofs[k]) * work[k];
      return s;
    };
    const double b00 = m.Jinv(0, 0), b01 = m.Jinv(0, 1), b10 = m.Jinv(1, 0), b11 = m.Jinv(1, 1);
    int pos = 0;
    out[pos++] = ref_deriv(0, 0);
    if (max_order < 1) return;
    const double u10 = ref_deriv(1, 0), u01 = ref_deriv(0, 1);
    out[pos++] = u10 * b00 + u01 * b10;  // d/dx
    out[pos++] = u10 * b01 + u01 * b11;  // d/dy
    if (max_order < 2) return;
    const double u20 = ref_deriv(2, 0), u11 = ref_deriv(1, 1), u02 = ref_deriv(0, 2);
    auto second = [&](double bi0, double bi1, double bj0, double bj1) {
      return u20 * bi0 * bj0 + u11 * (bi0 * bj1 + bi1 * bj0) + u02 * bi1 * bj1;
    };
    out[pos++] = second(b00, b10, b00, b10);  // xx
    out[pos++] = second(b00, b10, b01, b11);  // xy
    out[pos++] = second(b01, b11, b01, b11);  // yy
    if (max_order < 3) return;
    const double u30 = ref_deriv(3, 0), u21 = ref_deriv(2, 1), u12 = ref_deriv(1, 2),
                 u03 = ref_deriv(0, 3);
    auto third = [&](std::array<double, 2> bi, std::array<double, 2> bj, std::array<double, 2> bk) {
      double s = 0.0;
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
          for (int c = 0; c < 2; ++c) {
            const int order = (a == 0 ? 1 : 0) + (b == 0 ? 1 : 0) + (c == 0 ? 1 : 0);
            double uref;
            switch (order) {
              case 3: uref = u30; break;
              case 2: uref = u21; break;
              case 1: uref = u12; break;
              default: uref = u03; break;
            }
            s += uref * bi[a] * bj[b] * bk[c];
          }
      return s;
    };
    const std::array<double, 2> bx{b00, b10}, by{b01, b11};
    out[pos++] = third(bx, bx, bx);
    out[pos++] = third(bx, bx, by);
    out[pos++] = third(bx, by, by);
    out[pos++] = third(by, by, by);
  }

  /// Local edge index (0,1,2) of the element whose endpoints are {a, b},
  /// or -1 if the element does not own that edge.
  int local_edge(int t, EdgeKey key) const {
    const auto& T = mesh_->triangles[t];
    for (int e = 0; e < 3; ++e)
      if (EdgeKey(T.v[e], T.v[(e + 1) % 3]) == key) return e;
    return -1;
  }

  /// The local DOF indices lying on local edge e, ordered from the edge's
  /// first vertex to its second (element loop orientation).
  std::vector<int> edge_local_dofs(int e) const {
    std::vector<int> idx;
    idx.push_back(e);             // first vertex
    for (int k = 1; k < p_; ++k) idx.push_back(3 + e * (p_ - 1) + (k - 1));
    idx.push_back((e + 1) % 3);   // second vertex
    return idx;
  }

private:
  void build() {
    const auto& mesh = *mesh_;
    const int nv = static_cast<int>(mesh.vertices.size());
    const int nloc = basis_.size();

    // global edges in deterministic order
    std::map<EdgeKey, int> edge_base;  // first edge-dof index for the edge
    int next = nv;
    for (const auto& T : mesh.triangles)
      for (int e = 0; e < 3; ++e) {
        const EdgeKey key(T.v[e], T.v[(e + 1) % 3]);
        if (!edge_base.count(key)) edge_base[key] = -1;
      }
    for (auto& [key, base] : edge_base) {
      base = next;
      next += p_ - 1;
    }
    const int interior_per_elem = nloc - 3 - 3 * (p_ - 1);
    const int interior_start = next;
    n_dofs_ = interior_start + interior_per_elem * static_cast<int>(mesh.triangles.size());

    dof_points_.assign(n_dofs_, Vec2{});
    for (int v = 0; v < nv; ++v) dof_points_[v] = mesh.vertices[v];

    element_dofs_.assign(mesh.triangles.size(), std::vector<int>(nloc, -1));
    for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
      const auto& T = mesh.triangles[t];
      auto& dofs = element_dofs_[t];
      for (int v = 0; v < 3; ++v) dofs[v] = T.v[v];
      for (int e = 0; e < 3; ++e) {
        const int va = T.v[e], vb = T.v[(e + 1) % 3];
        const EdgeKey key(va, vb);
        const int base = edge_base.at(key);
        for (int k = 1; k < p_; ++k) {
          // global edge dof k sits at fraction k/p from the lower-index vertex
          const int kk = (va < vb) ? k : p_ - k;
          dofs[3 + e * (p_ - 1) + (k - 1)] = base + kk - 1;
        }
        const Vec2 a = mesh.vertices[key.a], b = mesh.vertices[key.b];
        for (int k = 1; k < p_; ++k)
          dof_points_[base + k - 1] = a + (b - a) * (static_cast<double>(k) / p_);
      }
      const int ibase = interior_start + static_cast<int>(t) * interior_per_elem;
      const auto emap = element_map(static_cast<int>(t));
      for (int k = 0; k < interior_per_elem; ++k) {
        dofs[3 + 3 * (p_ - 1) + k] = ibase + k;
        dof_points_[ibase + k] = to_physical(emap, basis_.nodes()[3 + 3 * (p_ - 1) + k]);
      }
    }

    // Dirichlet mask: every DOF on the closure of the Dirichlet boundary
    dirichlet_.assign(n_dofs_, 0);
    for (const auto& [key, info] : mesh.edges) {
      if (info.tag != EdgeTag::Dirichlet) continue;
      dirichlet_[key.a] = 1;
      dirichlet_[key.b] = 1;
      const int base = edge_base.at(key);
      for (int k = 1; k < p_; ++k) dirichlet_[base + k - 1] = 1;
    }

    free_of_dof_.assign(n_dofs_, -1);
    for (int i = 0; i < n_dofs_; ++i)
      if (!dirichlet_[i]) {
        free_of_dof_[i] = static_cast<int>(dof_of_free_.size());
        dof_of_free_.push_back(i);
      }
  }

  std::shared_ptr<const GradedMesh> mesh_;
  ReferenceBasis basis_;
  int p_;
  int n_dofs_ = 0;
  std::vector<std::vector<int>> element_dofs_;
  std::vector<Vec2> dof_points_;
  std::vector<char> dirichlet_;
  std::vector<int> free_of_dof_;
  std::vector<int> dof_of_free_;
};

}  // namespace kfem
