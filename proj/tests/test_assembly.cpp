#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "fixtures.hpp"
#include "kfem/assembly.hpp"
#include "kfem/solver.hpp"

using namespace kfem;
using Catch::Approx;

namespace {

/// Independent dense-quadrature oracle: per element, build the nodal basis
/// by a Vandermonde solve in physical monomials and integrate the form
/// with a degree-20 collapsed rule. Shares only the DOF numbering with the
/// implementation.
Eigen::MatrixXd oracle_matrix(const CoefficientFamily& fam, const FESpace& space,
                              std::span<const double> y) {
  const auto& mesh = space.mesh();
  const int p = space.degree();
  const int nloc = space.dofs_per_element();
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(space.n_dofs(), space.n_dofs());
  const TriRule rule = triangle_rule_duffy(11);  // degree 21

  std::vector<std::pair<int, int>> monos;
  for (int a = 0; a <= p; ++a)
    for (int b = 0; b <= p - a; ++b) monos.emplace_back(a, b);

  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    const auto& T = mesh.triangles[t];
    const auto& dofs = space.element_dofs(static_cast<int>(t));
    // physical nodal points of this element
    Eigen::MatrixXd V(nloc, nloc);
    std::vector<Vec2> nodes(nloc);
    for (int i = 0; i < nloc; ++i) nodes[i] = space.dof_point(dofs[i]);
    for (int i = 0; i < nloc; ++i)
      for (int m = 0; m < nloc; ++m)
        V(i, m) = std::pow(nodes[i].x, monos[m].first) * std::pow(nodes[i].y, monos[m].second);
    const Eigen::MatrixXd C = V.fullPivLu().inverse();

    const Vec2 v0 = mesh.vertices[T.v[0]];
    const Vec2 e1 = mesh.vertices[T.v[1]] - v0, e2 = mesh.vertices[T.v[2]] - v0;
    const double jac = std::abs(e1.cross(e2));
    for (std::size_t q = 0; q < rule.points.size(); ++q) {
      const Vec2 x = v0 + e1 * rule.points[q].x + e2 * rule.points[q].y;
      const double w = rule.weights[q] * jac;
      Eigen::VectorXd val(nloc), gx(nloc), gy(nloc);
      for (int k = 0; k < nloc; ++k) {
        double s = 0, sx = 0, sy = 0;
        for (int m = 0; m < nloc; ++m) {
          const auto [ma, mb] = monos[m];
          const double xa = std::pow(x.x, ma), yb = std::pow(x.y, mb);
          s += C(m, k) * xa * yb;
          if (ma > 0) sx += C(m, k) * ma * std::pow(x.x, ma - 1) * yb;
          if (mb > 0) sy += C(m, k) * mb * xa * std::pow(x.y, mb - 1);
        }
        val(k) = s;
        gx(k) = sx;
        gy(k) = sy;
      }
      const double a11 = fam.a11(x, T.subdomain, y), a12 = fam.a12(x, T.subdomain, y);
      const double a22 = fam.a22(x, T.subdomain, y);
      const double b1 = fam.b1(x, T.subdomain, y), b2 = fam.b2(x, T.subdomain, y);
      const double c = fam.c(x, T.subdomain, y);
      for (int i = 0; i < nloc; ++i)
        for (int j = 0; j < nloc; ++j) {
          const double diff = (a11 * gx(j) + a12 * gy(j)) * gx(i) +
                              (a12 * gx(j) + a22 * gy(j)) * gy(i);
          const double adv = (b1 * gx(j) + b2 * gy(j)) * val(i);
          A(dofs[i], dofs[j]) += w * (diff + adv + c * val(j) * val(i));
        }
    }
  }
  return A;
}

int vertex_index(const GradedMesh& mesh, Vec2 p) {
  for (std::size_t v = 0; v < mesh.vertices.size(); ++v)
    if (dist(mesh.vertices[v], p) < 1e-12) return static_cast<int>(v);
  return -1;
}

}  // namespace

TEST_CASE("textbook P1 stiffness on the two-triangle square", "[assembly]") {
  auto mesh = fixtures::mesh_of(fixtures::unit_square(), 1.0);
  REQUIRE(mesh->triangles.size() == 2);
  auto space = std::make_shared<FESpace>(mesh, 1);
  const Eigen::MatrixXd A =
      Eigen::MatrixXd(assemble_matrix(CoefficientFamily::laplacian(), *space, {}));

  // hand values: right-angle vertices contribute 1, the 45-degree vertices
  // 1/2 per triangle; edge neighbors couple with -1/2, the diagonal pair
  // decouples; all row sums vanish
  const int v00 = vertex_index(*mesh, {0, 0}), v10 = vertex_index(*mesh, {1, 0});
  const int v11 = vertex_index(*mesh, {1, 1}), v01 = vertex_index(*mesh, {0, 1});
  for (int v : {v00, v10, v11, v01}) REQUIRE(A(v, v) == Approx(1.0).epsilon(1e-13));
  REQUIRE(A(v00, v10) == Approx(-0.5).epsilon(1e-13));
  REQUIRE(A(v00, v01) == Approx(-0.5).epsilon(1e-13));
  REQUIRE(A(v11, v10) == Approx(-0.5).epsilon(1e-13));
  REQUIRE(A(v11, v01) == Approx(-0.5).epsilon(1e-13));
  // the two vertices joined by (or across) the cut diagonal decouple
  REQUIRE(A(v00, v11) == Approx(0.0).margin(1e-14));
  REQUIRE(A(v10, v01) == Approx(0.0).margin(1e-14));
  for (int i = 0; i < 4; ++i) REQUIRE(A.row(i).sum() == Approx(0.0).margin(1e-13));
}

TEST_CASE("piecewise-constant coefficient scales element blocks", "[assembly]") {
  auto mesh = fixtures::mesh_of(fixtures::split_square_dirichlet(), 0.5);
  auto space = std::make_shared<FESpace>(mesh, 1);

  CoefficientFamily piecewise;
  piecewise.a11 = ScalarField::per_subdomain({"1", "10"});
  piecewise.a22 = ScalarField::per_subdomain({"1", "10"});

  CoefficientFamily left_only, right_only;
  left_only.a11 = ScalarField::per_subdomain({"1", "0"});
  left_only.a22 = ScalarField::per_subdomain({"1", "0"});
  right_only.a11 = ScalarField::per_subdomain({"0", "1"});
  right_only.a22 = ScalarField::per_subdomain({"0", "1"});

  const Eigen::MatrixXd A = Eigen::MatrixXd(assemble_matrix(piecewise, *space, {}));
  const Eigen::MatrixXd L = Eigen::MatrixXd(assemble_matrix(left_only, *space, {}));
  const Eigen::MatrixXd R = Eigen::MatrixXd(assemble_matrix(right_only, *space, {}));
  REQUIRE((A - (L + 10.0 * R)).norm() == Approx(0.0).margin(1e-12 * A.norm()));
}

TEST_CASE("assembly matches the dense-quadrature oracle", "[assembly]") {
  // smooth non-constant a, b, c on a <= 20 triangle mesh
  CoefficientFamily fam;
  fam.a11 = ScalarField::from_expression("1 + 0.5*x1^2");
  fam.a12 = ScalarField::from_expression("0.2*x1*x2");
  fam.a22 = ScalarField::from_expression("2 + cos(x2)");
  fam.b1 = ScalarField::from_expression("sin(x2)");
  fam.b2 = ScalarField::from_expression("x1");
  fam.c = ScalarField::from_expression("1 + x1*x2");

  for (int p : {1, 2, 3}) {
    auto mesh = fixtures::mesh_of(fixtures::split_square_dirichlet(), p == 1 ? 0.5 : 0.7);
    REQUIRE(mesh->triangles.size() <= 20);
    auto space = std::make_shared<FESpace>(mesh, p);
    AssemblyOptions opts;
    opts.quad_degree = 2 * p + 6;  // smooth coefficients need margin over 2p
    const Eigen::MatrixXd A = Eigen::MatrixXd(assemble_matrix(fam, *space, {}, opts));
    const Eigen::MatrixXd O = oracle_matrix(fam, *space, {});
    REQUIRE((A - O).norm() <= 1e-10 * O.norm());
  }
}

TEST_CASE("assembled symmetry for b = 0", "[assembly]") {
  CoefficientFamily fam;
  fam.a11 = ScalarField::from_expression("1 + x1");
  fam.a12 = ScalarField::from_expression("0.3*x2");
  fam.a22 = ScalarField::from_expression("2");
  fam.c = ScalarField::from_expression("x2");
  auto mesh = fixtures::mesh_of(fixtures::unit_square(), 0.25);
  auto space = std::make_shared<FESpace>(mesh, 2);
  const Eigen::SparseMatrix<double> A = assemble_matrix(fam, *space, {});
  const Eigen::SparseMatrix<double> At = A.transpose();
  REQUIRE((Eigen::MatrixXd(A) - Eigen::MatrixXd(At)).norm() <=
          1e-12 * Eigen::MatrixXd(A).norm());
}

TEST_CASE("load vector terms", "[assembly]") {
  SECTION("volume: f = 1 with P1 gives a third of the adjacent area") {
    auto mesh = fixtures::mesh_of(fixtures::unit_square(), 0.5);
    auto space = std::make_shared<FESpace>(mesh, 1);
    SourceData data;
    data.f = ScalarField::constant(1.0);
    const Eigen::VectorXd F = assemble_load(data, *space, {});
    for (int v = 0; v < space->n_dofs(); ++v) {
      double adjacent = 0;
      for (std::size_t t = 0; t < mesh->triangles.size(); ++t) {
        const auto& T = mesh->triangles[t];
        if (T.v[0] == v || T.v[1] == v || T.v[2] == v)
          adjacent += mesh->triangle_area(static_cast<int>(t));
      }
      REQUIRE(F(v) == Approx(adjacent / 3.0).margin(1e-14));
    }
    REQUIRE(F.sum() == Approx(1.0).epsilon(1e-13));  // integral of 1 over the square
  }

  SECTION("Neumann edge: g = 1 gives half edge lengths") {
    auto dom = fixtures::unit_square_bc(BC::Dirichlet, BC::Neumann, BC::Dirichlet, BC::Dirichlet);
    auto mesh = fixtures::mesh_of(dom, 0.5);
    auto space = std::make_shared<FESpace>(mesh, 1);
    SourceData data;
    data.g = ScalarField::constant(1.0);
    const Eigen::VectorXd F = assemble_load(data, *space, {});
    for (int v = 0; v < space->n_dofs(); ++v) {
      const Vec2 x = space->dof_point(v);
      if (std::abs(x.x - 1.0) < 1e-12) {
        double expected = 0;
        for (const auto& [key, info] : mesh->edges) {
          if (info.tag != EdgeTag::Neumann) continue;
          if (key.a == v || key.b == v)
            expected += 0.5 * dist(mesh->vertices[key.a], mesh->vertices[key.b]);
        }
        REQUIRE(F(v) == Approx(expected).margin(1e-13));
      } else {
        REQUIRE(F(v) == Approx(0.0).margin(1e-14));
      }
    }
    REQUIRE(F.sum() == Approx(1.0).epsilon(1e-13));  // length of the edge
  }

  SECTION("interface jump: h = 1 loads exactly the interface DOFs") {
    auto mesh = fixtures::mesh_of(fixtures::split_square_dirichlet(), 0.5);
    auto space = std::make_shared<FESpace>(mesh, 1);
    SourceData data;
    data.h = ScalarField::constant(1.0);
    const Eigen::VectorXd F = assemble_load(data, *space, {});
    for (int v = 0; v < space->n_dofs(); ++v) {
      const Vec2 x = space->dof_point(v);
      if (std::abs(x.x - 0.5) < 1e-12) {
        // brute-force edge quadrature oracle: hat integral = half the
        // summed lengths of the adjacent interface edges
        double expected = 0;
        for (const auto& [key, info] : mesh->edges) {
          if (info.tag != EdgeTag::Interface) continue;
          if (key.a == v || key.b == v)
            expected += 0.5 * dist(mesh->vertices[key.a], mesh->vertices[key.b]);
        }
        REQUIRE(F(v) == Approx(expected).margin(1e-13));
      } else {
        REQUIRE(F(v) == Approx(0.0).margin(1e-14));
      }
    }
  }

  SECTION("h without an interface is a spec error") {
    auto mesh = fixtures::mesh_of(fixtures::unit_square(), 0.5);
    auto space = std::make_shared<FESpace>(mesh, 1);
    SourceData data;
    data.h = ScalarField::constant(1.0);
    REQUIRE_THROWS_AS(assemble_load(data, *space, {}), ValidationError);
  }

  SECTION("non-finite coefficient evaluation is reported with a location") {
    auto mesh = fixtures::mesh_of(fixtures::unit_square(), 0.5);
    auto space = std::make_shared<FESpace>(mesh, 1);
    SourceData data;
    data.f = ScalarField::from_expression("1/(x1 - x1)");
    REQUIRE_THROWS_AS(assemble_load(data, *space, {}), MathError);
  }
}

TEST_CASE("assembly determinism under threading", "[assembly]") {
  CoefficientFamily fam;
  fam.a11 = ScalarField::from_expression("1 + x1*x2");
  fam.a22 = ScalarField::from_expression("1 + x2");
  fam.c = ScalarField::constant(1.0);
  auto mesh = fixtures::mesh_of(fixtures::lshape(), 0.25, 1);
  auto space = std::make_shared<FESpace>(mesh, 2);

  set_thread_count(1);
  const Eigen::SparseMatrix<double> A1 = assemble_matrix(fam, *space, {});
  set_thread_count(8);
  const Eigen::SparseMatrix<double> A8 = assemble_matrix(fam, *space, {});
  set_thread_count(1);

  REQUIRE(A1.nonZeros() == A8.nonZeros());
  // bit-identical regardless of worker count
  const Eigen::MatrixXd D1 = Eigen::MatrixXd(A1), D8 = Eigen::MatrixXd(A8);
  for (int i = 0; i < D1.rows(); ++i)
    for (int j = 0; j < D1.cols(); ++j) REQUIRE(D1(i, j) == D8(i, j));
}
