#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "kfem/fespace.hpp"

using namespace kfem;
using Catch::Approx;

TEST_CASE("reference basis", "[fespace]") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u01(0.05, 0.9);

  for (int p : {1, 2, 3}) {
    ReferenceBasis basis(p);
    const int n = basis.size();
    REQUIRE(n == (p + 1) * (p + 2) / 2);
    std::vector<double> vals(n);

    SECTION("nodal property, p = " + std::to_string(p)) {
      for (int i = 0; i < n; ++i) {
        basis.values(basis.nodes()[i], vals.data());
        for (int k = 0; k < n; ++k)
          REQUIRE(vals[k] == Approx(i == k ? 1.0 : 0.0).margin(1e-11));
      }
    }

    SECTION("partition of unity, p = " + std::to_string(p)) {
      for (int trial = 0; trial < 20; ++trial) {
        Vec2 xi{u01(rng), 0.0};
        xi.y = u01(rng) * (1.0 - xi.x);
        basis.values(xi, vals.data());
        double s = 0, sx = 0, sy = 0;
        std::vector<double> gx(n), gy(n);
        basis.derivatives(xi, 1, 0, gx.data());
        basis.derivatives(xi, 0, 1, gy.data());
        for (int k = 0; k < n; ++k) {
          s += vals[k];
          sx += gx[k];
          sy += gy[k];
        }
        REQUIRE(s == Approx(1.0).epsilon(1e-12));
        REQUIRE(sx == Approx(0.0).margin(1e-10));
        REQUIRE(sy == Approx(0.0).margin(1e-10));
      }
    }

    SECTION("derivatives match finite differences, p = " + std::to_string(p)) {
      const Vec2 xi{0.31, 0.24};
      const double h = 1e-6;
      std::vector<double> va(n), vb(n), dx(n), dy(n);
      basis.derivatives(xi, 1, 0, dx.data());
      basis.derivatives(xi, 0, 1, dy.data());
      basis.values({xi.x + h, xi.y}, va.data());
      basis.values({xi.x - h, xi.y}, vb.data());
      for (int k = 0; k < n; ++k) REQUIRE(dx[k] == Approx((va[k] - vb[k]) / (2 * h)).margin(1e-7));
      basis.values({xi.x, xi.y + h}, va.data());
      basis.values({xi.x, xi.y - h}, vb.data());
      for (int k = 0; k < n; ++k) REQUIRE(dy[k] == Approx((va[k] - vb[k]) / (2 * h)).margin(1e-7));
    }
  }
}

TEST_CASE("FE space construction", "[fespace]") {
  SECTION("polynomial reproduction on an irregular mesh") {
    auto mesh = fixtures::mesh_of(fixtures::lshape(), 0.45, 1);
    for (int p : {1, 2, 3}) {
      auto space = std::make_shared<FESpace>(mesh, p);
      auto poly = [p](Vec2 x) {
        return p == 1 ? 2 * x.x - 0.5 * x.y + 1
                      : (p == 2 ? x.x * x.x + x.x * x.y - x.y : x.x * x.x * x.y + 0.3 * x.y);
      };
      const Eigen::VectorXd u = space->interpolate([&](Vec2 x) { return poly(x); });
      double out[10];
      for (int t = 0; t < static_cast<int>(mesh->triangles.size()); t += 3) {
        const auto emap = space->element_map(t);
        const Vec2 xi{0.21, 0.36};
        const Vec2 x = space->to_physical(emap, xi);
        space->eval_derivatives(t, emap, xi, u, 0, out);
        REQUIRE(out[0] == Approx(poly(x)).epsilon(1e-10));
      }
    }
  }

  SECTION("second and third derivatives of an interpolated cubic") {
    auto mesh = fixtures::mesh_of(fixtures::unit_square(), 0.6);
    auto space = std::make_shared<FESpace>(mesh, 3);
    const Eigen::VectorXd u =
        space->interpolate([](Vec2 x) { return x.x * x.x * x.x + 2 * x.x * x.y * x.y; });
    double d[10];
    const auto emap = space->element_map(0);
    const Vec2 xi{0.3, 0.3};
    const Vec2 x = space->to_physical(emap, xi);
    space->eval_derivatives(0, emap, xi, u, 3, d);
    REQUIRE(d[0] == Approx(x.x * x.x * x.x + 2 * x.x * x.y * x.y).epsilon(1e-9));
    REQUIRE(d[1] == Approx(3 * x.x * x.x + 2 * x.y * x.y).epsilon(1e-9));
    REQUIRE(d[2] == Approx(4 * x.x * x.y).epsilon(1e-9));
    REQUIRE(d[3] == Approx(6 * x.x).epsilon(1e-8));
    REQUIRE(d[4] == Approx(4 * x.y).epsilon(1e-8));
    REQUIRE(d[5] == Approx(4 * x.x).epsilon(1e-8));
    REQUIRE(d[6] == Approx(6.0).epsilon(1e-7));
    REQUIRE(d[7] == Approx(0.0).margin(1e-7));
    REQUIRE(d[8] == Approx(4.0).epsilon(1e-7));
    REQUIRE(d[9] == Approx(0.0).margin(1e-7));
  }

  SECTION("interface DOFs are single-valued") {
    auto mesh = fixtures::mesh_of(fixtures::split_square_dirichlet(), 0.25);
    auto space = std::make_shared<FESpace>(mesh, 2);
    std::mt19937_64 rng(3);
    Eigen::VectorXd u(space->n_dofs());
    for (int i = 0; i < u.size(); ++i) u(i) = std::uniform_real_distribution<double>(-1, 1)(rng);
    for (const auto& [key, info] : mesh->edges) {
      if (info.tag != EdgeTag::Interface) continue;
      const Vec2 a = mesh->vertices[key.a], b = mesh->vertices[key.b];
      std::vector<int> owners;
      for (std::size_t t = 0; t < mesh->triangles.size(); ++t)
        if (space->local_edge(static_cast<int>(t), key) >= 0) owners.push_back(static_cast<int>(t));
      REQUIRE(owners.size() == 2);
      for (double s : {0.25, 0.5, 0.8}) {
        const Vec2 x = a + (b - a) * s;
        double vals[2];
        for (int j = 0; j < 2; ++j) {
          const auto emap = space->element_map(owners[j]);
          const Eigen::Vector2d xi = emap.Jinv * Eigen::Vector2d(x.x - emap.a.x, x.y - emap.a.y);
          double out[10];
          space->eval_derivatives(owners[j], emap, {xi(0), xi(1)}, u, 0, out);
          vals[j] = out[0];
        }
        REQUIRE(vals[0] == Approx(vals[1]).epsilon(1e-11));
      }
    }
  }

  SECTION("Dirichlet mask covers the closure of the Dirichlet boundary") {
    auto dom = fixtures::unit_square_bc(BC::Neumann, BC::Neumann, BC::Neumann, BC::Dirichlet);
    auto mesh = fixtures::mesh_of(dom, 0.25);
    auto space = std::make_shared<FESpace>(mesh, 2);
    int n_constrained = 0;
    for (int i = 0; i < space->n_dofs(); ++i) {
      const Vec2 x = space->dof_point(i);
      if (space->is_dirichlet(i)) {
        ++n_constrained;
        REQUIRE(x.x == Approx(0.0).margin(1e-12));
      } else {
        REQUIRE(x.x > 1e-12);
      }
    }
    REQUIRE(n_constrained > 0);
    REQUIRE(space->n_free() + n_constrained == space->n_dofs());
  }
}
