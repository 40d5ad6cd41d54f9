#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "kfem/collocation.hpp"
#include "kfem/convergence.hpp"
#include "kfem/parametric.hpp"

using namespace kfem;
using Catch::Approx;

namespace {

/// s = 1 affine family a = (2 + y) I on the Dirichlet square with a fixed
/// load: u_y = v / (2 + y) where v is the single auxiliary solution, the
/// closed-form oracle for every parametric test.
struct AffineSquare {
  CoefficientFamily fam;
  SourceData data;
  std::shared_ptr<const FESpace> space;
  Eigen::VectorXd v;  // auxiliary: (2+y) = 1 solve

  explicit AffineSquare(int level = 2, int degree = 1) {
    fam.n_params = 1;
    fam.affine = true;
    fam.a11 = ScalarField::from_expression("2 + y1");
    fam.a22 = ScalarField::from_expression("2 + y1");
    data.f = ScalarField::from_expression("2*pi^2*sin(pi*x1)*sin(pi*x2)");
    auto mesh = fixtures::mesh_of(fixtures::unit_square(), 0.5, level);
    space = std::make_shared<FESpace>(mesh, degree);
    CoefficientFamily lap = CoefficientFamily::laplacian();
    v = solve_problem(lap, data, space, {}).coeffs;
  }

  Eigen::VectorXd exact(double y) const { return v / (2.0 + y); }
};

}  // namespace

TEST_CASE("collocation grids", "[parametric]") {
  SECTION("tensor structure and probability weights") {
    const auto g = CollocationGrid::tensor({3, 4});
    REQUIRE(g.size() == 12);
    double wsum = 0;
    for (double w : g.weights()) wsum += w;
    REQUIRE(wsum == Approx(1.0).epsilon(1e-13));
    REQUIRE(g.dims() == 2);
  }

  SECTION("Clenshaw-Curtis nodes include the endpoints") {
    const auto g = CollocationGrid::tensor({5}, CollocationGrid::Family::ClenshawCurtis);
    REQUIRE(g.nodes1d(0).front() == Approx(-1.0));
    REQUIRE(g.nodes1d(0).back() == Approx(1.0));
    double wsum = 0;
    for (double w : g.weights()) wsum += w;
    REQUIRE(wsum == Approx(1.0).epsilon(1e-13));
  }

  SECTION("s = 0 grid is the single empty node") {
    const auto g = CollocationGrid::tensor({});
    REQUIRE(g.size() == 1);
    REQUIRE(g.weights()[0] == 1.0);
  }

  SECTION("barycentric basis is the exact indicator at nodes") {
    const auto g = CollocationGrid::tensor({6});
    for (std::size_t i = 0; i < 6; ++i) {
      const auto l = g.basis1d(0, g.nodes1d(0)[i]);
      for (std::size_t j = 0; j < 6; ++j) REQUIRE(l[j] == (i == j ? 1.0 : 0.0));
    }
    // partition of unity off the nodes
    const auto l = g.basis1d(0, 0.33);
    double s = 0;
    for (double v : l) s += v;
    REQUIRE(s == Approx(1.0).epsilon(1e-13));
  }
}

TEST_CASE("surrogate construction", "[parametric]") {
  AffineSquare prob;

  SECTION("interpolation property at the nodes") {
    const auto grid = CollocationGrid::tensor({4});
    const auto sur = build_surrogate(prob.fam, prob.data, prob.space, grid);
    REQUIRE(sur.dim() == static_cast<std::size_t>(prob.space->n_dofs()) * 4);
    for (std::size_t k = 0; k < grid.size(); ++k) {
      const Eigen::VectorXd at_node = sur.evaluate(grid.nodes()[k]);
      const Eigen::VectorXd direct = solve_problem(prob.fam, prob.data, prob.space,
                                                   grid.nodes()[k])
                                         .coeffs;
      REQUIRE((at_node - direct).lpNorm<Eigen::Infinity>() <=
              1e-12 * direct.lpNorm<Eigen::Infinity>());
    }
  }

  SECTION("constant-in-y family gives a constant surrogate") {
    CoefficientFamily constant;
    constant.n_params = 1;
    constant.affine = true;
    constant.c = ScalarField::constant(1.0);
    const auto grid = CollocationGrid::tensor({3});
    const auto sur = build_surrogate(constant, prob.data, prob.space, grid);
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(-1, 1);
    const Eigen::VectorXd ref = sur.node_values().col(0);
    for (int k = 0; k < 10; ++k) {
      const double y = u(rng);
      REQUIRE((sur.evaluate(std::vector<double>{y}) - ref).lpNorm<Eigen::Infinity>() <=
              1e-12 * ref.lpNorm<Eigen::Infinity>());
    }
  }

  SECTION("geometric decay in the node count for the analytic family") {
    const auto s4 = build_surrogate(prob.fam, prob.data, prob.space,
                                    CollocationGrid::tensor({4}));
    const auto s8 = build_surrogate(prob.fam, prob.data, prob.space,
                                    CollocationGrid::tensor({8}));
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> u(-1, 1);
    double sup4 = 0, sup8 = 0;
    for (int k = 0; k < 50; ++k) {
      const double y = u(rng);
      const Eigen::VectorXd ex = prob.exact(y);
      sup4 = std::max(sup4,
                      (s4.evaluate(std::vector<double>{y}) - ex).lpNorm<Eigen::Infinity>());
      sup8 = std::max(sup8,
                      (s8.evaluate(std::vector<double>{y}) - ex).lpNorm<Eigen::Infinity>());
    }
    REQUIRE(sup4 / sup8 >= 100.0);  // analytic-in-y interpolation decays geometrically
  }

  SECTION("linearity in the data") {
    SourceData f1, f2, f12;
    f1.f = ScalarField::from_expression("x1");
    f2.f = ScalarField::from_expression("sin(pi*x2)");
    f12.f = ScalarField::from_expression("x1 + sin(pi*x2)");
    const auto grid = CollocationGrid::tensor({3});
    const auto a = build_surrogate(prob.fam, f1, prob.space, grid);
    const auto b = build_surrogate(prob.fam, f2, prob.space, grid);
    const auto c = build_surrogate(prob.fam, f12, prob.space, grid);
    const Eigen::MatrixXd sum = a.node_values() + b.node_values();
    REQUIRE((sum - c.node_values()).norm() <= 1e-12 * c.node_values().norm());
  }

  SECTION("node solve failure aborts with the witness parameter") {
    CoefficientFamily degenerate;
    degenerate.n_params = 1;
    degenerate.affine = true;
    degenerate.a11 = ScalarField::from_expression("1 + y1");
    degenerate.a22 = ScalarField::from_expression("1 + y1");
    const auto grid = CollocationGrid::tensor({3}, CollocationGrid::Family::ClenshawCurtis);
    REQUIRE_THROWS_MATCHES(
        build_surrogate(degenerate, prob.data, prob.space, grid), MathError,
        Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring("y = (-1")));
  }
}

TEST_CASE("L2(U;V) error estimation", "[parametric]") {
  AffineSquare prob;
  const auto grid = CollocationGrid::tensor({4});
  const auto sur = build_surrogate(prob.fam, prob.data, prob.space, grid);

  SECTION("tensor sampler colliding with the grid gets an offset") {
    L2UVSampler sampler;
    sampler.kind = L2UVSampler::TensorQuadrature;
    sampler.count = 4;  // same as the surrogate grid
    const auto est = l2uv_error(sur, prob.fam, prob.data, sampler);
    REQUIRE(est.node_offset_applied);
    REQUIRE(est.value > 0);
    REQUIRE(est.value < 1e-2);
  }

  SECTION("constant family: estimate at round-off") {
    CoefficientFamily constant;
    constant.n_params = 1;
    constant.c = ScalarField::constant(1.0);
    const auto csur = build_surrogate(constant, prob.data, prob.space,
                                      CollocationGrid::tensor({3}));
    L2UVSampler mc;
    mc.count = 20;
    mc.seed = 7;
    const auto est = l2uv_error(csur, constant, prob.data, mc);
    REQUIRE(est.value <= 1e-12);
  }

  SECTION("Monte Carlo is seed-reproducible and decays with the grid") {
    L2UVSampler mc;
    mc.count = 40;
    mc.seed = 99;
    const auto e4 = l2uv_error(sur, prob.fam, prob.data, mc);
    const auto e4b = l2uv_error(sur, prob.fam, prob.data, mc);
    REQUIRE(e4.value == e4b.value);  // identical seed, identical estimate
    const auto sur6 = build_surrogate(prob.fam, prob.data, prob.space,
                                      CollocationGrid::tensor({6}));
    const auto e6 = l2uv_error(sur6, prob.fam, prob.data, mc);
    REQUIRE(e6.value < 0.05 * e4.value);
    REQUIRE(e4.stderr_value > 0);
  }
}

TEST_CASE("parametric derivatives", "[parametric]") {
  AffineSquare prob;

  SECTION("constant-in-y family has vanishing derivatives") {
    CoefficientFamily constant;
    constant.n_params = 1;
    constant.affine = true;
    constant.c = ScalarField::constant(1.0);
    ParametricDerivatives pd(constant, prob.data, prob.space, {0.0});
    REQUIRE(pd.derivative({1}).norm() == 0.0);
  }

  SECTION("closed form du/dy = -u/(2+y) at y0 = 0") {
    ParametricDerivatives pd(prob.fam, prob.data, prob.space, {0.0});
    const Eigen::VectorXd& u0 = pd.solution();
    const Eigen::VectorXd& du = pd.derivative({1});
    const Eigen::VectorXd expect = -u0 / 2.0;
    REQUIRE((du - expect).norm() <= 1e-8 * expect.norm());
  }

  SECTION("finite-difference cross-check for |alpha| = 1") {
    ParametricDerivatives pd(prob.fam, prob.data, prob.space, {0.2});
    REQUIRE(pd.fd_check(0) <= 1e-5);
  }

  SECTION("second derivative against second differences") {
    ParametricDerivatives pd(prob.fam, prob.data, prob.space, {0.0});
    const Eigen::VectorXd& d2 = pd.derivative({2});
    // closed form: u_y = v/(2+y) => d2 u = 2 v / (2+y)^3 = u0 / 4 * 2
    const Eigen::VectorXd expect = 2.0 * pd.solution() / 4.0;
    REQUIRE((d2 - expect).norm() <= 1e-7 * expect.norm());
    const double h = 1e-4;
    const auto up = solve_problem(prob.fam, prob.data, prob.space, std::vector<double>{h});
    const auto um = solve_problem(prob.fam, prob.data, prob.space, std::vector<double>{-h});
    const Eigen::VectorXd fd = (up.coeffs - 2 * pd.solution() + um.coeffs) / (h * h);
    REQUIRE((d2 - fd).lpNorm<Eigen::Infinity>() <=
            1e-4 * fd.lpNorm<Eigen::Infinity>() + 1e-10);
  }

  SECTION("Taylor remainder has slope 2 in the step") {
    ParametricDerivatives pd(prob.fam, prob.data, prob.space, {0.0});
    const Eigen::VectorXd& u0 = pd.solution();
    const Eigen::VectorXd& du = pd.derivative({1});
    std::vector<double> steps{1e-1, 1e-2, 1e-3};
    std::vector<double> rem;
    for (double d : steps) {
      const auto ud = solve_problem(prob.fam, prob.data, prob.space, std::vector<double>{d});
      rem.push_back(h1_norm(*prob.space, Eigen::VectorXd(ud.coeffs - u0 - d * du)));
    }
    const double slope01 = std::log(rem[0] / rem[1]) / std::log(steps[0] / steps[1]);
    const double slope12 = std::log(rem[1] / rem[2]) / std::log(steps[1] / steps[2]);
    REQUIRE(slope01 == Approx(2.0).margin(0.1));
    REQUIRE(slope12 == Approx(2.0).margin(0.1));
  }

  SECTION("declared smoothness class bounds the order") {
    CoefficientFamily limited = prob.fam;
    limited.k0 = SmoothnessClass::finite(1);
    ParametricDerivatives pd(limited, prob.data, prob.space, {0.0});
    REQUIRE_NOTHROW(pd.derivative({1}));
    REQUIRE_THROWS_AS(pd.derivative({2}), ValidationError);
  }
}

TEST_CASE("uniform bound scan", "[parametric]") {
  ParametricProbeProblem prob;
  prob.domain = fixtures::lshape_all_neumann();
  prob.fam.n_params = 1;
  prob.fam.affine = true;
  prob.fam.a11 = ScalarField::from_expression("2 + 0.5*y1");
  prob.fam.a22 = ScalarField::from_expression("2 + 0.5*y1");
  prob.fam.c = ScalarField::constant(1.0);
  prob.data.f = ScalarField::constant(1.0);
  prob.f_field.max_order = 3;
  prob.f_field.derivs = [](Vec2, int, double* out) {
    out[0] = 1.0;
    for (int i = 1; i < 10; ++i) out[i] = 0;
  };
  prob.g_volume = prob.f_field;
  prob.g_volume.derivs = [](Vec2, int, double* out) {
    for (int i = 0; i < 10; ++i) out[i] = 0;
  };
  prob.h_volume = prob.g_volume;

  SECTION("mildly varying family stays within the uniform window") {
    const auto rep = uniform_bound_scan(prob, 2, 1, 1, 0.5, SamplePlan{SamplePlan::Grid, 3});
    REQUIRE(rep.samples.size() == 3);
    REQUIRE(rep.max_over_min <= 3.0);
    REQUIRE(rep.uniform);
  }

  SECTION("constant-in-y family gives identical ratios") {
    ParametricProbeProblem flat = prob;
    flat.fam.a11 = ScalarField::constant(2.0);
    flat.fam.a22 = ScalarField::constant(2.0);
    const auto rep = uniform_bound_scan(flat, 2, 1, 1, 0.5, SamplePlan{SamplePlan::Grid, 3});
    REQUIRE(rep.max_over_min == Approx(1.0).margin(1e-10));
  }

  SECTION("weight above eta is rejected") {
    REQUIRE_THROWS_AS(uniform_bound_scan(prob, 2, 1, 1, 0.9, SamplePlan{SamplePlan::Grid, 3}),
                      MathError);
  }
}
