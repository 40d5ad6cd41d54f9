#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "kfem/convergence.hpp"
#include "kfem/manufactured.hpp"

using namespace kfem;
using Catch::Approx;

namespace {

/// Strong-form consistency of a manufactured case at interior points:
/// f = -div(a grad u) + b . grad u + c u, with the divergence term from
/// analytic Hessians when available and finite differences otherwise.
void check_strong_form(const ManufacturedCase& mc, const std::vector<std::pair<Vec2, int>>& pts,
                       double tol) {
  for (const auto& [x, sub] : pts) {
    double d[10];
    mc.exact.derivs(x, sub, d);
    double hess[3];
    if (mc.exact.max_order >= 2) {
      hess[0] = d[3];
      hess[1] = d[4];
      hess[2] = d[5];
    } else {
      const double h = 1e-5;
      double xp[10], xm[10], yp[10], ym[10];
      mc.exact.derivs({x.x + h, x.y}, sub, xp);
      mc.exact.derivs({x.x - h, x.y}, sub, xm);
      mc.exact.derivs({x.x, x.y + h}, sub, yp);
      mc.exact.derivs({x.x, x.y - h}, sub, ym);
      hess[0] = (xp[1] - xm[1]) / (2 * h);
      hess[1] = (yp[1] - ym[1]) / (2 * h);
      hess[2] = (yp[2] - ym[2]) / (2 * h);
    }
    // piecewise-constant principal coefficients in all fixtures
    const double a11 = mc.fam.a11(x, sub, {});
    const double a22 = mc.fam.a22(x, sub, {});
    const double c = mc.fam.c(x, sub, {});
    const double lhs = -(a11 * hess[0] + a22 * hess[2]) + c * d[0];
    const double f = mc.data.f(x, sub, {});
    REQUIRE(lhs == Approx(f).epsilon(tol).margin(tol));
  }
}

}  // namespace

TEST_CASE("manufactured case consistency", "[harness]") {
  SECTION("smooth case satisfies the strong form to 1e-9") {
    const auto mc = make_case(CaseKind::Smooth, fixtures::unit_square());
    check_strong_form(mc, {{{0.3, 0.4}, 0}, {{0.71, 0.12}, 0}, {{0.5, 0.9}, 0}}, 1e-9);
  }

  SECTION("transmission-kink: continuity, matched flux, strong form") {
    const auto mc = make_case(CaseKind::TransmissionKink, fixtures::split_square_transmission());
    check_strong_form(mc, {{{0.2, 0.5}, 0}, {{0.8, 0.3}, 1}}, 1e-9);
    // continuity and conormal flux across the interface
    for (double y : {0.2, 0.5, 0.77}) {
      double l[10], r[10];
      mc.exact.derivs({0.5, y}, 0, l);
      mc.exact.derivs({0.5, y}, 1, r);
      REQUIRE(l[0] == Approx(r[0]).epsilon(1e-12));
      const double flux_l = mc.fam.a11({0.5, y}, 0, {}) * l[1];
      const double flux_r = mc.fam.a11({0.5, y}, 1, {}) * r[1];
      REQUIRE(flux_l == Approx(flux_r).epsilon(1e-12));
      REQUIRE(std::abs(flux_l) > 1e-3);  // the matched flux is genuinely nonzero
    }
  }

  SECTION("interface-flux-jump: prescribed jump matches the data") {
    const auto mc = make_case(CaseKind::InterfaceFluxJump, fixtures::split_square_dirichlet());
    check_strong_form(mc, {{{0.25, 0.33}, 0}, {{0.8, 0.61}, 1}}, 1e-9);
    for (double y : {0.3, 0.62}) {
      double l[10], r[10];
      mc.exact.derivs({0.5, y}, 0, l);
      mc.exact.derivs({0.5, y}, 1, r);
      REQUIRE(l[0] == Approx(r[0]).epsilon(1e-12));  // u+ = u- on Gamma
      // conormal with the + side's outward normal nu = (-1, 0)
      const double jump = -(r[1] - l[1]);
      REQUIRE(jump == Approx((*mc.data.h)({0.5, y}, 1, {})).epsilon(1e-12));
    }
  }

  SECTION("corner cases satisfy the strong form (finite-difference Hessian)") {
    const auto dc = make_case(CaseKind::DirichletCorner, fixtures::lshape());
    check_strong_form(dc, {{{0.2, 0.3}, 0}, {{-0.4, 0.5}, 0}, {{-0.3, -0.6}, 0}}, 1e-5);
    const auto nn = make_case(CaseKind::NNCorner, fixtures::lshape_all_neumann());
    check_strong_form(nn, {{{0.2, 0.3}, 0}, {{-0.4, 0.5}, 0}}, 1e-5);
    // Dirichlet trace of the corner mode vanishes on both legs
    for (double r : {0.1, 0.4, 0.8}) {
      double d[10];
      dc.exact.derivs({r, 0.0}, 0, d);
      REQUIRE(d[0] == Approx(0.0).margin(1e-12));
      dc.exact.derivs({0.0, -r}, 0, d);
      REQUIRE(d[0] == Approx(0.0).margin(1e-12));
    }
    // Neumann flux of the NN mode vanishes on the legs
    for (double r : {0.1, 0.4}) {
      double d[10];
      nn.exact.derivs({r, 0.0}, 0, d);
      REQUIRE(d[2] == Approx(0.0).margin(1e-10));  // normal = -e_y on the leg
      nn.exact.derivs({0.0, -r}, 0, d);
      REQUIRE(d[1] == Approx(0.0).margin(1e-10));
    }
  }

  SECTION("kind/domain mismatches are configuration errors") {
    REQUIRE_THROWS_AS(make_case(CaseKind::Smooth, fixtures::split_square_dirichlet()),
                      ValidationError);
    REQUIRE_THROWS_AS(make_case(CaseKind::DirichletCorner, fixtures::unit_square()),
                      ValidationError);
    REQUIRE_THROWS_AS(make_case(CaseKind::TransmissionKink, fixtures::unit_square()),
                      ValidationError);
    REQUIRE_THROWS_AS(make_case(CaseKind::NNCorner, fixtures::lshape()), ValidationError);
  }
}

TEST_CASE("rate studies", "[harness][rates]") {
  SECTION("smooth case: p = 1 gives H1 slope 1 and L2 slope 2") {
    const auto mc = make_case(CaseKind::Smooth, fixtures::unit_square());
    const auto rep = run_rate_study(mc, 1, 4, RefineMode::Uniform);
    REQUIRE_FALSE(rep.instability);
    REQUIRE(rep.slope_h1 == Approx(1.0).margin(0.15));
    REQUIRE(rep.slope_l2 == Approx(2.0).margin(0.2));
    REQUIRE(rep.pass);
    // halving h halves the H1 error within [1.8, 2.2] on asymptotic levels
    const std::size_t n = rep.err_h1.size();
    const double ratio = rep.err_h1[n - 2] / rep.err_h1[n - 1];
    REQUIRE(ratio >= 1.8);
    REQUIRE(ratio <= 2.2);
    // DOF slope: H1 rate 1 corresponds to DOF^{-1/2}
    REQUIRE(rep.slope_h1_dof == Approx(1.0).margin(0.2));
  }

  SECTION("graded with kappa = 1/2 coincides with uniform refinement") {
    const auto mc = make_case(CaseKind::Smooth, fixtures::unit_square());
    const auto uni = run_rate_study(mc, 1, 4, RefineMode::Uniform);
    const auto gra = run_rate_study(mc, 1, 4, RefineMode::Graded);  // eta = 2 => kappa = 1/2
    for (std::size_t i = 0; i < uni.err_h1.size(); ++i) {
      REQUIRE(gra.err_h1[i] == Approx(uni.err_h1[i]).epsilon(1e-13));
      REQUIRE(gra.dofs[i] == uni.dofs[i]);
    }
  }

  SECTION("L-shape corner: uniform is capped at 2/3, grading restores order 1 for p = 1") {
    const auto mc = make_case(CaseKind::DirichletCorner, fixtures::lshape());
    // the cutoff part of u* converges at rate 1 and fades slowly; fit on
    // the later levels where the corner term dominates
    RateStudyOptions opts;
    opts.fit_skip = 2;
    const auto uni = run_rate_study(mc, 1, 6, RefineMode::Uniform, opts);
    REQUIRE(uni.target == Approx(2.0 / 3.0));
    REQUIRE(uni.slope_h1 == Approx(2.0 / 3.0).margin(0.15));
    const auto gra = run_rate_study(mc, 1, 5, RefineMode::Graded, opts);
    REQUIRE(gra.slope_h1 == Approx(1.0).margin(0.15));
    REQUIRE(gra.pass);
  }

  SECTION("transmission-kink converges at full order despite the jump") {
    const auto mc = make_case(CaseKind::TransmissionKink, fixtures::split_square_transmission());
    const auto p1 = run_rate_study(mc, 1, 4, RefineMode::Uniform);
    REQUIRE(p1.slope_h1 == Approx(1.0).margin(0.15));
    const auto p2 = run_rate_study(mc, 2, 4, RefineMode::Uniform);
    REQUIRE(p2.slope_h1 == Approx(2.0).margin(0.15));
  }

  SECTION("interface load term: correct h converges to u*, h = 0 does not") {
    auto mc = make_case(CaseKind::InterfaceFluxJump, fixtures::split_square_dirichlet());
    const auto good = run_rate_study(mc, 2, 4, RefineMode::Uniform);
    REQUIRE(good.slope_h1 == Approx(2.0).margin(0.15));

    ManufacturedCase wrong = mc;
    wrong.data.h = ScalarField::constant(0.0);  // drop the jump load
    GradedMesh mesh = generate_initial_mesh(wrong.domain, 0.5);
    for (int l = 0; l < 3; ++l) mesh = refine(mesh, RefineMode::Uniform);
    auto space = std::make_shared<FESpace>(std::make_shared<GradedMesh>(mesh), 2);
    const auto sol = solve_problem(wrong.fam, wrong.data, space, {});
    const auto err = compute_error(*space, sol.coeffs, wrong.exact);
    REQUIRE(err.h1 > 0.05);  // converges to a different limit
    REQUIRE(err.h1 > 20 * good.err_h1.back());
  }

  SECTION("too few levels are rejected") {
    const auto mc = make_case(CaseKind::Smooth, fixtures::unit_square());
    REQUIRE_THROWS_AS(run_rate_study(mc, 1, 3, RefineMode::Uniform), ValidationError);
  }
}

TEST_CASE("shift constant probe", "[harness][shift]") {
  SECTION("smooth declared-smooth square: bounded ratio, trivially split") {
    auto dom = std::make_shared<DomainSpec>(make_domain(
        {{0, 0}, {1, 0}, {1, 1}, {0, 1}}, {{0, 1, 2, 3}},
        {{0, 1, BC::Dirichlet}, {1, 2, BC::Dirichlet}, {2, 3, BC::Dirichlet},
         {3, 0, BC::Dirichlet}},
        {}, /*exactly_smooth=*/true));
    const auto mc = make_case(CaseKind::Smooth, dom);
    ShiftProbeOptions opts;
    opts.levels = 3;
    const auto rep = shift_constant_probe(mc, 1, 0.0, 2, /*weighted=*/false, opts);
    REQUIRE_FALSE(rep.not_applicable);
    REQUIRE_FALSE(rep.divergent);
    REQUIRE(rep.bounded);
    for (const auto& lev : rep.levels) REQUIRE(lev.u_s_l2 == 0.0);  // V_s empty
  }

  SECTION("NN corner: admissible weight bounded, inadmissible diverges") {
    const auto mc = make_case(CaseKind::NNCorner, fixtures::lshape_all_neumann());
    ShiftProbeOptions opts;
    opts.levels = 4;
    opts.initial_h = 0.7;
    const auto ok = shift_constant_probe(mc, 1, 0.5, 2, true, opts);
    REQUIRE(ok.eta_min == Approx(2.0 / 3.0).margin(1e-9));
    REQUIRE_FALSE(ok.divergent);
    REQUIRE(ok.bounded);

    // a = 0.9 > eta_min: rejected by default
    REQUIRE_THROWS_AS(shift_constant_probe(mc, 1, 0.9, 2, true, opts), MathError);
    // diagnostics opt in and witness the divergence across levels
    ShiftProbeOptions diag = opts;
    diag.enforce_weight_range = false;
    const auto bad = shift_constant_probe(mc, 1, 0.9, 2, true, diag);
    REQUIRE(bad.divergent);
  }

  SECTION("zero data is reported as not applicable") {
    auto mc = make_case(CaseKind::Smooth, fixtures::unit_square());
    mc.data.f = ScalarField::constant(0.0);
    mc.f_field.max_order = 3;
    mc.f_field.derivs = [](Vec2, int, double* out) {
      for (int i = 0; i < 10; ++i) out[i] = 0;
    };
    const auto rep = shift_constant_probe(mc, 1, 0.0, 2, false);
    REQUIRE(rep.not_applicable);
  }
}
