#pragma once

#include <cmath>
#include <complex>
#include <limits>
#include <memory>
#include <string>

#include "kfem/coefficients.hpp"
#include "kfem/geometry.hpp"
#include "kfem/norms.hpp"

namespace kfem {

enum class CaseKind { Smooth, DirichletCorner, NNCorner, TransmissionKink, InterfaceFluxJump };

/// A boundary value / transmission problem with a known exact solution:
/// coefficients and data ready for assembly, plus derivative-carrying
/// handles of u*, f, and the volume representatives of g and h for norm
/// evaluation. Data are consistent with the strong form by construction.
struct ManufacturedCase {
  std::string name;
  std::shared_ptr<const DomainSpec> domain;
  CoefficientFamily fam;
  SourceData data;
  FieldFunction exact;     // order >= 1
  FieldFunction f_field;   // order >= 1
  FieldFunction g_volume;  // volume representative of g (zero if none)
  FieldFunction h_volume;  // volume representative of h (zero if none)
  double eta_min = 4.0;    // smallest corner exponent of the fixture
  /// Regularity cap of the exact solution itself (infinite when u* is
  /// piecewise smooth; the corner exponent when u* carries the
  /// singularity).
  double solution_rate_cap = std::numeric_limits<double>::infinity();

  /// Expected H1 convergence order on uniform meshes for degree p.
  double uniform_rate(int p) const {
    return std::min(static_cast<double>(p), solution_rate_cap);
  }
};

namespace detail {

constexpr double kPi = 3.14159265358979323846;

inline FieldFunction zero_field() {
  FieldFunction f;
  f.max_order = 3;
  f.derivs = [](Vec2, int, double* out) {
    for (int i = 0; i < 10; ++i) out[i] = 0.0;
  };
  return f;
}

/// Polynomial bubble localizing the corner mode: vanishing value (and for
/// the Neumann variant also the normal derivative) on the outer edges
/// x = +-1, y = +-1 of the L-shape, equal to 1 at the reentrant corner.
/// Carries value, gradient, Hessian, and the gradient of its Laplacian.
struct Bubble {
  bool neumann;  // squared factors give zero normal flux on the walls

  void eval(Vec2 x, double& B, Vec2& dB, double* hess, Vec2& dLap) const {
    const double P = 1 - x.x * x.x, Q = 1 - x.y * x.y;
    const double Px = -2 * x.x, Qy = -2 * x.y;
    if (!neumann) {
      B = P * Q;
      dB = {Px * Q, P * Qy};
      hess[0] = -2 * Q;
      hess[1] = Px * Qy;
      hess[2] = -2 * P;
      dLap = {4 * x.x, 4 * x.y};  // Laplacian is -2Q - 2P
    } else {
      B = P * P * Q * Q;
      dB = {2 * P * Px * Q * Q, 2 * P * P * Q * Qy};
      hess[0] = (8 * x.x * x.x - 4 * P) * Q * Q;
      hess[1] = 4 * P * Px * Q * Qy;
      hess[2] = (8 * x.y * x.y - 4 * Q) * P * P;
      // Laplacian = (8x^2 - 4P)Q^2 + (8y^2 - 4Q)P^2
      dLap = {24 * x.x * Q * Q + (8 * x.y * x.y - 4 * Q) * 2 * P * Px,
              (8 * x.x * x.x - 4 * P) * 2 * Q * Qy + 24 * x.y * P * P};
    }
  }
};

/// Corner mode v = r^gamma trig(gamma theta) on the L-shape spanning
/// theta in [0, 3pi/2] from the +x axis, evaluated through a rotated
/// principal branch so the cut lies in the removed quadrant.
/// sine = true gives sin (Dirichlet legs), false cos (Neumann legs).
struct LShapeCornerMode {
  double gamma;
  bool sine;

  std::complex<double> branch(Vec2 x) const {
    // F(z) = (z e^{-i 3pi/4})^gamma e^{i gamma 3pi/4}; arg of the rotated
    // variable stays inside (-pi, pi) on the L-shape
    const std::complex<double> rot = std::polar(1.0, -0.75 * kPi);
    const std::complex<double> z(x.x, x.y);
    return std::pow(z * rot, gamma) * std::polar(1.0, gamma * 0.75 * kPi);
  }

  /// value, gradient, and Hessian of v
  void eval(Vec2 x, double* out) const {
    const std::complex<double> z(x.x, x.y);
    const std::complex<double> F = branch(x);
    const std::complex<double> F1 = gamma * F / z;
    const std::complex<double> F2 = gamma * (gamma - 1.0) * F / (z * z);
    if (sine) {
      out[0] = F.imag();
      out[1] = F1.imag();
      out[2] = F1.real();
      out[3] = F2.imag();
      out[4] = F2.real();
      out[5] = -F2.imag();
    } else {
      out[0] = F.real();
      out[1] = F1.real();
      out[2] = -F1.imag();
      out[3] = F2.real();
      out[4] = -F2.imag();
      out[5] = -F2.real();
    }
  }
};

inline bool is_lshape_at_origin(const DomainSpec& dom) {
  for (const auto& sp : classify_singular_points(dom)) {
    if (dist(sp.location, {0, 0}) > 1e-12) continue;
    double total = 0;
    for (const auto& [k, a] : sp.angles) total += a;
    if (std::abs(total - 1.5 * kPi) < 1e-9) return true;
  }
  return false;
}

inline bool is_split_square(const DomainSpec& dom) {
  if (dom.interfaces.size() != 1 || dom.subdomains.size() != 2) return false;
  const auto& e = dom.interfaces[0];
  return std::abs(dom.vertices[e.a].x - 0.5) < 1e-12 &&
         std::abs(dom.vertices[e.b].x - 0.5) < 1e-12;
}

inline bool boundary_kind_at(const DomainSpec& dom, double x_equals, BC bc) {
  bool found = false;
  for (const auto& e : dom.boundary) {
    const Vec2 a = dom.vertices[e.a], b = dom.vertices[e.b];
    if (std::abs(a.x - x_equals) < 1e-12 && std::abs(b.x - x_equals) < 1e-12) {
      found = true;
      if (e.bc != bc) return false;
    }
  }
  return found;
}

inline bool all_boundary(const DomainSpec& dom, BC bc) {
  for (const auto& e : dom.boundary)
    if (e.bc != bc) return false;
  return true;
}

}  // namespace detail

/// Manufactured problems keyed by the structural features they exercise.
/// The domain must match the kind (reentrant corner at the origin for the
/// corner kinds, the x = 1/2 split square for the interface kinds).
inline ManufacturedCase make_case(CaseKind kind, std::shared_ptr<const DomainSpec> domain) {
  using detail::kPi;
  ManufacturedCase mc;
  mc.domain = domain;

  switch (kind) {
    case CaseKind::Smooth: {
      mc.name = "smooth";
      if (!domain->interfaces.empty() || !detail::all_boundary(*domain, BC::Dirichlet))
        throw ValidationError("case-domain-mismatch",
                              "smooth case needs a single all-Dirichlet subdomain");
      mc.fam = CoefficientFamily::laplacian();
      mc.data.f = ScalarField::from_expression("2*pi^2*sin(pi*x1)*sin(pi*x2)");
      mc.exact.max_order = 2;
      mc.exact.derivs = [](Vec2 x, int, double* out) {
        const double sx = std::sin(kPi * x.x), cx = std::cos(kPi * x.x);
        const double sy = std::sin(kPi * x.y), cy = std::cos(kPi * x.y);
        out[0] = sx * sy;
        out[1] = kPi * cx * sy;
        out[2] = kPi * sx * cy;
        out[3] = -kPi * kPi * sx * sy;
        out[4] = kPi * kPi * cx * cy;
        out[5] = -kPi * kPi * sx * sy;
      };
      mc.f_field.max_order = 2;
      mc.f_field.derivs = [exact = mc.exact](Vec2 x, int sub, double* out) {
        exact.derivs(x, sub, out);
        for (int i = 0; i < 6; ++i) out[i] *= 2 * kPi * kPi;
      };
      mc.g_volume = detail::zero_field();
      mc.h_volume = detail::zero_field();
      mc.eta_min = 4.0;  // solution is analytic; no corner activates
      return mc;
    }

    case CaseKind::DirichletCorner:
    case CaseKind::NNCorner: {
      const bool nn = kind == CaseKind::NNCorner;
      mc.name = nn ? "nn-corner" : "dirichlet-corner";
      if (!detail::is_lshape_at_origin(*domain))
        throw ValidationError("case-domain-mismatch",
                              "corner cases need the reentrant 3pi/2 corner at the origin");
      if (!detail::all_boundary(*domain, nn ? BC::Neumann : BC::Dirichlet))
        throw ValidationError("case-domain-mismatch",
                              nn ? "nn-corner needs an all-Neumann boundary (c = 1 keeps the "
                                   "form coercive)"
                                 : "dirichlet-corner needs an all-Dirichlet boundary");
      const double gamma = 2.0 / 3.0;
      const detail::LShapeCornerMode mode{gamma, !nn};
      const detail::RadialCutoff cut{0.35, 0.95};
      const double c0 = nn ? 1.0 : 0.0;

      mc.fam = CoefficientFamily::laplacian();
      if (nn) mc.fam.c = ScalarField::constant(1.0);

      mc.exact.max_order = 1;
      mc.exact.derivs = [mode, cut, c0](Vec2 x, int, double* out) {
        double v[6];
        mode.eval(x, v);
        const double r = std::sqrt(x.x * x.x + x.y * x.y);
        double s, s1, s2, s3;
        cut.eval(r, s, s1, s2, s3);
        out[0] = c0 + s * v[0];
        if (r > 1e-300) {
          const double nx = x.x / r, ny = x.y / r;
          out[1] = s1 * nx * v[0] + s * v[1];
          out[2] = s1 * ny * v[0] + s * v[2];
        } else {
          out[1] = out[2] = 0.0;  // gamma < 1: gradient blows up, cutoff=1 region
        }
      };
      // f = c0*c + [c*s - s'' - (2 gamma + 1) s'/r] v for the c-term cases;
      // Dirichlet case has c = 0
      const double cval = nn ? 1.0 : 0.0;
      mc.f_field.max_order = 1;
      mc.f_field.derivs = [mode, cut, c0, cval, gamma](Vec2 x, int, double* out) {
        double v[6];
        mode.eval(x, v);
        const double r = std::sqrt(x.x * x.x + x.y * x.y);
        double s, s1, s2, s3;
        cut.eval(r, s, s1, s2, s3);
        const double g = cval * s - s2 - (2 * gamma + 1) * s1 / (r > 1e-300 ? r : 1.0);
        out[0] = cval * c0 + g * v[0];
        if (r > 1e-300) {
          const double nx = x.x / r, ny = x.y / r;
          const double gp = cval * s1 - s3 - (2 * gamma + 1) * (s2 / r - s1 / (r * r));
          out[1] = gp * nx * v[0] + g * v[1];
          out[2] = gp * ny * v[0] + g * v[2];
        } else {
          out[1] = out[2] = 0.0;
        }
      };
      mc.data.f = ScalarField::from_function([f = mc.f_field](Vec2 x, int sub,
                                                              std::span<const double>) {
        double out[3];
        f.derivs(x, sub, out);
        return out[0];
      });
      if (nn) mc.data.g = ScalarField::constant(0.0);
      mc.g_volume = detail::zero_field();
      mc.h_volume = detail::zero_field();
      mc.eta_min = 2.0 / 3.0;
      mc.solution_rate_cap = 2.0 / 3.0;
      return mc;
    }

    case CaseKind::TransmissionKink: {
      mc.name = "transmission-kink";
      if (!detail::is_split_square(*domain))
        throw ValidationError("case-domain-mismatch",
                              "transmission cases need the x = 1/2 split square");
      if (!detail::boundary_kind_at(*domain, 0.0, BC::Dirichlet) ||
          !detail::boundary_kind_at(*domain, 1.0, BC::Dirichlet))
        throw ValidationError("case-domain-mismatch",
                              "transmission-kink needs Dirichlet walls at x = 0 and x = 1");
      const double a1 = 1.0, a2 = 3.0;
      mc.fam.a11 = ScalarField::per_subdomain({"1", "3"});
      mc.fam.a22 = ScalarField::per_subdomain({"1", "3"});
      mc.data.f = ScalarField::from_expression("sin(pi*x1)");
      mc.data.g = ScalarField::constant(0.0);
      // X1 = (sin(pi x) - x)/pi^2, X2 = (sin(pi x) - x + 1)/(3 pi^2):
      // continuous at 1/2 with matched conormal flux (h = 0, flux -1/pi^2)
      mc.exact.max_order = 2;
      mc.exact.derivs = [a1, a2](Vec2 x, int sub, double* out) {
        const double pi2 = kPi * kPi;
        const double a = sub == 0 ? a1 : a2;
        const double shift = sub == 0 ? 0.0 : 1.0;
        out[0] = (std::sin(kPi * x.x) - x.x + shift) / (a * pi2);
        out[1] = (kPi * std::cos(kPi * x.x) - 1.0) / (a * pi2);
        out[2] = 0.0;
        out[3] = -std::sin(kPi * x.x) / a;
        out[4] = 0.0;
        out[5] = 0.0;
      };
      mc.f_field.max_order = 2;
      mc.f_field.derivs = [](Vec2 x, int, double* out) {
        out[0] = std::sin(kPi * x.x);
        out[1] = kPi * std::cos(kPi * x.x);
        out[2] = 0.0;
        out[3] = -kPi * kPi * std::sin(kPi * x.x);
        out[4] = out[5] = 0.0;
      };
      mc.g_volume = detail::zero_field();
      mc.h_volume = detail::zero_field();
      mc.eta_min = 1.0;  // Dirichlet-Neumann quarter corners
      return mc;
    }

    case CaseKind::InterfaceFluxJump: {
      mc.name = "interface-flux-jump";
      if (!detail::is_split_square(*domain))
        throw ValidationError("case-domain-mismatch",
                              "interface cases need the x = 1/2 split square");
      const double C = 2.0;
      mc.fam = CoefficientFamily::laplacian();
      mc.data.f = ScalarField::per_subdomain(
          {"2*pi^2*sin(pi*x1)*sin(pi*x2)",
           "2*pi^2*sin(pi*x1)*sin(pi*x2) + 2*(2 + pi^2*(x1 - 0.5)*(1 - x1))*sin(pi*x2)"});
      // conormal jump (a grad u)+ . nu - (a grad u)- . nu with nu the
      // outward normal of the + side: nu = (-1, 0) for this interface
      mc.data.h = ScalarField::from_expression("0 - sin(pi*x2)");
      mc.exact.max_order = 2;
      mc.exact.derivs = [C](Vec2 x, int sub, double* out) {
        const double sx = std::sin(kPi * x.x), cx = std::cos(kPi * x.x);
        const double sy = std::sin(kPi * x.y), cy = std::cos(kPi * x.y);
        out[0] = sx * sy;
        out[1] = kPi * cx * sy;
        out[2] = kPi * sx * cy;
        out[3] = -kPi * kPi * sx * sy;
        out[4] = kPi * kPi * cx * cy;
        out[5] = -kPi * kPi * sx * sy;
        if (sub == 1) {
          const double q = (x.x - 0.5) * (1 - x.x);
          const double qx = 1.5 - 2 * x.x;
          out[0] += C * q * sy;
          out[1] += C * qx * sy;
          out[2] += C * q * kPi * cy;
          out[3] += -2 * C * sy;
          out[4] += C * qx * kPi * cy;
          out[5] += -C * q * kPi * kPi * sy;
        }
      };
      mc.f_field.max_order = 1;
      mc.f_field.derivs = [C](Vec2 x, int sub, double* out) {
        const double sx = std::sin(kPi * x.x), cx = std::cos(kPi * x.x);
        const double sy = std::sin(kPi * x.y), cy = std::cos(kPi * x.y);
        out[0] = 2 * kPi * kPi * sx * sy;
        out[1] = 2 * kPi * kPi * kPi * cx * sy;
        out[2] = 2 * kPi * kPi * kPi * sx * cy;
        if (sub == 1) {
          const double q = (x.x - 0.5) * (1 - x.x);
          out[0] += C * (2 + kPi * kPi * q) * sy;
          out[1] += C * kPi * kPi * (1.5 - 2 * x.x) * sy;
          out[2] += C * (2 + kPi * kPi * q) * kPi * cy;
        }
      };
      mc.g_volume = detail::zero_field();
      mc.h_volume.max_order = 1;
      mc.h_volume.derivs = [](Vec2 x, int, double* out) {
        out[0] = -std::sin(kPi * x.y);
        out[1] = 0.0;
        out[2] = -kPi * std::cos(kPi * x.y);
      };
      mc.eta_min = 2.0;  // all-Dirichlet square corners
      return mc;
    }
  }
  throw ValidationError("case-kind", "unknown manufactured case kind");
}

inline CaseKind case_kind_from_name(const std::string& name) {
  if (name == "smooth") return CaseKind::Smooth;
  if (name == "dirichlet-corner") return CaseKind::DirichletCorner;
  if (name == "nn-corner") return CaseKind::NNCorner;
  if (name == "transmission-kink") return CaseKind::TransmissionKink;
  if (name == "interface-flux-jump") return CaseKind::InterfaceFluxJump;
  throw ValidationError("case-kind", "unknown case '" + name + "'");
}

}  // namespace kfem
