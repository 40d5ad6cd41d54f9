#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "kfem/coefficients.hpp"
#include "kfem/errors.hpp"
#include "kfem/geometry.hpp"

namespace kfem {

/// Angular sector of a corner: width in radians and the (isotropic,
/// frozen-at-the-corner) scalar diffusion constant inside it.
struct CornerSector {
  double angle;
  double diffusion;
};

enum class CornerBC { Dirichlet, Neumann };

/// Corner model: sectors in counterclockwise order. Boundary corners carry
/// a condition on each bounding ray; interior corners (interfaces running
/// through the point) are periodic with total angle 2 pi.
struct CornerConfig {
  std::vector<CornerSector> sectors;
  bool periodic = false;
  CornerBC bc_start = CornerBC::Dirichlet;
  CornerBC bc_end = CornerBC::Dirichlet;

  double total_angle() const {
    double s = 0.0;
    for (const auto& sec : sectors) s += sec.angle;
    return s;
  }
};

/// Exponents of one corner: positive real roots of the angular eigenvalue
/// problem in (0, scan_limit], sorted ascending with multiplicity, plus a
/// flag for the lambda = 0 constant mode (the W_s mode at Neumann-Neumann
/// and interior corners).
struct ExponentEntry {
  std::vector<double> exponents;
  bool zero_mode = false;
  double eta = 0.0;  // smallest positive exponent (0 mode excluded)

  Vec2 location;
  int vertex = -1;
  bool in_Vs = false;
  std::vector<double> y_at_min;  // parametric families: minimizing sample
};

namespace detail {

using Mat2 = Eigen::Matrix2d;

/// Transfer of (phi, a phi') across one sector, with analytic
/// lambda-derivative; handles the lambda -> 0 limit.
inline void sector_transfer(double lambda, const CornerSector& sec, Mat2& M, Mat2& dM) {
  const double d = sec.angle, a = sec.diffusion;
  if (lambda < 1e-12) {
    M << 1.0, d / a, 0.0, 1.0;
    dM.setZero();
    return;
  }
  const double s = std::sin(lambda * d), c = std::cos(lambda * d);
  M << c, s / (lambda * a), -lambda * a * s, c;
  dM << -d * s, (d * c * lambda - s) / (lambda * lambda * a),
      -a * s - lambda * a * d * c, -d * s;
}

inline void total_transfer(double lambda, const CornerConfig& cfg, Mat2& M, Mat2& dM) {
  M.setIdentity();
  dM.setZero();
  Mat2 Mi, dMi;
  for (const auto& sec : cfg.sectors) {
    sector_transfer(lambda, sec, Mi, dMi);
    dM = dMi * M + Mi * dM;
    M = Mi * M;
  }
}

struct RootFunction {
  const CornerConfig& cfg;

  /// Characteristic value whose zeros are the exponents, plus d/dlambda.
  void eval(double lambda, double& f, double& df) const {
    Mat2 M, dM;
    total_transfer(lambda, cfg, M, dM);
    if (cfg.periodic) {
      // Hill discriminant: eigenvalue 1 of the unimodular transfer matrix
      f = M.trace() - 2.0;
      df = dM.trace();
      return;
    }
    Eigen::Vector2d v0 = cfg.bc_start == CornerBC::Dirichlet ? Eigen::Vector2d(0, 1)
                                                             : Eigen::Vector2d(1, 0);
    const Eigen::Vector2d w = M * v0;
    const Eigen::Vector2d dw = dM * v0;
    if (cfg.bc_end == CornerBC::Dirichlet) {
      f = w(0);
      df = dw(0);
    } else {
      f = w(1);
      df = dw(1);
    }
  }

  double value(double lambda) const {
    double f, df;
    eval(lambda, f, df);
    return f;
  }

  /// Squared distance of the transfer matrix from the identity; its zeros
  /// are the closed-gap (double) periodic roots.
  void identity_gap(double lambda, double& h, double& dh) const {
    Mat2 M, dM;
    total_transfer(lambda, cfg, M, dM);
    const Mat2 E = M - Mat2::Identity();
    h = E.squaredNorm();
    dh = 2.0 * (E.array() * dM.array()).sum();
  }
};

inline double bisect(const std::function<double(double)>& f, double lo, double hi, double flo) {
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (hi - lo < 1e-13) return mid;
    const double fm = f(mid);
    if (fm == 0.0) return mid;
    if ((flo < 0) == (fm < 0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace detail

/// Positive roots of the corner characteristic function on (0, limit] by
/// scanning plus bisection. Extrema of the characteristic value are
/// located from its analytic lambda-derivative so that nearly-degenerate
/// root pairs inside one scan step are still resolved; for periodic
/// corners a vanishing transfer-matrix identity gap marks a closed
/// spectral gap, i.e. a double root, which is reported twice.
inline std::vector<double> corner_exponent_scan(const CornerConfig& cfg, double limit = 4.0,
                                                double step = 1e-3) {
  detail::RootFunction rf{cfg};

  const int n = static_cast<int>(limit / step);
  std::vector<double> ls(n), fs(n), dfs(n);
  double scale_f = 0.0;
  for (int i = 0; i < n; ++i) {
    ls[i] = (i + 1) * step;
    rf.eval(ls[i], fs[i], dfs[i]);
    scale_f = std::max(scale_f, std::abs(fs[i]));
  }
  const double touch_tol = 1e-9 * std::max(scale_f, 1.0);
  auto sgn = [&](double f) { return f > touch_tol ? 1 : (f < -touch_tol ? -1 : 0); };
  auto fval = [&](double x) { return rf.value(x); };

  std::vector<double> candidates;
  for (int i = 0; i + 1 < n; ++i) {
    const double l0 = ls[i], l1 = ls[i + 1];
    const double f0 = fs[i], f1 = fs[i + 1];
    if ((dfs[i] < 0) != (dfs[i + 1] < 0)) {
      // extremum inside: split the interval at it
      const double le = detail::bisect(
          [&](double x) {
            double f, df;
            rf.eval(x, f, df);
            return df;
          },
          l0, l1, dfs[i]);
      const double fe = fval(le);
      bool crossed = false;
      if (sgn(f0) * sgn(fe) == -1) {
        candidates.push_back(detail::bisect(fval, l0, le, f0));
        crossed = true;
      }
      if (sgn(fe) * sgn(f1) == -1) {
        candidates.push_back(detail::bisect(fval, le, l1, fe));
        crossed = true;
      }
      if (!crossed && sgn(fe) == 0) candidates.push_back(le);
    } else if (sgn(f0) * sgn(f1) == -1) {
      candidates.push_back(detail::bisect(fval, l0, l1, f0));
    } else if (sgn(f0) == 0 && sgn(f1) != 0 && i > 0 && sgn(fs[i - 1]) != 0) {
      candidates.push_back(l0);  // isolated grid-exact zero
    }
  }
  std::sort(candidates.begin(), candidates.end());

  // group near-identical candidates; decide multiplicity per group
  std::vector<double> out;
  std::size_t i = 0;
  while (i < candidates.size()) {
    std::size_t j = i;
    while (j + 1 < candidates.size() && candidates[j + 1] - candidates[i] < 1e-7) ++j;
    double lam = candidates[(i + j) / 2];
    int multiplicity = 1;
    if (cfg.periodic) {
      // polish against the identity gap and detect closed gaps
      double h, dh;
      double lo = std::max(step, lam - 2 * step), hi = std::min(limit, lam + 2 * step);
      double dlo, dhi, hv;
      rf.identity_gap(lo, hv, dlo);
      rf.identity_gap(hi, hv, dhi);
      if (dlo < 0 && dhi > 0) {
        lam = detail::bisect(
            [&](double x) {
              double hh, dd;
              rf.identity_gap(x, hh, dd);
              return dd;
            },
            lo, hi, dlo);
      }
      rf.identity_gap(lam, h, dh);
      if (h <= 1e-12 * std::max(1.0, scale_f)) multiplicity = 2;
    }
    for (int k = 0; k < multiplicity; ++k) out.push_back(lam);
    i = j + 1;
  }
  return out;
}

/// Independent oracle: P2 finite element discretization of the angular
/// Sturm-Liouville eigenproblem -(a phi')' = Lambda a phi with the
/// corner's boundary/periodic coupling, Richardson-extrapolated over two
/// meshes. Eigenvalues Lambda map to exponents sqrt(Lambda).
inline std::vector<double> sturm_liouville_exponents(const CornerConfig& cfg, double limit = 4.0,
                                                     int elements_per_unit = 64) {
  auto solve_on = [&](int mult) -> std::vector<double> {
    // mesh aligned with the sector breakpoints
    std::vector<double> breaks{0.0};
    std::vector<double> diff;
    for (const auto& s : cfg.sectors) {
      breaks.push_back(breaks.back() + s.angle);
      diff.push_back(s.diffusion);
    }
    std::vector<double> nodes{0.0};
    std::vector<double> elem_a;
    for (std::size_t s = 0; s + 1 < breaks.size(); ++s) {
      const double w = breaks[s + 1] - breaks[s];
      const int ne = std::max(8, static_cast<int>(std::ceil(w * elements_per_unit))) * mult;
      for (int e = 1; e <= ne; ++e) {
        nodes.push_back(breaks[s] + w * e / ne);
        elem_a.push_back(diff[s]);
      }
    }
    const int ne_total = static_cast<int>(elem_a.size());
    int ndof = 2 * ne_total + 1;  // P2: endpoints + midpoints

    // global numbering: endpoint i -> 2i, midpoint of element e -> 2e+1
    auto endpoint = [](int i) { return 2 * i; };
    const bool periodic = cfg.periodic;
    auto wrap = [&](int g) {
      if (periodic && g == 2 * ne_total) return 0;
      return g;
    };

    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(ndof, ndof);
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(ndof, ndof);
    const QuadRule1D gauss = gauss_legendre(3);
    for (int e = 0; e < ne_total; ++e) {
      const double h = nodes[e + 1] - nodes[e];
      const double a = elem_a[e];
      double Ke[3][3] = {}, Me[3][3] = {};
      for (std::size_t q = 0; q < gauss.points.size(); ++q) {
        const double t = 0.5 * (gauss.points[q] + 1.0);
        const double wq = 0.5 * gauss.weights[q] * h;
        const double N[3] = {(1 - t) * (1 - 2 * t), 4 * t * (1 - t), t * (2 * t - 1)};
        const double dN[3] = {(4 * t - 3) / h, (4 - 8 * t) / h, (4 * t - 1) / h};
        for (int i = 0; i < 3; ++i)
          for (int j = 0; j < 3; ++j) {
            Ke[i][j] += wq * a * dN[i] * dN[j];
            Me[i][j] += wq * a * N[i] * N[j];
          }
      }
      const int g[3] = {wrap(endpoint(e)), 2 * e + 1, wrap(endpoint(e + 1))};
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
          K(g[i], g[j]) += Ke[i][j];
          M(g[i], g[j]) += Me[i][j];
        }
    }

    std::vector<int> keep;
    for (int i = 0; i < ndof; ++i) {
      if (periodic && i == 2 * ne_total) continue;  // folded into node 0
      if (!periodic) {
        if (i == 0 && cfg.bc_start == CornerBC::Dirichlet) continue;
        if (i == 2 * ne_total && cfg.bc_end == CornerBC::Dirichlet) continue;
      }
      keep.push_back(i);
    }
    Eigen::MatrixXd Kr(keep.size(), keep.size()), Mr(keep.size(), keep.size());
    for (std::size_t i = 0; i < keep.size(); ++i)
      for (std::size_t j = 0; j < keep.size(); ++j) {
        Kr(i, j) = K(keep[i], keep[j]);
        Mr(i, j) = M(keep[i], keep[j]);
      }
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(Kr, Mr);
    if (es.info() != Eigen::Success)
      throw MathError("eigensolver", "angular Sturm-Liouville eigensolve failed");
    std::vector<double> lam;
    for (int i = 0; i < es.eigenvalues().size(); ++i) {
      const double L = es.eigenvalues()(i);
      if (L > -1e-9 && L < (limit + 0.5) * (limit + 0.5))
        lam.push_back(std::sqrt(std::max(0.0, L)));
    }
    std::sort(lam.begin(), lam.end());
    return lam;
  };

  const std::vector<double> coarse = solve_on(1);
  const std::vector<double> fine = solve_on(2);
  std::vector<double> out;
  for (std::size_t i = 0; i < coarse.size() && i < fine.size(); ++i) {
    // P2 eigenvalues converge at order 4: Richardson over the mesh pair
    const double l2c = coarse[i] * coarse[i], l2f = fine[i] * fine[i];
    const double l2 = (16.0 * l2f - l2c) / 15.0;
    if (l2 < -1e-9) continue;
    const double l = std::sqrt(std::max(0.0, l2));
    if (l <= limit + 1e-6) out.push_back(l);
  }
  return out;
}

/// Exponents of one corner with oracle cross-validation. The scan is the
/// primary path; the Sturm-Liouville discretization must agree to 1e-6 on
/// every root up to the validation limit or an internal-consistency error
/// is raised.
inline ExponentEntry compute_singular_exponents(const CornerConfig& cfg,
                                                bool cross_validate = true) {
  for (const auto& s : cfg.sectors) {
    if (!(s.angle > 0) || !(s.diffusion > 0))
      throw ValidationError("corner-config", "sector angles and diffusions must be positive");
  }
  if (cfg.periodic && std::abs(cfg.total_angle() - 2 * 3.14159265358979323846) > 1e-9)
    throw ValidationError("corner-config", "periodic corners must span the full angle 2 pi");

  ExponentEntry entry;
  entry.zero_mode =
      cfg.periodic || (cfg.bc_start == CornerBC::Neumann && cfg.bc_end == CornerBC::Neumann);

  const double limit = 4.0;
  std::vector<double> roots = corner_exponent_scan(cfg, limit);

  if (cross_validate) {
    std::vector<double> oracle = sturm_liouville_exponents(cfg, limit);
    // drop the zero modes (the discrete zero eigenvalue carries O(1e-11)
    // noise, i.e. sqrt of it in the exponent)
    std::vector<double> o;
    for (double l : oracle)
      if (l > 1e-3) o.push_back(l);
    const double validate_up_to = 2.5;  // oracle accuracy degrades higher up
    std::size_t oi = 0;
    for (double r : roots) {
      if (r > validate_up_to) break;
      if (oi >= o.size())
        throw MathError("exponent-consistency",
                        "scan found root " + std::to_string(r) + " with no oracle counterpart");
      const double diff = std::abs(o[oi] - r);
      if (diff > 1e-6)
        throw MathError("exponent-consistency",
                        "scan root " + std::to_string(r) + " vs oracle " + std::to_string(o[oi]) +
                            " differ by " + std::to_string(diff));
      ++oi;
    }
    // the oracle must not see extra eigenvalues the scan missed
    if (oi < o.size() && o[oi] <= validate_up_to - 1e-3) {
      bool matched = false;
      for (double r : roots)
        if (std::abs(r - o[oi]) <= 1e-6) matched = true;
      if (!matched)
        throw MathError("exponent-consistency",
                        "oracle eigenvalue " + std::to_string(o[oi]) + " missed by the scan");
    }
  }

  for (double r : roots)
    if (r <= 2.0 + 1e-12) entry.exponents.push_back(r);
  entry.eta = roots.empty() ? limit : roots.front();
  return entry;
}

// ---------------------------------------------------------------------------
// Corner extraction from a domain + coefficient family
// ---------------------------------------------------------------------------

namespace detail {

struct RaySector {
  double start;   // angle of the first bounding ray
  double width;
  int subdomain;
};

/// Ordered sector fan around a vertex, with the bounding-ray BCs for
/// boundary corners. Throws on non-isotropic principal parts.
inline CornerConfig corner_config_at(const DomainSpec& dom, const SingularPoint& sp,
                                     const CoefficientFamily& fam, std::span<const double> y) {
  constexpr double kTwoPi = 2 * 3.14159265358979323846;
  const Vec2 q = sp.location;
  const int v = sp.vertex;

  std::vector<RaySector> sectors;
  for (std::size_t k = 0; k < dom.subdomains.size(); ++k) {
    const auto& loop = dom.subdomains[k];
    for (std::size_t i = 0; i < loop.size(); ++i) {
      if (loop[i] != v) continue;
      const Vec2 nxt = dom.vertices[loop[(i + 1) % loop.size()]];
      const double start = std::atan2(nxt.y - q.y, nxt.x - q.x);
      sectors.push_back({start, kfem::detail::interior_angle(dom.vertices, loop, i),
                         static_cast<int>(k)});
    }
  }
  if (sectors.empty()) throw ValidationError("corner-config", "vertex belongs to no subdomain");

  // chain sectors counterclockwise: each sector spans [start, start+width]
  auto norm_angle = [&](double a) {
    while (a < 0) a += kTwoPi;
    while (a >= kTwoPi) a -= kTwoPi;
    return a;
  };
  std::vector<RaySector> chain;
  std::vector<bool> used(sectors.size(), false);
  const bool interior = !sp.has(kBoundaryVertex) && !sp.has(kBCChange) &&
                        !sp.has(kInterfaceMeetsBoundary);

  // starting ray: for boundary corners, the sector whose start ray is a
  // boundary edge; for interior corners, any sector
  std::size_t first = 0;
  if (!interior) {
    for (std::size_t i = 0; i < sectors.size(); ++i) {
      const double s = sectors[i].start;
      bool is_end_of_other = false;
      for (std::size_t j = 0; j < sectors.size(); ++j) {
        if (i == j) continue;
        if (std::abs(norm_angle(sectors[j].start + sectors[j].width) - norm_angle(s)) < 1e-9)
          is_end_of_other = true;
      }
      if (!is_end_of_other) first = i;
    }
  }
  chain.push_back(sectors[first]);
  used[first] = true;
  while (chain.size() < sectors.size()) {
    const double end = norm_angle(chain.back().start + chain.back().width);
    bool found = false;
    for (std::size_t j = 0; j < sectors.size(); ++j) {
      if (used[j]) continue;
      if (std::abs(norm_angle(sectors[j].start) - end) < 1e-9) {
        chain.push_back(sectors[j]);
        used[j] = true;
        found = true;
        break;
      }
    }
    if (!found)
      throw ValidationError("corner-config", "sectors around the corner do not chain");
  }

  CornerConfig cfg;
  cfg.periodic = interior;

  // frozen one-sided diffusion per sector, probed along the bisector
  double probe_r = 1e-3;
  for (const auto& sec : chain) probe_r = std::min(probe_r, 0.25);
  for (const auto& e : dom.boundary) {
    if (e.a == v || e.b == v)
      probe_r = std::min(probe_r, 1e-3 * dist(dom.vertices[e.a], dom.vertices[e.b]));
  }
  for (const auto& e : dom.interfaces) {
    if (e.a == v || e.b == v)
      probe_r = std::min(probe_r, 1e-3 * dist(dom.vertices[e.a], dom.vertices[e.b]));
  }

  for (const auto& sec : chain) {
    const double mid = sec.start + 0.5 * sec.width;
    const Vec2 x{q.x + probe_r * std::cos(mid), q.y + probe_r * std::sin(mid)};
    const double a11 = fam.a11(x, sec.subdomain, y);
    const double a12 = fam.a12(x, sec.subdomain, y);
    const double a22 = fam.a22(x, sec.subdomain, y);
    const double scale = std::abs(a11) + std::abs(a22);
    if (std::abs(a11 - a22) > 1e-8 * scale || std::abs(a12) > 1e-8 * scale)
      throw ValidationError("unsupported-corner",
                            "corner exponents need an isotropic principal part near the corner");
    cfg.sectors.push_back({sec.width, a11});
  }

  if (!interior) {
    // bounding rays: start ray of the first sector, end ray of the last
    auto ray_bc = [&](double ang) -> CornerBC {
      for (const auto& e : dom.boundary) {
        if (e.a != v && e.b != v) continue;
        const Vec2 other = dom.vertices[e.a == v ? e.b : e.a];
        const double ea = std::atan2(other.y - q.y, other.x - q.x);
        if (std::abs(norm_angle(ea) - norm_angle(ang)) < 1e-9)
          return e.bc == BC::Dirichlet ? CornerBC::Dirichlet : CornerBC::Neumann;
      }
      throw ValidationError("corner-config", "bounding ray of a boundary corner has no BC tag");
    };
    cfg.bc_start = ray_bc(chain.front().start);
    cfg.bc_end = ray_bc(chain.back().start + chain.back().width);
  }
  return cfg;
}

}  // namespace detail

/// Full exponent report for a domain: one entry per singular point, the
/// global minimum eta_min, and (for parametric families) the sampled
/// minimizer over the parameter box.
struct ExponentReport {
  std::vector<ExponentEntry> entries;
  double eta_min = 0.0;

  const ExponentEntry* at_vertex(int v) const {
    for (const auto& e : entries)
      if (e.vertex == v) return &e;
    return nullptr;
  }
};

inline ExponentReport eta_for_domain(const DomainSpec& dom, const CoefficientFamily& fam,
                                     const SamplePlan& plan = SamplePlan{},
                                     bool cross_validate = true) {
  ExponentReport rep;
  const auto points = classify_singular_points(dom);
  if (points.empty()) {
    rep.eta_min = 4.0;  // smooth case: no corner constraint below the scan limit
    return rep;
  }
  const auto ys = parameter_samples(fam.n_params, plan);
  for (const auto& sp : points) {
    ExponentEntry best;
    bool have = false;
    for (std::size_t yi = 0; yi < ys.size(); ++yi) {
      const auto cfg = detail::corner_config_at(dom, sp, fam, ys[yi]);
      // validate on the first sample; exponents of scaled families coincide
      ExponentEntry e = compute_singular_exponents(cfg, cross_validate && yi == 0);
      if (!have || e.eta < best.eta) {
        best = e;
        best.y_at_min = ys[yi];
        have = true;
      }
    }
    best.location = sp.location;
    best.vertex = sp.vertex;
    best.in_Vs = sp.in_Vs;
    rep.entries.push_back(std::move(best));
  }
  rep.eta_min = std::numeric_limits<double>::max();
  for (const auto& e : rep.entries) rep.eta_min = std::min(rep.eta_min, e.eta);
  return rep;
}

}  // namespace kfem
