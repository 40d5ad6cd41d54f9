#pragma once

#include <memory>

#include "kfem/geometry.hpp"
#include "kfem/mesh.hpp"

namespace fixtures {

using kfem::BC;
using kfem::DomainSpec;
using kfem::Vec2;

/// Unit square (0,1)^2, one subdomain, one BC for the whole boundary.
inline std::shared_ptr<const DomainSpec> unit_square(BC bc = BC::Dirichlet) {
  return std::make_shared<DomainSpec>(kfem::make_domain(
      {{0, 0}, {1, 0}, {1, 1}, {0, 1}}, {{0, 1, 2, 3}},
      {{0, 1, bc}, {1, 2, bc}, {2, 3, bc}, {3, 0, bc}}));
}

/// Unit square with per-edge BCs: bottom, right, top, left.
inline std::shared_ptr<const DomainSpec> unit_square_bc(BC bottom, BC right, BC top, BC left) {
  return std::make_shared<DomainSpec>(kfem::make_domain(
      {{0, 0}, {1, 0}, {1, 1}, {0, 1}}, {{0, 1, 2, 3}},
      {{0, 1, bottom}, {1, 2, right}, {2, 3, top}, {3, 0, left}}));
}

/// Square split by the interface x = 1/2 into left (subdomain 0) and right
/// (subdomain 1); the interface runs upward so its + side is the right
/// subdomain. BCs: bottom-left, bottom-right, right, top-right, top-left,
/// left.
inline std::shared_ptr<const DomainSpec> split_square(BC bl, BC br, BC right, BC tr, BC tl,
                                                      BC left) {
  return std::make_shared<DomainSpec>(kfem::make_domain(
      {{0, 0}, {0.5, 0}, {1, 0}, {1, 1}, {0.5, 1}, {0, 1}},
      {{0, 1, 4, 5}, {1, 2, 3, 4}},
      {{0, 1, bl}, {1, 2, br}, {2, 3, right}, {3, 4, tr}, {4, 5, tl}, {5, 0, left}}));
}

inline std::shared_ptr<const DomainSpec> split_square_dirichlet() {
  return split_square(BC::Dirichlet, BC::Dirichlet, BC::Dirichlet, BC::Dirichlet, BC::Dirichlet,
                      BC::Dirichlet);
}

/// Transmission fixture: Dirichlet on x = 0 and x = 1, Neumann top/bottom.
inline std::shared_ptr<const DomainSpec> split_square_transmission() {
  return split_square(BC::Neumann, BC::Neumann, BC::Dirichlet, BC::Neumann, BC::Neumann,
                      BC::Dirichlet);
}

/// L-shaped domain (-1,1)^2 minus the closed quadrant x >= 0, y <= 0; the
/// reentrant corner sits at the origin (vertex 0) with interior angle
/// 3 pi / 2 spanned counterclockwise from the +x axis.
inline std::shared_ptr<const DomainSpec> lshape(BC bc = BC::Dirichlet) {
  return std::make_shared<DomainSpec>(kfem::make_domain(
      {{0, 0}, {1, 0}, {1, 1}, {-1, 1}, {-1, -1}, {0, -1}}, {{0, 1, 2, 3, 4, 5}},
      {{0, 1, bc}, {1, 2, bc}, {2, 3, bc}, {3, 4, bc}, {4, 5, bc}, {5, 0, bc}}));
}

/// L-shape with Neumann conditions on the two legs meeting at the
/// reentrant corner and Dirichlet elsewhere: the corner is a
/// Neumann-Neumann singular point (in V_s).
inline std::shared_ptr<const DomainSpec> lshape_nn_corner() {
  return std::make_shared<DomainSpec>(kfem::make_domain(
      {{0, 0}, {1, 0}, {1, 1}, {-1, 1}, {-1, -1}, {0, -1}}, {{0, 1, 2, 3, 4, 5}},
      {{0, 1, BC::Neumann},
       {1, 2, BC::Dirichlet},
       {2, 3, BC::Dirichlet},
       {3, 4, BC::Dirichlet},
       {4, 5, BC::Dirichlet},
       {5, 0, BC::Neumann}}));
}

/// All-Neumann L-shape (use with c > 0 for coercivity); every corner is a
/// Neumann-Neumann singular point.
inline std::shared_ptr<const DomainSpec> lshape_all_neumann() { return lshape(BC::Neumann); }

inline std::shared_ptr<const kfem::GradedMesh> mesh_of(
    const std::shared_ptr<const DomainSpec>& dom, double target_h, int uniform_levels = 0) {
  kfem::GradedMesh m = kfem::generate_initial_mesh(dom, target_h);
  for (int l = 0; l < uniform_levels; ++l) m = kfem::refine(m, kfem::RefineMode::Uniform);
  return std::make_shared<kfem::GradedMesh>(std::move(m));
}

}  // namespace fixtures
