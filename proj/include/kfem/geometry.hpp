#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "kfem/errors.hpp"

namespace kfem {

struct Vec2 {
  double x = 0.0, y = 0.0;

  Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  double dot(Vec2 o) const { return x * o.x + y * o.y; }
  double cross(Vec2 o) const { return x * o.y - y * o.x; }
  double norm() const { return std::sqrt(x * x + y * y); }
};

inline Vec2 operator*(double s, Vec2 v) { return v * s; }
inline double dist(Vec2 a, Vec2 b) { return (a - b).norm(); }

enum class BC { Dirichlet, Neumann };

/// Undirected edge key with a < b.
struct EdgeKey {
  int a, b;
  EdgeKey(int u, int v) : a(std::min(u, v)), b(std::max(u, v)) {}
  bool operator<(const EdgeKey& o) const { return a != o.a ? a < o.a : b < o.b; }
  bool operator==(const EdgeKey& o) const { return a == o.a && b == o.b; }
};

/// Piecewise-straight decomposed domain: an outer region partitioned into
/// subdomain polygons. The interface is derived as the edges shared by two
/// subdomains; every remaining polygon edge is a boundary edge and must
/// carry a Dirichlet or Neumann tag. Immutable after construction.
class DomainSpec {
public:
  struct BoundaryEdge {
    int a, b;        // vertex indices, in subdomain loop direction
    BC bc;
    int subdomain;   // the unique polygon owning this edge
  };
  struct InterfaceEdge {
    int a, b;        // oriented a -> b; the + side lies to the right
    int plus_sub, minus_sub;
  };

  std::vector<Vec2> vertices;
  std::vector<std::vector<int>> subdomains;  // CCW vertex loops
  std::vector<BoundaryEdge> boundary;
  std::vector<InterfaceEdge> interfaces;
  /// Declared exactly-smooth geometry (smooth-case mode): the singular set
  /// is empty and the smoothed distance is identically 1.
  bool exactly_smooth = false;

  double diameter() const {
    double d = 0.0;
    for (std::size_t i = 0; i < vertices.size(); ++i)
      for (std::size_t j = i + 1; j < vertices.size(); ++j)
        d = std::max(d, dist(vertices[i], vertices[j]));
    return d;
  }

  double tol() const { return 1e-12 * std::max(1.0, diameter()); }

  bool vertex_on_dirichlet_closure(int v) const {
    for (const auto& e : boundary)
      if (e.bc == BC::Dirichlet && (e.a == v || e.b == v)) return true;
    return false;
  }

  const InterfaceEdge* find_interface(EdgeKey k) const {
    for (const auto& e : interfaces)
      if (EdgeKey(e.a, e.b) == k) return &e;
    return nullptr;
  }

  const BoundaryEdge* find_boundary(EdgeKey k) const {
    for (const auto& e : boundary)
      if (EdgeKey(e.a, e.b) == k) return &e;
    return nullptr;
  }
};

inline double polygon_signed_area(const std::vector<Vec2>& pts, const std::vector<int>& loop) {
  double s = 0.0;
  for (std::size_t i = 0; i < loop.size(); ++i) {
    const Vec2 p = pts[loop[i]];
    const Vec2 q = pts[loop[(i + 1) % loop.size()]];
    s += p.cross(q);
  }
  return 0.5 * s;
}

/// Strict point-in-polygon by winding; points on the boundary give
/// unspecified results, callers sample strictly interior points.
inline bool point_in_polygon(const std::vector<Vec2>& pts, const std::vector<int>& loop, Vec2 p) {
  bool inside = false;
  for (std::size_t i = 0, j = loop.size() - 1; i < loop.size(); j = i++) {
    const Vec2 a = pts[loop[i]], b = pts[loop[j]];
    if ((a.y > p.y) != (b.y > p.y)) {
      const double t = (p.y - a.y) / (b.y - a.y);
      if (p.x < a.x + t * (b.x - a.x)) inside = !inside;
    }
  }
  return inside;
}

inline double point_segment_distance(Vec2 p, Vec2 a, Vec2 b, double* t_out = nullptr) {
  const Vec2 d = b - a;
  const double len2 = d.dot(d);
  double t = len2 > 0 ? std::clamp((p - a).dot(d) / len2, 0.0, 1.0) : 0.0;
  if (t_out) *t_out = t;
  return dist(p, a + t * d);
}

/// Ear-clipping triangulation of a simple polygon (supports collinear and
/// reflex vertices). Returns triples of indices into `loop`'s vertex ids.
inline std::vector<std::array<int, 3>> triangulate_polygon(const std::vector<Vec2>& pts,
                                                           std::vector<int> loop) {
  std::vector<std::array<int, 3>> tris;
  if (polygon_signed_area(pts, loop) < 0) std::reverse(loop.begin(), loop.end());
  const double scale = polygon_signed_area(pts, loop);
  if (scale <= 0)
    throw ValidationError("degenerate-polygon", "polygon has non-positive area");

  auto is_ear = [&](std::size_t i) {
    const std::size_t n = loop.size();
    const Vec2 prev = pts[loop[(i + n - 1) % n]];
    const Vec2 cur = pts[loop[i]];
    const Vec2 next = pts[loop[(i + 1) % n]];
    const double cr = (cur - prev).cross(next - cur);
    if (cr <= 1e-14 * scale) return false;  // reflex or collinear
    // no other loop vertex may lie inside the candidate ear
    for (std::size_t k = 0; k < n; ++k) {
      if (k == i || k == (i + n - 1) % n || k == (i + 1) % n) continue;
      const Vec2 p = pts[loop[k]];
      const double d1 = (cur - prev).cross(p - prev);
      const double d2 = (next - cur).cross(p - cur);
      const double d3 = (prev - next).cross(p - next);
      const double eps = -1e-12 * scale;
      if (d1 >= eps && d2 >= eps && d3 >= eps) return false;
    }
    return true;
  };

  while (loop.size() > 3) {
    const std::size_t n = loop.size();
    // among valid ears prefer the one with the largest minimum angle
    std::size_t best = n;
    double best_quality = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!is_ear(i)) continue;
      const Vec2 a = pts[loop[(i + n - 1) % n]], b = pts[loop[i]], c = pts[loop[(i + 1) % n]];
      const double la = dist(b, c), lb = dist(a, c), lc = dist(a, b);
      const double area = 0.5 * std::abs((b - a).cross(c - a));
      const double q = area / (la * la + lb * lb + lc * lc);  // scale-free shape measure
      if (q > best_quality) {
        best_quality = q;
        best = i;
      }
    }
    if (best == loop.size())
      throw ValidationError("unmeshable-polygon",
                            "ear clipping failed; polygon may self-intersect");
    const std::size_t n2 = loop.size();
    tris.push_back({loop[(best + n2 - 1) % n2], loop[best], loop[(best + 1) % n2]});
    loop.erase(loop.begin() + static_cast<std::ptrdiff_t>(best));
  }
  tris.push_back({loop[0], loop[1], loop[2]});
  return tris;
}

namespace detail {

inline double edge_angle(Vec2 from, Vec2 to) { return std::atan2(to.y - from.y, to.x - from.x); }

/// Interior angle of a CCW polygon at position i of its loop.
inline double interior_angle(const std::vector<Vec2>& pts, const std::vector<int>& loop,
                             std::size_t i) {
  const std::size_t n = loop.size();
  const Vec2 v = pts[loop[i]];
  const Vec2 next = pts[loop[(i + 1) % n]];
  const Vec2 prev = pts[loop[(i + n - 1) % n]];
  double ang = edge_angle(v, prev) - edge_angle(v, next);
  while (ang <= 0) ang += 2 * 3.14159265358979323846;
  while (ang > 2 * 3.14159265358979323846) ang -= 2 * 3.14159265358979323846;
  return ang;
}

inline bool segments_properly_intersect(Vec2 a, Vec2 b, Vec2 c, Vec2 d) {
  auto sgn = [](double v) { return v > 1e-14 ? 1 : (v < -1e-14 ? -1 : 0); };
  const int d1 = sgn((b - a).cross(c - a));
  const int d2 = sgn((b - a).cross(d - a));
  const int d3 = sgn((d - c).cross(a - c));
  const int d4 = sgn((d - c).cross(b - c));
  return d1 * d2 < 0 && d3 * d4 < 0;
}

}  // namespace detail

/// Builds and validates a DomainSpec from vertex coordinates, subdomain
/// loops, and boundary tags given as (vertexA, vertexB, bc) triples.
/// Interface edges are derived; their + side defaults to the right of the
/// lower-to-higher vertex-index direction and can be overridden by naming
/// the subdomain that should be the + side of an edge.
inline DomainSpec make_domain(std::vector<Vec2> vertices,
                              std::vector<std::vector<int>> subdomain_loops,
                              const std::vector<std::tuple<int, int, BC>>& bc_tags,
                              const std::vector<std::tuple<int, int, int>>& plus_side_overrides = {},
                              bool exactly_smooth = false) {
  DomainSpec dom;
  dom.vertices = std::move(vertices);
  dom.exactly_smooth = exactly_smooth;

  const int nv = static_cast<int>(dom.vertices.size());
  for (auto& loop : subdomain_loops) {
    if (loop.size() < 3)
      throw ValidationError("open-chain", "subdomain loop with fewer than 3 vertices");
    std::set<int> uniq(loop.begin(), loop.end());
    if (uniq.size() != loop.size())
      throw ValidationError("open-chain", "subdomain loop repeats a vertex");
    for (int v : loop)
      if (v < 0 || v >= nv)
        throw ValidationError("bad-index", "subdomain loop references vertex " + std::to_string(v));
    if (polygon_signed_area(dom.vertices, loop) < 0) std::reverse(loop.begin(), loop.end());
    if (polygon_signed_area(dom.vertices, loop) <= 0)
      throw ValidationError("degenerate-polygon", "subdomain polygon has zero area");
  }
  dom.subdomains = std::move(subdomain_loops);

  // edge -> owning subdomains
  std::map<EdgeKey, std::vector<int>> owners;
  for (std::size_t k = 0; k < dom.subdomains.size(); ++k) {
    const auto& loop = dom.subdomains[k];
    for (std::size_t i = 0; i < loop.size(); ++i)
      owners[EdgeKey(loop[i], loop[(i + 1) % loop.size()])].push_back(static_cast<int>(k));
  }
  for (const auto& [key, subs] : owners)
    if (subs.size() > 2)
      throw ValidationError("overlapping-subdomains",
                            "edge (" + std::to_string(key.a) + "," + std::to_string(key.b) +
                                ") is shared by more than two subdomains");

  // proper-intersection test between edges of different subdomains
  std::vector<EdgeKey> all_edges;
  for (const auto& [key, subs] : owners) all_edges.push_back(key);
  for (std::size_t i = 0; i < all_edges.size(); ++i)
    for (std::size_t j = i + 1; j < all_edges.size(); ++j) {
      const auto& e = all_edges[i];
      const auto& f = all_edges[j];
      if (detail::segments_properly_intersect(dom.vertices[e.a], dom.vertices[e.b],
                                              dom.vertices[f.a], dom.vertices[f.b]))
        throw ValidationError("self-intersection",
                              "edges (" + std::to_string(e.a) + "," + std::to_string(e.b) +
                                  ") and (" + std::to_string(f.a) + "," + std::to_string(f.b) +
                                  ") intersect");
    }

  // T-junction guard: no vertex may sit strictly inside another edge
  const double tol = dom.tol();
  for (int v = 0; v < nv; ++v)
    for (const auto& key : all_edges) {
      if (key.a == v || key.b == v) continue;
      if (point_segment_distance(dom.vertices[v], dom.vertices[key.a], dom.vertices[key.b]) < tol)
        throw ValidationError("t-junction", "vertex " + std::to_string(v) +
                                                " lies inside edge (" + std::to_string(key.a) +
                                                "," + std::to_string(key.b) + ")");
    }

  // subdomain interiors must be pairwise disjoint (sampled)
  for (std::size_t k = 0; k < dom.subdomains.size(); ++k) {
    const auto tris = triangulate_polygon(dom.vertices, dom.subdomains[k]);
    for (const auto& t : tris) {
      const Vec2 c = (dom.vertices[t[0]] + dom.vertices[t[1]] + dom.vertices[t[2]]) * (1.0 / 3.0);
      for (std::size_t m = 0; m < dom.subdomains.size(); ++m) {
        if (m == k) continue;
        if (point_in_polygon(dom.vertices, dom.subdomains[m], c))
          throw ValidationError("overlapping-subdomains",
                                "subdomains " + std::to_string(k) + " and " + std::to_string(m) +
                                    " overlap");
      }
    }
  }

  // split edges into boundary (1 owner) and interface (2 owners)
  std::map<EdgeKey, BC> declared_bc;
  for (const auto& [a, b, bc] : bc_tags) {
    const EdgeKey key(a, b);
    if (declared_bc.count(key))
      throw ValidationError("duplicate-bc", "boundary edge (" + std::to_string(a) + "," +
                                                std::to_string(b) + ") tagged twice");
    declared_bc.emplace(key, bc);
  }

  for (const auto& [key, subs] : owners) {
    if (subs.size() == 1) {
      auto it = declared_bc.find(key);
      if (it == declared_bc.end())
        throw ValidationError("missing-bc", "boundary edge (" + std::to_string(key.a) + "," +
                                                std::to_string(key.b) + ") has no BC tag");
      // keep the CCW loop orientation so the outward normal is its right
      int ea = key.a, eb = key.b;
      const auto& loop = dom.subdomains[subs[0]];
      for (std::size_t i = 0; i < loop.size(); ++i) {
        const int u = loop[i], v = loop[(i + 1) % loop.size()];
        if (EdgeKey(u, v) == key) {
          ea = u;
          eb = v;
          break;
        }
      }
      dom.boundary.push_back({ea, eb, it->second, subs[0]});
      declared_bc.erase(it);
    } else {
      DomainSpec::InterfaceEdge e;
      e.a = key.a;
      e.b = key.b;
      // + side is to the right of a->b
      const Vec2 a = dom.vertices[e.a], b = dom.vertices[e.b];
      const Vec2 mid = (a + b) * 0.5;
      const Vec2 dir = b - a;
      const Vec2 right{dir.y, -dir.x};
      const Vec2 probe = mid + right * (1e-6 / std::max(right.norm(), 1e-300));
      int right_sub = -1;
      for (int s : subs)
        if (point_in_polygon(dom.vertices, dom.subdomains[s], probe)) right_sub = s;
      if (right_sub < 0)
        throw ValidationError("interface-orientation",
                              "cannot resolve + side of interface edge (" + std::to_string(e.a) +
                                  "," + std::to_string(e.b) + ")");
      e.plus_sub = right_sub;
      e.minus_sub = subs[0] == right_sub ? subs[1] : subs[0];
      dom.interfaces.push_back(e);
    }
  }
  if (!declared_bc.empty()) {
    const auto& key = declared_bc.begin()->first;
    throw ValidationError("bc-on-nonboundary",
                          "BC tag on edge (" + std::to_string(key.a) + "," + std::to_string(key.b) +
                              ") which is not a boundary edge");
  }

  // apply + side overrides by flipping orientation
  for (const auto& [a, b, plus] : plus_side_overrides) {
    bool found = false;
    for (auto& e : dom.interfaces) {
      if (!(EdgeKey(e.a, e.b) == EdgeKey(a, b))) continue;
      found = true;
      if (e.plus_sub == plus) break;
      if (e.minus_sub == plus) {
        std::swap(e.a, e.b);
        std::swap(e.plus_sub, e.minus_sub);
      } else {
        throw ValidationError("interface-orientation",
                              "subdomain " + std::to_string(plus) + " is not adjacent to edge (" +
                                  std::to_string(a) + "," + std::to_string(b) + ")");
      }
    }
    if (!found)
      throw ValidationError("interface-orientation", "no interface edge (" + std::to_string(a) +
                                                         "," + std::to_string(b) + ")");
  }

  std::sort(dom.boundary.begin(), dom.boundary.end(), [](const auto& l, const auto& r) {
    return EdgeKey(l.a, l.b) < EdgeKey(r.a, r.b);
  });
  std::sort(dom.interfaces.begin(), dom.interfaces.end(), [](const auto& l, const auto& r) {
    return EdgeKey(l.a, l.b) < EdgeKey(r.a, r.b);
  });
  return dom;
}

// ---------------------------------------------------------------------------
// Singular set
// ---------------------------------------------------------------------------

enum SingularCategory : unsigned {
  kBoundaryVertex = 1u,
  kBCChange = 2u,
  kInterfaceMeetsBoundary = 4u,
  kInterfaceKink = 8u,
};

struct SingularPoint {
  Vec2 location;
  int vertex = -1;          // index into DomainSpec::vertices
  unsigned categories = 0;  // bitmask of SingularCategory
  bool in_Vs = false;       // true iff not in the closure of the Dirichlet boundary
  /// Interior angle per incident subdomain, as (subdomain, angle) pairs
  /// ordered by subdomain index.
  std::vector<std::pair<int, double>> angles;

  bool has(SingularCategory c) const { return (categories & c) != 0; }
};

/// Detects the four categories of singular points: geometric boundary
/// vertices, Dirichlet/Neumann change points, interface-boundary meeting
/// points, and interface kinks (including junctions and material-pattern
/// changes along a straight interface). A polygon vertex with a straight
/// angle, a single BC tag, and an unchanged subdomain pattern is not
/// singular. Returns points ordered by vertex index.
inline std::vector<SingularPoint> classify_singular_points(const DomainSpec& dom) {
  std::vector<SingularPoint> out;
  if (dom.exactly_smooth) return out;
  constexpr double kPi = 3.14159265358979323846;
  constexpr double kAngleTol = 1e-9;

  const int nv = static_cast<int>(dom.vertices.size());
  for (int v = 0; v < nv; ++v) {
    std::vector<std::pair<int, double>> angles;
    for (std::size_t k = 0; k < dom.subdomains.size(); ++k) {
      const auto& loop = dom.subdomains[k];
      for (std::size_t i = 0; i < loop.size(); ++i)
        if (loop[i] == v)
          angles.emplace_back(static_cast<int>(k), detail::interior_angle(dom.vertices, loop, i));
    }
    if (angles.empty()) continue;  // unused vertex

    std::vector<const DomainSpec::BoundaryEdge*> bedges;
    for (const auto& e : dom.boundary)
      if (e.a == v || e.b == v) bedges.push_back(&e);
    std::vector<const DomainSpec::InterfaceEdge*> iedges;
    for (const auto& e : dom.interfaces)
      if (e.a == v || e.b == v) iedges.push_back(&e);

    unsigned cats = 0;
    const bool on_boundary = !bedges.empty();
    if (on_boundary) {
      double total = 0.0;
      for (const auto& [k, a] : angles) total += a;
      if (std::abs(total - kPi) > kAngleTol) cats |= kBoundaryVertex;
      bool has_d = false, has_n = false;
      for (const auto* e : bedges) (e->bc == BC::Dirichlet ? has_d : has_n) = true;
      if (has_d && has_n) cats |= kBCChange;
      if (!iedges.empty()) cats |= kInterfaceMeetsBoundary;
    } else if (!iedges.empty()) {
      if (iedges.size() != 2) {
        cats |= kInterfaceKink;  // junction of >2 interface segments
      } else {
        const Vec2 p = dom.vertices[v];
        const int o0 = iedges[0]->a == v ? iedges[0]->b : iedges[0]->a;
        const int o1 = iedges[1]->a == v ? iedges[1]->b : iedges[1]->a;
        double ang = detail::edge_angle(p, dom.vertices[o0]) - detail::edge_angle(p, dom.vertices[o1]);
        while (ang <= -kPi) ang += 2 * kPi;
        while (ang > kPi) ang -= 2 * kPi;
        const bool straight = std::abs(std::abs(ang) - kPi) < kAngleTol;
        const bool same_pattern =
            (std::min(iedges[0]->plus_sub, iedges[0]->minus_sub) ==
             std::min(iedges[1]->plus_sub, iedges[1]->minus_sub)) &&
            (std::max(iedges[0]->plus_sub, iedges[0]->minus_sub) ==
             std::max(iedges[1]->plus_sub, iedges[1]->minus_sub));
        if (!straight || !same_pattern) cats |= kInterfaceKink;
      }
    }
    if (cats == 0) continue;

    SingularPoint sp;
    sp.location = dom.vertices[v];
    sp.vertex = v;
    sp.categories = cats;
    sp.in_Vs = !dom.vertex_on_dirichlet_closure(v);
    sp.angles = std::move(angles);
    out.push_back(std::move(sp));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Smoothed distance to the singular set
// ---------------------------------------------------------------------------

/// Continuous surrogate for the distance to the singular set: exact
/// distance inside a per-point cap radius, capped (hence constant) away
/// from it, never exceeding 1, with Lipschitz constant 1. Identically 1
/// when the singular set is empty.
class SmoothedDistance {
public:
  SmoothedDistance() = default;

  SmoothedDistance(std::vector<Vec2> points, std::vector<double> caps)
      : points_(std::move(points)), caps_(std::move(caps)) {
    if (points_.size() != caps_.size())
      throw ValidationError("bad-caps", "one cap radius required per singular point");
    for (double c : caps_)
      if (!(c > 0.0) || c > 1.0)
        throw ValidationError("bad-caps", "cap radii must lie in (0, 1]");
  }

  /// Caps default to half the minimum pairwise distance between singular
  /// points, clamped to at most 1.
  static SmoothedDistance from_points(std::vector<Vec2> points) {
    double cap = 1.0;
    for (std::size_t i = 0; i < points.size(); ++i)
      for (std::size_t j = i + 1; j < points.size(); ++j)
        cap = std::min(cap, 0.5 * dist(points[i], points[j]));
    return SmoothedDistance(std::move(points), cap);
  }

  static SmoothedDistance from_domain(const DomainSpec& dom) {
    std::vector<Vec2> pts;
    for (const auto& sp : classify_singular_points(dom)) pts.push_back(sp.location);
    return from_points(std::move(pts));
  }

  SmoothedDistance(std::vector<Vec2> points, double cap) {
    caps_.assign(points.size(), cap);
    points_ = std::move(points);
    for (double c : caps_)
      if (!(c > 0.0) || c > 1.0)
        throw ValidationError("bad-caps", "cap radii must lie in (0, 1]");
  }

  double operator()(Vec2 x) const {
    if (points_.empty()) return 1.0;
    double m = 1.0;
    for (std::size_t i = 0; i < points_.size(); ++i)
      m = std::min(m, std::min(dist(x, points_[i]), caps_[i]));
    return m;
  }

  bool trivial() const { return points_.empty(); }
  const std::vector<Vec2>& points() const { return points_; }
  const std::vector<double>& caps() const { return caps_; }

  double cap_at(std::size_t i) const { return caps_.at(i); }

private:
  std::vector<Vec2> points_;
  std::vector<double> caps_;
};

// ---------------------------------------------------------------------------
// Interface side queries
// ---------------------------------------------------------------------------

enum class Side { Plus, Minus };

struct SideResult {
  Side side;
  int subdomain;
};

/// Resolves which side of the interface a point lies on, using the fixed
/// per-edge orientation (+ to the right of a->b). A subdomain hint from an
/// owning element dominates; without one, queries at interface endpoints
/// or exactly on the line are ambiguous.
inline SideResult interface_side(const DomainSpec& dom, Vec2 x,
                                 std::optional<int> subdomain_hint = std::nullopt) {
  if (dom.interfaces.empty())
    throw ValidationError("no-interface", "domain has no interface");

  const DomainSpec::InterfaceEdge* best = nullptr;
  double best_d = std::numeric_limits<double>::max();
  for (const auto& e : dom.interfaces) {
    const double d = point_segment_distance(x, dom.vertices[e.a], dom.vertices[e.b]);
    if (d < best_d) {
      best_d = d;
      best = &e;
    }
  }

  if (subdomain_hint) {
    if (*subdomain_hint == best->plus_sub) return {Side::Plus, best->plus_sub};
    if (*subdomain_hint == best->minus_sub) return {Side::Minus, best->minus_sub};
    throw ValidationError("bad-hint", "hinted subdomain " + std::to_string(*subdomain_hint) +
                                          " is not adjacent to the nearest interface edge");
  }

  const double tol = dom.tol();
  if (dist(x, dom.vertices[best->a]) <= tol || dist(x, dom.vertices[best->b]) <= tol)
    throw ValidationError("ambiguous-side",
                          "query at an interface endpoint; use element-based side resolution");
  const Vec2 a = dom.vertices[best->a], b = dom.vertices[best->b];
  const double cr = (b - a).cross(x - a);
  if (std::abs(cr) <= tol * dist(a, b))
    throw ValidationError("ambiguous-side",
                          "query exactly on the interface; use element-based side resolution");
  return cr < 0 ? SideResult{Side::Plus, best->plus_sub} : SideResult{Side::Minus, best->minus_sub};
}

}  // namespace kfem
