#pragma once

#include "reachset/types.hpp"

#include <nlohmann/json_fwd.hpp>

#include <span>
#include <vector>

namespace reachset::geom {

inline constexpr double kDefaultEps = 1e-6;

/// The line a*(x - ax) + b*(y - ay) - 1 = 0 relative to an anchor (ax, ay).
/// The anchor always lies on the strict inner side (affine form = -1).
struct AnchoredLine {
  double a = 0.0;
  double b = 0.0;

  double affine(const Vec2& p, const Vec2& anchor) const {
    return a * (p.x() - anchor.x()) + b * (p.y() - anchor.y()) - 1.0;
  }
};

/// Candidate convex region: anchor plus n >= 3 anchored lines. eps is the
/// strictness margin applied to the determinant/side inequalities.
struct LinePolygon {
  Vec2 anchor = Vec2::Zero();
  std::vector<AnchoredLine> lines;
  double eps = kDefaultEps;
};

/// Ordered polygon vertices (V_12, V_23, ..., V_n1), anticlockwise, one
/// column per vertex, not closed.
struct VertexChain {
  Eigen::Matrix2Xd pts;

  Eigen::Index size() const { return pts.cols(); }
};

/// D_ij = a_i*b_j - b_i*a_j.
inline double pair_det(const AnchoredLine& li, const AnchoredLine& lj) {
  return li.a * lj.b - li.b * lj.a;
}

/// Intersection of two anchored lines, in absolute coordinates.
/// Throws on parallel lines (D_ij = 0).
Vec2 intersect(const AnchoredLine& li, const AnchoredLine& lj, const Vec2& anchor);

struct NgonViolation {
  enum class Kind { determinant, vertex_side };
  Kind kind;
  int i;  // 1-based line indices, matching the constraint layout
  int j;
  int k;  // 0 for determinant violations
  double value;
};

struct NgonReport {
  bool pass = false;
  std::vector<NgonViolation> violations;
};

/// Checks, with strictness margin eps: D_{i,i+1} >= eps for every consecutive
/// pair, and for every opposite line k that the vertex-side expression
/// -a_k(b_i-b_j) + b_k(a_i-a_j) - D_ij stays <= -eps.
NgonReport validate_ngon(std::span<const AnchoredLine> lines, double eps);

/// Reorders lines by the polar angle of their (a, b) normal, anticlockwise.
std::vector<AnchoredLine> canonicalize_lines(std::span<const AnchoredLine> lines);

/// Vertex chain of a validated polygon. Throws if validation fails.
VertexChain vertices(const LinePolygon& poly);

/// True iff every affine form at p is <= tol.
bool contains(const LinePolygon& poly, const Vec2& p, double tol = 0.0);

/// Shoelace area; positive for anticlockwise chains. Needs >= 3 vertices.
double area(const VertexChain& chain);

/// Intersection of two convex anticlockwise polygons by successive
/// half-plane clipping; the result may be empty.
VertexChain clip(const VertexChain& p1, const VertexChain& p2);

/// 1 - |A o B| / |A u B| over polygon areas; both inputs need positive area.
double jaccard(const VertexChain& p1, const VertexChain& p2);

/// Enclosure test on a raw point sequence (the closing point included):
/// at least three distinct points, no repeats except first = last,
/// first = last, and no point on the segment of any other directed edge.
bool check_enclosed(const Eigen::Matrix2Xd& sequence);

/// True iff the closed sequence visits exactly n distinct points and no
/// three consecutive points (wrapping around) are collinear.
bool check_nondegenerate(const Eigen::Matrix2Xd& sequence, int n);

/// Closes a chain: appends the first vertex after the last.
Eigen::Matrix2Xd closed_sequence(const VertexChain& chain);

/// {anchor:[x,y], lines:[[a,b],...], vertices:[[x,y],...], area}.
nlohmann::json to_json(const LinePolygon& poly);

}  // namespace reachset::geom
