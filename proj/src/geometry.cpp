#include "reachset/geometry.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace reachset::geom {

namespace {

constexpr double kCollinearTol = 1e-9;

double chain_diameter(const Eigen::Matrix2Xd& pts) {
  const Vec2 lo = pts.rowwise().minCoeff();
  const Vec2 hi = pts.rowwise().maxCoeff();
  return (hi - lo).norm();
}

bool points_equal(const Vec2& p, const Vec2& q, double tol) {
  return (p - q).norm() <= tol;
}

/// Whether q lies on the closed segment [u, v] (or equals it when u = v).
bool on_segment(const Vec2& q, const Vec2& u, const Vec2& v, double tol) {
  const Vec2 d = v - u;
  const double len = d.norm();
  if (len <= tol) {
    return points_equal(q, u, tol);
  }
  const Vec2 r = q - u;
  const double cross = d.x() * r.y() - d.y() * r.x();
  if (std::abs(cross) / len > tol) return false;
  const double t = d.dot(r) / (len * len);
  return t >= -tol / len && t <= 1.0 + tol / len;
}

}  // namespace

Vec2 intersect(const AnchoredLine& li, const AnchoredLine& lj, const Vec2& anchor) {
  const double det = pair_det(li, lj);
  if (det == 0.0) {
    throw std::invalid_argument("parallel-lines: pair determinant is zero");
  }
  return anchor + Vec2(-(li.b - lj.b) / det, (li.a - lj.a) / det);
}

NgonReport validate_ngon(std::span<const AnchoredLine> lines, double eps) {
  const int n = static_cast<int>(lines.size());
  if (n < 3) {
    throw std::invalid_argument("validate_ngon: need at least 3 lines");
  }
  if (!(eps > 0.0)) {
    throw std::invalid_argument("validate_ngon: eps must be positive");
  }

  NgonReport report;
  for (int i = 0; i < n; ++i) {
    const int j = (i + 1) % n;
    const double det = pair_det(lines[i], lines[j]);
    if (!(det >= eps)) {
      report.violations.push_back(
          {NgonViolation::Kind::determinant, i + 1, j + 1, 0, det});
    }
    for (int k = 0; k < n; ++k) {
      if (k == i || k == j) continue;
      const double side = -lines[k].a * (lines[i].b - lines[j].b) +
                          lines[k].b * (lines[i].a - lines[j].a) - det;
      if (!(side <= -eps)) {
        report.violations.push_back(
            {NgonViolation::Kind::vertex_side, i + 1, j + 1, k + 1, side});
      }
    }
  }
  report.pass = report.violations.empty();
  return report;
}

std::vector<AnchoredLine> canonicalize_lines(std::span<const AnchoredLine> lines) {
  std::vector<AnchoredLine> out(lines.begin(), lines.end());
  std::stable_sort(out.begin(), out.end(), [](const AnchoredLine& p, const AnchoredLine& q) {
    return std::atan2(p.b, p.a) < std::atan2(q.b, q.a);
  });
  return out;
}

VertexChain vertices(const LinePolygon& poly) {
  const auto report = validate_ngon(poly.lines, poly.eps);
  if (!report.pass) {
    throw std::invalid_argument("vertices: line set failed n-gon validation");
  }
  const int n = static_cast<int>(poly.lines.size());
  VertexChain chain;
  chain.pts.resize(2, n);
  for (int i = 0; i < n; ++i) {
    chain.pts.col(i) = intersect(poly.lines[i], poly.lines[(i + 1) % n], poly.anchor);
  }
  return chain;
}

bool contains(const LinePolygon& poly, const Vec2& p, double tol) {
  for (const AnchoredLine& line : poly.lines) {
    if (line.affine(p, poly.anchor) > tol) return false;
  }
  return true;
}

double area(const VertexChain& chain) {
  const auto n = chain.size();
  if (n < 3) {
    throw std::invalid_argument("area: need at least 3 vertices");
  }
  double twice = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vec2 p = chain.pts.col(i);
    const Vec2 q = chain.pts.col((i + 1) % n);
    twice += p.x() * q.y() - q.x() * p.y();
  }
  return 0.5 * twice;
}

VertexChain clip(const VertexChain& p1, const VertexChain& p2) {
  std::vector<Vec2> subject;
  for (Eigen::Index i = 0; i < p1.size(); ++i) subject.push_back(p1.pts.col(i));

  for (Eigen::Index e = 0; e < p2.size() && !subject.empty(); ++e) {
    const Vec2 u = p2.pts.col(e);
    const Vec2 v = p2.pts.col((e + 1) % p2.size());
    const Vec2 d = v - u;

    auto inside = [&](const Vec2& q) {
      return d.x() * (q.y() - u.y()) - d.y() * (q.x() - u.x()) >= 0.0;
    };
    auto cross_point = [&](const Vec2& a, const Vec2& b) {
      const double da = d.x() * (a.y() - u.y()) - d.y() * (a.x() - u.x());
      const double db = d.x() * (b.y() - u.y()) - d.y() * (b.x() - u.x());
      const double t = da / (da - db);
      return Vec2(a + t * (b - a));
    };

    std::vector<Vec2> next;
    for (std::size_t i = 0; i < subject.size(); ++i) {
      const Vec2& cur = subject[i];
      const Vec2& prev = subject[(i + subject.size() - 1) % subject.size()];
      const bool cur_in = inside(cur);
      const bool prev_in = inside(prev);
      if (cur_in) {
        if (!prev_in) next.push_back(cross_point(prev, cur));
        next.push_back(cur);
      } else if (prev_in) {
        next.push_back(cross_point(prev, cur));
      }
    }
    subject = std::move(next);
  }

  VertexChain out;
  out.pts.resize(2, static_cast<Eigen::Index>(subject.size()));
  for (std::size_t i = 0; i < subject.size(); ++i) {
    out.pts.col(static_cast<Eigen::Index>(i)) = subject[i];
  }
  return out;
}

double jaccard(const VertexChain& p1, const VertexChain& p2) {
  const double a1 = area(p1);
  const double a2 = area(p2);
  if (!(a1 > 0.0) || !(a2 > 0.0)) {
    throw std::invalid_argument("jaccard: polygons must have positive area");
  }
  const VertexChain overlap = clip(p1, p2);
  const double inter = overlap.size() >= 3 ? std::max(0.0, area(overlap)) : 0.0;
  const double uni = a1 + a2 - inter;
  return std::clamp(1.0 - inter / uni, 0.0, 1.0);
}

bool check_enclosed(const Eigen::Matrix2Xd& sequence) {
  const auto m = sequence.cols();
  if (m < 2) return false;
  const double tol = kCollinearTol * std::max(1.0, chain_diameter(sequence));

  // Condition 3: initial point identical to terminal point.
  if (!points_equal(sequence.col(0), sequence.col(m - 1), tol)) return false;

  // Condition 2: no repeats except the closing pair.
  for (Eigen::Index s = 0; s < m; ++s) {
    for (Eigen::Index t = s + 1; t < m; ++t) {
      if (s == 0 && t == m - 1) continue;
      if (points_equal(sequence.col(s), sequence.col(t), tol)) return false;
    }
  }

  // Condition 1: at least three different points.
  if (m - 1 < 3) return false;

  // Condition 4: no other point on the segment of any directed edge.
  for (Eigen::Index e = 0; e + 1 < m; ++e) {
    const Vec2 u = sequence.col(e);
    const Vec2 v = sequence.col(e + 1);
    for (Eigen::Index s = 0; s < m; ++s) {
      if (s == e || s == e + 1) continue;
      const Vec2 q = sequence.col(s);
      if (points_equal(q, u, tol) || points_equal(q, v, tol)) continue;
      if (on_segment(q, u, v, tol)) return false;
    }
  }
  return true;
}

bool check_nondegenerate(const Eigen::Matrix2Xd& sequence, int n) {
  const auto m = sequence.cols();
  if (m < 2) return false;
  const double tol = kCollinearTol * std::max(1.0, chain_diameter(sequence));
  if (!points_equal(sequence.col(0), sequence.col(m - 1), tol)) return false;

  std::vector<Vec2> distinct;
  for (Eigen::Index s = 0; s + 1 < m; ++s) {
    const Vec2 p = sequence.col(s);
    const bool seen = std::any_of(distinct.begin(), distinct.end(),
                                  [&](const Vec2& q) { return points_equal(p, q, tol); });
    if (!seen) distinct.push_back(p);
  }
  if (static_cast<int>(distinct.size()) != n) return false;

  const auto cycle = static_cast<Eigen::Index>(m - 1);
  for (Eigen::Index i = 0; i < cycle; ++i) {
    const Vec2 p = sequence.col(i);
    const Vec2 q = sequence.col((i + 1) % cycle);
    const Vec2 r = sequence.col((i + 2) % cycle);
    const double cross = (q.x() - p.x()) * (r.y() - p.y()) - (q.y() - p.y()) * (r.x() - p.x());
    const double scale = std::max({1.0, (q - p).norm(), (r - p).norm()});
    if (std::abs(cross) <= tol * scale) return false;
  }
  return true;
}

Eigen::Matrix2Xd closed_sequence(const VertexChain& chain) {
  Eigen::Matrix2Xd seq(2, chain.size() + 1);
  seq.leftCols(chain.size()) = chain.pts;
  seq.col(chain.size()) = chain.pts.col(0);
  return seq;
}

nlohmann::json to_json(const LinePolygon& poly) {
  nlohmann::json j;
  j["anchor"] = {poly.anchor.x(), poly.anchor.y()};
  auto& lines = j["lines"] = nlohmann::json::array();
  for (const AnchoredLine& line : poly.lines) {
    lines.push_back({line.a, line.b});
  }
  const VertexChain chain = vertices(poly);
  auto& verts = j["vertices"] = nlohmann::json::array();
  for (Eigen::Index i = 0; i < chain.size(); ++i) {
    verts.push_back({chain.pts(0, i), chain.pts(1, i)});
  }
  j["area"] = area(chain);
  return j;
}

}  // namespace reachset::geom
