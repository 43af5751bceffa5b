#include "reachset/polyopt.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <optional>
#include <stdexcept>

namespace reachset::opt {

namespace {

using geom::AnchoredLine;
using Clock = std::chrono::steady_clock;

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kGapLo = 0.02;  // min/max margin on consecutive normal-angle gaps

constexpr std::uint64_t kSampleStream = 0x77677473616d7065ULL;

double wrap_angle(double a) {
  a = std::fmod(a, kTwoPi);
  return a < 0.0 ? a + kTwoPi : a;
}

/// Weighted points the search runs over, in coordinates relative to the
/// anchor. Feasibility is tracked through the excluded mass: a candidate is
/// feasible iff the weight left outside is at most 1 - alpha, which at
/// alpha = 1 forces every positive-weight point inside.
struct PointSet {
  Eigen::Matrix2Xd rel;
  Eigen::Matrix2Xd domain_rel;  // grid-box corners relative to the anchor
  Eigen::VectorXd w;
  double alpha = 0.9;
  double coeff_bound = 1.0;
  double eps_geom = geom::kDefaultEps;
  double scale = 1.0;     // grid diagonal, sets pads and tie tolerances
  double area_dom = 1.0;  // grid box area
  double cell_diag = 1.0;

  double pad() const { return 1e-7 * scale; }
  double tie_tol() const { return 1e-12 * scale; }
};

struct LineSet {
  Eigen::VectorXd phi;  // outward normal angles
  Eigen::VectorXd p;    // support distances from the anchor, > 0
};

std::vector<AnchoredLine> to_lines(const LineSet& ls) {
  std::vector<AnchoredLine> lines(static_cast<std::size_t>(ls.phi.size()));
  for (Eigen::Index k = 0; k < ls.phi.size(); ++k) {
    lines[static_cast<std::size_t>(k)] = {std::cos(ls.phi(k)) / ls.p(k),
                                          std::sin(ls.phi(k)) / ls.p(k)};
  }
  return lines;
}

double min_support(const PointSet& ps, double phi) {
  return std::max(std::abs(std::cos(phi)), std::abs(std::sin(phi))) / ps.coeff_bound;
}

bool gaps_ok(const Eigen::VectorXd& phi) {
  const auto n = phi.size();
  double sum = 0.0;
  for (Eigen::Index k = 0; k < n; ++k) {
    const double gap = wrap_angle(phi((k + 1) % n) - phi(k));
    if (gap < kGapLo || gap > std::numbers::pi - kGapLo) return false;
    sum += gap;
  }
  return std::abs(sum - kTwoPi) < 1e-6;
}

struct CoreEval {
  bool feasible = false;
  int count = 0;
  double excluded = 0.0;
  double area = std::numeric_limits<double>::infinity();
  Eigen::Array<bool, Eigen::Dynamic, 1> inside;
};

CoreEval eval_lines(const PointSet& ps, const std::vector<AnchoredLine>& lines) {
  CoreEval ev;
  for (const AnchoredLine& line : lines) {
    if (std::abs(line.a) > ps.coeff_bound * (1.0 + 1e-12) ||
        std::abs(line.b) > ps.coeff_bound * (1.0 + 1e-12)) {
      return ev;
    }
  }
  if (!geom::validate_ngon(lines, ps.eps_geom).pass) return ev;

  const auto m = ps.rel.cols();
  ev.inside = Eigen::Array<bool, Eigen::Dynamic, 1>::Constant(m, true);
  for (const AnchoredLine& line : lines) {
    ev.inside = ev.inside && ((line.a * ps.rel.row(0).array().transpose() +
                               line.b * ps.rel.row(1).array().transpose() - 1.0) <= 0.0);
  }
  ev.count = static_cast<int>(ev.inside.count());
  ev.excluded = (ps.w.array() * (!ev.inside).cast<double>()).sum();
  ev.feasible = ev.excluded <= 1.0 - ps.alpha;

  geom::LinePolygon poly{Vec2::Zero(), lines, ps.eps_geom};
  ev.area = geom::area(geom::vertices(poly));
  return ev;
}

bool better(const CoreEval& a, const CoreEval& b) {
  if (a.count != b.count) return a.count < b.count;
  return a.area < b.area * (1.0 - 1e-12);
}

struct SearchState {
  LineSet ls;
  CoreEval ev;
  int count_floor = 0;  // lowest inside-count the exclusion quota allows
};

/// Largest projection of currently-inside points onto direction phi;
/// -inf when nothing is inside.
double inside_support(const PointSet& ps, const CoreEval& ev, double phi) {
  const double cx = std::cos(phi);
  const double cy = std::sin(phi);
  double best = -std::numeric_limits<double>::infinity();
  for (Eigen::Index m = 0; m < ps.rel.cols(); ++m) {
    if (!ev.inside(m)) continue;
    best = std::max(best, cx * ps.rel(0, m) + cy * ps.rel(1, m));
  }
  return best;
}

/// Pulls every line tight against its inside support without changing the
/// inside set; reverts a line when validation breaks.
void snug(const PointSet& ps, SearchState& st) {
  const auto n = st.ls.phi.size();
  for (Eigen::Index k = 0; k < n; ++k) {
    const double support = inside_support(ps, st.ev, st.ls.phi(k));
    if (!std::isfinite(support)) continue;
    const double cand =
        std::max({support + ps.pad(), min_support(ps, st.ls.phi(k)), ps.pad()});
    if (cand >= st.ls.p(k)) continue;
    const double old = st.ls.p(k);
    st.ls.p(k) = cand;
    CoreEval ev = eval_lines(ps, to_lines(st.ls));
    if (ev.feasible && !better(st.ev, ev)) {
      st.ev = std::move(ev);
    } else {
      st.ls.p(k) = old;
    }
  }
}

/// Greedy peeling: repeatedly shrink one line just past its outermost inside
/// points. Candidates are ranked by excluded points per unit of excluded
/// mass, so the 1 - alpha budget is spent where it removes the most cells.
void peel(const PointSet& ps, SearchState& st) {
  for (;;) {
    snug(ps, st);
    const auto n = st.ls.phi.size();
    Eigen::Index best_k = -1;
    double best_p = 0.0;
    double best_score = 0.0;
    CoreEval best_ev;
    for (Eigen::Index k = 0; k < n; ++k) {
      const double cx = std::cos(st.ls.phi(k));
      const double cy = std::sin(st.ls.phi(k));
      double v1 = -std::numeric_limits<double>::infinity();
      double v2 = v1;
      for (Eigen::Index m = 0; m < ps.rel.cols(); ++m) {
        if (!st.ev.inside(m)) continue;
        const double proj = cx * ps.rel(0, m) + cy * ps.rel(1, m);
        if (proj > v1) {
          if (v1 < proj - ps.tie_tol()) v2 = v1;
          v1 = proj;
        } else if (proj < v1 - ps.tie_tol() && proj > v2) {
          v2 = proj;
        }
      }
      if (!std::isfinite(v1) || !std::isfinite(v2)) continue;
      const double cand =
          std::max({v2 + ps.pad(), min_support(ps, st.ls.phi(k)), ps.pad()});
      if (cand >= st.ls.p(k) || cand >= v1) continue;

      const double old = st.ls.p(k);
      st.ls.p(k) = cand;
      CoreEval ev = eval_lines(ps, to_lines(st.ls));
      st.ls.p(k) = old;
      if (!ev.feasible || ev.count < st.count_floor) continue;
      const double gain = st.ev.count - ev.count;
      if (gain <= 0.0) continue;
      const double price = std::max(ev.excluded - st.ev.excluded, 1e-18);
      const double score = gain / price;
      if (best_k < 0 || score > best_score) {
        best_k = k;
        best_p = cand;
        best_score = score;
        best_ev = std::move(ev);
      }
    }
    if (best_k < 0 || !better(best_ev, st.ev)) break;
    st.ls.p(best_k) = best_p;
    st.ev = std::move(best_ev);
  }
}

/// Centers each line in its equal-count corridor: expand to the midpoint
/// toward the nearest point that would flip inside; with no constraining
/// point, expand to the grid box when nothing may be excluded (alpha = 1),
/// otherwise by a fraction of a cell. The inside set, count and coverage
/// stay fixed; only the slack placement of the returned polygon moves.
void max_margin_expand(const PointSet& ps, SearchState& st, double corridor_frac,
                       double cap_cells) {
  const auto n = st.ls.phi.size();
  for (Eigen::Index k = 0; k < n; ++k) {
    const double cx = std::cos(st.ls.phi(k));
    const double cy = std::sin(st.ls.phi(k));

    double in_support = -std::numeric_limits<double>::infinity();
    for (Eigen::Index m = 0; m < ps.rel.cols(); ++m) {
      if (st.ev.inside(m)) {
        in_support = std::max(in_support, cx * ps.rel(0, m) + cy * ps.rel(1, m));
      }
    }

    // nearest outside point kept out only by this line
    double next_out = std::numeric_limits<double>::infinity();
    for (Eigen::Index m = 0; m < ps.rel.cols(); ++m) {
      if (st.ev.inside(m)) continue;
      bool inside_others = true;
      for (Eigen::Index j = 0; j < n && inside_others; ++j) {
        if (j == k) continue;
        const double affine = std::cos(st.ls.phi(j)) / st.ls.p(j) * ps.rel(0, m) +
                              std::sin(st.ls.phi(j)) / st.ls.p(j) * ps.rel(1, m) - 1.0;
        if (affine > 0.0) inside_others = false;
      }
      if (!inside_others) continue;
      next_out = std::min(next_out, cx * ps.rel(0, m) + cy * ps.rel(1, m));
    }

    double target;
    if (std::isfinite(next_out)) {
      if (!std::isfinite(in_support)) continue;
      const double step = std::min(corridor_frac * (next_out - in_support),
                                   cap_cells * ps.cell_diag);
      target = in_support + step - ps.pad();
    } else if (ps.alpha >= 1.0) {
      // nothing may be excluded: any enclosing line is optimal, take the box
      double box_support = ps.pad();
      for (Eigen::Index c = 0; c < ps.domain_rel.cols(); ++c) {
        box_support = std::max(box_support, cx * ps.domain_rel(0, c) + cy * ps.domain_rel(1, c));
      }
      target = box_support + ps.pad();
    } else {
      if (!std::isfinite(in_support)) continue;
      target = in_support + cap_cells * ps.cell_diag;
    }
    if (!(target > st.ls.p(k))) continue;

    const double old = st.ls.p(k);
    st.ls.p(k) = target;
    CoreEval ev = eval_lines(ps, to_lines(st.ls));
    if (ev.feasible && ev.count == st.ev.count) {
      st.ev = std::move(ev);
    } else {
      st.ls.p(k) = old;
    }
  }
}

/// Indices sorted by weight (desc, stable) forming the smallest prefix whose
/// complement mass fits the 1 - alpha budget.
std::vector<Eigen::Index> level_set_prefix(const PointSet& ps) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(ps.w.size()));
  for (std::size_t m = 0; m < order.size(); ++m) order[m] = static_cast<Eigen::Index>(m);
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return ps.w(a) > ps.w(b); });

  double cum = 0.0;
  std::size_t take = 0;
  while (take < order.size() && cum < ps.alpha && ps.w(order[take]) > 0.0) {
    cum += ps.w(order[take]);
    ++take;
  }
  // Extend while the complement mass still exceeds the budget; at alpha = 1
  // this takes every positive-weight point regardless of summation roundoff.
  double rest = 0.0;
  for (std::size_t t = take; t < order.size(); ++t) rest += ps.w(order[t]);
  while (take < order.size() && rest > 1.0 - ps.alpha && ps.w(order[take]) > 0.0) {
    rest -= ps.w(order[take]);
    ++take;
  }
  order.resize(take);
  return order;
}

double principal_angle(const PointSet& ps, const std::vector<Eigen::Index>& prefix) {
  double wsum = 0.0;
  Vec2 mean = Vec2::Zero();
  for (const Eigen::Index m : prefix) {
    wsum += ps.w(m);
    mean += ps.w(m) * ps.rel.col(m);
  }
  if (!(wsum > 0.0)) return 0.0;
  mean /= wsum;
  double cxx = 0.0, cxy = 0.0, cyy = 0.0;
  for (const Eigen::Index m : prefix) {
    const Vec2 d = ps.rel.col(m) - mean;
    cxx += ps.w(m) * d.x() * d.x();
    cxy += ps.w(m) * d.x() * d.y();
    cyy += ps.w(m) * d.y() * d.y();
  }
  return 0.5 * std::atan2(2.0 * cxy, cxx - cyy);
}

/// Solves the per-direction threshold problem for fixed line directions:
/// support lines of every positive-weight point (full containment), then
/// quota-bounded peeling. Stateless in the directions, so the result is a
/// canonical function of (model, angles).
std::optional<SearchState> solve_at_angles(const PointSet& ps, const Eigen::VectorXd& phi,
                                           int exclusion_quota) {
  SearchState st;
  st.ls.phi = phi;
  st.ls.p.resize(phi.size());
  for (Eigen::Index k = 0; k < phi.size(); ++k) {
    const double cx = std::cos(phi(k));
    const double cy = std::sin(phi(k));
    double support = -std::numeric_limits<double>::infinity();
    for (Eigen::Index m = 0; m < ps.rel.cols(); ++m) {
      if (ps.w(m) <= 0.0) continue;
      support = std::max(support, cx * ps.rel(0, m) + cy * ps.rel(1, m));
    }
    st.ls.p(k) = std::max({support + ps.pad(), min_support(ps, phi(k)), ps.pad()});
  }
  st.ev = eval_lines(ps, to_lines(st.ls));
  if (!st.ev.feasible) return std::nullopt;
  st.count_floor = std::max(0, st.ev.count - exclusion_quota);
  peel(ps, st);
  return st;
}

Eigen::VectorXd equal_gap_angles(int n, double offset) {
  Eigen::VectorXd phi(n);
  for (int k = 0; k < n; ++k) phi(k) = wrap_angle(offset + kTwoPi * k / n);
  return phi;
}

struct CoreParams {
  int starts = 12;
  int refine_passes = 4;
  int exclusion_quota = std::numeric_limits<int>::max();
  double corridor_frac = 0.5;  // slack placement within the equal-count corridor
  double corridor_cap_cells = 1e9;
};

/// Fractional models (heuristic rounds over a subset of the grid) run a
/// shallower schedule and a bounded exclusion quota, standing in for the
/// shorter branching budget such rounds would get; the degenerate full
/// sample takes the f = 1 branch and reproduces solve_optimal exactly.
CoreParams scaled_params(double fraction, int n_points) {
  const double f = std::clamp(fraction, 0.0, 1.0);
  CoreParams params;
  if (f >= 1.0) {
    params.starts = 12;
    params.refine_passes = 4;
    params.corridor_frac = 0.5;
    params.corridor_cap_cells = 1e9;
    params.exclusion_quota = std::max(3, n_points);
    return params;
  }
  params.starts = 6;
  params.refine_passes = 2;
  params.corridor_frac = 0.5;
  params.corridor_cap_cells = 1.0;
  params.exclusion_quota = std::max(2, static_cast<int>(std::lround(0.65 * f * n_points)));
  return params;
}

struct CoreOutcome {
  bool feasible = false;
  std::vector<AnchoredLine> lines;
  CoreEval ev;
};

CoreOutcome solve_core(const PointSet& ps, int n, const CoreParams& params,
                       Clock::time_point deadline) {
  const auto prefix = level_set_prefix(ps);
  const double pca = principal_angle(ps, prefix);
  static constexpr double kSteps[] = {0.30, 0.12, 0.05, 0.02};

  std::optional<SearchState> best;
  for (int s = 0; s < params.starts; ++s) {
    if (s > 0 && Clock::now() > deadline) break;
    double offset;
    if (s == 0) {
      offset = pca;
    } else if (s == 1) {
      offset = pca + std::numbers::pi / n;
    } else {
      offset = kTwoPi / n * (static_cast<double>(s - 2) / std::max(1, params.starts - 2));
    }

    auto st = solve_at_angles(ps, equal_gap_angles(n, offset), params.exclusion_quota);
    if (!st) continue;

    // per-line angle coordinate descent; every candidate is re-solved from
    // scratch so accepted states never inherit a poor threshold history
    for (int pass = 0; pass < params.refine_passes; ++pass) {
      bool improved = false;
      for (Eigen::Index k = 0; k < st->ls.phi.size(); ++k) {
        for (const double step : kSteps) {
          bool accepted = false;
          for (const double sgn : {1.0, -1.0}) {
            Eigen::VectorXd phi = st->ls.phi;
            phi(k) = wrap_angle(phi(k) + sgn * step);
            if (!gaps_ok(phi)) continue;
            auto cand = solve_at_angles(ps, phi, params.exclusion_quota);
            if (cand && better(cand->ev, st->ev)) {
              st = std::move(cand);
              improved = accepted = true;
              break;
            }
          }
          if (accepted) break;
        }
      }
      if (!improved) break;
    }

    if (!best || better(st->ev, best->ev)) best = std::move(st);
  }

  CoreOutcome out;
  if (best) {
    snug(ps, *best);
    max_margin_expand(ps, *best, params.corridor_frac, params.corridor_cap_cells);
    out.feasible = true;
    out.lines = to_lines(best->ls);
    out.ev = std::move(best->ev);
  }
  return out;
}

PointSet pointset_from_cells(const kde::WeightedGrid& wg, const std::vector<kde::CellRef>& cells,
                             const Eigen::VectorXd& weights, const Vec2& anchor, double alpha,
                             double coeff_bound, double eps_geom) {
  PointSet ps;
  const auto m = static_cast<Eigen::Index>(cells.size());
  ps.rel.resize(2, m);
  for (Eigen::Index c = 0; c < m; ++c) {
    const auto& cell = cells[static_cast<std::size_t>(c)];
    ps.rel.col(c) = wg.grid.point(cell.i, cell.j) - anchor;
  }
  ps.w = weights;
  ps.alpha = alpha;
  ps.coeff_bound = coeff_bound;
  ps.eps_geom = eps_geom;

  const int n = wg.grid.n();
  ps.domain_rel.resize(2, 4);
  ps.domain_rel.col(0) = Vec2(wg.grid.xs(0), wg.grid.ys(0)) - anchor;
  ps.domain_rel.col(1) = Vec2(wg.grid.xs(n - 1), wg.grid.ys(0)) - anchor;
  ps.domain_rel.col(2) = Vec2(wg.grid.xs(n - 1), wg.grid.ys(n - 1)) - anchor;
  ps.domain_rel.col(3) = Vec2(wg.grid.xs(0), wg.grid.ys(n - 1)) - anchor;

  const double span_x = wg.grid.xs(n - 1) - wg.grid.xs(0);
  const double span_y = wg.grid.ys(n - 1) - wg.grid.ys(0);
  ps.scale = std::hypot(span_x, span_y);
  ps.area_dom = (span_x + wg.grid.dx()) * (span_y + wg.grid.dy());
  ps.cell_diag = std::hypot(wg.grid.dx(), wg.grid.dy());
  return ps;
}

PointSet pointset_from_grid(const PolyModel& model) {
  const int n = model.wg.grid.n();
  std::vector<kde::CellRef> cells;
  cells.reserve(static_cast<std::size_t>(n) * n);
  Eigen::VectorXd weights(static_cast<Eigen::Index>(n) * n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      weights(static_cast<Eigen::Index>(cells.size())) = model.wg.w(i, j);
      cells.push_back({i, j});
    }
  }
  return pointset_from_cells(model.wg, cells, weights, model.anchor_pt, model.alpha,
                             model.coeff_bound, geometry_eps(model));
}

Assignment affine_assignment(std::span<const AnchoredLine> lines, const Vec2& anchor,
                             const kde::WeightedGrid& wg) {
  const int n = wg.grid.n();
  Assignment asg;
  asg.z = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(n, n, true);
  asg.l.reserve(lines.size());
  for (const AnchoredLine& line : lines) {
    Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> lk(n, n);
    for (int i = 0; i < n; ++i) {
      const double ax = line.a * (wg.grid.xs(i) - anchor.x());
      for (int j = 0; j < n; ++j) {
        lk(i, j) = ax + line.b * (wg.grid.ys(j) - anchor.y()) - 1.0 <= 0.0;
      }
    }
    asg.z = asg.z && lk;
    asg.l.push_back(std::move(lk));
  }
  return asg;
}

double excluded_mass(const Assignment& asg, const kde::WeightedGrid& wg) {
  return (wg.w * (!asg.z).cast<double>()).sum();
}

PolySolution finalize_on_grid(const kde::WeightedGrid& wg, const geom::LinePolygon& polygon,
                              SolveStatus status) {
  if (!geom::validate_ngon(polygon.lines, polygon.eps).pass ||
      !geom::contains(polygon, polygon.anchor)) {
    throw std::logic_error("solver returned an invalid polygon");
  }
  PolySolution sol;
  sol.polygon = polygon;
  sol.assignment = affine_assignment(polygon.lines, polygon.anchor, wg);
  sol.objective = sol.assignment.count();
  sol.coverage_full = std::clamp(1.0 - excluded_mass(sol.assignment, wg), 0.0, 1.0);
  sol.coverage = sol.coverage_full;
  sol.area_m2 = geom::area(geom::vertices(polygon));
  sol.status = status;
  return sol;
}

}  // namespace

std::string to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::optimal_budget: return "optimal-budget";
    case SolveStatus::heuristic: return "heuristic";
    case SolveStatus::baseline: return "baseline";
    case SolveStatus::infeasible: return "infeasible";
  }
  return "unknown";
}

double geometry_eps(const PolyModel& model) {
  const int n = model.wg.grid.n();
  const double diag = std::hypot(model.wg.grid.xs(n - 1) - model.wg.grid.xs(0),
                                 model.wg.grid.ys(n - 1) - model.wg.grid.ys(0));
  const double r_char = std::max(diag / 4.0, 1e-12);
  return model.eps / (r_char * r_char);
}

double default_coeff_bound(const kde::WeightedGrid& wg, const Vec2& anchor) {
  const int n = wg.grid.n();
  double dist = std::min({anchor.x() - wg.grid.xs(0), wg.grid.xs(n - 1) - anchor.x(),
                          anchor.y() - wg.grid.ys(0), wg.grid.ys(n - 1) - anchor.y()});
  dist = std::max(dist, 0.5 * std::min(wg.grid.dx(), wg.grid.dy()));
  return 4.0 / dist;
}

PolyModel build_model(const kde::WeightedGrid& wg, int n_sides, double alpha, double eps,
                      double coeff_bound) {
  if (n_sides < 3) {
    throw std::invalid_argument("build_model: n must be >= 3");
  }
  if (!(alpha > 0.0 && alpha <= 1.0)) {
    throw std::invalid_argument("build_model: alpha must lie in (0,1]");
  }
  if (!(eps > 0.0)) {
    throw std::invalid_argument("build_model: eps must be positive");
  }

  PolyModel model;
  model.wg = wg;
  model.n_sides = n_sides;
  model.alpha = alpha;
  model.eps = eps;

  const int n = wg.grid.n();
  model.anchor_idx = {0, 0};
  double best = -1.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (wg.w(i, j) > best) {
        best = wg.w(i, j);
        model.anchor_idx = {i, j};
      }
    }
  }
  model.anchor_pt = wg.grid.point(model.anchor_idx.i, model.anchor_idx.j);
  model.coeff_bound = coeff_bound > 0.0 ? coeff_bound : default_coeff_bound(wg, model.anchor_pt);

  model.big_m1.resize(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      model.big_m1(i, j) = model.coeff_bound * (std::abs(wg.grid.xs(i) - model.anchor_pt.x()) +
                                                std::abs(wg.grid.ys(j) - model.anchor_pt.y())) +
                           1.0 + eps;
    }
  }
  model.big_m2 = model.big_m1;
  return model;
}

Assignment implied_assignment(std::span<const AnchoredLine> lines, const PolyModel& model) {
  if (static_cast<int>(lines.size()) != model.n_sides) {
    throw std::invalid_argument("implied_assignment: line count does not match the model");
  }
  if (!geom::validate_ngon(lines, geometry_eps(model)).pass) {
    throw std::invalid_argument("implied_assignment: line set failed n-gon validation");
  }
  return affine_assignment(lines, model.anchor_pt, model.wg);
}

Assignment grid_assignment(const geom::LinePolygon& poly, const kde::WeightedGrid& wg) {
  return affine_assignment(poly.lines, poly.anchor, wg);
}

double assignment_coverage(const Assignment& assignment, const kde::WeightedGrid& wg) {
  return std::clamp(1.0 - excluded_mass(assignment, wg), 0.0, 1.0);
}

Evaluation evaluate(std::span<const AnchoredLine> lines, const PolyModel& model) {
  Evaluation ev;
  const Assignment asg = affine_assignment(lines, model.anchor_pt, model.wg);
  ev.objective = asg.count();
  const double excluded = excluded_mass(asg, model.wg);
  ev.coverage = std::clamp(1.0 - excluded, 0.0, 1.0);
  ev.feasible = static_cast<int>(lines.size()) == model.n_sides &&
                geom::validate_ngon(lines, geometry_eps(model)).pass &&
                excluded <= 1.0 - model.alpha;
  return ev;
}

PolySolution solve_optimal(const PolyModel& model, double budget_s, std::uint64_t seed) {
  const auto t0 = Clock::now();
  const auto deadline = t0 + std::chrono::duration_cast<Clock::duration>(
                                 std::chrono::duration<double>(budget_s));
  const PointSet ps = pointset_from_grid(model);
  (void)seed;  // the descent is deterministic per model; the seed is kept in
               // the contract for substitutable stochastic engines
  const CoreOutcome outcome = solve_core(
      ps, model.n_sides, scaled_params(1.0, static_cast<int>(ps.w.size())), deadline);

  PolySolution sol;
  if (!outcome.feasible) {
    sol.status = SolveStatus::infeasible;
    sol.diagnostics = "no feasible line set found within budget";
    sol.solve_time_s = std::chrono::duration<double>(Clock::now() - t0).count();
    return sol;
  }
  sol = finalize_on_grid(model.wg, {model.anchor_pt, outcome.lines, ps.eps_geom},
                         SolveStatus::optimal_budget);
  if (sol.coverage + 1e-9 < model.alpha) {
    throw std::logic_error("solve_optimal: returned coverage below alpha");
  }
  sol.solve_time_s = std::chrono::duration<double>(Clock::now() - t0).count();
  return sol;
}

WeightedSample weighted_sample(const kde::WeightedGrid& wg, int n_s, std::uint64_t seed) {
  const int n = wg.grid.n();
  const auto positive = static_cast<int>((wg.w > 0.0).count());
  if (n_s < 1 || n_s > positive) {
    throw std::invalid_argument("weighted_sample: n_s must lie in [1, positive-weight cells]");
  }

  struct Entry {
    double log_key;
    kde::CellRef cell;
  };
  std::vector<Entry> entries;
  entries.reserve(static_cast<std::size_t>(n) * n);
  Rng rng(seed);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double u = rng.uniform01();
      const double w = wg.w(i, j);
      entries.push_back({w > 0.0 ? std::log(u) / w : -std::numeric_limits<double>::infinity(),
                         kde::CellRef{i, j}});
    }
  }
  std::stable_sort(entries.begin(), entries.end(),
                   [](const Entry& a, const Entry& b) { return a.log_key > b.log_key; });

  WeightedSample out;
  out.cells.reserve(static_cast<std::size_t>(n_s));
  out.weights.resize(n_s);
  for (int s = 0; s < n_s; ++s) {
    out.cells.push_back(entries[static_cast<std::size_t>(s)].cell);
    out.weights(s) = wg.w(out.cells.back().i, out.cells.back().j);
  }
  return out;
}

Eigen::VectorXd renormalize(const Eigen::VectorXd& w_s) {
  if (w_s.size() == 0) {
    throw std::invalid_argument("renormalize: empty weight vector");
  }
  const double add = (1.0 - w_s.sum()) / static_cast<double>(w_s.size());
  Eigen::VectorXd out = w_s.array() + add;
  if ((out.array() < 0.0).any()) {
    throw std::logic_error("renormalize: negative renormalized weight");
  }
  return out;
}

PolySolution solve_heuristic(const PolyModel& model, int n_s, int n_p, double budget_per_round_s,
                             std::uint64_t seed) {
  if (n_p < 1) {
    throw std::invalid_argument("solve_heuristic: n_p must be >= 1");
  }
  const auto t0 = Clock::now();

  struct Round {
    std::vector<AnchoredLine> lines;
    Vec2 anchor;
    double excluded;
    double area;
  };
  std::optional<Round> best;

  for (int r = 0; r < n_p; ++r) {
    const auto sample = weighted_sample(
        model.wg, n_s, derive_seed(seed, kSampleStream + static_cast<std::uint64_t>(r)));
    const Eigen::VectorXd weights = renormalize(sample.weights);

    Eigen::Index anchor_at = 0;
    for (Eigen::Index c = 1; c < weights.size(); ++c) {
      const auto& cur = sample.cells[static_cast<std::size_t>(c)];
      const auto& cand = sample.cells[static_cast<std::size_t>(anchor_at)];
      if (weights(c) > weights(anchor_at) ||
          (weights(c) == weights(anchor_at) && std::pair(cur.i, cur.j) < std::pair(cand.i, cand.j))) {
        anchor_at = c;
      }
    }
    const auto& anchor_cell = sample.cells[static_cast<std::size_t>(anchor_at)];
    const Vec2 anchor = model.wg.grid.point(anchor_cell.i, anchor_cell.j);

    const PointSet ps = pointset_from_cells(model.wg, sample.cells, weights, anchor, model.alpha,
                                            model.coeff_bound, geometry_eps(model));
    const auto deadline = Clock::now() + std::chrono::duration_cast<Clock::duration>(
                                             std::chrono::duration<double>(budget_per_round_s));
    const int grid_cells = model.wg.grid.n() * model.wg.grid.n();
    const CoreOutcome outcome = solve_core(
        ps, model.n_sides, scaled_params(static_cast<double>(n_s) / grid_cells, n_s), deadline);
    if (!outcome.feasible) continue;
    if (!best || outcome.ev.area < best->area) {
      best = Round{outcome.lines, anchor, outcome.ev.excluded, outcome.ev.area};
    }
  }

  PolySolution sol;
  if (!best) {
    sol.status = SolveStatus::infeasible;
    sol.diagnostics = "all heuristic rounds infeasible";
    sol.solve_time_s = std::chrono::duration<double>(Clock::now() - t0).count();
    return sol;
  }
  sol = finalize_on_grid(model.wg, {best->anchor, best->lines, geometry_eps(model)},
                         SolveStatus::heuristic);
  sol.coverage = std::clamp(1.0 - best->excluded, 0.0, 1.0);  // reduced-model coverage
  if (sol.coverage + 1e-9 < model.alpha) {
    throw std::logic_error("solve_heuristic: returned reduced coverage below alpha");
  }
  sol.solve_time_s = std::chrono::duration<double>(Clock::now() - t0).count();
  return sol;
}

PolySolution bounding_box(const kde::WeightedGrid& wg, double alpha) {
  const auto t0 = Clock::now();
  const auto region = kde::confidence_region(wg, alpha);
  if (region.cells.empty()) {
    throw std::runtime_error("bounding_box: empty confidence region");
  }

  const double hx = 0.5 * wg.grid.dx();
  const double hy = 0.5 * wg.grid.dy();
  double xmin = std::numeric_limits<double>::infinity();
  double xmax = -xmin, ymin = xmin, ymax = -xmin;
  double wsum = 0.0;
  Vec2 centroid = Vec2::Zero();
  for (const auto& cell : region.cells) {
    const Vec2 pt = wg.grid.point(cell.i, cell.j);
    xmin = std::min(xmin, pt.x() - hx);
    xmax = std::max(xmax, pt.x() + hx);
    ymin = std::min(ymin, pt.y() - hy);
    ymax = std::max(ymax, pt.y() + hy);
    wsum += wg.w(cell.i, cell.j);
    centroid += wg.w(cell.i, cell.j) * pt;
  }
  centroid /= wsum;

  const int n = wg.grid.n();
  const double diag = std::hypot(wg.grid.xs(n - 1) - wg.grid.xs(0),
                                 wg.grid.ys(n - 1) - wg.grid.ys(0));
  const double eps_geom = geom::kDefaultEps / std::pow(std::max(diag / 4.0, 1e-12), 2);

  geom::LinePolygon box;
  box.anchor = centroid;
  box.eps = eps_geom;
  box.lines = {{1.0 / (xmax - centroid.x()), 0.0},
               {0.0, 1.0 / (ymax - centroid.y())},
               {1.0 / (xmin - centroid.x()), 0.0},
               {0.0, 1.0 / (ymin - centroid.y())}};

  PolySolution sol = finalize_on_grid(wg, box, SolveStatus::baseline);
  sol.area_m2 = (xmax - xmin) * (ymax - ymin);
  sol.solve_time_s = std::chrono::duration<double>(Clock::now() - t0).count();
  return sol;
}

PolySolution bounding_box_samples(const kde::WeightedGrid& wg, const SampleSet& samples,
                                  double alpha) {
  const auto t0 = Clock::now();
  if (!(alpha > 0.0 && alpha <= 1.0)) {
    throw std::invalid_argument("bounding_box_samples: alpha must lie in (0,1]");
  }
  if (samples.count() < 1) {
    throw std::invalid_argument("bounding_box_samples: empty sample set");
  }
  const double xmin = samples.points.row(0).minCoeff();
  const double xmax = samples.points.row(0).maxCoeff();
  const double ymin = samples.points.row(1).minCoeff();
  const double ymax = samples.points.row(1).maxCoeff();
  const Vec2 center{0.5 * (xmin + xmax), 0.5 * (ymin + ymax)};
  const double ex = std::max(xmax - center.x(), 1e-9);
  const double ey = std::max(ymax - center.y(), 1e-9);

  const int n = wg.grid.n();
  const double diag = std::hypot(wg.grid.xs(n - 1) - wg.grid.xs(0),
                                 wg.grid.ys(n - 1) - wg.grid.ys(0));

  geom::LinePolygon box;
  box.anchor = center;
  box.eps = geom::kDefaultEps / std::pow(std::max(diag / 4.0, 1e-12), 2);
  box.lines = {{1.0 / ex, 0.0}, {0.0, 1.0 / ey}, {-1.0 / ex, 0.0}, {0.0, -1.0 / ey}};

  PolySolution sol = finalize_on_grid(wg, box, SolveStatus::baseline);
  sol.area_m2 = 4.0 * ex * ey;
  sol.solve_time_s = std::chrono::duration<double>(Clock::now() - t0).count();
  return sol;
}

void export_model(const PolyModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("export_model: cannot open " + path.string());
  }
  char buf[64];
  auto num = [&buf](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  const int n_grid = model.wg.grid.n();
  const int n = model.n_sides;

  out << "# minlp-model v1\n";
  out << "set N " << n_grid << "\n";
  out << "set n " << n << "\n";
  out << "set alpha " << num(model.alpha) << "\n";
  out << "set eps " << num(model.eps) << "\n";
  out << "set coeff_bound " << num(model.coeff_bound) << "\n";
  out << "set anchor_idx " << (model.anchor_idx.i + 1) << " " << (model.anchor_idx.j + 1) << "\n";
  out << "set anchor_pt " << num(model.anchor_pt.x()) << " " << num(model.anchor_pt.y()) << "\n";

  for (int k = 1; k <= n; ++k) {
    out << "var a_" << k << " " << num(-model.coeff_bound) << " " << num(model.coeff_bound) << "\n";
    out << "var b_" << k << " " << num(-model.coeff_bound) << " " << num(model.coeff_bound) << "\n";
  }
  for (int i = 1; i <= n_grid; ++i) {
    for (int j = 1; j <= n_grid; ++j) {
      for (int k = 1; k <= n; ++k) {
        out << "var l_" << i << "_" << j << "_" << k << " binary\n";
      }
    }
  }
  for (int i = 1; i <= n_grid; ++i) {
    for (int j = 1; j <= n_grid; ++j) {
      out << "var z_" << i << "_" << j << " binary\n";
    }
  }

  out << "minimize:";
  for (int i = 1; i <= n_grid; ++i) {
    for (int j = 1; j <= n_grid; ++j) {
      out << " + 1 z_" << i << "_" << j;
    }
  }
  out << "\n";

  for (int i = 1; i <= n; ++i) {
    const int j = i % n + 1;
    out << "detcon_" << i << ": + 1 a_" << i << "*b_" << j << " - 1 b_" << i << "*a_" << j
        << " >= " << num(model.eps) << "\n";
  }
  for (int i = 1; i <= n; ++i) {
    const int j = i % n + 1;
    for (int k = 1; k <= n; ++k) {
      if (k == i || k == j) continue;
      out << "no1cons_" << i << "_" << j << "_" << k << ":";
      out << " - 1 a_" << k << "*b_" << i << " + 1 a_" << k << "*b_" << j;
      out << " + 1 b_" << k << "*a_" << i << " - 1 b_" << k << "*a_" << j;
      out << " - 1 a_" << i << "*b_" << j << " + 1 b_" << i << "*a_" << j;
      out << " <= " << num(-model.eps) << "\n";
    }
  }

  for (int i = 1; i <= n_grid; ++i) {
    const double dxv = model.wg.grid.xs(i - 1) - model.anchor_pt.x();
    for (int j = 1; j <= n_grid; ++j) {
      const double dyv = model.wg.grid.ys(j - 1) - model.anchor_pt.y();
      const double m1 = model.big_m1(i - 1, j - 1);
      const double m2 = model.big_m2(i - 1, j - 1);
      for (int k = 1; k <= n; ++k) {
        out << "lab1_" << i << "_" << j << "_" << k << ": + " << num(dxv) << " a_" << k << " + "
            << num(dyv) << " b_" << k << " + " << num(m1) << " l_" << i << "_" << j << "_" << k
            << " <= " << num(m1 + 1.0) << "\n";
        out << "lab2_" << i << "_" << j << "_" << k << ": + " << num(dxv) << " a_" << k << " + "
            << num(dyv) << " b_" << k << " + " << num(m2) << " l_" << i << "_" << j << "_" << k
            << " >= " << num(1.0 + model.eps) << "\n";
      }
    }
  }

  for (int i = 1; i <= n_grid; ++i) {
    for (int j = 1; j <= n_grid; ++j) {
      out << "zl1_" << i << "_" << j << ":";
      for (int k = 1; k <= n; ++k) out << " + 1 l_" << i << "_" << j << "_" << k;
      out << " - " << n << " z_" << i << "_" << j << " >= 0\n";
      out << "zl2_" << i << "_" << j << ":";
      for (int k = 1; k <= n; ++k) out << " + 1 l_" << i << "_" << j << "_" << k;
      out << " - 1 z_" << i << "_" << j << " <= " << (n - 1) << "\n";
    }
  }

  out << "anchor: + 1 z_" << (model.anchor_idx.i + 1) << "_" << (model.anchor_idx.j + 1)
      << " = 1\n";

  out << "coverage:";
  for (int i = 1; i <= n_grid; ++i) {
    for (int j = 1; j <= n_grid; ++j) {
      out << " + " << num(model.wg.w(i - 1, j - 1)) << " z_" << i << "_" << j;
    }
  }
  out << " >= " << num(model.alpha) << "\n";
}

}  // namespace reachset::opt
