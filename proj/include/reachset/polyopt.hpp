#pragma once

#include "reachset/geometry.hpp"
#include "reachset/kde.hpp"
#include "reachset/types.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace reachset::opt {

/// Instance of the n-sided coverage problem over a weighted grid: minimize
/// the number of grid points inside an n-sided convex polygon subject to
/// covered weight >= alpha, with the heaviest cell as anchor.
struct PolyModel {
  kde::WeightedGrid wg;
  int n_sides = 4;
  double alpha = 0.9;
  kde::CellRef anchor_idx;
  Vec2 anchor_pt = Vec2::Zero();
  Eigen::ArrayXXd big_m1;  // bounds on the affine form used by indicator rows
  Eigen::ArrayXXd big_m2;
  double eps = geom::kDefaultEps;
  double coeff_bound = 0.0;  // box on |a_k|, |b_k|
};

/// Per-cell line indicators l and inside indicators z implied by a line set:
/// l[k](i,j) = [affine_k(x_i, y_j) <= 0], z = AND over k.
struct Assignment {
  std::vector<Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>> l;
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> z;

  int count() const { return static_cast<int>(z.count()); }
};

enum class SolveStatus { optimal_budget, heuristic, baseline, infeasible };

std::string to_string(SolveStatus status);

struct PolySolution {
  geom::LinePolygon polygon;
  Assignment assignment;      // over the full grid
  int objective = 0;          // count of z = 1 over the full grid
  double coverage = 0.0;      // on the model the solver actually ran
  double coverage_full = 0.0; // re-evaluated over the full grid
  double area_m2 = 0.0;
  double solve_time_s = 0.0;
  SolveStatus status = SolveStatus::infeasible;
  std::string diagnostics;
};

/// Strictness margin for determinant/side validation of candidate line sets,
/// rescaled from the model's dimensionless eps by the grid's length scale
/// (the affine-form inequalities carry units of 1/m^2).
double geometry_eps(const PolyModel& model);

/// Default coefficient box: 4 / (shortest distance from the anchor to the
/// grid boundary).
double default_coeff_bound(const kde::WeightedGrid& wg, const Vec2& anchor);

PolyModel build_model(const kde::WeightedGrid& wg, int n_sides, double alpha,
                      double eps = geom::kDefaultEps, double coeff_bound = 0.0);

/// Assignment implied by lines anchored at the model's anchor point.
Assignment implied_assignment(std::span<const geom::AnchoredLine> lines, const PolyModel& model);

/// Assignment of grid cells for a polygon with its own anchor.
Assignment grid_assignment(const geom::LinePolygon& poly, const kde::WeightedGrid& wg);

double assignment_coverage(const Assignment& assignment, const kde::WeightedGrid& wg);

struct Evaluation {
  bool feasible = false;
  int objective = 0;
  double coverage = 0.0;
};

/// Feasible iff the line set validates and covered weight reaches alpha.
/// Infeasibility is a result, not an error.
Evaluation evaluate(std::span<const geom::AnchoredLine> lines, const PolyModel& model);

/// Budget-bounded multi-start projected search over the 2n line coefficients
/// (the binaries are implied). Deterministic given seed; the budget is a
/// safety cutoff checked between starts.
PolySolution solve_optimal(const PolyModel& model, double budget_s, std::uint64_t seed);

struct WeightedSample {
  std::vector<kde::CellRef> cells;
  Eigen::VectorXd weights;  // original weights of the selected cells
};

/// Weighted sampling without replacement: keys u_ij^(1/w_ij), keep the n_s
/// largest; zero-weight cells get key 0.
WeightedSample weighted_sample(const kde::WeightedGrid& wg, int n_s, std::uint64_t seed);

/// w + (1 - sum(w)) / n_s, so the result sums to one.
Eigen::VectorXd renormalize(const Eigen::VectorXd& w_s);

/// Weighted-sampling heuristic: n_p rounds of (sample n_s cells, renormalize,
/// solve the reduced instance anchored at the heaviest sampled cell), keeping
/// the minimum-area round; the winner is re-evaluated against the full grid.
PolySolution solve_heuristic(const PolyModel& model, int n_s, int n_p, double budget_per_round_s,
                             std::uint64_t seed);

/// Axis-aligned box of the alpha-confidence region (cell extents), anchored
/// at the region's weighted centroid.
PolySolution bounding_box(const kde::WeightedGrid& wg, double alpha);

/// Same baseline boxing the raw samples instead of the confidence region.
PolySolution bounding_box_samples(const kde::WeightedGrid& wg, const SampleSet& samples,
                                  double alpha);

/// Writes the full mixed-integer model (objective, bilinear determinant and
/// vertex-side rows, indicator rows, logic rows, coverage row, bounds) in the
/// plain-text format documented in the README.
void export_model(const PolyModel& model, const std::filesystem::path& path);

}  // namespace reachset::opt
