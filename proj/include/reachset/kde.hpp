#pragma once

#include "reachset/types.hpp"

#include <filesystem>
#include <vector>

namespace reachset::kde {

/// Axis-aligned N x N evaluation grid with uniform spacing per axis.
/// Index (i, j) maps to the point (xs[i], ys[j]).
struct Grid2D {
  Eigen::VectorXd xs;
  Eigen::VectorXd ys;

  int n() const { return static_cast<int>(xs.size()); }
  double dx() const { return xs(1) - xs(0); }
  double dy() const { return ys(1) - ys(0); }
  Vec2 point(int i, int j) const { return {xs(i), ys(j)}; }
};

/// Density estimate z_kde (1/m^2) plus normalized cell weights w (sum 1).
/// Arrays are N x N indexed (i, j) like the grid.
struct WeightedGrid {
  Grid2D grid;
  Eigen::ArrayXXd z_kde;
  Eigen::ArrayXXd w;
};

struct CellRef {
  int i = 0;
  int j = 0;

  friend bool operator==(CellRef, CellRef) = default;
};

/// Smallest superlevel set of cells whose cumulative weight reaches alpha;
/// cells are listed in descending weight, ties broken lexicographically.
struct ConfidenceRegion {
  std::vector<CellRef> cells;
  double total_weight = 0.0;
  double alpha = 0.0;
};

/// Bounding box of the samples expanded by pad * range per axis (minimum
/// absolute pad 1e-6 m on a zero-range axis), discretized into n points.
Grid2D build_grid(const SampleSet& samples, int n, double pad = 0.05);

struct Bandwidth {
  double hx;
  double hy;
};

/// Silverman per-axis rule h = 1.06 * sigma_hat * count^(-1/5).
Bandwidth bandwidth(const SampleSet& samples);

/// Binned Gaussian KDE: linear binning onto the grid, separable kernel
/// applied by zero-padded forward/inverse FFT per axis, negatives from
/// roundoff clamped to zero, then weights normalized to sum 1.
WeightedGrid fft_kde(const SampleSet& samples, const Grid2D& grid, double hx, double hy);

ConfidenceRegion confidence_region(const WeightedGrid& wg, double alpha);

/// Writes "i,j,x,y,z_kde,w" rows for plotting/debugging.
void write_grid_csv(const WeightedGrid& wg, const std::filesystem::path& path);

}  // namespace reachset::kde
