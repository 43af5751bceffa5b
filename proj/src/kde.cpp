#include "reachset/kde.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace reachset::kde {

namespace {

constexpr double kMinAbsPad = 1e-6;

int next_pow2(int v) {
  int p = 1;
  while (p < v) p <<= 1;
  return p;
}

/// Circular FFT convolution of the columns of `field` with a symmetric kernel
/// whose tap at offset d (|d| < N) is kernel_taps(N - 1 + d). Output keeps the
/// first N rows, i.e. the linear convolution restricted to the grid.
Eigen::ArrayXXd convolve_columns(const Eigen::ArrayXXd& field, const Eigen::VectorXd& kernel_taps) {
  const int n = static_cast<int>(field.rows());
  const int len = next_pow2(2 * n - 1);

  Eigen::VectorXd kernel = Eigen::VectorXd::Zero(len);
  for (int d = -(n - 1); d <= n - 1; ++d) {
    kernel((d + len) % len) = kernel_taps(n - 1 + d);
  }

  Eigen::FFT<double> fft;
  Eigen::VectorXcd kernel_hat;
  fft.fwd(kernel_hat, kernel);

  Eigen::ArrayXXd out(n, field.cols());
  Eigen::VectorXd padded = Eigen::VectorXd::Zero(len);
  Eigen::VectorXcd col_hat;
  Eigen::VectorXd conv;
  for (Eigen::Index c = 0; c < field.cols(); ++c) {
    padded.setZero();
    padded.head(n) = field.col(c).matrix();
    fft.fwd(col_hat, padded);
    col_hat.array() *= kernel_hat.array();
    fft.inv(conv, col_hat);
    out.col(c) = conv.head(n).array();
  }
  return out;
}

Eigen::VectorXd gaussian_taps(int n, double spacing, double h) {
  Eigen::VectorXd taps(2 * n - 1);
  const double norm = 1.0 / (std::sqrt(2.0 * std::numbers::pi) * h);
  for (int d = -(n - 1); d <= n - 1; ++d) {
    const double t = d * spacing / h;
    taps(n - 1 + d) = norm * std::exp(-0.5 * t * t);
  }
  return taps;
}

}  // namespace

Grid2D build_grid(const SampleSet& samples, int n, double pad) {
  if (samples.count() < 1) {
    throw std::invalid_argument("build_grid: samples must be nonempty");
  }
  if (n < 2) {
    throw std::invalid_argument("build_grid: n must be >= 2");
  }
  if (pad < 0.0) {
    throw std::invalid_argument("build_grid: pad must be >= 0");
  }

  Grid2D grid;
  for (int axis = 0; axis < 2; ++axis) {
    const double lo = samples.points.row(axis).minCoeff();
    const double hi = samples.points.row(axis).maxCoeff();
    const double range = hi - lo;
    const double expand = range > 0.0 ? pad * range : kMinAbsPad;
    auto coords = Eigen::VectorXd::LinSpaced(n, lo - expand, hi + expand);
    (axis == 0 ? grid.xs : grid.ys) = coords;
  }
  return grid;
}

Bandwidth bandwidth(const SampleSet& samples) {
  const auto n = samples.count();
  if (n < 2) {
    throw std::invalid_argument("bandwidth: need at least 2 samples");
  }
  const double factor = 1.06 * std::pow(static_cast<double>(n), -0.2);

  Bandwidth bw{};
  for (int axis = 0; axis < 2; ++axis) {
    const auto row = samples.points.row(axis);
    const double mean = row.mean();
    const double var = (row.array() - mean).square().sum() / static_cast<double>(n - 1);
    if (!(var > 0.0)) {
      throw std::invalid_argument("degenerate-bandwidth: zero variance on an axis");
    }
    (axis == 0 ? bw.hx : bw.hy) = factor * std::sqrt(var);
  }
  return bw;
}

WeightedGrid fft_kde(const SampleSet& samples, const Grid2D& grid, double hx, double hy) {
  if (!(hx > 0.0) || !(hy > 0.0)) {
    throw std::invalid_argument("fft_kde: bandwidths must be positive");
  }
  const int n = grid.n();
  const double dx = grid.dx();
  const double dy = grid.dy();

  // Linear binning: each sample splits its unit mass over the four
  // surrounding grid nodes.
  Eigen::ArrayXXd counts = Eigen::ArrayXXd::Zero(n, n);
  for (Eigen::Index s = 0; s < samples.count(); ++s) {
    const double gx = std::clamp((samples.points(0, s) - grid.xs(0)) / dx, 0.0,
                                 static_cast<double>(n - 1));
    const double gy = std::clamp((samples.points(1, s) - grid.ys(0)) / dy, 0.0,
                                 static_cast<double>(n - 1));
    const int i0 = std::min(static_cast<int>(gx), n - 2);
    const int j0 = std::min(static_cast<int>(gy), n - 2);
    const double fx = gx - i0;
    const double fy = gy - j0;
    counts(i0, j0) += (1.0 - fx) * (1.0 - fy);
    counts(i0 + 1, j0) += fx * (1.0 - fy);
    counts(i0, j0 + 1) += (1.0 - fx) * fy;
    counts(i0 + 1, j0 + 1) += fx * fy;
  }

  Eigen::ArrayXXd z = convolve_columns(counts, gaussian_taps(n, dx, hx));
  z = convolve_columns(z.transpose(), gaussian_taps(n, dy, hy)).transpose();
  z *= 1.0 / static_cast<double>(samples.count());
  z = z.max(0.0);

  const double total = z.sum();
  if (!(total > 0.0)) {
    throw std::runtime_error("fft_kde: estimated density vanished on the grid");
  }

  WeightedGrid wg;
  wg.grid = grid;
  wg.z_kde = z;
  wg.w = z / total;
  return wg;
}

ConfidenceRegion confidence_region(const WeightedGrid& wg, double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) {
    throw std::invalid_argument("confidence_region: alpha must lie in (0,1]");
  }
  if (std::abs(wg.w.sum() - 1.0) > 1e-9) {
    throw std::invalid_argument("confidence_region: weights must sum to 1");
  }
  const int n = static_cast<int>(wg.w.rows());

  std::vector<CellRef> order;
  order.reserve(static_cast<std::size_t>(n) * n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (wg.w(i, j) > 0.0) order.push_back({i, j});
    }
  }
  std::stable_sort(order.begin(), order.end(), [&](CellRef a, CellRef b) {
    const double wa = wg.w(a.i, a.j);
    const double wb = wg.w(b.i, b.j);
    if (wa != wb) return wa > wb;
    return std::pair(a.i, a.j) < std::pair(b.i, b.j);
  });

  ConfidenceRegion region;
  region.alpha = alpha;
  for (const CellRef c : order) {
    region.cells.push_back(c);
    region.total_weight += wg.w(c.i, c.j);
    if (region.total_weight >= alpha - 1e-12) break;
  }
  return region;
}

void write_grid_csv(const WeightedGrid& wg, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("write_grid_csv: cannot open " + path.string());
  }
  out << "i,j,x,y,z_kde,w\n";
  char buf[160];
  const int n = wg.grid.n();
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      std::snprintf(buf, sizeof(buf), "%d,%d,%.17g,%.17g,%.17g,%.17g\n", i, j, wg.grid.xs(i),
                    wg.grid.ys(j), wg.z_kde(i, j), wg.w(i, j));
      out << buf;
    }
  }
}

}  // namespace reachset::kde
