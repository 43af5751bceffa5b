#pragma once

#include "reachset/types.hpp"

#include <array>
#include <filesystem>
#include <vector>

namespace reachset::dist {

/// Gaussian with parameters (mu, sigma) truncated to [lo, hi].
struct TruncGauss {
  double mu = 0.0;
  double sigma = 1.0;
  double lo = -1.0;
  double hi = 1.0;
};

/// One-step planar kinematics: position = prev_pos + (cos th, sin th) * v * dt,
/// with speed v (km/h) and heading th (degrees) truncated-Gaussian distributed.
struct CaseIParams {
  TruncGauss speed_kmh{190.0, 5.0, 165.0, 220.0};
  TruncGauss heading_deg{10.0, 30.0, -50.0, 70.0};
  double dt_s = 1.0;
  Vec2 prev_pos = Vec2::Zero();
};

struct MixtureComponent {
  double weight;
  double mean;
  double sigma;
};

/// Independent per-axis two-component Gaussian mixtures (meters).
struct BimodalParams {
  std::array<MixtureComponent, 2> x{{{0.5, 20.0, 6.0}, {0.5, 60.0, 6.0}}};
  std::array<MixtureComponent, 2> y{{{0.5, 30.0, 7.0}, {0.5, 70.0, 7.0}}};
};

double std_normal_cdf(double x);

/// Inverse of std_normal_cdf, accurate to ~1 ulp over (0,1).
double std_normal_quantile(double p);

/// Inverse-CDF sampling restricted to [lo, hi]. Every value lands in the
/// interval; identical (dist, count, seed) give bit-identical output.
std::vector<double> sample_trunc_gauss(const TruncGauss& tg, int count, std::uint64_t seed);

SampleSet sample_fan(const CaseIParams& params, int count, std::uint64_t seed);

SampleSet sample_bimodal(const BimodalParams& params, int count, std::uint64_t seed);

/// Reads a CSV with header "x,y", one point per row, row order preserved.
SampleSet load_samples(const std::filesystem::path& path);

void save_samples(const SampleSet& samples, const std::filesystem::path& path);

}  // namespace reachset::dist
