#include "reachset/distributions.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <stdexcept>
#include <string>

namespace reachset::dist {

namespace {

constexpr std::uint64_t kSpeedStream = 0x76656c6f63697479ULL;
constexpr std::uint64_t kHeadingStream = 0x68656164696e6721ULL;
constexpr std::uint64_t kAxisXStream = 0x6d697861786973a0ULL;
constexpr std::uint64_t kAxisYStream = 0x6d697861786973a1ULL;

void check_interval(const TruncGauss& tg) {
  if (!(tg.lo < tg.hi)) {
    throw std::invalid_argument("invalid-interval: require lo < hi");
  }
  if (!(tg.sigma >= 0.0)) {
    throw std::invalid_argument("invalid-interval: require sigma >= 0");
  }
}

void check_mixture(const std::array<MixtureComponent, 2>& axis, const char* name) {
  const double w1 = axis[0].weight;
  const double w2 = axis[1].weight;
  const bool open_unit = w1 > 0.0 && w1 < 1.0 && w2 > 0.0 && w2 < 1.0;
  if (!open_unit || std::abs(w1 + w2 - 1.0) > 1e-12) {
    throw std::invalid_argument(std::string("invalid-mixture: ") + name +
                                " weights must lie in (0,1) and sum to 1");
  }
  if (!(axis[0].sigma >= 0.0) || !(axis[1].sigma >= 0.0)) {
    throw std::invalid_argument(std::string("invalid-mixture: ") + name +
                                " sigmas must be nonnegative");
  }
}

}  // namespace

double std_normal_cdf(double x) {
  return 0.5 * std::erfc(-x * std::numbers::sqrt2 / 2.0);
}

double std_normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw std::invalid_argument("std_normal_quantile: p must lie in (0,1)");
  }
  // Acklam's rational approximation, then one Halley refinement step.
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;

  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }

  const double err = std_normal_cdf(x) - p;
  const double u = err * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
  x -= u / (1.0 + 0.5 * x * u);
  return x;
}

std::vector<double> sample_trunc_gauss(const TruncGauss& tg, int count, std::uint64_t seed) {
  check_interval(tg);
  if (count <= 0) {
    throw std::invalid_argument("sample_trunc_gauss: count must be positive");
  }

  std::vector<double> out(static_cast<std::size_t>(count));
  if (tg.sigma == 0.0) {
    if (tg.mu < tg.lo || tg.mu > tg.hi) {
      throw std::invalid_argument("degenerate-truncation: point mass outside [lo,hi]");
    }
    std::fill(out.begin(), out.end(), tg.mu);
    return out;
  }

  const double cdf_lo = std_normal_cdf((tg.lo - tg.mu) / tg.sigma);
  const double cdf_hi = std_normal_cdf((tg.hi - tg.mu) / tg.sigma);
  const double mass = cdf_hi - cdf_lo;
  if (!(mass > 0.0)) {
    throw std::invalid_argument("degenerate-truncation: parent mass on [lo,hi] is zero");
  }

  Rng rng(seed);
  for (double& v : out) {
    const double p = cdf_lo + rng.uniform01() * mass;
    v = std::clamp(tg.mu + tg.sigma * std_normal_quantile(p), tg.lo, tg.hi);
  }
  return out;
}

SampleSet sample_fan(const CaseIParams& params, int count, std::uint64_t seed) {
  if (!(params.dt_s > 0.0)) {
    throw std::invalid_argument("sample_fan: dt must be positive");
  }
  const auto speeds = sample_trunc_gauss(params.speed_kmh, count, derive_seed(seed, kSpeedStream));
  const auto headings =
      sample_trunc_gauss(params.heading_deg, count, derive_seed(seed, kHeadingStream));

  SampleSet out;
  out.points.resize(2, count);
  for (int i = 0; i < count; ++i) {
    const double v_ms = speeds[static_cast<std::size_t>(i)] * 5.0 / 18.0;
    const double th = headings[static_cast<std::size_t>(i)] * std::numbers::pi / 180.0;
    out.points.col(i) = params.prev_pos +
                        Vec2(std::cos(th), std::sin(th)) * v_ms * params.dt_s;
  }
  return out;
}

SampleSet sample_bimodal(const BimodalParams& params, int count, std::uint64_t seed) {
  if (count <= 0) {
    throw std::invalid_argument("sample_bimodal: count must be positive");
  }
  check_mixture(params.x, "x");
  check_mixture(params.y, "y");

  auto draw_axis = [count](const std::array<MixtureComponent, 2>& axis, std::uint64_t s) {
    Rng rng(s);
    Eigen::VectorXd vals(count);
    for (int i = 0; i < count; ++i) {
      const MixtureComponent& comp = rng.uniform01() < axis[0].weight ? axis[0] : axis[1];
      vals(i) = comp.mean + comp.sigma * std_normal_quantile(rng.uniform01());
    }
    return vals;
  };

  SampleSet out;
  out.points.resize(2, count);
  out.points.row(0) = draw_axis(params.x, derive_seed(seed, kAxisXStream)).transpose();
  out.points.row(1) = draw_axis(params.y, derive_seed(seed, kAxisYStream)).transpose();
  return out;
}

SampleSet load_samples(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("load_samples: cannot open " + path.string());
  }

  auto parse_field = [](std::string_view field, double& value) {
    const char* first = field.data();
    const char* last = field.data() + field.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    return ec == std::errc() && ptr == last;
  };

  std::string line;
  std::size_t line_no = 0;
  std::vector<Vec2> pts;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1) {
      if (line != "x,y") {
        throw std::runtime_error("load_samples: expected header \"x,y\" at line 1 of " +
                                 path.string());
      }
      continue;
    }
    if (line.empty()) continue;
    const auto comma = line.find(',');
    double x = 0.0, y = 0.0;
    if (comma == std::string::npos ||
        !parse_field(std::string_view(line).substr(0, comma), x) ||
        !parse_field(std::string_view(line).substr(comma + 1), y)) {
      throw std::runtime_error("load_samples: malformed row at line " + std::to_string(line_no) +
                               " of " + path.string());
    }
    pts.emplace_back(x, y);
  }
  if (pts.empty()) {
    throw std::runtime_error("load_samples: no data rows in " + path.string());
  }

  SampleSet out;
  out.points.resize(2, static_cast<Eigen::Index>(pts.size()));
  for (Eigen::Index i = 0; i < out.points.cols(); ++i) {
    out.points.col(i) = pts[static_cast<std::size_t>(i)];
  }
  return out;
}

void save_samples(const SampleSet& samples, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("save_samples: cannot open " + path.string());
  }
  out << "x,y\n";
  char buf[64];
  for (Eigen::Index i = 0; i < samples.count(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g\n", samples.points(0, i), samples.points(1, i));
    out << buf;
  }
}

}  // namespace reachset::dist
