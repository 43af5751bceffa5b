#include "reachset/harness.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <stdexcept>

namespace reachset::harness {

namespace {

constexpr std::uint64_t kTrainStream = 0x747261696e646174ULL;
constexpr std::uint64_t kTestStream = 0x7465737464617461ULL;
constexpr std::uint64_t kOptStream = 0x6f7074696d616c21ULL;
constexpr std::uint64_t kHeurStream = 0x6865757269737469ULL;
constexpr std::uint64_t kRefStream = 0x726566706f6c7967ULL;
constexpr std::uint64_t kRunStream = 0x726f627573747275ULL;

SampleSet bootstrap(const SampleSet& base, int count, std::uint64_t seed) {
  Rng rng(seed);
  SampleSet out;
  out.points.resize(2, count);
  for (int i = 0; i < count; ++i) {
    out.points.col(i) = base.points.col(
        static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(base.count()))));
  }
  return out;
}

std::string iso_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::tm tm_utc{};
  gmtime_r(&now, &tm_utc);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buf;
}

nlohmann::json environment_json() {
  nlohmann::json env;
  env["timestamp"] = iso_timestamp();
  env["compiler"] = __VERSION__;
#if defined(__linux__)
  env["platform"] = "linux";
#elif defined(__APPLE__)
  env["platform"] = "macos";
#else
  env["platform"] = "other";
#endif
  return env;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("emit_report: cannot open " + path.string());
  }
  out << text;
}

}  // namespace

std::string to_string(CaseKind kind) {
  switch (kind) {
    case CaseKind::fan: return "fan";
    case CaseKind::bimodal: return "bimodal";
    case CaseKind::file: return "file";
  }
  return "unknown";
}

void validate(const ExperimentConfig& cfg) {
  if (cfg.n_ds < 1) throw std::invalid_argument("config: n_ds must be positive");
  if (cfg.grid_n < 2) throw std::invalid_argument("config: grid must be >= 2");
  if (cfg.n_sides < 3) throw std::invalid_argument("config: n-sides must be >= 3");
  if (!(cfg.alpha > 0.0 && cfg.alpha <= 1.0)) {
    throw std::invalid_argument("config: alpha must lie in (0,1]");
  }
  if (cfg.n_s < 1) throw std::invalid_argument("config: ns must be positive");
  if (cfg.n_p < 1) throw std::invalid_argument("config: np must be positive");
  if (cfg.n_test < 1) throw std::invalid_argument("config: n-test must be positive");
  if (!(cfg.budget_s > 0.0)) throw std::invalid_argument("config: budget must be positive");
  if (!(cfg.eps > 0.0)) throw std::invalid_argument("config: eps must be positive");
  if (cfg.pad < 0.0) throw std::invalid_argument("config: pad must be >= 0");
  if (cfg.kind == CaseKind::file && cfg.samples_path.empty()) {
    throw std::invalid_argument("config: file case needs --samples");
  }
}

Sampler make_sampler(const ExperimentConfig& cfg) {
  switch (cfg.kind) {
    case CaseKind::fan:
      return [params = cfg.fan_params](int count, std::uint64_t seed) {
        return dist::sample_fan(params, count, seed);
      };
    case CaseKind::bimodal:
      return [params = cfg.bimodal_params](int count, std::uint64_t seed) {
        return dist::sample_bimodal(params, count, seed);
      };
    case CaseKind::file: {
      auto base = dist::load_samples(cfg.samples_path);
      return [base = std::move(base)](int count, std::uint64_t seed) {
        return bootstrap(base, count, seed);
      };
    }
  }
  throw std::logic_error("make_sampler: unknown case kind");
}

double ratio_test(const geom::LinePolygon& poly, const Sampler& sampler, int n_test,
                  std::uint64_t seed) {
  if (n_test < 1) {
    throw std::invalid_argument("ratio_test: n_test must be positive");
  }
  const SampleSet fresh = sampler(n_test, seed);
  int inside = 0;
  for (Eigen::Index i = 0; i < fresh.count(); ++i) {
    if (geom::contains(poly, fresh.points.col(i), 0.0)) ++inside;
  }
  return static_cast<double>(inside) / static_cast<double>(n_test);
}

Pipeline build_pipeline(const ExperimentConfig& cfg) {
  validate(cfg);
  Pipeline pipe;
  pipe.samples = make_sampler(cfg)(cfg.n_ds, derive_seed(cfg.seed, kTrainStream));
  const kde::Grid2D grid = kde::build_grid(pipe.samples, cfg.grid_n, cfg.pad);
  pipe.bw = kde::bandwidth(pipe.samples);
  pipe.wg = kde::fft_kde(pipe.samples, grid, pipe.bw.hx, pipe.bw.hy);
  pipe.model = opt::build_model(pipe.wg, cfg.n_sides, cfg.alpha, cfg.eps, cfg.coeff_bound);
  return pipe;
}

ExperimentReport run_experiment(const ExperimentConfig& cfg) {
  Pipeline pipe = build_pipeline(cfg);
  const Sampler sampler = make_sampler(cfg);

  ExperimentReport report;
  report.cfg = cfg;
  report.samples = std::move(pipe.samples);
  report.bw = pipe.bw;
  report.wg = std::move(pipe.wg);
  const opt::PolyModel& model = pipe.model;

  std::vector<MethodResult> methods;
  methods.push_back(
      {"optimal-budget", opt::solve_optimal(model, cfg.budget_s, derive_seed(cfg.seed, kOptStream)),
       0.0});
  methods.push_back(
      {"heuristic",
       opt::solve_heuristic(model, cfg.n_s, cfg.n_p, cfg.budget_s / cfg.n_p,
                            derive_seed(cfg.seed, kHeurStream)),
       0.0});
  methods.push_back({"bounding-box", cfg.box_samples
                                         ? opt::bounding_box_samples(report.wg, report.samples, cfg.alpha)
                                         : opt::bounding_box(report.wg, cfg.alpha),
                     0.0});

  const std::uint64_t test_seed = derive_seed(cfg.seed, kTestStream);
  for (MethodResult& mr : methods) {
    if (mr.solution.status == opt::SolveStatus::infeasible) {
      report.any_infeasible = true;
      continue;
    }
    mr.ratio = ratio_test(mr.solution.polygon, sampler, cfg.n_test, test_seed);
  }
  report.methods = std::move(methods);
  return report;
}

RobustnessReport robustness_study(const ExperimentConfig& cfg, const std::vector<int>& ns_list,
                                  int repeats) {
  validate(cfg);
  if (repeats < 2) {
    throw std::invalid_argument("robustness_study: repeats must be >= 2");
  }

  RobustnessReport report;
  report.cfg = cfg;

  const opt::PolyModel model = build_pipeline(cfg).model;

  report.reference = opt::solve_optimal(model, cfg.budget_s, derive_seed(cfg.seed, kRefStream));
  if (report.reference.status == opt::SolveStatus::infeasible) {
    throw std::runtime_error("robustness_study: reference solve infeasible");
  }
  const geom::VertexChain ref_chain = geom::vertices(report.reference.polygon);

  for (const int n_s : ns_list) {
    RobustnessEntry entry;
    entry.n_s = n_s;
    for (int rep = 0; rep < repeats; ++rep) {
      const std::uint64_t run_seed = derive_seed(
          cfg.seed, kRunStream + 1000003ULL * static_cast<std::uint64_t>(n_s) +
                        static_cast<std::uint64_t>(rep));
      const opt::PolySolution sol =
          opt::solve_heuristic(model, n_s, cfg.n_p, cfg.budget_s / cfg.n_p, run_seed);
      if (sol.status == opt::SolveStatus::infeasible) continue;
      entry.runs.push_back(
          {geom::jaccard(geom::vertices(sol.polygon), ref_chain), sol.solve_time_s});
    }
    if (!entry.runs.empty()) {
      const auto n_runs = static_cast<double>(entry.runs.size());
      for (const RobustnessRun& run : entry.runs) {
        entry.jaccard_mean += run.jaccard / n_runs;
        entry.time_mean += run.solve_time_s / n_runs;
      }
      for (const RobustnessRun& run : entry.runs) {
        entry.jaccard_var += std::pow(run.jaccard - entry.jaccard_mean, 2) / n_runs;
        entry.time_var += std::pow(run.solve_time_s - entry.time_mean, 2) / n_runs;
      }
    }
    report.entries.push_back(std::move(entry));
  }
  return report;
}

nlohmann::json config_json(const ExperimentConfig& cfg) {
  nlohmann::json j;
  j["case"] = to_string(cfg.kind);
  j["samples"] = cfg.samples_path;
  j["n_ds"] = cfg.n_ds;
  j["grid"] = cfg.grid_n;
  j["n_sides"] = cfg.n_sides;
  j["alpha"] = cfg.alpha;
  j["ns"] = cfg.n_s;
  j["np"] = cfg.n_p;
  j["eps"] = cfg.eps;
  j["coeff_bound"] = cfg.coeff_bound;
  j["budget_s"] = cfg.budget_s;
  j["seed"] = cfg.seed;
  j["n_test"] = cfg.n_test;
  j["pad"] = cfg.pad;
  j["box_samples"] = cfg.box_samples;
  if (cfg.kind == CaseKind::fan) {
    const auto& p = cfg.fan_params;
    j["fan"] = {{"speed_kmh", {p.speed_kmh.mu, p.speed_kmh.sigma, p.speed_kmh.lo, p.speed_kmh.hi}},
                {"heading_deg",
                 {p.heading_deg.mu, p.heading_deg.sigma, p.heading_deg.lo, p.heading_deg.hi}},
                {"dt_s", p.dt_s},
                {"prev_pos", {p.prev_pos.x(), p.prev_pos.y()}}};
  }
  if (cfg.kind == CaseKind::bimodal) {
    auto mix = [](const std::array<dist::MixtureComponent, 2>& axis) {
      return nlohmann::json{{axis[0].weight, axis[0].mean, axis[0].sigma},
                            {axis[1].weight, axis[1].mean, axis[1].sigma}};
    };
    j["bimodal"] = {{"x", mix(cfg.bimodal_params.x)}, {"y", mix(cfg.bimodal_params.y)}};
  }
  return j;
}

nlohmann::json solution_json(const opt::PolySolution& sol, int n_sides, double alpha,
                             std::uint64_t seed) {
  nlohmann::json j;
  j["status"] = opt::to_string(sol.status);
  j["n"] = n_sides;
  j["alpha"] = alpha;
  j["seed"] = seed;
  j["solve_time_s"] = sol.solve_time_s;
  if (sol.status == opt::SolveStatus::infeasible) {
    j["diagnostics"] = sol.diagnostics;
    return j;
  }
  auto& lines = j["lines"] = nlohmann::json::array();
  for (const geom::AnchoredLine& line : sol.polygon.lines) {
    lines.push_back({line.a, line.b});
  }
  j["anchor"] = {sol.polygon.anchor.x(), sol.polygon.anchor.y()};
  const geom::VertexChain chain = geom::vertices(sol.polygon);
  auto& verts = j["vertices"] = nlohmann::json::array();
  for (Eigen::Index i = 0; i < chain.size(); ++i) {
    verts.push_back({chain.pts(0, i), chain.pts(1, i)});
  }
  j["objective"] = sol.objective;
  j["coverage_reduced"] = sol.coverage;
  j["coverage_full"] = sol.coverage_full;
  j["generalization_gap"] = sol.coverage_full < alpha;
  j["area_m2"] = sol.area_m2;
  return j;
}

nlohmann::json report_json(const ExperimentReport& report) {
  nlohmann::json j;
  j["config"] = config_json(report.cfg);
  j["environment"] = environment_json();
  j["bandwidth"] = {report.bw.hx, report.bw.hy};
  j["any_infeasible"] = report.any_infeasible;
  auto& methods = j["methods"] = nlohmann::json::array();
  for (const MethodResult& mr : report.methods) {
    nlohmann::json m;
    m["method"] = mr.method;
    m["ratio"] = mr.ratio;
    m["area_m2"] = mr.solution.area_m2;
    m["time_s"] = mr.solution.solve_time_s;
    m["solution"] = solution_json(mr.solution, report.cfg.n_sides, report.cfg.alpha,
                                  report.cfg.seed);
    methods.push_back(std::move(m));
  }
  return j;
}

nlohmann::json robustness_json(const RobustnessReport& report) {
  nlohmann::json j;
  j["config"] = config_json(report.cfg);
  j["environment"] = environment_json();
  j["reference"] =
      solution_json(report.reference, report.cfg.n_sides, report.cfg.alpha, report.cfg.seed);
  auto& entries = j["entries"] = nlohmann::json::array();
  for (const RobustnessEntry& entry : report.entries) {
    nlohmann::json e;
    e["n_s"] = entry.n_s;
    e["jaccard_mean"] = entry.jaccard_mean;
    e["jaccard_var"] = entry.jaccard_var;
    e["time_mean_s"] = entry.time_mean;
    e["time_var_s2"] = entry.time_var;
    auto& runs = e["runs"] = nlohmann::json::array();
    for (const RobustnessRun& run : entry.runs) {
      runs.push_back({{"jaccard", run.jaccard}, {"time_s", run.solve_time_s}});
    }
    entries.push_back(std::move(e));
  }
  return j;
}

void emit_report(const ExperimentReport& report, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir / "plotdata");

  write_text(out_dir / "report.json", report_json(report).dump(2) + "\n");

  std::string table = "method,ratio,area_m2,time_s\n";
  char buf[160];
  for (const MethodResult& mr : report.methods) {
    std::snprintf(buf, sizeof(buf), "%s,%.6f,%.6f,%.6f\n", mr.method.c_str(), mr.ratio,
                  mr.solution.area_m2, mr.solution.solve_time_s);
    table += buf;
  }
  write_text(out_dir / "table.csv", table);

  nlohmann::json polys = nlohmann::json::array();
  for (const MethodResult& mr : report.methods) {
    if (mr.solution.status == opt::SolveStatus::infeasible) continue;
    nlohmann::json p = geom::to_json(mr.solution.polygon);
    p["method"] = mr.method;
    polys.push_back(std::move(p));
  }
  write_text(out_dir / "polygons.json", polys.dump(2) + "\n");

  kde::write_grid_csv(report.wg, out_dir / "plotdata" / "heatmap.csv");
  dist::save_samples(report.samples, out_dir / "plotdata" / "samples.csv");
  for (const MethodResult& mr : report.methods) {
    if (mr.solution.status == opt::SolveStatus::infeasible) continue;
    const geom::VertexChain chain = geom::vertices(mr.solution.polygon);
    std::string csv = "x,y\n";
    for (Eigen::Index i = 0; i < chain.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.17g,%.17g\n", chain.pts(0, i), chain.pts(1, i));
      csv += buf;
    }
    write_text(out_dir / "plotdata" / ("polygon_" + mr.method + ".csv"), csv);
  }
}

void emit_robustness(const RobustnessReport& report, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  write_text(out_dir / "robustness.json", robustness_json(report).dump(2) + "\n");

  std::string csv = "n_s,jaccard_mean,jaccard_var,time_mean_s,time_var_s2\n";
  char buf[160];
  for (const RobustnessEntry& entry : report.entries) {
    std::snprintf(buf, sizeof(buf), "%d,%.6f,%.8f,%.6f,%.8f\n", entry.n_s, entry.jaccard_mean,
                  entry.jaccard_var, entry.time_mean, entry.time_var);
    csv += buf;
  }
  write_text(out_dir / "robustness.csv", csv);
}

}  // namespace reachset::harness
