#pragma once

#include "reachset/distributions.hpp"
#include "reachset/kde.hpp"
#include "reachset/polyopt.hpp"

#include <nlohmann/json_fwd.hpp>

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace reachset::harness {

enum class CaseKind { fan, bimodal, file };

std::string to_string(CaseKind kind);

struct ExperimentConfig {
  CaseKind kind = CaseKind::fan;
  std::string samples_path;  // file case only
  int n_ds = 1000;
  int grid_n = 20;
  int n_sides = 4;
  double alpha = 0.9;
  int n_s = 70;
  int n_p = 10;
  double eps = geom::kDefaultEps;
  double coeff_bound = 0.0;  // 0 = auto
  double budget_s = 60.0;
  std::uint64_t seed = 7;
  int n_test = 100000;
  double pad = 0.05;
  bool box_samples = false;  // baseline boxes raw samples instead of the level set
  dist::CaseIParams fan_params{};
  dist::BimodalParams bimodal_params{};
};

void validate(const ExperimentConfig& cfg);

/// Fresh-sample generator: (count, seed) -> SampleSet. For file inputs this
/// is a seeded bootstrap resampler of the loaded points.
using Sampler = std::function<SampleSet(int, std::uint64_t)>;

Sampler make_sampler(const ExperimentConfig& cfg);

struct Pipeline {
  SampleSet samples;
  kde::Bandwidth bw{};
  kde::WeightedGrid wg;
  opt::PolyModel model;
};

/// Training samples -> grid -> KDE -> model, all per the config.
Pipeline build_pipeline(const ExperimentConfig& cfg);

struct MethodResult {
  std::string method;
  opt::PolySolution solution;
  double ratio = 0.0;  // fraction of fresh samples inside
};

struct ExperimentReport {
  ExperimentConfig cfg;
  kde::Bandwidth bw{};
  SampleSet samples;
  kde::WeightedGrid wg;
  std::vector<MethodResult> methods;
  bool any_infeasible = false;
};

/// Samples, runs the KDE, solves with all three methods, and tests each
/// feasible polygon against n_test fresh samples.
ExperimentReport run_experiment(const ExperimentConfig& cfg);

/// Fraction of n_test fresh samples strictly covered by the polygon.
double ratio_test(const geom::LinePolygon& poly, const Sampler& sampler, int n_test,
                  std::uint64_t seed);

struct RobustnessRun {
  double jaccard = 0.0;
  double solve_time_s = 0.0;
};

struct RobustnessEntry {
  int n_s = 0;
  std::vector<RobustnessRun> runs;
  double jaccard_mean = 0.0;
  double jaccard_var = 0.0;
  double time_mean = 0.0;
  double time_var = 0.0;
};

struct RobustnessReport {
  ExperimentConfig cfg;
  opt::PolySolution reference;  // budget-bounded optimal
  std::vector<RobustnessEntry> entries;
};

/// One optimal reference, then `repeats` heuristic runs per n_s with derived
/// seeds; records the Jaccard distance of each run to the reference.
RobustnessReport robustness_study(const ExperimentConfig& cfg, const std::vector<int>& ns_list,
                                  int repeats);

/// report.json, table.csv, polygons.json and plotdata/*.csv under out_dir.
void emit_report(const ExperimentReport& report, const std::filesystem::path& out_dir);

void emit_robustness(const RobustnessReport& report, const std::filesystem::path& out_dir);

nlohmann::json report_json(const ExperimentReport& report);
nlohmann::json robustness_json(const RobustnessReport& report);
nlohmann::json config_json(const ExperimentConfig& cfg);
nlohmann::json solution_json(const opt::PolySolution& sol, int n_sides, double alpha,
                             std::uint64_t seed);

}  // namespace reachset::harness
