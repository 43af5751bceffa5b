#include "reachset/distributions.hpp"
#include "reachset/harness.hpp"
#include "reachset/kde.hpp"
#include "reachset/polyopt.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <string>
#include <vector>

namespace {

using reachset::harness::CaseKind;
using reachset::harness::ExperimentConfig;

void add_common_options(CLI::App& cmd, ExperimentConfig& cfg, std::string& case_name) {
  cmd.add_option("--case", case_name, "Uncertainty case: fan, bimodal or file")
      ->check(CLI::IsMember({"fan", "bimodal", "file"}))
      ->capture_default_str();
  cmd.add_option("--samples", cfg.samples_path, "Sample CSV for --case file");
  cmd.add_option("--n-ds", cfg.n_ds, "Number of training samples")->capture_default_str();
  cmd.add_option("--grid", cfg.grid_n, "Grid points per axis")->capture_default_str();
  cmd.add_option("--n-sides", cfg.n_sides, "Polygon sides")->capture_default_str();
  cmd.add_option("--alpha", cfg.alpha, "Confidence level in (0,1]")->capture_default_str();
  cmd.add_option("--ns", cfg.n_s, "Cells sampled per heuristic round")->capture_default_str();
  cmd.add_option("--np", cfg.n_p, "Heuristic rounds")->capture_default_str();
  cmd.add_option("--eps", cfg.eps, "Strictness margin")->capture_default_str();
  cmd.add_option("--coeff-bound", cfg.coeff_bound, "Box on |a|,|b| (0 = auto)")
      ->capture_default_str();
  cmd.add_option("--budget", cfg.budget_s, "Solve budget, seconds")->capture_default_str();
  cmd.add_option("--seed", cfg.seed, "Base seed")->capture_default_str();
  cmd.add_option("--n-test", cfg.n_test, "Fresh samples for the ratio test")
      ->capture_default_str();
  cmd.add_option("--pad", cfg.pad, "Grid padding as a fraction of range")->capture_default_str();
  cmd.add_flag("--box-samples", cfg.box_samples,
               "Bounding-box baseline boxes raw samples instead of the confidence region");

  cmd.add_option_function<std::vector<double>>(
         "--fan-speed",
         [&cfg](const std::vector<double>& v) {
           cfg.fan_params.speed_kmh = {v[0], v[1], v[2], v[3]};
         },
         "Speed truncated Gaussian: mu sigma lo hi (km/h)")
      ->expected(4);
  cmd.add_option_function<std::vector<double>>(
         "--fan-heading",
         [&cfg](const std::vector<double>& v) {
           cfg.fan_params.heading_deg = {v[0], v[1], v[2], v[3]};
         },
         "Heading truncated Gaussian: mu sigma lo hi (degrees)")
      ->expected(4);
  cmd.add_option("--fan-dt", cfg.fan_params.dt_s, "Time step, seconds")->capture_default_str();
  cmd.add_option_function<std::vector<double>>(
         "--fan-prev",
         [&cfg](const std::vector<double>& v) { cfg.fan_params.prev_pos = {v[0], v[1]}; },
         "Previous position: x y (m)")
      ->expected(2);
  cmd.add_option_function<std::vector<double>>(
         "--bimodal-x",
         [&cfg](const std::vector<double>& v) {
           cfg.bimodal_params.x = {{{v[0], v[1], v[2]}, {v[3], v[4], v[5]}}};
         },
         "x-axis mixture: w1 m1 s1 w2 m2 s2")
      ->expected(6);
  cmd.add_option_function<std::vector<double>>(
         "--bimodal-y",
         [&cfg](const std::vector<double>& v) {
           cfg.bimodal_params.y = {{{v[0], v[1], v[2]}, {v[3], v[4], v[5]}}};
         },
         "y-axis mixture: w1 m1 s1 w2 m2 s2")
      ->expected(6);
}

CaseKind parse_case(const std::string& name) {
  if (name == "fan") return CaseKind::fan;
  if (name == "bimodal") return CaseKind::bimodal;
  return CaseKind::file;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Probabilistic reachable set estimation and minimal convex polygon covering"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Config file mirroring all flags (flags override)");

  ExperimentConfig cfg;
  std::string case_name = "fan";
  std::string out_dir = "out";
  std::string ns_list_str = "50,60,70,80,90";
  int repeats = 10;
  std::string model_path = "model.txt";

  CLI::App* run = app.add_subcommand("run", "Solve one experiment with all three methods");
  add_common_options(*run, cfg, case_name);
  run->add_option("--out", out_dir, "Output directory")->capture_default_str();

  CLI::App* rob = app.add_subcommand("robustness", "Heuristic robustness study over n_s");
  add_common_options(*rob, cfg, case_name);
  rob->add_option("--ns-list", ns_list_str, "Comma-separated n_s values")->capture_default_str();
  rob->add_option("--repeats", repeats, "Heuristic runs per n_s")->capture_default_str();
  rob->add_option("--out", out_dir, "Output directory")->capture_default_str();

  CLI::App* exp = app.add_subcommand("export-model", "Write the mixed-integer model file");
  add_common_options(*exp, cfg, case_name);
  exp->add_option("--model-out", model_path, "Model file path")->capture_default_str();

  CLI11_PARSE(app, argc, argv);
  cfg.kind = parse_case(case_name);

  try {
    if (run->parsed()) {
      const auto report = reachset::harness::run_experiment(cfg);
      reachset::harness::emit_report(report, out_dir);
      for (const auto& mr : report.methods) {
        std::printf("%-16s ratio=%.4f area=%.1f m^2 time=%.3f s%s\n", mr.method.c_str(), mr.ratio,
                    mr.solution.area_m2, mr.solution.solve_time_s,
                    mr.solution.status == reachset::opt::SolveStatus::infeasible ? " [infeasible]"
                                                                                 : "");
      }
      std::printf("report written to %s\n", out_dir.c_str());
      return report.any_infeasible ? 2 : 0;
    }
    if (rob->parsed()) {
      std::vector<int> ns_list;
      for (const auto& token : CLI::detail::split(ns_list_str, ',')) {
        ns_list.push_back(std::stoi(token));
      }
      const auto report = reachset::harness::robustness_study(cfg, ns_list, repeats);
      reachset::harness::emit_robustness(report, out_dir);
      for (const auto& entry : report.entries) {
        std::printf("n_s=%-4d jaccard mean=%.4f var=%.6f  time mean=%.3f s\n", entry.n_s,
                    entry.jaccard_mean, entry.jaccard_var, entry.time_mean);
      }
      std::printf("study written to %s\n", out_dir.c_str());
      return 0;
    }
    // export-model
    const auto pipeline = reachset::harness::build_pipeline(cfg);
    reachset::opt::export_model(pipeline.model, model_path);
    std::printf("model written to %s\n", model_path.c_str());
    return 0;
  } catch (const std::exception& ex) {
    std::fprintf(stderr, "error: %s\n", ex.what());
    return 1;
  }
}
