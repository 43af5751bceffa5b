#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"
#include "reachset/distributions.hpp"
#include "reachset/polyopt.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

using namespace reachset;
using geom::AnchoredLine;

namespace {

kde::WeightedGrid uniform_grid(int n) {
  kde::WeightedGrid wg;
  wg.grid.xs = Eigen::VectorXd::LinSpaced(n, 0.0, n - 1.0);
  wg.grid.ys = Eigen::VectorXd::LinSpaced(n, 0.0, n - 1.0);
  wg.z_kde = Eigen::ArrayXXd::Constant(n, n, 1.0);
  wg.w = wg.z_kde / wg.z_kde.sum();
  return wg;
}

kde::WeightedGrid bump_grid(int n, double cx, double cy, double spread, std::uint64_t seed) {
  kde::WeightedGrid wg;
  wg.grid.xs = Eigen::VectorXd::LinSpaced(n, 0.0, 10.0);
  wg.grid.ys = Eigen::VectorXd::LinSpaced(n, 0.0, 10.0);
  wg.z_kde.resize(n, n);
  Rng rng(seed);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double dx = (wg.grid.xs(i) - cx) / spread;
      const double dy = (wg.grid.ys(j) - cy) / spread;
      wg.z_kde(i, j) = std::exp(-0.5 * (dx * dx + dy * dy)) * rng.uniform(0.5, 1.5);
    }
  }
  wg.w = wg.z_kde / wg.z_kde.sum();
  return wg;
}

kde::WeightedGrid case1_grid(int grid_n = 20, int n_ds = 1000, std::uint64_t seed = 42) {
  const SampleSet set = dist::sample_fan(dist::CaseIParams{}, n_ds, seed);
  const kde::Grid2D grid = kde::build_grid(set, grid_n, 0.05);
  const kde::Bandwidth bw = kde::bandwidth(set);
  return kde::fft_kde(set, grid, bw.hx, bw.hy);
}

// ----- plain-text model parser -------------------------------------------

struct ParsedRow {
  std::map<std::string, double> linear;
  std::map<std::pair<std::string, std::string>, double> bilinear;
  std::string sense;
  double rhs = 0.0;
};

struct ParsedModel {
  int var_count = 0;
  std::map<std::string, ParsedRow> rows;
};

ParsedModel parse_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  REQUIRE(in);
  ParsedModel model;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::string head;
    ss >> head;
    if (head == "set") continue;
    if (head == "var") {
      ++model.var_count;
      continue;
    }
    REQUIRE(head.back() == ':');
    head.pop_back();
    ParsedRow row;
    std::string sign;
    while (ss >> sign) {
      if (sign == "<=" || sign == ">=" || sign == "=") {
        row.sense = sign;
        ss >> row.rhs;
        break;
      }
      REQUIRE((sign == "+" || sign == "-"));
      double coeff = 0.0;
      std::string var;
      ss >> coeff >> var;
      if (sign == "-") coeff = -coeff;
      const auto star = var.find('*');
      if (star == std::string::npos) {
        row.linear[var] += coeff;
      } else {
        row.bilinear[{var.substr(0, star), var.substr(star + 1)}] += coeff;
      }
    }
    model.rows[head] = std::move(row);
  }
  return model;
}

}  // namespace

TEST_CASE("build_model anchors at the heaviest cell, lexicographic ties") {
  const opt::PolyModel model = opt::build_model(uniform_grid(4), 3, 0.8);
  CHECK(model.anchor_idx.i == 0);
  CHECK(model.anchor_idx.j == 0);

  const SampleSet fan_samples = dist::sample_fan(dist::CaseIParams{}, 1000, 42);
  const kde::Grid2D fan_grid = kde::build_grid(fan_samples, 20, 0.05);
  const kde::Bandwidth fan_bw = kde::bandwidth(fan_samples);
  const kde::WeightedGrid wg = kde::fft_kde(fan_samples, fan_grid, fan_bw.hx, fan_bw.hy);
  const opt::PolyModel fan = opt::build_model(wg, 4, 0.9);

  const Eigen::ArrayXXd naive = oracles::naive_binned_kde(fan_samples, fan_grid, fan_bw.hx, fan_bw.hy);
  Eigen::Index best_i = 0, best_j = 0;
  naive.maxCoeff(&best_i, &best_j);
  CHECK(fan.anchor_idx.i == static_cast<int>(best_i));
  CHECK(fan.anchor_idx.j == static_cast<int>(best_j));

  CHECK_THROWS_AS(static_cast<void>(opt::build_model(wg, 2, 0.9)), std::invalid_argument);
  CHECK_THROWS_AS(static_cast<void>(opt::build_model(wg, 4, 1.5)), std::invalid_argument);
}

TEST_CASE("big-M bounds dominate the affine form over the coefficient box") {
  const opt::PolyModel model = opt::build_model(case1_grid(), 4, 0.9);
  const int n = model.wg.grid.n();
  Rng rng(8);
  for (int t = 0; t < 10000; ++t) {
    const AnchoredLine line{rng.uniform(-model.coeff_bound, model.coeff_bound),
                            rng.uniform(-model.coeff_bound, model.coeff_bound)};
    const int i = static_cast<int>(rng.index(n));
    const int j = static_cast<int>(rng.index(n));
    const double affine = line.affine(model.wg.grid.point(i, j), model.anchor_pt);
    CHECK(std::abs(affine) <= model.big_m1(i, j));
  }
}

TEST_CASE("implied assignment marks exactly the inside cells") {
  kde::WeightedGrid wg = uniform_grid(3);
  wg.grid.xs = Eigen::VectorXd::LinSpaced(3, -1.0, 1.0);
  wg.grid.ys = Eigen::VectorXd::LinSpaced(3, -1.0, 1.0);
  opt::PolyModel model = opt::build_model(wg, 4, 0.1);
  // anchor is at (-1,-1) under uniform ties; recentre by hand for this check
  model.anchor_idx = {1, 1};
  model.anchor_pt = {0.0, 0.0};

  const std::vector<AnchoredLine> half_square = {{2, 0}, {0, 2}, {-2, 0}, {0, -2}};
  const opt::Assignment asg = opt::implied_assignment(half_square, model);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      const bool inside = std::abs(wg.grid.xs(i)) <= 0.5 && std::abs(wg.grid.ys(j)) <= 0.5;
      CHECK(asg.z(i, j) == inside);
    }
  }
  CHECK(asg.z(model.anchor_idx.i, model.anchor_idx.j));
}

TEST_CASE("shrinking the polygon shrinks the inside set monotonically") {
  const opt::PolyModel model = opt::build_model(case1_grid(12, 400, 3), 4, 0.5);
  Rng rng(4);
  const auto base = oracles::random_validated_lines(rng, 4);
  // rescale so the polygon straddles the grid
  const double scale = 4.0 / (model.wg.grid.xs(11) - model.wg.grid.xs(0));
  std::vector<AnchoredLine> lines;
  for (const auto& l : base) lines.push_back({l.a * scale, l.b * scale});

  opt::Assignment prev = opt::implied_assignment(lines, model);
  for (int step = 0; step < 10; ++step) {
    const double lam = 1.0 + 0.2 * (step + 1);
    std::vector<AnchoredLine> shrunk;
    for (const auto& l : lines) shrunk.push_back({l.a * lam, l.b * lam});
    const opt::Assignment cur = opt::implied_assignment(shrunk, model);
    CHECK((cur.z && !prev.z).count() == 0);  // cur subset of prev
    prev = cur;
  }
}

TEST_CASE("implied binaries equal per-cell brute-force enumeration") {
  Rng rng(31);
  for (int instance = 0; instance < 100; ++instance) {
    const int grid_n = 2 + static_cast<int>(rng.index(2));  // 2 or 3
    kde::WeightedGrid wg;
    wg.grid.xs = Eigen::VectorXd::LinSpaced(grid_n, rng.uniform(-2, -1), rng.uniform(1, 2));
    wg.grid.ys = Eigen::VectorXd::LinSpaced(grid_n, rng.uniform(-2, -1), rng.uniform(1, 2));
    wg.z_kde.resize(grid_n, grid_n);
    for (int i = 0; i < grid_n; ++i) {
      for (int j = 0; j < grid_n; ++j) wg.z_kde(i, j) = rng.uniform(0.1, 1.0);
    }
    wg.w = wg.z_kde / wg.z_kde.sum();

    const opt::PolyModel model = opt::build_model(wg, 3, 0.5, 1e-6, 10.0);
    const auto lines = oracles::random_validated_lines(rng, 3);
    const opt::Assignment implied = opt::implied_assignment(lines, model);

    for (int i = 0; i < grid_n; ++i) {
      for (int j = 0; j < grid_n; ++j) {
        double affine[3];
        for (int k = 0; k < 3; ++k) {
          affine[k] = lines[static_cast<std::size_t>(k)].affine(wg.grid.point(i, j),
                                                                model.anchor_pt);
        }
        const double m1 = model.big_m1(i, j);
        const double m2 = model.big_m2(i, j);
        int feasible_count = 0;
        int feasible_mask = -1;
        for (int mask = 0; mask < 16; ++mask) {
          const bool z = mask & 8;
          int l_sum = 0;
          bool ok = true;
          for (int k = 0; k < 3 && ok; ++k) {
            const bool lk = mask & (1 << k);
            l_sum += lk;
            if (affine[k] > m1 * (1 - lk)) ok = false;          // indicator upper row
            if (!(-affine[k] < m2 * lk)) ok = false;            // strict lower row
          }
          if (ok && l_sum < 3 * z) ok = false;
          if (ok && l_sum > 2 + z) ok = false;
          if (ok) {
            ++feasible_count;
            feasible_mask = mask;
          }
        }
        REQUIRE(feasible_count == 1);
        CHECK(static_cast<bool>(feasible_mask & 8) == implied.z(i, j));
        for (int k = 0; k < 3; ++k) {
          CHECK(static_cast<bool>(feasible_mask & (1 << k)) ==
                implied.l[static_cast<std::size_t>(k)](i, j));
        }
      }
    }
  }
}

TEST_CASE("evaluate covers the obvious cases") {
  const opt::PolyModel model = opt::build_model(case1_grid(10, 300, 5), 4, 0.9);
  const int n = model.wg.grid.n();

  // polygon containing the whole grid box
  const double span = std::max(model.wg.grid.xs(n - 1) - model.wg.grid.xs(0),
                               model.wg.grid.ys(n - 1) - model.wg.grid.ys(0));
  const double inv = 1.0 / (2.5 * span);
  const std::vector<AnchoredLine> huge = {{inv, 0}, {0, inv}, {-inv, 0}, {0, -inv}};
  const opt::Evaluation ev = opt::evaluate(huge, model);
  CHECK(ev.feasible);
  CHECK(ev.objective == n * n);
  CHECK(ev.coverage == doctest::Approx(1.0));

  // polygon hugging only the anchor cell
  const double tiny = 1.0 / (0.25 * std::min(model.wg.grid.dx(), model.wg.grid.dy()));
  const std::vector<AnchoredLine> small = {{tiny, 0}, {0, tiny}, {-tiny, 0}, {0, -tiny}};
  const opt::Evaluation ev2 = opt::evaluate(small, model);
  CHECK_FALSE(ev2.feasible);
  CHECK(ev2.objective == 1);
}

TEST_CASE("solver result within one cell of the lattice oracle") {
  const kde::WeightedGrid wg = bump_grid(5, 5.0, 5.0, 3.0, 12);
  const opt::PolyModel model = opt::build_model(wg, 3, 0.8);
  const opt::PolySolution sol = opt::solve_optimal(model, 20.0, 7);
  REQUIRE(sol.status == opt::SolveStatus::optimal_budget);
  const int oracle = oracles::lattice_best_objective(model);
  CHECK(sol.objective <= oracle + 1);
}

TEST_CASE("alpha=1 solution contains every positive-weight cell") {
  const kde::WeightedGrid wg = case1_grid(14, 500, 9);
  const opt::PolyModel model = opt::build_model(wg, 4, 1.0);
  const opt::PolySolution sol = opt::solve_optimal(model, 20.0, 3);
  REQUIRE(sol.status == opt::SolveStatus::optimal_budget);
  const int n = wg.grid.n();
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (wg.w(i, j) > 0.0) CHECK(sol.assignment.z(i, j));
    }
  }
  CHECK(sol.coverage == doctest::Approx(1.0));
}

TEST_CASE("solver exit paths are feasible and deterministic") {
  const opt::PolyModel model = opt::build_model(case1_grid(12, 400, 21), 4, 0.9);
  const opt::PolySolution a = opt::solve_optimal(model, 20.0, 99);
  const opt::PolySolution b = opt::solve_optimal(model, 20.0, 99);
  REQUIRE(a.status == opt::SolveStatus::optimal_budget);

  CHECK(a.coverage >= model.alpha - 1e-9);
  CHECK(geom::contains(a.polygon, model.anchor_pt));
  CHECK(geom::validate_ngon(a.polygon.lines, a.polygon.eps).pass);

  REQUIRE(a.polygon.lines.size() == b.polygon.lines.size());
  for (std::size_t k = 0; k < a.polygon.lines.size(); ++k) {
    CHECK(a.polygon.lines[k].a == b.polygon.lines[k].a);
    CHECK(a.polygon.lines[k].b == b.polygon.lines[k].b);
  }
}

TEST_CASE("weighted sampling selects all positive cells when asked for all") {
  kde::WeightedGrid wg = uniform_grid(3);
  wg.w(2, 2) = 0.0;
  wg.w = wg.w / wg.w.sum();
  const opt::WeightedSample sample = opt::weighted_sample(wg, 8, 5);
  CHECK(sample.cells.size() == 8);
  for (const auto& cell : sample.cells) {
    CHECK(!(cell.i == 2 && cell.j == 2));
  }
  CHECK_THROWS_AS(static_cast<void>(opt::weighted_sample(wg, 9, 5)), std::invalid_argument);

  const opt::WeightedSample again = opt::weighted_sample(wg, 4, 5);
  const opt::WeightedSample again2 = opt::weighted_sample(wg, 4, 5);
  for (std::size_t c = 0; c < again.cells.size(); ++c) {
    CHECK(again.cells[c] == again2.cells[c]);
  }
}

TEST_CASE("single-draw inclusion frequency matches the weights") {
  kde::WeightedGrid wg;
  wg.grid.xs = Eigen::VectorXd::LinSpaced(2, 0.0, 1.0);
  wg.grid.ys = Eigen::VectorXd::LinSpaced(2, 0.0, 1.0);
  wg.w.resize(2, 2);
  wg.w << 0.9, 0.1, 0.0, 0.0;
  wg.z_kde = wg.w;

  int heavy = 0;
  const int trials = 100000;
  for (int t = 0; t < trials; ++t) {
    const auto sample = opt::weighted_sample(wg, 1, derive_seed(1234, t));
    if (sample.cells[0] == kde::CellRef{0, 0}) ++heavy;
  }
  CHECK(std::abs(heavy / double(trials) - 0.9) < 0.01);
}

TEST_CASE("renormalize adds the uniform deficit") {
  Eigen::VectorXd w(2);
  w << 0.2, 0.3;
  const Eigen::VectorXd out = opt::renormalize(w);
  CHECK(out(0) == doctest::Approx(0.45));
  CHECK(out(1) == doctest::Approx(0.55));
  CHECK(std::abs(out.sum() - 1.0) <= 1e-12);

  Eigen::VectorXd already(4);
  already << 0.25, 0.25, 0.25, 0.25;
  CHECK((opt::renormalize(already) - already).cwiseAbs().maxCoeff() <= 1e-15);

  Eigen::VectorXd skew(2);
  skew << 0.001, 0.9;
  const Eigen::VectorXd out2 = opt::renormalize(skew);
  CHECK(out2(0) == doctest::Approx(0.0505));
  CHECK(out2(1) == doctest::Approx(0.9495));
}

TEST_CASE("heuristic with full sampling reduces to the optimal solve") {
  const opt::PolyModel model = opt::build_model(case1_grid(8, 300, 2), 4, 0.9);
  const int cells = 8 * 8;
  REQUIRE(static_cast<int>((model.wg.w > 0.0).count()) == cells);

  const opt::PolySolution heur = opt::solve_heuristic(model, cells, 1, 20.0, 77);
  const opt::PolySolution optb = opt::solve_optimal(model, 20.0, 77);
  REQUIRE(heur.status == opt::SolveStatus::heuristic);
  REQUIRE(optb.status == opt::SolveStatus::optimal_budget);
  CHECK(heur.objective == optb.objective);
  REQUIRE(heur.polygon.lines.size() == optb.polygon.lines.size());
  for (std::size_t k = 0; k < heur.polygon.lines.size(); ++k) {
    CHECK(heur.polygon.lines[k].a == doctest::Approx(optb.polygon.lines[k].a).epsilon(1e-9));
    CHECK(heur.polygon.lines[k].b == doctest::Approx(optb.polygon.lines[k].b).epsilon(1e-9));
  }
}

TEST_CASE("heuristic solution is feasible on the model it solved") {
  const opt::PolyModel model = opt::build_model(case1_grid(14, 600, 6), 4, 0.9);
  const opt::PolySolution sol = opt::solve_heuristic(model, 50, 5, 20.0, 31);
  REQUIRE(sol.status == opt::SolveStatus::heuristic);
  CHECK(sol.coverage >= model.alpha - 1e-9);
  CHECK(geom::validate_ngon(sol.polygon.lines, sol.polygon.eps).pass);
  CHECK(geom::contains(sol.polygon, sol.polygon.anchor));
  CHECK(sol.coverage_full > 0.5);
  CHECK(sol.area_m2 > 0.0);
}

TEST_CASE("bounding box encloses the confidence region") {
  const kde::WeightedGrid wg = case1_grid(16, 700, 8);
  const opt::PolySolution box = opt::bounding_box(wg, 0.9);
  REQUIRE(box.status == opt::SolveStatus::baseline);
  CHECK(box.coverage >= 0.9 - 1e-9);
  CHECK(geom::validate_ngon(box.polygon.lines, box.polygon.eps).pass);

  const kde::ConfidenceRegion region = kde::confidence_region(wg, 0.9);
  for (const auto& cell : region.cells) {
    CHECK(geom::contains(box.polygon, wg.grid.point(cell.i, cell.j), 1e-12));
  }

  const opt::PolySolution all = opt::bounding_box(wg, 1.0);
  const int n = wg.grid.n();
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (wg.w(i, j) > 0.0) CHECK(all.assignment.z(i, j));
    }
  }
}

TEST_CASE("bounding box of a single-cell region spans one cell extent") {
  kde::WeightedGrid wg = uniform_grid(4);
  wg.w.setZero();
  wg.w(1, 2) = 1.0;
  wg.z_kde = wg.w;
  const opt::PolySolution box = opt::bounding_box(wg, 0.9);
  CHECK(box.area_m2 == doctest::Approx(wg.grid.dx() * wg.grid.dy()));
}

TEST_CASE("fan-case baseline areas land in the reported bands") {
  const kde::WeightedGrid wg = case1_grid(20, 1000, derive_seed(7, 0x747261696e646174ULL));
  const opt::PolyModel model = opt::build_model(wg, 4, 0.9);

  const opt::PolySolution sol = opt::solve_optimal(model, 60.0, 7);
  REQUIRE(sol.status == opt::SolveStatus::optimal_budget);
  CHECK(sol.area_m2 >= 1500.0);
  CHECK(sol.area_m2 <= 2300.0);

  const opt::PolySolution box = opt::bounding_box(wg, 0.9);
  CHECK(box.area_m2 >= 2700.0);
  CHECK(box.area_m2 <= 3800.0);
  CHECK(sol.area_m2 < box.area_m2);
}

TEST_CASE("exported model round-trips through the parser") {
  kde::WeightedGrid wg = bump_grid(3, 5.0, 5.0, 4.0, 77);
  const opt::PolyModel model = opt::build_model(wg, 3, 0.85);
  const auto path = std::filesystem::temp_directory_path() / "reachset_model.txt";
  opt::export_model(model, path);
  const ParsedModel parsed = parse_model(path);
  std::filesystem::remove(path);

  const int n_grid = 3, n = 3;
  CHECK(parsed.var_count == 2 * n + n_grid * n_grid * n + n_grid * n_grid);  // 42

  int detcon = 0, no1cons = 0, lab1 = 0, lab2 = 0, zl1 = 0, zl2 = 0;
  for (const auto& [name, row] : parsed.rows) {
    if (name.starts_with("detcon_")) ++detcon;
    if (name.starts_with("no1cons_")) ++no1cons;
    if (name.starts_with("lab1_")) ++lab1;
    if (name.starts_with("lab2_")) ++lab2;
    if (name.starts_with("zl1_")) ++zl1;
    if (name.starts_with("zl2_")) ++zl2;
  }
  CHECK(detcon == n);
  CHECK(no1cons == n * (n - 2));
  CHECK(lab1 == n_grid * n_grid * n);
  CHECK(lab2 == n_grid * n_grid * n);
  CHECK(zl1 == n_grid * n_grid);
  CHECK(zl2 == n_grid * n_grid);
  REQUIRE(parsed.rows.count("minimize"));
  REQUIRE(parsed.rows.count("anchor"));
  REQUIRE(parsed.rows.count("coverage"));

  // objective: coefficient 1 on every z
  CHECK(parsed.rows.at("minimize").linear.size() == std::size_t(n_grid * n_grid));
  for (const auto& [var, coeff] : parsed.rows.at("minimize").linear) {
    CHECK(var.starts_with("z_"));
    CHECK(coeff == 1.0);
  }

  // determinant row: a_1*b_2 - b_1*a_2 >= eps
  const ParsedRow& det_row = parsed.rows.at("detcon_1");
  CHECK(det_row.bilinear.at({"a_1", "b_2"}) == 1.0);
  CHECK(det_row.bilinear.at({"b_1", "a_2"}) == -1.0);
  CHECK(det_row.sense == ">=");
  CHECK(det_row.rhs == model.eps);

  // indicator rows carry the exact grid offsets and big-M values
  for (int i = 1; i <= n_grid; ++i) {
    for (int j = 1; j <= n_grid; ++j) {
      const double dxv = model.wg.grid.xs(i - 1) - model.anchor_pt.x();
      const double dyv = model.wg.grid.ys(j - 1) - model.anchor_pt.y();
      const double m1 = model.big_m1(i - 1, j - 1);
      for (int k = 1; k <= n; ++k) {
        const std::string tag =
            std::to_string(i) + "_" + std::to_string(j) + "_" + std::to_string(k);
        const ParsedRow& r1 = parsed.rows.at("lab1_" + tag);
        CHECK(r1.linear.at("a_" + std::to_string(k)) == dxv);
        CHECK(r1.linear.at("b_" + std::to_string(k)) == dyv);
        CHECK(r1.linear.at("l_" + tag) == m1);
        CHECK(r1.rhs == m1 + 1.0);
        const ParsedRow& r2 = parsed.rows.at("lab2_" + tag);
        CHECK(r2.sense == ">=");
        CHECK(r2.rhs == 1.0 + model.eps);
      }
    }
  }

  // coverage row carries the weights verbatim
  const ParsedRow& cov = parsed.rows.at("coverage");
  CHECK(cov.sense == ">=");
  CHECK(cov.rhs == model.alpha);
  for (int i = 1; i <= n_grid; ++i) {
    for (int j = 1; j <= n_grid; ++j) {
      CHECK(cov.linear.at("z_" + std::to_string(i) + "_" + std::to_string(j)) ==
            model.wg.w(i - 1, j - 1));
    }
  }

  // anchor row pins the heaviest cell
  const ParsedRow& anchor = parsed.rows.at("anchor");
  CHECK(anchor.sense == "=");
  CHECK(anchor.rhs == 1.0);
  CHECK(anchor.linear.at("z_" + std::to_string(model.anchor_idx.i + 1) + "_" +
                         std::to_string(model.anchor_idx.j + 1)) == 1.0);
}
