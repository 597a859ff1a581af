#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>

#include "earthpress/commands.hpp"
#include "earthpress/errors.hpp"
#include "earthpress/pipeline.hpp"
#include <nlohmann/json.hpp>
#include "generators.hpp"

namespace earthpress {
namespace {

namespace fs = std::filesystem;
using testing::Gen;

// A coarse ring and short chains keep each inversion to a fraction of a second.
Scenario small_scenario(const std::string& extra = "{}") {
  nlohmann::json j = nlohmann::json::parse(R"({
    "name": "small", "seed": 321,
    "lining": {"diameter": 6.2, "youngs_modulus": 3.5e7, "thickness": 0.35, "rigidity_reduction": 0.5,
               "foundation_stiffness": 1000.0, "element_count": 40},
    "truth": {"knots": [1000, 1600, 1000, 1600, 1000, 1600, 1000, 1600], "mesh_factor": 2},
    "observations": {"noise_std_mm": 0.05, "sigma_mm": 0.1},
    "parameterization": {"knot_count": 8},
    "sampler": {"chains": 16, "iterations": 3000, "thin": 5, "diagnostics_every": 500, "jitter_std": 0.03},
    "summary": {"monitoring_points": 40},
    "cases": [
      {"label": "A", "baselines": 4, "force": false},
      {"label": "A1", "baselines": 4, "force": true},
      {"label": "F", "baselines": 20, "force": false},
      {"label": "F1", "baselines": 20, "force": true}
    ],
    "baseline_optimizer": {"starts": 4, "max_sweeps": 5000},
    "presets": {"base_case": "F", "noise_levels_mm": [0.05, 0.2], "foundation_stiffness": [1000.0, 500.0]},
    "knot_trial": {"counts": [4, 8, 16], "base_case": "F", "tolerance_kpa": 50.0}
  })");
  j.merge_patch(nlohmann::json::parse(extra));
  return parse_scenario(j.dump());
}

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("earthpress_pipeline_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

double mean_of(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

// Forward -----------------------------------------------------------------------

TEST(RunForward, UniformPressureGivesUniformConvergence) {
  const ForwardResult r = run_forward(
      small_scenario(R"({"truth": {"knots": [], "preset": "uniform", "level_kpa": 200}})"));
  const auto conv = r.baselines.column_values("convergence_mm");
  ASSERT_EQ(conv.size(), 20u);
  const auto [lo, hi] = std::minmax_element(conv.begin(), conv.end());
  EXPECT_GT(*lo, 0.0);
  EXPECT_LT(*hi - *lo, 1e-9);
  // Membrane state: hoop force p R at every node.
  for (const double n : r.nodes.column_values("hoop_kN")) EXPECT_NEAR(n, 200.0 * 3.1, 0.01 * 620.0);
}

TEST(RunForward, ZeroTruthGivesZeroResponse) {
  const ForwardResult r = run_forward(small_scenario(R"({"truth": {"knots": [], "preset": "zero"}})"));
  for (const double c : r.baselines.column_values("convergence_mm")) EXPECT_EQ(c, 0.0);
  EXPECT_EQ(r.crown_force_kn, 0.0);
}

TEST(RunForward, DoublingTheTruthDoublesTheResponse) {
  const ForwardResult one = run_forward(small_scenario());
  const ForwardResult two = run_forward(small_scenario(R"({"truth": {"scale": 2.0}})"));
  const auto a = one.baselines.column_values("convergence_mm");
  const auto b = two.baselines.column_values("convergence_mm");
  for (std::size_t k = 0; k < a.size(); ++k) EXPECT_NEAR(b[k], 2.0 * a[k], 1e-9 * std::abs(a[k]) + 1e-12);
  EXPECT_NEAR(two.crown_force_kn, 2.0 * one.crown_force_kn, 1e-9 * std::abs(one.crown_force_kn));
}

// Deterministic optimizer -------------------------------------------------------

TEST(BoxLeastSquares, RecoversInteriorSolutionOfConsistentSystem) {
  Gen gen(91);
  for (int c = 0; c < 10; ++c) {
    const Eigen::Index m = 12, n = 5;
    Eigen::MatrixXd g(m, n);
    for (Eigen::Index i = 0; i < m; ++i) {
      for (Eigen::Index k = 0; k < n; ++k) g(i, k) = gen.real(-1.0, 1.0);
    }
    Eigen::VectorXd x(n);
    for (Eigen::Index k = 0; k < n; ++k) x(k) = gen.real(500.0, 2500.0);
    const Eigen::VectorXd d = g * x;
    const BoxLeastSquares fit = box_least_squares(g, d, Eigen::VectorXd::Ones(m), 0.0, 3000.0, OptimizerSpec{}, 7);
    EXPECT_LT(fit.objective, 1e-6);
    for (Eigen::Index k = 0; k < n; ++k) EXPECT_NEAR(fit.x[static_cast<std::size_t>(k)], x(k), 1e-3);
  }
}

TEST(BoxLeastSquares, ActiveBoundsRespected) {
  Gen gen(92);
  for (int c = 0; c < 10; ++c) {
    const Eigen::Index m = 8, n = 4;
    Eigen::MatrixXd g(m, n);
    for (Eigen::Index i = 0; i < m; ++i) {
      for (Eigen::Index k = 0; k < n; ++k) g(i, k) = gen.real(-1.0, 1.0);
    }
    Eigen::VectorXd x(n);
    for (Eigen::Index k = 0; k < n; ++k) x(k) = gen.real(-2000.0, 5000.0);
    Eigen::VectorXd w(m);
    for (Eigen::Index i = 0; i < m; ++i) w(i) = gen.real(0.5, 2.0);
    const BoxLeastSquares fit = box_least_squares(g, g * x, w, 0.0, 3000.0, OptimizerSpec{}, 8);
    for (const double v : fit.x) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 3000.0);
    }
    // No feasible coordinate move lowers the objective.
    const auto objective = [&](const std::vector<double>& y) {
      const Eigen::VectorXd r = g * Eigen::Map<const Eigen::VectorXd>(y.data(), n) - g * x;
      return (w.array() * r.array().square()).sum();
    };
    for (std::size_t k = 0; k < fit.x.size(); ++k) {
      for (const double step : {-1.0, 1.0}) {
        auto y = fit.x;
        y[k] = std::clamp(y[k] + step, 0.0, 3000.0);
        EXPECT_GE(objective(y), objective(fit.x) - 1e-6);
      }
    }
  }
}

TEST(BoxLeastSquares, RankDeficientProblemKeepsStartInNullSpace) {
  // Only x0 + x1 is observed.
  Eigen::MatrixXd g(3, 2);
  g << 1.0, 1.0, 2.0, 2.0, -1.0, -1.0;
  const Eigen::VectorXd d = g * Eigen::Vector2d(1000.0, 1200.0);
  const auto a = box_least_squares(g, d, Eigen::VectorXd::Ones(3), 0.0, 3000.0, OptimizerSpec{1, 100, 1e-8}, 1);
  const auto b = box_least_squares(g, d, Eigen::VectorXd::Ones(3), 0.0, 3000.0, OptimizerSpec{1, 100, 1e-8}, 2);
  EXPECT_TRUE(a.converged);
  EXPECT_NEAR(a.x[0] + a.x[1], 2200.0, 1e-8);
  EXPECT_NEAR(b.x[0] + b.x[1], 2200.0, 1e-8);
  EXPECT_GT(std::abs(a.x[0] - b.x[0]), 1.0);
  EXPECT_LT(a.objective, 1e-12);
}

TEST(BoxLeastSquares, DimensionMismatchRejected) {
  EXPECT_THROW(box_least_squares(Eigen::MatrixXd::Ones(3, 2), Eigen::VectorXd::Ones(4), Eigen::VectorXd::Ones(4), 0.0,
                                 1.0, OptimizerSpec{}, 1),
               DimensionError);
}

// Inversions ----------------------------------------------------------------------

TEST(RunCase, DenseNoiseFreeDataWithForceRecoversTruth) {
  const Experiment exp(small_scenario());
  CaseSpec spec = exp.scenario().find_case("F1");
  spec.noise_std_mm = 0.0;
  const CaseResult r = run_case(exp, spec);
  ASSERT_TRUE(r.metrics.has_value());
  EXPECT_GE(r.metrics->ia, 0.95);
  EXPECT_EQ(r.total.sample_count, r.ensemble.retained_count() * r.ensemble.chains());
}

// With a 1 mm sigma the convergences barely see the uniform level; the
// force reading pins it.
TEST(RunCase, ForceDatumNarrowsSparsePosterior) {
  const Experiment exp(small_scenario(R"({"observations": {"noise_std_mm": 0.3333333333333333, "sigma_mm": 1.0}})"));
  const CaseResult without = run_case(exp, exp.scenario().find_case("A"));
  const CaseResult with = run_case(exp, exp.scenario().find_case("A1"));
  EXPECT_LT(with.metrics->std, without.metrics->std);
}

TEST(RunCase, SameSeedSameSamples) {
  const Experiment exp(small_scenario(R"({"sampler": {"iterations": 400}})"));
  const CaseResult a = run_case(exp, exp.scenario().find_case("A1"));
  const CaseResult b = run_case(exp, exp.scenario().find_case("A1"));
  EXPECT_EQ(csv_text(samples_table(a.ensemble)), csv_text(samples_table(b.ensemble)));
  EXPECT_EQ(a.sampler_seed, exp.sampler_seed("A1"));
  EXPECT_NE(exp.sampler_seed("A1"), exp.sampler_seed("A"));
}

TEST(RunCase, KnotOverrideNeedsEnoughChains) {
  const Experiment exp(small_scenario(R"({"sampler": {"iterations": 50}})"));
  EXPECT_THROW(run_case(exp, exp.scenario().find_case("A"), 12, 16), ConfigError);
  EXPECT_NO_THROW(run_case(exp, exp.scenario().find_case("A"), 12, 24));
}

TEST(RunPriorOnly, MeanIsBoxMidpoint) {
  const Experiment exp(small_scenario(R"({"sampler": {"iterations": 4000}})"));
  const CaseResult r = run_prior_only(exp);
  EXPECT_NEAR(mean_of(r.total.mean), 1500.0, 60.0);
  for (const double s : r.total.std) EXPECT_GT(s, 400.0);
}

TEST(DeterministicBaseline, RoughWhereSamplerIsSmooth) {
  // Sparse noisy data and more knots than the data can pin down.
  const Experiment exp(small_scenario(R"({"parameterization": {"knot_count": 16}, "sampler": {"chains": 32},
                                         "observations": {"noise_std_mm": 0.3, "sigma_mm": 0.3}})"));
  const CaseSpec& spec = exp.scenario().find_case("A1");
  const BaselineResult os = deterministic_baseline(exp, spec);
  const CaseResult pm = run_case(exp, spec);
  EXPECT_GT(os.total_variation, total_variation(pm.target().mean));
  EXPECT_EQ(os.profile.size(), exp.monitoring_angles().size());
  for (const double q : os.fit.x) {
    EXPECT_GE(q, 0.0);
    EXPECT_LE(q, 3000.0);
  }
}

TEST(DeterministicBaseline, NoiseFreeFitHasNoResidual) {
  // Truth on the inversion mesh and in the knot basis, so an exact fit exists.
  // The force reading always carries its 1% noise, so it is left out.
  const Experiment exp(small_scenario(R"({"truth": {"mesh_factor": 1}})"));
  CaseSpec spec = exp.scenario().find_case("F");
  spec.noise_std_mm = 0.0;
  const BaselineResult os = deterministic_baseline(exp, spec);
  EXPECT_TRUE(os.fit.converged);
  EXPECT_LT(os.residual_mm, 1e-4);
}

// Knot trial and presets ----------------------------------------------------------

TEST(KnotTrial, StabilizesOnceTruthIsRepresentable) {
  const Experiment exp(small_scenario(R"({"sampler": {"iterations": 6000}})"));
  CaseSpec spec = exp.scenario().find_case("F");
  spec.noise_std_mm = 0.0;
  const KnotTrialReport report = knot_count_trial(exp, {4, 8, 16}, spec, 50.0);
  ASSERT_EQ(report.entries.size(), 3u);
  EXPECT_FALSE(report.entries[0].rmse_to_previous.has_value());
  EXPECT_GE(*report.entries[1].rmse_to_previous, 50.0);
  ASSERT_TRUE(report.stabilized_at.has_value());
  EXPECT_EQ(*report.stabilized_at, 2u);
  EXPECT_FALSE(report.entries[1].chains_raised);
  EXPECT_TRUE(report.entries[2].chains_raised);
  EXPECT_EQ(report.entries[2].chains, 32u);
}

TEST(KnotTrial, SingleCountGivesNoVerdict) {
  const Experiment exp(small_scenario(R"({"sampler": {"iterations": 200}})"));
  const KnotTrialReport report = knot_count_trial(exp, {8}, exp.scenario().find_case("F"), 50.0);
  EXPECT_EQ(report.entries.size(), 1u);
  EXPECT_FALSE(report.stabilized_at.has_value());
}

TEST(SensitivityPresets, LaddersAreSeededReproducibly) {
  const Experiment exp(small_scenario(R"({"sampler": {"iterations": 300}})"));
  const auto first = sensitivity_presets(exp);
  const auto second = sensitivity_presets(exp);
  ASSERT_EQ(first.size(), 4u);
  ASSERT_EQ(first.size(), second.size());
  for (std::size_t k = 0; k < first.size(); ++k) {
    EXPECT_EQ(first[k].ladder, second[k].ladder);
    EXPECT_EQ(first[k].result.total.mean, second[k].result.total.mean);
  }
  EXPECT_EQ(first[0].ladder, "noise");
  EXPECT_EQ(first[3].ladder, "spring");
  EXPECT_EQ(first[3].foundation_stiffness, 500.0);
}

TEST(Experiment, NoiseLevelsScaleTheSameDraws) {
  const Experiment exp(small_scenario());
  const ObservationSet& clean = exp.observations(0.0);
  const ObservationSet& low = exp.observations(0.1);
  const ObservationSet& high = exp.observations(0.3);
  for (std::size_t k = 0; k < clean.readings_mm.size(); ++k) {
    EXPECT_NEAR(high.readings_mm[k] - clean.readings_mm[k], 3.0 * (low.readings_mm[k] - clean.readings_mm[k]), 1e-12);
  }
  ASSERT_TRUE(clean.force.has_value());
  EXPECT_EQ(exp.case_observations(exp.scenario().find_case("A")).force.has_value(), false);
  EXPECT_EQ(exp.case_observations(exp.scenario().find_case("A1")).readings_mm.size(), 4u);
}

// Commands, report and manifest rerun ---------------------------------------------

std::vector<fs::path> csv_files(const fs::path& root) {
  std::vector<fs::path> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.path().extension() == ".csv") out.push_back(fs::relative(e.path(), root));
  }
  std::sort(out.begin(), out.end());
  return out;
}

TEST(Commands, ReportReproducesAndManifestRerunIsByteIdentical) {
  const fs::path first = scratch_dir("run1");
  const fs::path second = scratch_dir("run2");
  Scenario s = small_scenario(R"({"sampler": {"iterations": 400}})");
  s.output_dir = first;
  const Logger quiet = [](std::string_view) {};
  ASSERT_EQ(command_invert(s, {"A", "A1"}, quiet), 0);
  Scenario rerun = scenario_from_manifest(first / "manifest-invert.json");
  rerun.output_dir = second;
  ASSERT_EQ(command_invert(rerun, {"A", "A1"}, quiet), 0);
  const auto files = csv_files(first);
  ASSERT_FALSE(files.empty());
  EXPECT_EQ(files, csv_files(second));
  for (const auto& f : files) EXPECT_EQ(read_text(first / f), read_text(second / f)) << f;

  ASSERT_EQ(command_report(first / "manifest-invert.json", quiet), 0);
  const auto entries = report_run(first / "manifest-invert.json");
  EXPECT_EQ(entries.size(), 2u);
  for (const auto& e : entries) EXPECT_TRUE(e.summary_reproduced) << e.label;
}

TEST(Commands, ReportFlagsTamperedSummary) {
  const fs::path dir = scratch_dir("tamper");
  Scenario s = small_scenario(R"({"sampler": {"iterations": 200}})");
  s.output_dir = dir;
  const Logger quiet = [](std::string_view) {};
  ASSERT_EQ(command_invert(s, {"A"}, quiet), 0);
  fs::path summary;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.path().filename() == "summary.csv") summary = e.path();
  }
  ASSERT_FALSE(summary.empty());
  Table t = read_csv(summary);
  t.rows[0][1] += 1.0;
  write_csv(summary, t);
  EXPECT_EQ(command_report(dir / "manifest-invert.json", quiet), 1);
}

}  // namespace
}  // namespace earthpress
