#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "earthpress/bayes.hpp"
#include "earthpress/demc.hpp"
#include "earthpress/metrics.hpp"
#include "earthpress/response.hpp"
#include "earthpress/scenario.hpp"
#include "earthpress/tables.hpp"

namespace earthpress {

using Logger = std::function<void(std::string_view)>;

/// Shared setup of a scenario: inversion mesh, truth and its responses,
/// monitoring angles and the synthesized observations.
class Experiment {
 public:
  explicit Experiment(Scenario scenario, Logger log = {});

  const Scenario& scenario() const noexcept { return scenario_; }
  const LiningSolver& solver() const noexcept { return *solver_; }
  /// Solver of the inversion mesh with a different foundation stiffness.
  std::shared_ptr<const LiningSolver> solver_with(double foundation_stiffness) const;

  const std::vector<double>& monitoring_angles() const noexcept { return monitoring_; }
  bool has_truth() const noexcept { return truth_.has_value(); }
  const PressureField& truth() const;
  /// Truth at the monitoring angles, in the scenario's target quantity.
  const std::vector<double>& truth_target() const;
  const std::vector<double>& truth_total() const;
  const std::vector<double>& truth_net() const;

  /// Observations on every baseline of the inversion mesh plus the force
  /// reading. Synthetic sets share one seed, so different noise levels
  /// scale the same standard-normal draws.
  const ObservationSet& observations(double noise_std_mm) const;
  /// The observations used by a case (subsampled, force dropped if unused).
  ObservationSet case_observations(const CaseSpec& spec) const;

  std::uint64_t observation_seed() const noexcept;
  std::uint64_t sampler_seed(const std::string& label) const noexcept;
  std::uint64_t optimizer_seed(const std::string& label) const noexcept;

  void log(std::string_view message) const;

 private:
  Scenario scenario_;
  Logger log_;
  std::shared_ptr<const LiningSolver> solver_;
  std::unique_ptr<LiningSolver> truth_solver_;
  std::optional<PressureField> truth_;
  std::vector<double> monitoring_;
  std::vector<double> truth_total_;
  std::vector<double> truth_net_;
  mutable std::map<double, ObservationSet> observations_;
};

/// Response operator of a case: observables per unit knot pressure.
struct CaseModel {
  std::shared_ptr<const LiningSolver> solver;
  BaselineSet baselines;
  std::shared_ptr<const LinearResponse> response;
  /// Net pressure at the monitoring angles per unit knot pressure.
  Eigen::MatrixXd net_operator;
};

CaseModel build_case_model(const Experiment& experiment, const CaseSpec& spec, std::size_t knot_count);

struct CaseResult {
  CaseSpec spec;
  std::uint64_t sampler_seed = 0;
  std::size_t knot_count = 0;
  ObservationSet observations;
  ChainEnsemble ensemble;
  PosteriorSummary total;
  std::optional<PosteriorSummary> net;
  std::optional<MetricReport> metrics;
  double max_rhat = 0.0;
  bool converged = false;
  double acceptance_rate = 0.0;
  std::uint64_t forward_evaluations = 0;
  double seconds = 0.0;

  /// Summary of the scenario's target quantity.
  const PosteriorSummary& target() const { return net ? *net : total; }
};

/// Runs DE-MC for one case and summarizes it. R-hat above 1.2 is logged
/// and recorded, not raised. `knot_count` and `chains` override the
/// scenario when given.
CaseResult run_case(const Experiment& experiment, const CaseSpec& spec,
                    std::optional<std::size_t> knot_count = std::nullopt,
                    std::optional<std::size_t> chains = std::nullopt);

/// Prior-only sampling with the scenario's sampler settings.
CaseResult run_prior_only(const Experiment& experiment);

struct ForwardResult {
  Table nodes;      // node, angle_deg, ux_mm, uy_mm, rz_rad, radial_mm, hoop_kn, reaction_kpa, net_kpa
  Table baselines;  // baseline, angle_deg, convergence_mm
  double crown_force_kn = 0.0;
};

/// Response of the inversion-mesh lining to the truth field.
ForwardResult run_forward(const Scenario& scenario);

/// Minimizer of sum w_i (d_i - (G x)_i)^2 over the box by an active-set
/// method from several random starts. Directions G cannot see keep their
/// start values, so the starts differ there.
struct BoxLeastSquares {
  std::vector<double> x;
  double objective = 0.0;
  std::size_t sweeps = 0;
  bool converged = false;
};

BoxLeastSquares box_least_squares(const Eigen::MatrixXd& g, const Eigen::VectorXd& d,
                                  const Eigen::VectorXd& weights, double lower, double upper,
                                  const OptimizerSpec& spec, std::uint64_t seed);

struct BaselineResult {
  std::string label;
  BoxLeastSquares fit;
  double residual_mm = 0.0;  // RMS deformation residual
  std::vector<double> profile;  // target quantity at the monitoring angles
  double total_variation = 0.0;
  std::optional<MetricReport> metrics;
};

BaselineResult deterministic_baseline(const Experiment& experiment, const CaseSpec& spec);

struct KnotTrialEntry {
  std::size_t knot_count = 0;
  std::size_t chains = 0;
  bool chains_raised = false;
  std::vector<double> profile;  // posterior mean of the target
  std::optional<double> rmse_to_previous;
  std::optional<MetricReport> metrics;
  double max_rhat = 0.0;
};

struct KnotTrialReport {
  std::vector<KnotTrialEntry> entries;
  /// Index i of the first entry whose mean differs from entry i-1 by less
  /// than the tolerance (RMSE over the monitoring angles).
  std::optional<std::size_t> stabilized_at;
};

KnotTrialReport knot_count_trial(const Experiment& experiment, const std::vector<std::size_t>& counts,
                                 const CaseSpec& spec, double tolerance_kpa);

struct PresetRun {
  std::string ladder;  // "noise" or "spring"
  double noise_std_mm = 0.0;
  double foundation_stiffness = 0.0;
  CaseResult result;
};

/// Noise ladder and spring-stiffness ladder around the scenario's preset
/// base case. The spring ladder inverts the base-noise observations.
std::vector<PresetRun> sensitivity_presets(const Experiment& experiment);

// Output -------------------------------------------------------------------

/// Writes the tables of one case under `dir`; returns the written paths
/// relative to `root`.
std::vector<std::string> write_case_outputs(const std::filesystem::path& root, const std::filesystem::path& dir,
                                            const Experiment& experiment, const CaseResult& result);

Table observation_table(const ObservationSet& observations);
std::optional<Table> force_table(const ObservationSet& observations);
Table summary_table(const PosteriorSummary& summary);
Table density_table(const PosteriorSummary& summary);
Table samples_table(const ChainEnsemble& ensemble);
Table diagnostics_table(const ChainEnsemble& ensemble);
Table acceptance_table(const ChainEnsemble& ensemble);

/// Reads observations.csv and an optional sibling force.csv.
ObservationSet read_observations(const std::filesystem::path& path);
/// Retained samples as an ensemble whose history is entirely retained.
ChainEnsemble read_samples(const std::filesystem::path& path);

/// Run bookkeeping written as manifest-<verb>.json in the output root.
class Manifest {
 public:
  explicit Manifest(const Experiment& experiment, std::string verb);

  void add_files(const std::vector<std::string>& files);
  void add_case(const CaseResult& result);
  void add_seed(const std::string& name, std::uint64_t seed);
  void add_timing(const std::string& name, double seconds);
  void add_warning(const std::string& text);
  void add_record(const std::string& key, const std::string& json_text);
  /// Returns the path written.
  std::filesystem::path write(const std::filesystem::path& root) const;

 private:
  struct Impl;
  std::shared_ptr<Impl> impl_;
};

/// Scenario stored in a manifest, ready to re-run.
Scenario scenario_from_manifest(const std::filesystem::path& manifest_path);
/// Case labels a manifest's run covered; empty for plain scenario files.
std::vector<std::string> manifest_case_labels(const std::filesystem::path& manifest_path);

struct ReportEntry {
  std::string label;
  bool summary_reproduced = false;
  std::size_t samples = 0;
  std::optional<MetricReport> metrics;
};

/// Re-summarizes every case's samples.csv listed in a manifest (case
/// directories sit next to it) and checks the result against the stored
/// summary and density tables.
std::vector<ReportEntry> report_run(const std::filesystem::path& manifest_path);

}  // namespace earthpress
