#include "earthpress/commands.hpp"

#include <chrono>
#include <sstream>

#include <nlohmann/json.hpp>

#include "earthpress/errors.hpp"
#include "earthpress/tables.hpp"

namespace earthpress {

using nlohmann::json;

namespace {

std::vector<CaseSpec> chosen_cases(const Scenario& scenario, const std::vector<std::string>& labels) {
  if (labels.empty()) return scenario.cases;
  std::vector<CaseSpec> out;
  for (const auto& label : labels) out.push_back(scenario.find_case(label));
  return out;
}

std::string relative_to(const std::filesystem::path& root, const std::filesystem::path& file) {
  return std::filesystem::relative(file, root).generic_string();
}

void put(const std::filesystem::path& root, const std::filesystem::path& path, const Table& table,
         Manifest& manifest) {
  write_csv(path, table);
  manifest.add_files({relative_to(root, path)});
}

void log_case(const Logger& log, const CaseResult& r) {
  if (!log) return;
  std::ostringstream msg;
  msg << "case " << r.spec.label << ": max R-hat " << format_number(r.max_rhat) << ", acceptance "
      << format_number(r.acceptance_rate) << ", Std " << format_number(std_factor(r.target())) << " kPa";
  if (r.metrics) msg << ", IA " << format_number(r.metrics->ia) << ", RMSE " << format_number(r.metrics->rmse) << " kPa";
  msg << " (" << format_number(r.seconds) << " s)";
  log(msg.str());
}

}  // namespace

int command_forward(const Scenario& scenario, const Logger& log) {
  const auto start = std::chrono::steady_clock::now();
  const Experiment experiment(scenario, log);
  const ForwardResult fwd = run_forward(scenario);
  const auto root = scenario.output_dir;
  Manifest manifest(experiment, "forward");
  put(root, root / "forward" / "nodes.csv", fwd.nodes, manifest);
  put(root, root / "forward" / "convergence.csv", fwd.baselines, manifest);
  manifest.add_record("forward", json{{"crown_hoop_force_kN", fwd.crown_force_kn}}.dump());
  manifest.add_timing("forward", std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
  manifest.write(root);
  if (log) log("crown hoop force " + format_number(fwd.crown_force_kn) + " kN");
  return 0;
}

int command_synthesize(const Scenario& scenario, const Logger& log) {
  const Experiment experiment(scenario, log);
  const auto root = scenario.output_dir;
  Manifest manifest(experiment, "synthesize");
  const ObservationSet& obs = experiment.observations(scenario.observations.noise_std_mm);
  put(root, root / "observations" / "observations.csv", observation_table(obs), manifest);
  if (auto force = force_table(obs)) put(root, root / "observations" / "force.csv", *force, manifest);
  manifest.write(root);
  if (log) log("wrote " + std::to_string(obs.size()) + " convergence readings");
  return 0;
}

int command_invert(const Scenario& scenario, const std::vector<std::string>& labels, const Logger& log) {
  const Experiment experiment(scenario, log);
  const auto root = scenario.output_dir;
  Manifest manifest(experiment, "invert");
  for (const CaseSpec& spec : chosen_cases(scenario, labels)) {
    const CaseResult r = run_case(experiment, spec);
    log_case(log, r);
    manifest.add_files(write_case_outputs(root, root / spec.label, experiment, r));
    manifest.add_case(r);
    if (!r.converged) manifest.add_warning("case " + spec.label + ": max R-hat " + format_number(r.max_rhat) + " >= 1.2");
  }
  manifest.write(root);
  return 0;
}

int command_baseline(const Scenario& scenario, const std::vector<std::string>& labels, const Logger& log) {
  const Experiment experiment(scenario, log);
  const auto root = scenario.output_dir;
  Manifest manifest(experiment, "baseline");
  Table summary;
  summary.header = {"baselines", "force", "objective", "residual_mm", "sweeps", "converged", "total_variation_kPa",
                    "ia", "rmse_kPa"};
  json cases = json::array();
  for (const CaseSpec& spec : chosen_cases(scenario, labels)) {
    const BaselineResult r = deterministic_baseline(experiment, spec);
    Table profile;
    profile.header = {"angle_deg", "optimal_kPa"};
    for (std::size_t j = 0; j < r.profile.size(); ++j) {
      profile.rows.push_back({experiment.monitoring_angles()[j], r.profile[j]});
    }
    put(root, root / spec.label / "baseline_profile.csv", profile, manifest);
    Table knots;
    knots.header = {"knot", "optimal_kPa"};
    for (std::size_t k = 0; k < r.fit.x.size(); ++k) knots.rows.push_back({static_cast<double>(k + 1), r.fit.x[k]});
    put(root, root / spec.label / "baseline_knots.csv", knots, manifest);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    summary.rows.push_back({static_cast<double>(spec.baselines), static_cast<double>(spec.force), r.fit.objective,
                            r.residual_mm, static_cast<double>(r.fit.sweeps), static_cast<double>(r.fit.converged),
                            r.total_variation, r.metrics ? r.metrics->ia : nan, r.metrics ? r.metrics->rmse : nan});
    cases.push_back({{"label", spec.label}, {"seed", experiment.optimizer_seed(spec.label)}});
    manifest.add_seed("baseline/" + spec.label, experiment.optimizer_seed(spec.label));
    if (!r.fit.converged) manifest.add_warning("baseline " + spec.label + " did not meet the optimizer tolerance");
    if (log) {
      log("baseline " + spec.label + ": residual " + format_number(r.residual_mm) + " mm, TV " +
          format_number(r.total_variation) + " kPa" + (r.metrics ? ", IA " + format_number(r.metrics->ia) : ""));
    }
  }
  put(root, root / "baseline.csv", summary, manifest);
  manifest.add_record("baseline_cases", cases.dump());
  manifest.write(root);
  return 0;
}

int command_trial_knots(const Scenario& scenario, const Logger& log) {
  const Experiment experiment(scenario, log);
  const auto root = scenario.output_dir;
  Manifest manifest(experiment, "trial-knots");
  const CaseSpec& spec = scenario.find_case(scenario.knot_trial.base_case);
  const KnotTrialReport report =
      knot_count_trial(experiment, scenario.knot_trial.counts, spec, scenario.knot_trial.tolerance_kpa);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  Table trial;
  trial.header = {"knots", "chains", "chains_raised", "rmse_to_previous_kPa", "stabilized", "max_rhat", "ia"};
  Table profiles;
  profiles.header = {"angle_deg"};
  for (std::size_t i = 0; i < report.entries.size(); ++i) {
    const auto& e = report.entries[i];
    trial.rows.push_back({static_cast<double>(e.knot_count), static_cast<double>(e.chains),
                          static_cast<double>(e.chains_raised), e.rmse_to_previous.value_or(nan),
                          static_cast<double>(report.stabilized_at && *report.stabilized_at == i), e.max_rhat,
                          e.metrics ? e.metrics->ia : nan});
    profiles.header.push_back("mean_n" + std::to_string(e.knot_count) + "_kPa");
  }
  for (std::size_t j = 0; j < experiment.monitoring_angles().size(); ++j) {
    std::vector<double> row{experiment.monitoring_angles()[j]};
    for (const auto& e : report.entries) row.push_back(e.profile[j]);
    profiles.rows.push_back(std::move(row));
  }
  put(root, root / "knot_trial" / "trial.csv", trial, manifest);
  put(root, root / "knot_trial" / "profiles.csv", profiles, manifest);
  if (report.stabilized_at) {
    const auto& prev = report.entries[*report.stabilized_at - 1];
    const auto& cur = report.entries[*report.stabilized_at];
    const std::string verdict = "stabilized at " + std::to_string(prev.knot_count) + " -> " +
                                std::to_string(cur.knot_count) + " knots";
    manifest.add_record("knot_trial", json{{"verdict", verdict}}.dump());
    if (log) log(verdict);
  } else {
    manifest.add_record("knot_trial", json{{"verdict", nullptr}}.dump());
    if (log) log("no stabilization within the trial counts");
  }
  manifest.write(root);
  return 0;
}

int command_presets(const Scenario& scenario, const Logger& log) {
  const Experiment experiment(scenario, log);
  const auto root = scenario.output_dir;
  Manifest manifest(experiment, "presets");
  const auto runs = sensitivity_presets(experiment);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  Table table;
  table.header = {"ladder", "noise_std_mm", "foundation_stiffness", "ia", "rmse_kPa", "std_kPa", "max_rhat"};
  for (const auto& run : runs) {
    log_case(log, run.result);
    manifest.add_files(write_case_outputs(root, root / run.result.spec.label, experiment, run.result));
    manifest.add_case(run.result);
    const auto& m = run.result.metrics;
    table.rows.push_back({run.ladder == "noise" ? 0.0 : 1.0, run.noise_std_mm, run.foundation_stiffness,
                          m ? m->ia : nan, m ? m->rmse : nan, std_factor(run.result.target()), run.result.max_rhat});
  }
  put(root, root / "presets.csv", table, manifest);
  manifest.write(root);
  return 0;
}

int command_report(const std::filesystem::path& manifest_path, const Logger& log) {
  const auto entries = report_run(manifest_path);
  const auto root = manifest_path.parent_path();
  const double nan = std::numeric_limits<double>::quiet_NaN();
  Table table;
  table.header = {"case_index", "samples", "summary_reproduced", "ia", "rmse_kPa", "std_kPa"};
  int status = 0;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    if (!e.summary_reproduced) status = 1;
    table.rows.push_back({static_cast<double>(i + 1), static_cast<double>(e.samples),
                          static_cast<double>(e.summary_reproduced), e.metrics ? e.metrics->ia : nan,
                          e.metrics ? e.metrics->rmse : nan, e.metrics ? e.metrics->std : nan});
    if (log) {
      log(e.label + ": " + std::to_string(e.samples) + " samples, summary " +
          (e.summary_reproduced ? "reproduced" : "MISMATCH") +
          (e.metrics ? ", IA " + format_number(e.metrics->ia) + ", Std " + format_number(e.metrics->std) + " kPa" : ""));
    }
  }
  write_csv(root / "report.csv", table);
  return status;
}

}  // namespace earthpress
