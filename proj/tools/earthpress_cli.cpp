// earthpress: earth pressure inversion from tunnel convergence data.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "earthpress/commands.hpp"
#include "earthpress/pipeline.hpp"
#include "earthpress/errors.hpp"
#include "earthpress/scenario.hpp"

namespace {

struct CommonOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> output_dir;
  std::optional<std::size_t> chains;
  std::optional<std::size_t> iterations;
  std::optional<std::size_t> workers;
  std::optional<std::string> force;  // "on" or "off"
  std::vector<std::string> cases;
};

void add_common(CLI::App* cmd, CommonOptions& opt, bool with_cases) {
  cmd->add_option("-c,--config", opt.config, "Scenario file (JSON) or a run manifest")->required()->check(CLI::ExistingFile);
  cmd->add_option("-s,--seed", opt.seed, "Override the master seed");
  cmd->add_option("-o,--output-dir", opt.output_dir, "Override the output directory");
  cmd->add_option("--chains", opt.chains, "Override the DE-MC chain count");
  cmd->add_option("--iterations", opt.iterations, "Override the DE-MC iteration count");
  cmd->add_option("--workers", opt.workers, "Threads evaluating the posterior");
  cmd->add_option("--force", opt.force, "Force observation for every case")->check(CLI::IsMember({"on", "off"}));
  if (with_cases) cmd->add_option("--case", opt.cases, "Case label (repeatable); default all");
}

earthpress::Scenario resolve(const CommonOptions& opt) {
  earthpress::Scenario s = earthpress::load_scenario(opt.config);
  if (opt.seed) s.seed = *opt.seed;
  s.sampler.seed = s.seed;
  if (opt.output_dir) s.output_dir = *opt.output_dir;
  if (opt.chains) s.sampler.chains = *opt.chains;
  if (opt.iterations) s.sampler.iterations = *opt.iterations;
  if (opt.workers) s.sampler.workers = *opt.workers;
  if (opt.force) {
    for (auto& c : s.cases) c.force = *opt.force == "on";
  }
  s.validate();
  return s;
}

void log_line(std::string_view message) { std::cerr << message << '\n'; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Earth pressure inversion for circular tunnel linings"};
  app.require_subcommand(1);

  CommonOptions opt;
  auto* forward = app.add_subcommand("forward", "Responses of the lining to the truth field");
  add_common(forward, opt, false);
  auto* synthesize = app.add_subcommand("synthesize", "Noisy convergence (and force) observations of the truth");
  add_common(synthesize, opt, false);
  auto* invert = app.add_subcommand("invert", "DE-MC inversion of the scenario's cases");
  add_common(invert, opt, true);
  auto* baseline = app.add_subcommand("baseline", "Bounded least-squares optimum for the scenario's cases");
  add_common(baseline, opt, true);
  auto* trial = app.add_subcommand("trial-knots", "Inversions with increasing knot counts");
  add_common(trial, opt, false);
  auto* presets = app.add_subcommand("presets", "Noise and soil-spring sensitivity ladders");
  add_common(presets, opt, false);

  std::string manifest;
  auto* report = app.add_subcommand("report", "Re-summarize a finished run from its samples");
  report->add_option("manifest", manifest, "manifest-invert.json or manifest-presets.json of a run")
      ->required()
      ->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (report->parsed()) return earthpress::command_report(manifest, log_line);
    const earthpress::Scenario scenario = resolve(opt);
    if (forward->parsed()) return earthpress::command_forward(scenario, log_line);
    if (synthesize->parsed()) return earthpress::command_synthesize(scenario, log_line);
    // Re-running a manifest repeats the cases it covered.
    std::vector<std::string> cases = opt.cases;
    if (cases.empty() && (invert->parsed() || baseline->parsed())) {
      cases = earthpress::manifest_case_labels(opt.config);
    }
    if (invert->parsed()) return earthpress::command_invert(scenario, cases, log_line);
    if (baseline->parsed()) return earthpress::command_baseline(scenario, cases, log_line);
    if (trial->parsed()) return earthpress::command_trial_knots(scenario, log_line);
    if (presets->parsed()) return earthpress::command_presets(scenario, log_line);
  } catch (const earthpress::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
