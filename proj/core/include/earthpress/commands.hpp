#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "earthpress/pipeline.hpp"
#include "earthpress/scenario.hpp"

namespace earthpress {

/// The CLI verbs. Each writes its tables and a manifest under the
/// scenario's output directory and returns a process exit code.
int command_forward(const Scenario& scenario, const Logger& log);
int command_synthesize(const Scenario& scenario, const Logger& log);
/// Runs the listed cases, or every case when `labels` is empty.
int command_invert(const Scenario& scenario, const std::vector<std::string>& labels, const Logger& log);
int command_baseline(const Scenario& scenario, const std::vector<std::string>& labels, const Logger& log);
int command_trial_knots(const Scenario& scenario, const Logger& log);
int command_presets(const Scenario& scenario, const Logger& log);
/// Returns 1 when a stored summary is not reproduced from its samples.
int command_report(const std::filesystem::path& manifest_path, const Logger& log);

}  // namespace earthpress
