#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "earthpress/bayes.hpp"
#include "earthpress/demc.hpp"
#include "earthpress/fem.hpp"
#include "earthpress/pressure_field.hpp"

namespace earthpress {

/// Ground-truth pressure: a named preset or explicit knots, scaled by
/// `scale`, solved on a mesh `mesh_factor` times finer than the inversion
/// mesh.
struct TruthSpec {
  std::string preset = "illustration";
  std::vector<double> knots;  // overrides the preset when non-empty
  std::size_t knot_count = 72;
  double level_kpa = 200.0;  // used by the "uniform" preset
  double scale = 1.0;
  int mesh_factor = 2;
};

enum class Target { total, net };

struct ObservationPlan {
  double noise_std_mm = 1.0 / 3.0;
  double sigma_mm = 1.0;
  double force_angle_deg = 0.0;
  /// Synthetic force noise std as a fraction of the noise-free force.
  double force_noise_fraction = 0.01;
  /// Likelihood sigma of the force as a fraction of the observed force.
  double force_sigma_fraction = 0.01;
  /// Measured convergences (baseline_angle_deg, reading_mm, sigma_mm); when
  /// set, no truth is synthesized. A sibling force.csv adds the force.
  std::optional<std::filesystem::path> file;
};

/// One inversion of the case ladder.
struct CaseSpec {
  std::string label;
  std::size_t baselines = 100;
  bool force = false;
  std::optional<double> noise_std_mm;
  std::optional<double> foundation_stiffness;
};

struct OptimizerSpec {
  std::size_t starts = 8;
  std::size_t max_sweeps = 20000;
  double tolerance_kpa = 1e-8;  // values this close to a bound sit on it
};

struct PresetSpec {
  std::string base_case = "F2";
  std::vector<double> noise_levels_mm{1.0 / 3.0, 1.0, 2.0};
  std::vector<double> foundation_stiffness{1000.0, 100.0, 2000.0};
};

struct KnotTrialSpec {
  std::vector<std::size_t> counts{8, 16, 22};
  std::string base_case = "F1";
  double tolerance_kpa = 50.0;
};

struct SummarySpec {
  std::size_t monitoring_points = 100;
  PressureGrid grid;
};

struct Scenario {
  std::string name = "scenario";
  std::uint64_t seed = 1;
  std::filesystem::path output_dir = "out";
  LiningModel lining;
  std::optional<TruthSpec> truth = TruthSpec{};
  Target target = Target::total;
  ObservationPlan observations;
  std::size_t knot_count = 22;
  PriorSpec prior;
  SamplerConfig sampler;
  SummarySpec summary;
  std::vector<CaseSpec> cases;
  OptimizerSpec optimizer;
  PresetSpec presets;
  KnotTrialSpec knot_trial;

  /// Throws ConfigError for unresolvable references or invalid settings.
  void validate() const;
  const CaseSpec& find_case(const std::string& label) const;
};

/// Parses the JSON scenario format; missing keys take the defaults above.
/// A run manifest is accepted too and yields the scenario it recorded.
/// Relative observation files resolve against `base_dir`.
Scenario parse_scenario(const std::string& text, const std::filesystem::path& base_dir = {});
Scenario load_scenario(const std::filesystem::path& path);
/// Fully resolved scenario as JSON text (every key written out).
std::string scenario_to_json(const Scenario& scenario);

/// Names accepted by TruthSpec::preset.
std::vector<std::string> truth_preset_names();
/// Truth field of a spec (explicit knots or a sampled preset, times scale).
PressureField truth_field(const TruthSpec& spec);

}  // namespace earthpress
