#include "earthpress/scenario.hpp"

#include <cmath>
#include <numbers>
#include <set>

#include <nlohmann/json.hpp>

#include "earthpress/errors.hpp"
#include "earthpress/tables.hpp"

namespace earthpress {

using nlohmann::json;

namespace {

double deg(double theta_deg) { return theta_deg * std::numbers::pi / 180.0; }

/// Smooth periodic bump of unit height centred on `centre_deg`.
double bump(double theta_deg, double centre_deg, double width_deg) {
  double d = std::remainder(theta_deg - centre_deg, 360.0);
  return std::exp(-0.5 * (d / width_deg) * (d / width_deg));
}

// Illustration truth: a squat elliptical load with two opposite shoulder
// bumps. Odd harmonics do not change diametral convergence at all, so the
// shape keeps them small; otherwise no inversion could recover it.
double illustration_profile(double t) {
  return 1000.0 + 300.0 * std::cos(deg(2.0 * t)) + 80.0 * std::cos(deg(4.0 * t - 40.0)) +
         150.0 * (bump(t, 60.0, 18.0) + bump(t, 240.0, 18.0)) + 25.0 * std::cos(deg(t));
}

// Soft-ground truth: vertical load above lateral, growing with depth
// towards the invert.
double soft_ground_profile(double t) {
  return 650.0 - 60.0 * std::cos(deg(t)) + 140.0 * std::cos(deg(2.0 * t)) +
         40.0 * std::cos(deg(4.0 * t)) + 15.0 * std::cos(deg(3.0 * t - 20.0));
}

template <typename T>
void read_if(const json& j, const char* key, T& out) {
  if (j.contains(key) && !j.at(key).is_null()) out = j.at(key).get<T>();
}

template <typename T>
void read_if(const json& j, const char* key, std::optional<T>& out) {
  if (j.contains(key) && !j.at(key).is_null()) out = j.at(key).get<T>();
}

LiningModel parse_lining(const json& j) {
  LiningModel m;
  if (j.contains("youngs_modulus")) {
    const double e = j.at("youngs_modulus").get<double>();
    const double t = j.at("thickness").get<double>();
    const double w = j.value("width", 1.0);
    m = LiningModel::from_section(j.value("diameter", m.diameter), e, t, w, 1.0, m.foundation_stiffness,
                                  m.element_count);
  }
  read_if(j, "diameter", m.diameter);
  read_if(j, "axial_stiffness", m.axial_stiffness);
  read_if(j, "bending_stiffness", m.bending_stiffness);
  read_if(j, "rigidity_reduction", m.rigidity_reduction);
  read_if(j, "joint_rotation_stiffness", m.joint_rotation_stiffness);
  read_if(j, "joint_angles_deg", m.joint_angles_deg);
  read_if(j, "foundation_stiffness", m.foundation_stiffness);
  read_if(j, "element_count", m.element_count);
  return m;
}

json to_json(const LiningModel& m) {
  json j;
  j["diameter"] = m.diameter;
  j["axial_stiffness"] = m.axial_stiffness;
  j["bending_stiffness"] = m.bending_stiffness;
  j["rigidity_reduction"] = m.rigidity_reduction;
  j["joint_rotation_stiffness"] =
      std::isinf(m.joint_rotation_stiffness) ? json(nullptr) : json(m.joint_rotation_stiffness);
  j["joint_angles_deg"] = m.joint_angles_deg;
  j["foundation_stiffness"] = m.foundation_stiffness;
  j["element_count"] = m.element_count;
  return j;
}

}  // namespace

std::vector<std::string> truth_preset_names() { return {"zero", "uniform", "illustration", "soft_ground"}; }

PressureField truth_field(const TruthSpec& spec) {
  std::vector<double> knots;
  if (!spec.knots.empty()) {
    knots = spec.knots;
  } else {
    if (spec.knot_count < 2) throw InvalidFieldError("truth preset needs at least two knots");
    knots.resize(spec.knot_count);
    const double step = 360.0 / static_cast<double>(spec.knot_count);
    for (std::size_t k = 0; k < spec.knot_count; ++k) {
      const double t = step * static_cast<double>(k);
      if (spec.preset == "zero") {
        knots[k] = 0.0;
      } else if (spec.preset == "uniform") {
        knots[k] = spec.level_kpa;
      } else if (spec.preset == "illustration") {
        knots[k] = illustration_profile(t);
      } else if (spec.preset == "soft_ground") {
        knots[k] = soft_ground_profile(t);
      } else {
        throw ConfigError("unknown truth preset '" + spec.preset + "'");
      }
    }
  }
  for (double& v : knots) v *= spec.scale;
  return PressureField(std::move(knots));
}

void Scenario::validate() const {
  lining.validate();
  prior.validate();
  if (prior.q_min < 0.0) throw ConfigError("prior lower bound must be non-negative (soil cannot pull)");
  if (prior.dimension != knot_count) throw ConfigError("prior dimension must equal the knot count");
  sampler.validate(knot_count);
  if (summary.monitoring_points == 0) throw ConfigError("need at least one monitoring point");
  if (summary.grid.bins == 0 || !(summary.grid.upper > summary.grid.lower)) {
    throw ConfigError("pressure grid must have bins and upper > lower");
  }
  if (!(observations.noise_std_mm >= 0.0) || !(observations.sigma_mm > 0.0)) {
    throw ConfigError("observation noise must be >= 0 and likelihood sigma > 0");
  }
  if (!(observations.force_sigma_fraction > 0.0) || !(observations.force_noise_fraction >= 0.0)) {
    throw ConfigError("force sigma fraction must be positive and noise fraction non-negative");
  }
  if (truth) {
    if (truth->mesh_factor < 1) throw ConfigError("truth mesh factor must be at least 1");
    truth_field(*truth);
  } else if (!observations.file) {
    throw ConfigError("scenario needs a truth field or an observation file");
  }
  const std::size_t available = static_cast<std::size_t>(lining.element_count) / 2;
  std::set<std::string> labels;
  for (const auto& c : cases) {
    if (!labels.insert(c.label).second) throw ConfigError("duplicate case label '" + c.label + "'");
    if (c.baselines == 0 || available % c.baselines != 0) {
      throw ConfigError("case " + c.label + ": " + std::to_string(c.baselines) +
                        " baselines do not evenly subsample " + std::to_string(available));
    }
    if (c.noise_std_mm && !(*c.noise_std_mm >= 0.0)) throw ConfigError("case noise must be >= 0");
    if (c.foundation_stiffness && !(*c.foundation_stiffness >= 0.0)) {
      throw ConfigError("case foundation stiffness must be >= 0");
    }
  }
  if (!build_mesh(lining).node_at(observations.force_angle_deg)) {
    throw ConfigError("force angle " + format_number(observations.force_angle_deg) + " is not a mesh node");
  }
}

const CaseSpec& Scenario::find_case(const std::string& label) const {
  for (const auto& c : cases) {
    if (c.label == label) return c;
  }
  throw ConfigError("scenario has no case '" + label + "'");
}

Scenario parse_scenario(const std::string& text, const std::filesystem::path& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("scenario is not valid JSON: ") + e.what());
  }
  // A run manifest carries its fully resolved scenario.
  if (j.is_object() && j.contains("verb") && j.contains("scenario")) j = json(j.at("scenario"));
  Scenario s;
  try {
    read_if(j, "name", s.name);
    read_if(j, "seed", s.seed);
    if (j.contains("output_dir")) s.output_dir = j.at("output_dir").get<std::string>();
    if (j.contains("lining")) s.lining = parse_lining(j.at("lining"));

    if (j.contains("truth")) {
      const json& t = j.at("truth");
      if (t.is_null()) {
        s.truth.reset();
      } else {
        TruthSpec spec;
        read_if(t, "preset", spec.preset);
        read_if(t, "knots", spec.knots);
        read_if(t, "knot_count", spec.knot_count);
        read_if(t, "level_kpa", spec.level_kpa);
        read_if(t, "scale", spec.scale);
        read_if(t, "mesh_factor", spec.mesh_factor);
        s.truth = spec;
      }
    }
    if (j.contains("target")) {
      const auto target = j.at("target").get<std::string>();
      if (target == "total") {
        s.target = Target::total;
      } else if (target == "net") {
        s.target = Target::net;
      } else {
        throw ConfigError("target must be 'total' or 'net'");
      }
    }
    if (j.contains("observations")) {
      const json& o = j.at("observations");
      read_if(o, "noise_std_mm", s.observations.noise_std_mm);
      read_if(o, "sigma_mm", s.observations.sigma_mm);
      read_if(o, "force_angle_deg", s.observations.force_angle_deg);
      read_if(o, "force_noise_fraction", s.observations.force_noise_fraction);
      read_if(o, "force_sigma_fraction", s.observations.force_sigma_fraction);
      if (o.contains("file") && !o.at("file").is_null()) {
        std::filesystem::path p = o.at("file").get<std::string>();
        if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
        s.observations.file = p;
      }
    }
    if (j.contains("parameterization")) read_if(j.at("parameterization"), "knot_count", s.knot_count);
    s.prior.dimension = s.knot_count;
    if (j.contains("prior")) {
      read_if(j.at("prior"), "q_min", s.prior.q_min);
      read_if(j.at("prior"), "q_max", s.prior.q_max);
    }
    if (j.contains("sampler")) {
      const json& m = j.at("sampler");
      read_if(m, "chains", s.sampler.chains);
      read_if(m, "iterations", s.sampler.iterations);
      read_if(m, "jump_rate", s.sampler.jump_rate);
      read_if(m, "jitter_std", s.sampler.jitter_std);
      read_if(m, "burn_in_fraction", s.sampler.burn_in_fraction);
      read_if(m, "thin", s.sampler.thin);
      read_if(m, "diagnostics_every", s.sampler.diagnostics_every);
      read_if(m, "workers", s.sampler.workers);
    }
    s.sampler.seed = s.seed;
    if (j.contains("summary")) {
      const json& m = j.at("summary");
      read_if(m, "monitoring_points", s.summary.monitoring_points);
      if (m.contains("grid")) {
        read_if(m.at("grid"), "lower", s.summary.grid.lower);
        read_if(m.at("grid"), "upper", s.summary.grid.upper);
        read_if(m.at("grid"), "bins", s.summary.grid.bins);
      }
    }
    if (j.contains("cases")) {
      for (const json& c : j.at("cases")) {
        CaseSpec spec;
        spec.label = c.at("label").get<std::string>();
        read_if(c, "baselines", spec.baselines);
        read_if(c, "force", spec.force);
        read_if(c, "noise_std_mm", spec.noise_std_mm);
        read_if(c, "foundation_stiffness", spec.foundation_stiffness);
        s.cases.push_back(spec);
      }
    }
    if (j.contains("baseline_optimizer")) {
      const json& m = j.at("baseline_optimizer");
      read_if(m, "starts", s.optimizer.starts);
      read_if(m, "max_sweeps", s.optimizer.max_sweeps);
      read_if(m, "tolerance_kpa", s.optimizer.tolerance_kpa);
    }
    if (j.contains("presets")) {
      const json& m = j.at("presets");
      read_if(m, "base_case", s.presets.base_case);
      read_if(m, "noise_levels_mm", s.presets.noise_levels_mm);
      read_if(m, "foundation_stiffness", s.presets.foundation_stiffness);
    }
    if (j.contains("knot_trial")) {
      const json& m = j.at("knot_trial");
      read_if(m, "counts", s.knot_trial.counts);
      read_if(m, "base_case", s.knot_trial.base_case);
      read_if(m, "tolerance_kpa", s.knot_trial.tolerance_kpa);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad scenario field: ") + e.what());
  }
  if (s.cases.empty()) s.cases.push_back(CaseSpec{"default", static_cast<std::size_t>(s.lining.element_count) / 2, true, {}, {}});
  s.validate();
  return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
  return parse_scenario(read_text(path), path.parent_path());
}

std::string scenario_to_json(const Scenario& s) {
  json j;
  j["name"] = s.name;
  j["seed"] = s.seed;
  j["output_dir"] = s.output_dir.generic_string();
  j["lining"] = to_json(s.lining);
  if (s.truth) {
    j["truth"] = {{"preset", s.truth->preset},     {"knots", s.truth->knots},
                  {"knot_count", s.truth->knot_count}, {"level_kpa", s.truth->level_kpa},
                  {"scale", s.truth->scale},       {"mesh_factor", s.truth->mesh_factor}};
  } else {
    j["truth"] = nullptr;
  }
  j["target"] = s.target == Target::net ? "net" : "total";
  j["observations"] = {{"noise_std_mm", s.observations.noise_std_mm},
                       {"sigma_mm", s.observations.sigma_mm},
                       {"force_angle_deg", s.observations.force_angle_deg},
                       {"force_noise_fraction", s.observations.force_noise_fraction},
                       {"force_sigma_fraction", s.observations.force_sigma_fraction},
                       {"file", s.observations.file ? json(s.observations.file->generic_string()) : json(nullptr)}};
  j["parameterization"] = {{"knot_count", s.knot_count}};
  j["prior"] = {{"q_min", s.prior.q_min}, {"q_max", s.prior.q_max}};
  j["sampler"] = {{"chains", s.sampler.chains},
                  {"iterations", s.sampler.iterations},
                  {"jump_rate", s.sampler.jump_rate ? json(*s.sampler.jump_rate) : json(nullptr)},
                  {"jitter_std", s.sampler.jitter_std ? json(*s.sampler.jitter_std) : json(nullptr)},
                  {"burn_in_fraction", s.sampler.burn_in_fraction},
                  {"thin", s.sampler.thin},
                  {"diagnostics_every", s.sampler.diagnostics_every},
                  {"workers", s.sampler.workers}};
  j["summary"] = {{"monitoring_points", s.summary.monitoring_points},
                  {"grid", {{"lower", s.summary.grid.lower}, {"upper", s.summary.grid.upper}, {"bins", s.summary.grid.bins}}}};
  json cases = json::array();
  for (const auto& c : s.cases) {
    cases.push_back({{"label", c.label},
                     {"baselines", c.baselines},
                     {"force", c.force},
                     {"noise_std_mm", c.noise_std_mm ? json(*c.noise_std_mm) : json(nullptr)},
                     {"foundation_stiffness", c.foundation_stiffness ? json(*c.foundation_stiffness) : json(nullptr)}});
  }
  j["cases"] = cases;
  j["baseline_optimizer"] = {{"starts", s.optimizer.starts},
                             {"max_sweeps", s.optimizer.max_sweeps},
                             {"tolerance_kpa", s.optimizer.tolerance_kpa}};
  j["presets"] = {{"base_case", s.presets.base_case},
                  {"noise_levels_mm", s.presets.noise_levels_mm},
                  {"foundation_stiffness", s.presets.foundation_stiffness}};
  j["knot_trial"] = {{"counts", s.knot_trial.counts},
                     {"base_case", s.knot_trial.base_case},
                     {"tolerance_kpa", s.knot_trial.tolerance_kpa}};
  return j.dump(2);
}

}  // namespace earthpress
