#include "earthpress/response.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "earthpress/errors.hpp"
#include "earthpress/random.hpp"

namespace earthpress {

std::vector<double> BaselineSet::angles_deg() const {
  std::vector<double> out;
  out.reserve(items.size());
  for (const auto& b : items) out.push_back(b.angle_deg);
  return out;
}

BaselineSet all_baselines(const Mesh& mesh) {
  BaselineSet set;
  const int half = mesh.node_count() / 2;
  for (int k = 0; k < half; ++k) {
    set.items.push_back({k + 1, k, k + half, mesh.node_angles_deg[static_cast<std::size_t>(k)]});
  }
  return set;
}

BaselineSet baselines_at(const Mesh& mesh, std::span<const double> angles_deg) {
  BaselineSet set;
  const int half = mesh.node_count() / 2;
  for (const double angle : angles_deg) {
    const auto node = mesh.node_at(angle);
    if (!node) {
      std::ostringstream msg;
      msg << "baseline angle " << angle << " deg is not a node of a " << mesh.element_count
          << "-element mesh";
      throw LookupError(msg.str());
    }
    if (*node >= half) {
      std::ostringstream msg;
      msg << "baseline angle " << angle << " deg must lie in [0, 180)";
      throw ConfigError(msg.str());
    }
    set.items.push_back({*node + 1, *node, *node + half, mesh.node_angles_deg[static_cast<std::size_t>(*node)]});
  }
  return set;
}

BaselineSet select_baselines(const BaselineSet& all, std::size_t count) {
  if (count == 0 || count > all.size() || all.size() % count != 0) {
    throw ConfigError("cannot pick " + std::to_string(count) + " evenly spaced baselines out of " +
                      std::to_string(all.size()));
  }
  const std::size_t stride = all.size() / count;
  BaselineSet subset;
  for (std::size_t k = 0; k < all.size(); k += stride) subset.items.push_back(all.items[k]);
  return subset;
}

std::vector<double> convergence(const SolveResult& result, const Mesh& mesh,
                                const BaselineSet& baselines) {
  std::vector<double> out;
  out.reserve(baselines.size());
  const auto& u = result.displacements;
  for (const auto& b : baselines.items) {
    const Eigen::Vector2d pa = mesh.node_coordinates[static_cast<std::size_t>(b.node_a)];
    const Eigen::Vector2d pb = mesh.node_coordinates[static_cast<std::size_t>(b.node_b)];
    const Eigen::Vector2d direction = (pb - pa).normalized();
    const Eigen::Vector2d ua(u(3 * b.node_a), u(3 * b.node_a + 1));
    const Eigen::Vector2d ub(u(3 * b.node_b), u(3 * b.node_b + 1));
    const double elongation = (ub - ua).dot(direction);
    out.push_back(-1000.0 * elongation);
  }
  return out;
}

void ObservationSet::validate() const {
  if (angles_deg.size() != readings_mm.size()) {
    throw ConfigError("observation set has " + std::to_string(angles_deg.size()) + " angles but " +
                      std::to_string(readings_mm.size()) + " readings");
  }
  if (!(sigma_mm > 0.0)) throw ConfigError("convergence sigma must be positive");
  if (force && !(force->sigma_kn > 0.0)) throw ConfigError("force sigma must be positive");
}

ObservationSet ObservationSet::subset(std::span<const double> wanted) const {
  ObservationSet out = *this;
  out.angles_deg.clear();
  out.readings_mm.clear();
  for (const double angle : wanted) {
    const auto it = std::find_if(angles_deg.begin(), angles_deg.end(),
                                 [&](double a) { return std::abs(a - angle) < 1e-9; });
    if (it == angles_deg.end()) {
      std::ostringstream msg;
      msg << "no convergence reading at " << angle << " deg";
      throw LookupError(msg.str());
    }
    out.angles_deg.push_back(*it);
    out.readings_mm.push_back(readings_mm[static_cast<std::size_t>(it - angles_deg.begin())]);
  }
  return out;
}

ObservationSet ObservationSet::without_force() const {
  ObservationSet out = *this;
  out.force.reset();
  return out;
}

ObservationSet synthesize_observations(const PressureField& truth, const LiningSolver& solver,
                                       const BaselineSet& baselines, const SynthesisPlan& plan) {
  if (!(plan.noise_std_mm >= 0.0) || !(plan.force_noise_std_kn >= 0.0)) {
    throw ConfigError("noise standard deviations must be non-negative");
  }
  const SolveResult result = solver.solve(truth);
  ObservationSet obs;
  obs.angles_deg = baselines.angles_deg();
  obs.readings_mm = convergence(result, solver.mesh(), baselines);
  obs.sigma_mm = plan.likelihood_sigma_mm;
  obs.applied_noise_mm = plan.noise_std_mm;
  obs.seed = plan.seed;

  RandomStream rng(plan.seed);
  for (double& reading : obs.readings_mm) reading += plan.noise_std_mm * rng.normal();

  if (plan.force_angle_deg) {
    ForceReading force;
    force.angle_deg = *plan.force_angle_deg;
    force.value_kn = hoop_force_at(result, solver.mesh(), force.angle_deg) +
                     plan.force_noise_std_kn * rng.normal();
    force.sigma_kn = plan.force_sigma_fraction * std::abs(force.value_kn);
    obs.force = force;
    obs.applied_force_noise_kn = plan.force_noise_std_kn;
  }
  obs.validate();
  return obs;
}

}  // namespace earthpress
