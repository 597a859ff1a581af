#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "earthpress/fem.hpp"

namespace earthpress {

/// A diametral chord between node `node_a` (at `angle_deg`) and the node
/// opposite it. `label` is the 1-based baseline number; baseline 1 is the
/// crown-to-invert chord.
struct Baseline {
  int label = 1;
  int node_a = 0;
  int node_b = 0;
  double angle_deg = 0.0;
};

struct BaselineSet {
  std::vector<Baseline> items;

  std::size_t size() const noexcept { return items.size(); }
  std::vector<double> angles_deg() const;
};

/// All N_e/2 baselines of a mesh.
BaselineSet all_baselines(const Mesh& mesh);

/// Baselines of `mesh` at the given angles (throws LookupError when an
/// angle is not a node, ConfigError for angles at or beyond 180 degrees).
BaselineSet baselines_at(const Mesh& mesh, std::span<const double> angles_deg);

/// Evenly spaced subset starting at the crown baseline. `count` must divide
/// the size of `all`.
BaselineSet select_baselines(const BaselineSet& all, std::size_t count);

/// Change of chord length (mm, shortening positive) on each baseline.
std::vector<double> convergence(const SolveResult& result, const Mesh& mesh,
                                const BaselineSet& baselines);

struct ForceReading {
  double angle_deg = 0.0;
  double value_kn = 0.0;   // hoop force, compression positive
  double sigma_kn = 0.0;   // noise std used by the likelihood
};

/// Observed convergences (one per baseline angle) with optional hoop force.
struct ObservationSet {
  std::vector<double> angles_deg;
  std::vector<double> readings_mm;
  double sigma_mm = 1.0;             // noise std used by the likelihood
  std::optional<ForceReading> force;
  double applied_noise_mm = 0.0;     // std of synthetic noise, 0 for field data
  double applied_force_noise_kn = 0.0;
  std::uint64_t seed = 0;

  std::size_t size() const noexcept { return readings_mm.size(); }
  /// Throws ConfigError when sizes disagree or a sigma is not positive.
  void validate() const;
  /// Readings on the given subset of angles (exact matches required).
  ObservationSet subset(std::span<const double> angles_deg) const;
  ObservationSet without_force() const;
};

struct SynthesisPlan {
  double noise_std_mm = 1.0 / 3.0;
  double likelihood_sigma_mm = 1.0;
  std::optional<double> force_angle_deg;
  double force_noise_std_kn = 0.0;
  /// Likelihood sigma of the force as a fraction of the observed force.
  double force_sigma_fraction = 0.01;
  std::uint64_t seed = 0;
};

/// Noise-free responses of `truth` plus seeded Gaussian noise. Convergence
/// noise is drawn first, in baseline order, then the force noise, so the
/// deformation data do not depend on whether a force is requested.
ObservationSet synthesize_observations(const PressureField& truth, const LiningSolver& solver,
                                       const BaselineSet& baselines, const SynthesisPlan& plan);

}  // namespace earthpress
