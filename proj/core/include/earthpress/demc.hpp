#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "earthpress/bayes.hpp"
#include "earthpress/random.hpp"

namespace earthpress {

using LogDensity = std::function<double(std::span<const double>)>;

struct SamplerConfig {
  std::size_t chains = 44;
  std::size_t iterations = 20000;
  std::optional<double> jump_rate;   // default 2.38 / sqrt(2 n)
  std::optional<double> jitter_std;  // default 1e-3 (q_max - q_min), kPa
  double burn_in_fraction = 0.5;
  std::size_t thin = 1;
  std::size_t diagnostics_every = 100;
  std::size_t workers = 1;
  std::uint64_t seed = 1;

  /// Throws ConfigError unless T >= max(3, 2n) and the remaining fields are
  /// in range.
  void validate(std::size_t dimension) const;
};

/// Jump rate and jitter actually used by the proposal.
struct ProposalKernel {
  double jump_rate = 0.0;
  double jitter_std = 0.0;

  static ProposalKernel resolve(const SamplerConfig& config, const PriorSpec& prior);
};

struct RhatRecord {
  std::size_t iteration = 0;
  std::size_t parameter = 0;
  double rhat = 0.0;
};

struct AcceptanceRecord {
  std::size_t iteration = 0;
  std::size_t accepted = 0;
  std::size_t proposed = 0;
};

/// T chains of n-dimensional states, their stored history and diagnostics.
/// History entry k holds all T states after iteration stored_iterations[k].
class ChainEnsemble {
 public:
  ChainEnsemble() = default;
  ChainEnsemble(std::size_t chains, std::size_t dimension);

  std::size_t chains() const noexcept { return chains_; }
  std::size_t dimension() const noexcept { return dimension_; }

  std::span<double> state(std::size_t chain);
  std::span<const double> state(std::size_t chain) const;
  double log_density(std::size_t chain) const { return log_density_[chain]; }
  void set_log_density(std::size_t chain, double value) { log_density_[chain] = value; }

  /// Appends the current states as the history entry for `iteration`.
  void record(std::size_t iteration);
  /// Appends an externally supplied history entry (T x n, row per chain).
  void append_history(std::size_t iteration, std::span<const double> states);
  std::size_t stored() const noexcept { return stored_iterations_.size(); }
  std::size_t stored_iteration(std::size_t k) const { return stored_iterations_[k]; }
  std::span<const double> stored_state(std::size_t k, std::size_t chain) const;

  /// Index of the first history entry after the burn-in.
  std::size_t first_retained() const;
  std::size_t retained_count() const { return stored() - first_retained(); }

  std::size_t iterations = 0;
  double burn_in_fraction = 0.5;
  std::vector<AcceptanceRecord> acceptance_log;
  std::vector<RhatRecord> rhat_trace;
  std::size_t accepted_total = 0;
  std::size_t accepted_after_burn_in = 0;
  std::size_t proposed_after_burn_in = 0;

 private:
  std::size_t chains_ = 0;
  std::size_t dimension_ = 0;
  std::vector<double> current_;
  std::vector<double> log_density_;
  std::vector<std::size_t> stored_iterations_;
  std::vector<double> history_;
};

/// Two distinct partner chains, both different from `chain`, drawn
/// without replacement. Needs at least three chains.
std::pair<std::size_t, std::size_t> draw_partners(std::size_t chain, std::size_t chains,
                                                  RandomStream& rng);

/// Differential-evolution proposal for chain i from the ensemble's current
/// states: x_i + jump_rate (x_a - x_b) + N(0, jitter^2) per component.
std::vector<double> propose(std::size_t chain, const ChainEnsemble& ensemble,
                            const ProposalKernel& kernel, RandomStream& rng);

struct AcceptOutcome {
  std::vector<double> state;
  double log_density = kLogZero;
  bool accepted = false;
};

/// Metropolis step. Throws InvalidStateError when the current state has
/// zero density.
AcceptOutcome accept_step(std::span<const double> current, double current_log_density,
                          std::span<const double> candidate, double candidate_log_density,
                          RandomStream& rng);

/// Runs DE-MC. Chains start from independent prior draws; each generation
/// proposes from the generation-start snapshot, and chain i draws from its
/// own stream derived from the master seed, so results do not depend on the
/// number of workers.
ChainEnsemble run(const LogDensity& log_density, const PriorSpec& prior, const SamplerConfig& config);

/// Gelman-Rubin scale-reduction factor over equal-length chains:
/// sqrt((t-1)/t + (T+1)/(T t) B/W), where B = t var(chain means) and W is
/// the mean within-chain variance.
double potential_scale_reduction(std::span<const std::vector<double>> chains);

/// R-hat of one parameter over the retained part of the history.
double gelman_rubin(const ChainEnsemble& ensemble, std::size_t parameter);

struct PressureGrid {
  double lower = 0.0;
  double upper = 3000.0;
  std::size_t bins = 150;

  double width() const noexcept { return (upper - lower) / static_cast<double>(bins); }
  double center(std::size_t k) const noexcept { return lower + (static_cast<double>(k) + 0.5) * width(); }
  /// Bin of a value; values outside the grid fall in the edge bins.
  std::size_t bin(double value) const noexcept;
};

/// Per-angle posterior statistics of a linear functional of the knots.
struct PosteriorSummary {
  std::vector<double> angles_deg;
  std::vector<double> mean;
  std::vector<double> std;
  std::vector<double> p05;
  std::vector<double> p50;
  std::vector<double> p95;
  PressureGrid grid;
  Eigen::MatrixXd density;  // angles x bins, each row sums to 1
  std::vector<double> mean_knots;
  std::size_t sample_count = 0;
};

/// Summary of q(theta) at the monitoring angles over the retained samples.
PosteriorSummary summarize(const ChainEnsemble& ensemble, std::span<const double> angles_deg,
                           const PressureGrid& grid);

/// Summary of (operator * q) where row j of `profile_operator` gives the
/// value at angles_deg[j].
PosteriorSummary summarize_profiles(const ChainEnsemble& ensemble, const Eigen::MatrixXd& profile_operator,
                                    std::span<const double> angles_deg, const PressureGrid& grid);

/// Quantile with linear interpolation between order statistics.
double quantile_sorted(std::span<const double> sorted, double p);

}  // namespace earthpress
