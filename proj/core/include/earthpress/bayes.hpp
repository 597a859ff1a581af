#pragma once

#include <atomic>
#include <cstddef>
#include <limits>
#include <memory>
#include <optional>
#include <span>

#include <Eigen/Dense>

#include "earthpress/response.hpp"

namespace earthpress {

/// Log-density value of states outside the support.
inline constexpr double kLogZero = -std::numeric_limits<double>::infinity();

/// Independent uniform prior on [q_min, q_max] for each of n knots.
struct PriorSpec {
  double q_min = 0.0;
  double q_max = 3000.0;
  std::size_t dimension = 22;

  void validate() const;
  bool contains(std::span<const double> q) const noexcept;
  double midpoint() const noexcept { return 0.5 * (q_min + q_max); }
};

double log_prior(std::span<const double> q, const PriorSpec& prior);

/// Maps a knot vector to predicted observables: the convergences on the
/// observed baselines (mm), followed by the hoop force (kN) when one is
/// observed.
class ResponseModel {
 public:
  virtual ~ResponseModel() = default;
  virtual std::size_t knot_count() const = 0;
  virtual std::size_t observable_count() const = 0;
  virtual void predict(std::span<const double> knots, std::span<double> out) const = 0;
};

/// Runs the finite-element model for every prediction.
class FemResponse final : public ResponseModel {
 public:
  FemResponse(std::shared_ptr<const LiningSolver> solver, BaselineSet baselines,
              std::optional<double> force_angle_deg, std::size_t knot_count);

  std::size_t knot_count() const override { return knot_count_; }
  std::size_t observable_count() const override;
  void predict(std::span<const double> knots, std::span<double> out) const override;

 private:
  std::shared_ptr<const LiningSolver> solver_;
  BaselineSet baselines_;
  std::optional<double> force_angle_deg_;
  std::size_t knot_count_;
};

/// Precomputed response matrix G with g(q) = G q. The lining is linear
/// elastic, so column k is the exact response to a unit pressure at knot k.
class LinearResponse final : public ResponseModel {
 public:
  explicit LinearResponse(Eigen::MatrixXd matrix);
  /// Tabulates `exact` on the unit knot vectors.
  static LinearResponse tabulate(const ResponseModel& exact);

  const Eigen::MatrixXd& matrix() const noexcept { return matrix_; }
  std::size_t knot_count() const override { return static_cast<std::size_t>(matrix_.cols()); }
  std::size_t observable_count() const override { return static_cast<std::size_t>(matrix_.rows()); }
  void predict(std::span<const double> knots, std::span<double> out) const override;

 private:
  Eigen::MatrixXd matrix_;
};

/// Net pressure at every mesh node per unit knot pressure (nodes x knots).
Eigen::MatrixXd net_pressure_operator(const LiningSolver& solver, std::size_t knot_count);

struct LikelihoodSpec {
  ObservationSet observations;
  std::shared_ptr<const ResponseModel> forward;

  /// Observable vector in the order produced by the forward model.
  Eigen::VectorXd data() const;
  void validate() const;
};

/// Gaussian log-likelihood of the deformation data plus an independent
/// Gaussian term for the hoop force when one is observed.
double log_likelihood(std::span<const double> q, const LikelihoodSpec& spec);

double log_posterior(std::span<const double> q, const PriorSpec& prior, const LikelihoodSpec& spec);

/// Unnormalized log-posterior; omit the likelihood to sample the prior.
/// States outside the prior box return kLogZero without a forward run.
class Posterior {
 public:
  explicit Posterior(PriorSpec prior, std::optional<LikelihoodSpec> likelihood = std::nullopt);

  double operator()(std::span<const double> q) const;

  const PriorSpec& prior() const noexcept { return prior_; }
  const std::optional<LikelihoodSpec>& likelihood() const noexcept { return likelihood_; }
  std::uint64_t forward_evaluations() const noexcept { return evaluations_->load(); }

 private:
  PriorSpec prior_;
  std::optional<LikelihoodSpec> likelihood_;
  std::shared_ptr<std::atomic<std::uint64_t>> evaluations_;
};

}  // namespace earthpress
