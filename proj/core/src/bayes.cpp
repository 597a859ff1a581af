#include "earthpress/bayes.hpp"

#include <cmath>
#include <numbers>
#include <vector>

#include "earthpress/errors.hpp"

namespace earthpress {

void PriorSpec::validate() const {
  if (!(q_min < q_max)) throw ConfigError("prior bounds need q_min < q_max");
  if (dimension == 0) throw ConfigError("prior dimension must be positive");
}

bool PriorSpec::contains(std::span<const double> q) const noexcept {
  for (const double v : q) {
    if (!(v >= q_min && v <= q_max)) return false;
  }
  return true;
}

double log_prior(std::span<const double> q, const PriorSpec& prior) {
  if (q.size() != prior.dimension) {
    throw DimensionError("knot vector has " + std::to_string(q.size()) + " entries, prior expects " +
                         std::to_string(prior.dimension));
  }
  if (!prior.contains(q)) return kLogZero;
  return -static_cast<double>(prior.dimension) * std::log(prior.q_max - prior.q_min);
}

FemResponse::FemResponse(std::shared_ptr<const LiningSolver> solver, BaselineSet baselines,
                         std::optional<double> force_angle_deg, std::size_t knot_count)
    : solver_(std::move(solver)),
      baselines_(std::move(baselines)),
      force_angle_deg_(force_angle_deg),
      knot_count_(knot_count) {
  if (force_angle_deg_ && !solver_->mesh().node_at(*force_angle_deg_)) {
    throw LookupError("force observation angle is not a mesh node");
  }
}

std::size_t FemResponse::observable_count() const {
  return baselines_.size() + (force_angle_deg_ ? 1 : 0);
}

void FemResponse::predict(std::span<const double> knots, std::span<double> out) const {
  if (knots.size() != knot_count_ || out.size() != observable_count()) {
    throw DimensionError("FemResponse::predict size mismatch");
  }
  const PressureField field(std::vector<double>(knots.begin(), knots.end()));
  const SolveResult result = solver_->solve(field);
  const auto conv = convergence(result, solver_->mesh(), baselines_);
  std::copy(conv.begin(), conv.end(), out.begin());
  if (force_angle_deg_) out[conv.size()] = hoop_force_at(result, solver_->mesh(), *force_angle_deg_);
}

LinearResponse::LinearResponse(Eigen::MatrixXd matrix) : matrix_(std::move(matrix)) {}

LinearResponse LinearResponse::tabulate(const ResponseModel& exact) {
  const std::size_t n = exact.knot_count();
  const std::size_t m = exact.observable_count();
  Eigen::MatrixXd g(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
  std::vector<double> unit(n, 0.0);
  std::vector<double> column(m);
  for (std::size_t k = 0; k < n; ++k) {
    unit[k] = 1.0;
    exact.predict(unit, column);
    unit[k] = 0.0;
    for (std::size_t r = 0; r < m; ++r) {
      g(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = column[r];
    }
  }
  return LinearResponse(std::move(g));
}

void LinearResponse::predict(std::span<const double> knots, std::span<double> out) const {
  if (knots.size() != knot_count() || out.size() != observable_count()) {
    throw DimensionError("LinearResponse::predict size mismatch");
  }
  const Eigen::Map<const Eigen::VectorXd> q(knots.data(), static_cast<Eigen::Index>(knots.size()));
  Eigen::Map<Eigen::VectorXd> y(out.data(), static_cast<Eigen::Index>(out.size()));
  y.noalias() = matrix_ * q;
}

Eigen::MatrixXd net_pressure_operator(const LiningSolver& solver, std::size_t knot_count) {
  const Mesh& mesh = solver.mesh();
  Eigen::MatrixXd op(mesh.node_count(), static_cast<Eigen::Index>(knot_count));
  std::vector<double> unit(knot_count, 0.0);
  for (std::size_t k = 0; k < knot_count; ++k) {
    unit[k] = 1.0;
    const PressureField field(unit);
    unit[k] = 0.0;
    const SolveResult result = solver.solve(field);
    const auto net = net_pressure(field, reaction_pressure(result, solver.model(), mesh), mesh);
    for (int node = 0; node < mesh.node_count(); ++node) {
      op(node, static_cast<Eigen::Index>(k)) = net[static_cast<std::size_t>(node)];
    }
  }
  return op;
}

Eigen::VectorXd LikelihoodSpec::data() const {
  const auto h = static_cast<Eigen::Index>(observations.size());
  Eigen::VectorXd d(h + (observations.force ? 1 : 0));
  for (Eigen::Index i = 0; i < h; ++i) d(i) = observations.readings_mm[static_cast<std::size_t>(i)];
  if (observations.force) d(h) = observations.force->value_kn;
  return d;
}

void LikelihoodSpec::validate() const {
  observations.validate();
  if (!forward) throw ConfigError("likelihood has no forward model");
  const std::size_t expected = observations.size() + (observations.force ? 1 : 0);
  if (forward->observable_count() != expected) {
    throw ConfigError("forward model predicts " + std::to_string(forward->observable_count()) +
                      " observables, observation set holds " + std::to_string(expected));
  }
}

double log_likelihood(std::span<const double> q, const LikelihoodSpec& spec) {
  const std::size_t h = spec.observations.size();
  const bool with_force = spec.observations.force.has_value();
  std::vector<double> predicted(h + (with_force ? 1 : 0));
  spec.forward->predict(q, predicted);

  const double two_pi = 2.0 * std::numbers::pi;
  const double var = spec.observations.sigma_mm * spec.observations.sigma_mm;
  double sse = 0.0;
  for (std::size_t i = 0; i < h; ++i) {
    const double e = spec.observations.readings_mm[i] - predicted[i];
    sse += e * e;
  }
  double value = -0.5 * static_cast<double>(h) * std::log(two_pi * var) - sse / (2.0 * var);
  if (with_force) {
    const auto& force = *spec.observations.force;
    const double var_n = force.sigma_kn * force.sigma_kn;
    const double e = predicted[h] - force.value_kn;
    value += -0.5 * std::log(two_pi * var_n) - e * e / (2.0 * var_n);
  }
  return value;
}

double log_posterior(std::span<const double> q, const PriorSpec& prior, const LikelihoodSpec& spec) {
  const double lp = log_prior(q, prior);
  if (lp == kLogZero) return kLogZero;
  return lp + log_likelihood(q, spec);
}

Posterior::Posterior(PriorSpec prior, std::optional<LikelihoodSpec> likelihood)
    : prior_(prior),
      likelihood_(std::move(likelihood)),
      evaluations_(std::make_shared<std::atomic<std::uint64_t>>(0)) {
  prior_.validate();
  if (likelihood_) {
    likelihood_->validate();
    if (likelihood_->forward->knot_count() != prior_.dimension) {
      throw ConfigError("forward model and prior disagree on the knot count");
    }
  }
}

double Posterior::operator()(std::span<const double> q) const {
  const double lp = log_prior(q, prior_);
  if (lp == kLogZero || !likelihood_) return lp;
  evaluations_->fetch_add(1, std::memory_order_relaxed);
  return lp + log_likelihood(q, *likelihood_);
}

}  // namespace earthpress
