#include "earthpress/pressure_field.hpp"

#include <cmath>
#include <string>

#include "earthpress/errors.hpp"

namespace earthpress {

namespace {

void require_knots(std::size_t n) {
  if (n < 2) {
    throw InvalidFieldError("pressure field needs at least 2 knots, got " + std::to_string(n));
  }
}

}  // namespace

double wrap_degrees(double theta_deg) noexcept {
  double wrapped = std::fmod(theta_deg, 360.0);
  if (wrapped < 0.0) wrapped += 360.0;
  // fmod of a tiny negative value can round back up to exactly 360.
  if (wrapped >= 360.0) wrapped = 0.0;
  return wrapped;
}

PressureField::PressureField(std::vector<double> knots) : knots_(std::move(knots)) {
  require_knots(knots_.size());
}

PressureField PressureField::constant(std::size_t knot_count, double pressure_kpa) {
  return PressureField(std::vector<double>(knot_count, pressure_kpa));
}

std::vector<double> PressureField::knot_angles_deg() const {
  std::vector<double> angles(knots_.size());
  for (std::size_t k = 0; k < knots_.size(); ++k) angles[k] = knot_angle_deg(k);
  return angles;
}

InterpolationStencil interpolation_stencil(std::size_t knot_count, double theta_deg) {
  require_knots(knot_count);
  const double n = static_cast<double>(knot_count);
  double position = wrap_degrees(theta_deg) * n / 360.0;
  // Snap onto a knot when round-off leaves us a hair short of it.
  const double nearest = std::round(position);
  if (std::abs(position - nearest) < 1e-11) position = nearest;
  auto lower = static_cast<std::size_t>(std::floor(position));
  double fraction = position - static_cast<double>(lower);
  if (lower >= knot_count) {
    lower = 0;
    fraction = 0.0;
  }
  return {lower, (lower + 1) % knot_count, fraction};
}

double PressureField::operator()(double theta_deg) const noexcept {
  const auto s = interpolation_stencil(knots_.size(), theta_deg);
  if (s.upper_weight == 0.0) return knots_[s.lower];
  return knots_[s.lower] + s.upper_weight * (knots_[s.upper] - knots_[s.lower]);
}

double evaluate(const PressureField& field, double theta_deg) { return field(theta_deg); }

std::vector<double> evaluate_many(const PressureField& field, std::span<const double> thetas_deg) {
  std::vector<double> out;
  out.reserve(thetas_deg.size());
  for (const double theta : thetas_deg) out.push_back(field(theta));
  return out;
}

Eigen::MatrixXd interpolation_matrix(std::size_t knot_count, std::span<const double> thetas_deg) {
  Eigen::MatrixXd op = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(thetas_deg.size()),
                                             static_cast<Eigen::Index>(knot_count));
  for (std::size_t j = 0; j < thetas_deg.size(); ++j) {
    const auto s = interpolation_stencil(knot_count, thetas_deg[j]);
    const auto row = static_cast<Eigen::Index>(j);
    op(row, static_cast<Eigen::Index>(s.lower)) += 1.0 - s.upper_weight;
    op(row, static_cast<Eigen::Index>(s.upper)) += s.upper_weight;
  }
  return op;
}

std::vector<double> evenly_spaced_angles(std::size_t count) {
  std::vector<double> angles(count);
  for (std::size_t j = 0; j < count; ++j) {
    angles[j] = 360.0 * static_cast<double>(j) / static_cast<double>(count);
  }
  return angles;
}

}  // namespace earthpress
