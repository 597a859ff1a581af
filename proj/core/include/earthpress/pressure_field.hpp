#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace earthpress {

/// Normalizes an angle in degrees to [0, 360).
double wrap_degrees(double theta_deg) noexcept;

/// Periodic piecewise-linear earth pressure q(theta) over the ring.
///
/// The n knots sit at evenly spaced angles k * 360/n degrees, k = 0..n-1,
/// with the first knot at the crown. Angles are measured from the crown and
/// are reduced modulo 360 before evaluation, so the segment between the last
/// knot and 360 degrees interpolates back towards the first knot.
/// Pressures are in kPa and positive inward.
class PressureField {
 public:
  /// Throws InvalidFieldError when fewer than two knots are given.
  explicit PressureField(std::vector<double> knots);

  static PressureField constant(std::size_t knot_count, double pressure_kpa);

  std::size_t size() const noexcept { return knots_.size(); }
  std::span<const double> knots() const noexcept { return knots_; }
  double spacing_deg() const noexcept { return 360.0 / static_cast<double>(knots_.size()); }
  double knot_angle_deg(std::size_t k) const noexcept { return spacing_deg() * static_cast<double>(k); }
  std::vector<double> knot_angles_deg() const;

  double operator()(double theta_deg) const noexcept;

 private:
  std::vector<double> knots_;
};

/// Bracketing knots of an angle and the weight carried by the upper knot.
struct InterpolationStencil {
  std::size_t lower = 0;
  std::size_t upper = 0;
  double upper_weight = 0.0;
};

/// Stencil of the interpolation operator I(theta) for n evenly spaced knots.
/// Throws InvalidFieldError for n < 2.
InterpolationStencil interpolation_stencil(std::size_t knot_count, double theta_deg);

double evaluate(const PressureField& field, double theta_deg);
std::vector<double> evaluate_many(const PressureField& field, std::span<const double> thetas_deg);

/// Dense operator whose row j maps a knot vector to q(thetas[j]).
Eigen::MatrixXd interpolation_matrix(std::size_t knot_count, std::span<const double> thetas_deg);

/// `count` angles evenly spaced over [0, 360), starting at 0.
std::vector<double> evenly_spaced_angles(std::size_t count);

}  // namespace earthpress
