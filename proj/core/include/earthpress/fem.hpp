#pragma once

#include <array>
#include <cstddef>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "earthpress/pressure_field.hpp"

namespace earthpress {

using Matrix6 = Eigen::Matrix<double, 6, 6>;
using Vector6 = Eigen::Matrix<double, 6, 1>;

/// Jointed circular lining on normal soil springs (per metre of tunnel).
///
/// Units: m, kN, kPa. `bending_stiffness` is the section value before the
/// rigidity reduction; the model uses `rigidity_reduction * bending_stiffness`.
struct LiningModel {
  double diameter = 6.2;                 // m
  double axial_stiffness = 1.225e7;      // EA, kN
  double bending_stiffness = 1.2505e5;   // EI, kN m^2
  double rigidity_reduction = 1.0;       // eta in (0, 1]
  double joint_rotation_stiffness = std::numeric_limits<double>::infinity();  // k_phi, kN m/rad
  std::vector<double> joint_angles_deg;  // each must sit on a node
  double foundation_stiffness = 1000.0;  // k_f, kN/m^3
  int element_count = 100;               // N_e, even and >= 8

  /// Section properties of a rectangular ring of given thickness and width.
  static LiningModel from_section(double diameter, double youngs_modulus, double thickness,
                                  double width, double rigidity_reduction,
                                  double foundation_stiffness, int element_count);

  double radius() const noexcept { return 0.5 * diameter; }
  double effective_bending_stiffness() const noexcept { return rigidity_reduction * bending_stiffness; }

  /// Throws ConfigError on any violated invariant except joint placement,
  /// which is checked against the mesh in build_mesh.
  void validate() const;
};

/// Polygonal ring of straight chord elements.
///
/// Node k sits at theta_k = k * 360/N_e degrees from the crown. In the global
/// frame (X, Y) its position is R * (-sin theta, cos theta), so node numbers
/// advance counterclockwise; element e joins node e to node (e + 1) mod N_e.
/// Local element axes: x from node i to node j, y = inward normal.
struct Mesh {
  int element_count = 0;
  double radius = 0.0;
  double element_length = 0.0;
  std::vector<double> node_angles_deg;
  std::vector<Eigen::Vector2d> node_coordinates;
  std::vector<std::array<int, 2>> connectivity;
  std::vector<double> element_orientation;  // theta_e of the local x axis, radians
  std::vector<bool> jointed_node;

  int node_count() const noexcept { return element_count; }
  int dof_count() const noexcept { return 3 * element_count; }
  /// Node whose angle matches `theta_deg` within 1e-9 degrees.
  std::optional<int> node_at(double theta_deg) const;
  /// Unit inward normal at a node.
  Eigen::Vector2d inward_normal(int node) const;
};

Mesh build_mesh(const LiningModel& model);

/// Euler beam stiffness in local coordinates (u_i, v_i, rz_i, u_j, v_j, rz_j).
Matrix6 beam_stiffness(double axial_stiffness, double bending_stiffness, double length);

/// Fixity factor of a rotational end spring; 1 for a rigid connection.
double joint_fixity(double bending_stiffness, double rotation_stiffness, double length);

/// Correction A with k_b A the stiffness of a beam whose ends connect to the
/// nodes through rotational springs of fixity r_i, r_j. Rows map nodal DOFs
/// onto the beam's own end rotations; A is the identity for r_i = r_j = 1.
Matrix6 joint_adjustment(double fixity_i, double fixity_j, double length);

/// Local beam stiffness of element e, including joint springs at its ends.
Matrix6 element_beam_stiffness(const LiningModel& model, const Mesh& mesh, int element);

/// Consistent stiffness of the normal soil springs under one element.
Matrix6 element_foundation_stiffness(const LiningModel& model, const Mesh& mesh);

/// Coordinate transformation T (local to global).
Matrix6 transformation(double orientation);
Matrix6 transform_to_global(const Matrix6& local, double orientation);
Vector6 transform_to_global(const Vector6& local, double orientation);

/// Work-equivalent local nodal forces of the normal pressure on element e.
///
/// The polar angle is taken to vary linearly with the arc position s in
/// [0, L], so q(theta(s)) is piecewise linear in s with breaks at knot
/// angles and the moment integrals are evaluated exactly. The ring width is
/// 1 m, so kPa becomes kN/m.
Vector6 consistent_load(const PressureField& field, const LiningModel& model, const Mesh& mesh,
                        int element);

Eigen::MatrixXd assemble_stiffness(const LiningModel& model, const Mesh& mesh);
Eigen::VectorXd assemble_load(const PressureField& field, const LiningModel& model, const Mesh& mesh);

struct AssembledSystem {
  Eigen::MatrixXd stiffness;
  Eigen::VectorXd load;
};

AssembledSystem assemble(const LiningModel& model, const Mesh& mesh, const PressureField& field);

/// Global nodal displacements (ux, uy in m, rz in rad per node), element end
/// forces in local axes (N, V, M at node i then node j, acting on the element)
/// and the applied load vector.
struct SolveResult {
  Eigen::VectorXd displacements;
  std::vector<Vector6> end_forces;
  Eigen::VectorXd load;
  double relative_residual = 0.0;
};

/// Factorized lining system, reusable across load cases.
///
/// With k_f > 0 the stiffness is positive definite. With k_f = 0 only
/// self-equilibrated loads are accepted; they are solved with three pinned
/// DOFs that remove the rigid-body modes.
class LiningSolver {
 public:
  explicit LiningSolver(LiningModel model);

  const LiningModel& model() const noexcept { return model_; }
  const Mesh& mesh() const noexcept { return mesh_; }
  const Eigen::MatrixXd& stiffness() const noexcept { return stiffness_; }

  SolveResult solve(const PressureField& field) const;
  /// Solves for an arbitrary global load vector; element end forces are
  /// recovered against `field` (pass nullptr for nodal loads only).
  SolveResult solve_load(const Eigen::VectorXd& load, const PressureField* field = nullptr) const;

 private:
  Eigen::VectorXd solve_vector(const Eigen::VectorXd& load) const;

  LiningModel model_;
  Mesh mesh_;
  Eigen::MatrixXd stiffness_;
  std::vector<Matrix6> local_stiffness_;
  std::vector<int> free_dofs_;
  // Long double: the lining stiffness reaches condition numbers near 1e12.
  Eigen::LLT<Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>> factor_;
};

/// Assembles, factorizes and solves in one step.
SolveResult solve(const LiningModel& model, const Mesh& mesh, const PressureField& field);

/// Hoop force (compression positive, kN) at the node at `theta_deg`: the mean
/// of the axial forces of the two elements meeting there.
double hoop_force_at(const SolveResult& result, const Mesh& mesh, double theta_deg);

/// Spring reaction at each node, k_f times the inward displacement (kPa).
/// Positive values push outward, opposing inward pressure.
std::vector<double> reaction_pressure(const SolveResult& result, const LiningModel& model,
                                      const Mesh& mesh);

/// Pressure acting directly on the lining at each node: total - reaction.
std::vector<double> net_pressure(const PressureField& total, std::span<const double> reaction,
                                 const Mesh& mesh);

}  // namespace earthpress
