#include "earthpress/fem.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "earthpress/errors.hpp"

namespace earthpress {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;
constexpr double kNodeAngleTolerance = 1e-9;

std::array<Eigen::Index, 6> element_dofs(const Mesh& mesh, int element) {
  const auto& [i, j] = mesh.connectivity[static_cast<std::size_t>(element)];
  return {3 * i, 3 * i + 1, 3 * i + 2, 3 * j, 3 * j + 1, 3 * j + 2};
}

Vector6 gather(const Eigen::VectorXd& global, const std::array<Eigen::Index, 6>& dofs) {
  Vector6 out;
  for (int a = 0; a < 6; ++a) out(a) = global(dofs[static_cast<std::size_t>(a)]);
  return out;
}

void check_element(const Mesh& mesh, int element) {
  if (element < 0 || element >= mesh.element_count) {
    throw LookupError("element index " + std::to_string(element) + " outside [0, " +
                      std::to_string(mesh.element_count) + ")");
  }
}

}  // namespace

LiningModel LiningModel::from_section(double diameter, double youngs_modulus, double thickness,
                                      double width, double rigidity_reduction,
                                      double foundation_stiffness, int element_count) {
  LiningModel model;
  model.diameter = diameter;
  model.axial_stiffness = youngs_modulus * thickness * width;
  model.bending_stiffness = youngs_modulus * width * thickness * thickness * thickness / 12.0;
  model.rigidity_reduction = rigidity_reduction;
  model.foundation_stiffness = foundation_stiffness;
  model.element_count = element_count;
  return model;
}

void LiningModel::validate() const {
  std::ostringstream problems;
  if (!(diameter > 0.0)) problems << " diameter must be positive;";
  if (!(axial_stiffness > 0.0)) problems << " EA must be positive;";
  if (!(bending_stiffness > 0.0)) problems << " EI must be positive;";
  if (!(rigidity_reduction > 0.0 && rigidity_reduction <= 1.0)) {
    problems << " rigidity reduction must lie in (0, 1];";
  }
  if (!(foundation_stiffness >= 0.0)) problems << " k_f must be non-negative;";
  if (!(joint_rotation_stiffness > 0.0)) problems << " joint rotation stiffness must be positive;";
  if (element_count < 8) problems << " element count must be at least 8;";
  if (element_count % 2 != 0) problems << " element count must be even;";
  const std::string text = problems.str();
  if (!text.empty()) throw ConfigError("invalid lining model:" + text);
}

std::optional<int> Mesh::node_at(double theta_deg) const {
  const double spacing = 360.0 / static_cast<double>(element_count);
  const double wrapped = wrap_degrees(theta_deg);
  const double position = wrapped / spacing;
  const double nearest = std::round(position);
  if (std::abs(position - nearest) * spacing > kNodeAngleTolerance &&
      std::abs(wrapped - 360.0) > kNodeAngleTolerance) {
    return std::nullopt;
  }
  return static_cast<int>(nearest) % element_count;
}

Eigen::Vector2d Mesh::inward_normal(int node) const {
  return -node_coordinates[static_cast<std::size_t>(node)] / radius;
}

Mesh build_mesh(const LiningModel& model) {
  if (model.element_count % 2 != 0) {
    throw ConfigError("element count must be even so that every baseline has two end nodes, got " +
                      std::to_string(model.element_count));
  }
  model.validate();

  Mesh mesh;
  const int n = model.element_count;
  mesh.element_count = n;
  mesh.radius = model.radius();
  mesh.element_length = model.diameter * std::sin(std::numbers::pi / static_cast<double>(n));
  mesh.node_angles_deg.resize(static_cast<std::size_t>(n));
  mesh.node_coordinates.resize(static_cast<std::size_t>(n));
  mesh.connectivity.resize(static_cast<std::size_t>(n));
  mesh.element_orientation.resize(static_cast<std::size_t>(n));
  mesh.jointed_node.assign(static_cast<std::size_t>(n), false);

  for (int k = 0; k < n; ++k) {
    const double theta = 360.0 * static_cast<double>(k) / static_cast<double>(n);
    const auto idx = static_cast<std::size_t>(k);
    mesh.node_angles_deg[idx] = theta;
    mesh.node_coordinates[idx] = mesh.radius * Eigen::Vector2d(-std::sin(theta * kDegToRad),
                                                               std::cos(theta * kDegToRad));
  }
  for (int e = 0; e < n; ++e) {
    const auto idx = static_cast<std::size_t>(e);
    const int j = (e + 1) % n;
    mesh.connectivity[idx] = {e, j};
    const Eigen::Vector2d chord =
        mesh.node_coordinates[static_cast<std::size_t>(j)] - mesh.node_coordinates[idx];
    mesh.element_orientation[idx] = std::atan2(chord.y(), chord.x());
  }
  for (const double joint : model.joint_angles_deg) {
    const auto node = mesh.node_at(joint);
    if (!node) {
      std::ostringstream msg;
      msg << "joint at " << joint << " deg does not coincide with a mesh node (node spacing "
          << 360.0 / n << " deg)";
      throw ConfigError(msg.str());
    }
    mesh.jointed_node[static_cast<std::size_t>(*node)] = true;
  }
  return mesh;
}

Matrix6 beam_stiffness(double ea, double ei, double length) {
  const double l = length;
  const double a = ea / l;
  const double b = 12.0 * ei / (l * l * l);
  const double c = 6.0 * ei / (l * l);
  const double d = 4.0 * ei / l;
  const double h = 2.0 * ei / l;
  Matrix6 k;
  // clang-format off
  k <<  a,  0,  0, -a,  0,  0,
        0,  b,  c,  0, -b,  c,
        0,  c,  d,  0, -c,  h,
       -a,  0,  0,  a,  0,  0,
        0, -b, -c,  0,  b, -c,
        0,  c,  h,  0, -c,  d;
  // clang-format on
  return k;
}

double joint_fixity(double bending_stiffness, double rotation_stiffness, double length) {
  if (std::isinf(rotation_stiffness)) return 1.0;
  return 1.0 / (1.0 + 3.0 * bending_stiffness / (rotation_stiffness * length));
}

Matrix6 joint_adjustment(double ri, double rj, double length) {
  // Beam end rotations phi solved from moment continuity across the springs;
  // translations pass through unchanged.
  const double l = length;
  const double den = 4.0 - ri * rj;
  Matrix6 a = Matrix6::Identity();
  const double sway_i = 2.0 * (1.0 - ri) * (2.0 + rj) / (l * den);
  const double sway_j = 2.0 * (1.0 - rj) * (2.0 + ri) / (l * den);
  a(2, 1) = -sway_i;
  a(2, 2) = ri * (4.0 - rj) / den;
  a(2, 4) = sway_i;
  a(2, 5) = -2.0 * (1.0 - ri) * rj / den;
  a(5, 1) = -sway_j;
  a(5, 2) = -2.0 * (1.0 - rj) * ri / den;
  a(5, 4) = sway_j;
  a(5, 5) = rj * (4.0 - ri) / den;
  return a;
}

Matrix6 element_beam_stiffness(const LiningModel& model, const Mesh& mesh, int element) {
  check_element(mesh, element);
  const double ei = model.effective_bending_stiffness();
  const double l = mesh.element_length;
  const Matrix6 kb = beam_stiffness(model.axial_stiffness, ei, l);
  const auto& [i, j] = mesh.connectivity[static_cast<std::size_t>(element)];
  const bool joint_i = mesh.jointed_node[static_cast<std::size_t>(i)];
  const bool joint_j = mesh.jointed_node[static_cast<std::size_t>(j)];
  if (!joint_i && !joint_j) return kb;
  const double fixity = joint_fixity(ei, model.joint_rotation_stiffness, l);
  const Matrix6 adjusted = kb * joint_adjustment(joint_i ? fixity : 1.0, joint_j ? fixity : 1.0, l);
  return 0.5 * (adjusted + adjusted.transpose());
}

Matrix6 element_foundation_stiffness(const LiningModel& model, const Mesh& mesh) {
  const double l = mesh.element_length;
  const double l2 = l * l;
  const double l3 = l2 * l;
  Matrix6 m;
  // clang-format off
  m << 0, 0,                  0,                   0, 0,                   0,
       0, 13.0 * l / 35.0,    11.0 * l2 / 210.0,   0, 9.0 * l / 70.0,     -13.0 * l2 / 420.0,
       0, 11.0 * l2 / 210.0,  l3 / 105.0,          0, 13.0 * l2 / 420.0,  -l3 / 140.0,
       0, 0,                  0,                   0, 0,                   0,
       0, 9.0 * l / 70.0,     13.0 * l2 / 420.0,   0, 13.0 * l / 35.0,    -11.0 * l2 / 210.0,
       0, -13.0 * l2 / 420.0, -l3 / 140.0,         0, -11.0 * l2 / 210.0,  l3 / 105.0;
  // clang-format on
  return model.foundation_stiffness * m;
}

Matrix6 transformation(double orientation) {
  const double c = std::cos(orientation);
  const double s = std::sin(orientation);
  Matrix6 t = Matrix6::Zero();
  t(0, 0) = c;
  t(0, 1) = -s;
  t(1, 0) = s;
  t(1, 1) = c;
  t(2, 2) = 1.0;
  t(3, 3) = c;
  t(3, 4) = -s;
  t(4, 3) = s;
  t(4, 4) = c;
  t(5, 5) = 1.0;
  return t;
}

Matrix6 transform_to_global(const Matrix6& local, double orientation) {
  const Matrix6 t = transformation(orientation);
  return t * local * t.transpose();
}

Vector6 transform_to_global(const Vector6& local, double orientation) {
  return transformation(orientation) * local;
}

Vector6 consistent_load(const PressureField& field, const LiningModel& /*model*/, const Mesh& mesh,
                        int element) {
  check_element(mesh, element);
  const double l = mesh.element_length;
  const double theta_i = mesh.node_angles_deg[static_cast<std::size_t>(element)];
  const double span_deg = 360.0 / static_cast<double>(mesh.element_count);
  const double theta_j = theta_i + span_deg;

  // Breakpoints in s: element ends plus interior knot angles.
  std::vector<double> breaks{0.0};
  const double h = field.spacing_deg();
  for (auto k = static_cast<long>(std::floor(theta_i / h)) + 1;; ++k) {
    const double knot = h * static_cast<double>(k);
    if (knot >= theta_j - 1e-12) break;
    if (knot > theta_i + 1e-12) breaks.push_back(l * (knot - theta_i) / span_deg);
  }
  breaks.push_back(l);

  std::array<double, 4> moments{};  // F_p0 .. F_p3 (width 1 m)
  for (std::size_t m = 0; m + 1 < breaks.size(); ++m) {
    const double sa = breaks[m];
    const double sb = breaks[m + 1];
    const double pa = field(theta_i + span_deg * sa / l);
    const double pb = field(theta_i + span_deg * sb / l);
    const double slope = (pb - pa) / (sb - sa);
    const double intercept = pa - slope * sa;
    double sa_pow = sa;  // s^(k+1)
    double sb_pow = sb;
    for (int k = 0; k < 4; ++k) {
      const double ka = static_cast<double>(k);
      const double sa_next = sa_pow * sa;
      const double sb_next = sb_pow * sb;
      moments[static_cast<std::size_t>(k)] += intercept * (sb_pow - sa_pow) / (ka + 1.0) +
                                              slope * (sb_next - sa_next) / (ka + 2.0);
      sa_pow = sa_next;
      sb_pow = sb_next;
    }
  }

  const double l2 = l * l;
  const double l3 = l2 * l;
  Matrix6 shape = Matrix6::Zero();
  shape(1, 1) = 1.0;
  shape(1, 4) = -3.0 / l2;
  shape(1, 5) = 2.0 / l3;
  shape(2, 2) = 1.0;
  shape(2, 4) = -2.0 / l;
  shape(2, 5) = 1.0 / l2;
  shape(4, 4) = 3.0 / l2;
  shape(4, 5) = -2.0 / l3;
  shape(5, 4) = -1.0 / l;
  shape(5, 5) = 1.0 / l2;
  Vector6 integrals;
  integrals << 0.0, moments[0], moments[1], 0.0, moments[2], moments[3];
  return shape * integrals;
}

Eigen::MatrixXd assemble_stiffness(const LiningModel& model, const Mesh& mesh) {
  const Eigen::Index n = mesh.dof_count();
  Eigen::MatrixXd k = Eigen::MatrixXd::Zero(n, n);
  const Matrix6 foundation = element_foundation_stiffness(model, mesh);
  for (int e = 0; e < mesh.element_count; ++e) {
    const Matrix6 local = element_beam_stiffness(model, mesh, e) + foundation;
    const Matrix6 global =
        transform_to_global(local, mesh.element_orientation[static_cast<std::size_t>(e)]);
    const auto dofs = element_dofs(mesh, e);
    for (int a = 0; a < 6; ++a) {
      for (int b = 0; b < 6; ++b) {
        k(dofs[static_cast<std::size_t>(a)], dofs[static_cast<std::size_t>(b)]) += global(a, b);
      }
    }
  }
  return k;
}

Eigen::VectorXd assemble_load(const PressureField& field, const LiningModel& model, const Mesh& mesh) {
  Eigen::VectorXd f = Eigen::VectorXd::Zero(mesh.dof_count());
  for (int e = 0; e < mesh.element_count; ++e) {
    const Vector6 global = transform_to_global(consistent_load(field, model, mesh, e),
                                               mesh.element_orientation[static_cast<std::size_t>(e)]);
    const auto dofs = element_dofs(mesh, e);
    for (int a = 0; a < 6; ++a) f(dofs[static_cast<std::size_t>(a)]) += global(a);
  }
  return f;
}

AssembledSystem assemble(const LiningModel& model, const Mesh& mesh, const PressureField& field) {
  return {assemble_stiffness(model, mesh), assemble_load(field, model, mesh)};
}

namespace {

using ExtendedVector = Eigen::Matrix<long double, Eigen::Dynamic, 1>;

#ifdef __SIZEOF_FLOAT128__
using Accumulator = __float128;
#else
using Accumulator = long double;
#endif

// f - K u with a wider accumulator than the factorization. The rigid
// rotation of the ring is held only by the chord offsets of the normal
// springs, so K is close to singular and a long double residual stalls
// near 1e-10 relative error.
ExtendedVector extended_residual(const Eigen::MatrixXd& k, const ExtendedVector& u, const Eigen::VectorXd& f) {
  ExtendedVector r(f.size());
  for (Eigen::Index i = 0; i < k.rows(); ++i) {
    Accumulator acc = f(i);
    for (Eigen::Index j = 0; j < k.cols(); ++j) {
      const double kij = k(i, j);
      if (kij != 0.0) acc -= static_cast<Accumulator>(kij) * static_cast<Accumulator>(u(j));
    }
    r(i) = static_cast<long double>(acc);
  }
  return r;
}

}  // namespace

LiningSolver::LiningSolver(LiningModel model) : model_(std::move(model)), mesh_(build_mesh(model_)) {
  stiffness_ = assemble_stiffness(model_, mesh_);
  const Matrix6 foundation = element_foundation_stiffness(model_, mesh_);
  local_stiffness_.reserve(static_cast<std::size_t>(mesh_.element_count));
  for (int e = 0; e < mesh_.element_count; ++e) {
    local_stiffness_.push_back(element_beam_stiffness(model_, mesh_, e) + foundation);
  }

  const int dofs = mesh_.dof_count();
  if (model_.foundation_stiffness > 0.0) {
    free_dofs_.resize(static_cast<std::size_t>(dofs));
    for (int d = 0; d < dofs; ++d) free_dofs_[static_cast<std::size_t>(d)] = d;
    factor_.compute(stiffness_.cast<long double>());
  } else {
    // Pin both translations at the crown and the tangential translation at
    // the invert; this removes exactly the three rigid-body modes.
    const int invert_ux = 3 * (mesh_.node_count() / 2);
    for (int d = 0; d < dofs; ++d) {
      if (d != 0 && d != 1 && d != invert_ux) free_dofs_.push_back(d);
    }
    const auto m = static_cast<Eigen::Index>(free_dofs_.size());
    Eigen::MatrixXd reduced(m, m);
    for (Eigen::Index a = 0; a < m; ++a) {
      for (Eigen::Index b = 0; b < m; ++b) {
        reduced(a, b) = stiffness_(free_dofs_[static_cast<std::size_t>(a)],
                                   free_dofs_[static_cast<std::size_t>(b)]);
      }
    }
    factor_.compute(reduced.cast<long double>());
  }
  if (factor_.info() != Eigen::Success) {
    throw SingularSystemError("lining stiffness matrix is not positive definite");
  }
}

Eigen::VectorXd LiningSolver::solve_vector(const Eigen::VectorXd& load) const {
  const Eigen::Index n = mesh_.dof_count();
  if (load.size() != n) {
    throw DimensionError("load vector has " + std::to_string(load.size()) + " entries, expected " +
                         std::to_string(n));
  }
  if (model_.foundation_stiffness > 0.0) {
    ExtendedVector u = factor_.solve(load.cast<long double>());
    for (int pass = 0; pass < 2; ++pass) u += factor_.solve(extended_residual(stiffness_, u, load));
    return u.cast<double>();
  }

  // Without springs the load must carry no net force or moment.
  double fx = 0.0, fy = 0.0, mz = 0.0, scale = 0.0;
  for (int k = 0; k < mesh_.node_count(); ++k) {
    const Eigen::Vector2d& p = mesh_.node_coordinates[static_cast<std::size_t>(k)];
    const double px = load(3 * k), py = load(3 * k + 1), m = load(3 * k + 2);
    fx += px;
    fy += py;
    mz += p.x() * py - p.y() * px + m;
    scale += std::abs(px) + std::abs(py) + std::abs(m) / mesh_.radius;
  }
  const double tolerance = 1e-9 * std::max(scale, 1e-300);
  if (std::abs(fx) > tolerance || std::abs(fy) > tolerance ||
      std::abs(mz) > tolerance * mesh_.radius) {
    throw SingularSystemError(
        "lining without soil springs (k_f = 0) cannot carry a load with a net force or moment; "
        "soil springs are required to counterbalance the asymmetric component of the pressure");
  }
  const auto m = static_cast<Eigen::Index>(free_dofs_.size());
  ExtendedVector reduced_load(m);
  for (Eigen::Index a = 0; a < m; ++a) reduced_load(a) = load(free_dofs_[static_cast<std::size_t>(a)]);
  ExtendedVector u = ExtendedVector::Zero(n);
  const auto scatter = [&](const ExtendedVector& reduced) {
    for (Eigen::Index a = 0; a < m; ++a) u(free_dofs_[static_cast<std::size_t>(a)]) += reduced(a);
  };
  scatter(factor_.solve(reduced_load));
  for (int pass = 0; pass < 2; ++pass) {
    const ExtendedVector r = extended_residual(stiffness_, u, load);
    for (Eigen::Index a = 0; a < m; ++a) reduced_load(a) = r(free_dofs_[static_cast<std::size_t>(a)]);
    scatter(factor_.solve(reduced_load));
  }
  return u.cast<double>();
}

SolveResult LiningSolver::solve_load(const Eigen::VectorXd& load, const PressureField* field) const {
  SolveResult result;
  result.load = load;
  result.displacements = solve_vector(load);
  const double load_norm = load.norm();
  result.relative_residual =
      load_norm > 0.0 ? static_cast<double>(extended_residual(stiffness_, result.displacements.cast<long double>(), load).norm()) / load_norm : 0.0;

  result.end_forces.reserve(static_cast<std::size_t>(mesh_.element_count));
  for (int e = 0; e < mesh_.element_count; ++e) {
    const double orientation = mesh_.element_orientation[static_cast<std::size_t>(e)];
    const Vector6 local_u =
        transformation(orientation).transpose() * gather(result.displacements, element_dofs(mesh_, e));
    Vector6 forces = local_stiffness_[static_cast<std::size_t>(e)] * local_u;
    if (field != nullptr) forces -= consistent_load(*field, model_, mesh_, e);
    result.end_forces.push_back(forces);
  }
  return result;
}

SolveResult LiningSolver::solve(const PressureField& field) const {
  return solve_load(assemble_load(field, model_, mesh_), &field);
}

SolveResult solve(const LiningModel& model, const Mesh& mesh, const PressureField& field) {
  LiningSolver solver(model);
  if (solver.mesh().element_count != mesh.element_count) {
    throw DimensionError("mesh does not belong to the lining model");
  }
  return solver.solve(field);
}

double hoop_force_at(const SolveResult& result, const Mesh& mesh, double theta_deg) {
  const auto node = mesh.node_at(theta_deg);
  if (!node) {
    std::ostringstream msg;
    msg << "no mesh node at " << theta_deg << " deg";
    throw LookupError(msg.str());
  }
  const int next = *node;
  const int prev = (next - 1 + mesh.element_count) % mesh.element_count;
  const double compression_next = result.end_forces[static_cast<std::size_t>(next)](0);
  const double compression_prev = -result.end_forces[static_cast<std::size_t>(prev)](3);
  return 0.5 * (compression_next + compression_prev);
}

std::vector<double> reaction_pressure(const SolveResult& result, const LiningModel& model,
                                      const Mesh& mesh) {
  std::vector<double> reaction(static_cast<std::size_t>(mesh.node_count()));
  for (int k = 0; k < mesh.node_count(); ++k) {
    const Eigen::Vector2d u(result.displacements(3 * k), result.displacements(3 * k + 1));
    reaction[static_cast<std::size_t>(k)] = model.foundation_stiffness * u.dot(mesh.inward_normal(k));
  }
  return reaction;
}

std::vector<double> net_pressure(const PressureField& total, std::span<const double> reaction,
                                 const Mesh& mesh) {
  if (reaction.size() != static_cast<std::size_t>(mesh.node_count())) {
    throw DimensionError("reaction must be sampled at every mesh node");
  }
  std::vector<double> net(reaction.size());
  for (std::size_t k = 0; k < net.size(); ++k) {
    net[k] = total(mesh.node_angles_deg[k]) - reaction[k];
  }
  return net;
}

}  // namespace earthpress
