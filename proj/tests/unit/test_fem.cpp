#include <gtest/gtest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include <Eigen/Eigenvalues>

#include "earthpress/errors.hpp"
#include "earthpress/fem.hpp"
#include "earthpress/response.hpp"
#include "generators.hpp"

namespace earthpress {
namespace {

using testing::Gen;
using testing::kPropertyCases;

constexpr double kPi = std::numbers::pi;

LiningModel reference_lining(int elements = 100, double kf = 1000.0) {
  return LiningModel::from_section(6.2, 3.5e7, 0.35, 1.0, 1.0, kf, elements);
}

LiningModel random_lining(Gen& gen) {
  LiningModel m = LiningModel::from_section(gen.real(3.0, 12.0), gen.real(1e7, 5e7), gen.real(0.2, 0.6), 1.0,
                                            gen.real(0.2, 1.0), gen.real(50.0, 5000.0),
                                            2 * static_cast<int>(gen.size(4, 40)));
  if (gen.coin()) {
    m.joint_rotation_stiffness = gen.real(1e3, 1e6);
    const double spacing = 360.0 / m.element_count;
    for (int j = 0; j < 4; ++j) m.joint_angles_deg.push_back(spacing * static_cast<double>(gen.size(0, m.element_count - 1)));
  }
  return m;
}

double relative_difference(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return (a - b).norm() / std::max(a.norm(), 1e-300);
}

// Mesh ----------------------------------------------------------------------

TEST(BuildMesh, ChordLengthReferenceMesh) {
  const Mesh mesh = build_mesh(reference_lining());
  EXPECT_NEAR(mesh.element_length, 0.19475, 5e-6);
  EXPECT_DOUBLE_EQ(mesh.element_length, 6.2 * std::sin(1.8 * kPi / 180.0));
  EXPECT_EQ(mesh.dof_count(), 300);
}

TEST(BuildMesh, SmallestMeshIsOctagon) {
  LiningModel m = reference_lining(8);
  m.diameter = 2.0;
  const Mesh mesh = build_mesh(m);
  ASSERT_EQ(mesh.node_count(), 8);
  for (int k = 0; k < 8; ++k) {
    EXPECT_DOUBLE_EQ(mesh.node_angles_deg[static_cast<std::size_t>(k)], 45.0 * k);
    EXPECT_NEAR(mesh.node_coordinates[static_cast<std::size_t>(k)].norm(), 1.0, 1e-15);
  }
  EXPECT_NEAR(mesh.element_length, 2.0 * std::sin(kPi / 8.0), 1e-15);
  EXPECT_EQ(mesh.connectivity.back()[0], 7);
  EXPECT_EQ(mesh.connectivity.back()[1], 0);
}

TEST(BuildMesh, FourElementRingViolatesMinimumCount) {
  LiningModel m = reference_lining(4);
  m.diameter = 2.0;
  EXPECT_THROW(build_mesh(m), ConfigError);
}

TEST(BuildMesh, OddElementCountRejected) { EXPECT_THROW(build_mesh(reference_lining(101)), ConfigError); }

TEST(BuildMesh, JointOffNodeRejected) {
  LiningModel m = reference_lining();
  m.joint_rotation_stiffness = 1e4;
  m.joint_angles_deg = {17.0};
  EXPECT_THROW(build_mesh(m), ConfigError);
  m.joint_angles_deg = {18.0};
  EXPECT_NO_THROW(build_mesh(m));
}

TEST(BuildMesh, InvalidModelRejected) {
  LiningModel m = reference_lining();
  m.rigidity_reduction = 0.0;
  EXPECT_THROW(build_mesh(m), ConfigError);
  m = reference_lining();
  m.foundation_stiffness = -1.0;
  EXPECT_THROW(build_mesh(m), ConfigError);
}

TEST(BuildMesh, NodesOnCircleAndEqualChords) {
  Gen gen(21);
  for (int c = 0; c < kPropertyCases; ++c) {
    const LiningModel m = random_lining(gen);
    const Mesh mesh = build_mesh(m);
    for (int e = 0; e < mesh.element_count; ++e) {
      const auto& [i, j] = mesh.connectivity[static_cast<std::size_t>(e)];
      EXPECT_NEAR(mesh.node_coordinates[static_cast<std::size_t>(i)].norm(), m.radius(), 1e-12 * m.radius());
      EXPECT_NEAR((mesh.node_coordinates[static_cast<std::size_t>(j)] - mesh.node_coordinates[static_cast<std::size_t>(i)]).norm(),
                  mesh.element_length, 1e-12 * m.radius());
    }
  }
}

// Element matrices ----------------------------------------------------------

TEST(ElementBeamStiffness, AxialEntryIsEaOverL) {
  const LiningModel m = reference_lining();
  const Mesh mesh = build_mesh(m);
  const Matrix6 k = element_beam_stiffness(m, mesh, 3);
  EXPECT_DOUBLE_EQ(k(0, 0), m.axial_stiffness / mesh.element_length);
}

TEST(ElementBeamStiffness, RigidJointLimitIsPlainBeam) {
  LiningModel m = reference_lining();
  m.joint_angles_deg = {0.0, 90.0};  // k_phi stays infinite
  const Mesh mesh = build_mesh(m);
  const Matrix6 plain = beam_stiffness(m.axial_stiffness, m.effective_bending_stiffness(), mesh.element_length);
  EXPECT_EQ(element_beam_stiffness(m, mesh, 0), plain);
  EXPECT_EQ(joint_adjustment(1.0, 1.0, mesh.element_length), Matrix6::Identity());
  m.joint_rotation_stiffness = 1e18;
  EXPECT_LT(relative_difference(element_beam_stiffness(m, build_mesh(m), 0), plain), 1e-9);
}

TEST(JointFixity, SpringEqualToThreeEiOverLHalvesFixity) {
  const double ei = 1.2505e5;
  const double l = 0.19477;
  EXPECT_DOUBLE_EQ(joint_fixity(ei, 3.0 * ei / l, l), 0.5);
  EXPECT_EQ(joint_fixity(ei, std::numeric_limits<double>::infinity(), l), 1.0);
}

// Oracle: a beam whose end rotations are extra DOFs tied to the nodes by
// rotational springs, condensed back to the six nodal DOFs. An infinite
// spring means the beam end is the node rotation itself.
Matrix6 condensed_spring_beam(double ea, double ei, double l, double ki, double kj) {
  const Matrix6 kb = beam_stiffness(ea, ei, l);
  const bool spring_i = std::isfinite(ki);
  const bool spring_j = std::isfinite(kj);
  const int extra = int{spring_i} + int{spring_j};
  // DOF order: u_i v_i th_i u_j v_j th_j, then the beam end rotations.
  std::array<int, 6> beam_dofs{0, 1, 2, 3, 4, 5};
  int next = 6;
  if (spring_i) beam_dofs[2] = next++;
  if (spring_j) beam_dofs[5] = next++;
  Eigen::MatrixXd k = Eigen::MatrixXd::Zero(6 + extra, 6 + extra);
  for (int a = 0; a < 6; ++a) {
    for (int b = 0; b < 6; ++b) k(beam_dofs[static_cast<std::size_t>(a)], beam_dofs[static_cast<std::size_t>(b)]) += kb(a, b);
  }
  const auto spring = [&](int node, int beam, double s) {
    k(node, node) += s;
    k(beam, beam) += s;
    k(node, beam) -= s;
    k(beam, node) -= s;
  };
  if (spring_i) spring(2, beam_dofs[2], ki);
  if (spring_j) spring(5, beam_dofs[5], kj);
  if (extra == 0) return kb;
  const Eigen::MatrixXd kaa = k.topLeftCorner(6, 6);
  const Eigen::MatrixXd kab = k.topRightCorner(6, extra);
  const Eigen::MatrixXd kbb = k.bottomRightCorner(extra, extra);
  return kaa - kab * kbb.inverse() * kab.transpose();
}

TEST(JointAdjustment, MatchesStaticCondensationOfEndSprings) {
  Gen gen(22);
  for (int c = 0; c < kPropertyCases; ++c) {
    const double ea = gen.real(1e6, 5e7);
    const double ei = gen.real(1e3, 5e5);
    const double l = gen.real(0.05, 1.5);
    const double ki = gen.real(0.1, 30.0) * ei / l;
    const double kj = gen.real(0.1, 30.0) * ei / l;
    const Matrix6 oracle = condensed_spring_beam(ea, ei, l, ki, kj);
    const Matrix6 adjusted =
        beam_stiffness(ea, ei, l) * joint_adjustment(joint_fixity(ei, ki, l), joint_fixity(ei, kj, l), l);
    EXPECT_LT(relative_difference(adjusted, oracle), 1e-10);
    EXPECT_LT(relative_difference(adjusted, adjusted.transpose()), 1e-10);
  }
}

TEST(ElementBeamStiffness, JointedEndsMatchCondensation) {
  LiningModel m = reference_lining();
  m.joint_rotation_stiffness = 1e4;
  m.joint_angles_deg = {0.0};
  const Mesh mesh = build_mesh(m);
  const double ei = m.effective_bending_stiffness();
  const double l = mesh.element_length;
  const double inf = std::numeric_limits<double>::infinity();
  // Element 0 starts at the joint; the last element ends there.
  EXPECT_LT(relative_difference(element_beam_stiffness(m, mesh, 0),
                                condensed_spring_beam(m.axial_stiffness, ei, l, 1e4, inf)), 1e-9);
  EXPECT_LT(relative_difference(element_beam_stiffness(m, mesh, mesh.element_count - 1),
                                condensed_spring_beam(m.axial_stiffness, ei, l, inf, 1e4)), 1e-9);
  EXPECT_EQ(element_beam_stiffness(m, mesh, 5), beam_stiffness(m.axial_stiffness, ei, l));
}

TEST(ElementFoundationStiffness, ZeroWithoutSprings) {
  const LiningModel m = reference_lining(100, 0.0);
  EXPECT_EQ(element_foundation_stiffness(m, build_mesh(m)), Matrix6::Zero());
}

TEST(ElementFoundationStiffness, TransverseDiagonalEntry) {
  const LiningModel m = reference_lining();
  const Mesh mesh = build_mesh(m);
  EXPECT_DOUBLE_EQ(element_foundation_stiffness(m, mesh)(1, 1), 1000.0 * 13.0 * mesh.element_length / 35.0);
}

TEST(ElementFoundationStiffness, SymmetricPositiveSemidefinite) {
  Gen gen(23);
  for (int c = 0; c < kPropertyCases; ++c) {
    const LiningModel m = random_lining(gen);
    const Matrix6 k = element_foundation_stiffness(m, build_mesh(m));
    EXPECT_EQ(k, k.transpose());
    const Eigen::SelfAdjointEigenSolver<Matrix6> eig(k);
    EXPECT_GE(eig.eigenvalues().minCoeff(), -1e-12 * eig.eigenvalues().maxCoeff());
  }
}

// Oracle: consistent stiffness as the integral of k_f N^T N over the element.
TEST(ElementFoundationStiffness, EqualsHermiteIntegral) {
  const LiningModel m = reference_lining();
  const double l = build_mesh(m).element_length;
  const std::array<double, 5> x{-0.9061798459386640, -0.5384693101056831, 0.0, 0.5384693101056831, 0.9061798459386640};
  const std::array<double, 5> w{0.2369268850561891, 0.4786286704993665, 0.5688888888888889, 0.4786286704993665, 0.2369268850561891};
  Matrix6 oracle = Matrix6::Zero();
  for (std::size_t g = 0; g < 5; ++g) {
    const double xi = 0.5 * (x[g] + 1.0);
    Vector6 n = Vector6::Zero();
    n(1) = 1 - 3 * xi * xi + 2 * xi * xi * xi;
    n(2) = l * (xi - 2 * xi * xi + xi * xi * xi);
    n(4) = 3 * xi * xi - 2 * xi * xi * xi;
    n(5) = l * (-xi * xi + xi * xi * xi);
    oracle += 0.5 * l * w[g] * m.foundation_stiffness * n * n.transpose();
  }
  EXPECT_LT(relative_difference(element_foundation_stiffness(m, build_mesh(m)), oracle), 1e-13);
}

// Transformation ------------------------------------------------------------

TEST(Transformation, ZeroAngleIsIdentity) {
  EXPECT_EQ(transformation(0.0), Matrix6::Identity());
  Gen gen(24);
  Matrix6 k = Matrix6::Random();
  EXPECT_EQ(transform_to_global(k, 0.0), k);
}

TEST(Transformation, QuarterTurnMapsAxialForceToGlobalY) {
  Vector6 f = Vector6::Zero();
  f(0) = 5.0;
  const Vector6 g = transform_to_global(f, kPi / 2.0);
  EXPECT_NEAR(g(0), 0.0, 1e-15);
  EXPECT_NEAR(g(1), 5.0, 1e-15);
}

TEST(Transformation, IsOrthogonal) {
  Gen gen(25);
  for (int c = 0; c < kPropertyCases; ++c) {
    const Matrix6 t = transformation(gen.real(-10.0, 10.0));
    EXPECT_LT((t * t.transpose() - Matrix6::Identity()).norm(), 1e-14);
  }
}

// Consistent load ----------------------------------------------------------

TEST(ConsistentLoad, ConstantPressureGivesFixedEndForces) {
  const LiningModel m = reference_lining();
  const Mesh mesh = build_mesh(m);
  const double p = 200.0;
  const double l = mesh.element_length;
  for (const int e : {0, 17, 99}) {
    const Vector6 f = consistent_load(PressureField::constant(22, p), m, mesh, e);
    const std::array<double, 6> expected{0.0, p * l / 2.0, p * l * l / 12.0, 0.0, p * l / 2.0, -p * l * l / 12.0};
    for (int a = 0; a < 6; ++a) {
      if (expected[static_cast<std::size_t>(a)] == 0.0) {
        EXPECT_EQ(f(a), 0.0);
      } else {
        EXPECT_NEAR(f(a), expected[static_cast<std::size_t>(a)], 1e-12 * std::abs(expected[static_cast<std::size_t>(a)]));
      }
    }
  }
}

TEST(ConsistentLoad, ZeroFieldGivesZeroVector) {
  const LiningModel m = reference_lining();
  const Mesh mesh = build_mesh(m);
  EXPECT_EQ(consistent_load(PressureField::constant(8, 0.0), m, mesh, 4), Vector6::Zero());
}

// Oracle: Gauss quadrature of the Hermite shape functions against q(theta(s)),
// with sub-intervals cut at every knot crossing.
Vector6 quadrature_load(const PressureField& field, const Mesh& mesh, int e) {
  const double l = mesh.element_length;
  const double t0 = 360.0 * e / mesh.element_count;
  const double span = 360.0 / mesh.element_count;
  std::vector<double> cuts{0.0, l};
  for (std::size_t k = 0; k <= field.size() * 2; ++k) {
    const double knot = field.spacing_deg() * static_cast<double>(k);
    if (knot > t0 && knot < t0 + span) cuts.push_back(l * (knot - t0) / span);
  }
  std::sort(cuts.begin(), cuts.end());
  const std::array<double, 3> x{-0.7745966692414834, 0.0, 0.7745966692414834};
  const std::array<double, 3> w{5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
  Vector6 out = Vector6::Zero();
  for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
    const double a = cuts[c], b = cuts[c + 1];
    for (std::size_t g = 0; g < 3; ++g) {
      const double s = 0.5 * (a + b) + 0.5 * (b - a) * x[g];
      const double xi = s / l;
      const double q = field(t0 + span * xi);
      const double wt = 0.5 * (b - a) * w[g] * q;
      out(1) += wt * (1 - 3 * xi * xi + 2 * xi * xi * xi);
      out(2) += wt * l * (xi - 2 * xi * xi + xi * xi * xi);
      out(4) += wt * (3 * xi * xi - 2 * xi * xi * xi);
      out(5) += wt * l * (-xi * xi + xi * xi * xi);
    }
  }
  return out;
}

TEST(ConsistentLoad, MatchesHermiteQuadratureOnRandomFields) {
  Gen gen(26);
  for (int c = 0; c < kPropertyCases; ++c) {
    LiningModel m = reference_lining(2 * static_cast<int>(gen.size(4, 60)));
    const Mesh mesh = build_mesh(m);
    const PressureField field(gen.vector(gen.size(2, 3 * static_cast<std::size_t>(m.element_count)), 0.0, 3000.0));
    for (int s = 0; s < 5; ++s) {
      const int e = static_cast<int>(gen.size(0, static_cast<std::size_t>(m.element_count - 1)));
      const Vector6 oracle = quadrature_load(field, mesh, e);
      EXPECT_LT((consistent_load(field, m, mesh, e) - oracle).norm(), 1e-11 * oracle.norm());
    }
  }
}

TEST(ConsistentLoad, Linear) {
  Gen gen(27);
  const LiningModel m = reference_lining(40);
  const Mesh mesh = build_mesh(m);
  for (int c = 0; c < kPropertyCases; ++c) {
    const std::size_t n = gen.size(2, 50);
    const auto q1 = gen.vector(n, 0.0, 3000.0);
    const auto q2 = gen.vector(n, 0.0, 3000.0);
    std::vector<double> sum(n);
    for (std::size_t k = 0; k < n; ++k) sum[k] = q1[k] + q2[k];
    const int e = static_cast<int>(gen.size(0, 39));
    const Vector6 lhs = consistent_load(PressureField(sum), m, mesh, e);
    const Vector6 rhs = consistent_load(PressureField(q1), m, mesh, e) + consistent_load(PressureField(q2), m, mesh, e);
    EXPECT_LT((lhs - rhs).norm(), 1e-12 * rhs.norm());
  }
}

// Assembly -----------------------------------------------------------------

TEST(Assemble, StiffnessSymmetric) {
  Gen gen(28);
  for (int c = 0; c < 20; ++c) {
    const LiningModel m = random_lining(gen);
    const Eigen::MatrixXd k = assemble_stiffness(m, build_mesh(m));
    EXPECT_LE((k - k.transpose()).cwiseAbs().maxCoeff(), 1e-9 * k.cwiseAbs().maxCoeff());
  }
}

TEST(Assemble, PositiveDefiniteWithSprings) {
  const LiningModel m = reference_lining(8);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(assemble_stiffness(m, build_mesh(m)));
  EXPECT_GT(eig.eigenvalues().minCoeff(), 0.0);
}

TEST(Assemble, WithoutSpringsHasThreeRigidModes) {
  const LiningModel m = reference_lining(8, 0.0);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(assemble_stiffness(m, build_mesh(m)));
  const double top = eig.eigenvalues().maxCoeff();
  int zero = 0;
  for (Eigen::Index i = 0; i < eig.eigenvalues().size(); ++i) zero += std::abs(eig.eigenvalues()(i)) < 1e-10 * top;
  EXPECT_EQ(zero, 3);
}

TEST(Assemble, SymmetricFieldHasNoNetForce) {
  const LiningModel m = reference_lining(64);
  const Mesh mesh = build_mesh(m);
  // Symmetric about both axes: q(theta) = a + b cos 2 theta.
  std::vector<double> knots(32);
  for (std::size_t k = 0; k < knots.size(); ++k) knots[k] = 500.0 + 200.0 * std::cos(2.0 * 2.0 * kPi * static_cast<double>(k) / 32.0);
  const Eigen::VectorXd f = assemble_load(PressureField(knots), m, mesh);
  double fx = 0.0, fy = 0.0, scale = 0.0;
  for (int k = 0; k < mesh.node_count(); ++k) {
    fx += f(3 * k);
    fy += f(3 * k + 1);
    scale += std::abs(f(3 * k)) + std::abs(f(3 * k + 1));
  }
  EXPECT_LT(std::abs(fx), 1e-12 * scale);
  EXPECT_LT(std::abs(fy), 1e-12 * scale);
}

// Solve --------------------------------------------------------------------

TEST(Solve, ThinRingDisplacementAndHoopForce) {
  const LiningModel m = reference_lining();
  const LiningSolver solver(m);
  const SolveResult r = solver.solve(PressureField::constant(22, 200.0));
  const double radius = 3.1;
  const double expected_u = 200.0 * radius * radius / (m.axial_stiffness + 1000.0 * radius * radius);
  EXPECT_NEAR(expected_u * 1000.0, 0.1568, 5e-5);
  const Mesh& mesh = solver.mesh();
  for (int k = 0; k < mesh.node_count(); ++k) {
    const Eigen::Vector2d u(r.displacements(3 * k), r.displacements(3 * k + 1));
    EXPECT_NEAR(u.dot(mesh.inward_normal(k)), expected_u, 5e-3 * expected_u);
  }
  for (int k = 0; k < mesh.node_count(); ++k) {
    const double n = hoop_force_at(r, mesh, mesh.node_angles_deg[static_cast<std::size_t>(k)]);
    EXPECT_NEAR(n, 620.0, 0.005 * 620.0);
  }
  EXPECT_LE(r.relative_residual, 1e-10);
}

TEST(Solve, ThinRingErrorShrinksWithRefinement) {
  double previous = std::numeric_limits<double>::infinity();
  for (const int n : {16, 32, 64, 128}) {
    const LiningModel m = reference_lining(n);
    const LiningSolver solver(m);
    const SolveResult r = solver.solve(PressureField::constant(8, 200.0));
    const double radius = 3.1;
    const double expected = 200.0 * radius * radius / (m.axial_stiffness + 1000.0 * radius * radius);
    const Eigen::Vector2d u(r.displacements(0), r.displacements(1));
    const double error = std::abs(u.dot(solver.mesh().inward_normal(0)) - expected) / expected;
    EXPECT_LT(error, previous);
    previous = error;
  }
}

TEST(Solve, UniformPressureHoopForceEqualAtEveryNode) {
  LiningModel m = reference_lining();
  m.joint_rotation_stiffness = 1e4;
  m.joint_angles_deg = {18.0, 90.0, 198.0};
  const LiningSolver solver(m);
  const SolveResult r = solver.solve(PressureField::constant(22, 200.0));
  const double crown = hoop_force_at(r, solver.mesh(), 0.0);
  for (const double theta : solver.mesh().node_angles_deg) EXPECT_NEAR(hoop_force_at(r, solver.mesh(), theta), crown, 1e-3 * crown);
}

TEST(Solve, ZeroPressureZeroDisplacement) {
  const LiningSolver solver(reference_lining());
  const SolveResult r = solver.solve(PressureField::constant(22, 0.0));
  EXPECT_EQ(r.displacements.norm(), 0.0);
  EXPECT_EQ(hoop_force_at(r, solver.mesh(), 0.0), 0.0);
}

TEST(Solve, EnergyConsistency) {
  Gen gen(29);
  for (int c = 0; c < 10; ++c) {
    const LiningModel m = random_lining(gen);
    const LiningSolver solver(m);
    const PressureField field(gen.vector(gen.size(2, 40), 0.0, 3000.0));
    const SolveResult r = solver.solve(field);
    const double ku = r.displacements.dot(solver.stiffness() * r.displacements);
    EXPECT_NEAR(ku, r.displacements.dot(r.load), 1e-9 * std::abs(ku));
    EXPECT_LE(r.relative_residual, 1e-10);
  }
}

TEST(Solve, Superposition) {
  Gen gen(30);
  for (int c = 0; c < 10; ++c) {
    const LiningModel m = random_lining(gen);
    const LiningSolver solver(m);
    const std::size_t n = gen.size(2, 40);
    const auto q1 = gen.vector(n, 0.0, 3000.0);
    const auto q2 = gen.vector(n, 0.0, 3000.0);
    std::vector<double> sum(n);
    for (std::size_t k = 0; k < n; ++k) sum[k] = q1[k] + q2[k];
    const auto u = solver.solve(PressureField(sum)).displacements;
    const Eigen::VectorXd u12 =
        solver.solve(PressureField(q1)).displacements + solver.solve(PressureField(q2)).displacements;
    EXPECT_LT((u - u12).norm(), 1e-9 * u12.norm());
  }
}

TEST(Solve, RotatingFieldByOneNodeRotatesDisplacements) {
  for (const std::size_t per_element : {1u, 3u}) {
    const LiningModel m = reference_lining(16);
    const LiningSolver solver(m);
    Gen gen(31 + per_element);
    const std::size_t n = 16 * per_element;
    const auto q = gen.vector(n, 0.0, 3000.0);
    std::vector<double> shifted(n);
    for (std::size_t k = 0; k < n; ++k) shifted[(k + per_element) % n] = q[k];
    const auto u = solver.solve(PressureField(q)).displacements;
    const auto v = solver.solve(PressureField(shifted)).displacements;
    const double delta = 2.0 * kPi / 16.0;
    const Eigen::Matrix2d rot = (Eigen::Matrix2d() << std::cos(delta), -std::sin(delta), std::sin(delta), std::cos(delta)).finished();
    for (int k = 0; k < 16; ++k) {
      const int next = (k + 1) % 16;
      const Eigen::Vector2d expected = rot * Eigen::Vector2d(u(3 * k), u(3 * k + 1));
      EXPECT_NEAR(v(3 * next), expected.x(), 1e-9 * u.norm());
      EXPECT_NEAR(v(3 * next + 1), expected.y(), 1e-9 * u.norm());
      EXPECT_NEAR(v(3 * next + 2), u(3 * k + 2), 1e-9 * u.norm());
    }
  }
}

TEST(Solve, SofterJointsNeverReduceMaximumConvergence) {
  std::vector<double> knots(36);
  for (std::size_t k = 0; k < knots.size(); ++k) {
    const double t = 2.0 * kPi * static_cast<double>(k) / 36.0;
    knots[k] = 1000.0 + 300.0 * std::cos(2.0 * t) + 80.0 * std::cos(4.0 * t - 0.7);
  }
  const PressureField field(knots);
  double previous = 0.0;
  for (const double k_phi : {1e9, 1e7, 1e6, 1e5, 3e4, 1e4, 3e3, 1e3}) {
    LiningModel m = reference_lining();
    m.joint_rotation_stiffness = k_phi;
    m.joint_angles_deg = {18.0, 75.6, 140.4, 198.0, 255.6, 320.4};
    const LiningSolver solver(m);
    const auto conv = convergence(solver.solve(field), solver.mesh(), all_baselines(solver.mesh()));
    double largest = 0.0;
    for (const double c : conv) largest = std::max(largest, std::abs(c));
    EXPECT_GE(largest, previous * (1.0 - 1e-12)) << "k_phi " << k_phi;
    previous = largest;
  }
}

TEST(Solve, NoSpringsAcceptsEquilibratedLoad) {
  const LiningSolver solver(reference_lining(100, 0.0));
  const SolveResult r = solver.solve(PressureField::constant(22, 200.0));
  EXPECT_NEAR(hoop_force_at(r, solver.mesh(), 90.0), 620.0, 0.005 * 620.0);
}

TEST(Solve, NoSpringsRejectsAsymmetricLoad) {
  const LiningSolver solver(reference_lining(100, 0.0));
  std::vector<double> knots(12);
  for (std::size_t k = 0; k < knots.size(); ++k) knots[k] = 500.0 + 200.0 * std::cos(2.0 * kPi * static_cast<double>(k) / 12.0);
  try {
    solver.solve(PressureField(knots));
    FAIL() << "expected SingularSystemError";
  } catch (const SingularSystemError& e) {
    EXPECT_NE(std::string(e.what()).find("soil springs"), std::string::npos);
  }
}

TEST(HoopForce, OffNodeAngleIsLookupError) {
  const LiningSolver solver(reference_lining());
  const SolveResult r = solver.solve(PressureField::constant(4, 100.0));
  EXPECT_THROW(hoop_force_at(r, solver.mesh(), 1.0), LookupError);
}

// Reaction and net pressure -------------------------------------------------

SolveResult uniform_inward(const Mesh& mesh, double u) {
  SolveResult r;
  r.displacements = Eigen::VectorXd::Zero(mesh.dof_count());
  for (int k = 0; k < mesh.node_count(); ++k) {
    const Eigen::Vector2d d = u * mesh.inward_normal(k);
    r.displacements(3 * k) = d.x();
    r.displacements(3 * k + 1) = d.y();
  }
  return r;
}

TEST(ReactionPressure, ZeroDisplacementZeroReaction) {
  const LiningModel m = reference_lining();
  const Mesh mesh = build_mesh(m);
  for (const double v : reaction_pressure(uniform_inward(mesh, 0.0), m, mesh)) EXPECT_EQ(v, 0.0);
}

TEST(ReactionPressure, UniformInwardDisplacementAndLinearInSpringStiffness) {
  LiningModel m = reference_lining();
  const Mesh mesh = build_mesh(m);
  const SolveResult r = uniform_inward(mesh, 2e-4);
  for (const double v : reaction_pressure(r, m, mesh)) EXPECT_NEAR(v, 1000.0 * 2e-4, 1e-15);
  const auto once = reaction_pressure(r, m, mesh);
  m.foundation_stiffness *= 2.0;
  const auto twice = reaction_pressure(r, m, mesh);
  for (std::size_t k = 0; k < once.size(); ++k) EXPECT_DOUBLE_EQ(twice[k], 2.0 * once[k]);
}

TEST(NetPressure, ZeroReactionGivesTotalAtNodes) {
  const LiningModel m = reference_lining(40);
  const Mesh mesh = build_mesh(m);
  const PressureField total({100.0, 300.0, 200.0, 50.0, 400.0});
  const auto net = net_pressure(total, std::vector<double>(40, 0.0), mesh);
  for (std::size_t k = 0; k < net.size(); ++k) EXPECT_DOUBLE_EQ(net[k], total(mesh.node_angles_deg[k]));
}

TEST(NetPressure, UniformCase) {
  const LiningModel m = reference_lining();
  const LiningSolver solver(m);
  const PressureField total = PressureField::constant(22, 200.0);
  const SolveResult r = solver.solve(total);
  const auto reaction = reaction_pressure(r, m, solver.mesh());
  const auto net = net_pressure(total, reaction, solver.mesh());
  for (std::size_t k = 0; k < net.size(); ++k) {
    EXPECT_NEAR(reaction[k], reaction[0], 1e-9 * reaction[0]);
    EXPECT_DOUBLE_EQ(net[k], 200.0 - reaction[k]);
  }
  EXPECT_THROW(net_pressure(total, std::vector<double>(3, 0.0), solver.mesh()), DimensionError);
}

// Bookkeeping: removing the springs and applying the load minus the spring
// forces on a minimally pinned ring reproduces the relative deformation.
TEST(NetPressure, ReappliedToSpringFreeRingReproducesConvergence) {
  LiningModel with = reference_lining(24);
  with.joint_rotation_stiffness = 1e4;
  with.joint_angles_deg = {15.0, 135.0, 240.0};
  LiningModel without = with;
  without.foundation_stiffness = 0.0;
  const LiningSolver sprung(with);
  const LiningSolver free(without);
  Gen gen(32);
  const PressureField field(gen.vector(12, 200.0, 1500.0));
  const SolveResult r = sprung.solve(field);
  const Eigen::MatrixXd springs = assemble_stiffness(with, sprung.mesh()) - assemble_stiffness(without, free.mesh());
  const Eigen::VectorXd net_load = r.load - springs * r.displacements;
  const SolveResult f = free.solve_load(net_load);
  const auto baselines = all_baselines(sprung.mesh());
  const auto a = convergence(r, sprung.mesh(), baselines);
  const auto b = convergence(f, free.mesh(), baselines);
  for (std::size_t k = 0; k < a.size(); ++k) EXPECT_NEAR(a[k], b[k], 1e-9 * std::abs(a[0]) + 1e-12);
}

}  // namespace
}  // namespace earthpress
