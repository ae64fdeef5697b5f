#pragma once

#include <Eigen/Dense>
#include <array>
#include <vector>

namespace shm::fem {

/// Clamped-free laminated beam, homogenized to a single bending stiffness.
/// Units are consistent (inches, rad/s, mass per inch).
struct BeamConfig {
  double length = 36.0;
  int n_elements = 36;
  int plies = 18;  // metadata only
  double omega1_target = 10.0;
  double mass_per_length = 1.0;
  int n_modes = 4;
  double damping_ratio = 0.005;

  int n_nodes() const { return n_elements + 1; }
  int free_dofs() const { return 2 * n_elements; }
  double element_length() const { return length / n_elements; }
  void validate() const;
};

/// (beta L)^2 of the first four clamped-free Euler-Bernoulli modes.
inline constexpr std::array<double, 4> kCantileverBetaL2 = {3.51602, 22.0345, 61.6972, 120.902};

/// Knockdown multipliers on EI, indexed by severity 0..3.
inline constexpr std::array<double, 4> kKnockdown = {1.0, 0.9, 0.75, 0.5};
inline constexpr int kNumLocations = 10;
inline constexpr int kLocationStride = 3;  // start elements 3, 6, ..., 30
inline constexpr int kNumCases = 61;

struct DamageSpec {
  int case_id = 0;
  int severity = 0;
  double knockdown_factor = 1.0;
  int length_elements = 0;
  int start_element = 0;  // 1-based; 0 for the pristine case

  int location_index() const { return severity == 0 ? -1 : start_element / kLocationStride - 1; }
  bool pristine() const { return severity == 0; }
  void validate(int n_elements) const;
};

DamageSpec pristine_case();
/// severity 1..3, length 1..2, location 0..9.
DamageSpec make_damage(int severity, int length_elements, int location_index);
DamageSpec damage_case(int case_id);
std::vector<DamageSpec> enumerate_damage_cases();

struct FemModel {
  Eigen::MatrixXd stiffness;
  Eigen::MatrixXd mass;
  std::vector<double> element_ei;
  double element_length = 0.0;
  double mass_per_length = 0.0;

  int n_elements() const { return static_cast<int>(element_ei.size()); }
  int n_nodes() const { return n_elements() + 1; }
  int free_dofs() const { return static_cast<int>(stiffness.rows()); }
};

/// Free-DOF index of the transverse displacement / rotation at a 1-based
/// node, or -1 for the clamped root node.
inline int dof_w(int node) { return node <= 1 ? -1 : 2 * (node - 2); }
inline int dof_theta(int node) { return node <= 1 ? -1 : 2 * (node - 2) + 1; }

struct ModalData {
  Eigen::VectorXd omegas;    // rad/s, ascending
  Eigen::VectorXd freqs_hz;  // omegas / 2 pi
  Eigen::VectorXd zetas;
  Eigen::MatrixXd shapes;       // free DOFs x modes, mass-normalized
  Eigen::MatrixXd mass_shapes;  // M * shapes; projects a physical state onto the modes
  double element_length = 0.0;

  int n_modes() const { return static_cast<int>(omegas.size()); }
};

/// Hermite cubic beam element, DOF order (w1, theta1, w2, theta2).
Eigen::Matrix4d element_stiffness(double ei, double h);
/// Consistent mass matrix for the same element.
Eigen::Matrix4d element_mass(double mass_per_length, double h);

/// EI giving the analytic clamped-free fundamental omega1_target.
double calibrate_bending_stiffness(const BeamConfig& cfg);

/// Closed-form uniform-cantilever frequencies (rad/s) for the first
/// kCantileverBetaL2.size() modes at the given EI.
std::vector<double> analytic_cantilever_omegas(const BeamConfig& cfg, double ei);

FemModel assemble_system(const BeamConfig& cfg, const std::vector<double>& ei_per_element);
FemModel pristine_model(const BeamConfig& cfg);
FemModel apply_damage(const FemModel& model, const DamageSpec& spec);

/// Lowest n_modes of K phi = omega^2 M phi. Shapes are M-orthonormal and
/// signed so the last free displacement DOF (the tip) is non-negative.
ModalData solve_modes(const FemModel& model, int n_modes, double zeta);

}  // namespace shm::fem
