#include "shm/beam_fem.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "shm/error.hpp"

namespace shm::fem {

void BeamConfig::validate() const {
  require(n_elements >= 4, "beam: n_elements must be >= 4, got " + std::to_string(n_elements));
  require(length > 0.0 && std::isfinite(length), "beam: length must be positive");
  require(omega1_target > 0.0 && std::isfinite(omega1_target), "beam: omega1_target must be > 0");
  require(mass_per_length > 0.0 && std::isfinite(mass_per_length), "beam: mass_per_length must be > 0");
  require(damping_ratio >= 0.0 && damping_ratio < 1.0, "beam: damping_ratio must lie in [0, 1)");
  require(n_modes >= 1 && n_modes <= free_dofs(),
          "beam: n_modes must lie in [1, " + std::to_string(free_dofs()) + "]");
}

void DamageSpec::validate(int n_elements) const {
  require(case_id >= 0 && case_id < kNumCases, "damage: case_id out of range");
  require(severity >= 0 && severity <= 3, "damage: severity must be 0..3");
  require((case_id == 0) == (severity == 0), "damage: case 0 must be the only pristine case");
  if (severity == 0) return;
  require(length_elements == 1 || length_elements == 2, "damage: length must be 1 or 2 elements");
  require(start_element >= 1 && start_element + length_elements - 1 <= n_elements,
          "damage: span [" + std::to_string(start_element) + ", " +
              std::to_string(start_element + length_elements - 1) + "] outside 1.." +
              std::to_string(n_elements));
}

DamageSpec pristine_case() { return DamageSpec{}; }

DamageSpec make_damage(int severity, int length_elements, int location_index) {
  require(severity >= 1 && severity <= 3, "damage: severity must be 1..3");
  require(length_elements == 1 || length_elements == 2, "damage: length must be 1 or 2");
  require(location_index >= 0 && location_index < kNumLocations, "damage: location index must be 0..9");
  DamageSpec d;
  d.case_id = 1 + (severity - 1) * 20 + (length_elements - 1) * 10 + location_index;
  d.severity = severity;
  d.knockdown_factor = kKnockdown[severity];
  d.length_elements = length_elements;
  d.start_element = kLocationStride * (location_index + 1);
  return d;
}

DamageSpec damage_case(int case_id) {
  require(case_id >= 0 && case_id < kNumCases, "damage: case_id must be 0..60, got " + std::to_string(case_id));
  if (case_id == 0) return pristine_case();
  const int k = case_id - 1;
  return make_damage(1 + k / 20, 1 + (k % 20) / 10, k % 10);
}

std::vector<DamageSpec> enumerate_damage_cases() {
  std::vector<DamageSpec> out;
  out.reserve(kNumCases);
  for (int id = 0; id < kNumCases; ++id) out.push_back(damage_case(id));
  return out;
}

Eigen::Matrix4d element_stiffness(double ei, double h) {
  Eigen::Matrix4d k;
  const double h2 = h * h;
  k << 12, 6 * h, -12, 6 * h,
       6 * h, 4 * h2, -6 * h, 2 * h2,
       -12, -6 * h, 12, -6 * h,
       6 * h, 2 * h2, -6 * h, 4 * h2;
  return k * (ei / (h2 * h));
}

Eigen::Matrix4d element_mass(double mass_per_length, double h) {
  Eigen::Matrix4d m;
  const double h2 = h * h;
  m << 156, 22 * h, 54, -13 * h,
       22 * h, 4 * h2, 13 * h, -3 * h2,
       54, 13 * h, 156, -22 * h,
       -13 * h, -3 * h2, -22 * h, 4 * h2;
  return m * (mass_per_length * h / 420.0);
}

double calibrate_bending_stiffness(const BeamConfig& cfg) {
  cfg.validate();
  // omega1 = (beta L)_1^2 * sqrt(EI / (rhoA L^4))
  const double root = cfg.omega1_target * cfg.length * cfg.length / kCantileverBetaL2[0];
  return root * root * cfg.mass_per_length;
}

std::vector<double> analytic_cantilever_omegas(const BeamConfig& cfg, double ei) {
  const double scale = std::sqrt(ei / (cfg.mass_per_length * std::pow(cfg.length, 4)));
  std::vector<double> out;
  for (double b : kCantileverBetaL2) out.push_back(b * scale);
  return out;
}

FemModel assemble_system(const BeamConfig& cfg, const std::vector<double>& ei_per_element) {
  require(cfg.length > 0.0 && cfg.mass_per_length > 0.0 && cfg.n_elements >= 1,
          "assemble: invalid beam geometry");
  require(static_cast<int>(ei_per_element.size()) == cfg.n_elements,
          "assemble: expected " + std::to_string(cfg.n_elements) + " EI values, got " +
              std::to_string(ei_per_element.size()));
  for (std::size_t e = 0; e < ei_per_element.size(); ++e)
    require(ei_per_element[e] > 0.0 && std::isfinite(ei_per_element[e]),
            "assemble: EI of element " + std::to_string(e + 1) + " must be positive");

  const double h = cfg.element_length();
  const int full = 2 * (cfg.n_elements + 1);
  Eigen::MatrixXd k_full = Eigen::MatrixXd::Zero(full, full);
  Eigen::MatrixXd m_full = Eigen::MatrixXd::Zero(full, full);
  const Eigen::Matrix4d me = element_mass(cfg.mass_per_length, h);
  for (int e = 0; e < cfg.n_elements; ++e) {
    k_full.block<4, 4>(2 * e, 2 * e) += element_stiffness(ei_per_element[e], h);
    m_full.block<4, 4>(2 * e, 2 * e) += me;
  }

  // Clamp the root: drop w1 and theta1.
  const int n = full - 2;
  FemModel model;
  model.stiffness = k_full.bottomRightCorner(n, n);
  model.mass = m_full.bottomRightCorner(n, n);
  model.element_ei = ei_per_element;
  model.element_length = h;
  model.mass_per_length = cfg.mass_per_length;
  return model;
}

FemModel pristine_model(const BeamConfig& cfg) {
  const double ei = calibrate_bending_stiffness(cfg);
  return assemble_system(cfg, std::vector<double>(cfg.n_elements, ei));
}

FemModel apply_damage(const FemModel& model, const DamageSpec& spec) {
  spec.validate(model.n_elements());
  if (spec.pristine()) return model;
  std::vector<double> ei = model.element_ei;
  for (int e = spec.start_element; e < spec.start_element + spec.length_elements; ++e)
    ei[e - 1] *= spec.knockdown_factor;

  BeamConfig geom;
  geom.n_elements = model.n_elements();
  geom.length = model.element_length * model.n_elements();
  geom.mass_per_length = model.mass_per_length;
  FemModel out = assemble_system(geom, ei);
  // Keep the exact element length rather than length / n round trip.
  out.element_length = model.element_length;
  return out;
}

ModalData solve_modes(const FemModel& model, int n_modes, double zeta) {
  const int n = model.free_dofs();
  require(n_modes >= 1 && n_modes <= n, "solve_modes: n_modes must lie in [1, " + std::to_string(n) + "]");
  require(zeta >= 0.0 && zeta < 1.0, "solve_modes: zeta must lie in [0, 1)");

  Eigen::LLT<Eigen::MatrixXd> mass_llt(model.mass);
  if (mass_llt.info() != Eigen::Success)
    throw Error(ErrorKind::Numerical, "solve_modes: mass matrix is not positive definite");

  // Reciprocal problem M x = mu K x, mu = 1 / omega^2. The low modes are the
  // dominant ones here, so they come out accurate relative to themselves
  // rather than to the stiffest element mode.
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> solver(
      model.mass, model.stiffness, Eigen::ComputeEigenvectors | Eigen::Ax_lBx);
  if (solver.info() != Eigen::Success)
    throw Error(ErrorKind::Numerical, "solve_modes: generalized eigensolver failed (stiffness not positive definite?)");

  ModalData out;
  out.omegas.resize(n_modes);
  out.shapes.resize(n, n_modes);
  const int tip = n - 2;
  for (int i = 0; i < n_modes; ++i) {
    const double mu = solver.eigenvalues()(n - 1 - i);
    if (!(mu > 0.0))
      throw Error(ErrorKind::Numerical, "solve_modes: non-positive eigenvalue for mode " + std::to_string(i + 1));
    Eigen::VectorXd phi = solver.eigenvectors().col(n - 1 - i);
    phi /= std::sqrt(phi.dot(model.mass * phi));
    const double lambda = phi.dot(model.stiffness * phi);
    out.shapes.col(i) = phi;
    out.omegas(i) = std::sqrt(lambda);
    if (out.shapes(tip, i) < 0.0) out.shapes.col(i) *= -1.0;

    const Eigen::VectorXd k_phi = model.stiffness * out.shapes.col(i);
    const double resid = (k_phi - lambda * (model.mass * out.shapes.col(i))).norm();
    if (resid > 1e-8 * k_phi.norm())
      throw Error(ErrorKind::Numerical, "solve_modes: eigen residual too large for mode " + std::to_string(i + 1));
  }
  for (int i = 1; i < n_modes; ++i)
    if (!(out.omegas(i) > out.omegas(i - 1)))
      throw Error(ErrorKind::Numerical, "solve_modes: repeated eigenvalue");

  out.freqs_hz = out.omegas / (2.0 * std::numbers::pi);
  out.zetas = Eigen::VectorXd::Constant(n_modes, zeta);
  out.mass_shapes = model.mass * out.shapes;
  out.element_length = model.element_length;
  return out;
}

}  // namespace shm::fem
