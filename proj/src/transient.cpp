#include "shm/transient.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <set>

#include "shm/error.hpp"
#include "shm/seed.hpp"

namespace shm::sim {

void ExcitationSpec::validate(int n_nodes) const {
  require(node >= 2 && node <= n_nodes,
          "excitation: node must lie in 2.." + std::to_string(n_nodes) + " (node 1 is clamped), got " +
              std::to_string(node));
  require(amplitude > 0.0 && std::isfinite(amplitude), "excitation: amplitude must be > 0");
  require(preroll_s >= 0.0 && std::isfinite(preroll_s), "excitation: preroll_s must be >= 0");
}

int ForceSeries::preroll_samples() const {
  std::size_t p = 0;
  for (const auto& f : forces) p = std::max(p, f.preroll.size());
  return static_cast<int>(p);
}

int sample_count(double fs, double duration) {
  require(fs > 0.0 && std::isfinite(fs), "sampling: fs must be > 0");
  require(duration >= 0.0 && std::isfinite(duration), "sampling: duration must be >= 0");
  const double n = std::round(fs * duration);
  require(n >= 1.0, "sampling: duration * fs must be >= 1");
  require(n < 2e9, "sampling: too many samples");
  return static_cast<int>(n);
}

ForceSeries make_excitation(const ExcitationSpec& spec, const fem::FemModel& model, double fs,
                            double duration) {
  spec.validate(model.n_nodes());
  ForceSeries out;
  out.fs = fs;
  out.n_samples = sample_count(fs, duration);

  if (spec.kind == ExcitationKind::Random) {
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> normal(0.0, spec.amplitude);
    PointForce f;
    f.node = spec.node;
    const int pre = spec.preroll_s > 0.0 ? static_cast<int>(std::round(spec.preroll_s * fs)) : 0;
    f.preroll.resize(pre);
    for (auto& v : f.preroll) v = normal(rng);
    f.values.resize(out.n_samples);
    for (auto& v : f.values) v = normal(rng);
    out.forces.push_back(std::move(f));
    return out;
  }

  // Pluck: static deflection under a unit load at the node, scaled so the
  // loaded DOF is displaced by `amplitude`.
  const int dof = fem::dof_w(spec.node);
  Eigen::VectorXd load = Eigen::VectorXd::Zero(model.free_dofs());
  load(dof) = 1.0;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(model.stiffness);
  if (ldlt.info() != Eigen::Success)
    throw Error(ErrorKind::Numerical, "excitation: stiffness factorization failed");
  Eigen::VectorXd u = ldlt.solve(load);
  out.initial_displacement = u * (spec.amplitude / u(dof));
  out.reference_dof = dof;
  return out;
}

ForceSeries combine(const std::vector<ForceSeries>& parts) {
  require(!parts.empty(), "excitation: nothing to combine");
  ForceSeries out;
  out.fs = parts.front().fs;
  out.n_samples = parts.front().n_samples;
  for (const auto& p : parts) {
    require(p.fs == out.fs && p.n_samples == out.n_samples, "excitation: parts use different sample grids");
    out.forces.insert(out.forces.end(), p.forces.begin(), p.forces.end());
    if (p.initial_displacement.size() == 0) continue;
    require(out.initial_displacement.size() == 0, "excitation: at most one initial condition can be combined");
    out.initial_displacement = p.initial_displacement;
    out.reference_dof = p.reference_dof;
  }
  return out;
}

SdofStep sdof_propagator(double omega, double zeta, double dt) {
  if (!(omega > 0.0) || !std::isfinite(omega))
    throw Error(ErrorKind::Numerical, "sdof: natural frequency must be > 0");
  require(zeta >= 0.0 && zeta < 1.0, "sdof: zeta must lie in [0, 1)");
  require(dt > 0.0, "sdof: dt must be > 0");

  const double wd = omega * std::sqrt(1.0 - zeta * zeta);
  const double decay = zeta * omega * dt;
  const double e = std::exp(-decay);
  const double c = std::cos(wd * dt);
  const double s = std::sin(wd * dt);
  const double r = zeta * omega / wd;

  SdofStep st;
  st.phi << e * (c + r * s), e * s / wd,
            -omega * omega * e * s / wd, e * (c - r * s);
  // 1 - phi11 without cancellation: (1 - e) + e (1 - c) - e r s
  const double half = std::sin(0.5 * wd * dt);
  const double one_minus_phi11 = -std::expm1(-decay) + e * 2.0 * half * half - e * r * s;
  st.gamma << one_minus_phi11 / (omega * omega), e * s / wd;
  return st;
}

namespace {

Eigen::RowVectorXd readout_row(const fem::ModalData& modal, const SensorSpec& sensor) {
  const int m = modal.n_modes();
  Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(m);
  if (sensor.kind == SensorKind::Displacement) {
    const int dof = fem::dof_w(sensor.location);
    if (dof >= 0) row = modal.shapes.row(dof);
    return row;
  }
  // Midpoint curvature of a Hermite element is (theta2 - theta1) / h.
  const int d1 = fem::dof_theta(sensor.location);
  const int d2 = fem::dof_theta(sensor.location + 1);
  row = modal.shapes.row(d2);
  if (d1 >= 0) row -= modal.shapes.row(d1);
  return row * (-sensor.gauge_offset / modal.element_length);
}

int nodes_of(const fem::ModalData& modal) { return static_cast<int>(modal.shapes.rows()) / 2 + 1; }

}  // namespace

ModalTrajectory propagate_modes(const fem::ModalData& modal, const ForceSeries& force) {
  const int m = modal.n_modes();
  const int n = force.n_samples;
  require(m >= 1, "simulate: modal data is empty");
  require(force.fs > 0.0 && n >= 1, "simulate: empty force series");
  const double dt = 1.0 / force.fs;
  const int n_nodes = nodes_of(modal);

  std::vector<SdofStep> steps;
  steps.reserve(m);
  for (int i = 0; i < m; ++i) steps.push_back(sdof_propagator(modal.omegas(i), modal.zetas(i), dt));

  std::vector<Eigen::RowVectorXd> participation;
  for (const auto& f : force.forces) {
    require(f.node >= 2 && f.node <= n_nodes, "simulate: force node outside the free mesh");
    require(static_cast<int>(f.values.size()) == n, "simulate: force length does not match n_samples");
    for (double v : f.values) require(std::isfinite(v), "simulate: non-finite force sample");
    for (double v : f.preroll) require(std::isfinite(v), "simulate: non-finite force sample");
    participation.push_back(modal.shapes.row(fem::dof_w(f.node)));
  }

  Eigen::VectorXd q = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd qd = Eigen::VectorXd::Zero(m);
  if (force.initial_displacement.size() > 0) {
    require(force.initial_displacement.size() == modal.shapes.rows(),
            "simulate: initial condition has the wrong DOF count");
    q = modal.mass_shapes.transpose() * force.initial_displacement;
    if (force.reference_dof >= 0) {
      // Truncated modal sums lose part of the static shape; rescale so the
      // reference DOF still starts at the requested deflection.
      const double recon = modal.shapes.row(force.reference_dof).dot(q);
      if (!(std::abs(recon) > 0.0))
        throw Error(ErrorKind::Numerical, "simulate: retained modes do not observe the pluck DOF");
      q *= force.initial_displacement(force.reference_dof) / recon;
    }
  }

  auto advance = [&](const Eigen::VectorXd& g) {
    for (int i = 0; i < m; ++i) {
      const auto& st = steps[i];
      const double qn = st.phi(0, 0) * q(i) + st.phi(0, 1) * qd(i) + st.gamma(0) * g(i);
      const double qdn = st.phi(1, 0) * q(i) + st.phi(1, 1) * qd(i) + st.gamma(1) * g(i);
      q(i) = qn;
      qd(i) = qdn;
    }
  };

  Eigen::VectorXd g(m);
  const int pre = force.preroll_samples();
  for (int k = 0; k < pre; ++k) {
    g.setZero();
    for (std::size_t j = 0; j < force.forces.size(); ++j) {
      const auto& p = force.forces[j].preroll;
      const int offset = pre - static_cast<int>(p.size());
      if (k >= offset) g += participation[j].transpose() * p[k - offset];
    }
    advance(g);
  }

  ModalTrajectory traj;
  traj.q.resize(n, m);
  traj.qdot.resize(n, m);
  for (int k = 0; k < n; ++k) {
    traj.q.row(k) = q.transpose();
    traj.qdot.row(k) = qd.transpose();
    g.setZero();
    for (std::size_t j = 0; j < force.forces.size(); ++j)
      g += participation[j].transpose() * force.forces[j].values[k];
    advance(g);
  }
  return traj;
}

double modal_energy(const fem::ModalData& modal, const ModalTrajectory& traj, int k) {
  double e = 0.0;
  for (int i = 0; i < modal.n_modes(); ++i) {
    const double w = modal.omegas(i);
    e += 0.5 * (traj.qdot(k, i) * traj.qdot(k, i) + w * w * traj.q(k, i) * traj.q(k, i));
  }
  return e;
}

void SensorSpec::validate(int n_nodes) const {
  if (kind == SensorKind::Displacement) {
    require(location >= 1 && location <= n_nodes,
            "sensor: displacement node must lie in 1.." + std::to_string(n_nodes));
  } else {
    require(location >= 1 && location <= n_nodes - 1,
            "sensor: strain element must lie in 1.." + std::to_string(n_nodes - 1));
    require(gauge_offset > 0.0, "sensor: gauge_offset must be > 0 for strain");
  }
  require(noise_sigma >= 0.0 && std::isfinite(noise_sigma), "sensor: noise_sigma must be >= 0");
}

std::string SensorSpec::channel_name() const {
  return kind == SensorKind::Displacement ? "disp_n" + std::to_string(location)
                                          : "strain_e" + std::to_string(location);
}

std::string SensorSpec::describe() const {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%s kind=%s location=%d gauge_offset=%.17g noise_sigma=%.17g",
                channel_name().c_str(), kind == SensorKind::Displacement ? "displacement" : "strain",
                location, gauge_offset, noise_sigma);
  return buf;
}

double readout_physical(const Eigen::VectorXd& u, const SensorSpec& sensor, double element_length) {
  const int n_nodes = static_cast<int>(u.size()) / 2 + 1;
  sensor.validate(n_nodes);
  auto at = [&](int dof) { return dof < 0 ? 0.0 : u(dof); };
  if (sensor.kind == SensorKind::Displacement) return at(fem::dof_w(sensor.location));
  const double curvature =
      (at(fem::dof_theta(sensor.location + 1)) - at(fem::dof_theta(sensor.location))) / element_length;
  return -sensor.gauge_offset * curvature;
}

double sensor_readout(const fem::ModalData& modal, const Eigen::VectorXd& q, const SensorSpec& sensor) {
  sensor.validate(nodes_of(modal));
  require(q.size() == modal.n_modes(), "sensor: modal state has the wrong length");
  return readout_row(modal, sensor).dot(q);
}

TimeSeries simulate_response(const fem::ModalData& modal, const ForceSeries& force,
                             const std::vector<SensorSpec>& sensors, double fs, double duration,
                             const SimulationContext& ctx) {
  require(!sensors.empty(), "simulate: at least one sensor is required");
  require(fs == force.fs, "simulate: fs differs from the force series rate");
  require(sample_count(fs, duration) == force.n_samples, "simulate: duration differs from the force series");
  std::set<std::string> seen;
  for (const auto& s : sensors) {
    s.validate(nodes_of(modal));
    require(seen.insert(s.channel_name()).second, "simulate: duplicate sensor " + s.channel_name());
  }

  const ModalTrajectory traj = propagate_modes(modal, force);

  TimeSeries out;
  out.fs = fs;
  out.meta.case_id = ctx.case_id;
  out.meta.seed = ctx.master_seed;
  for (std::size_t c = 0; c < sensors.size(); ++c) {
    const Eigen::VectorXd values = traj.q * readout_row(modal, sensors[c]).transpose();
    std::vector<double> ch(values.data(), values.data() + values.size());
    if (sensors[c].noise_sigma > 0.0)
      add_noise(ch, sensors[c].noise_sigma,
                derive_seed(ctx.master_seed,
                            {static_cast<std::uint64_t>(ctx.case_id), c, stream::sensor_noise}));
    out.names.push_back(sensors[c].channel_name());
    out.channels.push_back(std::move(ch));
    out.meta.sensors.push_back(sensors[c].describe());
  }
  out.validate();
  return out;
}

void add_noise(std::vector<double>& values, double sigma, std::uint64_t seed) {
  require(sigma >= 0.0 && std::isfinite(sigma), "noise: sigma must be >= 0");
  if (sigma == 0.0) return;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, sigma);
  for (auto& v : values) v += normal(rng);
}

TimeSeries add_noise(const TimeSeries& series, double sigma, std::uint64_t seed) {
  TimeSeries out = series;
  for (std::size_t c = 0; c < out.channels.size(); ++c) add_noise(out.channels[c], sigma, derive_seed(seed, {c}));
  return out;
}

int TimeSeries::channel_index(const std::string& name) const {
  const auto it = std::find(names.begin(), names.end(), name);
  return it == names.end() ? -1 : static_cast<int>(it - names.begin());
}

const std::vector<double>& TimeSeries::channel(const std::string& name) const {
  const int i = channel_index(name);
  require(i >= 0, "time series: no channel named '" + name + "'");
  return channels[i];
}

void TimeSeries::validate() const {
  require(fs > 0.0 && std::isfinite(fs), "time series: fs must be > 0");
  require(names.size() == channels.size(), "time series: channel names and data disagree");
  for (const auto& ch : channels) {
    require(ch.size() == channels.front().size(), "time series: channels differ in length");
    for (double v : ch) require(std::isfinite(v), "time series: non-finite sample");
  }
}

}  // namespace shm::sim
