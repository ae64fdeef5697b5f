#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "shm/beam_fem.hpp"

namespace shm::sim {

enum class ExcitationKind { Random, Pluck };

struct ExcitationSpec {
  ExcitationKind kind = ExcitationKind::Random;
  int node = 37;            // 1-based; the root node is clamped and rejected
  double amplitude = 1.0;   // force std-dev (random) or tip deflection (pluck)
  std::uint64_t seed = 0;
  // Random only: forcing applied before t = 0 so the record starts from
  // in-service (near-stationary) vibration instead of rest.
  double preroll_s = 60.0;

  void validate(int n_nodes) const;
};

struct PointForce {
  int node = 0;
  std::vector<double> preroll;  // applied before the first recorded sample
  std::vector<double> values;   // one zero-order-hold value per sample
};

/// Forcing plus optional initial condition over a fixed sample grid.
struct ForceSeries {
  double fs = 0.0;
  int n_samples = 0;
  std::vector<PointForce> forces;
  Eigen::VectorXd initial_displacement;  // free DOFs; empty means at rest
  int reference_dof = -1;                // DOF whose displacement the modal IC must reproduce

  int preroll_samples() const;
};

ForceSeries make_excitation(const ExcitationSpec& spec, const fem::FemModel& model, double fs,
                            double duration);
/// Superposes several excitations defined on the same sample grid.
ForceSeries combine(const std::vector<ForceSeries>& parts);

enum class SensorKind { Displacement, Strain };

struct SensorSpec {
  SensorKind kind = SensorKind::Displacement;
  int location = 37;  // node (displacement) or element (strain), 1-based
  double gauge_offset = 0.05;
  double noise_sigma = 0.0;

  void validate(int n_nodes) const;
  std::string channel_name() const;
  std::string describe() const;
};

struct TimeSeriesMeta {
  int case_id = -1;
  std::uint64_t seed = 0;
  std::vector<std::string> sensors;
};

struct TimeSeries {
  double fs = 1000.0;
  std::vector<std::string> names;
  std::vector<std::vector<double>> channels;
  TimeSeriesMeta meta;

  int n_samples() const { return channels.empty() ? 0 : static_cast<int>(channels.front().size()); }
  int channel_index(const std::string& name) const;  // -1 when missing
  const std::vector<double>& channel(const std::string& name) const;
  void validate() const;
};

/// Exact zero-order-hold propagator of q'' + 2 zeta w q' + w^2 q = g over dt:
/// [q, q']_{k+1} = phi [q, q']_k + gamma g_k.
struct SdofStep {
  Eigen::Matrix2d phi;
  Eigen::Vector2d gamma;
};
SdofStep sdof_propagator(double omega, double zeta, double dt);

/// Modal coordinates and velocities at each recorded sample (rows).
struct ModalTrajectory {
  Eigen::MatrixXd q;
  Eigen::MatrixXd qdot;
};
ModalTrajectory propagate_modes(const fem::ModalData& modal, const ForceSeries& force);

/// Sum of 0.5 (q'^2 + w^2 q^2) over modes at sample k.
double modal_energy(const fem::ModalData& modal, const ModalTrajectory& traj, int k);

/// Reads one sensor from a physical free-DOF state.
double readout_physical(const Eigen::VectorXd& u, const SensorSpec& sensor, double element_length);
/// Reads one sensor from modal coordinates q.
double sensor_readout(const fem::ModalData& modal, const Eigen::VectorXd& q, const SensorSpec& sensor);

struct SimulationContext {
  int case_id = -1;
  std::uint64_t master_seed = 0;
};

TimeSeries simulate_response(const fem::ModalData& modal, const ForceSeries& force,
                             const std::vector<SensorSpec>& sensors, double fs, double duration,
                             const SimulationContext& ctx = {});

void add_noise(std::vector<double>& values, double sigma, std::uint64_t seed);
/// Channel c receives noise from derive_seed(seed, {c}).
TimeSeries add_noise(const TimeSeries& series, double sigma, std::uint64_t seed);

int sample_count(double fs, double duration);

// CSV: '#'-prefixed metadata lines, then "t,<ch>,...", one row per sample.
void write_csv(const TimeSeries& series, std::ostream& out);
TimeSeries read_csv(std::istream& in);

}  // namespace shm::sim
