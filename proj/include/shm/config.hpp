#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "shm/beam_fem.hpp"
#include "shm/damage.hpp"
#include "shm/transient.hpp"

namespace shm::cfg {

struct SamplingConfig {
  double fs = 1000.0;
  double duration_s = 20.0;
};

enum class Method { Ar, Mlp };

struct SysidConfig {
  Method method = Method::Ar;
  int window = 0;  // MLP tapped delay; 0 takes window_size(fs, band_hz)
  int order = 0;   // AR order; 0 takes default_ar_order
  int stride = 0;  // AR decimation; 0 takes auto_stride(fs, band_hz)
  double band_hz = 54.4;
  double ridge_rel = 1e-12;
  std::vector<int> hidden{25, 25};
  double lr = 1e-3;
  double momentum = 0.9;
  int epochs = 100;
  int batch_size = 32;
};

struct ClassifierConfig {
  dmg::Pathway pathway = dmg::Pathway::Oracle;
  double noise_rel = 0.005;
  int replicates = 1;
  std::vector<int> hidden{16};
  double lr = 0.01;
  int epochs = 3000;
};

struct OnlineConfig {
  double lr = 0.02;
  double pristine_s = 5.0;
  double damaged_s = 20.0;
  int damaged_case = 41;  // severity 3, one element, start element 3
  // Report the mean of the NLMS iterates over this trailing fraction of the
  // damaged stream (0 reports the last iterate).
  double average_fraction = 0.5;
};

struct RunConfig {
  fem::BeamConfig beam;
  std::vector<sim::ExcitationSpec> excitations{sim::ExcitationSpec{}};
  SamplingConfig sampling;
  std::vector<sim::SensorSpec> sensors{sim::SensorSpec{}};
  SysidConfig sysid;
  ClassifierConfig classifier;
  OnlineConfig online;
  std::optional<std::uint64_t> master_seed;

  /// Throws InvalidInput naming the first inconsistent field.
  void validate() const;
  /// master_seed, or an InvalidInput error when none was given.
  std::uint64_t seed() const;
  bool random_excitation() const;
};

/// Parses a config document. Unknown keys are rejected so that typos do
/// not silently fall back to defaults.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);
std::string dump_config(const RunConfig& config);

}  // namespace shm::cfg
