#pragma once

#include <string>

#include "shm/config.hpp"

namespace fixtures {

// Undamped free decay from a tip pluck, as in the mode-recovery checks.
inline shm::cfg::RunConfig pluck_config(double duration_s = 5.0) {
  shm::cfg::RunConfig c;
  c.master_seed = 1;
  c.beam.damping_ratio = 0.0;
  c.excitations = {shm::sim::ExcitationSpec{.kind = shm::sim::ExcitationKind::Pluck}};
  c.sampling.duration_s = duration_s;
  return c;
}

// Random tip forcing, lightly damped.
inline shm::cfg::RunConfig random_config(double duration_s = 20.0) {
  shm::cfg::RunConfig c;
  c.master_seed = 1;
  c.sampling.duration_s = duration_s;
  return c;
}

inline std::string tmp_path(const std::string& name) { return std::string(SHM_TEST_TMP) + "/" + name; }

}  // namespace fixtures
