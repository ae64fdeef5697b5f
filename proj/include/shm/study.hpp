#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "shm/config.hpp"
#include "shm/damage.hpp"
#include "shm/sysid.hpp"
#include "shm/transient.hpp"

namespace shm::study {

/// Damaged FEM model of one case and its modes.
fem::ModalData case_modes(const cfg::RunConfig& config, const fem::DamageSpec& spec);

/// Response of one case under the configured excitation and sensors.
/// Excitation i of case c draws from derive_seed(seed, {c, stream::excitation, i}).
sim::TimeSeries simulate_case(const cfg::RunConfig& config, const fem::DamageSpec& spec, std::uint64_t seed);
/// Same, with explicit duration (the online demo splices several records).
sim::TimeSeries simulate_case(const cfg::RunConfig& config, const fem::DamageSpec& spec, std::uint64_t seed,
                              double duration_s);

/// AR identification options resolved from the config.
sysid::ArIdentifyOptions ar_options(const cfg::RunConfig& config);

/// Decimate, fit and extract modes from one channel (the first sensor by default).
sysid::ArIdentification identify_channel(const cfg::RunConfig& config, const sim::TimeSeries& series,
                                         const std::string& channel = "");

/// First four identified frequencies, matched against the pristine oracle modes.
dmg::Frequencies identified_frequencies(const cfg::RunConfig& config, const dmg::Frequencies& reference,
                                        const fem::DamageSpec& spec, std::uint64_t seed);

struct CaseRow {
  fem::DamageSpec spec;
  dmg::Frequencies oracle_hz{};
  std::optional<dmg::Frequencies> identified_hz;
  std::string failure;
  double max_rel_error = 0.0;  // identified vs oracle, when identified
};

struct StudyOptions {
  dmg::Pathway pathway = dmg::Pathway::Oracle;
  double noise_rel = 0.0;
  int replicates = 1;
  bool train = true;  // train and score a classifier on the dataset
  int workers = 1;
};

struct StudyReport {
  std::vector<CaseRow> cases;  // all 61, in case order
  dmg::StudyDataset dataset;   // rows of the chosen pathway
  std::optional<dmg::ClassifierMetrics> metrics;
  double agreement_tol = 0.0;  // 0.005 pluck, 0.02 random
  int agreeing_damaged = 0;    // damaged cases whose identified modes are within agreement_tol
  double oracle_seconds = 0.0, identified_seconds = 0.0, train_seconds = 0.0;
};

/// The 61-case study. Results do not depend on `workers`.
StudyReport run_study(const cfg::RunConfig& config, std::uint64_t seed, const StudyOptions& opts);

/// Human-readable summary of a report (includes timings, so not byte-stable).
std::string summarize(const StudyReport& report, dmg::Pathway pathway);

struct OnlineReport {
  int order = 0, stride = 1;
  double f1_pristine_oracle = 0.0;
  double f1_damaged_oracle = 0.0;
  double f1_frozen = 0.0;  // NaN when the mode was not found
  double f1_online = 0.0;
  double gap_closed = 0.0;  // (f1_frozen - f1_online) / (f1_frozen - f1_damaged_oracle)
  double stream_mse_frozen = 0.0, stream_mse_online = 0.0;      // post-switch samples of the stream
  double holdout_mse_frozen = 0.0, holdout_mse_online = 0.0;    // fresh damaged record
};

/// Fit on a pristine record, then stream pristine_s of pristine response
/// followed by damaged_s of the damaged case through NLMS updates.
OnlineReport run_online_demo(const cfg::RunConfig& config, std::uint64_t seed);

std::string summarize(const OnlineReport& report);

}  // namespace shm::study
