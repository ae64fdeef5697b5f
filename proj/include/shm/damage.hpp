#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include "shm/beam_fem.hpp"
#include "shm/mlp.hpp"
#include "shm/sysid.hpp"

namespace shm::dmg {

inline constexpr int kFeatureModes = 4;
using Frequencies = std::array<double, kFeatureModes>;

/// Relative frequency drops (f_base - f_cur) / f_base of the first four modes.
struct FeatureVector {
  Frequencies rel_shifts{};

  bool is_zero() const;
};

FeatureVector extract_features(const Frequencies& baseline, const Frequencies& current);
FeatureVector extract_features(const fem::ModalData& baseline, const fem::ModalData& current);

/// First four frequencies of a modal solution.
Frequencies first_four(const fem::ModalData& modal);

/// Assigns identified modes to baseline modes greedily by smallest relative
/// distance; each baseline and each identified mode is used at most once.
/// Pairs further apart than max_rel_distance are left unmatched. Modes with
/// zeta >= prefer_zeta_below only fill baseline modes that no lighter mode
/// can. Throws InsufficientModes unless all four baseline modes are matched.
Frequencies match_modes(const Frequencies& baseline, const std::vector<sysid::ModeEstimate>& identified,
                        double max_rel_distance = 0.2,
                        double prefer_zeta_below = std::numeric_limits<double>::infinity());

enum class Pathway { Oracle, Identified };

/// Frequencies of one damage case; throws shm::Error when the case cannot
/// be evaluated (e.g. identification found too few modes).
using FrequencySource = std::function<Frequencies(const fem::DamageSpec&)>;

struct StudyRow {
  fem::DamageSpec spec;
  int replicate = 0;
  Frequencies freqs_hz{};
  FeatureVector features;
};

struct CaseFailure {
  int case_id = 0;
  std::string reason;
};

struct StudyDataset {
  Frequencies baseline_hz{};
  std::vector<StudyRow> rows;
  std::vector<CaseFailure> excluded;
};

/// Evaluates every case once (in parallel when workers != 1; results are
/// merged in case order), then emits `replicates` rows per case with the
/// frequencies perturbed by relative Gaussian noise drawn from
/// derive_seed(seed, {case_id, replicate, stream::frequency_noise}).
/// Features are taken against the unperturbed case-0 frequencies.
StudyDataset build_study_dataset(const std::vector<fem::DamageSpec>& cases, const FrequencySource& source,
                                 double noise_rel, int replicates, std::uint64_t seed, int workers = 1);

// Study CSV: case_id,severity,length_elements,start_element,f1_hz,f2_hz,f3_hz,f4_hz
void write_study_csv(const StudyDataset& data, std::ostream& out);
/// Rebuilds a dataset from the CSV; the baseline is the mean of the case-0 rows.
StudyDataset read_study_csv(std::istream& in);

inline constexpr std::array<int, 3> kHeads = {4, fem::kNumLocations, 2};
inline constexpr int kHeadOutputs = kHeads[0] + kHeads[1] + kHeads[2];

struct ClassifierModel {
  nn::Network net;  // [4, hidden..., 16] with linear output logits
  Eigen::VectorXd in_mean;
  Eigen::VectorXd in_std;
  std::uint64_t seed = 0;
  double noise_rel = 0.0;
  int replicates = 1;
};

struct ClassifierHyper {
  std::vector<int> hidden{16};
  double lr = 0.01;
  int epochs = 3000;
  std::uint64_t seed = 0;
  int workers = 1;
};

/// Labels of a study row; location/length are -1 on pristine rows.
struct Labels {
  int severity = 0;
  int location = -1;
  int length = -1;  // 0 for 1 element, 1 for 2 elements
};
Labels labels_of(const fem::DamageSpec& spec);

/// Per-head softmax cross-entropy, summed over heads. Location and length
/// terms are dropped on pristine rows.
class HeadsLoss : public nn::OutputLoss {
 public:
  explicit HeadsLoss(const std::vector<Labels>& labels) : labels_(labels) {}
  double eval(int row, const Eigen::VectorXd& out, Eigen::VectorXd& dout) const override;

 private:
  const std::vector<Labels>& labels_;
};

/// Untrained classifier with input standardization taken from the dataset.
ClassifierModel init_classifier(const StudyDataset& data, const ClassifierHyper& hyper);

struct ClassifierTraining {
  ClassifierModel model;
  std::vector<double> loss_history;
};

/// Full-batch Adam on HeadsLoss starting from `init`.
ClassifierTraining train_classifier(const ClassifierModel& init, const StudyDataset& data,
                                    const ClassifierHyper& hyper);
ClassifierTraining train_classifier(const StudyDataset& data, const ClassifierHyper& hyper);

struct DamageReport {
  int severity = 0;  // 0 = none
  std::array<double, 4> severity_conf{};
  int location = -1;  // location index 0..9, -1 when severity is none
  std::array<double, fem::kNumLocations> location_conf{};
  int length_elements = 0;  // 1 or 2, 0 when severity is none
  std::array<double, 2> length_conf{};

  int start_element() const { return location < 0 ? 0 : fem::kLocationStride * (location + 1); }
};

DamageReport classify(const ClassifierModel& model, const FeatureVector& features);

struct ClassifierMetrics {
  double severity_accuracy = 0.0;
  double detection_accuracy = 0.0;  // damaged vs pristine
  double location_accuracy = 0.0;   // over damaged rows
  double length_accuracy = 0.0;     // over damaged rows
  std::vector<std::vector<int>> severity_confusion;  // [true][predicted]
  std::vector<std::vector<int>> location_confusion;
  std::vector<std::vector<int>> length_confusion;
};

ClassifierMetrics evaluate(const ClassifierModel& model, const StudyDataset& data);

std::string format_confusion(const std::vector<std::vector<int>>& m, const std::string& title);

}  // namespace shm::dmg
