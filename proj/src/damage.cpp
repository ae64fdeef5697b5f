#include "shm/damage.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>

#include "shm/error.hpp"
#include "shm/parallel.hpp"
#include "shm/seed.hpp"

namespace shm::dmg {

bool FeatureVector::is_zero() const {
  return std::all_of(rel_shifts.begin(), rel_shifts.end(), [](double v) { return v == 0.0; });
}

FeatureVector extract_features(const Frequencies& baseline, const Frequencies& current) {
  FeatureVector f;
  for (int i = 0; i < kFeatureModes; ++i) {
    require(baseline[i] > 0.0 && std::isfinite(baseline[i]), "features: baseline frequency must be > 0");
    require(std::isfinite(current[i]), "features: non-finite current frequency");
    f.rel_shifts[i] = (baseline[i] - current[i]) / baseline[i];
  }
  return f;
}

Frequencies first_four(const fem::ModalData& modal) {
  if (modal.n_modes() < kFeatureModes)
    throw Error(ErrorKind::InsufficientModes, "features: need 4 modes, got " + std::to_string(modal.n_modes()));
  Frequencies f;
  for (int i = 0; i < kFeatureModes; ++i) f[i] = modal.freqs_hz(i);
  return f;
}

FeatureVector extract_features(const fem::ModalData& baseline, const fem::ModalData& current) {
  return extract_features(first_four(baseline), first_four(current));
}

Frequencies match_modes(const Frequencies& baseline, const std::vector<sysid::ModeEstimate>& identified,
                        double max_rel_distance, double prefer_zeta_below) {
  struct Pair {
    bool heavy;
    double d;
    int base, id;
  };
  std::vector<Pair> pairs;
  for (int i = 0; i < kFeatureModes; ++i)
    for (int j = 0; j < static_cast<int>(identified.size()); ++j) {
      const double d = std::abs(identified[j].freq_hz - baseline[i]) / baseline[i];
      if (d <= max_rel_distance) pairs.push_back({!(identified[j].zeta < prefer_zeta_below), d, i, j});
    }
  std::stable_sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
    return a.heavy != b.heavy ? !a.heavy : a.d < b.d;
  });

  std::array<int, kFeatureModes> match;
  match.fill(-1);
  std::vector<bool> used(identified.size(), false);
  int matched = 0;
  for (const auto& p : pairs) {
    if (match[p.base] >= 0 || used[p.id]) continue;
    match[p.base] = p.id;
    used[p.id] = true;
    ++matched;
  }
  if (matched < kFeatureModes) {
    std::string missing;
    for (int i = 0; i < kFeatureModes; ++i)
      if (match[i] < 0) missing += (missing.empty() ? "" : ",") + std::to_string(i + 1);
    throw Error(ErrorKind::InsufficientModes,
                "features: matched " + std::to_string(matched) + " of 4 modes (unmatched: " + missing + ")");
  }
  Frequencies out;
  for (int i = 0; i < kFeatureModes; ++i) out[i] = identified[match[i]].freq_hz;
  return out;
}

StudyDataset build_study_dataset(const std::vector<fem::DamageSpec>& cases, const FrequencySource& source,
                                 double noise_rel, int replicates, std::uint64_t seed, int workers) {
  require(replicates >= 1, "study: replicates must be >= 1");
  require(noise_rel >= 0.0 && std::isfinite(noise_rel), "study: noise must be >= 0");
  require(!cases.empty(), "study: no cases");

  struct Outcome {
    std::optional<Frequencies> freqs;
    std::string error;
  };
  auto evaluate_case = [&](int i) {
    Outcome o;
    try {
      o.freqs = source(cases[i]);
    } catch (const Error& e) {
      o.error = e.what();
    }
    return o;
  };
  const auto outcomes = par::parallel_map(static_cast<int>(cases.size()), workers, evaluate_case);

  StudyDataset data;
  std::optional<Frequencies> baseline;
  for (std::size_t i = 0; i < cases.size(); ++i)
    if (cases[i].pristine()) {
      if (!outcomes[i].freqs) throw Error(ErrorKind::InsufficientModes, "study: baseline case failed: " + outcomes[i].error);
      baseline = outcomes[i].freqs;
      break;
    }
  if (!baseline) baseline = source(fem::pristine_case());
  data.baseline_hz = *baseline;

  for (std::size_t i = 0; i < cases.size(); ++i) {
    const auto& spec = cases[i];
    if (!outcomes[i].freqs) {
      data.excluded.push_back({spec.case_id, outcomes[i].error});
      continue;
    }
    for (int r = 0; r < replicates; ++r) {
      StudyRow row;
      row.spec = spec;
      row.replicate = r;
      row.freqs_hz = *outcomes[i].freqs;
      if (noise_rel > 0.0) {
        std::mt19937_64 rng(derive_seed(
            seed, {static_cast<std::uint64_t>(spec.case_id), static_cast<std::uint64_t>(r), stream::frequency_noise}));
        std::normal_distribution<double> normal(0.0, noise_rel);
        for (auto& f : row.freqs_hz) f *= 1.0 + normal(rng);
      }
      row.features = extract_features(data.baseline_hz, row.freqs_hz);
      data.rows.push_back(row);
    }
  }
  return data;
}

void write_study_csv(const StudyDataset& data, std::ostream& out) {
  out << "case_id,severity,length_elements,start_element,f1_hz,f2_hz,f3_hz,f4_hz\n";
  char buf[64];
  for (const auto& r : data.rows) {
    out << r.spec.case_id << ',' << r.spec.severity << ',' << r.spec.length_elements << ','
        << r.spec.start_element;
    for (double f : r.freqs_hz) {
      std::snprintf(buf, sizeof buf, ",%.17g", f);
      out << buf;
    }
    out << '\n';
  }
}

StudyDataset read_study_csv(std::istream& in) {
  auto malformed = [](const std::string& w) { return Error(ErrorKind::MalformedFile, "study csv: " + w); };
  std::string line;
  if (!std::getline(in, line)) throw malformed("empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "case_id,severity,length_elements,start_element,f1_hz,f2_hz,f3_hz,f4_hz")
    throw malformed("unexpected header '" + line + "'");

  StudyDataset data;
  std::map<int, int> replicate_count;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 8) throw malformed("line " + std::to_string(line_no) + ": expected 8 fields");
    StudyRow row;
    try {
      row.spec = fem::damage_case(std::stoi(cells[0]));
      for (int i = 0; i < kFeatureModes; ++i) row.freqs_hz[i] = std::stod(cells[4 + i]);
    } catch (const std::logic_error&) {
      throw malformed("line " + std::to_string(line_no) + ": bad number");
    } catch (const Error& e) {
      throw malformed("line " + std::to_string(line_no) + ": " + e.what());
    }
    if (std::stoi(cells[1]) != row.spec.severity || std::stoi(cells[2]) != row.spec.length_elements ||
        std::stoi(cells[3]) != row.spec.start_element)
      throw malformed("line " + std::to_string(line_no) + ": labels disagree with case_id");
    row.replicate = replicate_count[row.spec.case_id]++;
    data.rows.push_back(row);
  }

  Frequencies base{};
  int n_base = 0;
  for (const auto& r : data.rows)
    if (r.spec.pristine()) {
      for (int i = 0; i < kFeatureModes; ++i) base[i] += r.freqs_hz[i];
      ++n_base;
    }
  if (n_base == 0) throw malformed("no case-0 rows to take the baseline from");
  for (auto& b : base) b /= n_base;
  data.baseline_hz = base;
  for (auto& r : data.rows) r.features = extract_features(base, r.freqs_hz);
  return data;
}

Labels labels_of(const fem::DamageSpec& spec) {
  Labels l;
  l.severity = spec.severity;
  if (!spec.pristine()) {
    l.location = spec.location_index();
    l.length = spec.length_elements - 1;
  }
  return l;
}

namespace {

constexpr int kSevOffset = 0;
constexpr int kLocOffset = kHeads[0];
constexpr int kLenOffset = kHeads[0] + kHeads[1];

// Numerically stable softmax of out[offset, offset + size).
Eigen::VectorXd softmax(const Eigen::VectorXd& out, int offset, int size) {
  Eigen::VectorXd z = out.segment(offset, size);
  z = (z.array() - z.maxCoeff()).exp();
  return z / z.sum();
}

template <std::size_t N>
int fill_head(const Eigen::VectorXd& logits, int offset, std::array<double, N>& conf) {
  const Eigen::VectorXd p = softmax(logits, offset, static_cast<int>(N));
  int best = 0;
  for (std::size_t i = 0; i < N; ++i) {
    conf[i] = p(i);
    if (logits(offset + i) > logits(offset + best)) best = static_cast<int>(i);
  }
  return best;
}

Eigen::MatrixXd feature_matrix(const StudyDataset& data) {
  Eigen::MatrixXd x(data.rows.size(), kFeatureModes);
  for (std::size_t r = 0; r < data.rows.size(); ++r)
    for (int i = 0; i < kFeatureModes; ++i) x(r, i) = data.rows[r].features.rel_shifts[i];
  return x;
}

Eigen::VectorXd standardize(const ClassifierModel& m, const FeatureVector& f) {
  Eigen::VectorXd x(kFeatureModes);
  for (int i = 0; i < kFeatureModes; ++i) x(i) = (f.rel_shifts[i] - m.in_mean(i)) / m.in_std(i);
  return x;
}

}  // namespace

double HeadsLoss::eval(int row, const Eigen::VectorXd& out, Eigen::VectorXd& dout) const {
  const Labels& lab = labels_[row];
  dout = Eigen::VectorXd::Zero(out.size());
  double loss = 0.0;
  auto head = [&](int offset, int size, int target) {
    const Eigen::VectorXd p = softmax(out, offset, size);
    loss -= std::log(std::max(p(target), 1e-300));
    dout.segment(offset, size) = p;
    dout(offset + target) -= 1.0;
  };
  head(kSevOffset, kHeads[0], lab.severity);
  if (lab.severity > 0) {
    head(kLocOffset, kHeads[1], lab.location);
    head(kLenOffset, kHeads[2], lab.length);
  }
  return loss;
}

ClassifierModel init_classifier(const StudyDataset& data, const ClassifierHyper& hyper) {
  require(!data.rows.empty(), "classifier: empty dataset");
  std::vector<int> sizes{kFeatureModes};
  sizes.insert(sizes.end(), hyper.hidden.begin(), hyper.hidden.end());
  sizes.push_back(kHeadOutputs);

  ClassifierModel m;
  m.net = nn::init_network(sizes, derive_seed(hyper.seed, {stream::init}));
  const Eigen::MatrixXd x = feature_matrix(data);
  m.in_mean = x.colwise().mean().transpose();
  m.in_std.resize(kFeatureModes);
  for (int i = 0; i < kFeatureModes; ++i) {
    const double s = std::sqrt((x.col(i).array() - m.in_mean(i)).square().mean());
    m.in_std(i) = s > 0.0 ? s : 1.0;
  }
  m.seed = hyper.seed;
  return m;
}

ClassifierTraining train_classifier(const ClassifierModel& init, const StudyDataset& data,
                                    const ClassifierHyper& hyper) {
  require(!data.rows.empty(), "classifier: empty dataset");
  require(hyper.lr > 0.0 && hyper.epochs >= 0, "classifier: bad lr / epochs");
  std::vector<int> present(kHeads[0], 0);
  for (const auto& r : data.rows) present[r.spec.severity] = 1;
  require(std::accumulate(present.begin(), present.end(), 0) >= 2,
          "classifier: dataset must cover at least 2 severity classes");
  init.net.validate();
  require(init.net.n_inputs() == kFeatureModes && init.net.n_outputs() == kHeadOutputs,
          "classifier: network shape does not match the heads");

  const int n = static_cast<int>(data.rows.size());
  Eigen::MatrixXd xs(n, kFeatureModes);
  std::vector<Labels> labels;
  labels.reserve(n);
  for (int r = 0; r < n; ++r) {
    xs.row(r) = standardize(init, data.rows[r].features).transpose();
    labels.push_back(labels_of(data.rows[r].spec));
  }
  const HeadsLoss loss(labels);
  std::vector<int> rows(n);
  std::iota(rows.begin(), rows.end(), 0);

  ClassifierTraining res{init, {}};
  Eigen::VectorXd theta = nn::flatten(res.model.net);
  Eigen::VectorXd m1 = Eigen::VectorXd::Zero(theta.size());
  Eigen::VectorXd m2 = Eigen::VectorXd::Zero(theta.size());
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  double initial = -1.0;
  for (int epoch = 1; epoch <= hyper.epochs; ++epoch) {
    const auto g = nn::batch_gradient(res.model.net, xs, rows, loss, hyper.workers);
    if (initial < 0.0) initial = g.loss;
    if (!std::isfinite(g.loss) || g.loss > 1e6 * std::max(initial, 1e-300))
      throw Error(ErrorKind::TrainingDiverged, "classifier: diverged at epoch " + std::to_string(epoch));
    res.loss_history.push_back(g.loss);
    const Eigen::VectorXd grad = nn::flatten(g.grad);
    m1 = b1 * m1 + (1.0 - b1) * grad;
    m2 = b2 * m2 + (1.0 - b2) * grad.cwiseProduct(grad);
    const double c1 = 1.0 - std::pow(b1, epoch);
    const double c2 = 1.0 - std::pow(b2, epoch);
    theta.array() -= hyper.lr * (m1.array() / c1) / ((m2.array() / c2).sqrt() + eps);
    nn::unflatten(theta, res.model.net);
  }
  return res;
}

ClassifierTraining train_classifier(const StudyDataset& data, const ClassifierHyper& hyper) {
  return train_classifier(init_classifier(data, hyper), data, hyper);
}

DamageReport classify(const ClassifierModel& model, const FeatureVector& features) {
  for (double v : features.rel_shifts) require(std::isfinite(v), "classify: non-finite feature");
  const Eigen::VectorXd logits = model.net.forward(standardize(model, features));
  DamageReport rep;
  rep.severity = fill_head(logits, kSevOffset, rep.severity_conf);
  const int loc = fill_head(logits, kLocOffset, rep.location_conf);
  const int len = fill_head(logits, kLenOffset, rep.length_conf);
  if (rep.severity > 0) {
    rep.location = loc;
    rep.length_elements = len + 1;
  }
  return rep;
}

ClassifierMetrics evaluate(const ClassifierModel& model, const StudyDataset& data) {
  require(!data.rows.empty(), "evaluate: empty dataset");
  ClassifierMetrics m;
  m.severity_confusion.assign(kHeads[0], std::vector<int>(kHeads[0], 0));
  m.location_confusion.assign(kHeads[1], std::vector<int>(kHeads[1], 0));
  m.length_confusion.assign(kHeads[2], std::vector<int>(kHeads[2], 0));
  int sev_ok = 0, det_ok = 0, loc_ok = 0, len_ok = 0, damaged = 0;
  for (const auto& row : data.rows) {
    const Labels lab = labels_of(row.spec);
    const Eigen::VectorXd logits = model.net.forward(standardize(model, row.features));
    DamageReport rep;
    const int sev = fill_head(logits, kSevOffset, rep.severity_conf);
    const int loc = fill_head(logits, kLocOffset, rep.location_conf);
    const int len = fill_head(logits, kLenOffset, rep.length_conf);
    ++m.severity_confusion[lab.severity][sev];
    sev_ok += sev == lab.severity;
    det_ok += (sev > 0) == (lab.severity > 0);
    if (lab.severity > 0) {
      ++damaged;
      ++m.location_confusion[lab.location][loc];
      ++m.length_confusion[lab.length][len];
      loc_ok += loc == lab.location;
      len_ok += len == lab.length;
    }
  }
  const double n = static_cast<double>(data.rows.size());
  m.severity_accuracy = sev_ok / n;
  m.detection_accuracy = det_ok / n;
  m.location_accuracy = damaged ? loc_ok / static_cast<double>(damaged) : 1.0;
  m.length_accuracy = damaged ? len_ok / static_cast<double>(damaged) : 1.0;
  return m;
}

std::string format_confusion(const std::vector<std::vector<int>>& m, const std::string& title) {
  std::string s = title + " (rows = true, cols = predicted)\n";
  char buf[16];
  for (const auto& row : m) {
    for (int v : row) {
      std::snprintf(buf, sizeof buf, "%5d", v);
      s += buf;
    }
    s += '\n';
  }
  return s;
}

}  // namespace shm::dmg
