#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "shm/mlp.hpp"
#include "shm/sysid.hpp"

namespace shm::sysid {

/// Tapped-delay MLP forward model. The network sees standardized inputs and
/// predicts the standardized next sample.
struct MlpModel {
  nn::Network net;
  Normalization norm;
  double fs = 0.0;

  int window() const { return net.n_inputs(); }
  std::vector<int> layer_sizes() const { return net.sizes(); }
};

/// layer_sizes = [n, h1, ..., 1]. Normalization defaults to identity.
MlpModel init_mlp(const std::vector<int>& layer_sizes, std::uint64_t seed);
/// init_mlp with the dataset's normalization and sample rate installed.
MlpModel make_predictor(const WindowedDataset& data, const std::vector<int>& hidden, std::uint64_t seed);

double predict_next(const MlpModel& model, std::span<const double> window);

/// Standardized inputs / targets of a dataset under a model's normalization.
Eigen::MatrixXd standardize_inputs(const MlpModel& model, const Eigen::MatrixXd& inputs);
Eigen::VectorXd standardize_targets(const MlpModel& model, const Eigen::VectorXd& targets);

/// Squared error on a single linear output against per-row targets.
class SquaredError : public nn::OutputLoss {
 public:
  explicit SquaredError(const Eigen::VectorXd& targets) : targets_(targets) {}
  double eval(int row, const Eigen::VectorXd& out, Eigen::VectorXd& dout) const override;

 private:
  const Eigen::VectorXd& targets_;
};

/// Exact gradient of the mean squared error (standardized space) over the
/// given rows of a dataset.
nn::BatchResult gradients(const MlpModel& model, const WindowedDataset& data, std::span<const int> rows,
                          int workers = 1);

struct TrainHyper {
  double lr = 1e-3;
  double momentum = 0.9;
  int epochs = 100;
  int batch_size = 32;
  bool shuffle = true;
  std::uint64_t shuffle_seed = 0;
  int workers = 1;
};

struct TrainResult {
  MlpModel model;
  std::vector<double> loss_history;  // full-dataset MSE after each epoch
};

/// Mini-batch gradient descent with momentum. Throws TrainingDiverged when
/// the epoch loss exceeds 1e6 times the initial loss or is not finite.
TrainResult train_predictor(const MlpModel& model, const WindowedDataset& data, const TrainHyper& hyper);

/// One SGD step on a single (window -> new_sample) pair.
MlpModel online_update(const MlpModel& model, double new_sample, std::span<const double> window, double lr);

/// Mean squared one-step error divided by target variance.
double nmse(std::span<const double> predicted, std::span<const double> actual);

}  // namespace shm::sysid
