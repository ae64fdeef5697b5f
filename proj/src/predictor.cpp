#include "shm/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "shm/error.hpp"

namespace shm::sysid {

MlpModel init_mlp(const std::vector<int>& layer_sizes, std::uint64_t seed) {
  require(layer_sizes.size() >= 3, "init_mlp: need input, at least one hidden layer, and output");
  require(layer_sizes.back() == 1, "init_mlp: predictor output size must be 1");
  MlpModel m;
  m.net = nn::init_network(layer_sizes, seed);
  m.norm = Normalization::identity(layer_sizes.front());
  return m;
}

MlpModel make_predictor(const WindowedDataset& data, const std::vector<int>& hidden, std::uint64_t seed) {
  std::vector<int> sizes{data.n};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(1);
  MlpModel m = init_mlp(sizes, seed);
  m.norm = data.norm;
  m.fs = data.fs;
  return m;
}

double predict_next(const MlpModel& model, std::span<const double> window) {
  const int n = model.window();
  require(static_cast<int>(window.size()) == n,
          "predict_next: window length " + std::to_string(window.size()) + " != " + std::to_string(n));
  Eigen::VectorXd x(n);
  for (int j = 0; j < n; ++j) {
    require(std::isfinite(window[j]), "predict_next: non-finite window value");
    x(j) = (window[j] - model.norm.in_mean(j)) / model.norm.in_std(j);
  }
  return model.net.forward(x)(0) * model.norm.out_std + model.norm.out_mean;
}

Eigen::MatrixXd standardize_inputs(const MlpModel& model, const Eigen::MatrixXd& inputs) {
  require(inputs.cols() == model.window(), "standardize: input width != model window");
  return (inputs.rowwise() - model.norm.in_mean.transpose()).array().rowwise() /
         model.norm.in_std.transpose().array();
}

Eigen::VectorXd standardize_targets(const MlpModel& model, const Eigen::VectorXd& targets) {
  return (targets.array() - model.norm.out_mean) / model.norm.out_std;
}

double SquaredError::eval(int row, const Eigen::VectorXd& out, Eigen::VectorXd& dout) const {
  const double e = out(0) - targets_(row);
  dout.resize(1);
  dout(0) = 2.0 * e;
  return e * e;
}

nn::BatchResult gradients(const MlpModel& model, const WindowedDataset& data, std::span<const int> rows,
                          int workers) {
  const Eigen::MatrixXd xs = standardize_inputs(model, data.inputs);
  const Eigen::VectorXd ys = standardize_targets(model, data.targets);
  return nn::batch_gradient(model.net, xs, rows, SquaredError(ys), workers);
}

TrainResult train_predictor(const MlpModel& model, const WindowedDataset& data, const TrainHyper& hyper) {
  require(data.rows() >= 1, "train: empty dataset");
  require(hyper.lr >= 0.0 && hyper.momentum >= 0.0 && hyper.momentum < 1.0, "train: bad lr / momentum");
  require(hyper.epochs >= 0 && hyper.batch_size >= 1, "train: bad epochs / batch size");
  model.net.validate();

  const Eigen::MatrixXd xs = standardize_inputs(model, data.inputs);
  const Eigen::VectorXd ys = standardize_targets(model, data.targets);
  const SquaredError loss(ys);

  std::vector<int> order(data.rows());
  std::iota(order.begin(), order.end(), 0);
  const double initial = nn::batch_loss(model.net, xs, order, loss, hyper.workers);
  const double limit = 1e6 * std::max(initial, 1e-300);

  TrainResult res{model, {}};
  Eigen::VectorXd theta = nn::flatten(res.model.net);
  Eigen::VectorXd velocity = Eigen::VectorXd::Zero(theta.size());
  std::mt19937_64 rng(hyper.shuffle_seed);

  for (int epoch = 1; epoch <= hyper.epochs; ++epoch) {
    if (hyper.shuffle) std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += hyper.batch_size) {
      const std::size_t len = std::min<std::size_t>(hyper.batch_size, order.size() - start);
      const auto batch = std::span<const int>(order).subspan(start, len);
      const auto g = nn::batch_gradient(res.model.net, xs, batch, loss, hyper.workers);
      velocity = hyper.momentum * velocity - hyper.lr * nn::flatten(g.grad);
      theta += velocity;
      nn::unflatten(theta, res.model.net);
    }
    std::vector<int> all(data.rows());
    std::iota(all.begin(), all.end(), 0);
    const double l = nn::batch_loss(res.model.net, xs, all, loss, hyper.workers);
    if (!std::isfinite(l) || l > limit)
      throw Error(ErrorKind::TrainingDiverged, "train: diverged at epoch " + std::to_string(epoch) +
                                                   " (loss " + std::to_string(l) + ")");
    res.loss_history.push_back(l);
  }
  return res;
}

MlpModel online_update(const MlpModel& model, double new_sample, std::span<const double> window, double lr) {
  require(lr > 0.0 && std::isfinite(lr), "online_update: lr must be > 0");
  require(std::isfinite(new_sample), "online_update: non-finite sample");
  const int n = model.window();
  require(static_cast<int>(window.size()) == n, "online_update: window length mismatch");

  Eigen::MatrixXd x(1, n);
  for (int j = 0; j < n; ++j) {
    require(std::isfinite(window[j]), "online_update: non-finite window value");
    x(0, j) = (window[j] - model.norm.in_mean(j)) / model.norm.in_std(j);
  }
  Eigen::VectorXd y(1);
  y(0) = (new_sample - model.norm.out_mean) / model.norm.out_std;
  const int row = 0;
  const auto g = nn::batch_gradient_serial(model.net, x, std::span<const int>(&row, 1), SquaredError(y));

  MlpModel out = model;
  Eigen::VectorXd theta = nn::flatten(out.net) - lr * nn::flatten(g.grad);
  nn::unflatten(theta, out.net);
  return out;
}

double nmse(std::span<const double> predicted, std::span<const double> actual) {
  require(predicted.size() == actual.size() && !actual.empty(), "nmse: length mismatch or empty");
  const double n = static_cast<double>(actual.size());
  const double mean = std::accumulate(actual.begin(), actual.end(), 0.0) / n;
  double var = 0.0, err = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    var += (actual[i] - mean) * (actual[i] - mean);
    err += (predicted[i] - actual[i]) * (predicted[i] - actual[i]);
  }
  require(var > 0.0, "nmse: target has zero variance");
  return err / var;
}

}  // namespace shm::sysid
