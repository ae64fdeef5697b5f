#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <vector>

namespace shm::nn {

/// Fully connected layer; weights are (out x in).
struct Layer {
  Eigen::MatrixXd weights;
  Eigen::VectorXd bias;
};

/// Feed-forward network with logistic-sigmoid hidden layers and a linear
/// output layer.
struct Network {
  std::vector<Layer> layers;

  std::vector<int> sizes() const;
  int n_inputs() const { return static_cast<int>(layers.front().weights.cols()); }
  int n_outputs() const { return static_cast<int>(layers.back().weights.rows()); }
  Eigen::Index n_params() const;
  Eigen::VectorXd forward(const Eigen::VectorXd& x) const;
  void validate() const;
};

/// Glorot-uniform weights in +-sqrt(6 / (fan_in + fan_out)), zero biases.
Network init_network(const std::vector<int>& sizes, std::uint64_t seed);
/// Same shapes as init_network, every parameter zero.
Network zero_network(const std::vector<int>& sizes);

inline double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

/// Same layout as Network; dW(l) matches layers[l].weights.
struct Gradient {
  std::vector<Eigen::MatrixXd> dW;
  std::vector<Eigen::VectorXd> db;

  static Gradient zeros_like(const Network& net);
  Gradient& operator+=(const Gradient& o);
  Gradient& operator*=(double s);
  double squared_norm() const;
};

/// Flattened parameter views (layer by layer, weights column-major then bias).
Eigen::VectorXd flatten(const Network& net);
void unflatten(const Eigen::VectorXd& theta, Network& net);
Eigen::VectorXd flatten(const Gradient& g);

/// Per-sample loss on the network output. eval returns the loss and writes
/// d loss / d output into dout.
class OutputLoss {
 public:
  virtual ~OutputLoss() = default;
  virtual double eval(int row, const Eigen::VectorXd& out, Eigen::VectorXd& dout) const = 0;
};

struct BatchResult {
  double loss = 0.0;  // mean over rows
  Gradient grad;      // gradient of the mean loss
};

/// Backprop for one sample, accumulated into g (unscaled).
double accumulate_sample(const Network& net, const Eigen::VectorXd& x, int row, const OutputLoss& loss,
                         Gradient& g);

/// Serial reference: plain left-to-right accumulation over rows.
BatchResult batch_gradient_serial(const Network& net, const Eigen::MatrixXd& inputs, std::span<const int> rows,
                                  const OutputLoss& loss);

/// OpenMP kernel. Rows are cut into fixed chunks of kGradChunk; chunks are
/// reduced in index order, so the result is bitwise independent of the
/// thread count. workers <= 0 uses the OpenMP default.
inline constexpr int kGradChunk = 16;
BatchResult batch_gradient(const Network& net, const Eigen::MatrixXd& inputs, std::span<const int> rows,
                           const OutputLoss& loss, int workers = 0);

/// Mean loss only (no gradient), same chunked reduction.
double batch_loss(const Network& net, const Eigen::MatrixXd& inputs, std::span<const int> rows,
                  const OutputLoss& loss, int workers = 0);

}  // namespace shm::nn
