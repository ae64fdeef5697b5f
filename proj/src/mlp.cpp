#include "shm/mlp.hpp"

#include <omp.h>

#include <cmath>
#include <random>

#include "shm/error.hpp"

namespace shm::nn {

std::vector<int> Network::sizes() const {
  std::vector<int> s;
  if (layers.empty()) return s;
  s.push_back(n_inputs());
  for (const auto& l : layers) s.push_back(static_cast<int>(l.weights.rows()));
  return s;
}

Eigen::Index Network::n_params() const {
  Eigen::Index n = 0;
  for (const auto& l : layers) n += l.weights.size() + l.bias.size();
  return n;
}

void Network::validate() const {
  require(!layers.empty(), "network: no layers");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& L = layers[l];
    require(L.bias.size() == L.weights.rows(), "network: bias/weight shape mismatch in layer " + std::to_string(l));
    if (l > 0)
      require(L.weights.cols() == layers[l - 1].weights.rows(),
              "network: layer " + std::to_string(l) + " input size mismatch");
    require(L.weights.allFinite() && L.bias.allFinite(), "network: non-finite parameter");
  }
}

Eigen::VectorXd Network::forward(const Eigen::VectorXd& x) const {
  Eigen::VectorXd a = x;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    Eigen::VectorXd z = layers[l].weights * a + layers[l].bias;
    if (l + 1 < layers.size()) z = z.unaryExpr([](double v) { return sigmoid(v); });
    a = std::move(z);
  }
  return a;
}

Network init_network(const std::vector<int>& sizes, std::uint64_t seed) {
  require(sizes.size() >= 2, "init: need at least input and output sizes");
  for (int s : sizes) require(s >= 1, "init: layer sizes must be >= 1");
  std::mt19937_64 rng(seed);
  Network net;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const int fan_in = sizes[l], fan_out = sizes[l + 1];
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> uni(-limit, limit);
    Layer layer;
    layer.weights.resize(fan_out, fan_in);
    for (int r = 0; r < fan_out; ++r)
      for (int c = 0; c < fan_in; ++c) layer.weights(r, c) = uni(rng);
    layer.bias = Eigen::VectorXd::Zero(fan_out);
    net.layers.push_back(std::move(layer));
  }
  return net;
}

Network zero_network(const std::vector<int>& sizes) {
  Network net = init_network(sizes, 0);
  for (auto& l : net.layers) l.weights.setZero();
  return net;
}

Gradient Gradient::zeros_like(const Network& net) {
  Gradient g;
  for (const auto& l : net.layers) {
    g.dW.push_back(Eigen::MatrixXd::Zero(l.weights.rows(), l.weights.cols()));
    g.db.push_back(Eigen::VectorXd::Zero(l.bias.size()));
  }
  return g;
}

Gradient& Gradient::operator+=(const Gradient& o) {
  for (std::size_t l = 0; l < dW.size(); ++l) {
    dW[l] += o.dW[l];
    db[l] += o.db[l];
  }
  return *this;
}

Gradient& Gradient::operator*=(double s) {
  for (std::size_t l = 0; l < dW.size(); ++l) {
    dW[l] *= s;
    db[l] *= s;
  }
  return *this;
}

double Gradient::squared_norm() const {
  double n = 0.0;
  for (std::size_t l = 0; l < dW.size(); ++l) n += dW[l].squaredNorm() + db[l].squaredNorm();
  return n;
}

Eigen::VectorXd flatten(const Network& net) {
  Eigen::VectorXd theta(net.n_params());
  Eigen::Index at = 0;
  for (const auto& l : net.layers) {
    theta.segment(at, l.weights.size()) = l.weights.reshaped();
    at += l.weights.size();
    theta.segment(at, l.bias.size()) = l.bias;
    at += l.bias.size();
  }
  return theta;
}

void unflatten(const Eigen::VectorXd& theta, Network& net) {
  require(theta.size() == net.n_params(), "unflatten: parameter count mismatch");
  Eigen::Index at = 0;
  for (auto& l : net.layers) {
    l.weights.reshaped() = theta.segment(at, l.weights.size());
    at += l.weights.size();
    l.bias = theta.segment(at, l.bias.size());
    at += l.bias.size();
  }
}

Eigen::VectorXd flatten(const Gradient& g) {
  Eigen::Index n = 0;
  for (std::size_t l = 0; l < g.dW.size(); ++l) n += g.dW[l].size() + g.db[l].size();
  Eigen::VectorXd v(n);
  Eigen::Index at = 0;
  for (std::size_t l = 0; l < g.dW.size(); ++l) {
    v.segment(at, g.dW[l].size()) = g.dW[l].reshaped();
    at += g.dW[l].size();
    v.segment(at, g.db[l].size()) = g.db[l];
    at += g.db[l].size();
  }
  return v;
}

double accumulate_sample(const Network& net, const Eigen::VectorXd& x, int row, const OutputLoss& loss,
                         Gradient& g) {
  const std::size_t n_layers = net.layers.size();
  std::vector<Eigen::VectorXd> acts;
  acts.reserve(n_layers + 1);
  acts.push_back(x);
  for (std::size_t l = 0; l < n_layers; ++l) {
    Eigen::VectorXd z = net.layers[l].weights * acts.back() + net.layers[l].bias;
    if (l + 1 < n_layers) z = z.unaryExpr([](double v) { return sigmoid(v); });
    acts.push_back(std::move(z));
  }

  Eigen::VectorXd delta;
  const double value = loss.eval(row, acts.back(), delta);
  for (std::size_t l = n_layers; l-- > 0;) {
    g.dW[l].noalias() += delta * acts[l].transpose();
    g.db[l] += delta;
    if (l == 0) break;
    const auto& a = acts[l];
    delta = (net.layers[l].weights.transpose() * delta).cwiseProduct(a.cwiseProduct((1.0 - a.array()).matrix()));
  }
  return value;
}

BatchResult batch_gradient_serial(const Network& net, const Eigen::MatrixXd& inputs, std::span<const int> rows,
                                  const OutputLoss& loss) {
  require(!rows.empty(), "gradients: empty batch");
  BatchResult res;
  res.grad = Gradient::zeros_like(net);
  for (int r : rows) res.loss += accumulate_sample(net, inputs.row(r).transpose(), r, loss, res.grad);
  const double inv = 1.0 / static_cast<double>(rows.size());
  res.loss *= inv;
  res.grad *= inv;
  return res;
}

BatchResult batch_gradient(const Network& net, const Eigen::MatrixXd& inputs, std::span<const int> rows,
                           const OutputLoss& loss, int workers) {
  require(!rows.empty(), "gradients: empty batch");
  const int n = static_cast<int>(rows.size());
  const int n_chunks = (n + kGradChunk - 1) / kGradChunk;
  std::vector<Gradient> partial(n_chunks);
  std::vector<double> partial_loss(n_chunks, 0.0);
  const int threads = workers > 0 ? workers : omp_get_max_threads();

#pragma omp parallel for schedule(static) num_threads(threads) if (n_chunks > 1)
  for (int c = 0; c < n_chunks; ++c) {
    Gradient g = Gradient::zeros_like(net);
    double l = 0.0;
    const int end = std::min(n, (c + 1) * kGradChunk);
    for (int i = c * kGradChunk; i < end; ++i) {
      const int r = rows[i];
      l += accumulate_sample(net, inputs.row(r).transpose(), r, loss, g);
    }
    partial[c] = std::move(g);
    partial_loss[c] = l;
  }

  BatchResult res;
  res.grad = std::move(partial[0]);
  res.loss = partial_loss[0];
  for (int c = 1; c < n_chunks; ++c) {
    res.grad += partial[c];
    res.loss += partial_loss[c];
  }
  const double inv = 1.0 / n;
  res.loss *= inv;
  res.grad *= inv;
  return res;
}

double batch_loss(const Network& net, const Eigen::MatrixXd& inputs, std::span<const int> rows,
                  const OutputLoss& loss, int workers) {
  require(!rows.empty(), "loss: empty batch");
  const int n = static_cast<int>(rows.size());
  const int n_chunks = (n + kGradChunk - 1) / kGradChunk;
  std::vector<double> partial(n_chunks, 0.0);
  const int threads = workers > 0 ? workers : omp_get_max_threads();

#pragma omp parallel for schedule(static) num_threads(threads) if (n_chunks > 1)
  for (int c = 0; c < n_chunks; ++c) {
    Eigen::VectorXd dout;
    double l = 0.0;
    const int end = std::min(n, (c + 1) * kGradChunk);
    for (int i = c * kGradChunk; i < end; ++i) {
      const int r = rows[i];
      l += loss.eval(r, net.forward(inputs.row(r).transpose()), dout);
    }
    partial[c] = l;
  }
  double total = 0.0;
  for (double l : partial) total += l;
  return total / n;
}

}  // namespace shm::nn
