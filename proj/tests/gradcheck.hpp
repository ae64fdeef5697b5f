#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "shm/damage.hpp"
#include "shm/mlp.hpp"
#include "shm/predictor.hpp"

namespace gradcheck {

// Independent oracle: forward pass and losses in long double, written
// straight from the definitions (sigmoid hidden layers, linear output).
using LVec = std::vector<long double>;

inline LVec forward_ld(const shm::nn::Network& net, const Eigen::VectorXd& theta, const Eigen::VectorXd& x,
                       Eigen::Index perturbed, long double delta) {
  auto param = [&](Eigen::Index i) { return static_cast<long double>(theta(i)) + (i == perturbed ? delta : 0.0L); };
  LVec a(x.data(), x.data() + x.size());
  Eigen::Index off = 0;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const auto rows = net.layers[l].weights.rows(), cols = net.layers[l].weights.cols();
    LVec z(rows, 0.0L);
    for (Eigen::Index c = 0; c < cols; ++c)  // weights column-major, then bias
      for (Eigen::Index r = 0; r < rows; ++r) z[r] += param(off + c * rows + r) * a[c];
    off += rows * cols;
    for (Eigen::Index r = 0; r < rows; ++r) z[r] += param(off + r);
    off += rows;
    if (l + 1 < net.layers.size())
      for (auto& v : z) v = 1.0L / (1.0L + std::exp(-v));
    a = std::move(z);
  }
  return a;
}

inline long double squared_error_ld(const LVec& out, double target) {
  const long double e = out[0] - target;
  return e * e;
}

inline long double heads_ld(const LVec& out, const shm::dmg::Labels& lab) {
  auto xent = [&](int off, int n, int target) {
    long double m = out[off];
    for (int i = 1; i < n; ++i) m = std::max(m, out[off + i]);
    long double s = 0.0L;
    for (int i = 0; i < n; ++i) s += std::exp(out[off + i] - m);
    return m + std::log(s) - out[off + target];
  };
  long double l = xent(0, 4, lab.severity);
  if (lab.severity > 0) l += xent(4, 10, lab.location) + xent(14, 2, lab.length);
  return l;
}

// Largest componentwise relative disagreement between backprop and central
// differences with step 1e-6 * max(1, |theta_i|), the difference quotient
// taken on the long-double oracle. Components below floor * max|g| are
// compared against that floor.
template <class RowLoss>
double max_rel_error(const shm::nn::Network& net, const Eigen::MatrixXd& x, const shm::nn::OutputLoss& loss,
                     RowLoss row_loss, double floor = 1e-6) {
  std::vector<int> rows(x.rows());
  std::iota(rows.begin(), rows.end(), 0);
  const Eigen::VectorXd g = shm::nn::flatten(shm::nn::batch_gradient_serial(net, x, rows, loss).grad);
  const Eigen::VectorXd theta = shm::nn::flatten(net);
  const double gmax = g.cwiseAbs().maxCoeff();
  auto mean_loss = [&](Eigen::Index i, long double delta) {
    long double s = 0.0L;
    for (Eigen::Index r = 0; r < x.rows(); ++r)
      s += row_loss(static_cast<int>(r), forward_ld(net, theta, x.row(r).transpose(), i, delta));
    return s / x.rows();
  };
  double worst = 0.0;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    const long double h = 1e-6L * std::max(1.0L, std::abs(static_cast<long double>(theta(i))));
    const double fd = static_cast<double>((mean_loss(i, h) - mean_loss(i, -h)) / (2.0L * h));
    const double denom = std::max({std::abs(g(i)), std::abs(fd), floor * gmax});
    worst = std::max(worst, std::abs(g(i) - fd) / denom);
  }
  return worst;
}

struct Instance {
  shm::nn::Network net;
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
  std::vector<shm::dmg::Labels> labels;
};

// Seeded predictor instance: [9, 25, 25, 1] network, random batch.
inline Instance predictor_instance(std::uint64_t seed, int rows = 12) {
  Instance in{shm::nn::init_network({9, 25, 25, 1}, seed), Eigen::MatrixXd(rows, 9), Eigen::VectorXd(rows), {}};
  std::mt19937_64 rng(seed + 1000);
  std::normal_distribution<double> g;
  for (int l = 0; l < 3; ++l)
    for (Eigen::Index k = 0; k < in.net.layers[l].bias.size(); ++k) in.net.layers[l].bias(k) = 0.1 * g(rng);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < 9; ++j) in.x(i, j) = g(rng);
    in.y(i) = g(rng);
  }
  return in;
}

// Seeded classifier instance: [4, 16, 16] network, random labels incl. pristine rows.
inline Instance classifier_instance(std::uint64_t seed, int rows = 12) {
  Instance in{shm::nn::init_network({4, 16, 16}, seed), Eigen::MatrixXd(rows, 4), {}, {}};
  std::mt19937_64 rng(seed + 2000);
  std::normal_distribution<double> g;
  for (int l = 0; l < 2; ++l)
    for (Eigen::Index k = 0; k < in.net.layers[l].bias.size(); ++k) in.net.layers[l].bias(k) = 0.1 * g(rng);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < 4; ++j) in.x(i, j) = g(rng);
    const int sev = static_cast<int>(rng() % 4);
    in.labels.push_back(sev == 0 ? shm::dmg::Labels{}
                                 : shm::dmg::Labels{sev, static_cast<int>(rng() % 10), static_cast<int>(rng() % 2)});
  }
  return in;
}

}  // namespace gradcheck
