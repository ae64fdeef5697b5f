#include "shm/sysid.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "shm/error.hpp"

namespace shm::sysid {

int window_size(double fs, double f_max_hz, int expected_modes) {
  require(f_max_hz > 0.0 && std::isfinite(f_max_hz), "window_size: f_max must be > 0");
  require(fs > 2.0 * f_max_hz, "window_size: fs must exceed 2 * f_max (Nyquist)");
  require(expected_modes >= 0, "window_size: expected_modes must be >= 0");
  int n = static_cast<int>(std::lround(fs / (2.0 * f_max_hz)));
  return std::max({n, 2 * expected_modes, 1});
}

Normalization Normalization::identity(int n) {
  Normalization norm;
  norm.in_mean = Eigen::VectorXd::Zero(n);
  norm.in_std = Eigen::VectorXd::Ones(n);
  return norm;
}

namespace {

double safe_std(double var, double mean) {
  const double s = std::sqrt(std::max(var, 0.0));
  return s > 1e-12 * std::max(1.0, std::abs(mean)) ? s : 1.0;
}

}  // namespace

WindowedDataset build_windows(std::span<const double> x, int n, double fs) {
  const int total = static_cast<int>(x.size());
  require(n >= 1, "build_windows: window must be >= 1");
  require(n < total, "build_windows: window " + std::to_string(n) + " needs more than " +
                         std::to_string(total) + " samples");
  for (double v : x) require(std::isfinite(v), "build_windows: non-finite sample");

  WindowedDataset d;
  d.n = n;
  d.fs = fs;
  const int rows = total - n;
  d.inputs.resize(rows, n);
  d.targets.resize(rows);
  for (int r = 0; r < rows; ++r) {
    const int k = r + n;
    for (int j = 0; j < n; ++j) d.inputs(r, j) = x[k - 1 - j];
    d.targets(r) = x[k];
  }

  d.norm.in_mean = d.inputs.colwise().mean().transpose();
  d.norm.in_std.resize(n);
  for (int j = 0; j < n; ++j) {
    const double var = (d.inputs.col(j).array() - d.norm.in_mean(j)).square().mean();
    d.norm.in_std(j) = safe_std(var, d.norm.in_mean(j));
  }
  d.norm.out_mean = d.targets.mean();
  d.norm.out_std = safe_std((d.targets.array() - d.norm.out_mean).square().mean(), d.norm.out_mean);
  return d;
}

WindowedDataset build_windows(const sim::TimeSeries& series, const std::string& channel, int n) {
  const int idx = series.channel_index(channel);
  require(idx >= 0, "build_windows: channel '" + channel + "' not in series");
  return build_windows(series.channels[idx], n, series.fs);
}

ArModel fit_ar(const WindowedDataset& data, double ridge) {
  const int n = data.n;
  const int rows = data.rows();
  require(ridge >= 0.0 && std::isfinite(ridge), "fit_ar: ridge must be >= 0");
  require(rows >= n, "fit_ar: need at least " + std::to_string(n) + " rows, got " + std::to_string(rows));

  ArModel model;
  model.fs = data.fs;
  if (ridge == 0.0) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(data.inputs);
    if (qr.rank() < n)
      throw Error(ErrorKind::Numerical, "fit_ar: design is rank-deficient (rank " + std::to_string(qr.rank()) +
                                            " < order " + std::to_string(n) + "); use ridge > 0");
    model.coeffs = qr.solve(data.targets);
  } else {
    Eigen::MatrixXd a(rows + n, n);
    a.topRows(rows) = data.inputs;
    a.bottomRows(n) = std::sqrt(ridge) * Eigen::MatrixXd::Identity(n, n);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(rows + n);
    b.head(rows) = data.targets;
    model.coeffs = a.colPivHouseholderQr().solve(b);
  }
  if (!model.coeffs.allFinite()) throw Error(ErrorKind::Numerical, "fit_ar: non-finite coefficients");
  model.residual_rms = std::sqrt((data.targets - data.inputs * model.coeffs).squaredNorm() / rows);
  return model;
}

double predict_next(const ArModel& model, std::span<const double> window) {
  require(static_cast<int>(window.size()) == model.order(),
          "predict_next: window length " + std::to_string(window.size()) + " != order " +
              std::to_string(model.order()));
  double y = 0.0;
  for (int j = 0; j < model.order(); ++j) {
    require(std::isfinite(window[j]), "predict_next: non-finite window value");
    y += model.coeffs(j) * window[j];
  }
  return y;
}

ArModel online_update(const ArModel& model, double new_sample, std::span<const double> window, double lr) {
  require(lr > 0.0 && std::isfinite(lr), "online_update: lr must be > 0");
  require(std::isfinite(new_sample), "online_update: non-finite sample");
  const double err = new_sample - predict_next(model, window);
  double energy = 0.0;
  for (double v : window) energy += v * v;
  ArModel out = model;
  const double step = lr * err / (1e-8 + energy);
  for (int j = 0; j < out.order(); ++j) out.coeffs(j) += step * window[j];
  return out;
}

namespace {

using cplx = std::complex<double>;

// Monic coefficients c0 = 1, c1 = -a1, ..., cn = -an evaluated by Horner.
void eval_poly(const Eigen::VectorXd& a, cplx z, cplx& p, cplx& dp) {
  p = 1.0;
  dp = 0.0;
  for (int j = 0; j < a.size(); ++j) {
    dp = dp * z + p;
    p = p * z - a(j);
  }
}

// Parlett-Reinsch balancing in place; eigenvalues are unchanged.
void balance(Eigen::MatrixXd& m) {
  const int n = static_cast<int>(m.rows());
  bool converged = false;
  while (!converged) {
    converged = true;
    for (int i = 0; i < n; ++i) {
      double c = 0.0, r = 0.0;
      for (int j = 0; j < n; ++j) {
        if (j == i) continue;
        c += std::abs(m(j, i));
        r += std::abs(m(i, j));
      }
      if (c == 0.0 || r == 0.0) continue;
      double f = 1.0;
      const double s = c + r;
      while (c < r / 2.0) { c *= 2.0; r /= 2.0; f *= 2.0; }
      while (c >= r * 2.0) { c /= 2.0; r *= 2.0; f /= 2.0; }
      if ((c + r) / f < 0.95 * s) {
        converged = false;
        m.row(i) /= f;
        m.col(i) *= f;
      }
    }
  }
}

}  // namespace

std::vector<std::complex<double>> characteristic_roots(const Eigen::VectorXd& coeffs) {
  const int n = static_cast<int>(coeffs.size());
  require(n >= 1, "roots: empty coefficient vector");
  require(coeffs.allFinite(), "roots: non-finite coefficients");

  Eigen::MatrixXd comp = Eigen::MatrixXd::Zero(n, n);
  comp.row(0) = coeffs.transpose();
  for (int i = 1; i < n; ++i) comp(i, i - 1) = 1.0;
  balance(comp);
  Eigen::EigenSolver<Eigen::MatrixXd> es(comp, false);
  if (es.info() != Eigen::Success) throw Error(ErrorKind::Numerical, "roots: companion eigensolver failed");

  std::vector<cplx> roots(es.eigenvalues().data(), es.eigenvalues().data() + n);
  for (auto& z : roots) {
    cplx p, dp;
    eval_poly(coeffs, z, p, dp);
    for (int it = 0; it < 3 && std::abs(dp) > 0.0; ++it) {
      const cplx cand = z - p / dp;
      cplx pc, dpc;
      eval_poly(coeffs, cand, pc, dpc);
      // Only accept steps that stay local; clustered roots can otherwise
      // pull a Newton step onto a neighbour.
      if (!(std::abs(pc) < std::abs(p)) || std::abs(cand - z) > 1e-6 * (1.0 + std::abs(z))) break;
      z = cand;
      p = pc;
      dp = dpc;
    }
    if (z.imag() != 0.0 && std::abs(z.imag()) < 1e-14 * std::abs(z)) z = cplx(z.real(), 0.0);
  }

  const double scale = std::max(1.0, coeffs.cwiseAbs().maxCoeff());
  for (const auto& z : roots) {
    if (std::abs(z) > 2.0) continue;
    cplx p, dp;
    eval_poly(coeffs, z, p, dp);
    if (std::abs(p) > 1e-8 * scale)
      throw Error(ErrorKind::Numerical, "roots: residual " + std::to_string(std::abs(p)) + " exceeds tolerance");
  }
  return roots;
}

std::vector<ModeEstimate> extract_modes(const ArModel& model, const PoleFilter& filter) {
  require(model.order() >= 2, "extract_modes: order must be >= 2");
  require(model.fs > 0.0, "extract_modes: model has no sample rate");
  std::vector<ModeEstimate> out;
  for (cplx z : characteristic_roots(model.coeffs)) {
    if (filter.reflect_unstable && std::abs(z) > 1.0) z = 1.0 / std::conj(z);
    if (!(z.imag() > 0.0)) continue;
    const double r = std::abs(z);
    if (!(r > filter.min_radius && r < filter.max_radius)) continue;
    const cplx s = std::log(z) * model.fs;
    const double wn = std::abs(s);
    const double zeta = -s.real() / wn;
    if (!(zeta < filter.max_zeta)) continue;
    out.push_back({wn / (2.0 * std::numbers::pi), zeta, z});
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.freq_hz < b.freq_hz; });
  return out;
}

Eigen::VectorXd ar_coeffs_from_poles(const std::vector<std::complex<double>>& poles) {
  require(!poles.empty(), "ar_coeffs_from_poles: no poles");
  std::vector<cplx> c{1.0};
  for (const auto& z : poles) {
    std::vector<cplx> next(c.size() + 1, 0.0);
    for (std::size_t j = 0; j < c.size(); ++j) {
      next[j] += c[j];
      next[j + 1] -= z * c[j];
    }
    c.swap(next);
  }
  Eigen::VectorXd a(poles.size());
  for (std::size_t j = 0; j < poles.size(); ++j) {
    require(std::abs(c[j + 1].imag()) <= 1e-9 * (1.0 + std::abs(c[j + 1])),
            "ar_coeffs_from_poles: poles are not closed under conjugation");
    a(j) = -c[j + 1].real();
  }
  return a;
}

std::complex<double> mode_pole(double freq_hz, double zeta, double fs) {
  const double wn = 2.0 * std::numbers::pi * freq_hz;
  const cplx s(-zeta * wn, wn * std::sqrt(1.0 - zeta * zeta));
  return std::exp(s / fs);
}

int default_ar_order(int n_modes, bool random_excitation) {
  require(n_modes >= 1, "default_ar_order: n_modes must be >= 1");
  return random_excitation ? static_cast<int>(std::ceil(2.5 * 2 * n_modes)) : 2 * n_modes;
}

int auto_stride(double fs, double band_hz) {
  require(fs > 0.0 && band_hz > 0.0, "auto_stride: fs and band must be > 0");
  return std::max(1, static_cast<int>(std::floor(fs / (2.5 * band_hz))));
}

std::vector<double> decimate(std::span<const double> x, int stride) {
  require(stride >= 1, "decimate: stride must be >= 1");
  std::vector<double> out;
  out.reserve(x.size() / stride + 1);
  for (std::size_t k = 0; k < x.size(); k += stride) out.push_back(x[k]);
  return out;
}

ArIdentification identify_ar(std::span<const double> x, double fs, const ArIdentifyOptions& opts) {
  require(opts.order >= 2, "identify: AR order must be >= 2");
  require(opts.ridge_rel >= 0.0, "identify: ridge_rel must be >= 0");
  ArIdentification out;
  out.stride = opts.stride > 0 ? opts.stride : auto_stride(fs, opts.band_hz);
  const auto xs = decimate(x, out.stride);
  const double fs_d = fs / out.stride;
  require(static_cast<int>(xs.size()) >= 2 * opts.order + 1,
          "identify: too few samples after decimation for order " + std::to_string(opts.order));
  const WindowedDataset data = build_windows(xs, opts.order, fs_d);
  const double ridge = opts.ridge_rel * data.inputs.colwise().squaredNorm().mean();
  out.model = fit_ar(data, ridge);
  out.modes = extract_modes(out.model, opts.filter);
  return out;
}

}  // namespace shm::sysid
