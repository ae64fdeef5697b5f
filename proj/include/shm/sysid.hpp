#pragma once

#include <Eigen/Dense>
#include <complex>
#include <span>
#include <string>
#include <vector>

#include "shm/transient.hpp"

namespace shm::sysid {

/// Tapped-delay-line length covering half a period of the highest mode:
/// round(fs / (2 f_max)), raised to 2 * expected_modes when that is given.
int window_size(double fs, double f_max_hz, int expected_modes = 0);

struct Normalization {
  Eigen::VectorXd in_mean;
  Eigen::VectorXd in_std;
  double out_mean = 0.0;
  double out_std = 1.0;

  static Normalization identity(int n);
};

/// One row per predicted sample k: inputs [x(k-1), ..., x(k-n)], target x(k).
struct WindowedDataset {
  Eigen::MatrixXd inputs;
  Eigen::VectorXd targets;
  int n = 0;
  double fs = 0.0;
  Normalization norm;

  int rows() const { return static_cast<int>(targets.size()); }
};

WindowedDataset build_windows(std::span<const double> x, int n, double fs);
WindowedDataset build_windows(const sim::TimeSeries& series, const std::string& channel, int n);

/// x_hat(k) = sum_j coeffs(j-1) * x(k-j).
struct ArModel {
  Eigen::VectorXd coeffs;
  double fs = 0.0;
  double residual_rms = 0.0;

  int order() const { return static_cast<int>(coeffs.size()); }
};

/// Ridge-regularized least squares through a column-pivoted QR of the
/// (augmented) design matrix. ridge == 0 on a rank-deficient design throws.
ArModel fit_ar(const WindowedDataset& data, double ridge);

double predict_next(const ArModel& model, std::span<const double> window);

/// One normalized-LMS step on (window -> new_sample):
/// a += lr * e * w / (1e-8 + |w|^2).
ArModel online_update(const ArModel& model, double new_sample, std::span<const double> window, double lr);

struct ModeEstimate {
  double freq_hz = 0.0;
  double zeta = 0.0;
  std::complex<double> pole;
};

/// Acceptance region for AR poles.
struct PoleFilter {
  double min_radius = 0.5;
  double max_radius = 1.0 + 1e-6;
  double max_zeta = 0.2;
  // Replace poles outside the unit circle by 1/conj(z) before filtering.
  // Keeps lightly damped modes whose damping estimate came out slightly
  // negative; frequency is unchanged by the reflection.
  bool reflect_unstable = false;
};

/// Roots of z^n - a1 z^(n-1) - ... - an (companion eigenvalues, Newton-polished).
std::vector<std::complex<double>> characteristic_roots(const Eigen::VectorXd& coeffs);

std::vector<ModeEstimate> extract_modes(const ArModel& model, const PoleFilter& filter = {});

/// AR coefficients whose characteristic polynomial has exactly these roots.
/// Complex roots must come in conjugate pairs.
Eigen::VectorXd ar_coeffs_from_poles(const std::vector<std::complex<double>>& poles);

/// Discrete pole of a continuous mode sampled at fs.
std::complex<double> mode_pole(double freq_hz, double zeta, double fs);

// Identification pipeline: decimate, fit, extract.

/// 2 * n_modes for free decay, ceil(2.5 * 2 * n_modes) for random forcing.
int default_ar_order(int n_modes, bool random_excitation);

/// Largest stride keeping at least 2.5 samples per period of band_hz.
int auto_stride(double fs, double band_hz);

std::vector<double> decimate(std::span<const double> x, int stride);

struct ArIdentifyOptions {
  int order = 0;   // 0: caller must fill from default_ar_order
  int stride = 0;  // 0: auto_stride(fs, band_hz)
  double band_hz = 54.4;
  double ridge_rel = 1e-12;  // ridge = ridge_rel * mean diagonal of X^T X
  PoleFilter filter{.reflect_unstable = true};
};

struct ArIdentification {
  ArModel model;
  std::vector<ModeEstimate> modes;
  int stride = 1;
};

ArIdentification identify_ar(std::span<const double> x, double fs, const ArIdentifyOptions& opts);

}  // namespace shm::sysid
