#include <doctest.h>

#include <cmath>
#include <numbers>

#include "shm/beam_fem.hpp"
#include "shm/error.hpp"

using namespace shm;
using namespace shm::fem;

namespace {

// Hermite cubic shape functions on [0, h] and their second derivatives.
std::array<double, 4> hermite(double x, double h) {
  const double s = x / h;
  return {1 - 3 * s * s + 2 * s * s * s, h * (s - 2 * s * s + s * s * s), 3 * s * s - 2 * s * s * s,
          h * (-s * s + s * s * s)};
}
std::array<double, 4> hermite_dd(double x, double h) {
  const double s = x / h;
  return {(-6 + 12 * s) / (h * h), (-4 + 6 * s) / h, (6 - 12 * s) / (h * h), (-2 + 6 * s) / h};
}

// 4-point Gauss-Legendre, exact to degree 7.
template <class F>
Eigen::Matrix4d integrate(double h, F f) {
  const double a = std::sqrt(3.0 / 7.0 - 2.0 / 7.0 * std::sqrt(6.0 / 5.0));
  const double b = std::sqrt(3.0 / 7.0 + 2.0 / 7.0 * std::sqrt(6.0 / 5.0));
  const double wa = (18.0 + std::sqrt(30.0)) / 36.0, wb = (18.0 - std::sqrt(30.0)) / 36.0;
  const double pts[] = {-b, -a, a, b}, wts[] = {wb, wa, wa, wb};
  Eigen::Matrix4d m = Eigen::Matrix4d::Zero();
  for (int q = 0; q < 4; ++q) {
    const double x = 0.5 * h * (pts[q] + 1.0);
    m += 0.5 * h * wts[q] * f(x);
  }
  return m;
}

// Roots of cosh(x) cos(x) + 1 = 0 by bisection.
double cantilever_root(int k) {
  auto g = [](double x) { return std::cosh(x) * std::cos(x) + 1.0; };
  double lo = (k - 0.5) * std::numbers::pi - 1.2, hi = (k - 0.5) * std::numbers::pi + 0.3;
  if (k == 1) lo = 1.0, hi = 2.5;
  REQUIRE(g(lo) * g(hi) < 0.0);
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (g(lo) * g(mid) <= 0.0 ? hi : lo) = mid;
  }
  return 0.5 * (lo + hi);
}

ModalData pristine_modes(const BeamConfig& cfg) { return solve_modes(pristine_model(cfg), 4, 0.0); }

}  // namespace

TEST_SUITE("fem") {
  TEST_CASE("element matrices match quadrature of the Hermite shape functions") {
    for (double h : {0.5, 1.0, 2.75}) {
      const double ei = 3.7e6, rho = 1.3;
      const Eigen::Matrix4d k_ref = integrate(h, [&](double x) {
        const auto d = hermite_dd(x, h);
        Eigen::Vector4d v(d[0], d[1], d[2], d[3]);
        return Eigen::Matrix4d(ei * v * v.transpose());
      });
      const Eigen::Matrix4d m_ref = integrate(h, [&](double x) {
        const auto n = hermite(x, h);
        Eigen::Vector4d v(n[0], n[1], n[2], n[3]);
        return Eigen::Matrix4d(rho * v * v.transpose());
      });
      CHECK((element_stiffness(ei, h) - k_ref).norm() <= 1e-9 * k_ref.norm());
      CHECK((element_mass(rho, h) - m_ref).norm() <= 1e-12 * m_ref.norm());
    }
  }

  TEST_CASE("one-element cantilever keeps the tip block of the element matrices") {
    BeamConfig cfg;
    cfg.n_elements = 1;
    cfg.length = 2.0;
    const auto m = assemble_system(cfg, {5.0});
    const double h = 2.0;
    Eigen::Matrix2d k;
    k << 12.0, -6.0 * h, -6.0 * h, 4.0 * h * h;
    k *= 5.0 / (h * h * h);
    CHECK((m.stiffness - k).norm() < 1e-12);
    CHECK(m.free_dofs() == 2);
    // Tip load P on a one-element cantilever reproduces PL^3/(3EI) exactly.
    const Eigen::Vector2d u = m.stiffness.ldlt().solve(Eigen::Vector2d(1.0, 0.0));
    CHECK(u(0) == doctest::Approx(h * h * h / 15.0).epsilon(1e-12));
  }

  TEST_CASE("free DOF numbering") {
    CHECK(dof_w(1) == -1);
    CHECK(dof_theta(1) == -1);
    CHECK(dof_w(2) == 0);
    CHECK(dof_theta(2) == 1);
    CHECK(dof_w(37) == 70);
    CHECK(dof_theta(37) == 71);
  }

  TEST_CASE("tabulated (beta L)^2 agree with roots of cosh x cos x = -1") {
    for (int k = 1; k <= 4; ++k) {
      const double x = cantilever_root(k);
      CHECK(x * x == doctest::Approx(kCantileverBetaL2[k - 1]).epsilon(2e-6));
    }
  }

  TEST_CASE("calibrated beam: omega_1 = 10 and FEM within 2% of closed form") {
    BeamConfig cfg;
    const double ei = calibrate_bending_stiffness(cfg);
    const auto exact = analytic_cantilever_omegas(cfg, ei);
    CHECK(exact[0] == doctest::Approx(10.0).epsilon(1e-12));
    const auto modal = pristine_modes(cfg);
    for (int i = 0; i < 4; ++i) CHECK(std::abs(modal.omegas(i) / exact[i] - 1.0) < 0.02);
    CHECK(modal.omegas(0) == doctest::Approx(10.0).epsilon(1e-4));
  }

  TEST_CASE("mesh refinement 36 -> 72 moves the first four modes by < 0.1%") {
    BeamConfig coarse, fine;
    fine.n_elements = 72;
    const auto a = pristine_modes(coarse), b = pristine_modes(fine);
    for (int i = 0; i < 4; ++i) CHECK(std::abs(a.omegas(i) / b.omegas(i) - 1.0) < 1e-3);
  }

  TEST_CASE("modes are mass-orthonormal, K-diagonal and tip-positive") {
    const auto model = pristine_model(BeamConfig{});
    const auto modal = solve_modes(model, 6, 0.01);
    const Eigen::MatrixXd mm = modal.shapes.transpose() * model.mass * modal.shapes;
    const Eigen::MatrixXd kk = modal.shapes.transpose() * model.stiffness * modal.shapes;
    CHECK((mm - Eigen::MatrixXd::Identity(6, 6)).norm() < 1e-10);
    const Eigen::VectorXd w2 = modal.omegas.array().square();
    CHECK((kk - Eigen::MatrixXd(w2.asDiagonal())).norm() < 1e-8 * w2.maxCoeff());
    for (int i = 0; i < 6; ++i) {
      CHECK(modal.shapes(dof_w(37), i) > 0.0);
      if (i > 0) CHECK(modal.omegas(i) > modal.omegas(i - 1));
    }
    CHECK((modal.mass_shapes - model.mass * modal.shapes).norm() == doctest::Approx(0.0));
    CHECK(modal.freqs_hz(0) == doctest::Approx(modal.omegas(0) / (2 * std::numbers::pi)));
  }

  TEST_CASE("case enumeration") {
    const auto cases = enumerate_damage_cases();
    REQUIRE(cases.size() == 61);
    CHECK(cases[0].pristine());
    for (int sev = 1; sev <= 3; ++sev)
      for (int len = 1; len <= 2; ++len)
        for (int loc = 0; loc < 10; ++loc) {
          const int id = 1 + (sev - 1) * 20 + (len - 1) * 10 + loc;
          const auto& c = cases[id];
          CHECK(c.case_id == id);
          CHECK(c.severity == sev);
          CHECK(c.length_elements == len);
          CHECK(c.start_element == 3 * (loc + 1));
          CHECK(c.location_index() == loc);
          CHECK(c.knockdown_factor == kKnockdown[sev]);
          CHECK(damage_case(id).start_element == c.start_element);
        }
    CHECK_THROWS_AS(damage_case(61), Error);
    CHECK_THROWS_AS(damage_case(-1), Error);
    CHECK_THROWS_AS(make_damage(4, 1, 0), Error);
    CHECK_THROWS_AS(make_damage(1, 3, 0), Error);
    CHECK_THROWS_AS(make_damage(1, 1, 10), Error);
  }

  TEST_CASE("damage only touches the knocked-down elements") {
    const auto base = pristine_model(BeamConfig{});
    const auto d = apply_damage(base, make_damage(2, 2, 4));  // elements 15, 16
    for (int e = 1; e <= 36; ++e) {
      const double ratio = d.element_ei[e - 1] / base.element_ei[e - 1];
      CHECK(ratio == doctest::Approx(e == 15 || e == 16 ? 0.75 : 1.0));
    }
    CHECK((d.mass - base.mass).norm() == 0.0);
    CHECK(apply_damage(base, pristine_case()).stiffness == base.stiffness);
  }

  TEST_CASE("stiffness loss never raises a frequency (all 60 cases)") {
    const auto base = pristine_model(BeamConfig{});
    const auto ref = solve_modes(base, 4, 0.0);
    for (const auto& c : enumerate_damage_cases()) {
      if (c.pristine()) continue;
      const auto m = solve_modes(apply_damage(base, c), 4, 0.0);
      for (int i = 0; i < 4; ++i) CHECK(m.omegas(i) <= ref.omegas(i) * (1.0 + 1e-12));
      CHECK(m.omegas(0) < ref.omegas(0));
    }
  }

  TEST_CASE("omega_1 strictly decreases with severity at every location and length") {
    const auto base = pristine_model(BeamConfig{});
    const double w0 = solve_modes(base, 1, 0.0).omegas(0);
    for (int len = 1; len <= 2; ++len)
      for (int loc = 0; loc < 10; ++loc) {
        double prev = w0;
        for (int sev = 1; sev <= 3; ++sev) {
          const double w = solve_modes(apply_damage(base, make_damage(sev, len, loc)), 1, 0.0).omegas(0);
          CHECK(w < prev);
          prev = w;
        }
      }
  }

  TEST_CASE("invalid inputs") {
    BeamConfig bad;
    bad.n_elements = 0;
    CHECK_THROWS_AS(pristine_model(bad), Error);
    bad = BeamConfig{};
    bad.length = -1.0;
    CHECK_THROWS_AS(pristine_model(bad), Error);
    const auto model = pristine_model(BeamConfig{});
    CHECK_THROWS_AS(solve_modes(model, 0, 0.0), Error);
    CHECK_THROWS_AS(solve_modes(model, 73, 0.0), Error);
    CHECK_THROWS_AS(solve_modes(model, 4, 1.0), Error);
    CHECK_THROWS_AS(assemble_system(BeamConfig{}, std::vector<double>(36, -1.0)), Error);
    CHECK_THROWS_AS(assemble_system(BeamConfig{}, std::vector<double>(35, 1.0)), Error);
  }
}
