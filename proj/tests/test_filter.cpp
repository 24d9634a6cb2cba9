#include <doctest.h>

#include <Eigen/Dense>
#include <numbers>

#include "impact/filter.hpp"
#include "impact/random.hpp"
#include "oracles.hpp"

using namespace impact;

TEST_CASE("butterworth coefficients match the documented design") {
  const BiquadCoeffs c = butterworth_lowpass(300.0, 1000.0);
  // Frozen from the bilinear-transform design at fc/fs = 0.3.
  CHECK(c.b0 == doctest::Approx(0.39133577250176854).epsilon(1e-14));
  CHECK(c.b1 == doctest::Approx(0.78267154500353709).epsilon(1e-14));
  CHECK(c.b2 == doctest::Approx(0.39133577250176854).epsilon(1e-14));
  CHECK(c.a1 == doctest::Approx(0.36952737735124114).epsilon(1e-14));
  CHECK(c.a2 == doctest::Approx(0.19581571265583303).epsilon(1e-14));
  CHECK(std::abs(c.dc_gain() - 1.0) < 1e-14);
}

TEST_CASE("constant signal passes with unit DC gain") {
  const Eigen::VectorXd x = Eigen::VectorXd::Constant(kSamples, 3.7);
  const Eigen::VectorXd y = zero_phase_lowpass(x);
  REQUIRE(y.size() == x.size());
  CHECK((y.array() - 3.7).abs().maxCoeff() < 1e-9);
}

TEST_CASE("symmetric triangular pulse keeps its peak sample") {
  for (int center : {40, 72, 100}) {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(kSamples);
    const int half = 12;
    for (int k = -half; k <= half; ++k) {
      x[center + k] = 1.0 - std::abs(k) / static_cast<double>(half);
    }
    const Eigen::VectorXd y = zero_phase_lowpass(x);
    Eigen::Index argmax = 0;
    y.maxCoeff(&argmax);
    CHECK(argmax == center);
  }
}

TEST_CASE("10 Hz sine amplitude matches the analytic response within 1%") {
  Eigen::VectorXd x(kSamples);
  for (int k = 0; k < kSamples; ++k) {
    x[k] = std::sin(2.0 * std::numbers::pi * 10.0 * k * 1e-3);
  }
  const Eigen::VectorXd y = zero_phase_lowpass(x);

  // Least-squares sin/cos fit over the interior samples.
  Eigen::MatrixXd basis(105, 2);
  Eigen::VectorXd rhs(105);
  for (int i = 0; i < 105; ++i) {
    const double t = (20 + i) * 1e-3;
    basis(i, 0) = std::sin(2.0 * std::numbers::pi * 10.0 * t);
    basis(i, 1) = std::cos(2.0 * std::numbers::pi * 10.0 * t);
    rhs[i] = y[20 + i];
  }
  const Eigen::Vector2d coef = basis.colPivHouseholderQr().solve(rhs);
  const double amplitude = coef.norm();

  const BiquadCoeffs c = butterworth_lowpass(300.0, 1000.0);
  const double expected =
      oracles::zero_phase_gain(c.b0, c.b1, c.b2, c.a1, c.a2, 10.0, 1000.0);
  CHECK(amplitude == doctest::Approx(expected).epsilon(0.01));
}

TEST_CASE("filtering commutes with time reversal") {
  Rng rng(9001);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::VectorXd x(kSamples);
    for (int k = 0; k < kSamples; ++k) x[k] = rng.normal() * 50.0;
    const Eigen::VectorXd a = zero_phase_lowpass(x.reverse().eval());
    const Eigen::VectorXd b = zero_phase_lowpass(x).reverse();
    CHECK((a - b).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("filter argument validation") {
  const Eigen::VectorXd x = Eigen::VectorXd::Zero(kSamples);
  CHECK_THROWS_AS(zero_phase_lowpass(x, 500.0, 1000.0), Error);  // at Nyquist
  CHECK_THROWS_AS(zero_phase_lowpass(x, 600.0, 1000.0), Error);
  const Eigen::VectorXd tiny = Eigen::VectorXd::Zero(9);
  CHECK_THROWS_AS(zero_phase_lowpass(tiny), Error);
  CHECK_NOTHROW(zero_phase_lowpass(Eigen::VectorXd::Zero(10)));
}

TEST_CASE("filter attenuates far above the cutoff") {
  // 450 Hz is near the Nyquist edge; the forward-backward pass should crush it.
  Eigen::VectorXd x(kSamples);
  for (int k = 0; k < kSamples; ++k) {
    x[k] = std::sin(2.0 * std::numbers::pi * 450.0 * k * 1e-3);
  }
  const Eigen::VectorXd y = zero_phase_lowpass(x);
  CHECK(y.segment(20, 105).cwiseAbs().maxCoeff() < 0.02);
}
