#ifndef IMPACT_FILTER_HPP
#define IMPACT_FILTER_HPP

#include <Eigen/Dense>
#include <cmath>
#include <numbers>

#include "impact/errors.hpp"

namespace impact {

// Second-order Butterworth low-pass, bilinear transform with frequency
// prewarping. Transfer function
//   H(z) = (b0 + b1 z^-1 + b2 z^-2) / (1 + a1 z^-1 + a2 z^-2)
// with K = tan(pi fc / fs):
//   b0 = K^2 / (1 + sqrt2 K + K^2), b1 = 2 b0, b2 = b0,
//   a1 = 2 (K^2 - 1) / (1 + sqrt2 K + K^2),
//   a2 = (1 - sqrt2 K + K^2) / (1 + sqrt2 K + K^2).
struct BiquadCoeffs {
  double b0, b1, b2, a1, a2;

  double dc_gain() const { return (b0 + b1 + b2) / (1.0 + a1 + a2); }
};

inline BiquadCoeffs butterworth_lowpass(double cutoff_hz, double fs_hz) {
  require(cutoff_hz > 0.0 && fs_hz > 0.0, ErrorCode::InvalidArgument,
          "filter frequencies must be positive");
  require(cutoff_hz < 0.5 * fs_hz, ErrorCode::InvalidArgument,
          "cutoff must be below the Nyquist frequency");
  const double k = std::tan(std::numbers::pi * cutoff_hz / fs_hz);
  const double norm = 1.0 / (1.0 + std::numbers::sqrt2 * k + k * k);
  BiquadCoeffs c{};
  c.b0 = k * k * norm;
  c.b1 = 2.0 * c.b0;
  c.b2 = c.b0;
  c.a1 = 2.0 * (k * k - 1.0) * norm;
  c.a2 = (1.0 - std::numbers::sqrt2 * k + k * k) * norm;
  return c;
}

// Squared magnitude response of the biquad at frequency f (the net gain of
// one forward-backward application).
inline double biquad_gain_squared(const BiquadCoeffs& c, double f_hz, double fs_hz) {
  const double w = 2.0 * std::numbers::pi * f_hz / fs_hz;
  const std::complex<double> z1 = std::polar(1.0, -w);
  const std::complex<double> z2 = z1 * z1;
  const std::complex<double> h =
      (c.b0 + c.b1 * z1 + c.b2 * z2) / (1.0 + c.a1 * z1 + c.a2 * z2);
  return std::norm(h);
}

namespace detail {

// One causal pass (direct form II transposed). The state is seeded with the
// steady-state response to a step of the first sample, so constant inputs
// pass through with no start-up transient.
template <typename Scalar>
void biquad_pass(const BiquadCoeffs& c, Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& x) {
  const Scalar g = Scalar(c.dc_gain());
  Scalar z1 = Scalar(c.b1 + c.b2 - (c.a1 + c.a2) * g) * x[0];
  Scalar z2 = Scalar(c.b2 - c.a2 * g) * x[0];
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const Scalar xi = x[i];
    const Scalar yi = Scalar(c.b0) * xi + z1;
    z1 = Scalar(c.b1) * xi - Scalar(c.a1) * yi + z2;
    z2 = Scalar(c.b2) * xi - Scalar(c.a2) * yi;
    x[i] = yi;
  }
}

}  // namespace detail

// Zero-phase low-pass: the signal is extended by odd reflection (3x the
// filter order on each side), run through the biquad once in each time
// direction, and the two pass orders (forward-then-backward and
// backward-then-forward) are averaged. The averaging makes the operator
// commute exactly with time reversal; each single order only commutes up to
// edge transients.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> zero_phase_lowpass(
    const Eigen::MatrixBase<Derived>& signal, double cutoff_hz = 300.0,
    double fs_hz = 1000.0) {
  using Scalar = typename Derived::Scalar;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  constexpr int kOrder = 2;
  constexpr Eigen::Index kPad = 3 * kOrder;

  const Vector x = signal;
  const Eigen::Index n = x.size();
  require(n >= 10, ErrorCode::InvalidArgument,
          "signal too short for zero-phase filtering (need at least 10 samples)");
  const BiquadCoeffs c = butterworth_lowpass(cutoff_hz, fs_hz);

  Vector padded(n + 2 * kPad);
  for (Eigen::Index i = 0; i < kPad; ++i) {
    padded[i] = Scalar(2) * x[0] - x[kPad - i];
    padded[n + kPad + i] = Scalar(2) * x[n - 1] - x[n - 2 - i];
  }
  padded.segment(kPad, n) = x;

  const auto run_both = [&](Vector v, bool forward_first) {
    if (!forward_first) v.reverseInPlace();
    detail::biquad_pass(c, v);
    v.reverseInPlace();
    detail::biquad_pass(c, v);
    if (forward_first) v.reverseInPlace();
    return v;
  };

  const Vector fb = run_both(padded, true);
  const Vector bf = run_both(padded, false);
  return Scalar(0.5) * (fb.segment(kPad, n) + bf.segment(kPad, n));
}

}  // namespace impact

#endif  // IMPACT_FILTER_HPP
