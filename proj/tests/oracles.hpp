// Independent reference implementations used by the unit and acceptance
// suites. Everything here deliberately avoids the library's computation path
// for the quantity it checks.
#ifndef IMPACT_TESTS_ORACLES_HPP
#define IMPACT_TESTS_ORACLES_HPP

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <optional>
#include <vector>

#include "impact/geometry.hpp"
#include "impact/random.hpp"
#include "impact/types.hpp"

namespace impact::oracles {

// Net squared-magnitude response of one biquad applied forward and backward,
// evaluated by direct complex arithmetic from the coefficients.
inline double zero_phase_gain(double b0, double b1, double b2, double a1, double a2,
                              double f_hz, double fs_hz) {
  const std::complex<double> z =
      std::polar(1.0, -2.0 * std::numbers::pi * f_hz / fs_hz);
  const std::complex<double> h = (b0 + b1 * z + b2 * z * z) / (1.0 + a1 * z + a2 * z * z);
  return std::norm(h);
}

// Brute-force line-sphere intersection: march 0.01 mm steps from far outside
// until the point enters the sphere, then bisect the bracketing interval.
inline std::optional<Eigen::Vector3d> ray_march_intersection(const ImpactLine& line,
                                                             double radius_mm) {
  const double r_sq = radius_mm * radius_mm;
  const auto inside = [&](double t) {
    return (line.point + t * line.direction).squaredNorm() <= r_sq;
  };
  constexpr double kStep = 0.01;
  constexpr double kRange = 400.0;
  const int n_steps = static_cast<int>(2.0 * kRange / kStep);
  double t_inside = 0.0;
  bool found = false;
  for (int i = 0; i <= n_steps; ++i) {
    const double t = -kRange + i * kStep;
    if (inside(t)) {
      t_inside = t;
      found = true;
      break;
    }
  }
  if (!found) return std::nullopt;
  double lo = t_inside - kStep;  // outside
  double hi = t_inside;          // inside
  for (int i = 0; i < 80; ++i) {
    const double mid = 0.5 * (lo + hi);
    (inside(mid) ? hi : lo) = mid;
  }
  return line.point + hi * line.direction;
}

// Plain-loop metric recomputations.
inline double mae_loops(const std::vector<double>& pred, const std::vector<double>& ref) {
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += std::abs(pred[i] - ref[i]);
  return s / static_cast<double>(pred.size());
}

inline double rmse_loops(const std::vector<double>& pred, const std::vector<double>& ref) {
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    s += (pred[i] - ref[i]) * (pred[i] - ref[i]);
  }
  return std::sqrt(s / static_cast<double>(pred.size()));
}

inline double r2_loops(const std::vector<double>& pred, const std::vector<double>& ref) {
  double mean = 0.0;
  for (double v : ref) mean += v;
  mean /= static_cast<double>(ref.size());
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    ss_res += (pred[i] - ref[i]) * (pred[i] - ref[i]);
    ss_tot += (ref[i] - mean) * (ref[i] - mean);
  }
  return 1.0 - ss_res / ss_tot;
}

inline std::vector<double> profile_peaks_loops(const Eigen::MatrixXd& profiles) {
  std::vector<double> peaks;
  for (Eigen::Index r = 0; r < profiles.rows(); ++r) {
    double best = profiles(r, 0);
    for (Eigen::Index c = 1; c < profiles.cols(); ++c) {
      if (profiles(r, c) > best) best = profiles(r, c);
    }
    peaks.push_back(best);
  }
  return peaks;
}

inline std::vector<double> flatten(const Eigen::MatrixXd& m) {
  std::vector<double> out;
  out.reserve(m.size());
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) out.push_back(m(r, c));
  }
  return out;
}

// A kinematic series whose peak force/torque state is known in closed form:
// at the acceleration peak t*, lin_acc = accel_peak and ang_vel crosses zero
// with slope ang_acc_peak, so the free-body force is m * accel_peak and the
// torque is I * ang_acc_peak exactly.
inline KinematicSeries series_with_peak(const Eigen::Vector3d& accel_peak,
                                        const Eigen::Vector3d& ang_acc_peak) {
  KinematicSeries s = KinematicSeries::zeros(Frame::Anatomical);
  const int t_star = 70;
  s.lin_acc.col(t_star) = accel_peak;
  for (int k = 0; k < kSamples; ++k) {
    s.ang_vel.col(k) = (k - t_star) * s.dt * ang_acc_peak;
  }
  return s;
}

// Random unit vector.
inline Eigen::Vector3d random_unit(Rng& rng) {
  while (true) {
    const Eigen::Vector3d v(rng.normal(), rng.normal(), rng.normal());
    const double n = v.norm();
    if (n > 1e-3) return v / n;
  }
}

}  // namespace impact::oracles

#endif  // IMPACT_TESTS_ORACLES_HPP
