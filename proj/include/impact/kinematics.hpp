#ifndef IMPACT_KINEMATICS_HPP
#define IMPACT_KINEMATICS_HPP

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <vector>

#include "impact/errors.hpp"
#include "impact/filter.hpp"
#include "impact/types.hpp"

namespace impact {

using QuaternionSequence = std::vector<Eigen::Quaterniond>;

// Rotation quaternion for a rotation vector v (axis * angle, rad), with a
// first-order fallback near zero angle where the axis is undefined.
inline Eigen::Quaterniond quaternion_from_rotation_vector(const Eigen::Vector3d& v) {
  const double angle = v.norm();
  if (angle < 1e-12) {
    Eigen::Quaterniond q(1.0, 0.5 * v.x(), 0.5 * v.y(), 0.5 * v.z());
    q.normalize();
    return q;
  }
  return Eigen::Quaterniond(Eigen::AngleAxisd(angle, v / angle));
}

inline Eigen::Vector3d rotation_vector(const Eigen::Quaterniond& q) {
  const Eigen::AngleAxisd aa(q);
  return aa.angle() * aa.axis();
}

// Time derivative by finite differences: central in the interior, one-sided
// at the two endpoints. Exact for signals linear in time.
inline Eigen::Matrix3Xd differentiate(const Eigen::Matrix3Xd& v, double dt) {
  const Eigen::Index n = v.cols();
  require(n >= 2, ErrorCode::InvalidArgument, "need at least 2 samples to differentiate");
  Eigen::Matrix3Xd d(3, n);
  d.col(0) = (v.col(1) - v.col(0)) / dt;
  d.col(n - 1) = (v.col(n - 1) - v.col(n - 2)) / dt;
  for (Eigen::Index k = 1; k + 1 < n; ++k) {
    d.col(k) = (v.col(k + 1) - v.col(k - 1)) / (2.0 * dt);
  }
  return d;
}

// Tri-axial angular acceleration (rad/s^2) of a series, same frame and length.
inline Eigen::Matrix3Xd angular_acceleration(const KinematicSeries& series) {
  series.validate();
  return differentiate(series.ang_vel, series.dt);
}

// Integrates body-frame angular velocity into an orientation history
// (body -> global), starting from the identity. Per step the midpoint
// angular velocity drives an exact axis-angle increment:
//   q[k+1] = q[k] * exp( (w[k] + w[k+1])/2 * dt ),
// which reproduces constant-rate rotations exactly. Every quaternion is
// renormalized.
inline QuaternionSequence integrate_orientation(const Eigen::Matrix3Xd& ang_vel,
                                                double dt) {
  require(ang_vel.allFinite(), ErrorCode::InvalidArgument,
          "angular velocity contains non-finite values");
  const Eigen::Index n = ang_vel.cols();
  QuaternionSequence q(static_cast<std::size_t>(n));
  q[0] = Eigen::Quaterniond::Identity();
  for (Eigen::Index k = 0; k + 1 < n; ++k) {
    const Eigen::Vector3d w_mid = 0.5 * (ang_vel.col(k) + ang_vel.col(k + 1));
    q[k + 1] = q[k] * quaternion_from_rotation_vector(w_mid * dt);
    q[k + 1].normalize();
  }
  return q;
}

// Rotates an anatomical-frame series into the global frame sample by sample.
inline KinematicSeries to_global(const KinematicSeries& series,
                                 const QuaternionSequence& q_seq) {
  series.validate();
  require(series.frame == Frame::Anatomical, ErrorCode::InvalidState,
          "series is already in the global frame");
  require(static_cast<Eigen::Index>(q_seq.size()) == series.samples(),
          ErrorCode::InvalidArgument, "orientation history length mismatch");
  KinematicSeries out = series;
  out.frame = Frame::Global;
  for (Eigen::Index k = 0; k < series.samples(); ++k) {
    out.lin_acc.col(k) = q_seq[k] * series.lin_acc.col(k);
    out.ang_vel.col(k) = q_seq[k] * series.ang_vel.col(k);
  }
  return out;
}

// Re-expresses a tri-axial series in spherical coordinates. Rows of the
// result: rho = |v|, azimuth = atan2(y, x) in (-pi, pi], elevation =
// asin(z / rho) in [-pi/2, pi/2]. Vectors with rho < 1e-12 map to (rho, 0, 0).
inline Eigen::Matrix3Xd to_spherical_channels(const Eigen::Matrix3Xd& v) {
  require(v.allFinite(), ErrorCode::InvalidArgument, "non-finite input");
  Eigen::Matrix3Xd out(3, v.cols());
  for (Eigen::Index k = 0; k < v.cols(); ++k) {
    const double rho = v.col(k).norm();
    if (rho < 1e-12) {
      out.col(k) = Eigen::Vector3d(rho, 0.0, 0.0);
    } else {
      out.col(k) = Eigen::Vector3d(rho, std::atan2(v(1, k), v(0, k)),
                                   std::asin(std::clamp(v(2, k) / rho, -1.0, 1.0)));
    }
  }
  return out;
}

namespace detail {

inline void write_cartesian_block(Eigen::MatrixXd& data, int col0,
                                  const Eigen::Matrix3Xd& v) {
  data.middleCols(col0, 3) = v.transpose();
  data.col(col0 + 3) = v.colwise().norm().transpose();
}

inline void write_spherical_block(Eigen::MatrixXd& data, int col0,
                                  const Eigen::Matrix3Xd& v) {
  const Eigen::Matrix3Xd sph = to_spherical_channels(v);
  data.middleCols(col0, 3) = sph.transpose();
  data.col(col0 + 3) = sph.row(0).transpose();  // magnitude = rho
}

}  // namespace detail

// Builds the 145 x 48 feature tensor from a filtered anatomical-frame series:
// angular velocity, angular acceleration (finite differences of the filtered
// angular velocity) and linear acceleration, each with magnitude, under the
// four frames global / global-spherical / local / local-spherical. The global
// vectors are the local ones rotated by the orientation history integrated
// from the series' own angular velocity.
inline FeatureTensor build_features(const KinematicSeries& series) {
  series.validate();
  require(series.frame == Frame::Anatomical, ErrorCode::InvalidState,
          "feature construction expects an anatomical-frame series");

  const Eigen::Index n = series.samples();
  const Eigen::Matrix3Xd ang_acc = angular_acceleration(series);
  const QuaternionSequence q = integrate_orientation(series.ang_vel, series.dt);

  Eigen::Matrix3Xd w_glob(3, n), dw_glob(3, n), a_glob(3, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    w_glob.col(k) = q[k] * series.ang_vel.col(k);
    dw_glob.col(k) = q[k] * ang_acc.col(k);
    a_glob.col(k) = q[k] * series.lin_acc.col(k);
  }

  FeatureTensor out = FeatureTensor::zeros();
  const std::array<const Eigen::Matrix3Xd*, 3> local = {&series.ang_vel, &ang_acc,
                                                        &series.lin_acc};
  const std::array<const Eigen::Matrix3Xd*, 3> global = {&w_glob, &dw_glob, &a_glob};
  for (int v = 0; v < 3; ++v) {
    detail::write_cartesian_block(out.data, 0 + 4 * v, *global[v]);
    detail::write_spherical_block(out.data, 12 + 4 * v, *global[v]);
    detail::write_cartesian_block(out.data, 24 + 4 * v, *local[v]);
    detail::write_spherical_block(out.data, 36 + 4 * v, *local[v]);
  }
  return out;
}

// Applies the 300 Hz zero-phase low-pass to all six kinematic channels.
inline KinematicSeries filter_series(const KinematicSeries& series,
                                     double cutoff_hz = 300.0) {
  KinematicSeries out = series;
  const double fs = 1.0 / series.dt;
  for (int r = 0; r < 3; ++r) {
    out.lin_acc.row(r) = zero_phase_lowpass(series.lin_acc.row(r).transpose(),
                                            cutoff_hz, fs)
                             .transpose();
    out.ang_vel.row(r) = zero_phase_lowpass(series.ang_vel.row(r).transpose(),
                                            cutoff_hz, fs)
                             .transpose();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Sagittal mirror augmentation. The rig is symmetric about the vertical plane
// through the impactor axis, so flipping the signs of lin_acc y, ang_vel x,
// ang_vel z, setup Y and setup alpha produces another physically valid
// impact. Force magnitude profiles are invariant.
// ---------------------------------------------------------------------------

inline KinematicSeries mirror(const KinematicSeries& series) {
  KinematicSeries out = series;
  out.lin_acc.row(1) = -series.lin_acc.row(1);
  out.ang_vel.row(0) = -series.ang_vel.row(0);
  out.ang_vel.row(2) = -series.ang_vel.row(2);
  return out;
}

inline ImpactSetup mirror(const ImpactSetup& setup) {
  ImpactSetup out = setup;
  out.alpha_deg = -setup.alpha_deg;
  out.y_mm = -setup.y_mm;
  return out;
}

struct MirroredImpactData {
  KinematicSeries series;
  ImpactSetup setup;
  ForceProfile force_helmet;
  ForceProfile force_head;
};

inline MirroredImpactData mirror(const KinematicSeries& series, const ImpactSetup& setup,
                                 const ForceProfile& force_helmet,
                                 const ForceProfile& force_head) {
  return MirroredImpactData{mirror(series), mirror(setup), force_helmet, force_head};
}

// ---------------------------------------------------------------------------
// Feature normalization (z-score with training-split statistics).
// ---------------------------------------------------------------------------

inline constexpr double kStdFloor = 1e-12;

template <typename TensorRange>
ChannelStats fit_channel_stats(const TensorRange& tensors) {
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(kFeatureChannels);
  Eigen::VectorXd sum_sq = Eigen::VectorXd::Zero(kFeatureChannels);
  std::int64_t rows = 0;
  for (const auto& t : tensors) {
    const Eigen::MatrixXd& data = t.data;
    require(data.cols() == kFeatureChannels, ErrorCode::InvalidArgument,
            "feature tensor channel count mismatch");
    sum += data.colwise().sum().transpose();
    sum_sq += data.array().square().colwise().sum().matrix().transpose();
    rows += data.rows();
  }
  require(rows > 0, ErrorCode::InvalidArgument, "cannot fit stats on an empty set");
  ChannelStats stats;
  stats.mean = sum / static_cast<double>(rows);
  stats.std = (sum_sq / static_cast<double>(rows) - stats.mean.array().square().matrix())
                  .cwiseMax(0.0)
                  .cwiseSqrt();
  return stats;
}

// Per-channel z-score. Channels whose training std is below kStdFloor are
// centered but not divided.
inline FeatureTensor normalize(const FeatureTensor& tensor, const ChannelStats& stats) {
  require(stats.channels() == tensor.data.cols(), ErrorCode::InvalidArgument,
          "channel stats do not match the tensor layout");
  FeatureTensor out = tensor;
  for (Eigen::Index c = 0; c < tensor.data.cols(); ++c) {
    out.data.col(c).array() -= stats.mean[c];
    if (stats.std[c] >= kStdFloor) out.data.col(c) /= stats.std[c];
  }
  return out;
}

}  // namespace impact

#endif  // IMPACT_KINEMATICS_HPP
