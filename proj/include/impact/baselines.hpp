#ifndef IMPACT_BASELINES_HPP
#define IMPACT_BASELINES_HPP

#include <Eigen/Dense>

#include "impact/errors.hpp"
#include "impact/geometry.hpp"
#include "impact/kinematics.hpp"
#include "impact/types.hpp"

namespace impact {

// Head inertial properties for the rigid-body estimators. Defaults are the
// standard crash-test headform values; they set the force scale only.
struct RigidBodyParams {
  double mass_kg = 4.54;
  Eigen::Matrix3d inertia = Eigen::Vector3d(0.0200, 0.0230, 0.0170).asDiagonal();
  double sphere_radius_mm = kSphereRadiusMm;

  void validate() const {
    require(mass_kg > 0.0, ErrorCode::InvalidArgument, "mass must be positive");
    require(inertia.isApprox(inertia.transpose(), 1e-12),
            ErrorCode::InvalidArgument, "inertia tensor must be symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(inertia);
    require(es.eigenvalues().minCoeff() > 0.0, ErrorCode::InvalidArgument,
            "inertia tensor must be positive definite");
  }
};

namespace detail {

// Index of the column with the largest Euclidean norm, earliest on ties.
inline Eigen::Index peak_column(const Eigen::Matrix3Xd& v) {
  Eigen::Index best = 0;
  double best_sq = v.col(0).squaredNorm();
  for (Eigen::Index k = 1; k < v.cols(); ++k) {
    const double sq = v.col(k).squaredNorm();
    if (sq > best_sq) {
      best_sq = sq;
      best = k;
    }
  }
  return best;
}

// Cumulative trapezoidal integral, zero initial condition.
inline Eigen::Matrix3Xd cumulative_trapezoid(const Eigen::Matrix3Xd& v, double dt) {
  Eigen::Matrix3Xd out(3, v.cols());
  out.col(0).setZero();
  for (Eigen::Index k = 1; k < v.cols(); ++k) {
    out.col(k) = out.col(k - 1) + 0.5 * dt * (v.col(k - 1) + v.col(k));
  }
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Opposite linear acceleration: the head surface point antipodal to the CoG
// acceleration direction at the acceleration peak.
// ---------------------------------------------------------------------------
inline ImpactLocation opposite_linear_acceleration(const KinematicSeries& series) {
  series.validate();
  const Eigen::Index t = detail::peak_column(series.lin_acc);
  const double mag = series.lin_acc.col(t).norm();
  require(mag >= 1e-6, ErrorCode::DegenerateInput,
          "peak linear acceleration is zero");
  const Eigen::Vector3d point = -kSphereRadiusMm * series.lin_acc.col(t) / mag;
  return to_location(point);
}

// ---------------------------------------------------------------------------
// Revised opposite method: the opposite-direction estimate from linear
// acceleration, velocity, or position, corrected by projecting it onto the
// plane orthogonal to the peak angular-acceleration axis.
// ---------------------------------------------------------------------------
enum class LinearKind { Acceleration, Velocity, Position };

struct RevisedEstimate {
  ImpactLocation location;
  // True when the angular-acceleration peak was too small to define a
  // correction axis and the uncorrected estimate was returned.
  bool degenerate_correction = false;
};

inline RevisedEstimate revised_opposite(const KinematicSeries& series,
                                        LinearKind kind) {
  series.validate();

  Eigen::Matrix3Xd v = series.lin_acc;
  if (kind != LinearKind::Acceleration) {
    v = detail::cumulative_trapezoid(v, series.dt);  // velocity
    if (kind == LinearKind::Position) v = detail::cumulative_trapezoid(v, series.dt);
  }
  const Eigen::Index tv = detail::peak_column(v);
  const double vmag = v.col(tv).norm();
  require(vmag >= 1e-9, ErrorCode::DegenerateInput,
          "selected linear signal is zero at its peak");
  const Eigen::Vector3d u = -v.col(tv) / vmag;

  const Eigen::Matrix3Xd ang_acc = angular_acceleration(series);
  const Eigen::Index ta = detail::peak_column(ang_acc);
  const double amag = ang_acc.col(ta).norm();
  if (amag < 1e-6) {
    return RevisedEstimate{to_location(kSphereRadiusMm * u), true};
  }
  const Eigen::Vector3d axis = ang_acc.col(ta) / amag;
  const Eigen::Vector3d planar = u - u.dot(axis) * axis;
  require(planar.norm() >= 1e-12, ErrorCode::DegenerateInput,
          "estimate is parallel to the angular-acceleration axis");
  return RevisedEstimate{to_location(kSphereRadiusMm * planar.normalized()), false};
}

// ---------------------------------------------------------------------------
// Matching force and torque: treat the head as a free rigid body, evaluate
// net force and torque at the acceleration peak, and solve r x F = T for the
// contact point r on the head sphere.
// ---------------------------------------------------------------------------
struct ForceTorqueEstimate {
  ImpactLocation location;
  double force_peak_kN = 0.0;
  // True when no point on the sphere realizes the torque (required moment arm
  // exceeds the radius); the closest-point solution is returned instead.
  bool out_of_reach = false;
};

inline ForceTorqueEstimate matching_force_torque(const KinematicSeries& series,
                                                 const RigidBodyParams& params) {
  series.validate();
  params.validate();

  const Eigen::Index t = detail::peak_column(series.lin_acc);
  const Eigen::Vector3d force = params.mass_kg * series.lin_acc.col(t);  // N
  require(force.norm() >= 1e-3, ErrorCode::DegenerateInput,
          "net force is zero at the acceleration peak");

  const Eigen::Matrix3Xd ang_acc = angular_acceleration(series);
  const Eigen::Vector3d w = series.ang_vel.col(t);
  const Eigen::Vector3d torque =
      params.inertia * ang_acc.col(t) + w.cross(params.inertia * w);  // N m

  // r x F = T has the solution family r(lambda) = F x T / |F|^2 + lambda F^
  // (solving the component of T orthogonal to F; r x F cannot realize a
  // torque along F). On the sphere |r| = R the contact condition r . F < 0
  // picks the negative lambda root.
  const double radius_m = params.sphere_radius_mm * 1e-3;
  const Eigen::Vector3d r_perp = force.cross(torque) / force.squaredNorm();
  ForceTorqueEstimate out;
  out.force_peak_kN = force.norm() * 1e-3;

  const double reach_sq = radius_m * radius_m - r_perp.squaredNorm();
  Eigen::Vector3d r_m;
  if (reach_sq < 0.0) {
    out.out_of_reach = true;
    r_m = radius_m * r_perp.normalized();
  } else {
    r_m = r_perp - std::sqrt(reach_sq) * force.normalized();
  }
  out.location = to_location(1e3 * r_m);
  return out;
}

}  // namespace impact

#endif  // IMPACT_BASELINES_HPP
