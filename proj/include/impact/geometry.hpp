#ifndef IMPACT_GEOMETRY_HPP
#define IMPACT_GEOMETRY_HPP

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <cmath>
#include <numbers>
#include <optional>

#include "impact/errors.hpp"
#include "impact/types.hpp"

namespace impact {

inline constexpr double kDegToRad = std::numbers::pi / 180.0;
inline constexpr double kRadToDeg = 180.0 / std::numbers::pi;

// ---------------------------------------------------------------------------
// Rig convention (used consistently here and by the simulator, so geometry
// and simulation agree by construction):
//   * The impactor axis is the global x-axis; the impactor travels toward +x.
//   * The head CoG sits at the global origin; in the neutral pose
//     (alpha = beta = 0) the face points toward the incoming impactor, i.e.
//     anatomical +x maps to global -x. A head yawed by alpha and pitched by
//     beta has anatomical->global rotation A = Rz(alpha) * Ry(beta) * Rz(pi).
//   * Offsets move the head, so in head-centered global coordinates the
//     impact line passes through (t, -Y, -Z).
// With z pointing top->bottom, alpha = 0 strikes the facemask, positive
// alpha walks the hit point toward the left side and around to the back,
// beta = +70 deg reaches the crown, beta = -45 deg the chin.
// ---------------------------------------------------------------------------

inline Eigen::Matrix3d setup_rotation(double alpha_deg, double beta_deg) {
  const Eigen::AngleAxisd yaw(alpha_deg * kDegToRad, Eigen::Vector3d::UnitZ());
  const Eigen::AngleAxisd pitch(beta_deg * kDegToRad, Eigen::Vector3d::UnitY());
  const Eigen::AngleAxisd face_flip(std::numbers::pi, Eigen::Vector3d::UnitZ());
  return (yaw * pitch * face_flip).toRotationMatrix();
}

// The impactor trajectory expressed in the head (anatomical) frame.
// `point` is a point on the line (mm), `direction` the unit travel direction
// of the impactor (pointing from the impactor toward the head).
struct ImpactLine {
  Eigen::Vector3d point;
  Eigen::Vector3d direction;
};

inline ImpactLine impact_line(const ImpactSetup& setup) {
  const Eigen::Matrix3d a = setup_rotation(setup.alpha_deg, setup.beta_deg);
  ImpactLine line;
  line.point = a.transpose() * Eigen::Vector3d(0.0, -setup.y_mm, -setup.z_mm);
  line.direction = (a.transpose() * Eigen::Vector3d::UnitX()).normalized();
  return line;
}

// First intersection of the line with the sphere of the given radius about
// the origin, i.e. the surface point the impactor crosses first. Returns
// nothing when the line misses the sphere.
inline std::optional<Eigen::Vector3d> sphere_intersection(
    const ImpactLine& line, double radius_mm = kSphereRadiusMm) {
  const Eigen::Vector3d& p = line.point;
  const Eigen::Vector3d& d = line.direction;
  const double b = p.dot(d);
  const double c = p.squaredNorm() - radius_mm * radius_mm;
  const double disc = b * b - c;
  if (disc < 0.0) return std::nullopt;
  const double t = -b - std::sqrt(disc);
  return p + t * d;
}

// Spherical coordinates of a point on the 135 mm sphere.
inline ImpactLocation to_location(const Eigen::Vector3d& point_mm) {
  require(std::abs(point_mm.norm() - kSphereRadiusMm) <= 1e-6,
          ErrorCode::InvalidArgument, "point does not lie on the 135 mm sphere");
  ImpactLocation loc;
  loc.theta_deg = std::atan2(point_mm.y(), point_mm.x()) * kRadToDeg;
  loc.eta_deg = std::asin(std::clamp(point_mm.z() / kSphereRadiusMm, -1.0, 1.0)) *
                kRadToDeg;
  return loc;
}

// Five-class helmet region. eta < -34 deg is the helmet top (z points down,
// so the crown has negative eta); otherwise theta picks the quadrant.
// Interval boundaries belong to the lower edge so the partition is total.
inline HelmetRegion classify_region(const ImpactLocation& loc) {
  if (loc.eta_deg < -34.0) return HelmetRegion::Top;
  const double theta = loc.theta_deg;
  if (theta >= -45.0 && theta < 45.0) return HelmetRegion::Facemask;
  if (theta >= 45.0 && theta < 135.0) return HelmetRegion::Right;
  if (theta >= -135.0 && theta < -45.0) return HelmetRegion::Left;
  return HelmetRegion::Back;
}

inline HelmetRegion setup_to_region(const ImpactSetup& setup) {
  const auto hit = sphere_intersection(impact_line(setup));
  require(hit.has_value(), ErrorCode::NoIntersection,
          "impact line does not strike the helmet sphere");
  return classify_region(to_location(*hit));
}

}  // namespace impact

#endif  // IMPACT_GEOMETRY_HPP
