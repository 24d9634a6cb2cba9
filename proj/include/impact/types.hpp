#ifndef IMPACT_TYPES_HPP
#define IMPACT_TYPES_HPP

#include <Eigen/Dense>
#include <array>
#include <string>

#include "impact/errors.hpp"

namespace impact {

// Fixed signal geometry: 145 samples at 1 kHz.
inline constexpr int kSamples = 145;
inline constexpr double kSampleDt = 1e-3;      // s
inline constexpr double kSphereRadiusMm = 135.0;

// Head-fixed (anatomical) axes: x posterior->anterior, y left->right,
// z top->bottom. Global means the inertial frame that coincides with the
// anatomical frame at t = 0.
enum class Frame { Anatomical, Global };

inline const char* frame_name(Frame f) {
  return f == Frame::Anatomical ? "anatomical" : "global";
}

// Tri-axial head kinematics sampled at 1 kHz: linear acceleration (m/s^2)
// and angular velocity (rad/s), one column per sample.
struct KinematicSeries {
  Eigen::Matrix3Xd lin_acc;  // m/s^2
  Eigen::Matrix3Xd ang_vel;  // rad/s
  double dt = kSampleDt;     // s
  Frame frame = Frame::Anatomical;

  Eigen::Index samples() const { return lin_acc.cols(); }

  static KinematicSeries zeros(Frame frame = Frame::Anatomical) {
    KinematicSeries s;
    s.lin_acc = Eigen::Matrix3Xd::Zero(3, kSamples);
    s.ang_vel = Eigen::Matrix3Xd::Zero(3, kSamples);
    s.frame = frame;
    return s;
  }

  void validate() const {
    require(lin_acc.cols() == kSamples && ang_vel.cols() == kSamples,
            ErrorCode::InvalidArgument,
            "kinematic series must hold exactly 145 samples");
    require(std::abs(dt - kSampleDt) < 1e-15, ErrorCode::InvalidArgument,
            "kinematic series must be sampled at 1 ms");
    require(lin_acc.allFinite() && ang_vel.allFinite(),
            ErrorCode::InvalidArgument,
            "kinematic series contains non-finite values");
  }
};

// The five parameters that define one rig impact: yaw alpha and pitch beta of
// the headform (degrees), headform offsets Y and Z (mm), impactor speed (m/s).
struct ImpactSetup {
  double alpha_deg = 0.0;
  double beta_deg = 0.0;
  double y_mm = 0.0;
  double z_mm = 0.0;
  double speed_mps = 0.0;
};

// Hit point on the 135 mm circumscribed sphere in spherical coordinates.
// theta: azimuth (deg, (-180, 180], 0 = front of the face); eta: elevation
// (deg, positive toward the chin because z points top->bottom).
struct ImpactLocation {
  double theta_deg = 0.0;
  double eta_deg = 0.0;
  double radius_mm = kSphereRadiusMm;
};

enum class HelmetRegion { Facemask, Top, Back, Left, Right };

inline constexpr int kRegionCount = 5;

inline const char* region_name(HelmetRegion r) {
  switch (r) {
    case HelmetRegion::Facemask: return "facemask";
    case HelmetRegion::Top:      return "top";
    case HelmetRegion::Back:     return "back";
    case HelmetRegion::Left:     return "left";
    case HelmetRegion::Right:    return "right";
  }
  return "?";
}

inline HelmetRegion region_from_name(const std::string& name) {
  for (int i = 0; i < kRegionCount; ++i) {
    const auto r = static_cast<HelmetRegion>(i);
    if (name == region_name(r)) return r;
  }
  fail(ErrorCode::ParseError, "unknown helmet region: " + name);
}

// 145-sample force magnitude trace in kN.
struct ForceProfile {
  Eigen::VectorXd values_kN = Eigen::VectorXd::Zero(kSamples);

  double peak() const { return values_kN.maxCoeff(); }

  void validate() const {
    require(values_kN.size() == kSamples, ErrorCode::InvalidArgument,
            "force profile must hold exactly 145 samples");
    require(values_kN.allFinite(), ErrorCode::InvalidArgument,
            "force profile contains non-finite values");
    require(values_kN.minCoeff() >= 0.0, ErrorCode::InvalidArgument,
            "force profile contains negative values");
  }
};

// ---------------------------------------------------------------------------
// Model input tensor: 145 x 48, 12 kinematic channels under 4 reference
// frames. Frame blocks in order: global, global-spherical, local,
// local-spherical. Within a frame: angular velocity, angular acceleration,
// linear acceleration, each as (x, y, z, magnitude) for Cartesian frames and
// (rho, azimuth, elevation, magnitude) for spherical frames. The magnitude
// channel always equals the Euclidean norm (= rho), so it is identical
// between the Cartesian and spherical block of the same source frame.
// ---------------------------------------------------------------------------
inline constexpr int kFeatureChannels = 48;

struct FeatureTensor {
  Eigen::MatrixXd data;  // kSamples x kFeatureChannels

  static FeatureTensor zeros() {
    return FeatureTensor{Eigen::MatrixXd::Zero(kSamples, kFeatureChannels)};
  }
};

inline const std::array<std::string, kFeatureChannels>& channel_layout() {
  static const std::array<std::string, kFeatureChannels> names = [] {
    std::array<std::string, kFeatureChannels> out;
    const std::array<std::string, 4> frames = {"glob", "gsph", "loc", "lsph"};
    const std::array<std::string, 3> vecs = {"angvel", "angacc", "linacc"};
    const std::array<std::string, 4> cart = {"x", "y", "z", "mag"};
    const std::array<std::string, 4> sph = {"rho", "az", "el", "mag"};
    int k = 0;
    for (int f = 0; f < 4; ++f) {
      const bool spherical = (f == 1 || f == 3);
      for (int v = 0; v < 3; ++v) {
        for (int c = 0; c < 4; ++c) {
          out[k++] = frames[f] + "." + vecs[v] + "." + (spherical ? sph[c] : cart[c]);
        }
      }
    }
    return out;
  }();
  return names;
}

// Per-channel first and second moments of a training split, used for
// z-scoring features.
struct ChannelStats {
  Eigen::VectorXd mean;  // one entry per channel
  Eigen::VectorXd std;   // population standard deviation

  Eigen::Index channels() const { return mean.size(); }
};

}  // namespace impact

#endif  // IMPACT_TYPES_HPP
