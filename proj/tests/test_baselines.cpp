#include <doctest.h>

#include "impact/baselines.hpp"
#include "impact/kinematics.hpp"
#include "impact/random.hpp"
#include "oracles.hpp"

using namespace impact;

TEST_CASE("opposite linear acceleration: axis peaks") {
  KinematicSeries s = KinematicSeries::zeros();
  s.lin_acc.col(40) = Eigen::Vector3d(-100, 0, 0);  // frontal blow pushes back
  const ImpactLocation front = opposite_linear_acceleration(s);
  CHECK(front.theta_deg == doctest::Approx(0.0));
  CHECK(front.eta_deg == doctest::Approx(0.0));

  s.lin_acc.col(40) = Eigen::Vector3d(0, 100, 0);
  const ImpactLocation left = opposite_linear_acceleration(s);
  CHECK(left.theta_deg == doctest::Approx(-90.0));
}

TEST_CASE("opposite linear acceleration: zero input is degenerate") {
  CHECK_THROWS_AS(opposite_linear_acceleration(KinematicSeries::zeros()), Error);
}

TEST_CASE("peak selection breaks ties at the earliest sample") {
  KinematicSeries s = KinematicSeries::zeros();
  s.lin_acc.col(30) = Eigen::Vector3d(0, 0, 50);
  s.lin_acc.col(90) = Eigen::Vector3d(50, 0, 0);  // same magnitude, later
  const ImpactLocation loc = opposite_linear_acceleration(s);
  CHECK(loc.eta_deg == doctest::Approx(-90.0));  // opposite of +z peak
}

TEST_CASE("revised opposite: correction is a no-op when already orthogonal") {
  // Peak acceleration along -x gives the estimate u = +x; the angular
  // acceleration axis is z, orthogonal to u.
  KinematicSeries s = oracles::series_with_peak(Eigen::Vector3d(-80, 0, 0),
                                                Eigen::Vector3d(0, 0, 300));
  const RevisedEstimate est = revised_opposite(s, LinearKind::Acceleration);
  CHECK_FALSE(est.degenerate_correction);
  CHECK(est.location.theta_deg == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(est.location.eta_deg == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("revised opposite: zero rotation falls back to the uncorrected estimate") {
  KinematicSeries s = KinematicSeries::zeros();
  s.lin_acc.col(50) = Eigen::Vector3d(-120, 30, 0);
  const RevisedEstimate est = revised_opposite(s, LinearKind::Acceleration);
  CHECK(est.degenerate_correction);
  const ImpactLocation plain = opposite_linear_acceleration(s);
  CHECK(est.location.theta_deg == doctest::Approx(plain.theta_deg));
  CHECK(est.location.eta_deg == doctest::Approx(plain.eta_deg));
}

TEST_CASE("revised opposite: output is orthogonal to the correction axis") {
  Rng rng(211);
  int applied = 0;
  for (int i = 0; i < 100; ++i) {
    KinematicSeries s = KinematicSeries::zeros();
    for (int k = 0; k < kSamples; ++k) {
      for (int r = 0; r < 3; ++r) {
        s.lin_acc(r, k) = rng.normal() * 60.0;
        s.ang_vel(r, k) = rng.normal() * 8.0;
      }
    }
    for (const LinearKind kind :
         {LinearKind::Acceleration, LinearKind::Velocity, LinearKind::Position}) {
      const RevisedEstimate est = revised_opposite(s, kind);
      if (est.degenerate_correction) continue;
      ++applied;
      const Eigen::Matrix3Xd aa = angular_acceleration(s);
      Eigen::Index t = 0;
      aa.colwise().norm().maxCoeff(&t);
      const Eigen::Vector3d axis = aa.col(t).normalized();
      const double rad = est.location.radius_mm;
      const double th = est.location.theta_deg * kDegToRad;
      const double el = est.location.eta_deg * kDegToRad;
      const Eigen::Vector3d r(rad * std::cos(el) * std::cos(th),
                              rad * std::cos(el) * std::sin(th), rad * std::sin(el));
      CHECK(std::abs(r.dot(axis)) / rad < 1e-9);
    }
  }
  CHECK(applied > 0);
}

TEST_CASE("matching force/torque: zero torque puts the hit on the force antipode") {
  // Head decelerating backward with no rotation: contact through the CoG.
  RigidBodyParams params;
  KinematicSeries s = KinematicSeries::zeros();
  s.lin_acc.col(60) = Eigen::Vector3d(-1000.0 / params.mass_kg, 0, 0);
  const ForceTorqueEstimate est = matching_force_torque(s, params);
  CHECK_FALSE(est.out_of_reach);
  CHECK(est.location.theta_deg == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(est.location.eta_deg == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(est.force_peak_kN == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("matching force/torque: constructed cases are recovered") {
  RigidBodyParams params;
  Rng rng(223);
  for (int i = 0; i < 200; ++i) {
    const Eigen::Vector3d r0 = 0.135 * oracles::random_unit(rng);  // m
    Eigen::Vector3d force = 2000.0 * oracles::random_unit(rng);
    if (r0.dot(force) >= 0.0) force = -force;  // contact pushes into the head
    const Eigen::Vector3d torque = r0.cross(force);

    const KinematicSeries s = oracles::series_with_peak(
        force / params.mass_kg, params.inertia.inverse() * torque);
    const ForceTorqueEstimate est = matching_force_torque(s, params);
    REQUIRE_FALSE(est.out_of_reach);

    const double th = est.location.theta_deg * kDegToRad;
    const double el = est.location.eta_deg * kDegToRad;
    const Eigen::Vector3d r(0.135 * std::cos(el) * std::cos(th),
                            0.135 * std::cos(el) * std::sin(th), 0.135 * std::sin(el));
    const double angle = std::acos(std::clamp(r.dot(r0) / (r.norm() * r0.norm()), -1.0, 1.0));
    CHECK(angle < 1e-6);
    CHECK((r.cross(force) - torque).norm() / torque.norm() < 1e-9);
    CHECK(est.force_peak_kN == doctest::Approx(force.norm() * 1e-3).epsilon(1e-9));
  }
}

TEST_CASE("matching force/torque: unreachable torque is flagged") {
  RigidBodyParams params;
  // Torque that needs a 1 m moment arm on a 0.135 m sphere.
  const Eigen::Vector3d force(0, -500.0, 0);
  const Eigen::Vector3d torque(0, 0, 500.0);  // |F x T| / |F|^2 = 1 m
  const KinematicSeries s = oracles::series_with_peak(
      force / params.mass_kg, params.inertia.inverse() * torque);
  const ForceTorqueEstimate est = matching_force_torque(s, params);
  CHECK(est.out_of_reach);
  CHECK(std::abs(est.location.radius_mm - kSphereRadiusMm) < 1e-9);
}

TEST_CASE("matching force/torque: zero acceleration is degenerate") {
  RigidBodyParams params;
  CHECK_THROWS_AS(matching_force_torque(KinematicSeries::zeros(), params), Error);
}

TEST_CASE("all estimators are mirror-equivariant") {
  Rng rng(227);
  RigidBodyParams params;
  for (int i = 0; i < 50; ++i) {
    KinematicSeries s = KinematicSeries::zeros();
    for (int k = 0; k < kSamples; ++k) {
      for (int r = 0; r < 3; ++r) {
        s.lin_acc(r, k) = rng.normal() * 80.0;
        s.ang_vel(r, k) = rng.normal() * 10.0;
      }
    }
    const KinematicSeries m = mirror(s);
    const auto check_pair = [&](const ImpactLocation& a, const ImpactLocation& b) {
      CHECK(std::abs(a.theta_deg + b.theta_deg) < 1e-6);
      CHECK(std::abs(a.eta_deg - b.eta_deg) < 1e-6);
    };
    check_pair(opposite_linear_acceleration(s), opposite_linear_acceleration(m));
    for (const LinearKind kind :
         {LinearKind::Acceleration, LinearKind::Velocity, LinearKind::Position}) {
      check_pair(revised_opposite(s, kind).location, revised_opposite(m, kind).location);
    }
    check_pair(matching_force_torque(s, params).location,
               matching_force_torque(m, params).location);
  }
}

TEST_CASE("rigid body parameter validation") {
  RigidBodyParams bad;
  bad.mass_kg = -1.0;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad.mass_kg = 4.54;
  bad.inertia = Eigen::Vector3d(1.0, -1.0, 1.0).asDiagonal();
  CHECK_THROWS_AS(bad.validate(), Error);
}
