#include "impact/surrogate.hpp"

#include <Eigen/Geometry>
#include <atomic>
#include <cmath>
#include <iostream>
#include <thread>

#include "impact/io.hpp"
#include "impact/kinematics.hpp"

namespace impact {

void SurrogateConfig::validate() const {
  require(impactor_mass_kg > 0.0 && contact_stiffness > 0.0 && contact_damping > 0.0 &&
              neck_translational_stiffness > 0.0 && neck_translational_damping > 0.0 &&
              neck_rotational_stiffness > 0.0 && neck_rotational_damping > 0.0,
          ErrorCode::InvalidArgument,
          "surrogate masses, stiffnesses and dampings must be positive");
  require(contact_exponent >= 1.0, ErrorCode::InvalidArgument,
          "contact exponent must be >= 1");
  require(transmission_factor > 0.0 && transmission_factor <= 1.0,
          ErrorCode::InvalidArgument, "transmission factor must be in (0, 1]");
  require(integration_dt > 0.0 && integration_dt <= 0.5 * output_dt,
          ErrorCode::InvalidArgument, "integration_dt must be <= output_dt / 2");
  const double ratio = output_dt / integration_dt;
  require(std::abs(ratio - std::round(ratio)) < 1e-9, ErrorCode::InvalidArgument,
          "output_dt must be an integer multiple of integration_dt");
  require(duration >= (kSamples - 1) * output_dt, ErrorCode::InvalidArgument,
          "duration too short for the 145-sample output window");
  head.validate();
}

void SimulatedImpact::validate() const {
  series.validate();
  require(series.frame == Frame::Anatomical, ErrorCode::InvalidArgument,
          "simulated series must be in the anatomical frame");
  force_helmet.validate();
  force_head.validate();
}

namespace {

// State layout: [0,3) head position (m), [3,6) head velocity, [6,10) body->sim
// quaternion (w,x,y,z), [10,13) body-frame angular velocity, [13] impactor
// position along the line, [14] impactor speed. Frame: anatomical axes at t=0.
using State = Eigen::Matrix<double, 15, 1>;

struct RigModel {
  SurrogateConfig config;
  Eigen::Vector3d line_point;      // m
  Eigen::Vector3d line_dir;        // unit
  Eigen::Vector3d hit_point_body;  // m, material contact point on the head
  Eigen::Matrix3d inertia;
  Eigen::Matrix3d inertia_inv;
  bool contact_released = false;
};

Eigen::Quaterniond state_quat(const State& s) {
  return Eigen::Quaterniond(s[6], s[7], s[8], s[9]).normalized();
}

// Penetration of the impactor past the (moving, rotating) material hit point,
// measured along the line, and its rate.
struct Contact {
  double depth = 0.0;
  double rate = 0.0;
  double force_N = 0.0;  // >= 0
};

Contact evaluate_contact(const RigModel& m, const State& s) {
  Contact c;
  if (m.contact_released) return c;
  const Eigen::Quaterniond q = state_quat(s);
  const Eigen::Vector3d arm = q * m.hit_point_body;          // CoG -> hit point
  const Eigen::Vector3d hit = s.segment<3>(0) + arm;         // sim frame
  c.depth = s[13] - m.line_dir.dot(hit - m.line_point);
  if (c.depth <= 0.0) return c;
  const Eigen::Vector3d omega_sim = q * s.segment<3>(10);
  const Eigen::Vector3d hit_vel = s.segment<3>(3) + omega_sim.cross(arm);
  c.rate = s[14] - m.line_dir.dot(hit_vel);
  c.force_N = std::max(
      0.0, m.config.contact_stiffness * std::pow(c.depth, m.config.contact_exponent) +
               m.config.contact_damping * c.rate);
  return c;
}

State derivative(const RigModel& m, const State& s) {
  const SurrogateConfig& cfg = m.config;
  const Eigen::Quaterniond q = state_quat(s);
  const Eigen::Vector3d vel = s.segment<3>(3);
  const Eigen::Vector3d omega_body = s.segment<3>(10);

  const Contact contact = evaluate_contact(m, s);
  const Eigen::Vector3d f_contact = contact.force_N * m.line_dir;

  const Eigen::Vector3d f_neck = -cfg.neck_translational_stiffness * s.segment<3>(0) -
                                 cfg.neck_translational_damping * vel;

  const Eigen::Vector3d omega_sim = q * omega_body;
  const Eigen::Vector3d tau_neck = -cfg.neck_rotational_stiffness * rotation_vector(q) -
                                   cfg.neck_rotational_damping * omega_sim;
  const Eigen::Vector3d tau_contact = (q * m.hit_point_body).cross(f_contact);
  const Eigen::Vector3d tau_body = q.conjugate() * (tau_neck + tau_contact);

  State d;
  d.segment<3>(0) = vel;
  d.segment<3>(3) = (f_contact + f_neck) / cfg.head.mass_kg;
  // dq/dt = q * (0, omega_body) / 2
  const Eigen::Quaterniond qdot =
      q * Eigen::Quaterniond(0.0, 0.5 * omega_body.x(), 0.5 * omega_body.y(),
                             0.5 * omega_body.z());
  d[6] = qdot.w();
  d.segment<3>(7) = qdot.vec();
  d.segment<3>(10) =
      m.inertia_inv * (tau_body - omega_body.cross(m.inertia * omega_body));
  d[13] = s[14];
  d[14] = -contact.force_N / cfg.impactor_mass_kg;
  return d;
}

void rk4_step(const RigModel& m, State& s, double dt) {
  const State k1 = derivative(m, s);
  const State k2 = derivative(m, s + 0.5 * dt * k1);
  const State k3 = derivative(m, s + 0.5 * dt * k2);
  const State k4 = derivative(m, s + dt * k3);
  s += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  s.segment<4>(6).normalize();
}

double stored_energy(const RigModel& m, const State& s, const Contact& contact) {
  const SurrogateConfig& cfg = m.config;
  const double v_neck_t = 0.5 * cfg.neck_translational_stiffness * s.segment<3>(0).squaredNorm();
  const double v_neck_r =
      0.5 * cfg.neck_rotational_stiffness * rotation_vector(state_quat(s)).squaredNorm();
  const double v_contact =
      contact.depth > 0.0
          ? cfg.contact_stiffness * std::pow(contact.depth, cfg.contact_exponent + 1.0) /
                (cfg.contact_exponent + 1.0)
          : 0.0;
  return v_neck_t + v_neck_r + v_contact;
}

}  // namespace

SimulatedImpact simulate_impact(const ImpactSetup& setup, const SurrogateConfig& config) {
  return simulate_impact(setup, config, nullptr);
}

SimulatedImpact simulate_impact(const ImpactSetup& setup, const SurrogateConfig& config,
                                SimTrace* trace) {
  config.validate();

  const ImpactLine line = impact_line(setup);
  const auto hit_mm = sphere_intersection(line, config.head.sphere_radius_mm);
  require(hit_mm.has_value(), ErrorCode::NoIntersection,
          "impact line does not strike the helmet sphere");

  RigModel m;
  m.config = config;
  m.line_point = line.point * 1e-3;
  m.line_dir = line.direction;
  m.hit_point_body = *hit_mm * 1e-3;
  m.inertia = config.head.inertia;
  m.inertia_inv = config.head.inertia.inverse();

  State s = State::Zero();
  s[6] = 1.0;  // identity quaternion
  s[13] = m.line_dir.dot(m.hit_point_body - m.line_point);
  s[14] = setup.speed_mps;

  const int steps_per_sample = static_cast<int>(std::round(config.output_dt / config.integration_dt));
  const int total_steps = static_cast<int>(std::round(config.duration / config.integration_dt));

  KinematicSeries series = KinematicSeries::zeros(Frame::Anatomical);
  ForceProfile f_helmet, f_head;
  if (trace != nullptr) {
    trace->kinetic_impactor.resize(kSamples);
    trace->kinetic_head.resize(kSamples);
    trace->potential.resize(kSamples);
    trace->penetration.resize(kSamples);
    trace->force_helmet_N.resize(kSamples);
  }

  bool has_contacted = false;
  int sample = 0;
  for (int step = 0; step <= total_steps; ++step) {
    if (step % steps_per_sample == 0 && sample < kSamples) {
      const Eigen::Quaterniond q = state_quat(s);
      const State d = derivative(m, s);
      series.lin_acc.col(sample) = q.conjugate() * d.segment<3>(3);
      series.ang_vel.col(sample) = s.segment<3>(10);
      const Contact contact = evaluate_contact(m, s);
      f_helmet.values_kN[sample] = contact.force_N * 1e-3;
      f_head.values_kN[sample] = config.transmission_factor * contact.force_N * 1e-3;
      if (trace != nullptr) {
        trace->kinetic_impactor[sample] = 0.5 * config.impactor_mass_kg * s[14] * s[14];
        trace->kinetic_head[sample] =
            0.5 * config.head.mass_kg * s.segment<3>(3).squaredNorm() +
            0.5 * s.segment<3>(10).dot(m.inertia * s.segment<3>(10));
        trace->potential[sample] = stored_energy(m, s, contact);
        trace->penetration[sample] = contact.depth;
        trace->force_helmet_N[sample] = contact.force_N;
      }
      ++sample;
    }
    if (step == total_steps) break;

    rk4_step(m, s, config.integration_dt);
    require(s.allFinite(), ErrorCode::SimulationDiverged,
            "surrogate state became non-finite");

    // Contact latches off at the first separation: the rig's impactor is
    // withdrawn after the blow rather than left in the head's return path.
    if (!m.contact_released) {
      const Contact contact = evaluate_contact(m, s);
      if (contact.depth > 0.0) has_contacted = true;
      if (has_contacted && contact.depth <= 0.0) m.contact_released = true;
    }
  }

  SimulatedImpact out;
  out.setup = setup;
  out.series = filter_series(series);
  out.force_helmet = f_helmet;
  out.force_head = f_head;
  out.location = to_location(*hit_mm);
  out.region = classify_region(out.location);
  out.validate();
  return out;
}

SimulatedImpact mirrored(const SimulatedImpact& impact) {
  SimulatedImpact out;
  out.setup = mirror(impact.setup);
  out.series = mirror(impact.series);
  out.force_helmet = impact.force_helmet;
  out.force_head = impact.force_head;
  const auto hit = sphere_intersection(impact_line(out.setup));
  require(hit.has_value(), ErrorCode::NoIntersection,
          "mirrored impact line misses the sphere");
  out.location = to_location(*hit);
  out.region = classify_region(out.location);
  return out;
}

std::vector<DatasetEntry> simulate_grid(const GridSpec& grid,
                                        const SurrogateConfig& config, int workers) {
  config.validate();
  require(!grid.alpha_deg.empty() && !grid.beta_deg.empty() && !grid.y_mm.empty() &&
              !grid.z_mm.empty() && !grid.speed_mps.empty(),
          ErrorCode::InvalidArgument, "grid has an empty axis");

  std::vector<ImpactSetup> setups;
  setups.reserve(grid.size());
  for (double a : grid.alpha_deg)
    for (double b : grid.beta_deg)
      for (double y : grid.y_mm)
        for (double z : grid.z_mm)
          for (double v : grid.speed_mps)
            setups.push_back(ImpactSetup{a, b, y, z, v});

  // Lines that miss the sphere are dropped up front (the miss depends only on
  // the setup, not on the dynamics).
  std::vector<ImpactSetup> hits;
  hits.reserve(setups.size());
  for (std::size_t i = 0; i < setups.size(); ++i) {
    if (sphere_intersection(impact_line(setups[i])).has_value()) {
      hits.push_back(setups[i]);
    } else {
      std::cerr << "simulate_grid: grid point " << i << " (alpha=" << setups[i].alpha_deg
                << " beta=" << setups[i].beta_deg << " Y=" << setups[i].y_mm
                << " Z=" << setups[i].z_mm << ") misses the sphere; skipped\n";
    }
  }

  std::vector<SimulatedImpact> sims(hits.size());
  const int pool = std::max(1, workers);
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> threads;
  threads.reserve(pool);
  for (int t = 0; t < pool; ++t) {
    threads.emplace_back([&] {
      for (std::size_t i = next.fetch_add(1); i < hits.size(); i = next.fetch_add(1)) {
        sims[i] = simulate_impact(hits[i], config);
      }
    });
  }
  for (auto& th : threads) th.join();

  std::vector<DatasetEntry> entries;
  entries.reserve(2 * sims.size());
  for (std::size_t i = 0; i < sims.size(); ++i) {
    char id[32];
    std::snprintf(id, sizeof(id), "imp_%06zu", i);
    entries.push_back(DatasetEntry{id, id, false, std::move(sims[i])});
  }
  const std::size_t originals = entries.size();
  for (std::size_t i = 0; i < originals; ++i) {
    DatasetEntry e;
    e.id = entries[i].id + "m";
    e.source_id = entries[i].id;
    e.mirrored = true;
    e.impact = mirrored(entries[i].impact);
    entries.push_back(std::move(e));
  }
  return entries;
}

}  // namespace impact
