#ifndef IMPACT_SURROGATE_HPP
#define IMPACT_SURROGATE_HPP

#include <Eigen/Dense>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "impact/baselines.hpp"
#include "impact/errors.hpp"
#include "impact/geometry.hpp"
#include "impact/types.hpp"

namespace impact {

// Lumped-parameter helmeted-impact rig: a point impactor sliding along the
// impact line meets a 6-DOF rigid head suspended on translational and
// rotational spring-dampers (the neck). Contact is a Hertz-like spring-damper
// acting along the line at the hit point; the head/face force is the helmet
// force scaled by a constant transmission factor.
struct SurrogateConfig {
  double impactor_mass_kg = 14.0;
  double contact_stiffness = 3.0e5;       // N/m^contact_exponent
  double contact_damping = 400.0;         // N s/m
  double contact_exponent = 1.5;
  double neck_translational_stiffness = 2.0e4;  // N/m
  double neck_translational_damping = 300.0;    // N s/m
  double neck_rotational_stiffness = 100.0;     // N m/rad
  double neck_rotational_damping = 2.0;         // N m s/rad
  double transmission_factor = 0.8;             // head force / helmet force
  RigidBodyParams head;
  double integration_dt = 1e-4;  // s
  double output_dt = 1e-3;       // s
  double duration = 0.150;       // s

  void validate() const;
};

struct SimulatedImpact {
  ImpactSetup setup;
  KinematicSeries series;  // anatomical frame, zero-phase filtered
  ForceProfile force_helmet;
  ForceProfile force_head;
  ImpactLocation location;
  HelmetRegion region = HelmetRegion::Facemask;

  void validate() const;
};

// Per-sample internals recorded for diagnostics: energies (J), penetration
// (m) and helmet force (N).
struct SimTrace {
  Eigen::VectorXd kinetic_impactor;
  Eigen::VectorXd kinetic_head;
  Eigen::VectorXd potential;  // neck + contact storage
  Eigen::VectorXd penetration;
  Eigen::VectorXd force_helmet_N;

  Eigen::VectorXd total_energy() const {
    return kinetic_impactor + kinetic_head + potential;
  }
};

SimulatedImpact simulate_impact(const ImpactSetup& setup, const SurrogateConfig& config);
SimulatedImpact simulate_impact(const ImpactSetup& setup, const SurrogateConfig& config,
                                SimTrace* trace);

// ---------------------------------------------------------------------------
// Dataset generation
// ---------------------------------------------------------------------------

// Axis values for the 5-parameter grid (every combination is simulated, then
// every simulated impact is mirrored).
struct GridSpec {
  std::vector<double> alpha_deg;
  std::vector<double> beta_deg;
  std::vector<double> y_mm;
  std::vector<double> z_mm;
  std::vector<double> speed_mps;

  std::size_t size() const {
    return alpha_deg.size() * beta_deg.size() * y_mm.size() * z_mm.size() *
           speed_mps.size();
  }
};

struct DatasetEntry {
  std::string id;
  std::string source_id;  // equals id for originals, the source for mirrors
  bool mirrored = false;
  SimulatedImpact impact;
};

// Simulates every grid point (skipping lines that miss the sphere, with a log
// line each) followed by the mirrored copy of every simulated impact.
// Originals come first, in grid order (alpha outermost, speed innermost),
// then the mirrors in the same order. `workers` caps the simulation thread
// pool; results do not depend on it.
std::vector<DatasetEntry> simulate_grid(const GridSpec& grid,
                                        const SurrogateConfig& config,
                                        int workers = 1);

// simulate_grid plus on-disk layout: per-impact kinematics CSV, force CSV and
// metadata JSON under out_dir, summarized by out_dir/manifest.csv.
std::vector<DatasetEntry> generate_dataset(const GridSpec& grid,
                                           const SurrogateConfig& config,
                                           const std::filesystem::path& out_dir,
                                           int workers = 1);

// Loads a dataset written by generate_dataset, validating every invariant.
// Malformed rows are reported with the offending file and row.
std::vector<DatasetEntry> load_dataset(const std::filesystem::path& manifest_path);

SimulatedImpact mirrored(const SimulatedImpact& impact);

}  // namespace impact

#endif  // IMPACT_SURROGATE_HPP
