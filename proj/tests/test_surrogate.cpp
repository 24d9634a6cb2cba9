#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "impact/io.hpp"
#include "impact/kinematics.hpp"
#include "impact/random.hpp"
#include "impact/surrogate.hpp"

using namespace impact;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
  const fs::path dir = fs::temp_directory_path() / ("impact_test_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

double series_rms(const KinematicSeries& a, const KinematicSeries& b) {
  const double acc = (a.lin_acc - b.lin_acc).squaredNorm();
  const double vel = (a.ang_vel - b.ang_vel).squaredNorm();
  return std::sqrt((acc + vel) / static_cast<double>(2 * 3 * kSamples));
}

}  // namespace

TEST_CASE("zero-speed impact produces no motion and no force") {
  const SimulatedImpact imp = simulate_impact({30, 10, 20, -40, 0.0}, SurrogateConfig{});
  CHECK(imp.series.lin_acc.cwiseAbs().maxCoeff() == 0.0);
  CHECK(imp.series.ang_vel.cwiseAbs().maxCoeff() == 0.0);
  CHECK(imp.force_helmet.values_kN.maxCoeff() == 0.0);
  CHECK(imp.force_head.values_kN.maxCoeff() == 0.0);
}

TEST_CASE("peak helmet force increases strictly with impact speed") {
  const SurrogateConfig cfg;
  double prev = -1.0;
  for (double speed : {3.0, 5.0, 7.0, 10.0}) {
    const SimulatedImpact imp = simulate_impact({25, 15, 40, -30, speed}, cfg);
    CHECK(imp.force_helmet.peak() > prev);
    prev = imp.force_helmet.peak();
  }
}

TEST_CASE("head force is the helmet force scaled by the transmission factor") {
  SurrogateConfig cfg;
  cfg.transmission_factor = 0.8;
  const SimulatedImpact imp = simulate_impact({40, -20, 0, 60, 6.0}, cfg);
  CHECK((imp.force_head.values_kN - 0.8 * imp.force_helmet.values_kN)
            .cwiseAbs()
            .maxCoeff() < 1e-12);
  CHECK(imp.force_helmet.peak() > 0.1);
}

TEST_CASE("simulation honors the mirror symmetry of the rig") {
  const SurrogateConfig cfg;
  Rng rng(401);
  for (int i = 0; i < 4; ++i) {
    ImpactSetup s;
    s.alpha_deg = rng.uniform(10.0, 180.0);
    s.beta_deg = rng.uniform(-45.0, 70.0);
    s.y_mm = rng.uniform(-90.0, 90.0);
    s.z_mm = rng.uniform(-90.0, 90.0);
    s.speed_mps = rng.uniform(3.0, 10.0);
    const SimulatedImpact direct = simulate_impact(mirror(s), cfg);
    const SimulatedImpact flipped = simulate_impact(s, cfg);
    const KinematicSeries expected = mirror(flipped.series);
    CHECK(series_rms(direct.series, expected) < 1e-9);
    CHECK((direct.force_helmet.values_kN - flipped.force_helmet.values_kN)
              .cwiseAbs()
              .maxCoeff() < 1e-9);
  }
}

TEST_CASE("total mechanical energy never rises") {
  const SurrogateConfig cfg;
  for (const ImpactSetup s : {ImpactSetup{0, 0, 0, 0, 10.0}, ImpactSetup{120, 30, 80, -60, 7.0},
                              ImpactSetup{60, -40, -90, 90, 4.0}}) {
    SimTrace trace;
    simulate_impact(s, cfg, &trace);
    const Eigen::VectorXd energy = trace.total_energy();
    double running_min = energy[0];
    for (int k = 1; k < energy.size(); ++k) {
      CHECK(energy[k] <= running_min + 0.01 * energy[0]);
      running_min = std::min(running_min, energy[k]);
    }
  }
}

TEST_CASE("contact force implies positive penetration") {
  SimTrace trace;
  simulate_impact({70, 20, 50, 40, 8.0}, SurrogateConfig{}, &trace);
  bool saw_contact = false;
  for (int k = 0; k < kSamples; ++k) {
    if (trace.force_helmet_N[k] > 0.0) {
      CHECK(trace.penetration[k] > 0.0);
      saw_contact = true;
    }
  }
  CHECK(saw_contact);
}

TEST_CASE("halving the integrator step changes the output marginally") {
  SurrogateConfig coarse;
  SurrogateConfig fine;
  fine.integration_dt = coarse.integration_dt / 2.0;
  const ImpactSetup s{45, 25, 60, -50, 8.0};
  const SimulatedImpact a = simulate_impact(s, coarse);
  const SimulatedImpact b = simulate_impact(s, fine);
  const double scale = std::sqrt((b.series.lin_acc.squaredNorm() + b.series.ang_vel.squaredNorm()) /
                                 static_cast<double>(2 * 3 * kSamples));
  CHECK(series_rms(a.series, b.series) < 0.005 * scale);
}

TEST_CASE("lines that miss the sphere are rejected") {
  CHECK_THROWS_AS(simulate_impact({0, 0, 120, 120, 5.0}, SurrogateConfig{}), Error);
}

TEST_CASE("config validation") {
  SurrogateConfig bad;
  bad.integration_dt = 0.9e-3;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = SurrogateConfig{};
  bad.duration = 0.1;  // shorter than the 145-sample window
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = SurrogateConfig{};
  bad.transmission_factor = 0.0;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("grid simulation: counts, order and mirror bookkeeping") {
  GridSpec grid;
  grid.alpha_deg = {20.0, 90.0};
  grid.beta_deg = {-10.0, 30.0};
  grid.y_mm = {40.0};
  grid.z_mm = {-30.0};
  grid.speed_mps = {3.0, 6.0};
  const auto entries = simulate_grid(grid, SurrogateConfig{}, 1);
  REQUIRE(entries.size() == 16);  // 8 originals + 8 mirrors
  for (int i = 0; i < 8; ++i) {
    CHECK_FALSE(entries[i].mirrored);
    CHECK(entries[i].source_id == entries[i].id);
    const auto& original = entries[i];
    const auto& mirrored_entry = entries[8 + i];
    CHECK(mirrored_entry.mirrored);
    CHECK(mirrored_entry.source_id == original.id);
    CHECK(mirrored_entry.id == original.id + "m");
    CHECK(mirrored_entry.impact.setup.alpha_deg == -original.impact.setup.alpha_deg);
    CHECK(mirrored_entry.impact.setup.y_mm == -original.impact.setup.y_mm);
    CHECK(mirrored_entry.impact.setup.beta_deg == original.impact.setup.beta_deg);
    CHECK(mirrored_entry.impact.setup.speed_mps == original.impact.setup.speed_mps);
    CHECK(mirrored_entry.impact.location.theta_deg ==
          doctest::Approx(-original.impact.location.theta_deg).epsilon(1e-12));
  }
}

TEST_CASE("grid points that miss the sphere are skipped, not fatal") {
  GridSpec grid;
  grid.alpha_deg = {20.0};
  grid.beta_deg = {0.0};
  grid.y_mm = {0.0, 120.0};
  grid.z_mm = {0.0, 120.0};  // (120, 120) misses
  grid.speed_mps = {5.0};
  const auto entries = simulate_grid(grid, SurrogateConfig{}, 1);
  CHECK(entries.size() == 6);  // 3 hits + 3 mirrors
}

TEST_CASE("worker count does not change the result") {
  GridSpec grid;
  grid.alpha_deg = {30.0, 150.0};
  grid.beta_deg = {10.0};
  grid.y_mm = {50.0};
  grid.z_mm = {0.0};
  grid.speed_mps = {4.0, 9.0};
  const auto serial = simulate_grid(grid, SurrogateConfig{}, 1);
  const auto parallel = simulate_grid(grid, SurrogateConfig{}, 4);
  REQUIRE(serial.size() == parallel.size());
  for (std::size_t i = 0; i < serial.size(); ++i) {
    CHECK(serial[i].id == parallel[i].id);
    CHECK((serial[i].impact.series.lin_acc - parallel[i].impact.series.lin_acc)
              .cwiseAbs()
              .maxCoeff() == 0.0);
  }
}

TEST_CASE("dataset roundtrip through the on-disk layout") {
  const fs::path dir = temp_dir("roundtrip");
  GridSpec grid;
  grid.alpha_deg = {15.0, 100.0};
  grid.beta_deg = {5.0};
  grid.y_mm = {-60.0};
  grid.z_mm = {30.0};
  grid.speed_mps = {4.5};
  const auto written = generate_dataset(grid, SurrogateConfig{}, dir, 1);
  const auto loaded = load_dataset(dir / "manifest.csv");
  REQUIRE(loaded.size() == written.size());
  for (std::size_t i = 0; i < written.size(); ++i) {
    CHECK(loaded[i].id == written[i].id);
    CHECK(loaded[i].mirrored == written[i].mirrored);
    CHECK(loaded[i].source_id == written[i].source_id);
    // Numbers are printed in shortest round-trip form, so equality is exact.
    CHECK((loaded[i].impact.series.lin_acc - written[i].impact.series.lin_acc)
              .cwiseAbs()
              .maxCoeff() == 0.0);
    CHECK((loaded[i].impact.series.ang_vel - written[i].impact.series.ang_vel)
              .cwiseAbs()
              .maxCoeff() == 0.0);
    CHECK((loaded[i].impact.force_helmet.values_kN - written[i].impact.force_helmet.values_kN)
              .cwiseAbs()
              .maxCoeff() == 0.0);
    CHECK(loaded[i].impact.setup.alpha_deg == written[i].impact.setup.alpha_deg);
    CHECK(loaded[i].impact.location.theta_deg == written[i].impact.location.theta_deg);
    CHECK(loaded[i].impact.region == written[i].impact.region);
  }
  fs::remove_all(dir);
}

TEST_CASE("loading reports missing files by name") {
  const fs::path dir = temp_dir("missing");
  GridSpec grid;
  grid.alpha_deg = {15.0};
  grid.beta_deg = {5.0};
  grid.y_mm = {-60.0};
  grid.z_mm = {30.0};
  grid.speed_mps = {4.5};
  generate_dataset(grid, SurrogateConfig{}, dir, 1);
  fs::remove(dir / "kinematics" / "imp_000000.csv");
  try {
    load_dataset(dir / "manifest.csv");
    FAIL("expected a parse error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ParseError);
    CHECK(std::string(e.what()).find("imp_000000.csv") != std::string::npos);
  }
  fs::remove_all(dir);
}

TEST_CASE("empty manifest loads as an empty dataset") {
  const fs::path dir = temp_dir("empty");
  io::write_text_file(dir / "manifest.csv",
                      "id,alpha_deg,beta_deg,y_mm,z_mm,speed_mps,theta_deg,eta_deg,region,"
                      "peak_force_helmet_kN,peak_force_head_kN,kinematics_csv,forces_csv,"
                      "metadata_json,mirrored\n");
  CHECK(load_dataset(dir / "manifest.csv").empty());
  fs::remove_all(dir);
}

TEST_CASE("malformed manifest rows name the offending row") {
  const fs::path dir = temp_dir("badrow");
  io::write_text_file(dir / "manifest.csv",
                      "id,alpha_deg,beta_deg,y_mm,z_mm,speed_mps,theta_deg,eta_deg,region,"
                      "peak_force_helmet_kN,peak_force_head_kN,kinematics_csv,forces_csv,"
                      "metadata_json,mirrored\nimp_0,1,2\n");
  try {
    load_dataset(dir / "manifest.csv");
    FAIL("expected a parse error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("row 1") != std::string::npos);
  }
  fs::remove_all(dir);
}

TEST_CASE("kinematics csv rejects a short file with a row-count message") {
  const fs::path dir = temp_dir("short");
  std::string csv = "t_ms,ax,ay,az,wx,wy,wz\n";
  for (int k = 0; k < 144; ++k) csv += std::to_string(k) + ",0,0,0,0,0,0\n";
  io::write_text_file(dir / "short.csv", csv);
  try {
    io::read_kinematics_csv(dir / "short.csv");
    FAIL("expected a parse error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("145") != std::string::npos);
    CHECK(std::string(e.what()).find("144") != std::string::npos);
  }
  fs::remove_all(dir);
}
