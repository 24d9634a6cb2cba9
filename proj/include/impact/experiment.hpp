#ifndef IMPACT_EXPERIMENT_HPP
#define IMPACT_EXPERIMENT_HPP

#include <array>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "impact/lstm.hpp"
#include "impact/metrics.hpp"
#include "impact/surrogate.hpp"

namespace impact {

inline constexpr std::array<const char*, 7> kAllTargets = {
    "speed", "alpha", "beta", "y", "z", "force_helmet", "force_head"};

inline constexpr std::array<const char*, 6> kMethodNames = {
    "lstm",
    "opposite_linear_acceleration",
    "revised_acceleration",
    "revised_velocity",
    "revised_position",
    "matching_force_torque"};

struct SplitFractions {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;

  void validate() const {
    require(train > 0.0 && val > 0.0 && test > 0.0, ErrorCode::InvalidArgument,
            "split fractions must be positive");
    require(std::abs(train + val + test - 1.0) <= 1e-9, ErrorCode::InvalidArgument,
            "split fractions must sum to 1");
  }
};

struct ExperimentConfig {
  int n_seeds = 20;
  std::uint64_t base_seed = 0;
  SplitFractions split;
  Hyperparameters hyper;
  // Mirror pairs share a split so a mirrored twin can never leak into the
  // test set; switch off to split fully at random.
  bool keep_mirror_pairs_together = true;
  int workers = 1;
  RigidBodyParams head;  // rigid-body parameters for the baseline comparison
};

struct ScalarMetricSet {
  double mae = 0.0;
  double rmse = 0.0;
  double r2 = 0.0;
};

struct ForceMetricSet {
  double pointwise_mae = 0.0;
  double pointwise_rmse = 0.0;
  double peak_mae = 0.0;
  double peak_rmse = 0.0;
  double peak_r2 = 0.0;
};

struct MethodComparison {
  std::map<std::string, ConfusionMatrix5> confusions;
  // Estimator failures (degenerate inputs): excluded from the matrix,
  // reported here.
  std::map<std::string, int> failures;
  std::vector<std::pair<std::string, double>> accuracy_ranking;  // descending
};

// Per-method confusion matrices on one set of impacts, comparing the trained
// model and the classical estimators against the ground-truth regions.
MethodComparison compare_methods(const std::vector<const DatasetEntry*>& test_entries,
                                 const std::vector<const FeatureTensor*>& test_features,
                                 const std::array<const LstmModel*, 5>& scalar_models,
                                 const RigidBodyParams& head);

struct MetricReport {
  // Mean test metrics across non-diverged seeds, keyed by target.
  std::map<std::string, ScalarMetricSet> test_scalar_mean;
  std::map<std::string, ForceMetricSet> test_force_mean;
  std::map<std::string, double> method_accuracy_mean;
  int diverged_runs = 0;
  nlohmann::json full;  // complete machine-readable report
};

// The 80/10/10 protocol: for each seed, shuffle, split, fit normalization on
// the training split, train the five scalar and two force models, evaluate
// validation and test metrics and the method comparison; aggregate
// mean +- std across seeds. Bit-reproducible for a fixed config; workers only
// sets the training thread pool.
MetricReport run_experiment(const std::vector<DatasetEntry>& entries,
                            const ExperimentConfig& config);

// Serializes the full report deterministically.
std::string report_to_string(const MetricReport& report);

// Writes report.json plus the CSV tables and SVG figures derived from it.
void write_report_files(const nlohmann::json& report, const std::filesystem::path& out_dir);

}  // namespace impact

#endif  // IMPACT_EXPERIMENT_HPP
