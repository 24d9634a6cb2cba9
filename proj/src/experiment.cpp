#include "impact/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

#include "impact/io.hpp"
#include "impact/kinematics.hpp"
#include "impact/svg.hpp"

namespace impact {

using nlohmann::json;

namespace {

double scalar_target(const DatasetEntry& e, int target_idx) {
  switch (target_idx) {
    case 0: return e.impact.setup.speed_mps;
    case 1: return e.impact.setup.alpha_deg;
    case 2: return e.impact.setup.beta_deg;
    case 3: return e.impact.setup.y_mm;
    case 4: return e.impact.setup.z_mm;
  }
  fail(ErrorCode::InvalidArgument, "bad scalar target index");
}

// R^2 is undefined when the reference is constant (possible on degenerate
// grids with a single value on one axis); such entries are reported as null
// and left out of the aggregates.
double r2_or_nan(const Eigen::VectorXd& pred, const Eigen::VectorXd& ref) {
  if (ref.maxCoeff() <= ref.minCoeff()) return std::numeric_limits<double>::quiet_NaN();
  return r2(pred, ref);
}

ScalarMetricSet scalar_metrics(const Eigen::VectorXd& pred, const Eigen::VectorXd& ref) {
  ScalarMetricSet s{mae(pred, ref), rmse(pred, ref), r2_or_nan(pred, ref)};
  require(s.rmse + 1e-12 * (1.0 + s.rmse) >= s.mae, ErrorCode::InvalidArgument,
          "RMSE < MAE: metric computation is inconsistent");
  return s;
}

ForceMetricSet force_metrics(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& ref) {
  const PointwiseMetrics pw = pointwise_metrics(pred, ref);
  const Eigen::VectorXd pred_peaks = pred.rowwise().maxCoeff();
  const Eigen::VectorXd ref_peaks = ref.rowwise().maxCoeff();
  ForceMetricSet s{pw.mae_kN, pw.rmse_kN, mae(pred_peaks, ref_peaks),
                   rmse(pred_peaks, ref_peaks), r2_or_nan(pred_peaks, ref_peaks)};
  require(s.pointwise_rmse + 1e-12 * (1.0 + s.pointwise_rmse) >= s.pointwise_mae &&
              s.peak_rmse + 1e-12 * (1.0 + s.peak_rmse) >= s.peak_mae,
          ErrorCode::InvalidArgument, "RMSE < MAE: metric computation is inconsistent");
  return s;
}

json finite_or_null(double v) {
  if (std::isfinite(v)) return json(v);
  return json(nullptr);
}

json to_json(const ScalarMetricSet& s) {
  return json{{"mae", s.mae}, {"rmse", s.rmse}, {"r2", finite_or_null(s.r2)}};
}

json to_json(const ForceMetricSet& s) {
  return json{{"pointwise_mae", s.pointwise_mae},
              {"pointwise_rmse", s.pointwise_rmse},
              {"peak_mae", s.peak_mae},
              {"peak_rmse", s.peak_rmse},
              {"peak_r2", finite_or_null(s.peak_r2)}};
}

json counts_to_json(const ConfusionMatrix5& cm) {
  json rows = json::array();
  for (int r = 0; r < kRegionCount; ++r) {
    json row = json::array();
    for (int c = 0; c < kRegionCount; ++c) row.push_back(cm.counts(r, c));
    rows.push_back(row);
  }
  return rows;
}

struct Split {
  std::vector<Eigen::Index> train, val, test;
};

Split make_split(const std::vector<DatasetEntry>& entries, const SplitFractions& fractions,
                 bool pair_aware, std::uint64_t seed) {
  // Units are either mirror pairs (grouped by source id) or single samples.
  std::vector<std::vector<Eigen::Index>> units;
  if (pair_aware) {
    std::map<std::string, std::vector<Eigen::Index>> groups;
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(entries.size()); ++i) {
      groups[entries[i].source_id].push_back(i);
    }
    std::vector<std::pair<Eigen::Index, std::vector<Eigen::Index>>> ordered;
    for (auto& [key, idx] : groups) ordered.emplace_back(idx.front(), std::move(idx));
    std::sort(ordered.begin(), ordered.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    for (auto& [first, idx] : ordered) units.push_back(std::move(idx));
  } else {
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(entries.size()); ++i) {
      units.push_back({i});
    }
  }

  Rng rng(seed);
  rng.shuffle(units);

  const std::size_t n_units = units.size();
  const auto n_train = static_cast<std::size_t>(fractions.train * n_units);
  const auto n_val = static_cast<std::size_t>(fractions.val * n_units);
  require(n_train >= 1 && n_val >= 1 && n_train + n_val < n_units,
          ErrorCode::InvalidArgument, "dataset too small for the requested split");

  Split split;
  for (std::size_t u = 0; u < n_units; ++u) {
    auto& dst = u < n_train ? split.train : (u < n_train + n_val ? split.val : split.test);
    for (Eigen::Index i : units[u]) dst.push_back(i);
  }
  return split;
}

RegressionDataset slice_dataset(const std::vector<DatasetEntry>& entries,
                                const std::vector<FeatureTensor>& features,
                                const std::vector<Eigen::Index>& idx, int target_idx) {
  RegressionDataset set;
  const bool force = target_idx >= 5;
  set.targets.resize(static_cast<Eigen::Index>(idx.size()), force ? kSamples : 1);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    set.features.push_back(&features[idx[i]].data);
    if (force) {
      const ForceProfile& p = target_idx == 5 ? entries[idx[i]].impact.force_helmet
                                              : entries[idx[i]].impact.force_head;
      set.targets.row(static_cast<Eigen::Index>(i)) = p.values_kN.transpose();
    } else {
      set.targets(static_cast<Eigen::Index>(i), 0) = scalar_target(entries[idx[i]], target_idx);
    }
  }
  return set;
}

struct Aggregator {
  std::vector<double> values;
  void add(double v) { values.push_back(v); }
  double mean() const {
    double s = 0.0;
    for (double v : values) s += v;
    return values.empty() ? 0.0 : s / static_cast<double>(values.size());
  }
  double stddev() const {
    if (values.size() < 2) return 0.0;
    const double m = mean();
    double s = 0.0;
    for (double v : values) s += (v - m) * (v - m);
    return std::sqrt(s / static_cast<double>(values.size() - 1));
  }
  json to_json() const { return json{{"mean", mean()}, {"std", stddev()}}; }
};

}  // namespace

MethodComparison compare_methods(const std::vector<const DatasetEntry*>& test_entries,
                                 const std::vector<const FeatureTensor*>& test_features,
                                 const std::array<const LstmModel*, 5>& scalar_models,
                                 const RigidBodyParams& head) {
  require(test_entries.size() == test_features.size() && !test_entries.empty(),
          ErrorCode::InvalidArgument, "entries/features mismatch in method comparison");

  std::map<std::string, std::vector<HelmetRegion>> pred, ref;
  MethodComparison out;
  for (const char* name : kMethodNames) out.failures[name] = 0;

  const auto record = [&](const std::string& method, HelmetRegion truth,
                          HelmetRegion predicted) {
    pred[method].push_back(predicted);
    ref[method].push_back(truth);
  };

  for (std::size_t i = 0; i < test_entries.size(); ++i) {
    const DatasetEntry& e = *test_entries[i];
    const HelmetRegion truth = e.impact.region;

    record(kMethodNames[0], truth,
           predict_location(scalar_models, *test_features[i]).region);

    try {
      record(kMethodNames[1], truth,
             classify_region(opposite_linear_acceleration(e.impact.series)));
    } catch (const Error&) {
      ++out.failures[kMethodNames[1]];
    }

    const std::array<LinearKind, 3> kinds = {LinearKind::Acceleration,
                                             LinearKind::Velocity, LinearKind::Position};
    for (int k = 0; k < 3; ++k) {
      try {
        record(kMethodNames[2 + k], truth,
               classify_region(revised_opposite(e.impact.series, kinds[k]).location));
      } catch (const Error&) {
        ++out.failures[kMethodNames[2 + k]];
      }
    }

    try {
      record(kMethodNames[5], truth,
             classify_region(matching_force_torque(e.impact.series, head).location));
    } catch (const Error&) {
      ++out.failures[kMethodNames[5]];
    }
  }

  for (const char* name : kMethodNames) {
    if (!pred[name].empty()) {
      out.confusions[name] = confusion(pred[name], ref[name]);
      out.accuracy_ranking.emplace_back(name, out.confusions[name].accuracy);
    } else {
      out.accuracy_ranking.emplace_back(name, 0.0);
    }
  }
  std::sort(out.accuracy_ranking.begin(), out.accuracy_ranking.end(),
            [](const auto& a, const auto& b) {
              return a.second != b.second ? a.second > b.second : a.first < b.first;
            });
  return out;
}

MetricReport run_experiment(const std::vector<DatasetEntry>& entries,
                            const ExperimentConfig& config) {
  config.split.validate();
  config.hyper.validate();
  require(config.n_seeds >= 1, ErrorCode::InvalidArgument, "need at least one seed");
  require(entries.size() >= 10, ErrorCode::InvalidArgument,
          "experiment needs at least 10 samples");

  std::vector<FeatureTensor> features;
  features.reserve(entries.size());
  for (const DatasetEntry& e : entries) features.push_back(build_features(e.impact.series));

  json seeds_json = json::array();
  std::map<std::string, std::map<std::string, std::map<std::string, Aggregator>>> agg_scalar;
  std::map<std::string, std::map<std::string, std::map<std::string, Aggregator>>> agg_force;
  std::map<std::string, Aggregator> agg_accuracy;
  std::map<std::string, int> failures_total;
  std::map<std::string, Eigen::Matrix<std::int64_t, kRegionCount, kRegionCount>> counts_total;
  for (const char* m : kMethodNames) {
    failures_total[m] = 0;
    counts_total[m].setZero();
  }
  json force_examples = json::array();
  int diverged_runs = 0;

  for (int s = 0; s < config.n_seeds; ++s) {
    const std::uint64_t seed = mix_seed(config.base_seed, static_cast<std::uint64_t>(s));
    const Split split = make_split(entries, config.split, config.keep_mirror_pairs_together, seed);

    // Train the five scalar models and the two force models for this seed.
    std::array<TrainResult, 7> results;
    std::array<bool, 7> diverged{};
    std::array<std::string, 7> divergence_message;
    {
      std::atomic<int> next{0};
      const int pool = std::max(1, config.workers);
      std::vector<std::thread> threads;
      auto worker = [&] {
        for (int t = next.fetch_add(1); t < 7; t = next.fetch_add(1)) {
          const OutputMode mode = t < 5 ? OutputMode::Scalar : OutputMode::Sequence;
          Hyperparameters hyper = config.hyper;
          hyper.seed = mix_seed(seed, 1000 + static_cast<std::uint64_t>(t));
          const RegressionDataset tr = slice_dataset(entries, features, split.train, t);
          const RegressionDataset va = slice_dataset(entries, features, split.val, t);
          try {
            results[t] = train(tr, va, hyper, mode, kAllTargets[t]);
          } catch (const Error& err) {
            diverged[t] = true;
            divergence_message[t] = err.what();
          }
        }
      };
      if (pool == 1) {
        worker();
      } else {
        for (int t = 0; t < pool; ++t) threads.emplace_back(worker);
        for (auto& th : threads) th.join();
      }
    }

    json seed_json;
    seed_json["seed"] = seed;
    seed_json["n_train"] = split.train.size();
    seed_json["n_val"] = split.val.size();
    seed_json["n_test"] = split.test.size();

    const bool any_diverged = std::any_of(diverged.begin(), diverged.end(), [](bool b) { return b; });
    seed_json["diverged"] = any_diverged;
    if (any_diverged) {
      json names = json::array();
      for (int t = 0; t < 7; ++t) {
        if (diverged[t]) names.push_back({{"target", kAllTargets[t]},
                                          {"error", divergence_message[t]}});
      }
      seed_json["diverged_targets"] = names;
      seeds_json.push_back(seed_json);
      ++diverged_runs;
      continue;  // seed flagged and excluded from the aggregates
    }

    json best_epochs;
    for (int t = 0; t < 7; ++t) best_epochs[kAllTargets[t]] = results[t].log.best_epoch;
    seed_json["best_epoch"] = best_epochs;

    // Metrics on validation and test splits.
    json scalar_json, force_json;
    const std::array<std::pair<std::string, const std::vector<Eigen::Index>*>, 2>
        eval_splits = {{{"val", &split.val}, {"test", &split.test}}};
    for (int t = 0; t < 7; ++t) {
      const LstmModel& model = results[t].model;
      for (const auto& [split_name, idx] : eval_splits) {
        if (t < 5) {
          Eigen::VectorXd pred(idx->size()), ref(idx->size());
          for (std::size_t i = 0; i < idx->size(); ++i) {
            pred[static_cast<Eigen::Index>(i)] = predict(model, features[(*idx)[i]])[0];
            ref[static_cast<Eigen::Index>(i)] = scalar_target(entries[(*idx)[i]], t);
          }
          const ScalarMetricSet m = scalar_metrics(pred, ref);
          scalar_json[kAllTargets[t]][split_name] = to_json(m);
          agg_scalar[kAllTargets[t]][split_name]["mae"].add(m.mae);
          agg_scalar[kAllTargets[t]][split_name]["rmse"].add(m.rmse);
          if (std::isfinite(m.r2)) agg_scalar[kAllTargets[t]][split_name]["r2"].add(m.r2);
        } else {
          Eigen::MatrixXd pred(idx->size(), kSamples), ref(idx->size(), kSamples);
          for (std::size_t i = 0; i < idx->size(); ++i) {
            pred.row(static_cast<Eigen::Index>(i)) =
                impact::predict(model, features[(*idx)[i]]).cwiseMax(0.0).transpose();
            const ForceProfile& p = t == 5 ? entries[(*idx)[i]].impact.force_helmet
                                           : entries[(*idx)[i]].impact.force_head;
            ref.row(static_cast<Eigen::Index>(i)) = p.values_kN.transpose();
          }
          const ForceMetricSet m = force_metrics(pred, ref);
          force_json[kAllTargets[t]][split_name] = to_json(m);
          agg_force[kAllTargets[t]][split_name]["pointwise_mae"].add(m.pointwise_mae);
          agg_force[kAllTargets[t]][split_name]["pointwise_rmse"].add(m.pointwise_rmse);
          agg_force[kAllTargets[t]][split_name]["peak_mae"].add(m.peak_mae);
          agg_force[kAllTargets[t]][split_name]["peak_rmse"].add(m.peak_rmse);
          if (std::isfinite(m.peak_r2)) {
            agg_force[kAllTargets[t]][split_name]["peak_r2"].add(m.peak_r2);
          }

          // A handful of overlay examples from the first seed's test split.
          if (s == 0 && split_name == "test") {
            const std::size_t n_examples = std::min<std::size_t>(6, idx->size());
            for (std::size_t i = 0; i < n_examples; ++i) {
              json ex;
              ex["target"] = kAllTargets[t];
              ex["id"] = entries[(*idx)[i]].id;
              ex["reference"] = std::vector<double>(
                  ref.row(static_cast<Eigen::Index>(i)).begin(),
                  ref.row(static_cast<Eigen::Index>(i)).end());
              ex["prediction"] = std::vector<double>(
                  pred.row(static_cast<Eigen::Index>(i)).begin(),
                  pred.row(static_cast<Eigen::Index>(i)).end());
              ex["pointwise_mae"] =
                  mae(pred.row(static_cast<Eigen::Index>(i)), ref.row(static_cast<Eigen::Index>(i)));
              force_examples.push_back(ex);
            }
          }
        }
      }
    }
    seed_json["scalar"] = scalar_json;
    seed_json["force"] = force_json;

    // Method comparison on the test split.
    std::vector<const DatasetEntry*> test_entries;
    std::vector<const FeatureTensor*> test_features;
    for (Eigen::Index i : split.test) {
      test_entries.push_back(&entries[i]);
      test_features.push_back(&features[i]);
    }
    const std::array<const LstmModel*, 5> scalar_models = {
        &results[0].model, &results[1].model, &results[2].model, &results[3].model,
        &results[4].model};
    const MethodComparison cmp =
        compare_methods(test_entries, test_features, scalar_models, config.head);

    json methods_json;
    for (const char* name : kMethodNames) {
      json mj;
      const auto it = cmp.confusions.find(name);
      if (it != cmp.confusions.end()) {
        mj["accuracy"] = it->second.accuracy;
        mj["classified"] = it->second.total();
        mj["counts"] = counts_to_json(it->second);
        agg_accuracy[name].add(it->second.accuracy);
        counts_total[name] += it->second.counts;
      }
      mj["failures"] = cmp.failures.at(name);
      failures_total[name] += cmp.failures.at(name);
      methods_json[name] = mj;
    }
    seed_json["methods"] = methods_json;
    seeds_json.push_back(seed_json);
  }

  require(diverged_runs < config.n_seeds, ErrorCode::TrainingDiverged,
          "every seed diverged; no metrics to report");

  // Aggregate + report assembly.
  MetricReport report;
  report.diverged_runs = diverged_runs;

  json aggregate;
  const auto mean_of = [](const std::map<std::string, Aggregator>& metrics,
                          const char* name) {
    const auto it = metrics.find(name);
    return it == metrics.end() || it->second.values.empty()
               ? std::numeric_limits<double>::quiet_NaN()
               : it->second.mean();
  };
  for (const auto& [target, splits] : agg_scalar) {
    for (const auto& [split_name, metrics] : splits) {
      for (const auto& [metric, agg] : metrics) {
        aggregate["scalar"][target][split_name][metric] = agg.to_json();
      }
    }
    const auto& test = splits.at("test");
    report.test_scalar_mean[target] = ScalarMetricSet{
        mean_of(test, "mae"), mean_of(test, "rmse"), mean_of(test, "r2")};
  }
  for (const auto& [target, splits] : agg_force) {
    for (const auto& [split_name, metrics] : splits) {
      for (const auto& [metric, agg] : metrics) {
        aggregate["force"][target][split_name][metric] = agg.to_json();
      }
    }
    const auto& test = splits.at("test");
    report.test_force_mean[target] = ForceMetricSet{
        mean_of(test, "pointwise_mae"), mean_of(test, "pointwise_rmse"),
        mean_of(test, "peak_mae"), mean_of(test, "peak_rmse"), mean_of(test, "peak_r2")};
  }
  for (const char* name : kMethodNames) {
    json mj;
    if (agg_accuracy.count(name) != 0 && !agg_accuracy[name].values.empty()) {
      mj["accuracy"] = agg_accuracy[name].to_json();
      report.method_accuracy_mean[name] = agg_accuracy[name].mean();
    }
    mj["failures_total"] = failures_total[name];
    ConfusionMatrix5 total;
    total.counts = counts_total[name];
    mj["counts_total"] = counts_to_json(total);
    aggregate["methods"][name] = mj;
  }

  // Dataset-level force scale, for judging pointwise errors.
  double peak_sum_helmet = 0.0, peak_sum_head = 0.0;
  for (const DatasetEntry& e : entries) {
    peak_sum_helmet += e.impact.force_helmet.peak();
    peak_sum_head += e.impact.force_head.peak();
  }
  json dataset_json;
  dataset_json["n_samples"] = entries.size();
  dataset_json["mean_peak_force_helmet_kN"] = peak_sum_helmet / entries.size();
  dataset_json["mean_peak_force_head_kN"] = peak_sum_head / entries.size();

  json root;
  root["schema_version"] = 1;
  root["n_seeds"] = config.n_seeds;
  root["base_seed"] = config.base_seed;
  root["diverged_runs"] = diverged_runs;
  root["split"] = {{"train", config.split.train},
                   {"val", config.split.val},
                   {"test", config.split.test}};
  root["pair_aware_split"] = config.keep_mirror_pairs_together;
  root["hyper"] = {{"hidden_units", config.hyper.hidden_units},
                   {"learning_rate", config.hyper.learning_rate},
                   {"epochs", config.hyper.epochs},
                   {"dropout_rate", config.hyper.dropout_rate},
                   {"l2_kernel", config.hyper.l2_kernel},
                   {"batch_size", config.hyper.batch_size}};
  root["dataset"] = dataset_json;
  root["seeds"] = seeds_json;
  root["aggregate"] = aggregate;
  root["force_examples"] = force_examples;
  report.full = std::move(root);
  return report;
}

std::string report_to_string(const MetricReport& report) {
  return report.full.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Human-readable tables and figures, derived from the JSON report.
// ---------------------------------------------------------------------------

void write_report_files(const json& report, const std::filesystem::path& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir / "tables");
  fs::create_directories(out_dir / "figures");

  io::write_text_file(out_dir / "report.json", report.dump(2) + "\n");

  // Aggregate metric table.
  std::string table = "target,split,metric,mean,std\n";
  const auto& aggregate = report.at("aggregate");
  for (const char* group : {"scalar", "force"}) {
    if (!aggregate.contains(group)) continue;
    for (const auto& [target, splits] : aggregate.at(group).items()) {
      for (const auto& [split_name, metrics] : splits.items()) {
        for (const auto& [metric, stats] : metrics.items()) {
          table += target + "," + split_name + "," + metric + "," +
                   io::format_double(stats.at("mean").get<double>()) + "," +
                   io::format_double(stats.at("std").get<double>()) + "\n";
        }
      }
    }
  }
  io::write_text_file(out_dir / "tables" / "metrics.csv", table);

  // Method ranking table.
  std::string methods = "method,accuracy_mean,accuracy_std,failures_total\n";
  if (aggregate.contains("methods")) {
    std::vector<std::pair<double, std::string>> rows;
    for (const auto& [name, mj] : aggregate.at("methods").items()) {
      const double acc =
          mj.contains("accuracy") ? mj.at("accuracy").at("mean").get<double>() : 0.0;
      rows.emplace_back(acc, name);
    }
    std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
      return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    for (const auto& [acc, name] : rows) {
      const auto& mj = aggregate.at("methods").at(name);
      methods += name + "," + io::format_double(acc) + "," +
                 (mj.contains("accuracy")
                      ? io::format_double(mj.at("accuracy").at("std").get<double>())
                      : "0") +
                 "," + std::to_string(mj.at("failures_total").get<int>()) + "\n";
    }

    // Per-method confusion figures from the summed counts.
    for (const auto& [name, mj] : aggregate.at("methods").items()) {
      if (!mj.contains("counts_total")) continue;
      ConfusionMatrix5 cm;
      std::int64_t correct = 0;
      for (int r = 0; r < kRegionCount; ++r) {
        for (int c = 0; c < kRegionCount; ++c) {
          cm.counts(r, c) = mj.at("counts_total").at(r).at(c).get<std::int64_t>();
        }
      }
      correct = cm.counts.trace();
      cm.accuracy = cm.total() > 0
                        ? static_cast<double>(correct) / static_cast<double>(cm.total())
                        : 0.0;
      if (cm.total() == 0) continue;
      io::write_text_file(out_dir / "figures" / ("confusion_" + name + ".svg"),
                          confusion_svg(cm, name));
    }
  }
  io::write_text_file(out_dir / "tables" / "methods.csv", methods);

  // Force overlay figures.
  if (report.contains("force_examples")) {
    for (const char* target : {"force_helmet", "force_head"}) {
      std::vector<OverlayExample> examples;
      for (const auto& ex : report.at("force_examples")) {
        if (ex.at("target").get<std::string>() != target) continue;
        OverlayExample o;
        o.label = ex.at("id").get<std::string>() + "  mae " +
                  io::format_double(ex.at("pointwise_mae").get<double>()) + " kN";
        const auto ref = ex.at("reference").get<std::vector<double>>();
        const auto pred = ex.at("prediction").get<std::vector<double>>();
        o.reference = Eigen::Map<const Eigen::VectorXd>(ref.data(), ref.size());
        o.prediction = Eigen::Map<const Eigen::VectorXd>(pred.data(), pred.size());
        examples.push_back(std::move(o));
      }
      if (!examples.empty()) {
        io::write_text_file(out_dir / "figures" / (std::string(target) + "_overlays.svg"),
                            force_overlay_svg(examples, target));
      }
    }
  }
}

}  // namespace impact
