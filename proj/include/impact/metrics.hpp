#ifndef IMPACT_METRICS_HPP
#define IMPACT_METRICS_HPP

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <vector>

#include "impact/errors.hpp"
#include "impact/types.hpp"

namespace impact {

template <typename DerivedA, typename DerivedB>
void check_same_shape(const Eigen::MatrixBase<DerivedA>& a,
                      const Eigen::MatrixBase<DerivedB>& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols() && a.size() > 0,
          ErrorCode::InvalidArgument, "metric inputs must be equal nonzero shapes");
}

template <typename DerivedA, typename DerivedB>
double mae(const Eigen::MatrixBase<DerivedA>& pred, const Eigen::MatrixBase<DerivedB>& ref) {
  check_same_shape(pred, ref);
  return (pred.derived().template cast<double>() - ref.derived().template cast<double>())
      .array()
      .abs()
      .mean();
}

template <typename DerivedA, typename DerivedB>
double rmse(const Eigen::MatrixBase<DerivedA>& pred, const Eigen::MatrixBase<DerivedB>& ref) {
  check_same_shape(pred, ref);
  return std::sqrt((pred.derived().template cast<double>() -
                    ref.derived().template cast<double>())
                       .array()
                       .square()
                       .mean());
}

// R^2 = 1 - SS_res / SS_tot with SS_tot about the reference mean. A constant
// reference leaves the metric undefined.
template <typename DerivedA, typename DerivedB>
double r2(const Eigen::MatrixBase<DerivedA>& pred, const Eigen::MatrixBase<DerivedB>& ref) {
  check_same_shape(pred, ref);
  const Eigen::ArrayXd p = pred.derived().template cast<double>().reshaped().array();
  const Eigen::ArrayXd r = ref.derived().template cast<double>().reshaped().array();
  require(r.maxCoeff() > r.minCoeff(), ErrorCode::UndefinedMetric,
          "R^2 is undefined for a constant reference");
  const double ss_res = (p - r).square().sum();
  const double ss_tot = (r - r.mean()).square().sum();
  return 1.0 - ss_res / ss_tot;
}

// ---------------------------------------------------------------------------
// Force-profile metrics. Profile sets are stored one profile per row.
// ---------------------------------------------------------------------------

struct PeakMetrics {
  double mae_kN = 0.0;
  double rmse_kN = 0.0;
  double r2 = 0.0;
};

// Maximum of each profile (ties keep the earliest index, which does not
// affect the value), then scalar metrics across the set.
template <typename DerivedA, typename DerivedB>
PeakMetrics peak_metrics(const Eigen::MatrixBase<DerivedA>& pred_profiles,
                         const Eigen::MatrixBase<DerivedB>& ref_profiles) {
  check_same_shape(pred_profiles, ref_profiles);
  const Eigen::VectorXd pred_peaks = pred_profiles.derived().rowwise().maxCoeff();
  const Eigen::VectorXd ref_peaks = ref_profiles.derived().rowwise().maxCoeff();
  return PeakMetrics{mae(pred_peaks, ref_peaks), rmse(pred_peaks, ref_peaks),
                     r2(pred_peaks, ref_peaks)};
}

struct PointwiseMetrics {
  double mae_kN = 0.0;
  double rmse_kN = 0.0;
};

// Error pooled over every timestep of every profile.
template <typename DerivedA, typename DerivedB>
PointwiseMetrics pointwise_metrics(const Eigen::MatrixBase<DerivedA>& pred_profiles,
                                   const Eigen::MatrixBase<DerivedB>& ref_profiles) {
  return PointwiseMetrics{mae(pred_profiles, ref_profiles),
                          rmse(pred_profiles, ref_profiles)};
}

// ---------------------------------------------------------------------------
// Confusion matrix over the five helmet regions, rows = reference,
// columns = prediction, ordered (facemask, top, back, left, right).
// ---------------------------------------------------------------------------

struct ConfusionMatrix5 {
  Eigen::Matrix<std::int64_t, kRegionCount, kRegionCount> counts =
      Eigen::Matrix<std::int64_t, kRegionCount, kRegionCount>::Zero();
  double accuracy = 0.0;

  std::int64_t total() const { return counts.sum(); }
};

inline ConfusionMatrix5 confusion(const std::vector<HelmetRegion>& pred,
                                  const std::vector<HelmetRegion>& ref) {
  require(pred.size() == ref.size(), ErrorCode::InvalidArgument,
          "prediction/reference length mismatch");
  require(!pred.empty(), ErrorCode::InvalidArgument,
          "confusion matrix of an empty set is undefined");
  ConfusionMatrix5 cm;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const int r = static_cast<int>(ref[i]);
    const int p = static_cast<int>(pred[i]);
    require(r >= 0 && r < kRegionCount && p >= 0 && p < kRegionCount,
            ErrorCode::InvalidArgument, "unknown region label");
    cm.counts(r, p) += 1;
  }
  cm.accuracy = static_cast<double>(cm.counts.trace()) /
                static_cast<double>(cm.counts.sum());
  return cm;
}

}  // namespace impact

#endif  // IMPACT_METRICS_HPP
