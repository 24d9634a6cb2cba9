#ifndef IMPACT_SVG_HPP
#define IMPACT_SVG_HPP

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "impact/metrics.hpp"

namespace impact {

// Standalone SVG figure of a 5x5 region confusion matrix (rows = reference,
// columns = prediction), cells shaded by count, diagonal outlined.
std::string confusion_svg(const ConfusionMatrix5& cm, const std::string& title);

struct OverlayExample {
  std::string label;
  Eigen::VectorXd reference;
  Eigen::VectorXd prediction;
};

// Grid of reference-vs-prediction force profile overlays.
std::string force_overlay_svg(const std::vector<OverlayExample>& examples,
                              const std::string& title);

}  // namespace impact

#endif  // IMPACT_SVG_HPP
