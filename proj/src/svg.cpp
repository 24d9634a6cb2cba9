#include "impact/svg.hpp"

#include <algorithm>
#include <cmath>

#include "impact/io.hpp"

namespace impact {

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

void rect(std::string& svg, double x, double y, double w, double h,
          const std::string& fill, const std::string& stroke) {
  svg += "<rect x=\"" + num(x) + "\" y=\"" + num(y) + "\" width=\"" + num(w) +
         "\" height=\"" + num(h) + "\" fill=\"" + fill + "\" stroke=\"" + stroke +
         "\"/>\n";
}

void text(std::string& svg, double x, double y, const std::string& s, int size,
          const std::string& anchor = "middle") {
  svg += "<text x=\"" + num(x) + "\" y=\"" + num(y) + "\" font-size=\"" +
         std::to_string(size) + "\" font-family=\"sans-serif\" text-anchor=\"" + anchor +
         "\">" + s + "</text>\n";
}

}  // namespace

std::string confusion_svg(const ConfusionMatrix5& cm, const std::string& title) {
  constexpr double cell = 64.0;
  constexpr double left = 110.0, top = 70.0;
  const double width = left + kRegionCount * cell + 30.0;
  const double height = top + kRegionCount * cell + 60.0;

  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(width) +
                    "\" height=\"" + num(height) + "\">\n";
  rect(svg, 0, 0, width, height, "white", "none");
  text(svg, width / 2.0, 26,
       title + "  (accuracy " + num(100.0 * cm.accuracy) + "%)", 15);

  const double max_count = std::max<double>(1.0, static_cast<double>(cm.counts.maxCoeff()));
  for (int r = 0; r < kRegionCount; ++r) {
    for (int c = 0; c < kRegionCount; ++c) {
      const double frac = static_cast<double>(cm.counts(r, c)) / max_count;
      const int shade = static_cast<int>(255.0 - 175.0 * frac);
      const std::string fill = r == c
                                   ? "rgb(" + std::to_string(shade) + ",255," +
                                         std::to_string(shade) + ")"
                                   : "rgb(255," + std::to_string(shade) + "," +
                                         std::to_string(std::max(0, shade - 30)) + ")";
      rect(svg, left + c * cell, top + r * cell, cell, cell, fill,
           r == c ? "black" : "gray");
      text(svg, left + c * cell + cell / 2.0, top + r * cell + cell / 2.0 + 5,
           std::to_string(cm.counts(r, c)), 14);
    }
  }
  for (int i = 0; i < kRegionCount; ++i) {
    const auto region = static_cast<HelmetRegion>(i);
    text(svg, left - 8, top + i * cell + cell / 2.0 + 4, region_name(region), 12, "end");
    text(svg, left + i * cell + cell / 2.0, top + kRegionCount * cell + 18,
         region_name(region), 12);
  }
  text(svg, left - 86, top + kRegionCount * cell / 2.0, "reference", 12, "middle");
  text(svg, left + kRegionCount * cell / 2.0, top + kRegionCount * cell + 40,
       "prediction", 12);
  svg += "</svg>\n";
  return svg;
}

std::string force_overlay_svg(const std::vector<OverlayExample>& examples,
                              const std::string& title) {
  constexpr double plot_w = 280.0, plot_h = 150.0, margin = 42.0;
  const int cols = std::min<int>(3, static_cast<int>(examples.size()));
  const int rows = (static_cast<int>(examples.size()) + cols - 1) / cols;
  const double width = cols * (plot_w + margin) + margin;
  const double height = rows * (plot_h + margin + 24.0) + 60.0;

  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(width) +
                    "\" height=\"" + num(height) + "\">\n";
  rect(svg, 0, 0, width, height, "white", "none");
  text(svg, width / 2.0, 24, title, 15);

  for (std::size_t i = 0; i < examples.size(); ++i) {
    const OverlayExample& ex = examples[i];
    const int r = static_cast<int>(i) / cols;
    const int c = static_cast<int>(i) % cols;
    const double ox = margin + c * (plot_w + margin);
    const double oy = 46.0 + r * (plot_h + margin + 24.0);
    const double peak = std::max({ex.reference.maxCoeff(), ex.prediction.maxCoeff(), 1e-9});

    rect(svg, ox, oy, plot_w, plot_h, "none", "black");
    text(svg, ox + plot_w / 2.0, oy - 6, ex.label, 11);

    const auto polyline = [&](const Eigen::VectorXd& v, const std::string& color,
                              bool dashed) {
      std::string points;
      for (Eigen::Index k = 0; k < v.size(); ++k) {
        const double x = ox + plot_w * static_cast<double>(k) /
                                  static_cast<double>(v.size() - 1);
        const double y = oy + plot_h * (1.0 - v[k] / (1.05 * peak));
        points += num(x) + "," + num(y) + " ";
      }
      svg += "<polyline fill=\"none\" stroke=\"" + color + "\" stroke-width=\"1.5\"" +
             (dashed ? " stroke-dasharray=\"5,3\"" : "") + " points=\"" + points +
             "\"/>\n";
    };
    polyline(ex.reference, "black", false);
    polyline(ex.prediction, "crimson", true);
    text(svg, ox + plot_w / 2.0, oy + plot_h + 16,
         "peak " + num(peak) + " kN (reference solid, prediction dashed)", 10);
  }
  svg += "</svg>\n";
  return svg;
}

}  // namespace impact
