// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace tpflow::io {

struct Series {
  std::string label;
  std::vector<std::pair<double, double>> points;
};

/// Line chart with one polyline per series, axes and a legend.
std::string render_svg(const std::vector<Series>& series, const std::string& title, const std::string& x_label,
                       const std::string& y_label);

/// (iteration, field) points of a metrics.jsonl; records lacking the field are skipped.
Series series_from_metrics(const std::filesystem::path& metrics, const std::string& field,
                           const std::string& label);

}  // namespace tpflow::io
