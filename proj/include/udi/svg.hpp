#pragma once

#include <string>
#include <vector>

namespace udi {

/// Minimal grouped bar chart, one group per row of `values`, one bar per
/// series. Values are expected in [0, 1] (accuracies).
void write_grouped_bar_svg(const std::string& path, const std::string& title,
                           const std::vector<std::string>& group_names,
                           const std::vector<std::string>& series_names,
                           const std::vector<std::vector<double>>& values);

}  // namespace udi
