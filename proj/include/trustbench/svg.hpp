#pragma once

#include <map>
#include <string>
#include <vector>

#include "trustbench/analytics.hpp"

namespace trustbench {

// Minimal static SVG drawings (rect/line/text only), deterministic bytes.
std::string render_heatmap_svg(
    const std::map<std::string, std::map<int, MacroMetrics>>& per_model_practice,
    const std::string& title);

std::string render_boxplot_svg(const std::vector<GroupStats>& groups, const std::string& title);

}  // namespace trustbench
