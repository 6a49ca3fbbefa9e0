#pragma once

// Minimal SVG rendering of the report tables. Numbers always reach disk as
// delimited text first; these only draw what was already written.

#include "mdmt/objective.hpp"
#include "mdmt/postprocess.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace mdmt {

struct Series {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

struct Panel {
    std::string title;
    std::vector<Series> series;
    std::vector<double> hlines;
    bool log_y = false;
};

/// Panels laid out left to right, top to bottom in `columns` columns.
std::string render_line_panels(const std::vector<Panel>& panels, std::size_t columns);

/// Weighted reconstruction, classification, sparsity and total loss.
std::vector<Panel> loss_panels(const std::vector<LossBreakdown>& history, const LossWeights& w);

Panel frequency_panel(const FeatureReport& report, const std::string& title);

std::string render_pca_scatter(const PcaProjection& pca, const std::string& title);

void write_text(const std::filesystem::path& path, const std::string& text);

} // namespace mdmt
