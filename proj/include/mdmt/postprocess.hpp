#pragma once

// From raw sweep masks to ranked, cross-domain feature sets:
//   1. pool |w| over every run, divide by the pooled maximum, take one
//      global elbow threshold and select per run;
//   2. count per-feature selection frequency across runs and take a second
//      elbow over the positive frequencies;
//   3. group the final sets by overlap with single-domain results;
//   4. project inference-mode latent means onto two principal components.

#include "mdmt/harness.hpp"

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace mdmt {

struct ElbowPoint {
    std::size_t index = 0;  // position in the descending-sorted curve
    double value = 0.0;
};

/// Knee of the descending-sorted curve: the point farthest from the chord
/// joining its first and last points. Ties go to the larger index. A flat
/// curve returns its (single) value.
ElbowPoint elbow_point(std::span<const double> values);
double elbow_threshold(std::span<const double> values);

struct RunSelection {
    std::vector<CellKey> runs;
    std::vector<std::vector<std::size_t>> selected;  // feature indices per run, ascending
    std::vector<double> mean_abs_weight;             // per feature, raw |w| over runs
    double weight_threshold = 0.0;                   // on the max-normalised scale
    bool all_zero = false;
};

RunSelection per_run_selection(std::span<const std::vector<double>> masks,
                               std::vector<CellKey> runs = {});
RunSelection per_run_selection(const SweepResult& sweep);

struct RankedFeature {
    std::string id;
    std::size_t index = 0;
    double frequency = 0.0;
    double mean_abs_weight = 0.0;
};

struct FeatureReport {
    std::vector<std::string> universe;
    std::vector<RankedFeature> ranked;  // frequency desc, then mean |w| desc, then id
    double weight_threshold = 0.0;
    double frequency_threshold = 0.0;
    std::vector<std::string> selected;  // ranked order
    std::size_t n_runs = 0;
};

FeatureReport frequency_rank(const RunSelection& selection, const std::vector<std::string>& features);

/// Both two passes on one sweep.
FeatureReport feature_report(const SweepResult& sweep);

struct OverlapReport {
    std::string perspective;
    std::map<std::string, std::vector<std::string>> groups;  // group name -> ids in ranked order
};

struct OverlapReports {
    OverlapReport across;    // Both, DomainA, DomainB, None
    OverlapReport single_a;  // Both, DomainOnly
    OverlapReport single_b;
};

OverlapReports overlap_groups(const FeatureReport& across, const FeatureReport& domain_a,
                              const FeatureReport& domain_b);

struct PcaProjection {
    Eigen::MatrixXd coords;            // n x 2
    std::vector<std::string> domains;  // per row
    std::vector<int> labels;
    std::array<double, 2> variance{};  // variance along each component
    bool degenerate = false;
};

/// Principal components of the row-stacked embeddings.
PcaProjection pca_2d(const std::vector<Eigen::MatrixXd>& embeddings,
                     const std::vector<std::string>& domain_names,
                     const std::vector<std::vector<int>>& labels);

/// Inference-mode mu of every sample in each domain through the checkpointed
/// model, then projected. The checkpoint may carry one or two VAEs.
PcaProjection latent_pca(const Checkpoint& checkpoint, const PairedDomainData& data);

struct RecoveryStats {
    double recall = 0.0;
    double precision = 0.0;
    std::size_t true_positives = 0;
};

RecoveryStats recovery(const std::vector<std::string>& selected,
                       const std::vector<std::string>& truth);

// --- report files -----------------------------------------------------------

void write_feature_report(const FeatureReport& report, const std::filesystem::path& csv,
                          const std::filesystem::path& summary_json);
void write_overlap_report(const OverlapReport& report, const FeatureReport& source,
                          const std::filesystem::path& csv);
void write_pca_table(const PcaProjection& pca, const std::filesystem::path& csv);

} // namespace mdmt
