#pragma once

// Two-domain labelled expression data: loading, alignment, standardisation,
// batching, subsampling and a planted-truth synthetic generator.

#include "mdmt/types.hpp"

#include <array>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace mdmt {

struct ExpressionDataset {
    std::string domain_id;
    std::vector<std::string> features;
    std::vector<std::string> sample_ids;
    Eigen::MatrixXd samples;  // n x d
    std::vector<int> labels;  // 0 or 1
    std::array<std::string, 2> class_names;

    std::size_t n() const { return static_cast<std::size_t>(samples.rows()); }
    std::size_t d() const { return static_cast<std::size_t>(samples.cols()); }

    /// Throws Error when any invariant of the type is violated.
    void validate() const;
};

struct PairedDomainData {
    ExpressionDataset domain_a;
    ExpressionDataset domain_b;
    std::vector<std::string> shared_features;

    std::size_t d() const { return shared_features.size(); }
};

struct DomainBatch {
    Eigen::MatrixXd x;
    std::vector<int> y;
};

struct BatchPair {
    DomainBatch a;
    DomainBatch b;
};

/// Which rows of each domain survived a subsample, in original-row order.
struct RetainedIndices {
    std::vector<std::vector<std::size_t>> per_domain;
};

struct SyntheticSpec {
    std::size_t d = 200;
    std::size_t n_a = 200;
    std::size_t n_b = 200;
    std::vector<std::size_t> planted_shared;
    std::vector<std::size_t> planted_a_only;
    std::vector<std::size_t> planted_b_only;
    double effect_size_shared = 5.0;
    double effect_size_single = 5.0;
    std::uint64_t noise_seed = 0;

    /// Throws Error naming the offending index on overlap or out-of-range.
    void validate() const;
};

// --- I/O --------------------------------------------------------------------

/// Reads a comma- or tab-delimited table. The first column holds sample IDs,
/// `label_column` names the class column and every other column is a feature.
/// Class names map to {0, 1} in lexicographic order.
ExpressionDataset load_dataset(const std::filesystem::path& path, const std::string& domain_id,
                               const std::string& label_column);

void write_dataset(const ExpressionDataset& data, const std::filesystem::path& path,
                   const std::string& label_column = "label");

// --- preprocessing ----------------------------------------------------------

/// Restricts both domains to the sorted intersection of their feature IDs.
PairedDomainData align_domains(const ExpressionDataset& a, const ExpressionDataset& b);

/// Standardises one dataset's columns with population std; constant columns become zero.
ExpressionDataset zscore(const ExpressionDataset& data);

PairedDomainData zscore_per_domain(const PairedDomainData& p);

// --- sampling ---------------------------------------------------------------

/// Uniform draw with replacement of `batch_size` rows.
DomainBatch sample_batch(const ExpressionDataset& data, std::size_t batch_size, Rng& rng);

/// Domain a is drawn first, then domain b, from the same generator.
BatchPair sample_batch_pair(const PairedDomainData& p, std::size_t batch_size, Rng& rng);

/// Stratified draw without replacement: each class keeps ceil(fraction * count) rows.
ExpressionDataset subsample_dataset(const ExpressionDataset& data, double fraction, Rng& rng,
                                    std::vector<std::size_t>* retained = nullptr);

std::pair<PairedDomainData, RetainedIndices> subsample(const PairedDomainData& p, double fraction,
                                                       Rng& rng);

// --- synthetic data ---------------------------------------------------------

PairedDomainData generate_synthetic(const SyntheticSpec& spec);

std::string synthetic_feature_name(std::size_t index, std::size_t d);

void write_ground_truth(const SyntheticSpec& spec, const std::filesystem::path& path);
SyntheticSpec read_ground_truth(const std::filesystem::path& path);

} // namespace mdmt
