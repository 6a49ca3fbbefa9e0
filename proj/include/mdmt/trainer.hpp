#pragma once

// One training run: paired batches, composite loss, backpropagation and four
// independent AdamW optimizers (mask, one per VAE, classifier).
//
// An "epoch" here is a single paired-batch iteration, not a pass over the data.

#include "mdmt/checkpoint.hpp"
#include "mdmt/dataset.hpp"
#include "mdmt/objective.hpp"
#include "mdmt/optimizer.hpp"

#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace mdmt {

enum class Precision { float32, float64 };

std::string to_string(Precision p);
Precision precision_from_string(const std::string& s);

struct TrainConfig {
    std::size_t epochs = 20000;
    std::size_t batch_size = 32;
    LossWeights loss;
    AdamWSettings optimizer;  // lr 1e-4, betas 0.9/0.999, eps 1e-8, weight decay 0.01
    std::size_t hidden = 1024;
    std::size_t latent = 128;
    std::size_t classifier_depth = 5;
    Precision precision = Precision::float32;
    std::uint64_t seed = 0;
    bool keep_checkpoint = true;
    bool record_embeddings = false;

    void validate() const;

    /// Narrow networks and a faster schedule for single-CPU experiments.
    static TrainConfig desk_scale();
};

struct RunRecord {
    std::string run_id;
    std::uint64_t seed = 0;
    RetainedIndices retained;
    std::vector<double> final_mask;
    std::vector<LossBreakdown> loss_history;
    std::vector<double> wall_seconds;  // cumulative, one per epoch
    TrainConfig config;
    bool failed = false;
    std::string failure;
    std::optional<Checkpoint> checkpoint;
    std::vector<Eigen::MatrixXd> embeddings;  // inference-mode mu per domain, when recorded
};

/// Called after every epoch with (epoch index, loss of that epoch).
using EpochObserver = std::function<void(std::size_t, const LossBreakdown&)>;

/// Trains on one or two domains; one VAE per domain. Never throws for a
/// non-finite loss: the record comes back with `failed` set.
RunRecord train_domains(std::span<const ExpressionDataset* const> domains, const TrainConfig& config,
                        const EpochObserver& observer = {});

RunRecord train_one(const PairedDomainData& data, const TrainConfig& config,
                    const EpochObserver& observer = {});

RunRecord train_single(const ExpressionDataset& data, const TrainConfig& config,
                       const EpochObserver& observer = {});

/// Inference-mode mu for every row of `data` through VAE slot `slot`.
template <typename T>
Eigen::MatrixXd embed(const ModelState<T>& model, std::size_t slot, const ExpressionDataset& data);

/// Inference-mode accuracy with z = mu; p >= 0.5 predicts class 1.
template <typename T>
double evaluate_domain(const ModelState<T>& model, std::size_t slot, const ExpressionDataset& data);

template <typename T>
std::pair<double, double> evaluate(const ModelState<T>& model, const PairedDomainData& data);

/// Delimited training log: epoch, the eight loss fields, wall-clock seconds.
void write_training_log(const RunRecord& record, const std::filesystem::path& path);
std::vector<LossBreakdown> read_training_log(const std::filesystem::path& path,
                                             std::vector<double>* wall_seconds = nullptr);

} // namespace mdmt
