#pragma once

// Multi-run experiment orchestration: S subsamplings x R initialisations,
// executed by a worker pool whose output does not depend on scheduling.
//
// Store layout under a sweep root:
//   config.json                 sweep configuration, feature list, provenance
//   runs/<i>_<j>/mask.csv       feature,weight
//   runs/<i>_<j>/log.csv        training log
//   runs/<i>_<j>/checkpoint.bin final model
//   runs/<i>_<j>/run.json       seed, status, retained indices (written last)
//   failures.json               failed cells with messages

#include "mdmt/trainer.hpp"

#include <compare>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace mdmt {

enum class SweepMode { across, single_a, single_b };

std::string to_string(SweepMode mode);
SweepMode sweep_mode_from_string(const std::string& s);

struct SweepConfig {
    std::size_t n_subsamples = 10;
    std::size_t n_inits = 90;
    double subsample_fraction = 0.85;
    std::uint64_t base_seed = 0;
    TrainConfig train;
    SweepMode mode = SweepMode::across;
    std::size_t max_parallel_workers = 1;

    void validate() const;
    std::size_t total_runs() const { return n_subsamples * n_inits; }
};

struct CellKey {
    std::size_t subsample = 0;
    std::size_t init = 0;

    auto operator<=>(const CellKey&) const = default;
    std::string id() const;
};

/// Seed for subsample i; independent of the initialisation index.
std::uint64_t subsample_seed(std::uint64_t base_seed, std::size_t i);

/// Seed for weight initialisation, batches and noise of cell (i, j).
std::uint64_t init_seed(std::uint64_t base_seed, std::size_t i, std::size_t j);

struct CellSeeds {
    CellKey cell;
    std::uint64_t subsample_seed = 0;
    std::uint64_t init_seed = 0;
};

/// Every cell's seeds in (i, j) order, without running anything.
std::vector<CellSeeds> list_seeds(const SweepConfig& config);

struct RunFailure {
    CellKey cell;
    std::string message;
};

struct SweepResult {
    std::string sweep_id;
    SweepConfig config;
    std::vector<std::string> features;
    std::map<CellKey, RunRecord> runs;
    std::vector<RunFailure> failures;
    std::size_t executed = 0;  // cells trained by this invocation
};

/// MDMT_WORKERS, when set to a positive integer, replaces the configured count.
std::size_t resolve_worker_count(std::size_t configured);

class SweepStore {
public:
    explicit SweepStore(std::filesystem::path root);

    const std::filesystem::path& root() const { return root_; }
    std::string sweep_id() const;
    std::filesystem::path cell_dir(const CellKey& cell) const;

    /// `provenance_json` is free-form JSON recorded alongside the config.
    void write_config(const SweepConfig& config, const std::vector<std::string>& features,
                      const std::string& provenance_json = "{}") const;
    bool has_config() const;
    SweepConfig read_config() const;
    std::vector<std::string> read_features() const;
    std::string read_provenance() const;

    void save_cell(const CellKey& cell, const RunRecord& record,
                   const std::vector<std::string>& features) const;
    /// nullopt when the cell is absent or any of its files is missing or corrupt.
    std::optional<RunRecord> load_cell(const CellKey& cell, std::size_t d) const;

    void write_failures(const std::vector<RunFailure>& failures) const;

private:
    std::filesystem::path root_;
};

SweepResult run_sweep(const PairedDomainData& data, const SweepConfig& config,
                      const SweepStore* store = nullptr);

/// Reduced network (mask, one VAE, classifier) on one domain.
SweepResult run_single_domain(const ExpressionDataset& data, const SweepConfig& config,
                              const SweepStore* store = nullptr);

/// Trains only the cells that are missing or corrupt in `store`.
SweepResult resume_sweep(const SweepStore& store, const PairedDomainData& data);

/// Loads every complete cell without training anything.
SweepResult load_sweep(const SweepStore& store);

} // namespace mdmt
