#include "mdmt/harness.hpp"

#include "mdmt/config_io.hpp"
#include "mdmt/seed.hpp"

#include <atomic>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <thread>

namespace fs = std::filesystem;

namespace mdmt {

namespace {

constexpr std::uint64_t kSubsampleStream = 0xffffffffffffffffULL;

nlohmann::json read_json(const fs::path& path)
{
    std::ifstream in(path);
    if (!in) throw Error("cannot open '" + path.string() + "'");
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw Error("malformed JSON in '" + path.string() + "': " + e.what());
    }
}

void write_text_atomic(const fs::path& path, const std::string& text)
{
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp);
        if (!out) throw Error("cannot write '" + tmp.string() + "'");
        out << text;
        if (!out) throw Error("failed writing '" + tmp.string() + "'");
    }
    fs::rename(tmp, path);
}

bool checkpoint_intact(const fs::path& path)
{
    std::error_code ec;
    const auto size = fs::file_size(path, ec);
    if (ec) return false;
    try {
        std::ifstream in(path, std::ios::binary);
        char magic[8];
        std::uint64_t len = 0;
        in.read(magic, 8);
        in.read(reinterpret_cast<char*>(&len), sizeof len);
        if (!in || len > size) return false;
        std::string text(len, '\0');
        in.read(text.data(), static_cast<std::streamsize>(len));
        const auto header = nlohmann::json::parse(text);
        std::uint64_t payload = 0;
        for (const auto& a : header.at("arrays"))
            payload += a.at("shape").at(0).get<std::uint64_t>() *
                       a.at("shape").at(1).get<std::uint64_t>() * sizeof(double);
        return size == 16 + len + payload;
    } catch (const std::exception&) {
        return false;
    }
}

std::vector<double> read_mask_file(const fs::path& path, std::size_t d)
{
    std::ifstream in(path);
    if (!in) throw Error("missing mask file");
    std::string line;
    std::getline(in, line);
    std::vector<double> w;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto comma = line.rfind(',');
        if (comma == std::string::npos) throw Error("malformed mask row");
        w.push_back(std::stod(line.substr(comma + 1)));
    }
    if (w.size() != d) throw Error("mask length mismatch");
    return w;
}

struct Job {
    CellSeeds seeds;
    std::size_t slot = 0;
};

SweepResult execute(std::span<const ExpressionDataset* const> domains, const SweepConfig& config,
                    const SweepStore* store, bool resume)
{
    config.validate();
    SweepResult result;
    result.config = config;
    result.features = domains[0]->features;
    result.sweep_id = store ? store->sweep_id() : "in-memory";

    if (store && !resume) {
        std::string provenance = "{}";
        try {
            if (store->has_config()) provenance = store->read_provenance();
        } catch (const std::exception&) {
        }
        store->write_config(config, result.features, provenance);
    }

    const auto all_seeds = list_seeds(config);
    std::vector<Job> jobs;
    for (const auto& s : all_seeds) {
        if (store && resume) {
            if (auto loaded = store->load_cell(s.cell, result.features.size())) {
                if (loaded->failed) result.failures.push_back({s.cell, loaded->failure});
                else result.runs.emplace(s.cell, std::move(*loaded));
                continue;
            }
        }
        jobs.push_back({s, jobs.size()});
    }

    // Subsamples are drawn by the controller so they depend on i alone.
    std::map<std::size_t, std::vector<ExpressionDataset>> subsamples;
    std::map<std::size_t, RetainedIndices> retained;
    for (const auto& job : jobs) {
        const auto i = job.seeds.cell.subsample;
        if (subsamples.count(i)) continue;
        Rng rng(job.seeds.subsample_seed);
        RetainedIndices record;
        std::vector<ExpressionDataset> sets;
        for (const auto* d : domains) {
            record.per_domain.emplace_back();
            sets.push_back(subsample_dataset(*d, config.subsample_fraction, rng,
                                             &record.per_domain.back()));
        }
        subsamples.emplace(i, std::move(sets));
        retained.emplace(i, std::move(record));
    }

    std::vector<RunRecord> outcomes(jobs.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (std::size_t n = next.fetch_add(1); n < jobs.size(); n = next.fetch_add(1)) {
            const auto& job = jobs[n];
            RunRecord rec;
            try {
                const auto& sets = subsamples.at(job.seeds.cell.subsample);
                std::vector<const ExpressionDataset*> ptrs;
                for (const auto& s : sets) ptrs.push_back(&s);
                TrainConfig tc = config.train;
                tc.seed = job.seeds.init_seed;
                tc.keep_checkpoint = config.train.keep_checkpoint || store != nullptr;
                rec = train_domains(ptrs, tc);
            } catch (const std::exception& e) {
                rec.failed = true;
                rec.failure = e.what();
                rec.seed = job.seeds.init_seed;
                rec.config = config.train;
            }
            rec.run_id = job.seeds.cell.id();
            rec.retained = retained.at(job.seeds.cell.subsample);
            if (store) {
                try {
                    store->save_cell(job.seeds.cell, rec, result.features);
                } catch (const std::exception& e) {
                    rec.failed = true;
                    rec.failure = std::string("could not persist run: ") + e.what();
                }
                if (!config.train.keep_checkpoint) rec.checkpoint.reset();
            }
            outcomes[job.slot] = std::move(rec);
        }
    };

    const std::size_t workers =
        std::max<std::size_t>(1, std::min(resolve_worker_count(config.max_parallel_workers), jobs.size()));
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    for (std::size_t n = 0; n < jobs.size(); ++n) {
        auto& rec = outcomes[n];
        const auto cell = jobs[n].seeds.cell;
        if (rec.failed) result.failures.push_back({cell, rec.failure});
        else result.runs.emplace(cell, std::move(rec));
    }
    std::sort(result.failures.begin(), result.failures.end(),
              [](const RunFailure& a, const RunFailure& b) { return a.cell < b.cell; });
    result.executed = jobs.size();
    if (store) store->write_failures(result.failures);
    return result;
}

std::vector<const ExpressionDataset*> domains_for(const PairedDomainData& data, SweepMode mode)
{
    switch (mode) {
    case SweepMode::across: return {&data.domain_a, &data.domain_b};
    case SweepMode::single_a: return {&data.domain_a};
    case SweepMode::single_b: return {&data.domain_b};
    }
    return {};
}

} // namespace

std::string to_string(SweepMode mode)
{
    switch (mode) {
    case SweepMode::across: return "across";
    case SweepMode::single_a: return "single-a";
    case SweepMode::single_b: return "single-b";
    }
    return "?";
}

SweepMode sweep_mode_from_string(const std::string& s)
{
    if (s == "across") return SweepMode::across;
    if (s == "single-a") return SweepMode::single_a;
    if (s == "single-b") return SweepMode::single_b;
    throw Error("unknown sweep mode '" + s + "' (expected across, single-a or single-b)");
}

void SweepConfig::validate() const
{
    require(n_subsamples >= 1 && n_inits >= 1, "sweep needs at least one subsample and one init");
    require(subsample_fraction > 0.0 && subsample_fraction <= 1.0,
            "subsample_fraction must lie in (0, 1]");
    train.validate();
}

std::string CellKey::id() const
{
    return std::to_string(subsample) + "_" + std::to_string(init);
}

std::uint64_t subsample_seed(std::uint64_t base_seed, std::size_t i)
{
    return combine_seed(combine_seed(splitmix64(base_seed), i), kSubsampleStream);
}

std::uint64_t init_seed(std::uint64_t base_seed, std::size_t i, std::size_t j)
{
    return combine_seed(combine_seed(splitmix64(base_seed), i), j);
}

std::vector<CellSeeds> list_seeds(const SweepConfig& config)
{
    std::vector<CellSeeds> seeds;
    for (std::size_t i = 0; i < config.n_subsamples; ++i)
        for (std::size_t j = 0; j < config.n_inits; ++j)
            seeds.push_back({{i, j}, subsample_seed(config.base_seed, i),
                             init_seed(config.base_seed, i, j)});
    return seeds;
}

std::size_t resolve_worker_count(std::size_t configured)
{
    if (const char* env = std::getenv("MDMT_WORKERS")) {
        try {
            const long v = std::stol(env);
            if (v > 0) return static_cast<std::size_t>(v);
        } catch (const std::exception&) {
        }
    }
    return std::max<std::size_t>(1, configured);
}

// --- store ------------------------------------------------------------------

SweepStore::SweepStore(fs::path root) : root_(std::move(root)) {}

std::string SweepStore::sweep_id() const
{
    auto p = root_;
    if (p.filename().empty()) p = p.parent_path();
    return p.filename().string();
}

fs::path SweepStore::cell_dir(const CellKey& cell) const
{
    return root_ / "runs" / cell.id();
}

void SweepStore::write_config(const SweepConfig& config, const std::vector<std::string>& features,
                              const std::string& provenance_json) const
{
    fs::create_directories(root_ / "runs");
    nlohmann::json j;
    j["sweep_id"] = sweep_id();
    j["sweep"] = to_json(config);
    j["features"] = features;
    j["provenance"] = nlohmann::json::parse(provenance_json);
    write_text_atomic(root_ / "config.json", j.dump(2) + "\n");
}

bool SweepStore::has_config() const
{
    return fs::exists(root_ / "config.json");
}

SweepConfig SweepStore::read_config() const
{
    return sweep_config_from_json(read_json(root_ / "config.json").at("sweep"));
}

std::vector<std::string> SweepStore::read_features() const
{
    return read_json(root_ / "config.json").at("features").get<std::vector<std::string>>();
}

std::string SweepStore::read_provenance() const
{
    return read_json(root_ / "config.json").value("provenance", nlohmann::json::object()).dump();
}

void SweepStore::save_cell(const CellKey& cell, const RunRecord& record,
                           const std::vector<std::string>& features) const
{
    const auto dir = cell_dir(cell);
    fs::create_directories(dir);
    fs::remove(dir / "run.json");

    if (!record.failed) {
        std::ostringstream mask;
        mask << "feature,weight\n" << std::setprecision(17);
        for (std::size_t j = 0; j < record.final_mask.size(); ++j)
            mask << features.at(j) << ',' << record.final_mask[j] << '\n';
        write_text_atomic(dir / "mask.csv", mask.str());
        write_training_log(record, dir / "log.csv");
        if (record.checkpoint) {
            Checkpoint ckpt = *record.checkpoint;
            ckpt.metadata_json = nlohmann::json{{"run_id", record.run_id},
                                                {"train", to_json(record.config)}}
                                     .dump();
            write_checkpoint(ckpt, dir / "checkpoint.bin");
        }
    }

    nlohmann::json j;
    j["run_id"] = record.run_id;
    j["seed"] = record.seed;
    j["status"] = record.failed ? "failed" : "ok";
    j["failure"] = record.failure;
    j["epochs_completed"] = record.loss_history.size();
    j["has_checkpoint"] = record.checkpoint.has_value();
    j["retained"] = record.retained.per_domain;
    j["train"] = to_json(record.config);
    write_text_atomic(dir / "run.json", j.dump(1) + "\n");
}

std::optional<RunRecord> SweepStore::load_cell(const CellKey& cell, std::size_t d) const
{
    const auto dir = cell_dir(cell);
    try {
        const auto j = read_json(dir / "run.json");
        RunRecord rec;
        rec.run_id = j.at("run_id").get<std::string>();
        rec.seed = j.at("seed").get<std::uint64_t>();
        rec.failed = j.at("status").get<std::string>() != "ok";
        rec.failure = j.at("failure").get<std::string>();
        rec.retained.per_domain = j.at("retained").get<std::vector<std::vector<std::size_t>>>();
        rec.config = train_config_from_json(j.at("train"));
        if (rec.failed) return rec;

        rec.final_mask = read_mask_file(dir / "mask.csv", d);
        rec.loss_history = read_training_log(dir / "log.csv", &rec.wall_seconds);
        if (rec.loss_history.size() != j.at("epochs_completed").get<std::size_t>()) return std::nullopt;
        if (j.at("has_checkpoint").get<bool>() && !checkpoint_intact(dir / "checkpoint.bin"))
            return std::nullopt;
        return rec;
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

void SweepStore::write_failures(const std::vector<RunFailure>& failures) const
{
    nlohmann::json j = nlohmann::json::array();
    for (const auto& f : failures)
        j.push_back({{"cell", f.cell.id()}, {"message", f.message}});
    write_text_atomic(root_ / "failures.json", j.dump(2) + "\n");
}

// --- entry points -----------------------------------------------------------

SweepResult run_sweep(const PairedDomainData& data, const SweepConfig& config,
                      const SweepStore* store)
{
    require(config.mode == SweepMode::across, "run_sweep expects mode 'across'");
    const auto domains = domains_for(data, config.mode);
    return execute(domains, config, store, false);
}

SweepResult run_single_domain(const ExpressionDataset& data, const SweepConfig& config,
                              const SweepStore* store)
{
    require(config.mode != SweepMode::across, "run_single_domain expects a single-domain mode");
    const ExpressionDataset* domains[1] = {&data};
    return execute(domains, config, store, false);
}

SweepResult resume_sweep(const SweepStore& store, const PairedDomainData& data)
{
    require(store.has_config(), "no sweep configuration under '" + store.root().string() + "'");
    const auto config = store.read_config();
    const auto features = store.read_features();
    const auto domains = domains_for(data, config.mode);
    require(domains[0]->features == features,
            "data features do not match the features recorded in the sweep");
    return execute(domains, config, &store, true);
}

SweepResult load_sweep(const SweepStore& store)
{
    require(store.has_config(), "no sweep configuration under '" + store.root().string() + "'");
    SweepResult result;
    result.config = store.read_config();
    result.features = store.read_features();
    result.sweep_id = store.sweep_id();
    for (const auto& s : list_seeds(result.config)) {
        auto rec = store.load_cell(s.cell, result.features.size());
        if (!rec) throw Error("sweep '" + result.sweep_id + "' is missing run " + s.cell.id());
        if (rec->failed) result.failures.push_back({s.cell, rec->failure});
        else result.runs.emplace(s.cell, std::move(*rec));
    }
    return result;
}

} // namespace mdmt
