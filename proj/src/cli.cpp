#include "mdmt/cli.hpp"

#include "mdmt/config_io.hpp"
#include "mdmt/plot.hpp"
#include "mdmt/postprocess.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <optional>

namespace mdmt {

namespace fs = std::filesystem;

namespace {

struct IoPaths {
    std::string data_a, data_b, label_column = "label", out, across, single_a, single_b, truth;
};

nlohmann::json to_json(const IoPaths& io)
{
    return {{"data_a", io.data_a},     {"data_b", io.data_b},   {"label_column", io.label_column},
            {"out", io.out},           {"across", io.across},   {"single_a", io.single_a},
            {"single_b", io.single_b}, {"truth", io.truth}};
}

IoPaths io_from_json(const nlohmann::json& j, IoPaths io)
{
    reject_unknown_keys(j, {"data_a", "data_b", "label_column", "out", "across", "single_a", "single_b", "truth"},
                        "io section");
    auto read = [&](const char* key, std::string& out) {
        if (!j.contains(key)) return;
        if (!j.at(key).is_string()) throw Error(std::string("io.") + key + " must be a string");
        out = j.at(key).get<std::string>();
    };
    read("data_a", io.data_a);
    read("data_b", io.data_b);
    read("label_column", io.label_column);
    read("out", io.out);
    read("across", io.across);
    read("single_a", io.single_a);
    read("single_b", io.single_b);
    read("truth", io.truth);
    return io;
}

nlohmann::json read_json_file(const fs::path& path)
{
    std::ifstream in(path);
    if (!in) throw Error("cannot open '" + path.string() + "'");
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw Error("'" + path.string() + "' is not valid JSON: " + e.what());
    }
}

/// Values set on the command line; unset ones leave the file/default value alone.
struct Flags {
    std::string config, out;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> workers;
    std::optional<std::string> mode;

    // train
    std::optional<std::size_t> epochs, batch_size, hidden, latent, classifier_depth;
    std::optional<double> lr, weight_decay, alpha, beta, gamma, theta;
    std::optional<std::string> precision;
    bool desk_scale = false;

    // sweep
    std::optional<std::size_t> n_subsamples, n_inits;
    std::optional<double> fraction;
    bool resume = false;

    // synth
    std::optional<std::size_t> d, n_a, n_b;
    std::vector<std::size_t> shared, a_only, b_only;
    std::optional<double> effect_shared, effect_single;

    // io
    std::optional<std::string> data_a, data_b, label_column, across, single_a, single_b, truth;
};

struct Settings {
    TrainConfig train;
    SweepConfig sweep;
    SyntheticSpec synth;
    IoPaths io;
};

template <typename V>
void apply(const std::optional<V>& flag, V& target)
{
    if (flag) target = *flag;
}

Settings resolve(const Flags& f, const CLI::App& synth_cmd)
{
    Settings s;
    if (f.desk_scale) s.train = TrainConfig::desk_scale();
    if (!f.config.empty()) {
        const auto root = read_json_file(f.config);
        reject_unknown_keys(root, {"train", "sweep", "synth", "io"}, "config file");
        if (root.contains("sweep")) s.sweep = sweep_config_from_json(root.at("sweep"), s.sweep);
        if (root.contains("sweep") && root.at("sweep").contains("train")) s.train = s.sweep.train;
        if (root.contains("train")) s.train = train_config_from_json(root.at("train"), s.train);
        if (root.contains("synth")) s.synth = synthetic_spec_from_json(root.at("synth"), s.synth);
        if (root.contains("io")) s.io = io_from_json(root.at("io"), s.io);
    }

    apply(f.epochs, s.train.epochs);
    apply(f.batch_size, s.train.batch_size);
    apply(f.hidden, s.train.hidden);
    apply(f.latent, s.train.latent);
    apply(f.classifier_depth, s.train.classifier_depth);
    apply(f.lr, s.train.optimizer.learning_rate);
    apply(f.weight_decay, s.train.optimizer.weight_decay);
    apply(f.alpha, s.train.loss.alpha);
    apply(f.beta, s.train.loss.beta);
    apply(f.gamma, s.train.loss.gamma);
    apply(f.theta, s.train.loss.theta);
    if (f.precision) s.train.precision = precision_from_string(*f.precision);

    apply(f.n_subsamples, s.sweep.n_subsamples);
    apply(f.n_inits, s.sweep.n_inits);
    apply(f.fraction, s.sweep.subsample_fraction);
    apply(f.workers, s.sweep.max_parallel_workers);
    if (f.mode) s.sweep.mode = sweep_mode_from_string(*f.mode);
    if (f.seed) s.sweep.base_seed = *f.seed;
    s.sweep.train = s.train;

    apply(f.d, s.synth.d);
    apply(f.n_a, s.synth.n_a);
    apply(f.n_b, s.synth.n_b);
    apply(f.effect_shared, s.synth.effect_size_shared);
    apply(f.effect_single, s.synth.effect_size_single);
    if (synth_cmd.count("--shared")) s.synth.planted_shared = f.shared;
    if (synth_cmd.count("--a-only")) s.synth.planted_a_only = f.a_only;
    if (synth_cmd.count("--b-only")) s.synth.planted_b_only = f.b_only;
    if (f.seed) s.synth.noise_seed = *f.seed;

    if (!f.out.empty()) s.io.out = f.out;
    apply(f.data_a, s.io.data_a);
    apply(f.data_b, s.io.data_b);
    apply(f.label_column, s.io.label_column);
    apply(f.across, s.io.across);
    apply(f.single_a, s.io.single_a);
    apply(f.single_b, s.io.single_b);
    apply(f.truth, s.io.truth);
    return s;
}

void echo_settings(const Settings& s, const fs::path& dir, const std::string& command)
{
    nlohmann::json j{{"command", command},
                     {"train", to_json(s.train)},
                     {"sweep", to_json(s.sweep)},
                     {"synth", to_json(s.synth)},
                     {"io", to_json(s.io)}};
    j["sweep"].erase("train");
    write_text(dir / ("effective_config_" + command + ".json"), j.dump(2) + "\n");
}

std::string stem_or(const std::string& path, const std::string& fallback)
{
    const auto stem = fs::path(path).stem().string();
    return stem.empty() ? fallback : stem;
}

/// Loads, aligns and standardises the inputs the mode needs. For a single-domain
/// mode given only its own file, that file fills both slots.
PairedDomainData prepare_data(const IoPaths& io, SweepMode mode)
{
    const bool has_a = !io.data_a.empty(), has_b = !io.data_b.empty();
    if (has_a && has_b) {
        const auto a = load_dataset(io.data_a, stem_or(io.data_a, "a"), io.label_column);
        const auto b = load_dataset(io.data_b, stem_or(io.data_b, "b"), io.label_column);
        return zscore_per_domain(align_domains(a, b));
    }
    if (mode == SweepMode::across) throw Error("mode 'across' needs both --data-a and --data-b");
    const std::string& path = mode == SweepMode::single_a ? io.data_a : io.data_b;
    if (path.empty())
        throw Error("mode '" + to_string(mode) + "' needs --" +
                    (mode == SweepMode::single_a ? "data-a" : "data-b"));
    PairedDomainData p;
    p.domain_a = zscore(load_dataset(path, stem_or(path, "x"), io.label_column));
    p.domain_b = p.domain_a;
    p.shared_features = p.domain_a.features;
    return p;
}

std::string absolute_or_empty(const std::string& p)
{
    return p.empty() ? p : fs::absolute(p).lexically_normal().string();
}

int cmd_synth(const Settings& s, std::ostream& out)
{
    SyntheticSpec spec = s.synth;
    if (spec.planted_shared.empty() && spec.planted_a_only.empty() && spec.planted_b_only.empty())
        for (std::size_t j = 0; j < std::min<std::size_t>(10, spec.d); ++j) spec.planted_shared.push_back(j);
    spec.validate();
    require(!s.io.out.empty(), "synth needs --out");

    const fs::path dir = s.io.out;
    fs::create_directories(dir);
    const auto data = generate_synthetic(spec);
    write_dataset(data.domain_a, dir / "domain_a.csv", s.io.label_column);
    write_dataset(data.domain_b, dir / "domain_b.csv", s.io.label_column);
    write_ground_truth(spec, dir / "truth.json");
    Settings echoed = s;
    echoed.synth = spec;
    echo_settings(echoed, dir, "synth");
    out << "wrote " << (dir / "domain_a.csv").string() << ", " << (dir / "domain_b.csv").string()
        << " and " << (dir / "truth.json").string() << " (" << spec.planted_shared.size() << " shared, "
        << spec.planted_a_only.size() << " a-only, " << spec.planted_b_only.size() << " b-only planted)\n";
    return 0;
}

int cmd_sweep(const Settings& s, bool resume, std::ostream& out, std::ostream& err)
{
    require(!s.io.out.empty(), "sweep needs --out");
    SweepStore store(s.io.out);
    fs::create_directories(store.root());

    SweepResult result;
    if (resume && store.has_config()) {
        const auto config = store.read_config();
        const auto prov = nlohmann::json::parse(store.read_provenance());
        IoPaths io = s.io;
        if (io.data_a.empty()) io.data_a = prov.value("data_a", "");
        if (io.data_b.empty()) io.data_b = prov.value("data_b", "");
        if (prov.contains("label_column") && s.io.label_column == "label")
            io.label_column = prov.at("label_column").get<std::string>();
        out << "resuming '" << store.sweep_id() << "' with its recorded configuration\n";
        result = resume_sweep(store, prepare_data(io, config.mode));
        Settings echoed = s;
        echoed.sweep = config;
        echoed.train = config.train;
        echoed.io = io;
        echo_settings(echoed, store.root(), "sweep");
    } else {
        if (resume) out << "no sweep under '" << store.root().string() << "'; starting a new one\n";
        s.sweep.validate();
        const auto data = prepare_data(s.io, s.sweep.mode);
        const nlohmann::json prov{{"data_a", absolute_or_empty(s.io.data_a)},
                                  {"data_b", absolute_or_empty(s.io.data_b)},
                                  {"label_column", s.io.label_column},
                                  {"standardised", true}};
        store.write_config(s.sweep, data.shared_features, prov.dump());
        echo_settings(s, store.root(), "sweep");
        if (s.sweep.mode == SweepMode::across)
            result = run_sweep(data, s.sweep, &store);
        else
            result = run_single_domain(s.sweep.mode == SweepMode::single_a ? data.domain_a : data.domain_b,
                                       s.sweep, &store);
    }
    out << "sweep '" << store.sweep_id() << "': " << result.executed << " runs trained, "
        << result.runs.size() << " complete, " << result.failures.size() << " failed\n";
    for (const auto& f : result.failures) err << "run " << f.cell.id() << " failed: " << f.message << '\n';
    return 0;
}

struct LoadedSweep {
    SweepStore store;
    SweepResult result;
    FeatureReport report;
};

LoadedSweep load_for_report(const std::string& dir, std::ostream& out)
{
    LoadedSweep s{SweepStore(dir), {}, {}};
    s.result = load_sweep(s.store);
    const auto selection = per_run_selection(s.result);
    if (selection.all_zero) out << "warning: every mask in '" << dir << "' is exactly zero\n";
    s.report = frequency_rank(selection, s.result.features);
    return s;
}

void write_loss_outputs(const LoadedSweep& s, const fs::path& dir, const std::string& tag)
{
    const auto& [key, rec] = *s.result.runs.begin();
    const auto& w = rec.config.loss;
    std::ofstream table(dir / ("loss_" + tag + ".csv"));
    if (!table) throw Error("cannot write loss table under '" + dir.string() + "'");
    table << "run,epoch,reconstruction,classification,sparsity,total\n" << std::setprecision(10);
    for (std::size_t e = 0; e < rec.loss_history.size(); ++e) {
        const auto& l = rec.loss_history[e];
        table << key.id() << ',' << e + 1 << ',' << w.alpha * (l.rec[0] + l.rec[1]) << ','
              << w.gamma * (l.cls[0] + l.cls[1]) << ',' << w.theta * l.sparse << ',' << l.total << '\n';
    }
    table.close();
    write_text(dir / ("loss_" + tag + ".svg"), render_line_panels(loss_panels(rec.loss_history, w), 2));
}

void write_sweep_outputs(const LoadedSweep& s, const fs::path& dir, const std::string& tag)
{
    write_feature_report(s.report, dir / ("features_" + tag + ".csv"), dir / ("summary_" + tag + ".json"));
    write_text(dir / ("frequency_" + tag + ".svg"),
               render_line_panels({frequency_panel(s.report, "selection frequency by rank (" + tag + ")")}, 1));
    write_loss_outputs(s, dir, tag);
}

int cmd_report(const Settings& s, std::ostream& out)
{
    require(!s.io.across.empty(), "report needs --across");
    const fs::path dir = s.io.out.empty() ? fs::path(s.io.across) / "report" : fs::path(s.io.out);
    fs::create_directories(dir);
    echo_settings(s, dir, "report");

    auto across = load_for_report(s.io.across, out);
    require(across.result.config.mode == SweepMode::across,
            "'" + s.io.across + "' is not an across-domain sweep");
    write_sweep_outputs(across, dir, "across");
    out << "across: " << across.result.runs.size() << " runs, " << across.report.selected.size()
        << " features selected (weight threshold " << across.report.weight_threshold
        << ", frequency threshold " << across.report.frequency_threshold << ")\n";

    nlohmann::json summary{{"across", s.io.across}, {"n_selected", across.report.selected.size()}};

    if (!s.io.single_a.empty() && !s.io.single_b.empty()) {
        auto a = load_for_report(s.io.single_a, out);
        auto b = load_for_report(s.io.single_b, out);
        write_sweep_outputs(a, dir, "single_a");
        write_sweep_outputs(b, dir, "single_b");
        const auto groups = overlap_groups(across.report, a.report, b.report);
        write_overlap_report(groups.across, across.report, dir / "overlap_across.csv");
        write_overlap_report(groups.single_a, a.report, dir / "overlap_single_a.csv");
        write_overlap_report(groups.single_b, b.report, dir / "overlap_single_b.csv");
        nlohmann::json g;
        for (const auto& [name, ids] : groups.across.groups) g[name] = ids.size();
        summary["overlap_across"] = g;
        out << "overlap (across):";
        for (const auto& [name, ids] : groups.across.groups) out << ' ' << name << '=' << ids.size();
        out << '\n';
    } else {
        out << "notice: overlap report skipped; it needs both --single-a and --single-b\n";
        summary["overlap_across"] = nullptr;
    }

    // Latent projection through the first run that kept a checkpoint.
    const auto prov = nlohmann::json::parse(across.store.read_provenance());
    IoPaths io = s.io;
    if (io.data_a.empty()) io.data_a = prov.value("data_a", "");
    if (io.data_b.empty()) io.data_b = prov.value("data_b", "");
    if (prov.contains("label_column") && s.io.label_column == "label")
        io.label_column = prov.at("label_column").get<std::string>();
    const auto data = prepare_data(io, SweepMode::across);
    require(data.shared_features == across.result.features,
            "data features do not match the features recorded in the sweep");
    std::optional<CellKey> with_ckpt;
    for (const auto& [key, rec] : across.result.runs)
        if (fs::exists(across.store.cell_dir(key) / "checkpoint.bin")) {
            with_ckpt = key;
            break;
        }
    if (!with_ckpt) throw Error("no run in '" + s.io.across + "' has a checkpoint for the latent projection");
    const auto pca = latent_pca(read_checkpoint(across.store.cell_dir(*with_ckpt) / "checkpoint.bin"), data);
    write_pca_table(pca, dir / "pca_across.csv");
    write_text(dir / "pca_across.svg", render_pca_scatter(pca, "latent mu, run " + with_ckpt->id()));
    summary["pca_run"] = with_ckpt->id();
    summary["pca_degenerate"] = pca.degenerate;

    std::string truth = s.io.truth;
    if (truth.empty() && !io.data_a.empty()) {
        const auto candidate = fs::path(io.data_a).parent_path() / "truth.json";
        if (fs::exists(candidate)) truth = candidate.string();
    }
    if (!truth.empty()) {
        const auto spec = read_ground_truth(truth);
        std::vector<std::string> planted;
        for (auto j : spec.planted_shared) planted.push_back(synthetic_feature_name(j, spec.d));
        const auto rs = recovery(across.report.selected, planted);
        summary["truth"] = truth;
        summary["recall"] = rs.recall;
        summary["precision"] = rs.precision;
        out << "recall " << rs.recall << ", precision " << rs.precision << " against " << planted.size()
            << " planted shared features\n";
    }
    write_text(dir / "report.json", summary.dump(2) + "\n");
    out << "report written to " << dir.string() << '\n';
    return 0;
}

void add_train_flags(CLI::App& cmd, Flags& f)
{
    cmd.add_option("--epochs", f.epochs, "paired-batch iterations per run");
    cmd.add_option("--batch-size", f.batch_size);
    cmd.add_option("--lr", f.lr, "AdamW learning rate");
    cmd.add_option("--weight-decay", f.weight_decay);
    cmd.add_option("--alpha", f.alpha, "reconstruction weight");
    cmd.add_option("--beta", f.beta, "KL weight");
    cmd.add_option("--gamma", f.gamma, "classification weight");
    cmd.add_option("--theta", f.theta, "sparsity weight");
    cmd.add_option("--hidden", f.hidden);
    cmd.add_option("--latent", f.latent);
    cmd.add_option("--classifier-depth", f.classifier_depth);
    cmd.add_option("--precision", f.precision)->check(CLI::IsMember({"float32", "float64"}));
    cmd.add_flag("--desk-scale", f.desk_scale, "start from the narrow single-CPU training preset");
}

} // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Multi-domain multi-task feature selection", "mdmt"};
    app.require_subcommand(1);
    app.fallthrough();
    Flags f;
    app.add_option("--config", f.config, "JSON settings file")->check(CLI::ExistingFile);
    app.add_option("--out", f.out, "output file or directory");
    app.add_option("--seed", f.seed, "noise seed for synth, base seed for sweep");
    app.add_option("--workers", f.workers, "parallel training runs");
    app.add_option("--mode", f.mode, "across, single-a or single-b")
        ->check(CLI::IsMember({"across", "single-a", "single-b"}));
    app.add_option("--label-column", f.label_column);

    auto* synth = app.add_subcommand("synth", "write a planted-truth synthetic domain pair");
    synth->add_option("--d", f.d, "feature count");
    synth->add_option("--n-a", f.n_a);
    synth->add_option("--n-b", f.n_b);
    synth->add_option("--shared", f.shared, "planted shared feature indices")->delimiter(',');
    synth->add_option("--a-only", f.a_only)->delimiter(',');
    synth->add_option("--b-only", f.b_only)->delimiter(',');
    synth->add_option("--effect-shared", f.effect_shared, "class shift in noise standard deviations");
    synth->add_option("--effect-single", f.effect_single);

    auto* sweep = app.add_subcommand("sweep", "train subsampling x initialisation runs");
    sweep->add_option("--data-a", f.data_a);
    sweep->add_option("--data-b", f.data_b);
    sweep->add_option("--n-subsamples", f.n_subsamples);
    sweep->add_option("--n-inits", f.n_inits);
    sweep->add_option("--fraction", f.fraction, "retained fraction per class");
    sweep->add_flag("--resume", f.resume, "train only missing or corrupt runs");
    add_train_flags(*sweep, f);

    auto* report = app.add_subcommand("report", "feature, overlap, loss and latent reports");
    report->add_option("--across", f.across, "across-domain sweep directory");
    report->add_option("--single-a", f.single_a);
    report->add_option("--single-b", f.single_b);
    report->add_option("--truth", f.truth, "ground-truth sidecar of a synthetic pair");
    report->add_option("--data-a", f.data_a);
    report->add_option("--data-b", f.data_b);

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err);
    }

    try {
        const auto settings = resolve(f, *synth);
        if (synth->parsed()) return cmd_synth(settings, out);
        if (sweep->parsed()) return cmd_sweep(settings, f.resume, out, err);
        return cmd_report(settings, out);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
}

int run_cli(int argc, char** argv)
{
    std::vector<std::string> args(argv + 1, argv + argc);
    return run_cli(args, std::cout, std::cerr);
}

} // namespace mdmt
