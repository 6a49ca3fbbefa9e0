#include "mdmt/trainer.hpp"

#include "mdmt/seed.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace mdmt {

std::string to_string(Precision p)
{
    return p == Precision::float32 ? "float32" : "float64";
}

Precision precision_from_string(const std::string& s)
{
    if (s == "float32" || s == "f32") return Precision::float32;
    if (s == "float64" || s == "f64") return Precision::float64;
    throw Error("unknown precision '" + s + "' (expected float32 or float64)");
}

void TrainConfig::validate() const
{
    require(epochs >= 1, "epochs must be at least 1");
    require(batch_size >= 2, "batch_size must be at least 2 for batch normalisation");
    require(hidden >= 1 && latent >= 1, "hidden and latent widths must be positive");
    require(optimizer.learning_rate > 0, "learning rate must be positive");
    loss.validate();
}

TrainConfig TrainConfig::desk_scale()
{
    TrainConfig c;
    c.epochs = 2000;
    c.hidden = 64;
    c.latent = 16;
    c.optimizer.learning_rate = 1e-3;
    return c;
}

namespace {

template <typename T>
Matrix<T> draw_noise(Eigen::Index rows, Eigen::Index cols, Rng& rng)
{
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix<T> eps(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c)
        for (Eigen::Index r = 0; r < rows; ++r) eps(r, c) = static_cast<T>(normal(rng));
    return eps;
}

template <typename T>
RunRecord train_impl(std::span<const ExpressionDataset* const> domains, const TrainConfig& config,
                     const EpochObserver& observer)
{
    RunRecord record;
    record.seed = config.seed;
    record.config = config;

    ModelConfig mc;
    mc.d = domains[0]->d();
    mc.hidden = config.hidden;
    mc.latent = config.latent;
    mc.classifier_depth = config.classifier_depth;
    mc.domains = domains.size();

    ModelState<T> model = init_model<T>(mc, config.seed);
    model.mode = Mode::training;
    Rng batch_rng(combine_seed(config.seed, 1));
    Rng noise_rng(combine_seed(config.seed, 2));

    AdamWSettings mask_settings = config.optimizer;
    mask_settings.weight_decay = 0.0;
    AdamW<SparseMask<T>> opt_mask(model.params.mask, mask_settings);
    std::vector<AdamW<VaeParams<T>>> opt_vae;
    for (const auto& vae : model.params.vaes) opt_vae.emplace_back(vae, config.optimizer);
    AdamW<ClassifierParams<T>> opt_cls(model.params.classifier, config.optimizer);

    const auto start = std::chrono::steady_clock::now();
    record.loss_history.reserve(config.epochs);
    record.wall_seconds.reserve(config.epochs);
    const auto b = static_cast<Eigen::Index>(config.batch_size);
    const auto latent = static_cast<Eigen::Index>(config.latent);

    std::vector<DomainBatch> batches(domains.size());
    std::vector<Matrix<T>> eps(domains.size());
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        for (std::size_t k = 0; k < domains.size(); ++k)
            batches[k] = sample_batch(*domains[k], config.batch_size, batch_rng);
        for (std::size_t k = 0; k < domains.size(); ++k) eps[k] = draw_noise<T>(b, latent, noise_rng);

        const SparseMask<T> frozen = model.params.mask;
        CompositeContext<T> ctx;
        std::string bad;
        try {
            ctx = composite_loss<T>(batches, model, frozen, config.loss, eps);
        } catch (const NonFiniteError& e) {
            bad = e.what();
        }
        if (bad.empty() && !std::isfinite(ctx.loss.total)) {
            std::ostringstream msg;
            msg << "rec " << ctx.loss.rec[0] << "/" << ctx.loss.rec[1] << ", var " << ctx.loss.var[0] << "/"
                << ctx.loss.var[1] << ", class " << ctx.loss.cls[0] << "/" << ctx.loss.cls[1] << ", sparse "
                << ctx.loss.sparse;
            bad = msg.str();
        }
        if (!bad.empty()) {
            record.failed = true;
            record.failure = "non-finite loss at epoch " + std::to_string(epoch) + " (" + bad + ")";
            break;
        }

        const auto grad = gradients(ctx, model);
        opt_mask.step(model.params.mask, grad.mask);
        for (std::size_t k = 0; k < domains.size(); ++k)
            opt_vae[k].step(model.params.vaes[k], grad.vaes[k]);
        opt_cls.step(model.params.classifier, grad.classifier);

        const double momentum = model.config.bn_momentum;
        for (std::size_t k = 0; k < domains.size(); ++k) {
            const auto& pass = ctx.domains[k];
            update_running_stats(model.stats[k].encoder, pass.encoder.norm1, pass.encoder.norm2, momentum);
            update_running_stats(model.stats[k].decoder, pass.decoder.norm1, pass.decoder.norm2, momentum);
        }

        record.loss_history.push_back(ctx.loss);
        record.wall_seconds.push_back(
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
        if (observer) observer(epoch, ctx.loss);
    }

    record.final_mask.resize(static_cast<std::size_t>(model.params.mask.d()));
    for (Eigen::Index j = 0; j < model.params.mask.d(); ++j)
        record.final_mask[static_cast<std::size_t>(j)] = static_cast<double>(model.params.mask.w(j));

    model.mode = Mode::inference;
    if (!record.failed) {
        if (config.keep_checkpoint) record.checkpoint = to_checkpoint(model);
        if (config.record_embeddings)
            for (std::size_t k = 0; k < domains.size(); ++k)
                record.embeddings.push_back(embed(model, k, *domains[k]));
    }
    return record;
}

} // namespace

RunRecord train_domains(std::span<const ExpressionDataset* const> domains, const TrainConfig& config,
                        const EpochObserver& observer)
{
    config.validate();
    require(domains.size() == 1 || domains.size() == 2, "training supports one or two domains");
    for (const auto* d : domains) {
        require(d != nullptr, "null dataset");
        require(d->d() == domains[0]->d(), "domains must be column-aligned");
    }
    return config.precision == Precision::float32 ? train_impl<float>(domains, config, observer)
                                                  : train_impl<double>(domains, config, observer);
}

RunRecord train_one(const PairedDomainData& data, const TrainConfig& config,
                    const EpochObserver& observer)
{
    const ExpressionDataset* domains[2] = {&data.domain_a, &data.domain_b};
    return train_domains(domains, config, observer);
}

RunRecord train_single(const ExpressionDataset& data, const TrainConfig& config,
                       const EpochObserver& observer)
{
    const ExpressionDataset* domains[1] = {&data};
    return train_domains(domains, config, observer);
}

template <typename T>
Eigen::MatrixXd embed(const ModelState<T>& model, std::size_t slot, const ExpressionDataset& data)
{
    require(slot < model.params.vaes.size(), "no VAE in slot " + std::to_string(slot));
    const Matrix<T> x = data.samples.template cast<T>();
    const auto code = encode(model.params.vaes[slot].encoder, model.stats[slot].encoder,
                             apply_mask(model.params.mask, x), Mode::inference, model.config.bn_eps);
    return code.mu.template cast<double>();
}

template <typename T>
double evaluate_domain(const ModelState<T>& model, std::size_t slot, const ExpressionDataset& data)
{
    const Matrix<T> mu = embed(model, slot, data).template cast<T>();
    const Vector<T> p = classify(model.params.classifier, mu);
    std::size_t correct = 0;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        const int predicted = p(i) >= T(0.5) ? 1 : 0;
        if (predicted == data.labels[static_cast<std::size_t>(i)]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(p.size());
}

template <typename T>
std::pair<double, double> evaluate(const ModelState<T>& model, const PairedDomainData& data)
{
    require(model.params.vaes.size() == 2, "evaluate needs a two-domain model");
    return {evaluate_domain(model, 0, data.domain_a), evaluate_domain(model, 1, data.domain_b)};
}

void write_training_log(const RunRecord& record, const std::filesystem::path& path)
{
    std::ofstream out(path);
    if (!out) throw Error("cannot write training log '" + path.string() + "'");
    out << "epoch,rec_a,rec_b,var_a,var_b,class_a,class_b,sparse,total,seconds\n";
    out << std::setprecision(17);
    for (std::size_t e = 0; e < record.loss_history.size(); ++e) {
        const auto& l = record.loss_history[e];
        out << e << ',' << l.rec[0] << ',' << l.rec[1] << ',' << l.var[0] << ',' << l.var[1] << ','
            << l.cls[0] << ',' << l.cls[1] << ',' << l.sparse << ',' << l.total << ','
            << (e < record.wall_seconds.size() ? record.wall_seconds[e] : 0.0) << '\n';
    }
}

std::vector<LossBreakdown> read_training_log(const std::filesystem::path& path,
                                             std::vector<double>* wall_seconds)
{
    std::ifstream in(path);
    if (!in) throw Error("cannot open training log '" + path.string() + "'");
    std::string line;
    std::getline(in, line);
    require(line.rfind("epoch,", 0) == 0, "'" + path.string() + "' is not a training log");
    std::vector<LossBreakdown> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream cells(line);
        std::string cell;
        std::vector<double> v;
        while (std::getline(cells, cell, ',')) {
            try {
                v.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw Error("malformed training log '" + path.string() + "'");
            }
        }
        require(v.size() == 10, "malformed training log row in '" + path.string() + "'");
        LossBreakdown l;
        l.rec = {v[1], v[2]};
        l.var = {v[3], v[4]};
        l.cls = {v[5], v[6]};
        l.sparse = v[7];
        l.total = v[8];
        rows.push_back(l);
        if (wall_seconds) wall_seconds->push_back(v[9]);
    }
    return rows;
}

template Eigen::MatrixXd embed(const ModelState<float>&, std::size_t, const ExpressionDataset&);
template Eigen::MatrixXd embed(const ModelState<double>&, std::size_t, const ExpressionDataset&);
template double evaluate_domain(const ModelState<float>&, std::size_t, const ExpressionDataset&);
template double evaluate_domain(const ModelState<double>&, std::size_t, const ExpressionDataset&);
template std::pair<double, double> evaluate(const ModelState<float>&, const PairedDomainData&);
template std::pair<double, double> evaluate(const ModelState<double>&, const PairedDomainData&);

} // namespace mdmt
