#include "mdmt/config_io.hpp"

namespace mdmt {

void reject_unknown_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed,
                         const std::string& where)
{
    require(j.is_object(), where + " must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        bool known = false;
        for (const char* a : allowed) known = known || key == a;
        if (!known) throw Error("unknown key '" + key + "' in " + where);
    }
}

namespace {

template <typename V>
void read(const nlohmann::json& j, const char* key, V& out, const std::string& where)
{
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<V>();
    } catch (const nlohmann::json::exception&) {
        throw Error("invalid value for '" + std::string(key) + "' in " + where);
    }
}

} // namespace

nlohmann::json to_json(const TrainConfig& c)
{
    return {
        {"epochs", c.epochs},
        {"batch_size", c.batch_size},
        {"learning_rate", c.optimizer.learning_rate},
        {"adam_beta1", c.optimizer.beta1},
        {"adam_beta2", c.optimizer.beta2},
        {"adam_epsilon", c.optimizer.epsilon},
        {"weight_decay", c.optimizer.weight_decay},
        {"alpha", c.loss.alpha},
        {"beta", c.loss.beta},
        {"gamma", c.loss.gamma},
        {"theta", c.loss.theta},
        {"hidden", c.hidden},
        {"latent", c.latent},
        {"classifier_depth", c.classifier_depth},
        {"precision", to_string(c.precision)},
        {"seed", c.seed},
        {"keep_checkpoint", c.keep_checkpoint},
        {"record_embeddings", c.record_embeddings},
    };
}

TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig c)
{
    const std::string where = "train config";
    reject_unknown_keys(j,
                        {"epochs", "batch_size", "learning_rate", "adam_beta1", "adam_beta2",
                         "adam_epsilon", "weight_decay", "alpha", "beta", "gamma", "theta",
                         "hidden", "latent", "classifier_depth", "precision", "seed",
                         "keep_checkpoint", "record_embeddings"},
                        where);
    read(j, "epochs", c.epochs, where);
    read(j, "batch_size", c.batch_size, where);
    read(j, "learning_rate", c.optimizer.learning_rate, where);
    read(j, "adam_beta1", c.optimizer.beta1, where);
    read(j, "adam_beta2", c.optimizer.beta2, where);
    read(j, "adam_epsilon", c.optimizer.epsilon, where);
    read(j, "weight_decay", c.optimizer.weight_decay, where);
    read(j, "alpha", c.loss.alpha, where);
    read(j, "beta", c.loss.beta, where);
    read(j, "gamma", c.loss.gamma, where);
    read(j, "theta", c.loss.theta, where);
    read(j, "hidden", c.hidden, where);
    read(j, "latent", c.latent, where);
    read(j, "classifier_depth", c.classifier_depth, where);
    if (j.contains("precision")) {
        std::string p;
        read(j, "precision", p, where);
        c.precision = precision_from_string(p);
    }
    read(j, "seed", c.seed, where);
    read(j, "keep_checkpoint", c.keep_checkpoint, where);
    read(j, "record_embeddings", c.record_embeddings, where);
    return c;
}

nlohmann::json to_json(const SweepConfig& c)
{
    return {
        {"n_subsamples", c.n_subsamples},
        {"n_inits", c.n_inits},
        {"subsample_fraction", c.subsample_fraction},
        {"base_seed", c.base_seed},
        {"mode", to_string(c.mode)},
        {"max_parallel_workers", c.max_parallel_workers},
        {"train", to_json(c.train)},
    };
}

SweepConfig sweep_config_from_json(const nlohmann::json& j, SweepConfig c)
{
    const std::string where = "sweep config";
    reject_unknown_keys(j,
                        {"n_subsamples", "n_inits", "subsample_fraction", "base_seed", "mode",
                         "max_parallel_workers", "train"},
                        where);
    read(j, "n_subsamples", c.n_subsamples, where);
    read(j, "n_inits", c.n_inits, where);
    read(j, "subsample_fraction", c.subsample_fraction, where);
    read(j, "base_seed", c.base_seed, where);
    if (j.contains("mode")) {
        std::string m;
        read(j, "mode", m, where);
        c.mode = sweep_mode_from_string(m);
    }
    read(j, "max_parallel_workers", c.max_parallel_workers, where);
    if (j.contains("train")) c.train = train_config_from_json(j.at("train"), c.train);
    return c;
}

nlohmann::json to_json(const SyntheticSpec& s)
{
    return {
        {"d", s.d},
        {"n_a", s.n_a},
        {"n_b", s.n_b},
        {"planted_shared", s.planted_shared},
        {"planted_a_only", s.planted_a_only},
        {"planted_b_only", s.planted_b_only},
        {"effect_size_shared", s.effect_size_shared},
        {"effect_size_single", s.effect_size_single},
        {"noise_seed", s.noise_seed},
    };
}

SyntheticSpec synthetic_spec_from_json(const nlohmann::json& j, SyntheticSpec s)
{
    const std::string where = "synthetic spec";
    reject_unknown_keys(j,
                        {"d", "n_a", "n_b", "planted_shared", "planted_a_only", "planted_b_only",
                         "effect_size_shared", "effect_size_single", "noise_seed"},
                        where);
    read(j, "d", s.d, where);
    read(j, "n_a", s.n_a, where);
    read(j, "n_b", s.n_b, where);
    read(j, "planted_shared", s.planted_shared, where);
    read(j, "planted_a_only", s.planted_a_only, where);
    read(j, "planted_b_only", s.planted_b_only, where);
    read(j, "effect_size_shared", s.effect_size_shared, where);
    read(j, "effect_size_single", s.effect_size_single, where);
    read(j, "noise_seed", s.noise_seed, where);
    return s;
}

} // namespace mdmt
