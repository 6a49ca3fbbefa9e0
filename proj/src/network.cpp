#include "mdmt/network.hpp"

#include <cmath>
#include <random>

namespace mdmt {

namespace {

template <typename T>
Matrix<T> affine_forward(const Affine<T>& layer, const Matrix<T>& x)
{
    require_shape(x.cols() == layer.weight.rows(),
                  "affine input has " + std::to_string(x.cols()) + " columns, expected " +
                      std::to_string(layer.weight.rows()));
    Matrix<T> y = x * layer.weight;
    y.rowwise() += layer.bias;
    return y;
}

template <typename T>
Matrix<T> affine_backward(const Affine<T>& layer, const Matrix<T>& input, const Matrix<T>& dy,
                          Affine<T>& grad)
{
    grad.weight.noalias() += input.transpose() * dy;
    grad.bias += dy.colwise().sum();
    return dy * layer.weight.transpose();
}

template <typename T>
Matrix<T> norm_forward(const Norm<T>& norm, const NormStats<T>& stats, const Matrix<T>& x, Mode mode,
                       double eps, NormCache<T>& cache)
{
    const T e = static_cast<T>(eps);
    cache.mode = mode;
    if (mode == Mode::training) {
        require(x.rows() >= 2, "batch normalisation in training mode needs at least 2 rows");
        cache.batch_mean = x.colwise().mean();
        Matrix<T> centered = x.rowwise() - cache.batch_mean;
        cache.batch_var = centered.array().square().colwise().mean().matrix();
        cache.inv_std = (cache.batch_var.array() + e).rsqrt().matrix();
        cache.xhat = (centered.array().rowwise() * cache.inv_std.array()).matrix();
    } else {
        cache.inv_std = (stats.var.array() + e).rsqrt().matrix();
        cache.xhat = ((x.rowwise() - stats.mean).array().rowwise() * cache.inv_std.array()).matrix();
    }
    Matrix<T> y = (cache.xhat.array().rowwise() * norm.gamma.array()).matrix();
    y.rowwise() += norm.beta;
    return y;
}

template <typename T>
Matrix<T> norm_backward(const Norm<T>& norm, const NormCache<T>& cache, const Matrix<T>& dy,
                        Norm<T>& grad)
{
    grad.gamma += (dy.array() * cache.xhat.array()).colwise().sum().matrix();
    grad.beta += dy.colwise().sum();
    const Matrix<T> dxhat = (dy.array().rowwise() * norm.gamma.array()).matrix();
    if (cache.mode == Mode::inference)
        return (dxhat.array().rowwise() * cache.inv_std.array()).matrix();

    const T b = static_cast<T>(dy.rows());
    const RowVector<T> sum_dxhat = dxhat.colwise().sum();
    const RowVector<T> sum_dxhat_xhat = (dxhat.array() * cache.xhat.array()).colwise().sum().matrix();
    Matrix<T> dx = (b * dxhat.array() - (cache.xhat.array().rowwise() * sum_dxhat_xhat.array()))
                       .matrix();
    dx.rowwise() -= sum_dxhat;
    return (dx.array().rowwise() * (cache.inv_std.array() / b)).matrix();
}

template <typename T>
Matrix<T> relu(const Matrix<T>& x)
{
    return x.cwiseMax(T(0));
}

template <typename T>
Matrix<T> relu_backward(const Matrix<T>& act, const Matrix<T>& dact)
{
    return (act.array() > T(0)).select(dact.array(), T(0)).matrix();
}

template <typename T>
Affine<T> init_affine(std::size_t in, std::size_t out, Rng& rng)
{
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    std::uniform_real_distribution<double> u(-bound, bound);
    Affine<T> a;
    a.weight.resize(static_cast<Eigen::Index>(in), static_cast<Eigen::Index>(out));
    a.bias.resize(static_cast<Eigen::Index>(out));
    for (Eigen::Index c = 0; c < a.weight.cols(); ++c)
        for (Eigen::Index r = 0; r < a.weight.rows(); ++r) a.weight(r, c) = static_cast<T>(u(rng));
    for (Eigen::Index c = 0; c < a.bias.size(); ++c) a.bias(c) = static_cast<T>(u(rng));
    return a;
}

template <typename T>
Norm<T> init_norm(std::size_t width)
{
    const auto w = static_cast<Eigen::Index>(width);
    return {RowVector<T>::Ones(w), RowVector<T>::Zero(w)};
}

template <typename T>
NormStats<T> init_stats(std::size_t width)
{
    const auto w = static_cast<Eigen::Index>(width);
    return {RowVector<T>::Zero(w), RowVector<T>::Ones(w)};
}

template <typename T>
void fold_stats(NormStats<T>& stats, const NormCache<T>& cache, double momentum)
{
    if (cache.mode != Mode::training || cache.xhat.rows() < 2) return;
    const T m = static_cast<T>(momentum);
    const T b = static_cast<T>(cache.xhat.rows());
    stats.mean = (T(1) - m) * stats.mean + m * cache.batch_mean;
    stats.var = (T(1) - m) * stats.var + m * cache.batch_var * (b / (b - T(1)));
}

} // namespace

template <typename T>
Matrix<T> apply_mask(const SparseMask<T>& mask, const Matrix<T>& x)
{
    require_shape(x.cols() == mask.d(), "mask has " + std::to_string(mask.d()) +
                                            " weights but input has " + std::to_string(x.cols()) +
                                            " columns");
    return (x.array().rowwise() * mask.w.array()).matrix();
}

template <typename T>
Encoded<T> encode(const EncoderParams<T>& enc, const TwoLayerStats<T>& stats, const Matrix<T>& xm,
                  Mode mode, double bn_eps, EncoderCache<T>* cache)
{
    EncoderCache<T> local;
    EncoderCache<T>& c = cache ? *cache : local;
    require(mode == Mode::inference || xm.rows() >= 2,
            "encoder in training mode needs a batch of at least 2 rows");
    c.input = xm;
    c.act1 = relu(norm_forward(enc.norm1, stats.norm1, affine_forward(enc.hidden1, xm), mode,
                               bn_eps, c.norm1));
    c.act2 = relu(norm_forward(enc.norm2, stats.norm2, affine_forward(enc.hidden2, c.act1), mode,
                               bn_eps, c.norm2));
    return {affine_forward(enc.mu_head, c.act2), affine_forward(enc.logvar_head, c.act2)};
}

template <typename T>
Matrix<T> reparameterize(const Matrix<T>& mu, const Matrix<T>& logvar, const Matrix<T>& eps)
{
    require_shape(mu.rows() == logvar.rows() && mu.cols() == logvar.cols() &&
                      mu.rows() == eps.rows() && mu.cols() == eps.cols(),
                  "reparameterize: mu, logvar and eps shapes differ");
    return (mu.array() + eps.array() * (logvar.array() * T(0.5)).exp()).matrix();
}

template <typename T>
Matrix<T> decode(const DecoderParams<T>& dec, const TwoLayerStats<T>& stats, const Matrix<T>& z,
                 const SparseMask<T>& frozen_mask, Mode mode, double bn_eps, DecoderCache<T>* cache)
{
    DecoderCache<T> local;
    DecoderCache<T>& c = cache ? *cache : local;
    require_shape(frozen_mask.d() == dec.output.weight.cols(),
                  "frozen mask width does not match decoder output");
    c.input = z;
    c.act1 = relu(norm_forward(dec.norm1, stats.norm1, affine_forward(dec.hidden1, z), mode,
                               bn_eps, c.norm1));
    c.act2 = relu(norm_forward(dec.norm2, stats.norm2, affine_forward(dec.hidden2, c.act1), mode,
                               bn_eps, c.norm2));
    c.raw_output = affine_forward(dec.output, c.act2);
    return apply_mask(frozen_mask, c.raw_output);
}

template <typename T>
Vector<T> classify(const ClassifierParams<T>& cls, const Matrix<T>& z, ClassifierCache<T>* cache)
{
    ClassifierCache<T> local;
    ClassifierCache<T>& c = cache ? *cache : local;
    const Eigen::Index in = cls.hidden.empty() ? cls.to_two.weight.rows() : cls.hidden[0].weight.rows();
    require_shape(z.cols() == in, "classifier expects " + std::to_string(in) +
                                      " latent columns, got " + std::to_string(z.cols()));
    c.inputs.clear();
    Matrix<T> h = z;
    for (const auto& layer : cls.hidden) {
        c.inputs.push_back(h);
        h = relu(affine_forward(layer, h));
    }
    c.inputs.push_back(h);
    h = affine_forward(cls.to_two, h);
    c.inputs.push_back(h);
    const Matrix<T> logit = affine_forward(cls.to_one, h);
    c.prob = (T(1) / (T(1) + (-logit.col(0).array()).exp())).matrix();
    return c.prob;
}

template <typename T>
ModelState<T> init_model(const ModelConfig& config, std::uint64_t seed)
{
    require(config.d >= 1, "model dimension d must be at least 1");
    require(config.domains == 1 || config.domains == 2, "model supports one or two domains");
    require(config.hidden >= 1 && config.latent >= 1, "hidden and latent widths must be positive");

    Rng rng(seed);
    ModelState<T> m;
    m.config = config;
    m.seed = seed;
    m.params.mask.w = RowVector<T>::Ones(static_cast<Eigen::Index>(config.d));
    const auto d = config.d, h = config.hidden, l = config.latent;
    for (std::size_t k = 0; k < config.domains; ++k) {
        VaeParams<T> vae;
        vae.encoder.hidden1 = init_affine<T>(d, h, rng);
        vae.encoder.norm1 = init_norm<T>(h);
        vae.encoder.hidden2 = init_affine<T>(h, h, rng);
        vae.encoder.norm2 = init_norm<T>(h);
        vae.encoder.mu_head = init_affine<T>(h, l, rng);
        vae.encoder.logvar_head = init_affine<T>(h, l, rng);
        vae.decoder.hidden1 = init_affine<T>(l, h, rng);
        vae.decoder.norm1 = init_norm<T>(h);
        vae.decoder.hidden2 = init_affine<T>(h, h, rng);
        vae.decoder.norm2 = init_norm<T>(h);
        vae.decoder.output = init_affine<T>(h, d, rng);
        m.params.vaes.push_back(std::move(vae));
        m.stats.push_back({{init_stats<T>(h), init_stats<T>(h)}, {init_stats<T>(h), init_stats<T>(h)}});
    }
    std::size_t in = l;
    for (std::size_t k = 0; k < config.classifier_depth; ++k) {
        m.params.classifier.hidden.push_back(init_affine<T>(in, h, rng));
        in = h;
    }
    m.params.classifier.to_two = init_affine<T>(in, 2, rng);
    m.params.classifier.to_one = init_affine<T>(2, 1, rng);
    return m;
}

template <typename T>
Matrix<T> encode_backward(const EncoderParams<T>& enc, const EncoderCache<T>& c,
                          const Matrix<T>& d_mu, const Matrix<T>& d_logvar, EncoderParams<T>& grad)
{
    Matrix<T> d_act2 = affine_backward(enc.mu_head, c.act2, d_mu, grad.mu_head);
    d_act2 += affine_backward(enc.logvar_head, c.act2, d_logvar, grad.logvar_head);
    Matrix<T> d = norm_backward(enc.norm2, c.norm2, relu_backward(c.act2, d_act2), grad.norm2);
    d = affine_backward(enc.hidden2, c.act1, d, grad.hidden2);
    d = norm_backward(enc.norm1, c.norm1, relu_backward(c.act1, d), grad.norm1);
    return affine_backward(enc.hidden1, c.input, d, grad.hidden1);
}

template <typename T>
Matrix<T> decode_backward(const DecoderParams<T>& dec, const DecoderCache<T>& c,
                          const SparseMask<T>& frozen_mask, const Matrix<T>& d_out,
                          DecoderParams<T>& grad)
{
    Matrix<T> d = apply_mask(frozen_mask, d_out);
    d = affine_backward(dec.output, c.act2, d, grad.output);
    d = norm_backward(dec.norm2, c.norm2, relu_backward(c.act2, d), grad.norm2);
    d = affine_backward(dec.hidden2, c.act1, d, grad.hidden2);
    d = norm_backward(dec.norm1, c.norm1, relu_backward(c.act1, d), grad.norm1);
    return affine_backward(dec.hidden1, c.input, d, grad.hidden1);
}

template <typename T>
Matrix<T> classify_backward(const ClassifierParams<T>& cls, const ClassifierCache<T>& c,
                            const Vector<T>& d_prob, ClassifierParams<T>& grad)
{
    const std::size_t depth = cls.hidden.size();
    Matrix<T> d = (d_prob.array() * c.prob.array() * (T(1) - c.prob.array())).matrix();
    d = affine_backward(cls.to_one, c.inputs[depth + 1], d, grad.to_one);
    d = affine_backward(cls.to_two, c.inputs[depth], d, grad.to_two);
    for (std::size_t k = depth; k-- > 0;) {
        d = relu_backward(c.inputs[k + 1], d);
        d = affine_backward(cls.hidden[k], c.inputs[k], d, grad.hidden[k]);
    }
    return d;
}

template <typename T>
void update_running_stats(TwoLayerStats<T>& stats, const NormCache<T>& norm1,
                          const NormCache<T>& norm2, double momentum)
{
    fold_stats(stats.norm1, norm1, momentum);
    fold_stats(stats.norm2, norm2, momentum);
}

template <typename T, typename U>
ModelState<U> cast_model(const ModelState<T>& model)
{
    ModelState<U> out;
    out.config = model.config;
    out.seed = model.seed;
    out.mode = model.mode;
    out.params.vaes.resize(model.params.vaes.size());
    out.stats.resize(model.stats.size());
    out.params.classifier.hidden.resize(model.params.classifier.hidden.size());
    ModelParams<U>::zip([](const std::string&, auto& dst, const auto& src) {
        dst = src.template cast<U>();
    }, "", out.params, model.params);
    for (std::size_t k = 0; k < model.stats.size(); ++k)
        VaeStats<U>::zip([](const std::string&, auto& dst, const auto& src) {
            dst = src.template cast<U>();
        }, "", out.stats[k], model.stats[k]);
    return out;
}

#define MDMT_INSTANTIATE_NETWORK(T)                                                              \
    template Matrix<T> apply_mask(const SparseMask<T>&, const Matrix<T>&);                       \
    template Encoded<T> encode(const EncoderParams<T>&, const TwoLayerStats<T>&,                 \
                               const Matrix<T>&, Mode, double, EncoderCache<T>*);                \
    template Matrix<T> reparameterize(const Matrix<T>&, const Matrix<T>&, const Matrix<T>&);     \
    template Matrix<T> decode(const DecoderParams<T>&, const TwoLayerStats<T>&,                  \
                              const Matrix<T>&, const SparseMask<T>&, Mode, double,              \
                              DecoderCache<T>*);                                                 \
    template Vector<T> classify(const ClassifierParams<T>&, const Matrix<T>&,                    \
                                ClassifierCache<T>*);                                            \
    template ModelState<T> init_model(const ModelConfig&, std::uint64_t);                        \
    template Matrix<T> encode_backward(const EncoderParams<T>&, const EncoderCache<T>&,          \
                                       const Matrix<T>&, const Matrix<T>&, EncoderParams<T>&);   \
    template Matrix<T> decode_backward(const DecoderParams<T>&, const DecoderCache<T>&,          \
                                       const SparseMask<T>&, const Matrix<T>&,                   \
                                       DecoderParams<T>&);                                       \
    template Matrix<T> classify_backward(const ClassifierParams<T>&, const ClassifierCache<T>&,  \
                                         const Vector<T>&, ClassifierParams<T>&);                \
    template void update_running_stats(TwoLayerStats<T>&, const NormCache<T>&,                   \
                                       const NormCache<T>&, double);

MDMT_INSTANTIATE_NETWORK(float)
MDMT_INSTANTIATE_NETWORK(double)

template ModelState<double> cast_model<float, double>(const ModelState<float>&);
template ModelState<float> cast_model<double, float>(const ModelState<double>&);
template ModelState<double> cast_model<double, double>(const ModelState<double>&);

} // namespace mdmt
