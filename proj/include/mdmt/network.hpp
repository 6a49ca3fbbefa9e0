#pragma once

// Shared sparse mask, per-domain variational autoencoders and the shared
// latent-space classifier, with explicit forward caches and backward passes.
//
// Every parameter struct exposes a static `zip(f, prefix, ps...)` that calls
// `f(name, ps.member...)` for each trainable array, so values, gradients and
// optimizer moments with the same layout can be walked in lock step.

#include "mdmt/types.hpp"

#include <string>
#include <vector>

namespace mdmt {

template <typename T>
struct SparseMask {
    RowVector<T> w;

    Eigen::Index d() const { return w.size(); }

    template <class F, class... Ps>
    static void zip(F&& f, const std::string& prefix, Ps&&... ps)
    {
        f(prefix + "w", ps.w...);
    }
};

/// y = x * weight + bias, with weight stored in x out.
template <typename T>
struct Affine {
    Matrix<T> weight;
    RowVector<T> bias;

    template <class F, class... Ps>
    static void zip(F&& f, const std::string& prefix, Ps&&... ps)
    {
        f(prefix + "weight", ps.weight...);
        f(prefix + "bias", ps.bias...);
    }
};

template <typename T>
struct Norm {
    RowVector<T> gamma;
    RowVector<T> beta;

    template <class F, class... Ps>
    static void zip(F&& f, const std::string& prefix, Ps&&... ps)
    {
        f(prefix + "gamma", ps.gamma...);
        f(prefix + "beta", ps.beta...);
    }
};

/// Batch-norm running statistics. Not trainable.
template <typename T>
struct NormStats {
    RowVector<T> mean;
    RowVector<T> var;

    template <class F, class... Ps>
    static void zip(F&& f, const std::string& prefix, Ps&&... ps)
    {
        f(prefix + "running_mean", ps.mean...);
        f(prefix + "running_var", ps.var...);
    }
};

template <typename T>
struct EncoderParams {
    Affine<T> hidden1;
    Norm<T> norm1;
    Affine<T> hidden2;
    Norm<T> norm2;
    Affine<T> mu_head;
    Affine<T> logvar_head;

    template <class F, class... Ps>
    static void zip(F&& f, const std::string& prefix, Ps&&... ps)
    {
        Affine<T>::zip(f, prefix + "hidden1.", ps.hidden1...);
        Norm<T>::zip(f, prefix + "norm1.", ps.norm1...);
        Affine<T>::zip(f, prefix + "hidden2.", ps.hidden2...);
        Norm<T>::zip(f, prefix + "norm2.", ps.norm2...);
        Affine<T>::zip(f, prefix + "mu_head.", ps.mu_head...);
        Affine<T>::zip(f, prefix + "logvar_head.", ps.logvar_head...);
    }
};

template <typename T>
struct DecoderParams {
    Affine<T> hidden1;
    Norm<T> norm1;
    Affine<T> hidden2;
    Norm<T> norm2;
    Affine<T> output;

    template <class F, class... Ps>
    static void zip(F&& f, const std::string& prefix, Ps&&... ps)
    {
        Affine<T>::zip(f, prefix + "hidden1.", ps.hidden1...);
        Norm<T>::zip(f, prefix + "norm1.", ps.norm1...);
        Affine<T>::zip(f, prefix + "hidden2.", ps.hidden2...);
        Norm<T>::zip(f, prefix + "norm2.", ps.norm2...);
        Affine<T>::zip(f, prefix + "output.", ps.output...);
    }
};

template <typename T>
struct TwoLayerStats {
    NormStats<T> norm1;
    NormStats<T> norm2;

    template <class F, class... Ps>
    static void zip(F&& f, const std::string& prefix, Ps&&... ps)
    {
        NormStats<T>::zip(f, prefix + "norm1.", ps.norm1...);
        NormStats<T>::zip(f, prefix + "norm2.", ps.norm2...);
    }
};

template <typename T>
struct VaeParams {
    EncoderParams<T> encoder;
    DecoderParams<T> decoder;

    template <class F, class... Ps>
    static void zip(F&& f, const std::string& prefix, Ps&&... ps)
    {
        EncoderParams<T>::zip(f, prefix + "encoder.", ps.encoder...);
        DecoderParams<T>::zip(f, prefix + "decoder.", ps.decoder...);
    }
};

template <typename T>
struct VaeStats {
    TwoLayerStats<T> encoder;
    TwoLayerStats<T> decoder;

    template <class F, class... Ps>
    static void zip(F&& f, const std::string& prefix, Ps&&... ps)
    {
        TwoLayerStats<T>::zip(f, prefix + "encoder.", ps.encoder...);
        TwoLayerStats<T>::zip(f, prefix + "decoder.", ps.decoder...);
    }
};

/// `depth` ReLU layers of the hidden width, then a 2-wide layer with no
/// activation, then a 1-wide layer followed by a sigmoid.
template <typename T>
struct ClassifierParams {
    std::vector<Affine<T>> hidden;
    Affine<T> to_two;
    Affine<T> to_one;

    template <class F, class P0, class... Ps>
    static void zip(F&& f, const std::string& prefix, P0&& p0, Ps&&... ps)
    {
        for (std::size_t k = 0; k < p0.hidden.size(); ++k)
            Affine<T>::zip(f, prefix + "hidden" + std::to_string(k) + ".", p0.hidden[k],
                           ps.hidden[k]...);
        Affine<T>::zip(f, prefix + "to_two.", p0.to_two, ps.to_two...);
        Affine<T>::zip(f, prefix + "to_one.", p0.to_one, ps.to_one...);
    }
};

/// Mask and classifier are shared; there is one VAE per domain (1 or 2).
template <typename T>
struct ModelParams {
    SparseMask<T> mask;
    std::vector<VaeParams<T>> vaes;
    ClassifierParams<T> classifier;

    template <class F, class P0, class... Ps>
    static void zip(F&& f, const std::string& prefix, P0&& p0, Ps&&... ps)
    {
        SparseMask<T>::zip(f, prefix + "mask.", p0.mask, ps.mask...);
        for (std::size_t k = 0; k < p0.vaes.size(); ++k)
            VaeParams<T>::zip(f, prefix + "vae" + std::to_string(k) + ".", p0.vaes[k],
                              ps.vaes[k]...);
        ClassifierParams<T>::zip(f, prefix + "classifier.", p0.classifier, ps.classifier...);
    }
};

struct ModelConfig {
    std::size_t d = 0;
    std::size_t hidden = 1024;
    std::size_t latent = 128;
    std::size_t classifier_depth = 5;
    std::size_t domains = 2;
    double bn_momentum = 0.1;
    double bn_eps = 1e-5;
};

template <typename T>
struct ModelState {
    ModelConfig config;
    std::uint64_t seed = 0;
    ModelParams<T> params;
    std::vector<VaeStats<T>> stats;
    Mode mode = Mode::training;
};

/// Copy of `p` with every array zeroed.
template <class P>
P zeros_like(const P& p)
{
    P z = p;
    P::zip([](const std::string&, auto& a) { a.setZero(); }, "", z);
    return z;
}

template <class P>
std::size_t parameter_count(const P& p)
{
    std::size_t n = 0;
    P::zip([&](const std::string&, const auto& a) { n += static_cast<std::size_t>(a.size()); }, "",
           p);
    return n;
}

// --- forward caches ---------------------------------------------------------

template <typename T>
struct NormCache {
    Matrix<T> xhat;
    RowVector<T> inv_std;
    RowVector<T> batch_mean;
    RowVector<T> batch_var;  // biased, used for normalisation
    Mode mode = Mode::training;
};

template <typename T>
struct EncoderCache {
    Matrix<T> input;
    NormCache<T> norm1;
    Matrix<T> act1;
    NormCache<T> norm2;
    Matrix<T> act2;
};

template <typename T>
struct DecoderCache {
    Matrix<T> input;
    NormCache<T> norm1;
    Matrix<T> act1;
    NormCache<T> norm2;
    Matrix<T> act2;
    Matrix<T> raw_output;
};

template <typename T>
struct ClassifierCache {
    std::vector<Matrix<T>> inputs;  // input of every affine layer, in order
    Vector<T> prob;
};

template <typename T>
struct Encoded {
    Matrix<T> mu;
    Matrix<T> logvar;
};

// --- operations -------------------------------------------------------------

template <typename T>
Matrix<T> apply_mask(const SparseMask<T>& mask, const Matrix<T>& x);

/// Training mode normalises with batch statistics and requires b >= 2.
template <typename T>
Encoded<T> encode(const EncoderParams<T>& enc, const TwoLayerStats<T>& stats, const Matrix<T>& xm,
                  Mode mode, double bn_eps, EncoderCache<T>* cache = nullptr);

/// z = mu + eps * exp(logvar / 2)
template <typename T>
Matrix<T> reparameterize(const Matrix<T>& mu, const Matrix<T>& logvar, const Matrix<T>& eps);

/// Returns frozen_mask ⊙ decoder(z). The mask enters as a constant.
template <typename T>
Matrix<T> decode(const DecoderParams<T>& dec, const TwoLayerStats<T>& stats, const Matrix<T>& z,
                 const SparseMask<T>& frozen_mask, Mode mode, double bn_eps,
                 DecoderCache<T>* cache = nullptr);

template <typename T>
Vector<T> classify(const ClassifierParams<T>& cls, const Matrix<T>& z,
                   ClassifierCache<T>* cache = nullptr);

/// Fan-in scaled uniform U(-1/sqrt(fan_in), 1/sqrt(fan_in)) for every affine
/// weight and bias; batch-norm gamma = 1, beta = 0; mask = 1.
template <typename T>
ModelState<T> init_model(const ModelConfig& config, std::uint64_t seed);

// --- backward passes (accumulate into `grad`, return input gradient) --------

template <typename T>
Matrix<T> encode_backward(const EncoderParams<T>& enc, const EncoderCache<T>& cache,
                          const Matrix<T>& d_mu, const Matrix<T>& d_logvar,
                          EncoderParams<T>& grad);

/// `d_out` is the gradient w.r.t. the masked output; no mask gradient is produced.
template <typename T>
Matrix<T> decode_backward(const DecoderParams<T>& dec, const DecoderCache<T>& cache,
                          const SparseMask<T>& frozen_mask, const Matrix<T>& d_out,
                          DecoderParams<T>& grad);

template <typename T>
Matrix<T> classify_backward(const ClassifierParams<T>& cls, const ClassifierCache<T>& cache,
                            const Vector<T>& d_prob, ClassifierParams<T>& grad);

/// Folds the batch statistics recorded in training-mode caches into the
/// running statistics (PyTorch convention: unbiased variance, momentum on new).
template <typename T>
void update_running_stats(TwoLayerStats<T>& stats, const NormCache<T>& norm1,
                          const NormCache<T>& norm2, double momentum);

template <typename T, typename U>
ModelState<U> cast_model(const ModelState<T>& model);

} // namespace mdmt
