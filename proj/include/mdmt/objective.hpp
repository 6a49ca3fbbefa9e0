#pragma once

// The four loss terms, their weighted composite and exact gradients.
//
// Reductions: reconstruction MSE is a mean over all b*d entries, KL is a sum
// over latent dimensions averaged over the batch, cross-entropy is a batch
// mean, and the l1 penalty is an unnormalised sum over the mask.

#include "mdmt/dataset.hpp"
#include "mdmt/network.hpp"

#include <array>
#include <span>
#include <vector>

namespace mdmt {

struct LossWeights {
    double alpha = 10.0;   // reconstruction
    double beta = 1e-4;    // variational
    double gamma = 1.0;    // classification
    double theta = 1e-4;   // sparsity

    void validate() const;
};

struct LossBreakdown {
    std::array<double, 2> rec{};
    std::array<double, 2> var{};
    std::array<double, 2> cls{};
    double sparse = 0.0;
    double total = 0.0;

    /// alpha*(rec_a+rec_b) + beta*(var_a+var_b) + gamma*(class_a+class_b) + theta*sparse
    double recombine(const LossWeights& w) const;
};

/// Probabilities are clamped to [kProbClamp, 1 - kProbClamp] before the log.
inline constexpr double kProbClamp = 1e-7;

/// MSE(mask ⊙ x, x_masked) where x_masked already carries the frozen mask.
template <typename T>
double loss_rec(const Matrix<T>& x, const SparseMask<T>& mask, const Matrix<T>& x_masked);

template <typename T>
double loss_var(const Matrix<T>& mu, const Matrix<T>& logvar);

template <typename T>
double loss_class(const Vector<T>& prob, std::span<const int> labels);

template <typename T>
double loss_sparse(const SparseMask<T>& mask);

/// Everything one forward pass produced for one domain, kept for backward.
template <typename T>
struct DomainPass {
    Matrix<T> x;
    std::vector<int> y;
    Matrix<T> masked;  // mask ⊙ x: encoder input and reconstruction target
    EncoderCache<T> encoder;
    Encoded<T> code;
    Matrix<T> eps;
    Matrix<T> z;
    DecoderCache<T> decoder;
    Matrix<T> recon;  // frozen_mask ⊙ decoder(z)
    ClassifierCache<T> classifier;
    Vector<T> prob;
};

template <typename T>
struct CompositeContext {
    std::vector<DomainPass<T>> domains;
    SparseMask<T> frozen_mask;
    LossWeights weights;
    LossBreakdown loss;
};

/// Full forward pass for every domain the model carries. `frozen_mask` is the
/// detached copy W* used on the decoder side; callers pass a snapshot of the
/// live mask. One noise matrix (b x latent) per domain.
template <typename T>
CompositeContext<T> composite_loss(std::span<const DomainBatch> batches, const ModelState<T>& model,
                                   const SparseMask<T>& frozen_mask, const LossWeights& weights,
                                   std::span<const Matrix<T>> eps);

template <typename T>
CompositeContext<T> composite_loss(const BatchPair& batch, const ModelState<T>& model,
                                   const LossWeights& weights, const Matrix<T>& eps_a,
                                   const Matrix<T>& eps_b);

/// Gradient of the context's total loss w.r.t. every trainable parameter.
/// The l1 subgradient at exactly zero is taken as zero.
template <typename T>
ModelParams<T> gradients(const CompositeContext<T>& ctx, const ModelState<T>& model);

} // namespace mdmt
