#include "mdmt/objective.hpp"

#include <algorithm>
#include <cmath>

namespace mdmt {

void LossWeights::validate() const
{
    require(alpha >= 0 && beta >= 0 && gamma >= 0 && theta >= 0,
            "loss weights must be non-negative");
}

double LossBreakdown::recombine(const LossWeights& w) const
{
    return w.alpha * (rec[0] + rec[1]) + w.beta * (var[0] + var[1]) +
           w.gamma * (cls[0] + cls[1]) + w.theta * sparse;
}

template <typename T>
double loss_rec(const Matrix<T>& x, const SparseMask<T>& mask, const Matrix<T>& x_masked)
{
    require_shape(x.rows() == x_masked.rows() && x.cols() == x_masked.cols(),
                  "loss_rec: input and reconstruction shapes differ");
    const Matrix<T> diff = apply_mask(mask, x) - x_masked;
    return static_cast<double>(diff.squaredNorm()) / static_cast<double>(diff.size());
}

template <typename T>
double loss_var(const Matrix<T>& mu, const Matrix<T>& logvar)
{
    require_shape(mu.rows() == logvar.rows() && mu.cols() == logvar.cols(),
                  "loss_var: mu and logvar shapes differ");
    if (!mu.allFinite() || !logvar.allFinite()) throw NonFiniteError("loss_var: non-finite input");
    const auto per_entry = logvar.array().exp() + mu.array().square() - T(1) - logvar.array();
    return 0.5 * static_cast<double>(per_entry.sum()) / static_cast<double>(mu.rows());
}

template <typename T>
double loss_class(const Vector<T>& prob, std::span<const int> labels)
{
    require_shape(static_cast<std::size_t>(prob.size()) == labels.size(),
                  "loss_class: probability and label counts differ");
    double sum = 0.0;
    for (Eigen::Index i = 0; i < prob.size(); ++i) {
        const double p = static_cast<double>(prob(i));
        require(p >= 0.0 && p <= 1.0, "loss_class: probability outside [0, 1]");
        const int y = labels[static_cast<std::size_t>(i)];
        require(y == 0 || y == 1, "loss_class: label must be 0 or 1");
        const double pc = std::clamp(p, kProbClamp, 1.0 - kProbClamp);
        sum += y == 1 ? std::log(pc) : std::log(1.0 - pc);
    }
    return -sum / static_cast<double>(prob.size());
}

template <typename T>
double loss_sparse(const SparseMask<T>& mask)
{
    double sum = 0.0;
    for (Eigen::Index j = 0; j < mask.w.size(); ++j) sum += std::abs(static_cast<double>(mask.w(j)));
    return sum;
}

template <typename T>
CompositeContext<T> composite_loss(std::span<const DomainBatch> batches, const ModelState<T>& model,
                                   const SparseMask<T>& frozen_mask, const LossWeights& weights,
                                   std::span<const Matrix<T>> eps)
{
    weights.validate();
    const auto& params = model.params;
    require(batches.size() == params.vaes.size(),
            "composite_loss: one batch per domain is required");
    require(eps.size() == batches.size(), "composite_loss: one noise matrix per domain is required");
    require_shape(frozen_mask.d() == params.mask.d(), "frozen mask width differs from live mask");

    CompositeContext<T> ctx;
    ctx.frozen_mask = frozen_mask;
    ctx.weights = weights;
    ctx.domains.resize(batches.size());
    for (std::size_t k = 0; k < batches.size(); ++k) {
        require(batches[k].x.rows() >= 1, "composite_loss: empty batch");
        require(k == 0 || batches[k].x.rows() == batches[0].x.rows(),
                "composite_loss: paired batches must have equal size");
        auto& pass = ctx.domains[k];
        pass.x = batches[k].x.template cast<T>();
        pass.y = batches[k].y;
        pass.masked = apply_mask(params.mask, pass.x);
        pass.code = encode(params.vaes[k].encoder, model.stats[k].encoder, pass.masked, model.mode,
                           model.config.bn_eps, &pass.encoder);
        pass.eps = eps[k];
        pass.z = reparameterize(pass.code.mu, pass.code.logvar, pass.eps);
        pass.recon = decode(params.vaes[k].decoder, model.stats[k].decoder, pass.z, frozen_mask,
                            model.mode, model.config.bn_eps, &pass.decoder);
        pass.prob = classify(params.classifier, pass.z, &pass.classifier);

        ctx.loss.rec[k] = loss_rec(pass.x, params.mask, pass.recon);
        ctx.loss.var[k] = loss_var(pass.code.mu, pass.code.logvar);
        ctx.loss.cls[k] = loss_class(pass.prob, std::span<const int>(pass.y));
    }
    ctx.loss.sparse = loss_sparse(params.mask);
    ctx.loss.total = ctx.loss.recombine(weights);
    return ctx;
}

template <typename T>
CompositeContext<T> composite_loss(const BatchPair& batch, const ModelState<T>& model,
                                   const LossWeights& weights, const Matrix<T>& eps_a,
                                   const Matrix<T>& eps_b)
{
    const DomainBatch batches[2] = {batch.a, batch.b};
    const Matrix<T> eps[2] = {eps_a, eps_b};
    const SparseMask<T> frozen = model.params.mask;
    return composite_loss<T>(std::span<const DomainBatch>(batches, 2), model, frozen, weights,
                             std::span<const Matrix<T>>(eps, 2));
}

template <typename T>
ModelParams<T> gradients(const CompositeContext<T>& ctx, const ModelState<T>& model)
{
    const auto& params = model.params;
    const auto& w = ctx.weights;
    ModelParams<T> grad = zeros_like(params);

    for (std::size_t k = 0; k < ctx.domains.size(); ++k) {
        const auto& pass = ctx.domains[k];
        const auto b = static_cast<double>(pass.x.rows());
        const auto n_entries = static_cast<double>(pass.x.size());

        // Reconstruction: r = W ⊙ x - W* ⊙ x̃.
        const Matrix<T> resid = pass.masked - pass.recon;
        const T rec_scale = static_cast<T>(w.alpha * 2.0 / n_entries);
        Matrix<T> d_masked = rec_scale * resid;
        Matrix<T> dz = decode_backward(params.vaes[k].decoder, pass.decoder, ctx.frozen_mask,
                                       Matrix<T>(-rec_scale * resid), grad.vaes[k].decoder);

        // Classification: d/dp of clamped binary cross-entropy.
        Vector<T> d_prob(pass.prob.size());
        for (Eigen::Index i = 0; i < pass.prob.size(); ++i) {
            const double p = static_cast<double>(pass.prob(i));
            const int y = pass.y[static_cast<std::size_t>(i)];
            double g = 0.0;
            if (p > kProbClamp && p < 1.0 - kProbClamp)
                g = y == 1 ? -1.0 / p : 1.0 / (1.0 - p);
            d_prob(i) = static_cast<T>(w.gamma * g / b);
        }
        dz += classify_backward(params.classifier, pass.classifier, d_prob, grad.classifier);

        // Variational term plus the reparameterisation path.
        const auto sigma = (pass.code.logvar.array() * T(0.5)).exp();
        const T var_scale = static_cast<T>(w.beta / b);
        Matrix<T> d_mu = var_scale * pass.code.mu + dz;
        Matrix<T> d_logvar =
            (var_scale * T(0.5) * (pass.code.logvar.array().exp() - T(1)) +
             dz.array() * pass.eps.array() * sigma * T(0.5))
                .matrix();

        d_masked += encode_backward(params.vaes[k].encoder, pass.encoder, d_mu, d_logvar,
                                    grad.vaes[k].encoder);
        grad.mask.w += (d_masked.array() * pass.x.array()).colwise().sum().matrix();
    }

    const T theta = static_cast<T>(w.theta);
    for (Eigen::Index j = 0; j < params.mask.w.size(); ++j) {
        const T v = params.mask.w(j);
        grad.mask.w(j) += v > T(0) ? theta : (v < T(0) ? -theta : T(0));
    }
    return grad;
}

#define MDMT_INSTANTIATE_OBJECTIVE(T)                                                            \
    template double loss_rec(const Matrix<T>&, const SparseMask<T>&, const Matrix<T>&);          \
    template double loss_var(const Matrix<T>&, const Matrix<T>&);                                \
    template double loss_class(const Vector<T>&, std::span<const int>);                          \
    template double loss_sparse(const SparseMask<T>&);                                           \
    template CompositeContext<T> composite_loss(std::span<const DomainBatch>,                    \
                                                const ModelState<T>&, const SparseMask<T>&,      \
                                                const LossWeights&, std::span<const Matrix<T>>); \
    template CompositeContext<T> composite_loss(const BatchPair&, const ModelState<T>&,          \
                                                const LossWeights&, const Matrix<T>&,            \
                                                const Matrix<T>&);                               \
    template ModelParams<T> gradients(const CompositeContext<T>&, const ModelState<T>&);

MDMT_INSTANTIATE_OBJECTIVE(float)
MDMT_INSTANTIATE_OBJECTIVE(double)

} // namespace mdmt
