#pragma once

// A small double-precision model, batch and noise for loss and gradient checks.

#include "mdmt/objective.hpp"

#include <random>
#include <vector>

namespace oracle {

struct TinyProblem {
    mdmt::ModelState<double> model;
    std::vector<mdmt::DomainBatch> batches;
    std::vector<Eigen::MatrixXd> eps;
    mdmt::SparseMask<double> frozen;

    mdmt::CompositeContext<double> evaluate(const mdmt::LossWeights& w) const
    {
        return mdmt::composite_loss<double>(batches, model, frozen, w, eps);
    }
};

/// d=10, hidden 8, latent 4, batch 4 unless overridden. The mask is moved off
/// its all-ones start so every term has a generic gradient.
inline TinyProblem tiny_problem(std::uint64_t seed, std::size_t domains = 2, std::size_t d = 10,
                                std::size_t hidden = 8, std::size_t latent = 4, std::size_t b = 4)
{
    mdmt::ModelConfig c;
    c.d = d;
    c.hidden = hidden;
    c.latent = latent;
    c.classifier_depth = 5;
    c.domains = domains;

    TinyProblem p;
    p.model = mdmt::init_model<double>(c, seed);
    std::mt19937_64 rng(seed ^ 0x5eedULL);
    std::normal_distribution<double> normal(0, 1);
    std::uniform_real_distribution<double> unif(0.3, 1.5);
    std::bernoulli_distribution coin(0.5);
    for (Eigen::Index j = 0; j < p.model.params.mask.w.size(); ++j)
        p.model.params.mask.w(j) = (coin(rng) ? 1 : -1) * unif(rng);
    p.frozen = p.model.params.mask;

    for (std::size_t k = 0; k < domains; ++k) {
        mdmt::DomainBatch batch;
        batch.x.resize(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(d));
        for (Eigen::Index i = 0; i < batch.x.size(); ++i) batch.x.data()[i] = normal(rng);
        for (std::size_t i = 0; i < b; ++i) batch.y.push_back(static_cast<int>((i + k) % 2));
        p.batches.push_back(batch);
        Eigen::MatrixXd e(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(latent));
        for (Eigen::Index i = 0; i < e.size(); ++i) e.data()[i] = normal(rng);
        p.eps.push_back(e);
    }
    return p;
}

} // namespace oracle
