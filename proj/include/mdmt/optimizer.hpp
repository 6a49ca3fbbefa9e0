#pragma once

#include "mdmt/network.hpp"

#include <cmath>
#include <string>

namespace mdmt {

struct AdamWSettings {
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double weight_decay = 0.01;
};

/// Adaptive moments with decoupled weight decay, matching torch.optim.AdamW.
/// P is any parameter struct with a static zip().
template <class P>
class AdamW {
public:
    AdamW(const P& params, AdamWSettings settings)
        : settings_(settings), m_(zeros_like(params)), v_(zeros_like(params))
    {
    }

    void step(P& params, const P& grads)
    {
        ++t_;
        const double bc1 = 1.0 - std::pow(settings_.beta1, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(settings_.beta2, static_cast<double>(t_));
        const double step_size = settings_.learning_rate / bc1;
        const double sqrt_bc2 = std::sqrt(bc2);
        const double decay = 1.0 - settings_.learning_rate * settings_.weight_decay;
        const double b1 = settings_.beta1, b2 = settings_.beta2, eps = settings_.epsilon;

        P::zip(
            [&](const std::string&, auto& p, const auto& g, auto& m, auto& v) {
                using T = typename std::remove_cvref_t<decltype(p)>::Scalar;
                if (settings_.weight_decay != 0.0) p *= static_cast<T>(decay);
                m = static_cast<T>(b1) * m + static_cast<T>(1.0 - b1) * g;
                v.array() = static_cast<T>(b2) * v.array() +
                            static_cast<T>(1.0 - b2) * g.array().square();
                p.array() -= static_cast<T>(step_size) * m.array() /
                             (v.array().sqrt() / static_cast<T>(sqrt_bc2) + static_cast<T>(eps));
            },
            "", params, grads, m_, v_);
    }

    std::size_t steps() const { return t_; }
    const AdamWSettings& settings() const { return settings_; }

private:
    AdamWSettings settings_;
    P m_;
    P v_;
    std::size_t t_ = 0;
};

} // namespace mdmt
