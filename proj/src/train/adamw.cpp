#include "lgsrr/train/adamw.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace lgsrr::train {

void adamw_step(std::span<double> params, std::span<const double> grads, AdamWState& state,
                const AdamWConfig& config) {
    if (params.size() != grads.size()) {
        throw std::invalid_argument("adamw: " + std::to_string(params.size()) + " parameters but " +
                                    std::to_string(grads.size()) + " gradients");
    }
    if (state.m.size() != params.size()) {
        state.m.assign(params.size(), 0.0);
        state.v.assign(params.size(), 0.0);
        state.step = 0;
    }
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double bc1 = 1.0 - std::pow(config.beta1, t);
    const double bc2 = 1.0 - std::pow(config.beta2, t);
    const double decay = 1.0 - config.lr * config.weight_decay;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        state.m[i] = config.beta1 * state.m[i] + (1.0 - config.beta1) * g;
        state.v[i] = config.beta2 * state.v[i] + (1.0 - config.beta2) * g * g;
        const double m_hat = state.m[i] / bc1;
        const double v_hat = state.v[i] / bc2;
        params[i] = params[i] * decay - config.lr * m_hat / (std::sqrt(v_hat) + config.eps);
    }
}

void AdamW::step(const std::vector<std::span<double>>& params, const std::vector<std::span<const double>>& grads) {
    if (params.size() != grads.size()) {
        throw std::invalid_argument("adamw: tensor count mismatch");
    }
    states_.resize(params.size());
    for (std::size_t t = 0; t < params.size(); ++t) {
        adamw_step(params[t], grads[t], states_[t], config_);
    }
}

} // namespace lgsrr::train
