#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace lgsrr::train {

struct AdamWConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
};

struct AdamWState {
    std::vector<double> m;
    std::vector<double> v;
    std::size_t step = 0;
};

/// One decoupled-weight-decay Adam update of a flat parameter block:
///   p <- p (1 - lr wd) - lr m_hat / (sqrt(v_hat) + eps)
void adamw_step(std::span<double> params, std::span<const double> grads, AdamWState& state,
                const AdamWConfig& config);

/// AdamW over a fixed list of parameter tensors.
class AdamW {
public:
    explicit AdamW(AdamWConfig config) : config_(config) {}

    void step(const std::vector<std::span<double>>& params, const std::vector<std::span<const double>>& grads);

    const AdamWConfig& config() const noexcept { return config_; }
    std::size_t steps() const noexcept { return states_.empty() ? 0 : states_.front().step; }

private:
    AdamWConfig config_;
    std::vector<AdamWState> states_;
};

} // namespace lgsrr::train
