#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "lgsrr/ndcg/neural_ndcg.hpp"
#include "lgsrr/srr/srr.hpp"

namespace lgsrr::testing {

inline std::vector<double> flatten(const srr::SrrParams& p) {
    std::vector<double> out;
    for (const auto t : p.tensors()) out.insert(out.end(), t.begin(), t.end());
    return out;
}

inline void unflatten(srr::SrrParams& p, const std::vector<double>& flat) {
    std::size_t k = 0;
    for (auto t : p.tensors()) {
        for (double& v : t) v = flat[k++];
    }
}

struct RandomProblem {
    std::vector<srr::SemanticBundle> bundles;
    std::vector<ndcg::RankingTarget> targets;
    std::vector<srr::Example> batch;
    srr::SrrParams params;
};

// Small random batch with rankings; d <= 8, h <= 4, K <= 3.
inline RandomProblem random_problem(std::mt19937_64& rng) {
    std::uniform_int_distribution<std::size_t> dd(2, 8), hh(1, 4), kk(2, 3), ff(1, 3), bb(1, 4);
    std::normal_distribution<double> g(0.0, 1.0);
    const std::size_t d = dd(rng), h = hh(rng), k = kk(rng), fine = ff(rng), n = bb(rng);
    RandomProblem p;
    p.params = srr::SrrParams::init(d, h, k, rng());
    for (auto t : p.params.tensors()) {
        for (double& v : t) v *= 2.0;
    }
    for (std::size_t i = 0; i < n; ++i) {
        srr::SemanticBundle b;
        b.text = Vec(d);
        for (auto& v : b.text) v = g(rng);
        for (std::size_t m = 0; m < fine; ++m) {
            Vec f(d);
            for (auto& v : f) v = g(rng);
            b.fine.push_back(f);
        }
        p.bundles.push_back(b);
        std::vector<std::size_t> rest(fine);
        for (std::size_t m = 0; m < fine; ++m) rest[m] = m + 1;
        std::shuffle(rest.begin(), rest.end(), rng);
        p.targets.push_back(ndcg::RankingTarget::pinned_first(0, rest));
    }
    for (std::size_t i = 0; i < n; ++i) {
        p.batch.push_back({&p.bundles[i], static_cast<std::size_t>(rng() % k), &p.targets[i]});
    }
    return p;
}

inline double min_relu_margin(const RandomProblem& p) {
    double m = 1e9;
    for (const auto& b : p.bundles) {
        std::vector<const Vec*> feats{&b.text};
        for (const auto& f : b.fine) feats.push_back(&f);
        for (const Vec* f : feats) {
            for (std::size_t r = 0; r < p.params.hidden(); ++r) {
                double z = p.params.b1[r];
                for (std::size_t c = 0; c < f->dim(); ++c) z += p.params.w1(r, c) * (*f)[c];
                m = std::min(m, std::abs(z));
            }
        }
    }
    return m;
}

// Redraws hidden biases until every pre-activation sits away from the ReLU kink.
inline void nudge_off_kinks(RandomProblem& p, std::mt19937_64& rng, double margin = 1e-3) {
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    for (int tries = 0; tries < 1000 && min_relu_margin(p) < margin; ++tries) {
        for (double& v : p.params.b1) v = u(rng);
    }
}

// max over parameters of |analytic - central difference| / max(1, |analytic|)
inline double srr_loss_grad_error(const RandomProblem& p, const srr::LossOptions& opt, double eps = 1e-5) {
    const srr::SrrLoss base = srr::srr_loss(p.batch, p.params, opt);
    const std::vector<double> analytic = flatten(base.grad);
    std::vector<double> x = flatten(p.params);
    srr::SrrParams probe = p.params;
    double worst = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double keep = x[i];
        x[i] = keep + eps;
        unflatten(probe, x);
        const double up = srr::srr_loss(p.batch, probe, opt).loss;
        x[i] = keep - eps;
        unflatten(probe, x);
        const double down = srr::srr_loss(p.batch, probe, opt).loss;
        x[i] = keep;
        const double numeric = (up - down) / (2 * eps);
        worst = std::max(worst, std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(analytic[i])));
    }
    return worst;
}

} // namespace lgsrr::testing
