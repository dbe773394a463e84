#include "lgsrr/ndcg/neural_ndcg.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>

#include "lgsrr/core/autodiff.hpp"

namespace lgsrr::ndcg {

RankingTarget RankingTarget::from_order(std::vector<std::size_t> order) {
    const std::size_t n = order.size();
    if (n == 0) {
        throw std::invalid_argument("ranking target: empty order");
    }
    std::vector<bool> seen(n, false);
    for (std::size_t slot : order) {
        if (slot >= n || seen[slot]) {
            throw std::invalid_argument("ranking target: order is not a permutation of 0.." +
                                        std::to_string(n - 1));
        }
        seen[slot] = true;
    }
    RankingTarget t;
    t.relevance_ = Vec(n);
    for (std::size_t pos = 0; pos < n; ++pos) {
        t.relevance_[order[pos]] = static_cast<double>(n - (pos + 1));
    }
    t.order_ = std::move(order);
    return t;
}

RankingTarget RankingTarget::pinned_first(std::size_t pinned, std::span<const std::size_t> rest) {
    std::vector<std::size_t> order;
    order.reserve(rest.size() + 1);
    order.push_back(pinned);
    order.insert(order.end(), rest.begin(), rest.end());
    return from_order(std::move(order));
}

std::size_t RankingTarget::position_of(std::size_t slot) const {
    const auto it = std::find(order_.begin(), order_.end(), slot);
    if (it == order_.end()) {
        throw std::out_of_range("ranking target: unknown slot " + std::to_string(slot));
    }
    return static_cast<std::size_t>(it - order_.begin()) + 1;
}

double gain(double s) { return std::exp2(s) - 1.0; }

double discount(std::size_t j) {
    if (j < 1) {
        throw std::invalid_argument("discount: rank position must be >= 1");
    }
    return 1.0 / std::log2(static_cast<double>(j) + 1.0);
}

double ideal_dcg(std::span<const double> relevance) {
    std::vector<double> gains;
    gains.reserve(relevance.size());
    for (double r : relevance) {
        gains.push_back(gain(r));
    }
    std::sort(gains.begin(), gains.end(), std::greater<>());
    double total = 0.0;
    for (std::size_t j = 0; j < gains.size(); ++j) {
        total += gains[j] * discount(j + 1);
    }
    return total;
}

ad::Var soft_permutation_logits(ad::Var scores, double tau) {
    if (!(tau > 0.0)) {
        throw std::invalid_argument("soft_permutation: tau must be positive, got " + std::to_string(tau));
    }
    const std::size_t n = scores.size();
    const auto s = scores.value();
    // pairwise[v] = sum_w |s_v - s_w|
    std::vector<double> pairwise(n, 0.0);
    for (std::size_t v = 0; v < n; ++v) {
        for (std::size_t w = 0; w < n; ++w) {
            pairwise[v] += std::abs(s[v] - s[w]);
        }
    }
    std::vector<double> out(n * n);
    for (std::size_t u = 0; u < n; ++u) {
        const double coeff = static_cast<double>(n + 1) - 2.0 * static_cast<double>(u + 1);
        for (std::size_t v = 0; v < n; ++v) {
            out[u * n + v] = (coeff * s[v] - pairwise[v]) / tau;
        }
    }
    return scores.tape().record(std::move(out), n, n, {scores}, [scores, n, tau](ad::Tape& tp, std::uint32_t self) {
        const auto g = tp.grad(self);
        const auto s = tp.value(scores.id());
        auto gs = tp.accum(scores.id());
        // column sums of the incoming gradient and coefficient-weighted sums
        for (std::size_t v = 0; v < n; ++v) {
            double col = 0.0;
            double weighted = 0.0;
            for (std::size_t u = 0; u < n; ++u) {
                const double coeff = static_cast<double>(n + 1) - 2.0 * static_cast<double>(u + 1);
                col += g[u * n + v];
                weighted += coeff * g[u * n + v];
            }
            gs[v] += weighted / tau;
            // d/ds of -sum_w |s_v - s_w| touches both s_v and s_w.
            for (std::size_t w = 0; w < n; ++w) {
                const double diff = s[v] - s[w];
                const double sign = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
                gs[v] -= col * sign / tau;
                gs[w] += col * sign / tau;
            }
        }
    });
}

namespace {

double column_deviation(std::span<const double> log_p, std::size_t n) {
    double worst = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
        double total = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
            total += std::exp(log_p[r * n + c]);
        }
        worst = std::max(worst, std::abs(total - 1.0));
    }
    return worst;
}

} // namespace

LogSinkhorn sinkhorn_log(ad::Var log_p, int max_iters, double tol) {
    if (log_p.rows() != log_p.cols()) {
        throw std::invalid_argument("sinkhorn: matrix must be square, got " +
                                    describe_dim(log_p.rows(), log_p.cols()));
    }
    const std::size_t n = log_p.rows();
    LogSinkhorn out;
    out.log_p = log_p;
    out.max_deviation = column_deviation(log_p.value(), n);
    while (out.max_deviation > tol && out.iterations < max_iters) {
        out.log_p = ad::normalize_rows_log(ad::normalize_cols_log(out.log_p));
        ++out.iterations;
        out.max_deviation = column_deviation(out.log_p.value(), n);
    }
    out.converged = out.max_deviation <= tol;
    return out;
}

SoftPermutation soft_permutation(const Vec& scores, double tau) {
    ad::Tape tape;
    const ad::Var s = tape.constant(scores);
    const ad::Var log_p = ad::normalize_rows_log(soft_permutation_logits(s, tau));
    SoftPermutation out;
    out.p = ad::exp(log_p).value_mat();
    out.tau = tau;
    return out;
}

SoftPermutation sinkhorn(const SoftPermutation& p, int max_iters, double tol) {
    const std::size_t n = p.p.rows();
    if (p.p.cols() != n) {
        throw std::invalid_argument("sinkhorn: matrix must be square, got " + describe_dim(n, p.p.cols()));
    }
    std::vector<double> logs(p.p.size());
    for (std::size_t i = 0; i < logs.size(); ++i) {
        const double v = p.p.values()[i];
        if (!(v > 0.0)) {
            throw std::invalid_argument("sinkhorn: entries must be strictly positive");
        }
        logs[i] = std::log(v);
    }
    ad::Tape tape;
    // Row-normalise first so the row invariant holds even with zero sweeps.
    const ad::Var start = ad::normalize_rows_log(tape.constant(Mat(n, n, std::move(logs))));
    const LogSinkhorn balanced = sinkhorn_log(start, max_iters, tol);
    SoftPermutation out;
    out.p = ad::exp(balanced.log_p).value_mat();
    out.tau = p.tau;
    out.sinkhorn_applied = true;
    out.converged = balanced.converged;
    out.iterations = balanced.iterations;
    return out;
}

NdcgTerm neural_ndcg_loss(ad::Var scores, std::span<const double> relevance, double tau,
                          const SinkhornConfig& sinkhorn) {
    const std::size_t n = scores.size();
    if (relevance.size() != n) {
        throw std::invalid_argument("neural_ndcg_loss: " + std::to_string(n) + " scores but " +
                                    std::to_string(relevance.size()) + " relevance entries");
    }
    if (!(tau > 0.0)) {
        throw std::invalid_argument("neural_ndcg_loss: tau must be positive, got " + std::to_string(tau));
    }
    NdcgTerm term;
    const bool all_equal = std::all_of(relevance.begin(), relevance.end(),
                                       [&](double r) { return r == relevance.front(); });
    if (all_equal) {
        term.degenerate = true;
        term.loss = scores.tape().constant(-1.0);
        return term;
    }

    std::vector<double> gains(n);
    for (std::size_t i = 0; i < n; ++i) {
        gains[i] = gain(relevance[i]);
    }
    std::vector<double> weights(n);
    const double max_dcg = ideal_dcg(relevance);
    for (std::size_t j = 0; j < n; ++j) {
        weights[j] = -discount(j + 1) / max_dcg;
    }

    ad::Var log_p = ad::normalize_rows_log(soft_permutation_logits(scores, tau));
    if (sinkhorn.enabled) {
        const LogSinkhorn balanced = sinkhorn_log(log_p, sinkhorn.max_iters, sinkhorn.tol);
        log_p = balanced.log_p;
        term.sinkhorn_converged = balanced.converged;
    }
    const ad::Var sorted_gains = ad::matvec_const(ad::exp(log_p), gains);
    term.loss = ad::weighted_sum(sorted_gains, weights);
    return term;
}

NdcgLoss neural_ndcg_loss(const Vec& scores, std::span<const double> relevance, double tau,
                          const SinkhornConfig& sinkhorn) {
    ad::Tape tape;
    const ad::Var s = tape.variable(scores);
    const NdcgTerm term = neural_ndcg_loss(s, relevance, tau, sinkhorn);
    tape.backward(term.loss);
    return {term.loss.scalar(), term.degenerate, term.sinkhorn_converged, s.grad_vec()};
}

NdcgLoss neural_ndcg_loss(const Vec& scores, const RankingTarget& target, double tau,
                          const SinkhornConfig& sinkhorn) {
    return neural_ndcg_loss(scores, target.relevance().span(), tau, sinkhorn);
}

} // namespace lgsrr::ndcg
