#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "lgsrr/core/tape.hpp"
#include "lgsrr/core/tensor.hpp"

namespace lgsrr::ndcg {

/// Row-stochastic relaxation of the descending-sort permutation matrix.
/// Row u (0-based) concentrates on the item with the (u+1)-th largest score.
struct SoftPermutation {
    Mat p;
    double tau = 1.0;
    bool sinkhorn_applied = false;
    /// Only meaningful when sinkhorn_applied.
    bool converged = true;
    int iterations = 0;
};

struct SinkhornConfig {
    int max_iters = 30;
    double tol = 1e-6;
    bool enabled = true;
};

/// Ordering of slots by importance plus the relevance each slot earns.
/// Relevance of the slot at 1-based position p is N - p.
class RankingTarget {
public:
    /// order[k] is the slot index placed at position k+1. Must be a bijection.
    static RankingTarget from_order(std::vector<std::size_t> order);
    /// Places `pinned` first, followed by `rest` in the given order.
    static RankingTarget pinned_first(std::size_t pinned, std::span<const std::size_t> rest);

    std::size_t size() const noexcept { return order_.size(); }
    const std::vector<std::size_t>& order() const noexcept { return order_; }
    const Vec& relevance() const noexcept { return relevance_; }
    /// 1-based position of a slot.
    std::size_t position_of(std::size_t slot) const;

private:
    std::vector<std::size_t> order_;
    Vec relevance_;
};

SoftPermutation soft_permutation(const Vec& scores, double tau);
/// Alternating column/row normalisation in log space. The last step of each
/// sweep normalises rows, so rows always sum to one; the loop stops once
/// every column sum is within `tol` of one.
SoftPermutation sinkhorn(const SoftPermutation& p, int max_iters, double tol);

/// 2^s - 1
double gain(double s);
/// 1 / log2(j + 1), j >= 1
double discount(std::size_t j);

/// Maximum DCG attainable for a relevance vector (ideal ordering).
double ideal_dcg(std::span<const double> relevance);

// Differentiable building blocks.

/// n x n matrix of row logits ((n + 1 - 2u) s_v - sum_w |s_v - s_w|) / tau.
ad::Var soft_permutation_logits(ad::Var scores, double tau);

struct LogSinkhorn {
    ad::Var log_p;
    int iterations = 0;
    bool converged = false;
    double max_deviation = 0.0;
};

/// `log_p` must already be row-normalised.
LogSinkhorn sinkhorn_log(ad::Var log_p, int max_iters, double tol);

struct NdcgTerm {
    ad::Var loss;
    /// All relevances equal: the loss is a constant with zero gradient.
    bool degenerate = false;
    bool sinkhorn_converged = true;
};

/// Negated NeuralNDCG: -(sum_j d(j) (P g)_j) / maxDCG, where P is the
/// (balanced) soft permutation built from `scores` and g = 2^relevance - 1.
NdcgTerm neural_ndcg_loss(ad::Var scores, std::span<const double> relevance, double tau,
                          const SinkhornConfig& sinkhorn = {});

struct NdcgLoss {
    double loss = 0.0;
    bool degenerate = false;
    bool sinkhorn_converged = true;
    Vec grad;
};

NdcgLoss neural_ndcg_loss(const Vec& scores, const RankingTarget& target, double tau,
                          const SinkhornConfig& sinkhorn = {});
NdcgLoss neural_ndcg_loss(const Vec& scores, std::span<const double> relevance, double tau,
                          const SinkhornConfig& sinkhorn = {});

} // namespace lgsrr::ndcg
