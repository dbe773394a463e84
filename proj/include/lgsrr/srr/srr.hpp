#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "lgsrr/core/tape.hpp"
#include "lgsrr/core/tensor.hpp"
#include "lgsrr/ndcg/neural_ndcg.hpp"

namespace lgsrr::srr {

/// Pooled text feature plus one pooled feature per fine-grained slot, in the
/// run's fixed slot order. Importance scores index slot 0 as text and fine
/// slot m as m + 1.
struct SemanticBundle {
    Vec text;
    std::vector<Vec> fine;

    std::size_t dim() const noexcept { return text.dim(); }
    std::size_t slot_count() const noexcept { return fine.size() + 1; }
    void validate() const;
};

/// Shared weight network (w1, b1, w2, b2) and the classifier (w_cls, b_cls).
struct SrrParams {
    Mat w1;     // h x d
    Vec b1;     // h
    Mat w2;     // 1 x h
    Vec b2;     // 1
    Mat w_cls;  // K x 2d
    Vec b_cls;  // K

    /// Uniform in +-1/sqrt(fan_in).
    static SrrParams init(std::size_t dim, std::size_t hidden, std::size_t classes, std::uint64_t seed);
    static SrrParams zeros_like(const SrrParams& other);

    std::size_t dim() const noexcept { return w1.cols(); }
    std::size_t hidden() const noexcept { return w1.rows(); }
    std::size_t classes() const noexcept { return w_cls.rows(); }

    std::vector<std::span<double>> tensors();
    std::vector<std::span<const double>> tensors() const;
};

/// Which relations participate. Disabling importance replaces alpha by a
/// uniform mean over the fine slots; disabling complementarity uses F_M in
/// place of beta * F_M; disabling inconsistency drops the penalty feature.
struct Relations {
    bool importance = true;
    bool complementarity = true;
    bool inconsistency = true;
};

struct SrrOutput {
    Vec alpha;      // over [text, fine...]; empty when importance is disabled
    Vec beta;       // per fine slot
    Vec gamma;      // per fine slot
    Vec comp;       // 2d
    Vec incons;     // d
    Vec logits;     // K
    bool degenerate_cosine = false;
};

// Value-level operations.

Vec importance(const SemanticBundle& bundle, const SrrParams& params);

struct Complementarity {
    Vec beta;
    std::vector<Vec> enhanced;
    bool degenerate = false;
};
Complementarity complementarity(const SemanticBundle& bundle);

/// sum over fine slots m of alpha[m + 1] * concat(F_T, enhanced[m]).
Vec fuse_comp(const Vec& alpha, const SemanticBundle& bundle, std::span<const Vec> enhanced);

struct Inconsistency {
    Vec gamma;
    std::vector<Vec> diffs;
    Vec penalty;
};
Inconsistency inconsistency(const SemanticBundle& bundle);

/// Places the d-dim penalty in the text half of the 2d fused space.
Vec lift_penalty(const Vec& penalty);

Vec classify(const Vec& comp, const Vec& incons, const SrrParams& params);

SrrOutput forward(const SemanticBundle& bundle, const SrrParams& params, const Relations& relations = {});

// Differentiable graph.

struct SrrParamVars {
    ad::Var w1, b1, w2, b2, w_cls, b_cls;

    static SrrParamVars record(ad::Tape& tape, const SrrParams& params, bool trainable);
    SrrParams grads() const;
};

struct SrrGraph {
    ad::Var alpha;  // invalid when importance is disabled
    ad::Var comp;
    ad::Var incons;  // invalid when inconsistency is disabled
    ad::Var logits;
    Vec beta;
    Vec gamma;
    bool degenerate_cosine = false;
};

SrrGraph build_graph(ad::Tape& tape, const SrrParamVars& params, const SemanticBundle& bundle,
                     const Relations& relations = {});

// Training objective.

struct Example {
    const SemanticBundle* bundle = nullptr;
    std::size_t label = 0;
    /// Ranking over [text, fine...]; null when the sample carries none.
    const ndcg::RankingTarget* target = nullptr;
};

struct LossOptions {
    double lambda = 1.0;
    double tau = 1.0;
    ndcg::SinkhornConfig sinkhorn;
    Relations relations;
};

struct SrrLoss {
    double loss = 0.0;
    double classification = 0.0;
    /// Mean negated NeuralNDCG over ranked samples, before the 1/N_R factor.
    double ranking = 0.0;
    std::size_t ranked = 0;
    SrrParams grad;
};

/// mean CE + lambda * (1 / N_R) * mean NeuralNDCG loss, with gradients for
/// every parameter.
SrrLoss srr_loss(std::span<const Example> batch, const SrrParams& params, const LossOptions& options);

} // namespace lgsrr::srr
