#include "lgsrr/srr/srr.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

#include "lgsrr/core/autodiff.hpp"
#include "lgsrr/core/ops.hpp"

namespace lgsrr::srr {

void SemanticBundle::validate() const {
    if (text.empty()) {
        throw std::invalid_argument("semantic bundle: empty text feature");
    }
    if (fine.empty()) {
        throw std::invalid_argument("semantic bundle: no fine-grained slots");
    }
    for (std::size_t m = 0; m < fine.size(); ++m) {
        if (fine[m].dim() != text.dim()) {
            throw std::invalid_argument("semantic bundle: fine slot " + std::to_string(m) + " has dim " +
                                        std::to_string(fine[m].dim()) + ", text has dim " +
                                        std::to_string(text.dim()));
        }
    }
}

namespace {

void fill_uniform(std::span<double> values, std::size_t fan_in, std::mt19937_64& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (double& v : values) {
        v = dist(rng);
    }
}

} // namespace

SrrParams SrrParams::init(std::size_t dim, std::size_t hidden, std::size_t classes, std::uint64_t seed) {
    if (dim == 0 || hidden == 0 || classes == 0) {
        throw std::invalid_argument("srr params: dim, hidden and classes must be positive");
    }
    std::mt19937_64 rng(seed);
    SrrParams p{Mat(hidden, dim), Vec(hidden), Mat(1, hidden), Vec(1), Mat(classes, 2 * dim), Vec(classes)};
    fill_uniform(p.w1.span(), dim, rng);
    fill_uniform(p.b1.span(), dim, rng);
    fill_uniform(p.w2.span(), hidden, rng);
    fill_uniform(p.b2.span(), hidden, rng);
    fill_uniform(p.w_cls.span(), 2 * dim, rng);
    fill_uniform(p.b_cls.span(), 2 * dim, rng);
    return p;
}

SrrParams SrrParams::zeros_like(const SrrParams& o) {
    return {Mat(o.w1.rows(), o.w1.cols()), Vec(o.b1.dim()), Mat(o.w2.rows(), o.w2.cols()),
            Vec(o.b2.dim()), Mat(o.w_cls.rows(), o.w_cls.cols()), Vec(o.b_cls.dim())};
}

std::vector<std::span<double>> SrrParams::tensors() {
    return {w1.span(), b1.span(), w2.span(), b2.span(), w_cls.span(), b_cls.span()};
}

std::vector<std::span<const double>> SrrParams::tensors() const {
    return {w1.span(), b1.span(), w2.span(), b2.span(), w_cls.span(), b_cls.span()};
}

namespace {

void check_params(const SemanticBundle& bundle, const SrrParams& params) {
    bundle.validate();
    if (params.dim() != bundle.dim()) {
        throw std::invalid_argument("srr: weight network expects dim " + std::to_string(params.dim()) +
                                    ", bundle has dim " + std::to_string(bundle.dim()));
    }
    if (params.w2.rows() != 1 || params.w2.cols() != params.hidden() || params.b2.dim() != 1 ||
        params.b1.dim() != params.hidden()) {
        throw std::invalid_argument("srr: weight network shapes are inconsistent");
    }
    if (params.w_cls.cols() != 2 * bundle.dim() || params.b_cls.dim() != params.w_cls.rows()) {
        throw std::invalid_argument("srr: classifier " + describe_dim(params.w_cls.rows(), params.w_cls.cols()) +
                                    " does not fit fused dim " + std::to_string(2 * bundle.dim()));
    }
}

} // namespace

Vec importance(const SemanticBundle& bundle, const SrrParams& params) {
    check_params(bundle, params);
    Vec logits(bundle.slot_count());
    for (std::size_t s = 0; s < bundle.slot_count(); ++s) {
        const Vec& feature = s == 0 ? bundle.text : bundle.fine[s - 1];
        logits[s] = linear(relu(linear(feature, params.w1, params.b1)), params.w2, params.b2)[0];
    }
    return softmax(logits);
}

Complementarity complementarity(const SemanticBundle& bundle) {
    bundle.validate();
    Complementarity out;
    out.beta = Vec(bundle.fine.size());
    for (std::size_t m = 0; m < bundle.fine.size(); ++m) {
        const CosineResult c = cosine(bundle.text, bundle.fine[m]);
        out.degenerate = out.degenerate || c.degenerate;
        out.beta[m] = c.value;
        out.enhanced.push_back(scaled(bundle.fine[m], c.value));
    }
    return out;
}

Vec fuse_comp(const Vec& alpha, const SemanticBundle& bundle, std::span<const Vec> enhanced) {
    if (alpha.dim() != bundle.slot_count() || enhanced.size() != bundle.fine.size()) {
        throw std::invalid_argument("fuse_comp: expected " + std::to_string(bundle.slot_count()) +
                                    " importance scores and " + std::to_string(bundle.fine.size()) +
                                    " enhanced features");
    }
    Vec out(2 * bundle.dim());
    for (std::size_t m = 0; m < bundle.fine.size(); ++m) {
        const Vec joined = concat(bundle.text, enhanced[m]);
        const double w = alpha[m + 1];
        for (std::size_t i = 0; i < out.dim(); ++i) {
            out[i] += w * joined[i];
        }
    }
    return out;
}

Inconsistency inconsistency(const SemanticBundle& bundle) {
    bundle.validate();
    Inconsistency out;
    out.gamma = Vec(bundle.fine.size());
    out.penalty = Vec(bundle.dim());
    for (std::size_t m = 0; m < bundle.fine.size(); ++m) {
        Vec diff = sub(bundle.text, bundle.fine[m]);
        out.gamma[m] = mse(bundle.text, bundle.fine[m]);
        out.penalty = add(out.penalty, scaled(diff, out.gamma[m]));
        out.diffs.push_back(std::move(diff));
    }
    return out;
}

Vec lift_penalty(const Vec& penalty) { return concat(penalty, Vec(penalty.dim())); }

Vec classify(const Vec& comp, const Vec& incons, const SrrParams& params) {
    if (comp.dim() != 2 * incons.dim()) {
        throw std::invalid_argument("classify: fused dim " + std::to_string(comp.dim()) +
                                    " is not twice the penalty dim " + std::to_string(incons.dim()));
    }
    return linear(sub(comp, lift_penalty(incons)), params.w_cls, params.b_cls);
}

SrrParamVars SrrParamVars::record(ad::Tape& tape, const SrrParams& p, bool trainable) {
    const auto leaf = [&](const auto& t) { return trainable ? tape.variable(t) : tape.constant(t); };
    return {leaf(p.w1), leaf(p.b1), leaf(p.w2), leaf(p.b2), leaf(p.w_cls), leaf(p.b_cls)};
}

SrrParams SrrParamVars::grads() const {
    return {w1.grad_mat(), b1.grad_vec(), w2.grad_mat(), b2.grad_vec(), w_cls.grad_mat(), b_cls.grad_vec()};
}

SrrGraph build_graph(ad::Tape& tape, const SrrParamVars& p, const SemanticBundle& bundle,
                     const Relations& relations) {
    bundle.validate();
    const std::size_t d = bundle.dim();
    const std::size_t fine = bundle.fine.size();
    if (p.w1.cols() != d || p.w_cls.cols() != 2 * d) {
        throw std::invalid_argument("srr: parameters expect dim " + std::to_string(p.w1.cols()) +
                                    ", bundle has dim " + std::to_string(d));
    }
    SrrGraph g;
    const ad::Var text = tape.constant(bundle.text);
    std::vector<ad::Var> feats;
    feats.reserve(fine);
    for (const Vec& f : bundle.fine) {
        feats.push_back(tape.constant(f));
    }

    if (relations.importance) {
        std::vector<ad::Var> logits;
        logits.reserve(fine + 1);
        logits.push_back(ad::linear(ad::relu(ad::linear(text, p.w1, p.b1)), p.w2, p.b2));
        for (const ad::Var& f : feats) {
            logits.push_back(ad::linear(ad::relu(ad::linear(f, p.w1, p.b1)), p.w2, p.b2));
        }
        g.alpha = ad::softmax(ad::stack(logits));
    }

    g.beta = Vec(fine);
    std::vector<ad::Var> terms;
    terms.reserve(fine);
    for (std::size_t m = 0; m < fine; ++m) {
        ad::Var enhanced = feats[m];
        if (relations.complementarity) {
            const CosineResult c = cosine(bundle.text, bundle.fine[m]);
            g.degenerate_cosine = g.degenerate_cosine || c.degenerate;
            g.beta[m] = c.value;
            enhanced = ad::scale(feats[m], c.value);
        } else {
            g.beta[m] = 1.0;
        }
        const ad::Var joined = ad::concat(text, enhanced);
        terms.push_back(relations.importance ? ad::scale(joined, ad::element(g.alpha, m + 1))
                                             : ad::scale(joined, 1.0 / static_cast<double>(fine)));
    }
    g.comp = terms.front();
    for (std::size_t m = 1; m < fine; ++m) {
        g.comp = ad::add(g.comp, terms[m]);
    }

    g.gamma = Vec(fine);
    ad::Var fused = g.comp;
    if (relations.inconsistency) {
        Vec penalty(d);
        for (std::size_t m = 0; m < fine; ++m) {
            g.gamma[m] = mse(bundle.text, bundle.fine[m]);
            const Vec diff = sub(bundle.text, bundle.fine[m]);
            for (std::size_t i = 0; i < d; ++i) {
                penalty[i] += g.gamma[m] * diff[i];
            }
        }
        g.incons = tape.constant(penalty);
        fused = ad::sub(g.comp, ad::zero_pad(g.incons, 0, d));
    }
    g.logits = ad::linear(fused, p.w_cls, p.b_cls);
    return g;
}

SrrOutput forward(const SemanticBundle& bundle, const SrrParams& params, const Relations& relations) {
    check_params(bundle, params);
    ad::Tape tape;
    const SrrParamVars vars = SrrParamVars::record(tape, params, false);
    const SrrGraph g = build_graph(tape, vars, bundle, relations);
    SrrOutput out;
    if (relations.importance) {
        out.alpha = g.alpha.value_vec();
    }
    out.beta = g.beta;
    out.gamma = g.gamma;
    out.comp = g.comp.value_vec();
    out.incons = relations.inconsistency ? g.incons.value_vec() : Vec(bundle.dim());
    out.logits = g.logits.value_vec();
    out.degenerate_cosine = g.degenerate_cosine;
    return out;
}

SrrLoss srr_loss(std::span<const Example> batch, const SrrParams& params, const LossOptions& options) {
    if (batch.empty()) {
        throw std::invalid_argument("srr_loss: empty batch");
    }
    if (options.lambda < 0.0) {
        throw std::invalid_argument("srr_loss: lambda must be non-negative");
    }
    std::size_t ranked = 0;
    for (const Example& ex : batch) {
        ranked += ex.target != nullptr ? 1 : 0;
    }
    const bool use_rank = options.lambda > 0.0 && options.relations.importance && ranked > 0;

    SrrLoss out;
    out.grad = SrrParams::zeros_like(params);
    out.ranked = ranked;
    const double n = static_cast<double>(batch.size());
    ad::Tape tape;
    for (const Example& ex : batch) {
        check_params(*ex.bundle, params);
        tape.clear();
        const SrrParamVars vars = SrrParamVars::record(tape, params, true);
        const SrrGraph g = build_graph(tape, vars, *ex.bundle, options.relations);
        const ad::Var ce = ad::cross_entropy(g.logits, ex.label);
        out.classification += ce.scalar() / n;
        ad::Var total = ad::scale(ce, 1.0 / n);
        if (use_rank && ex.target != nullptr) {
            const ndcg::NdcgTerm term = ndcg::neural_ndcg_loss(g.alpha, ex.target->relevance().span(),
                                                               options.tau, options.sinkhorn);
            const double slots = static_cast<double>(ex.bundle->slot_count());
            const double weight = options.lambda / (slots * static_cast<double>(ranked));
            out.ranking += term.loss.scalar() / static_cast<double>(ranked);
            out.loss += weight * term.loss.scalar();
            total = ad::add(total, ad::scale(term.loss, weight));
        }
        tape.backward(total);
        const SrrParams g_local = vars.grads();
        auto dst = out.grad.tensors();
        const auto src = g_local.tensors();
        for (std::size_t t = 0; t < dst.size(); ++t) {
            for (std::size_t i = 0; i < dst[t].size(); ++i) {
                dst[t][i] += src[t][i];
            }
        }
    }
    out.loss += out.classification;
    return out;
}

} // namespace lgsrr::srr
