#include "lgsrr/srr/classic.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

#include "lgsrr/core/autodiff.hpp"

namespace lgsrr::srr {

ClassicMode parse_classic_mode(std::string_view name) {
    if (name == "or" || name == "Or") return ClassicMode::Or;
    if (name == "and" || name == "And") return ClassicMode::And;
    if (name == "not" || name == "Not") return ClassicMode::Not;
    if (name == "combination" || name == "Combination") return ClassicMode::Combination;
    throw std::invalid_argument("unknown classic relation mode '" + std::string(name) +
                                "' (expected or, and, not, combination)");
}

std::string_view to_string(ClassicMode mode) {
    switch (mode) {
    case ClassicMode::Or: return "or";
    case ClassicMode::And: return "and";
    case ClassicMode::Not: return "not";
    case ClassicMode::Combination: return "combination";
    }
    return "?";
}

ClassicParams ClassicParams::init(ClassicMode mode, std::size_t dim, std::size_t fine_slots,
                                  std::size_t classes, std::uint64_t seed) {
    if (dim == 0 || fine_slots == 0 || classes == 0) {
        throw std::invalid_argument("classic params: dim, slots and classes must be positive");
    }
    std::mt19937_64 rng(seed);
    const auto fill = [&rng](std::span<double> values, std::size_t fan_in) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (double& v : values) {
            v = dist(rng);
        }
    };
    ClassicParams p;
    p.mode = mode;
    if (mode == ClassicMode::Not || mode == ClassicMode::Combination) {
        p.w_not = Mat(dim, fine_slots * dim);
        p.b_not = Vec(dim);
        fill(p.w_not.span(), fine_slots * dim);
        fill(p.b_not.span(), fine_slots * dim);
    }
    if (mode == ClassicMode::Combination) {
        p.w_comb = Mat(dim, 3 * dim);
        p.b_comb = Vec(dim);
        fill(p.w_comb.span(), 3 * dim);
        fill(p.b_comb.span(), 3 * dim);
    }
    p.w_cls = Mat(classes, dim);
    p.b_cls = Vec(classes);
    fill(p.w_cls.span(), dim);
    fill(p.b_cls.span(), dim);
    return p;
}

std::vector<std::span<double>> ClassicParams::tensors() {
    return {w_not.span(), b_not.span(), w_comb.span(), b_comb.span(), w_cls.span(), b_cls.span()};
}

std::vector<std::span<const double>> ClassicParams::tensors() const {
    return {w_not.span(), b_not.span(), w_comb.span(), b_comb.span(), w_cls.span(), b_cls.span()};
}

ClassicParamVars ClassicParamVars::record(ad::Tape& tape, const ClassicParams& p, bool trainable) {
    const auto leaf = [&](const auto& t) { return trainable ? tape.variable(t) : tape.constant(t); };
    return {leaf(p.w_not), leaf(p.b_not), leaf(p.w_comb), leaf(p.b_comb), leaf(p.w_cls), leaf(p.b_cls)};
}

ClassicGraph build_classic_graph(ad::Tape& tape, const ClassicParams& params, const ClassicParamVars& vars,
                                 const SemanticBundle& bundle) {
    bundle.validate();
    const std::size_t d = bundle.dim();
    if (params.w_cls.cols() != d) {
        throw std::invalid_argument("classic: classifier expects dim " + std::to_string(params.w_cls.cols()) +
                                    ", bundle has dim " + std::to_string(d));
    }
    const ad::Var text = tape.constant(bundle.text);
    std::vector<ad::Var> feats;
    for (const Vec& f : bundle.fine) {
        feats.push_back(tape.constant(f));
    }

    const auto or_feature = [&] {
        ad::Var acc = text;
        for (const ad::Var& f : feats) {
            acc = ad::add(acc, f);
        }
        return acc;
    };
    const auto and_feature = [&] {
        ad::Var acc = text;
        for (const ad::Var& f : feats) {
            acc = ad::mul(acc, f);
        }
        return acc;
    };
    const auto not_feature = [&] {
        std::vector<ad::Var> diffs;
        for (const ad::Var& f : feats) {
            diffs.push_back(ad::sub(text, f));
        }
        return ad::relu(ad::linear(ad::concat(diffs), vars.w_not, vars.b_not));
    };

    ClassicGraph g;
    switch (params.mode) {
    case ClassicMode::Or:
        g.feature = or_feature();
        break;
    case ClassicMode::And:
        g.feature = and_feature();
        break;
    case ClassicMode::Not:
        g.feature = not_feature();
        break;
    case ClassicMode::Combination: {
        const ad::Var parts[] = {or_feature(), and_feature(), not_feature()};
        g.feature = ad::relu(ad::linear(ad::concat(std::span<const ad::Var>(parts)), vars.w_comb, vars.b_comb));
        break;
    }
    }
    g.logits = ad::linear(g.feature, vars.w_cls, vars.b_cls);
    return g;
}

namespace {

ClassicGraph run(ad::Tape& tape, const SemanticBundle& bundle, ClassicMode mode, const ClassicParams& params) {
    if (mode != params.mode) {
        throw std::invalid_argument("classic_fuse: parameters were built for mode '" +
                                    std::string(to_string(params.mode)) + "', requested '" +
                                    std::string(to_string(mode)) + "'");
    }
    const ClassicParamVars vars = ClassicParamVars::record(tape, params, false);
    return build_classic_graph(tape, params, vars, bundle);
}

} // namespace

Vec classic_fuse(const SemanticBundle& bundle, ClassicMode mode, const ClassicParams& params) {
    ad::Tape tape;
    return run(tape, bundle, mode, params).logits.value_vec();
}

Vec classic_feature(const SemanticBundle& bundle, ClassicMode mode, const ClassicParams& params) {
    ad::Tape tape;
    return run(tape, bundle, mode, params).feature.value_vec();
}

} // namespace lgsrr::srr
