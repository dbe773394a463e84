#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "lgsrr/core/tape.hpp"
#include "lgsrr/core/tensor.hpp"
#include "lgsrr/srr/srr.hpp"

namespace lgsrr::srr {

/// Feature-level baselines built from the three classic logical relations.
///   Or          sum of all features
///   And         Hadamard product of all features
///   Not         concat of (T - M) over fine slots -> ReLU(linear) -> d
///   Combination concat(Or, And, Not) -> ReLU(linear) -> d
/// Each is followed by an affine classifier.
enum class ClassicMode { Or, And, Not, Combination };

ClassicMode parse_classic_mode(std::string_view name);
std::string_view to_string(ClassicMode mode);

struct ClassicParams {
    ClassicMode mode = ClassicMode::Or;
    Mat w_not;   // d x (fine * d); Not and Combination
    Vec b_not;
    Mat w_comb;  // d x 3d; Combination only
    Vec b_comb;
    Mat w_cls;   // K x d
    Vec b_cls;

    static ClassicParams init(ClassicMode mode, std::size_t dim, std::size_t fine_slots,
                              std::size_t classes, std::uint64_t seed);

    std::vector<std::span<double>> tensors();
    std::vector<std::span<const double>> tensors() const;
};

struct ClassicParamVars {
    ad::Var w_not, b_not, w_comb, b_comb, w_cls, b_cls;
    static ClassicParamVars record(ad::Tape& tape, const ClassicParams& params, bool trainable);
};

/// Returns the pre-classifier relation feature (d) and the logits (K).
struct ClassicGraph {
    ad::Var feature;
    ad::Var logits;
};

ClassicGraph build_classic_graph(ad::Tape& tape, const ClassicParams& params, const ClassicParamVars& vars,
                                 const SemanticBundle& bundle);

Vec classic_fuse(const SemanticBundle& bundle, ClassicMode mode, const ClassicParams& params);
Vec classic_feature(const SemanticBundle& bundle, ClassicMode mode, const ClassicParams& params);

} // namespace lgsrr::srr
