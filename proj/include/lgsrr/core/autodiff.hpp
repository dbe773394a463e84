#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "lgsrr/core/tape.hpp"

namespace lgsrr::ad {

// Differentiable counterparts of the value primitives. Vectors are nodes with
// cols == 1; matrices are row-major nodes. All inputs must live on one tape.

Var linear(Var x, Var w, Var b);
Var relu(Var x);
Var softmax(Var x);
Var log_softmax(Var x);
Var exp(Var x);
Var mean_pool(std::span<const Var> tokens);

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
/// Vector times a 1-element node.
Var scale(Var v, Var s);
Var scale(Var v, double s);
Var concat(std::span<const Var> parts);
Var concat(Var a, Var b);
/// Pads `v` with `before` leading and `after` trailing zeros.
Var zero_pad(Var v, std::size_t before, std::size_t after);
/// Collects 1-element nodes into a vector.
Var stack(std::span<const Var> scalars);
Var element(Var v, std::size_t i);

Var sum(Var x);
Var dot(Var a, Var b);
/// Dot product with a constant weight vector.
Var weighted_sum(Var x, std::span<const double> weights);
/// Cosine similarity clamped to [-1, 1]; a zero-norm input yields a constant 0.
Var cosine(Var a, Var b, bool* degenerate = nullptr);
Var mse(Var a, Var b);
Var cross_entropy(Var logits, std::size_t label);

/// 2^x - 1 elementwise.
Var exp2_minus_one(Var x);

/// Matrix (rows x cols) times a constant vector of length cols.
Var matvec_const(Var m, std::span<const double> v);
/// Per-row log-normalisation: out[r][c] = m[r][c] - logsumexp_c m[r][.].
Var normalize_rows_log(Var m);
/// Per-column log-normalisation.
Var normalize_cols_log(Var m);

} // namespace lgsrr::ad
