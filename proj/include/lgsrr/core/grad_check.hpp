#pragma once

#include <functional>

#include "lgsrr/core/tape.hpp"
#include "lgsrr/core/tensor.hpp"

namespace lgsrr {

/// Builds a scalar loss on `tape` from the input node `x`.
using ScalarGraph = std::function<ad::Var(ad::Tape& tape, ad::Var x)>;

struct GradCheckResult {
    double max_relative_error = 0.0;
    std::size_t worst_index = 0;
    Vec analytic;
    Vec numeric;
};

/// Compares tape gradients against central differences. The error per
/// coordinate is |analytic - numeric| / max(1, |analytic|).
GradCheckResult grad_check_detailed(const ScalarGraph& f, const Vec& x, double eps = 1e-5);

inline double grad_check(const ScalarGraph& f, const Vec& x, double eps = 1e-5) {
    return grad_check_detailed(f, x, eps).max_relative_error;
}

} // namespace lgsrr
