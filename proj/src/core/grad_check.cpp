#include "lgsrr/core/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace lgsrr {

namespace {

double evaluate(const ScalarGraph& f, const Vec& x) {
    ad::Tape tape;
    const ad::Var input = tape.constant(x);
    return f(tape, input).scalar();
}

} // namespace

GradCheckResult grad_check_detailed(const ScalarGraph& f, const Vec& x, double eps) {
    GradCheckResult result;
    {
        ad::Tape tape;
        const ad::Var input = tape.variable(x);
        const ad::Var out = f(tape, input);
        tape.backward(out);
        result.analytic = input.grad_vec();
    }
    result.numeric = Vec(x.dim());
    Vec probe = x;
    for (std::size_t i = 0; i < x.dim(); ++i) {
        probe[i] = x[i] + eps;
        const double up = evaluate(f, probe);
        probe[i] = x[i] - eps;
        const double down = evaluate(f, probe);
        probe[i] = x[i];
        result.numeric[i] = (up - down) / (2.0 * eps);

        const double a = result.analytic[i];
        const double err = std::abs(a - result.numeric[i]) / std::max(1.0, std::abs(a));
        if (err > result.max_relative_error) {
            result.max_relative_error = err;
            result.worst_index = i;
        }
    }
    return result;
}

} // namespace lgsrr
