#pragma once

#include <cstddef>
#include <functional>
#include <span>

#include "lgsrr/core/tensor.hpp"

namespace lgsrr {

// Value-only primitives. Each throws std::invalid_argument on shape
// mismatch, naming both dimensions.

Vec linear(const Vec& x, const Mat& w, const Vec& b);
Vec relu(const Vec& x);
Vec softmax(const Vec& x);
double log_sum_exp(std::span<const double> x);
Vec mean_pool(std::span<const Vec> tokens);

double dot(const Vec& a, const Vec& b);
double norm(const Vec& a);

struct CosineResult {
    double value = 0.0;
    /// Set when either input has zero norm; value is then 0.
    bool degenerate = false;
};

CosineResult cosine(const Vec& a, const Vec& b);
double mse(const Vec& a, const Vec& b);
double cross_entropy(const Vec& logits, std::size_t label);

Vec concat(const Vec& a, const Vec& b);
Vec add(const Vec& a, const Vec& b);
Vec sub(const Vec& a, const Vec& b);
Vec scaled(const Vec& a, double s);

void require_same_dim(const Vec& a, const Vec& b, const char* what);

} // namespace lgsrr
