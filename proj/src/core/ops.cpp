#include "lgsrr/core/ops.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace lgsrr {

void require_same_dim(const Vec& a, const Vec& b, const char* what) {
    if (a.dim() != b.dim()) {
        throw std::invalid_argument(std::string(what) + ": dimension mismatch " +
                                    std::to_string(a.dim()) + " vs " + std::to_string(b.dim()));
    }
}

Vec linear(const Vec& x, const Mat& w, const Vec& b) {
    if (w.cols() != x.dim()) {
        throw std::invalid_argument("linear: weight " + describe_dim(w.rows(), w.cols()) +
                                    " cannot multiply input of dim " + std::to_string(x.dim()));
    }
    if (b.dim() != w.rows()) {
        throw std::invalid_argument("linear: bias dim " + std::to_string(b.dim()) +
                                    " does not match weight rows " + std::to_string(w.rows()));
    }
    Vec out(w.rows());
    for (std::size_t i = 0; i < w.rows(); ++i) {
        const auto row = w.row(i);
        double acc = b[i];
        for (std::size_t j = 0; j < row.size(); ++j) {
            acc += row[j] * x[j];
        }
        out[i] = acc;
    }
    return out;
}

Vec relu(const Vec& x) {
    Vec out(x.dim());
    for (std::size_t i = 0; i < x.dim(); ++i) {
        out[i] = x[i] > 0.0 ? x[i] : 0.0;
    }
    return out;
}

Vec softmax(const Vec& x) {
    if (x.empty()) {
        throw std::invalid_argument("softmax: empty input");
    }
    const double m = *std::max_element(x.begin(), x.end());
    Vec out(x.dim());
    double total = 0.0;
    for (std::size_t i = 0; i < x.dim(); ++i) {
        out[i] = std::exp(x[i] - m);
        total += out[i];
    }
    for (double& v : out) {
        v /= total;
    }
    return out;
}

double log_sum_exp(std::span<const double> x) {
    if (x.empty()) {
        throw std::invalid_argument("log_sum_exp: empty input");
    }
    const double m = *std::max_element(x.begin(), x.end());
    double total = 0.0;
    for (double v : x) {
        total += std::exp(v - m);
    }
    return m + std::log(total);
}

Vec mean_pool(std::span<const Vec> tokens) {
    if (tokens.empty()) {
        throw std::invalid_argument("mean_pool: empty token list");
    }
    Vec out(tokens.front().dim());
    for (const auto& t : tokens) {
        require_same_dim(out, t, "mean_pool");
        for (std::size_t i = 0; i < t.dim(); ++i) {
            out[i] += t[i];
        }
    }
    const double n = static_cast<double>(tokens.size());
    for (double& v : out) {
        v /= n;
    }
    return out;
}

double dot(const Vec& a, const Vec& b) {
    require_same_dim(a, b, "dot");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.dim(); ++i) {
        acc += a[i] * b[i];
    }
    return acc;
}

double norm(const Vec& a) { return std::sqrt(dot(a, a)); }

CosineResult cosine(const Vec& a, const Vec& b) {
    require_same_dim(a, b, "cosine");
    const double na = norm(a);
    const double nb = norm(b);
    if (na == 0.0 || nb == 0.0) {
        return {0.0, true};
    }
    return {std::clamp(dot(a, b) / (na * nb), -1.0, 1.0), false};
}

double mse(const Vec& a, const Vec& b) {
    require_same_dim(a, b, "mse");
    if (a.empty()) {
        throw std::invalid_argument("mse: empty input");
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < a.dim(); ++i) {
        const double diff = a[i] - b[i];
        acc += diff * diff;
    }
    return acc / static_cast<double>(a.dim());
}

double cross_entropy(const Vec& logits, std::size_t label) {
    if (label >= logits.dim()) {
        throw std::invalid_argument("cross_entropy: label " + std::to_string(label) +
                                    " out of range for " + std::to_string(logits.dim()) +
                                    " classes");
    }
    return log_sum_exp(logits.span()) - logits[label];
}

Vec concat(const Vec& a, const Vec& b) {
    std::vector<double> out(a.values());
    out.insert(out.end(), b.begin(), b.end());
    return Vec(std::move(out));
}

Vec add(const Vec& a, const Vec& b) {
    require_same_dim(a, b, "add");
    Vec out(a.dim());
    for (std::size_t i = 0; i < a.dim(); ++i) {
        out[i] = a[i] + b[i];
    }
    return out;
}

Vec sub(const Vec& a, const Vec& b) {
    require_same_dim(a, b, "sub");
    Vec out(a.dim());
    for (std::size_t i = 0; i < a.dim(); ++i) {
        out[i] = a[i] - b[i];
    }
    return out;
}

Vec scaled(const Vec& a, double s) {
    Vec out(a.dim());
    for (std::size_t i = 0; i < a.dim(); ++i) {
        out[i] = a[i] * s;
    }
    return out;
}

} // namespace lgsrr
