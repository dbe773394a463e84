#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "doctest.h"
#include "lgsrr/core/grad_check.hpp"
#include "lgsrr/ndcg/neural_ndcg.hpp"

using namespace lgsrr;
using namespace lgsrr::ndcg;

namespace {

// direct evaluation of the row-softmax formula, extended precision
std::vector<std::vector<long double>> formula_p(const Vec& s, double tau) {
    const std::size_t n = s.dim();
    std::vector<std::vector<long double>> p(n, std::vector<long double>(n));
    for (std::size_t u = 0; u < n; ++u) {
        std::vector<long double> logits(n);
        for (std::size_t v = 0; v < n; ++v) {
            long double a = 0;
            for (std::size_t w = 0; w < n; ++w) a += std::fabs(static_cast<long double>(s[v]) - s[w]);
            logits[v] = ((static_cast<long double>(n) + 1 - 2 * (u + 1)) * s[v] - a) / tau;
        }
        const long double m = *std::max_element(logits.begin(), logits.end());
        long double z = 0;
        for (auto l : logits) z += std::exp(l - m);
        for (std::size_t v = 0; v < n; ++v) p[u][v] = std::exp(logits[v] - m) / z;
    }
    return p;
}

Mat hard_sort(const Vec& s) {
    std::vector<std::size_t> idx(s.dim());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return s[a] > s[b]; });
    Mat m(s.dim(), s.dim());
    for (std::size_t u = 0; u < idx.size(); ++u) m(u, idx[u]) = 1.0;
    return m;
}

// exact NDCG of the ordering induced by scores; ideal found by enumerating permutations
double exact_ndcg(const Vec& s, const std::vector<double>& rel) {
    const std::size_t n = s.dim();
    const Mat h = hard_sort(s);
    double dcg = 0;
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t v = 0; v < n; ++v) {
            if (h(j, v) == 1.0) dcg += (std::pow(2.0, rel[v]) - 1.0) / std::log2(j + 2.0);
        }
    }
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    double best = 0;
    do {
        double d = 0;
        for (std::size_t j = 0; j < n; ++j) d += (std::pow(2.0, rel[perm[j]]) - 1.0) / std::log2(j + 2.0);
        best = std::max(best, d);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return dcg / best;
}

double max_abs_diff(const Mat& a, const Mat& b) {
    double m = 0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.span()[i] - b.span()[i]));
    return m;
}

void check_rows(const Mat& p, double tol) {
    for (std::size_t r = 0; r < p.rows(); ++r) {
        double s = 0;
        for (std::size_t c = 0; c < p.cols(); ++c) {
            s += p(r, c);
            CHECK(p(r, c) >= 0.0);
            CHECK(p(r, c) <= 1.0);
        }
        CHECK(std::abs(s - 1.0) <= tol);
    }
}

void check_cols(const Mat& p, double tol) {
    for (std::size_t c = 0; c < p.cols(); ++c) {
        double s = 0;
        for (std::size_t r = 0; r < p.rows(); ++r) s += p(r, c);
        CHECK(std::abs(s - 1.0) <= tol);
    }
}

} // namespace

TEST_CASE("gain and discount") {
    CHECK(gain(0) == 0.0);
    CHECK(gain(1) == 1.0);
    CHECK(gain(2) == 3.0);
    CHECK(discount(1) == 1.0);
    CHECK(discount(3) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(discount(7) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK_THROWS_AS(discount(0), std::invalid_argument);
    const std::vector<double> rel{0, 3, 1, 2};
    CHECK(ideal_dcg(rel) == doctest::Approx(7.0 + 3.0 / std::log2(3.0) + 1.0 / 2.0));
}

TEST_CASE("soft_permutation examples") {
    const SoftPermutation a = soft_permutation({2, 1}, 1e-3);
    CHECK(max_abs_diff(a.p, Mat{{1, 0}, {0, 1}}) <= 1e-6);
    const SoftPermutation b = soft_permutation({1, 3}, 1e-3);
    CHECK(max_abs_diff(b.p, Mat{{0, 1}, {1, 0}}) <= 1e-6);
    const SoftPermutation c = soft_permutation({0.7, 0.7, 0.7, 0.7, 0.7}, 0.5);
    for (double v : c.p.span()) CHECK(v == doctest::Approx(0.2).epsilon(1e-14));
    CHECK_FALSE(a.sinkhorn_applied);
    CHECK_THROWS_AS(soft_permutation({1, 2}, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(soft_permutation({1, 2}, -1.0), std::invalid_argument);
}

TEST_CASE("soft_permutation matches formula, shift invariance, tau limit") {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> u(-2, 2);
    for (int t = 0; t < 30; ++t) {
        Vec s(2 + t % 6);
        for (auto& x : s) x = u(rng);
        const double tau = std::vector<double>{1.0, 0.3, 0.05}[t % 3];
        const SoftPermutation p = soft_permutation(s, tau);
        const auto ref = formula_p(s, tau);
        for (std::size_t r = 0; r < s.dim(); ++r) {
            for (std::size_t c = 0; c < s.dim(); ++c) {
                CHECK(std::abs(p.p(r, c) - static_cast<double>(ref[r][c])) <= 1e-12);
            }
        }
        check_rows(p.p, 1e-9);

        Vec shifted = s;
        const double k = u(rng) * 10;
        for (auto& x : shifted) x += k;
        CHECK(max_abs_diff(soft_permutation(shifted, tau).p, p.p) <= 1e-12);

        const Mat hard = hard_sort(s);
        double prev = 1e9;
        for (double tt : {1.0, 0.1, 1e-3}) {
            const double d = max_abs_diff(soft_permutation(s, tt).p, hard);
            CHECK(d <= prev + 1e-15);
            prev = d;
        }
    }
}

TEST_CASE("sinkhorn") {
    SoftPermutation uniform;
    uniform.p = Mat(3, 3, 1.0 / 3.0);
    const SoftPermutation fixed = sinkhorn(uniform, 30, 1e-6);
    CHECK(max_abs_diff(fixed.p, uniform.p) <= 1e-12);
    CHECK(fixed.sinkhorn_applied);
    CHECK(fixed.converged);

    SoftPermutation skew;
    skew.p = Mat{{0.9, 0.1}, {0.9, 0.1}};
    const SoftPermutation balanced = sinkhorn(skew, 1000, 1e-9);
    CHECK(balanced.converged);
    check_cols(balanced.p, 1e-9);
    check_rows(balanced.p, 1e-9);

    // independent loop oracle (plain space)
    Mat ref = skew.p;
    for (int it = 0; it < 1000; ++it) {
        for (std::size_t c = 0; c < 2; ++c) {
            const double s = ref(0, c) + ref(1, c);
            ref(0, c) /= s;
            ref(1, c) /= s;
        }
        for (std::size_t r = 0; r < 2; ++r) {
            const double s = ref(r, 0) + ref(r, 1);
            ref(r, 0) /= s;
            ref(r, 1) /= s;
        }
    }
    CHECK(max_abs_diff(ref, balanced.p) <= 1e-6);

    SoftPermutation bad;
    bad.p = Mat{{1, 0}, {0, 1}};
    CHECK_THROWS_AS(sinkhorn(bad, 10, 1e-6), std::invalid_argument);

    std::mt19937_64 rng(37);
    std::uniform_real_distribution<double> u(-3, 3);
    for (int t = 0; t < 40; ++t) {
        Vec s(2 + t % 7);
        for (auto& x : s) x = u(rng);
        const SoftPermutation q = sinkhorn(soft_permutation(s, 1.0), 200, 1e-6);
        check_rows(q.p, 1e-9);
        if (q.converged) check_cols(q.p, 1e-6);
    }
}

TEST_CASE("RankingTarget") {
    const RankingTarget t = RankingTarget::from_order({0, 3, 1, 2});
    CHECK(t.relevance() == Vec{3, 1, 0, 2});
    CHECK(t.position_of(3) == 2);
    const std::vector<std::size_t> rest{2, 3, 1};
    const RankingTarget p = RankingTarget::pinned_first(0, rest);
    CHECK(p.order() == std::vector<std::size_t>{0, 2, 3, 1});
    CHECK(p.position_of(0) == 1);
    for (std::size_t k = 1; k < p.size(); ++k) {
        CHECK(p.relevance()[p.order()[k - 1]] > p.relevance()[p.order()[k]]);
    }
    CHECK_THROWS_AS(RankingTarget::from_order({0, 0, 1}), std::invalid_argument);
    CHECK_THROWS_AS(RankingTarget::from_order({0, 3}), std::invalid_argument);
    CHECK_THROWS_AS(RankingTarget::from_order({}), std::invalid_argument);
}

TEST_CASE("neural_ndcg_loss vs brute force") {
    const RankingTarget target = RankingTarget::from_order({0, 3, 1, 2});
    const Vec ordered{4, 2, 1, 3};
    CHECK(neural_ndcg_loss(ordered, target, 1e-3).loss == doctest::Approx(-1.0).epsilon(1e-3));

    for (std::size_t n = 1; n <= 5; ++n) {
        std::vector<double> rel(n);
        for (std::size_t i = 0; i < n; ++i) rel[i] = static_cast<double>((i * 2 + 1) % n);
        if (n == 1) rel[0] = 1;
        std::vector<double> base(n);
        for (std::size_t i = 0; i < n; ++i) base[i] = static_cast<double>(i);
        std::sort(base.begin(), base.end());
        do {
            const Vec s(base);
            const NdcgLoss l = neural_ndcg_loss(s, rel, 1e-3);
            CHECK(std::abs(-l.loss - exact_ndcg(s, rel)) <= 1e-3);
            CHECK(-l.loss >= -1e-12);
            CHECK(-l.loss <= 1.0 + 1e-6);
        } while (std::next_permutation(base.begin(), base.end()));
    }
}

TEST_CASE("neural_ndcg_loss degenerate target") {
    const std::vector<double> rel{1, 1, 1, 1};
    const NdcgLoss l = neural_ndcg_loss(Vec{0.3, -0.2, 1.1, 0.4}, rel, 1.0);
    CHECK(l.degenerate);
    for (double g : l.grad) CHECK(std::abs(g) <= 1e-9);
    CHECK_THROWS_AS(neural_ndcg_loss(Vec{1, 2}, std::vector<double>{1, 0, 2}, 1.0), std::invalid_argument);
}

TEST_CASE("neural_ndcg_loss gradient") {
    std::mt19937_64 rng(41);
    std::uniform_real_distribution<double> u(-1.5, 1.5);
    double worst = 0;
    for (int t = 0; t < 30; ++t) {
        const std::size_t n = 2 + t % 4;
        Vec s(n);
        for (auto& x : s) x = u(rng);
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng);
        const RankingTarget target = RankingTarget::from_order(order);
        const std::vector<double> rel = target.relevance().values();
        const double tau = t % 2 ? 1.0 : 0.5;
        const auto f = [&](ad::Tape&, ad::Var v) { return neural_ndcg_loss(v, rel, tau).loss; };
        worst = std::max(worst, grad_check(f, s, 1e-6));
        const NdcgLoss l = neural_ndcg_loss(s, target, tau);
        const GradCheckResult r = grad_check_detailed(f, s, 1e-6);
        for (std::size_t i = 0; i < n; ++i) CHECK(l.grad[i] == doctest::Approx(r.analytic[i]).epsilon(1e-12));
    }
    CHECK(worst <= 1e-4);
}
