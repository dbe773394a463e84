#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

#include "lgsrr/core/ops.hpp"
#include "lgsrr/data/dataset.hpp"

namespace lgsrr::data {

void validate(const SynthSpec& spec) {
    if (spec.d == 0 || spec.classes == 0) {
        throw std::invalid_argument("synth: d and K must be positive");
    }
    if (spec.n_train == 0 || spec.n_dev == 0 || spec.n_test == 0) {
        throw std::invalid_argument("synth: split sizes must be positive");
    }
    if (!(spec.separation > 0.0)) {
        throw std::invalid_argument("synth: separation must be positive");
    }
    if (!(spec.noise >= 0.0)) {
        throw std::invalid_argument("synth: noise scale must be non-negative");
    }
    if (spec.slots.empty()) {
        throw std::invalid_argument("synth: at least one fine slot is required");
    }
    if (spec.rank1_proportions.size() != spec.slots.size()) {
        throw std::invalid_argument("synth: rank1_proportions must have one entry per slot");
    }
    const double total = std::accumulate(spec.rank1_proportions.begin(), spec.rank1_proportions.end(), 0.0);
    if (!(total > 0.0) || std::any_of(spec.rank1_proportions.begin(), spec.rank1_proportions.end(),
                                      [](double p) { return p < 0.0; })) {
        throw std::invalid_argument("synth: rank1_proportions must be non-negative with a positive sum");
    }
}

namespace {

// Smallest pairwise distance between unit directions below which the class
// means would need an unreasonably large radius.
constexpr double kMinDirectionGap = 0.25;
constexpr int kCandidates = 64;

Vec random_unit(std::size_t d, std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    while (true) {
        Vec v(d);
        for (double& x : v) {
            x = gauss(rng);
        }
        const double n = norm(v);
        if (n > 1e-12) {
            return scaled(v, 1.0 / n);
        }
    }
}

std::vector<Vec> class_means(const SynthSpec& spec, std::mt19937_64& rng) {
    std::vector<Vec> dirs;
    dirs.push_back(random_unit(spec.d, rng));
    double min_gap = 2.0;
    for (std::size_t k = 1; k < spec.classes; ++k) {
        Vec best;
        double best_gap = -1.0;
        for (int c = 0; c < kCandidates; ++c) {
            Vec cand = random_unit(spec.d, rng);
            double gap = 2.0;
            for (const Vec& other : dirs) {
                gap = std::min(gap, norm(sub(cand, other)));
            }
            if (gap > best_gap) {
                best_gap = gap;
                best = std::move(cand);
            }
        }
        min_gap = std::min(min_gap, best_gap);
        dirs.push_back(std::move(best));
    }
    if (spec.classes > 1 && min_gap < kMinDirectionGap) {
        throw std::invalid_argument("synth: cannot place " + std::to_string(spec.classes) +
                                    " class means with separation " + std::to_string(spec.separation) +
                                    " in d=" + std::to_string(spec.d) + "; use a larger d");
    }
    const double radius = spec.classes > 1 ? spec.separation / min_gap : spec.separation;
    for (Vec& v : dirs) {
        v = scaled(v, radius);
    }
    return dirs;
}

Vec noisy(const Vec& centre, double noise, std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Vec out = centre;
    for (double& x : out) {
        x += noise * gauss(rng);
    }
    return out;
}

} // namespace

Dataset synthesize(const SynthSpec& spec) {
    validate(spec);
    std::mt19937_64 rng(spec.seed);
    const std::vector<Vec> means = class_means(spec, rng);
    std::uniform_int_distribution<std::size_t> pick_label(0, spec.classes - 1);
    std::discrete_distribution<std::size_t> pick_slot(spec.rank1_proportions.begin(), spec.rank1_proportions.end());
    const std::size_t fine = spec.slots.size();

    Dataset ds;
    ds.manifest.name = spec.name;
    ds.manifest.d = spec.d;
    ds.manifest.classes = spec.classes;
    ds.manifest.slots = spec.slots;
    for (std::size_t k = 0; k < spec.classes; ++k) {
        ds.manifest.labels.push_back("class_" + std::to_string(k));
    }
    const Vec zero(spec.d);
    const std::size_t sizes[] = {spec.n_train, spec.n_dev, spec.n_test};
    for (Split s : kSplits) {
        auto& records = ds.split(s);
        const std::size_t n = sizes[static_cast<std::size_t>(s)];
        records.reserve(n);
        for (std::size_t i = 0; i < n; ++i) {
            FeatureRecord r;
            char id[32];
            std::snprintf(id, sizeof id, "%s-%05zu", split_name(s), i);
            r.sample_id = id;
            r.label = pick_label(rng);
            const Vec& mu = means[r.label];
            r.features.text = noisy(mu, spec.noise, rng);
            const std::size_t aligned = pick_slot(rng);
            for (std::size_t m = 0; m < fine; ++m) {
                r.features.fine.push_back(m == aligned ? noisy(scaled(mu, spec.signal_gain), spec.noise, rng)
                                                       : noisy(zero, spec.noise, rng));
            }
            // Aligned slot first, the rest by cosine with the class mean.
            std::vector<std::size_t> rest;
            std::vector<double> alignment(fine, 0.0);
            for (std::size_t m = 0; m < fine; ++m) {
                if (m != aligned) {
                    rest.push_back(m);
                    alignment[m] = cosine(r.features.fine[m], mu).value;
                }
            }
            std::stable_sort(rest.begin(), rest.end(),
                             [&](std::size_t a, std::size_t b) { return alignment[a] > alignment[b]; });
            std::vector<std::size_t> order{0, aligned + 1};
            for (std::size_t m : rest) {
                order.push_back(m + 1);
            }
            r.ranking = std::move(order);
            records.push_back(std::move(r));
        }
    }
    ds.manifest.splits = {{"train", spec.n_train}, {"dev", spec.n_dev}, {"test", spec.n_test}};
    return ds;
}

} // namespace lgsrr::data
