#include "lgsrr/train/metrics.hpp"

#include <sstream>
#include <stdexcept>

namespace lgsrr::train {

MetricsReport compute_metrics(std::span<const std::size_t> truth, std::span<const std::size_t> predicted,
                              std::size_t classes) {
    if (truth.empty()) {
        throw std::invalid_argument("metrics: empty split");
    }
    if (truth.size() != predicted.size()) {
        throw std::invalid_argument("metrics: " + std::to_string(truth.size()) + " labels but " +
                                    std::to_string(predicted.size()) + " predictions");
    }
    MetricsReport r;
    r.total = truth.size();
    r.confusion.assign(classes, std::vector<std::size_t>(classes, 0));
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (truth[i] >= classes || predicted[i] >= classes) {
            throw std::invalid_argument("metrics: class index out of range at sample " + std::to_string(i));
        }
        ++r.confusion[truth[i]][predicted[i]];
    }
    r.support.assign(classes, 0);
    std::vector<std::size_t> predicted_count(classes, 0);
    std::size_t correct = 0;
    for (std::size_t t = 0; t < classes; ++t) {
        for (std::size_t p = 0; p < classes; ++p) {
            r.support[t] += r.confusion[t][p];
            predicted_count[p] += r.confusion[t][p];
        }
        correct += r.confusion[t][t];
    }
    const double n = static_cast<double>(r.total);
    r.acc = 100.0 * static_cast<double>(correct) / n;
    r.precision.assign(classes, 0.0);
    r.recall.assign(classes, 0.0);
    r.f1.assign(classes, 0.0);
    std::size_t absent = 0;
    for (std::size_t c = 0; c < classes; ++c) {
        const double tp = static_cast<double>(r.confusion[c][c]);
        const double p = predicted_count[c] > 0 ? tp / static_cast<double>(predicted_count[c]) : 0.0;
        const double rec = r.support[c] > 0 ? tp / static_cast<double>(r.support[c]) : 0.0;
        const double f = (p + rec) > 0.0 ? 2.0 * p * rec / (p + rec) : 0.0;
        r.precision[c] = 100.0 * p;
        r.recall[c] = 100.0 * rec;
        r.f1[c] = 100.0 * f;
        absent += r.support[c] == 0 ? 1 : 0;
        r.macro_p += r.precision[c];
        r.macro_r += r.recall[c];
        r.macro_f1 += r.f1[c];
        const double w = static_cast<double>(r.support[c]);
        r.weighted_p += w * r.precision[c];
        r.weighted_f1 += w * r.f1[c];
    }
    const double k = static_cast<double>(classes);
    r.macro_p /= k;
    r.macro_r /= k;
    r.macro_f1 /= k;
    r.weighted_p /= n;
    r.weighted_f1 /= n;
    if (absent > 0) {
        r.notes.push_back(std::to_string(absent) +
                          " class(es) absent from ground truth contribute zero to macro averages");
    }
    return r;
}

std::string MetricsReport::confusion_csv(std::span<const std::string> labels) const {
    std::ostringstream out;
    out << "true\\pred";
    for (std::size_t c = 0; c < confusion.size(); ++c) {
        out << ',' << (c < labels.size() ? labels[c] : std::to_string(c));
    }
    out << '\n';
    for (std::size_t t = 0; t < confusion.size(); ++t) {
        out << (t < labels.size() ? labels[t] : std::to_string(t));
        for (std::size_t count : confusion[t]) {
            out << ',' << count;
        }
        out << '\n';
    }
    return out.str();
}

double kendall_tau(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw std::invalid_argument("kendall_tau: length mismatch");
    }
    const std::size_t n = a.size();
    if (n < 2) {
        return 0.0;
    }
    const auto sign = [](double x) { return x > 0.0 ? 1 : (x < 0.0 ? -1 : 0); };
    long long score = 0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            score += sign(a[i] - a[j]) * sign(b[i] - b[j]);
        }
    }
    return static_cast<double>(score) / (static_cast<double>(n * (n - 1)) / 2.0);
}

} // namespace lgsrr::train
