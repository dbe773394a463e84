#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace lgsrr::train {

/// Classification metrics as percentages. Macro averages are unweighted means
/// over all K classes (a class with no support or no predictions contributes
/// zero); weighted averages use class support.
struct MetricsReport {
    double acc = 0.0;
    double macro_f1 = 0.0;
    double macro_p = 0.0;
    double macro_r = 0.0;
    double weighted_f1 = 0.0;
    double weighted_p = 0.0;

    std::vector<double> precision;   // per class, percent
    std::vector<double> recall;      // per class accuracy, percent
    std::vector<double> f1;
    std::vector<std::size_t> support;
    /// confusion[true][predicted]
    std::vector<std::vector<std::size_t>> confusion;
    std::size_t total = 0;
    std::vector<std::string> notes;

    std::string confusion_csv(std::span<const std::string> labels) const;
};

MetricsReport compute_metrics(std::span<const std::size_t> truth, std::span<const std::size_t> predicted,
                              std::size_t classes);

/// Kendall tau-a between two score lists over the same items; tied pairs in
/// either list contribute zero.
double kendall_tau(std::span<const double> a, std::span<const double> b);

} // namespace lgsrr::train
