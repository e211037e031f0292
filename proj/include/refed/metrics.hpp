#ifndef REFED_METRICS_HPP
#define REFED_METRICS_HPP

#include <cstdint>
#include <string>
#include <vector>

namespace refed {

/// K x K counts; rows = reference class, columns = predicted class.
struct ConfusionMatrix {
    std::size_t k = 0;
    std::vector<std::uint64_t> counts;

    explicit ConfusionMatrix(std::size_t classes = 0)
        : k(classes), counts(classes * classes, 0) {}

    std::uint64_t& at(std::size_t ref, std::size_t pred) {
        return counts[ref * k + pred];
    }
    std::uint64_t at(std::size_t ref, std::size_t pred) const {
        return counts[ref * k + pred];
    }
    std::uint64_t total() const;

    ConfusionMatrix& operator+=(const ConfusionMatrix& other);
};

ConfusionMatrix confusion(const std::vector<int>& reference,
                          const std::vector<int>& predicted, std::size_t k);

/// Support-weighted mean of per-class F1, as a percentage. Zero-support
/// classes are excluded; zero-division cases score 0.
double weighted_f1(const ConfusionMatrix& cm);

/// 100 * trace / N.
double accuracy(const ConfusionMatrix& cm);

/// Per-class F1 percentages (0 for zero-division cases).
std::vector<double> per_class_f1(const ConfusionMatrix& cm);

/// Sample mean and n-1 standard deviation.
struct MeanStd {
    double mean = 0.0, std = 0.0;
};
MeanStd mean_std(const std::vector<double>& xs);

} // namespace refed

#endif
