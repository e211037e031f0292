#include "refed/metrics.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace refed {

std::uint64_t ConfusionMatrix::total() const {
    return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
    if (other.k != k) throw std::invalid_argument("confusion: size mismatch");
    for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += other.counts[i];
    return *this;
}

ConfusionMatrix confusion(const std::vector<int>& reference,
                          const std::vector<int>& predicted, std::size_t k) {
    if (reference.size() != predicted.size())
        throw std::invalid_argument("confusion: length mismatch");
    ConfusionMatrix cm(k);
    for (std::size_t i = 0; i < reference.size(); ++i) {
        if (reference[i] < 0 || static_cast<std::size_t>(reference[i]) >= k ||
            predicted[i] < 0 || static_cast<std::size_t>(predicted[i]) >= k)
            throw std::out_of_range("confusion: label out of range");
        ++cm.at(static_cast<std::size_t>(reference[i]),
                static_cast<std::size_t>(predicted[i]));
    }
    return cm;
}

std::vector<double> per_class_f1(const ConfusionMatrix& cm) {
    if (cm.total() == 0) throw std::invalid_argument("per_class_f1: empty matrix");
    std::vector<double> f1(cm.k, 0.0);
    for (std::size_t c = 0; c < cm.k; ++c) {
        std::uint64_t tp = cm.at(c, c), ref = 0, pred = 0;
        for (std::size_t j = 0; j < cm.k; ++j) {
            ref += cm.at(c, j);
            pred += cm.at(j, c);
        }
        const double prec = pred > 0 ? static_cast<double>(tp) / pred : 0.0;
        const double rec = ref > 0 ? static_cast<double>(tp) / ref : 0.0;
        f1[c] = (prec + rec) > 0 ? 100.0 * 2.0 * prec * rec / (prec + rec) : 0.0;
    }
    return f1;
}

double weighted_f1(const ConfusionMatrix& cm) {
    const std::uint64_t n = cm.total();
    if (n == 0) throw std::invalid_argument("weighted_f1: empty matrix");
    const auto f1 = per_class_f1(cm);
    double acc = 0.0;
    for (std::size_t c = 0; c < cm.k; ++c) {
        std::uint64_t support = 0;
        for (std::size_t j = 0; j < cm.k; ++j) support += cm.at(c, j);
        acc += static_cast<double>(support) / static_cast<double>(n) * f1[c];
    }
    return acc;
}

double accuracy(const ConfusionMatrix& cm) {
    const std::uint64_t n = cm.total();
    if (n == 0) throw std::invalid_argument("accuracy: empty matrix");
    std::uint64_t trace = 0;
    for (std::size_t c = 0; c < cm.k; ++c) trace += cm.at(c, c);
    return 100.0 * static_cast<double>(trace) / static_cast<double>(n);
}

MeanStd mean_std(const std::vector<double>& xs) {
    MeanStd r;
    if (xs.empty()) return r;
    r.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
    if (xs.size() > 1) {
        double sq = 0.0;
        for (double x : xs) sq += (x - r.mean) * (x - r.mean);
        r.std = std::sqrt(sq / static_cast<double>(xs.size() - 1));
    }
    return r;
}

} // namespace refed
