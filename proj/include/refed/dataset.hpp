#ifndef REFED_DATASET_HPP
#define REFED_DATASET_HPP

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace refed {

enum class Domain : std::uint8_t { Source = 0, Target = 1 };

enum class FeatureKind { Invariant, Specific };

/// One pixel's time series with its annotations. Mostly a convenience view;
/// datasets store columns, not sample structs.
struct SitsSample {
    std::vector<float> features; // T x C, time-major
    int class_label = 0;
    Domain domain = Domain::Source;
    std::uint32_t polygon_id = 0;
};

/// Column-oriented pixel time-series collection. Immutable after load;
/// concurrent reads are safe. `feature_reads` counts feature accesses so
/// tests can verify which datasets a training strategy actually touches.
struct LabeledDataset {
    std::size_t t_len = 0, n_bands = 0, n_classes = 0;
    std::vector<std::string> class_names;
    std::vector<float> features; // N * T * C, sample-major, then time, then band
    std::vector<std::uint16_t> labels;
    std::vector<std::uint32_t> polygon_ids;
    std::vector<std::uint8_t> domains; // 0 = Source, 1 = Target
    mutable std::uint64_t feature_reads = 0;

    std::size_t size() const { return labels.size(); }
    std::size_t sample_len() const { return t_len * n_bands; }

    std::span<const float> sample_features(std::size_t i) const {
        ++feature_reads;
        return {features.data() + i * sample_len(), sample_len()};
    }

    SitsSample sample(std::size_t i) const;

    std::size_t count_domain(Domain d) const;

    /// Checks the structural invariants (lengths, label range, finiteness).
    void validate() const;
};

/// Parse failure with the byte offset where the problem was detected.
struct ParseError : std::runtime_error {
    std::size_t offset;
    ParseError(const std::string& what, std::size_t off)
        : std::runtime_error(what + " (byte offset " + std::to_string(off) + ")"),
          offset(off) {}
};

/// Maps (class, feature kind, domain) into the 3K-way mixed label space:
/// [0,K) invariant, [K,2K) source-specific, [2K,3K) target-specific.
inline int mixed_label(int class_label, FeatureKind kind, Domain domain,
                       int n_classes) {
    if (class_label < 0 || class_label >= n_classes)
        throw std::out_of_range("mixed_label: class label out of range");
    if (kind == FeatureKind::Invariant) return class_label;
    return (domain == Domain::Source ? n_classes : 2 * n_classes) + class_label;
}

void save_dataset(const LabeledDataset& ds, const std::string& path);
LabeledDataset load_dataset(const std::string& path);

/// Extracts the samples at `indices` into a new dataset with shared metadata.
LabeledDataset subset(const LabeledDataset& ds,
                      const std::vector<std::size_t>& indices);

/// Concatenates datasets with identical (T, C, K) metadata.
LabeledDataset concatenate(const LabeledDataset& a, const LabeledDataset& b);

} // namespace refed

#endif
