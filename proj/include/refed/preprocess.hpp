#ifndef REFED_PREPROCESS_HPP
#define REFED_PREPROCESS_HPP

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "refed/dataset.hpp"

namespace refed {

/// Per-band scaling bounds: the 2nd / 98th percentiles of one dataset.
struct ScalingParams {
    std::vector<float> p2, p98; // one entry per band
};

enum class Partition { Train = 0, Validation = 1, Test = 2 };

std::string partition_name(Partition p);

/// Polygon-id -> partition map produced by the seeded stratified split.
struct SplitAssignment {
    std::map<std::uint32_t, Partition> assignment;
    std::uint64_t seed = 0;
    std::array<double, 3> ratios{0.5, 0.2, 0.3};
    std::array<double, 3> achieved{0, 0, 0}; // pixel fractions per partition
    std::vector<std::string> warnings;

    std::string to_json() const;
    static SplitAssignment from_json(const std::string& text);
};

/// Temporal linear interpolation of masked entries; leading/trailing gaps
/// copy the nearest valid value. Throws when no entry is valid.
std::vector<float> gapfill(const std::vector<float>& series,
                           const std::vector<bool>& valid_mask);

/// Per-band 2nd/98th percentiles over all N*T values, linear interpolation
/// between order statistics at zero-based rank q*(M-1).
ScalingParams fit_scaling(const LabeledDataset& ds);

/// v -> clamp((v - p2) / (p98 - p2), 0, 1); constant bands map to 0.
LabeledDataset apply_scaling(const LabeledDataset& ds, const ScalingParams& p);

/// Greedy per-class polygon assignment: polygons (keyed by majority class)
/// are shuffled with the seeded generator and handed one at a time to the
/// partition with the largest remaining pixel-count deficit.
SplitAssignment polygon_split(const LabeledDataset& ds,
                              std::array<double, 3> ratios, std::uint64_t seed);

/// Sample indices of `ds` whose polygon falls in `part`.
std::vector<std::size_t> partition_indices(const LabeledDataset& ds,
                                           const SplitAssignment& split,
                                           Partition part);

} // namespace refed

#endif
