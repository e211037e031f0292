#include "refed/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <unordered_map>

#include <json.hpp>

namespace refed {

std::string partition_name(Partition p) {
    switch (p) {
        case Partition::Train: return "train";
        case Partition::Validation: return "val";
        case Partition::Test: return "test";
    }
    throw std::logic_error("bad partition");
}

std::vector<float> gapfill(const std::vector<float>& series,
                           const std::vector<bool>& valid_mask) {
    const std::size_t t = series.size();
    if (valid_mask.size() != t)
        throw std::invalid_argument("gapfill: mask length mismatch");
    std::vector<std::size_t> valid;
    for (std::size_t i = 0; i < t; ++i)
        if (valid_mask[i]) valid.push_back(i);
    if (valid.empty())
        throw std::runtime_error("gapfill: series has no valid entry");
    std::vector<float> out(series);
    // Leading / trailing runs copy the nearest valid value.
    for (std::size_t i = 0; i < valid.front(); ++i) out[i] = series[valid.front()];
    for (std::size_t i = valid.back() + 1; i < t; ++i) out[i] = series[valid.back()];
    for (std::size_t vi = 0; vi + 1 < valid.size(); ++vi) {
        const std::size_t a = valid[vi], b = valid[vi + 1];
        for (std::size_t i = a + 1; i < b; ++i) {
            const double w = static_cast<double>(i - a) / static_cast<double>(b - a);
            out[i] = static_cast<float>((1.0 - w) * series[a] + w * series[b]);
        }
    }
    return out;
}

namespace {

// Linear interpolation between order statistics, zero-based rank q*(M-1).
float percentile_sorted(const std::vector<float>& sorted, double q) {
    const std::size_t m = sorted.size();
    if (m == 1) return sorted[0];
    const double rank = q * static_cast<double>(m - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(rank));
    const std::size_t hi = std::min(lo + 1, m - 1);
    const double frac = rank - static_cast<double>(lo);
    return static_cast<float>((1.0 - frac) * sorted[lo] + frac * sorted[hi]);
}

} // namespace

ScalingParams fit_scaling(const LabeledDataset& ds) {
    if (ds.size() == 0) throw std::invalid_argument("fit_scaling: empty dataset");
    ScalingParams p;
    p.p2.resize(ds.n_bands);
    p.p98.resize(ds.n_bands);
    std::vector<float> vals(ds.size() * ds.t_len);
    for (std::size_t band = 0; band < ds.n_bands; ++band) {
        std::size_t n = 0;
        for (std::size_t i = 0; i < ds.size(); ++i)
            for (std::size_t t = 0; t < ds.t_len; ++t)
                vals[n++] = ds.features[(i * ds.t_len + t) * ds.n_bands + band];
        std::sort(vals.begin(), vals.end());
        p.p2[band] = percentile_sorted(vals, 0.02);
        p.p98[band] = percentile_sorted(vals, 0.98);
    }
    return p;
}

LabeledDataset apply_scaling(const LabeledDataset& ds, const ScalingParams& p) {
    if (p.p2.size() != ds.n_bands || p.p98.size() != ds.n_bands)
        throw std::invalid_argument("apply_scaling: band count mismatch");
    LabeledDataset out = ds;
    out.feature_reads = 0;
    for (std::size_t i = 0; i < ds.size(); ++i)
        for (std::size_t t = 0; t < ds.t_len; ++t)
            for (std::size_t band = 0; band < ds.n_bands; ++band) {
                float& v = out.features[(i * ds.t_len + t) * ds.n_bands + band];
                const float lo = p.p2[band], hi = p.p98[band];
                if (hi <= lo) {
                    v = 0.0f;
                } else {
                    v = std::clamp((v - lo) / (hi - lo), 0.0f, 1.0f);
                }
            }
    return out;
}

SplitAssignment polygon_split(const LabeledDataset& ds,
                              std::array<double, 3> ratios, std::uint64_t seed) {
    double sum = ratios[0] + ratios[1] + ratios[2];
    if (ratios[0] <= 0 || ratios[1] <= 0 || ratios[2] <= 0 ||
        std::fabs(sum - 1.0) > 1e-9)
        throw std::invalid_argument("polygon_split: ratios must be positive and sum to 1");

    // Polygon -> pixel count and per-class vote.
    struct PolyInfo {
        std::size_t pixels = 0;
        std::unordered_map<std::uint16_t, std::size_t> class_votes;
    };
    std::map<std::uint32_t, PolyInfo> polys; // ordered for determinism
    for (std::size_t i = 0; i < ds.size(); ++i) {
        auto& pi = polys[ds.polygon_ids[i]];
        ++pi.pixels;
        ++pi.class_votes[ds.labels[i]];
    }

    // Group polygons by majority class.
    std::vector<std::vector<std::pair<std::uint32_t, std::size_t>>> by_class(
        ds.n_classes);
    for (const auto& [pid, info] : polys) {
        std::uint16_t best = 0;
        std::size_t best_votes = 0;
        for (const auto& [cls, votes] : info.class_votes)
            if (votes > best_votes || (votes == best_votes && cls < best)) {
                best = cls;
                best_votes = votes;
            }
        by_class[best].emplace_back(pid, info.pixels);
    }

    SplitAssignment split;
    split.seed = seed;
    split.ratios = ratios;
    std::mt19937_64 rng(seed);
    std::array<std::size_t, 3> total_assigned{0, 0, 0};
    std::size_t total_pixels = 0;

    for (std::size_t cls = 0; cls < ds.n_classes; ++cls) {
        auto& group = by_class[cls];
        if (group.empty()) continue;
        if (group.size() < 3)
            split.warnings.push_back("class " + std::to_string(cls) + " has only " +
                                     std::to_string(group.size()) +
                                     " polygons; some partitions will miss it");
        std::sort(group.begin(), group.end()); // seed-independent base order
        std::shuffle(group.begin(), group.end(), rng);
        std::size_t class_pixels = 0;
        for (const auto& [pid, px] : group) class_pixels += px;
        std::array<double, 3> assigned{0, 0, 0};
        for (const auto& [pid, px] : group) {
            int best = 0;
            double best_deficit = -1e300;
            for (int part = 0; part < 3; ++part) {
                const double deficit =
                    ratios[part] * static_cast<double>(class_pixels) - assigned[part];
                if (deficit > best_deficit) {
                    best_deficit = deficit;
                    best = part;
                }
            }
            split.assignment[pid] = static_cast<Partition>(best);
            assigned[best] += static_cast<double>(px);
            total_assigned[best] += px;
        }
        total_pixels += class_pixels;
    }

    if (total_pixels > 0)
        for (int part = 0; part < 3; ++part)
            split.achieved[part] = static_cast<double>(total_assigned[part]) /
                                   static_cast<double>(total_pixels);
    return split;
}

std::vector<std::size_t> partition_indices(const LabeledDataset& ds,
                                           const SplitAssignment& split,
                                           Partition part) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        auto it = split.assignment.find(ds.polygon_ids[i]);
        if (it == split.assignment.end())
            throw std::runtime_error("partition_indices: polygon " +
                                     std::to_string(ds.polygon_ids[i]) +
                                     " missing from split");
        if (it->second == part) out.push_back(i);
    }
    return out;
}

std::string SplitAssignment::to_json() const {
    nlohmann::ordered_json j;
    j["seed"] = seed;
    j["ratios"] = ratios;
    nlohmann::ordered_json a = nlohmann::ordered_json::object();
    for (const auto& [pid, part] : assignment)
        a[std::to_string(pid)] = partition_name(part);
    j["assignment"] = std::move(a);
    j["achieved"] = {{"train", achieved[0]},
                     {"val", achieved[1]},
                     {"test", achieved[2]}};
    if (!warnings.empty()) j["warnings"] = warnings;
    return j.dump(2) + "\n";
}

SplitAssignment SplitAssignment::from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    SplitAssignment s;
    s.seed = j.at("seed").get<std::uint64_t>();
    const auto r = j.at("ratios");
    s.ratios = {r.at(0).get<double>(), r.at(1).get<double>(), r.at(2).get<double>()};
    for (const auto& [key, val] : j.at("assignment").items()) {
        const std::string name = val.get<std::string>();
        Partition p;
        if (name == "train") p = Partition::Train;
        else if (name == "val") p = Partition::Validation;
        else if (name == "test") p = Partition::Test;
        else throw std::runtime_error("split json: bad partition name '" + name + "'");
        s.assignment[static_cast<std::uint32_t>(std::stoul(key))] = p;
    }
    if (j.contains("achieved")) {
        s.achieved = {j["achieved"].value("train", 0.0),
                      j["achieved"].value("val", 0.0),
                      j["achieved"].value("test", 0.0)};
    }
    if (j.contains("warnings"))
        s.warnings = j["warnings"].get<std::vector<std::string>>();
    return s;
}

} // namespace refed
