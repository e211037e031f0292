#ifndef REFED_EXPERIMENT_HPP
#define REFED_EXPERIMENT_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "refed/dataset.hpp"

namespace refed {

/// Multi-repeat evaluation protocol: one polygon-aware 50/20/30 target split
/// per repeat (seeds base, base+1, ...), every strategy trained on it and
/// scored on the target test partition.
struct ExperimentConfig {
    std::vector<std::string> strategies{"only_source", "only_target",
                                        "source_target", "finetune", "refed"};
    int n_repeats = 5;
    std::uint64_t base_seed = 0;
    int epochs = 200;
    int finetune_source_epochs = -1; // -1: half of epochs
    double lr = 1e-4;
    double weight_decay = 0.01;
    double dropout = 0.5;
    double tau = 0.07;
    bool normalize_embeddings = true;
    std::size_t refed_batch_size = 512;
    std::size_t baseline_batch_size = 256;

    std::string to_json() const;
    static ExperimentConfig from_json(const std::string& text);
};

struct StrategyResult {
    std::vector<double> f1, acc;             // one entry per repeat
    std::vector<std::vector<double>> class_f1; // per repeat, per class
};

struct ExperimentReport {
    ExperimentConfig config;
    std::string config_digest;
    std::vector<std::uint64_t> seeds;
    std::map<std::string, StrategyResult> results; // keyed by strategy name
    std::vector<std::string> class_names;

    std::string to_json() const;
    /// Plain-text mean +- std table, one row per strategy.
    std::string to_table() const;
};

ExperimentReport run_experiment(const LabeledDataset& source,
                                const LabeledDataset& target,
                                const ExperimentConfig& cfg);

} // namespace refed

#endif
