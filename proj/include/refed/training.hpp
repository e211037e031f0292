#ifndef REFED_TRAINING_HPP
#define REFED_TRAINING_HPP

#include <algorithm>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "refed/dataset.hpp"
#include "refed/metrics.hpp"
#include "refed/tempcnn.hpp"

namespace refed {

/// Reference into a dataset; training pools are lists of these so that
/// dataset access stays observable through the datasets' read counters.
struct SampleRef {
    const LabeledDataset* ds;
    std::size_t idx;
};

inline std::vector<SampleRef> make_pool(const LabeledDataset& ds,
                                        const std::vector<std::size_t>& indices) {
    std::vector<SampleRef> pool;
    pool.reserve(indices.size());
    for (auto i : indices) pool.push_back({&ds, i});
    return pool;
}

inline std::vector<SampleRef> make_pool(const LabeledDataset& ds) {
    std::vector<SampleRef> pool;
    pool.reserve(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) pool.push_back({&ds, i});
    return pool;
}

/// Copies the referenced samples into an [n, T, C] batch tensor.
template <class T>
void fill_batch(const std::vector<SampleRef>& pool, std::size_t begin,
                std::size_t end, Tensor<T>& x, std::vector<int>& labels,
                std::vector<int>& domains) {
    const std::size_t n = end - begin;
    const auto& ds0 = *pool[begin].ds;
    x = Tensor<T>({n, ds0.t_len, ds0.n_bands});
    labels.resize(n);
    domains.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& ref = pool[begin + i];
        auto f = ref.ds->sample_features(ref.idx);
        T* dst = x.data() + i * f.size();
        for (std::size_t j = 0; j < f.size(); ++j) dst[j] = static_cast<T>(f[j]);
        labels[i] = ref.ds->labels[ref.idx];
        domains[i] = ref.ds->domains[ref.idx];
    }
}

/// Per-epoch training record; baseline strategies leave the domain and
/// contrastive components at zero.
struct EpochRecord {
    int epoch = 0;
    double l_cl = 0, l_dom = 0, l_con_0 = 0, l_con_1 = 0, l_con_2 = 0, total = 0;
    double val_f1 = 0, val_acc = 0;
    bool is_best = false;
    std::string phase; // used by fine-tuning
};

struct TrainLog {
    std::vector<EpochRecord> epochs;
    int best_epoch = -1;
    double best_val_f1 = 0;

    std::string to_jsonl() const;
};

/// Copy / restore of a model's persistent tensors (for best-epoch selection).
template <class T>
std::vector<Tensor<T>> snapshot_state(const NamedTensors<T>& state) {
    std::vector<Tensor<T>> out;
    out.reserve(state.size());
    for (const auto& [name, tensor] : state) out.push_back(*tensor);
    return out;
}

template <class T>
void restore_state(const NamedTensors<T>& state,
                   const std::vector<Tensor<T>>& snapshot) {
    for (std::size_t i = 0; i < state.size(); ++i) *state[i].second = snapshot[i];
}

/// Eval-mode class predictions over a sample pool, batched.
template <class T, class LogitsFn>
std::vector<int> predict_pool(const std::vector<SampleRef>& pool,
                              LogitsFn&& logits_fn,
                              std::size_t batch_size = 512) {
    std::vector<int> preds;
    preds.reserve(pool.size());
    Tensor<T> x;
    std::vector<int> labels, domains;
    for (std::size_t begin = 0; begin < pool.size(); begin += batch_size) {
        const std::size_t end = std::min(begin + batch_size, pool.size());
        fill_batch(pool, begin, end, x, labels, domains);
        Tensor<T> logits = logits_fn(x);
        const std::size_t m = logits.dim(1);
        for (std::size_t b = 0; b + begin < end; ++b) {
            const T* row = logits.data() + b * m;
            std::size_t arg = 0;
            for (std::size_t j = 1; j < m; ++j)
                if (row[j] > row[arg]) arg = j;
            preds.push_back(static_cast<int>(arg));
        }
    }
    return preds;
}

/// Weighted F1 / accuracy of eval-mode predictions on a pool.
template <class T, class LogitsFn>
std::pair<double, double> evaluate_pool(const std::vector<SampleRef>& pool,
                                        std::size_t n_classes,
                                        LogitsFn&& logits_fn) {
    auto preds = predict_pool<T>(pool, logits_fn);
    std::vector<int> ref(pool.size());
    for (std::size_t i = 0; i < pool.size(); ++i)
        ref[i] = pool[i].ds->labels[pool[i].idx];
    const auto cm = confusion(ref, preds, n_classes);
    return {weighted_f1(cm), accuracy(cm)};
}

} // namespace refed

#endif
