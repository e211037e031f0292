#ifndef REFED_BASELINES_HPP
#define REFED_BASELINES_HPP

#include <algorithm>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "refed/adamw.hpp"
#include "refed/preprocess.hpp"
#include "refed/tempcnn.hpp"
#include "refed/training.hpp"

namespace refed {

enum class Strategy { OnlySource, OnlyTarget, SourceTarget, FineTune };

std::string strategy_name(Strategy s);
Strategy strategy_from_name(const std::string& name);

struct StrategyConfig {
    Strategy strategy = Strategy::SourceTarget;
    int epochs = 200;               // total across phases
    int finetune_source_epochs = 100; // phase 1 length for FineTune
    std::size_t batch_size = 256;
    AdamWConfig opt{};
    double dropout = 0.5;
    std::uint64_t seed = 0;
    bool reset_optimizer_between_phases = true;
};

struct StrategyFitResult {
    TempCnnModel<float> model;
    TrainLog log;
};

namespace detail {

/// One cross-entropy training phase with per-epoch validation selection.
/// When `select` is false the last epoch's weights stand.
inline void train_phase(TempCnnModel<float>& model, AdamW<float>& opt,
                        std::vector<SampleRef> pool,
                        const std::vector<SampleRef>& val_pool,
                        std::size_t n_classes, int epochs,
                        std::size_t batch_size, std::mt19937_64& shuffle_rng,
                        TrainLog& log, const std::string& phase, bool select) {
    auto params = model.parameters();
    const auto state = model.state();
    std::vector<Tensor<float>> best;
    Tensor<float> x;
    std::vector<int> labels, domains;
    const int epoch_base = static_cast<int>(log.epochs.size());
    for (int e = 0; e < epochs; ++e) {
        std::shuffle(pool.begin(), pool.end(), shuffle_rng);
        EpochRecord rec;
        rec.epoch = epoch_base + e;
        rec.phase = phase;
        std::size_t batches = 0;
        for (std::size_t begin = 0; begin < pool.size(); begin += batch_size) {
            const std::size_t end = std::min(begin + batch_size, pool.size());
            fill_batch(pool, begin, end, x, labels, domains);
            zero_grads(params);
            Tensor<float> logits = model.logits(x, Mode::Train);
            auto ce = kernels::softmax_xent(logits, labels);
            Tensor<float> dz1 = model.cls.backward(ce.dlogits);
            model.enc.backward(dz1);
            opt.step(params);
            rec.l_cl += ce.loss;
            rec.total += ce.loss;
            ++batches;
        }
        if (batches) {
            rec.l_cl /= batches;
            rec.total /= batches;
        }
        auto [f1, acc] = evaluate_pool<float>(
            val_pool, n_classes,
            [&](const Tensor<float>& b) { return model.logits(b, Mode::Eval); });
        rec.val_f1 = f1;
        rec.val_acc = acc;
        if (select && (log.best_epoch < 0 || f1 >= log.best_val_f1)) {
            log.best_epoch = rec.epoch;
            log.best_val_f1 = f1;
            rec.is_best = true;
            best = snapshot_state(state);
        }
        log.epochs.push_back(rec);
    }
    if (select && !best.empty()) restore_state(state, best);
}

/// Polygon-exclusive source-internal holdout used by OnlySource selection:
/// whole polygons are moved to the holdout until it reaches ~20% of pixels.
inline std::pair<std::vector<SampleRef>, std::vector<SampleRef>>
source_holdout(const LabeledDataset& source, std::uint64_t seed) {
    std::map<std::uint32_t, std::vector<std::size_t>> by_poly;
    for (std::size_t i = 0; i < source.size(); ++i)
        by_poly[source.polygon_ids[i]].push_back(i);
    std::vector<std::uint32_t> pids;
    for (const auto& [pid, _] : by_poly) pids.push_back(pid);
    std::mt19937_64 rng(seed ^ 0xb5297a4d3f84d5a3ULL);
    std::shuffle(pids.begin(), pids.end(), rng);
    const std::size_t target_holdout = source.size() / 5;
    std::vector<SampleRef> train, holdout;
    std::size_t held = 0;
    for (auto pid : pids) {
        auto& idxs = by_poly[pid];
        const bool to_holdout = held < target_holdout;
        for (auto i : idxs)
            (to_holdout ? holdout : train).push_back({&source, i});
        if (to_holdout) held += idxs.size();
    }
    if (train.empty() || holdout.empty())
        throw std::runtime_error("source_holdout: source too small to split");
    return {std::move(train), std::move(holdout)};
}

} // namespace detail

/// Trains one of the four TempCNN comparison strategies. All strategies share
/// the architecture, initialization and optimizer settings; they differ only
/// in which data they see and how the best epoch is selected.
inline StrategyFitResult train_strategy(const LabeledDataset& source,
                                        const std::vector<SampleRef>& target_train,
                                        const std::vector<SampleRef>& target_val,
                                        const StrategyConfig& cfg) {
    const LabeledDataset* meta = nullptr;
    if (cfg.strategy != Strategy::OnlyTarget) meta = &source;
    else if (!target_train.empty()) meta = target_train.front().ds;
    if (!meta) throw std::invalid_argument("train_strategy: empty training data");
    if (cfg.strategy != Strategy::OnlyTarget && !target_train.empty()) {
        const auto& tds = *target_train.front().ds;
        if (source.t_len != tds.t_len || source.n_bands != tds.n_bands ||
            source.n_classes != tds.n_classes)
            throw std::invalid_argument("train_strategy: source/target metadata mismatch");
    }

    StrategyFitResult res;
    res.model.init(meta->t_len, meta->n_bands, meta->n_classes,
                   static_cast<float>(cfg.dropout), cfg.seed);
    auto params = res.model.parameters();
    AdamW<float> opt(params, cfg.opt);
    std::mt19937_64 shuffle_rng(cfg.seed + 0x51a5u);

    switch (cfg.strategy) {
        case Strategy::OnlySource: {
            auto [train, holdout] = detail::source_holdout(source, cfg.seed);
            detail::train_phase(res.model, opt, train, holdout, meta->n_classes,
                                cfg.epochs, cfg.batch_size, shuffle_rng, res.log,
                                "source", true);
            break;
        }
        case Strategy::OnlyTarget: {
            detail::train_phase(res.model, opt, target_train, target_val,
                                meta->n_classes, cfg.epochs, cfg.batch_size,
                                shuffle_rng, res.log, "target", true);
            break;
        }
        case Strategy::SourceTarget: {
            std::vector<SampleRef> pool = make_pool(source);
            pool.insert(pool.end(), target_train.begin(), target_train.end());
            detail::train_phase(res.model, opt, pool, target_val, meta->n_classes,
                                cfg.epochs, cfg.batch_size, shuffle_rng, res.log,
                                "source+target", true);
            break;
        }
        case Strategy::FineTune: {
            const int p1 = cfg.finetune_source_epochs;
            const int p2 = cfg.epochs - p1;
            if (p1 <= 0 || p2 <= 0)
                throw std::invalid_argument("finetune: phases must sum to total epochs");
            detail::train_phase(res.model, opt, make_pool(source), target_val,
                                meta->n_classes, p1, cfg.batch_size, shuffle_rng,
                                res.log, "pretrain", false);
            if (cfg.reset_optimizer_between_phases) opt.reset(params);
            detail::train_phase(res.model, opt, target_train, target_val,
                                meta->n_classes, p2, cfg.batch_size, shuffle_rng,
                                res.log, "finetune", true);
            break;
        }
    }
    return res;
}

} // namespace refed

#endif
