#include "refed/experiment.hpp"

#include <cstdio>

#include <json.hpp>

#include "refed/baselines.hpp"
#include "refed/checkpoint.hpp"
#include "refed/metrics.hpp"
#include "refed/preprocess.hpp"
#include "refed/refed.hpp"

namespace refed {

std::string ExperimentConfig::to_json() const {
    nlohmann::ordered_json j;
    j["strategies"] = strategies;
    j["n_repeats"] = n_repeats;
    j["base_seed"] = base_seed;
    j["epochs"] = epochs;
    j["finetune_source_epochs"] = finetune_source_epochs;
    j["lr"] = lr;
    j["weight_decay"] = weight_decay;
    j["dropout"] = dropout;
    j["tau"] = tau;
    j["normalize_embeddings"] = normalize_embeddings;
    j["refed_batch_size"] = refed_batch_size;
    j["baseline_batch_size"] = baseline_batch_size;
    return j.dump(2) + "\n";
}

ExperimentConfig ExperimentConfig::from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    ExperimentConfig c;
    if (j.contains("strategies"))
        c.strategies = j["strategies"].get<std::vector<std::string>>();
    c.n_repeats = j.value("n_repeats", c.n_repeats);
    c.base_seed = j.value("base_seed", c.base_seed);
    c.epochs = j.value("epochs", c.epochs);
    c.finetune_source_epochs = j.value("finetune_source_epochs", c.finetune_source_epochs);
    c.lr = j.value("lr", c.lr);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.dropout = j.value("dropout", c.dropout);
    c.tau = j.value("tau", c.tau);
    c.normalize_embeddings = j.value("normalize_embeddings", c.normalize_embeddings);
    c.refed_batch_size = j.value("refed_batch_size", c.refed_batch_size);
    c.baseline_batch_size = j.value("baseline_batch_size", c.baseline_batch_size);
    return c;
}

std::string strategy_name(Strategy s) {
    switch (s) {
        case Strategy::OnlySource: return "only_source";
        case Strategy::OnlyTarget: return "only_target";
        case Strategy::SourceTarget: return "source_target";
        case Strategy::FineTune: return "finetune";
    }
    throw std::logic_error("bad strategy");
}

Strategy strategy_from_name(const std::string& name) {
    if (name == "only_source") return Strategy::OnlySource;
    if (name == "only_target") return Strategy::OnlyTarget;
    if (name == "source_target") return Strategy::SourceTarget;
    if (name == "finetune") return Strategy::FineTune;
    throw std::invalid_argument("unknown strategy '" + name + "'");
}

ExperimentReport run_experiment(const LabeledDataset& source,
                                const LabeledDataset& target,
                                const ExperimentConfig& cfg) {
    ExperimentReport report;
    report.config = cfg;
    report.config_digest = fnv1a_hex(cfg.to_json());
    report.class_names = target.class_names;

    // Per-dataset percentile scaling, each domain with its own bounds.
    const LabeledDataset src = apply_scaling(source, fit_scaling(source));
    const LabeledDataset tgt = apply_scaling(target, fit_scaling(target));

    const int ft_src =
        cfg.finetune_source_epochs > 0 ? cfg.finetune_source_epochs : cfg.epochs / 2;

    for (int r = 0; r < cfg.n_repeats; ++r) {
        const std::uint64_t seed = cfg.base_seed + static_cast<std::uint64_t>(r);
        report.seeds.push_back(seed);
        const auto split = polygon_split(tgt, {0.5, 0.2, 0.3}, seed);
        const auto train_pool = make_pool(tgt, partition_indices(tgt, split, Partition::Train));
        const auto val_pool = make_pool(tgt, partition_indices(tgt, split, Partition::Validation));
        const auto test_idx = partition_indices(tgt, split, Partition::Test);
        const auto test_pool = make_pool(tgt, test_idx);
        std::vector<int> ref(test_idx.size());
        for (std::size_t i = 0; i < test_idx.size(); ++i)
            ref[i] = tgt.labels[test_idx[i]];

        auto score = [&](const std::vector<int>& preds, const std::string& name) {
            const auto cm = confusion(ref, preds, tgt.n_classes);
            auto& res = report.results[name];
            res.f1.push_back(weighted_f1(cm));
            res.acc.push_back(accuracy(cm));
            res.class_f1.push_back(per_class_f1(cm));
        };

        for (const auto& name : cfg.strategies) {
            if (name == "refed") {
                RefedTrainConfig rc;
                rc.epochs = cfg.epochs;
                rc.batch_size = cfg.refed_batch_size;
                rc.opt.lr = cfg.lr;
                rc.opt.weight_decay = cfg.weight_decay;
                rc.tau = cfg.tau;
                rc.dropout = cfg.dropout;
                rc.normalize_embeddings = cfg.normalize_embeddings;
                rc.seed = seed;
                auto fit = fit_refed(src, train_pool, val_pool, rc);
                score(predict_pool<float>(test_pool,
                                          [&](const Tensor<float>& b) {
                                              return fit.model.logits(b, Mode::Eval);
                                          }),
                      name);
            } else {
                StrategyConfig sc;
                sc.strategy = strategy_from_name(name);
                sc.epochs = cfg.epochs;
                sc.finetune_source_epochs = ft_src;
                sc.batch_size = cfg.baseline_batch_size;
                sc.opt.lr = cfg.lr;
                sc.opt.weight_decay = cfg.weight_decay;
                sc.dropout = cfg.dropout;
                sc.seed = seed;
                auto fit = train_strategy(src, train_pool, val_pool, sc);
                score(predict_pool<float>(test_pool,
                                          [&](const Tensor<float>& b) {
                                              return fit.model.logits(b, Mode::Eval);
                                          }),
                      name);
            }
        }
    }
    return report;
}

std::string ExperimentReport::to_json() const {
    nlohmann::ordered_json j;
    j["config_digest"] = config_digest;
    j["config"] = nlohmann::ordered_json::parse(config.to_json());
    j["seeds"] = seeds;
    j["class_names"] = class_names;
    nlohmann::ordered_json res = nlohmann::ordered_json::object();
    for (const auto& name : config.strategies) {
        auto it = results.find(name);
        if (it == results.end()) continue;
        const auto& r = it->second;
        nlohmann::ordered_json entry;
        entry["f1"] = r.f1;
        entry["accuracy"] = r.acc;
        const auto f1_ms = mean_std(r.f1);
        const auto acc_ms = mean_std(r.acc);
        entry["f1_mean"] = f1_ms.mean;
        entry["f1_std"] = f1_ms.std;
        entry["accuracy_mean"] = acc_ms.mean;
        entry["accuracy_std"] = acc_ms.std;
        if (!r.class_f1.empty()) {
            std::vector<double> cls_mean(r.class_f1.front().size(), 0.0);
            for (const auto& row : r.class_f1)
                for (std::size_t c = 0; c < row.size(); ++c) cls_mean[c] += row[c];
            for (auto& v : cls_mean) v /= static_cast<double>(r.class_f1.size());
            entry["per_class_f1_mean"] = cls_mean;
        }
        res[name] = std::move(entry);
    }
    j["results"] = std::move(res);
    return j.dump(2) + "\n";
}

std::string ExperimentReport::to_table() const {
    std::string out;
    char line[160];
    std::snprintf(line, sizeof(line), "%-14s | %-17s | %-17s\n", "Strategy",
                  "F1-Score", "Accuracy");
    out += line;
    out += std::string(52, '-') + "\n";
    for (const auto& name : config.strategies) {
        auto it = results.find(name);
        if (it == results.end()) continue;
        const auto f1 = mean_std(it->second.f1);
        const auto acc = mean_std(it->second.acc);
        std::snprintf(line, sizeof(line), "%-14s | %6.2f +- %5.2f   | %6.2f +- %5.2f\n",
                      name.c_str(), f1.mean, f1.std, acc.mean, acc.std);
        out += line;
    }
    return out;
}

} // namespace refed
