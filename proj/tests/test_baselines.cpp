#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "refed/baselines.hpp"
#include "refed/preprocess.hpp"
#include "refed/synthgen.hpp"

using namespace refed;

namespace {

struct Fixture {
    LabeledDataset source, target;
    std::vector<SampleRef> train, val;

    explicit Fixture(std::uint64_t seed = 2) {
        GeneratorConfig cfg;
        cfg.n_classes = 3;
        cfg.t_len = 10;
        cfg.n_bands = 2;
        cfg.polygons_per_class = 8;
        cfg.pixels_per_polygon_mean = 6;
        cfg.seed = seed;
        auto pair = generate(cfg);
        source = apply_scaling(pair.first, fit_scaling(pair.first));
        target = apply_scaling(pair.second, fit_scaling(pair.second));
        const auto split = polygon_split(target, {0.5, 0.2, 0.3}, seed);
        train = make_pool(target, partition_indices(target, split, Partition::Train));
        val = make_pool(target, partition_indices(target, split, Partition::Validation));
    }

    StrategyConfig config(Strategy s, int epochs = 2) const {
        StrategyConfig cfg;
        cfg.strategy = s;
        cfg.epochs = epochs;
        cfg.finetune_source_epochs = epochs / 2;
        cfg.batch_size = 64;
        cfg.seed = 5;
        return cfg;
    }
};

} // namespace

TEST_CASE("strategy names round trip") {
    for (Strategy s : {Strategy::OnlySource, Strategy::OnlyTarget,
                       Strategy::SourceTarget, Strategy::FineTune})
        CHECK(strategy_from_name(strategy_name(s)) == s);
    CHECK_THROWS_AS(strategy_from_name("refed_but_misspelled"), std::invalid_argument);
}

TEST_CASE("only_target never touches the source dataset") {
    Fixture f;
    f.source.feature_reads = 0;
    f.target.feature_reads = 0;
    train_strategy(f.source, f.train, f.val, f.config(Strategy::OnlyTarget));
    CHECK(f.source.feature_reads == 0);
    CHECK(f.target.feature_reads > 0);
}

TEST_CASE("only_source never touches the target dataset") {
    Fixture f;
    f.source.feature_reads = 0;
    f.target.feature_reads = 0;
    train_strategy(f.source, f.train, f.val, f.config(Strategy::OnlySource));
    CHECK(f.target.feature_reads == 0);
    CHECK(f.source.feature_reads > 0);
}

TEST_CASE("source_target reads both datasets") {
    Fixture f;
    f.source.feature_reads = 0;
    f.target.feature_reads = 0;
    train_strategy(f.source, f.train, f.val, f.config(Strategy::SourceTarget));
    CHECK(f.source.feature_reads > 0);
    CHECK(f.target.feature_reads > 0);
}

TEST_CASE("finetune runs a source phase then a target phase") {
    Fixture f;
    auto cfg = f.config(Strategy::FineTune, 4);
    cfg.finetune_source_epochs = 2;
    const auto res = train_strategy(f.source, f.train, f.val, cfg);
    REQUIRE(res.log.epochs.size() == 4);
    CHECK(res.log.epochs[0].phase == "pretrain");
    CHECK(res.log.epochs[1].phase == "pretrain");
    CHECK(res.log.epochs[2].phase == "finetune");
    CHECK(res.log.epochs[3].phase == "finetune");
    // the selected epoch comes from the target phase
    CHECK(res.log.best_epoch >= 2);
}

TEST_CASE("finetune rejects phase budgets that do not fit") {
    Fixture f;
    auto cfg = f.config(Strategy::FineTune, 2);
    cfg.finetune_source_epochs = 2; // leaves no target epochs
    CHECK_THROWS_AS(train_strategy(f.source, f.train, f.val, cfg),
                    std::invalid_argument);
}

TEST_CASE("best-epoch selection tracks validation F1") {
    Fixture f;
    const auto res = train_strategy(f.source, f.train, f.val,
                                    f.config(Strategy::OnlyTarget, 3));
    REQUIRE(res.log.best_epoch >= 0);
    double best = -1;
    for (const auto& e : res.log.epochs) best = std::max(best, e.val_f1);
    CHECK(res.log.best_val_f1 == doctest::Approx(best));
    CHECK(res.log.epochs[static_cast<std::size_t>(res.log.best_epoch)].is_best);
}

TEST_CASE("source holdout is polygon-exclusive and roughly one fifth") {
    Fixture f;
    auto [train, holdout] = detail::source_holdout(f.source, 7);
    CHECK(!train.empty());
    CHECK(!holdout.empty());
    std::set<std::uint32_t> train_pids, holdout_pids;
    for (const auto& r : train) train_pids.insert(f.source.polygon_ids[r.idx]);
    for (const auto& r : holdout) holdout_pids.insert(f.source.polygon_ids[r.idx]);
    for (auto pid : holdout_pids) CHECK(train_pids.count(pid) == 0);
    const double frac =
        static_cast<double>(holdout.size()) / static_cast<double>(f.source.size());
    CHECK(frac > 0.1);
    CHECK(frac < 0.35);
}

TEST_CASE("training is deterministic in the seed") {
    Fixture f;
    const auto a = train_strategy(f.source, f.train, f.val,
                                  f.config(Strategy::SourceTarget));
    const auto b = train_strategy(f.source, f.train, f.val,
                                  f.config(Strategy::SourceTarget));
    REQUIRE(a.log.epochs.size() == b.log.epochs.size());
    for (std::size_t i = 0; i < a.log.epochs.size(); ++i) {
        CHECK(a.log.epochs[i].l_cl == b.log.epochs[i].l_cl);
        CHECK(a.log.epochs[i].val_f1 == b.log.epochs[i].val_f1);
    }
}

TEST_CASE("metadata mismatch is rejected") {
    Fixture f;
    LabeledDataset wrong = f.source;
    wrong.t_len = 5;
    wrong.features.resize(wrong.size() * wrong.sample_len());
    CHECK_THROWS_AS(train_strategy(wrong, f.train, f.val,
                                   f.config(Strategy::SourceTarget)),
                    std::invalid_argument);
}
