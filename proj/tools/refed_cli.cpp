// Command-line front end: dataset synthesis, splitting, training, evaluation,
// prediction, the multi-repeat experiment protocol, gradient checking, and
// embedding export. Every command is deterministic given its flags and input
// files; all randomness flows from explicit seeds.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "refed/baselines.hpp"
#include "refed/checkpoint.hpp"
#include "refed/experiment.hpp"
#include "refed/gradsuite.hpp"
#include "refed/preprocess.hpp"
#include "refed/refed.hpp"
#include "refed/synthgen.hpp"

namespace {

// Exit codes: 0 success, 2 file not found, 3 parse error, 4 config
// validation error, 1 anything else.
constexpr int kExitOther = 1;
constexpr int kExitFileNotFound = 2;
constexpr int kExitParse = 3;
constexpr int kExitConfig = 4;

struct FileNotFound : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path) {
    if (!std::filesystem::exists(path))
        throw FileNotFound("no such file: " + path);
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FileNotFound("cannot open: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out << text;
    if (!out) throw std::runtime_error("write failure on '" + path + "'");
}

refed::LabeledDataset load_scaled(const std::string& path) {
    if (!std::filesystem::exists(path))
        throw FileNotFound("no such file: " + path);
    auto ds = refed::load_dataset(path);
    return refed::apply_scaling(ds, refed::fit_scaling(ds));
}

// Run configuration shared by train/eval/predict; defaults are echoed into
// the sidecar written next to every checkpoint.
struct RunConfig {
    std::string mode = "refed";
    int epochs = 200;
    double lr = 1e-4;
    std::size_t batch_size = 0; // 0: 512 for refed, 256 otherwise
    double tau = 0.07;
    double dropout = 0.5;
    double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8, weight_decay = 0.01;
    bool normalize_embeddings = true;
    std::uint64_t seed = 0;
    int finetune_source_epochs = -1; // -1: half of epochs

    std::size_t resolved_batch() const {
        if (batch_size > 0) return batch_size;
        return mode == "refed" ? 512 : 256;
    }
    int resolved_finetune_epochs() const {
        return finetune_source_epochs > 0 ? finetune_source_epochs : epochs / 2;
    }

    void validate() const {
        static const char* modes[] = {"refed", "only_source", "only_target",
                                      "source_target", "finetune"};
        bool ok = false;
        for (const char* m : modes) ok = ok || mode == m;
        if (!ok) throw ConfigError("config: unknown mode '" + mode + "'");
        if (epochs <= 0) throw ConfigError("config: epochs must be positive");
        if (lr <= 0) throw ConfigError("config: lr must be positive");
        if (tau <= 0) throw ConfigError("config: tau must be positive");
        if (dropout < 0 || dropout >= 1)
            throw ConfigError("config: dropout must be in [0, 1)");
        if (mode == "finetune" && resolved_finetune_epochs() >= epochs)
            throw ConfigError("config: finetune source epochs must leave room "
                              "for the target phase");
    }

    std::string to_json() const {
        nlohmann::ordered_json j;
        j["mode"] = mode;
        j["epochs"] = epochs;
        j["lr"] = lr;
        j["batch_size"] = resolved_batch();
        j["tau"] = tau;
        j["dropout"] = dropout;
        j["beta1"] = beta1;
        j["beta2"] = beta2;
        j["adam_eps"] = adam_eps;
        j["weight_decay"] = weight_decay;
        j["normalize_embeddings"] = normalize_embeddings;
        j["seed"] = seed;
        j["finetune_source_epochs"] = resolved_finetune_epochs();
        return j.dump(2) + "\n";
    }

    static RunConfig from_json(const std::string& text) {
        const auto j = nlohmann::json::parse(text);
        RunConfig c;
        c.mode = j.value("mode", c.mode);
        c.epochs = j.value("epochs", c.epochs);
        c.lr = j.value("lr", c.lr);
        c.batch_size = j.value("batch_size", c.batch_size);
        c.tau = j.value("tau", c.tau);
        c.dropout = j.value("dropout", c.dropout);
        c.beta1 = j.value("beta1", c.beta1);
        c.beta2 = j.value("beta2", c.beta2);
        c.adam_eps = j.value("adam_eps", c.adam_eps);
        c.weight_decay = j.value("weight_decay", c.weight_decay);
        c.normalize_embeddings =
            j.value("normalize_embeddings", c.normalize_embeddings);
        c.seed = j.value("seed", c.seed);
        c.finetune_source_epochs =
            j.value("finetune_source_epochs", c.finetune_source_epochs);
        return c;
    }
};

refed::AdamWConfig adam_of(const RunConfig& c) {
    refed::AdamWConfig a;
    a.lr = c.lr;
    a.beta1 = c.beta1;
    a.beta2 = c.beta2;
    a.eps = c.adam_eps;
    a.weight_decay = c.weight_decay;
    return a;
}

int cmd_synth(const std::string& config_path, const std::string& out_dir) {
    refed::GeneratorConfig cfg;
    if (!config_path.empty())
        cfg = refed::GeneratorConfig::from_json(read_file(config_path));
    std::filesystem::create_directories(out_dir);
    auto [source, target] = refed::generate(cfg);
    refed::save_dataset(source, out_dir + "/source.sitsb");
    refed::save_dataset(target, out_dir + "/target.sitsb");
    write_file(out_dir + "/generator.json", cfg.to_json());
    std::cout << "wrote " << source.size() << " source and " << target.size()
              << " target samples to " << out_dir << "\n";
    return 0;
}

int cmd_split(const std::string& data_path, const std::string& ratios_str,
              std::uint64_t seed, const std::string& out_path) {
    std::array<double, 3> ratios{0.5, 0.2, 0.3};
    if (std::sscanf(ratios_str.c_str(), "%lf,%lf,%lf", &ratios[0], &ratios[1],
                    &ratios[2]) != 3)
        throw ConfigError("split: --ratios must be three comma-separated numbers");
    if (!std::filesystem::exists(data_path))
        throw FileNotFound("no such file: " + data_path);
    const auto ds = refed::load_dataset(data_path);
    const auto split = refed::polygon_split(ds, ratios, seed);
    write_file(out_path, split.to_json());
    for (const auto& w : split.warnings) std::cerr << "warning: " << w << "\n";
    std::cout << "split " << split.assignment.size() << " polygons: train "
              << split.achieved[0] << ", val " << split.achieved[1] << ", test "
              << split.achieved[2] << "\n";
    return 0;
}

int cmd_train(const std::string& mode_flag, const std::string& source_path,
              const std::string& target_path, const std::string& split_path,
              const std::string& config_path, const std::string& out_path,
              const std::string& log_path) {
    RunConfig cfg;
    if (!config_path.empty()) cfg = RunConfig::from_json(read_file(config_path));
    if (!mode_flag.empty()) cfg.mode = mode_flag;
    cfg.validate();

    const auto target = load_scaled(target_path);
    const auto split = refed::SplitAssignment::from_json(read_file(split_path));
    const auto train_pool = refed::make_pool(
        target, refed::partition_indices(target, split, refed::Partition::Train));
    const auto val_pool = refed::make_pool(
        target, refed::partition_indices(target, split, refed::Partition::Validation));

    refed::LabeledDataset source;
    if (cfg.mode != "only_target") {
        if (source_path.empty())
            throw ConfigError("train: mode '" + cfg.mode + "' needs --source");
        source = load_scaled(source_path);
    }

    const std::string config_json = cfg.to_json();
    refed::CheckpointMeta meta;
    meta.config_digest = refed::fnv1a_hex(config_json);
    meta.tau = cfg.tau;
    meta.dropout = cfg.dropout;
    meta.normalize_embeddings = cfg.normalize_embeddings;

    refed::TrainLog log;
    if (cfg.mode == "refed") {
        refed::RefedTrainConfig rc;
        rc.epochs = cfg.epochs;
        rc.batch_size = cfg.resolved_batch();
        rc.opt = adam_of(cfg);
        rc.tau = cfg.tau;
        rc.dropout = cfg.dropout;
        rc.normalize_embeddings = cfg.normalize_embeddings;
        rc.seed = cfg.seed;
        auto fit = refed::fit_refed(source, train_pool, val_pool, rc);
        log = std::move(fit.log);
        meta.best_epoch = log.best_epoch;
        refed::save_checkpoint(fit.model, meta, out_path);
    } else {
        refed::StrategyConfig sc;
        sc.strategy = refed::strategy_from_name(cfg.mode);
        sc.epochs = cfg.epochs;
        sc.finetune_source_epochs = cfg.resolved_finetune_epochs();
        sc.batch_size = cfg.resolved_batch();
        sc.opt = adam_of(cfg);
        sc.dropout = cfg.dropout;
        sc.seed = cfg.seed;
        // OnlyTarget never reads the source; pass the target for its metadata.
        const refed::LabeledDataset& src =
            cfg.mode == "only_target" ? target : source;
        auto fit = refed::train_strategy(src, train_pool, val_pool, sc);
        log = std::move(fit.log);
        meta.best_epoch = log.best_epoch;
        refed::save_checkpoint(fit.model, meta, out_path);
    }
    write_file(out_path + ".config.json", config_json);
    if (!log_path.empty()) write_file(log_path, log.to_jsonl());
    std::cout << "trained " << cfg.mode << ": best epoch " << log.best_epoch
              << ", val F1 " << log.best_val_f1 << "\n";
    return 0;
}

std::vector<int> checkpoint_predict(refed::LoadedCheckpoint& ck,
                                    const std::vector<refed::SampleRef>& pool) {
    auto logits_fn = [&](const refed::Tensor<float>& b) {
        return ck.meta.kind == "refed" ? ck.refed.logits(b, refed::Mode::Eval)
                                       : ck.tempcnn.logits(b, refed::Mode::Eval);
    };
    return refed::predict_pool<float>(pool, logits_fn);
}

int cmd_eval(const std::string& ckpt_path, const std::string& data_path,
             const std::string& split_path, const std::string& out_path) {
    if (!std::filesystem::exists(ckpt_path))
        throw FileNotFound("no such file: " + ckpt_path);
    auto ck = refed::load_checkpoint(ckpt_path);
    const auto ds = load_scaled(data_path);

    std::vector<std::size_t> indices;
    if (!split_path.empty()) {
        const auto split = refed::SplitAssignment::from_json(read_file(split_path));
        indices = refed::partition_indices(ds, split, refed::Partition::Test);
    } else {
        indices.resize(ds.size());
        for (std::size_t i = 0; i < ds.size(); ++i) indices[i] = i;
    }
    const auto pool = refed::make_pool(ds, indices);
    const auto preds = checkpoint_predict(ck, pool);
    std::vector<int> ref(indices.size());
    for (std::size_t i = 0; i < indices.size(); ++i) ref[i] = ds.labels[indices[i]];
    const auto cm = refed::confusion(ref, preds, ds.n_classes);

    nlohmann::ordered_json j;
    j["checkpoint"] = ckpt_path;
    j["kind"] = ck.meta.kind;
    j["n"] = indices.size();
    j["accuracy"] = refed::accuracy(cm);
    j["weighted_f1"] = refed::weighted_f1(cm);
    j["per_class_f1"] = refed::per_class_f1(cm);
    j["class_names"] = ds.class_names;
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (std::size_t r = 0; r < cm.k; ++r) {
        nlohmann::ordered_json row = nlohmann::ordered_json::array();
        for (std::size_t c = 0; c < cm.k; ++c) row.push_back(cm.at(r, c));
        rows.push_back(std::move(row));
    }
    j["confusion"] = std::move(rows);
    const std::string text = j.dump(2) + "\n";
    if (out_path.empty()) std::cout << text;
    else write_file(out_path, text);
    return 0;
}

int cmd_predict(const std::string& ckpt_path, const std::string& data_path,
                const std::string& out_path) {
    if (!std::filesystem::exists(ckpt_path))
        throw FileNotFound("no such file: " + ckpt_path);
    auto ck = refed::load_checkpoint(ckpt_path);
    const auto ds = load_scaled(data_path);

    std::ofstream out(out_path);
    if (!out) throw std::runtime_error("cannot open '" + out_path + "' for writing");
    const std::size_t chunk = 512;
    const auto pool = refed::make_pool(ds);
    refed::Tensor<float> x;
    std::vector<int> labels, domains;
    char buf[64];
    for (std::size_t begin = 0; begin < pool.size(); begin += chunk) {
        const std::size_t end = std::min(begin + chunk, pool.size());
        refed::fill_batch(pool, begin, end, x, labels, domains);
        refed::Tensor<float> logits = ck.meta.kind == "refed"
                                          ? ck.refed.logits(x, refed::Mode::Eval)
                                          : ck.tempcnn.logits(x, refed::Mode::Eval);
        refed::Tensor<float> probs;
        refed::kernels::softmax_rows(logits, probs);
        const std::size_t k = probs.dim(1);
        for (std::size_t b = 0; b + begin < end; ++b) {
            const float* row = probs.data() + b * k;
            std::size_t arg = 0;
            for (std::size_t j = 1; j < k; ++j)
                if (row[j] > row[arg]) arg = j;
            out << (begin + b) << ',' << arg;
            for (std::size_t j = 0; j < k; ++j) {
                std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(row[j]));
                out << ',' << buf;
            }
            out << '\n';
        }
    }
    if (!out) throw std::runtime_error("write failure on '" + out_path + "'");
    return 0;
}

int cmd_experiment(const std::string& config_path, const std::string& out_path) {
    const std::string text = read_file(config_path);
    const auto j = nlohmann::json::parse(text);
    if (!j.contains("source") || !j.contains("target"))
        throw ConfigError("experiment config needs 'source' and 'target' dataset paths");
    auto cfg = refed::ExperimentConfig::from_json(text);
    const auto source = [&] {
        if (!std::filesystem::exists(j["source"].get<std::string>()))
            throw FileNotFound("no such file: " + j["source"].get<std::string>());
        return refed::load_dataset(j["source"].get<std::string>());
    }();
    const auto target = [&] {
        if (!std::filesystem::exists(j["target"].get<std::string>()))
            throw FileNotFound("no such file: " + j["target"].get<std::string>());
        return refed::load_dataset(j["target"].get<std::string>());
    }();
    const auto report = refed::run_experiment(source, target, cfg);
    std::cout << report.to_table();
    if (!out_path.empty()) write_file(out_path, report.to_json());
    return 0;
}

int cmd_gradcheck(double tol, std::size_t seeds) {
    const auto res = refed::run_grad_suite(seeds);
    // one line per distinct check name, worst error across seeds
    std::map<std::string, double> worst;
    for (const auto& c : res.checks)
        worst[c.name] = std::max(worst[c.name], c.max_rel_err);
    for (const auto& [name, err] : worst)
        std::printf("%-24s max rel err %.3e\n", name.c_str(), err);
    std::printf("gradcheck %s: max rel err %.3e (tol %.1e, %zu seeds)\n",
                res.pass(tol) ? "PASS" : "FAIL", res.max_rel_err(), tol, seeds);
    return res.pass(tol) ? 0 : 1;
}

int cmd_export_embeddings(const std::string& ckpt_path,
                          const std::string& data_path, int level,
                          const std::string& out_path) {
    if (!std::filesystem::exists(ckpt_path))
        throw FileNotFound("no such file: " + ckpt_path);
    auto ck = refed::load_checkpoint(ckpt_path);
    if (ck.meta.kind != "refed")
        throw ConfigError("export-embeddings needs a refed checkpoint");
    const auto ds = load_scaled(data_path);
    refed::export_embeddings(ds, ck.refed, level, out_path);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Feature-disentanglement toolkit for satellite image time "
                 "series classification across domains"};
    app.require_subcommand(1);

    std::string config_path, out_path, data_path, source_path, target_path;
    std::string split_path, ckpt_path, log_path, mode, ratios = "0.5,0.2,0.3";
    std::uint64_t seed = 0;
    double tol = 1e-4;
    std::size_t n_seeds = 20;
    int level = 1;

    auto* synth = app.add_subcommand("synth", "Generate a two-domain synthetic benchmark");
    synth->add_option("--config", config_path, "Generator config JSON");
    synth->add_option("--out", out_path, "Output directory")->required();

    auto* split = app.add_subcommand("split", "Polygon-aware stratified split");
    split->add_option("--data", data_path, "SITSB dataset")->required();
    split->add_option("--ratios", ratios, "train,val,test fractions");
    split->add_option("--seed", seed, "Split seed");
    split->add_option("--out", out_path, "Split JSON output")->required();

    auto* train = app.add_subcommand("train", "Train one strategy");
    train->add_option("--mode", mode,
                      "refed | only_source | only_target | source_target | finetune");
    train->add_option("--source", source_path, "Source-domain SITSB dataset");
    train->add_option("--target", target_path, "Target-domain SITSB dataset")->required();
    train->add_option("--split", split_path, "Target split JSON")->required();
    train->add_option("--config", config_path, "Run config JSON");
    train->add_option("--out", out_path, "Checkpoint output")->required();
    train->add_option("--log", log_path, "Per-epoch JSON-lines log");

    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
    eval->add_option("--ckpt", ckpt_path, "Checkpoint")->required();
    eval->add_option("--data", data_path, "SITSB dataset")->required();
    eval->add_option("--split", split_path, "Split JSON (scores the test partition)");
    eval->add_option("--out", out_path, "Metrics JSON (stdout when omitted)");

    auto* predict = app.add_subcommand("predict", "Per-sample predictions CSV");
    predict->add_option("--ckpt", ckpt_path, "Checkpoint")->required();
    predict->add_option("--data", data_path, "SITSB dataset")->required();
    predict->add_option("--out", out_path, "CSV output")->required();

    auto* exp = app.add_subcommand("experiment", "Multi-repeat strategy comparison");
    exp->add_option("--config", config_path, "Experiment config JSON")->required();
    exp->add_option("--out", out_path, "Report JSON output");

    auto* gc = app.add_subcommand("gradcheck", "Finite-difference gradient audit");
    gc->add_option("--tol", tol, "Max allowed relative error");
    gc->add_option("--seeds", n_seeds, "Number of random seeds");

    auto* emb = app.add_subcommand("export-embeddings",
                                   "Invariant-branch features as CSV");
    emb->add_option("--ckpt", ckpt_path, "Checkpoint (refed)")->required();
    emb->add_option("--data", data_path, "SITSB dataset")->required();
    emb->add_option("--level", level, "Supervision level 0, 1 or 2")
        ->check(CLI::Range(0, 2));
    emb->add_option("--out", out_path, "CSV output")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) return cmd_synth(config_path, out_path);
        if (split->parsed()) return cmd_split(data_path, ratios, seed, out_path);
        if (train->parsed())
            return cmd_train(mode, source_path, target_path, split_path,
                             config_path, out_path, log_path);
        if (eval->parsed()) return cmd_eval(ckpt_path, data_path, split_path, out_path);
        if (predict->parsed()) return cmd_predict(ckpt_path, data_path, out_path);
        if (exp->parsed()) return cmd_experiment(config_path, out_path);
        if (gc->parsed()) return cmd_gradcheck(tol, n_seeds);
        if (emb->parsed())
            return cmd_export_embeddings(ckpt_path, data_path, level, out_path);
    } catch (const FileNotFound& e) {
        std::cerr << "error: file-not-found: " << e.what() << "\n";
        return kExitFileNotFound;
    } catch (const refed::ParseError& e) {
        std::cerr << "error: parse: " << e.what() << "\n";
        return kExitParse;
    } catch (const nlohmann::json::parse_error& e) {
        std::cerr << "error: parse: " << e.what() << "\n";
        return kExitParse;
    } catch (const ConfigError& e) {
        std::cerr << "error: config: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: config: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitOther;
    }
    return kExitOther;
}
