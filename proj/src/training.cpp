#include "refed/training.hpp"

#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "refed/refed.hpp"

namespace refed {

std::string TrainLog::to_jsonl() const {
    std::string out;
    for (const auto& e : epochs) {
        nlohmann::ordered_json j;
        j["epoch"] = e.epoch;
        if (!e.phase.empty()) j["phase"] = e.phase;
        j["l_cl"] = e.l_cl;
        j["l_dom"] = e.l_dom;
        j["l_con_0"] = e.l_con_0;
        j["l_con_1"] = e.l_con_1;
        j["l_con_2"] = e.l_con_2;
        j["total"] = e.total;
        j["val_f1"] = e.val_f1;
        j["val_acc"] = e.val_acc;
        j["is_best"] = e.is_best;
        out += j.dump();
        out += '\n';
    }
    return out;
}

void export_embeddings(const LabeledDataset& ds, RefedModel<float>& model,
                       int level, const std::string& out_path) {
    std::ofstream out(out_path);
    if (!out) throw std::runtime_error("cannot open '" + out_path + "' for writing");
    const std::size_t chunk = 512;
    auto pool = make_pool(ds);
    Tensor<float> x;
    std::vector<int> labels, domains;
    char buf[64];
    for (std::size_t begin = 0; begin < pool.size(); begin += chunk) {
        const std::size_t end = std::min(begin + chunk, pool.size());
        fill_batch(pool, begin, end, x, labels, domains);
        Tensor<float> z = embed_level(model, x, level);
        const std::size_t d = z.dim(1);
        for (std::size_t b = 0; b + begin < end; ++b) {
            out << (begin + b) << ',' << labels[b] << ',' << domains[b];
            const float* row = z.data() + b * d;
            for (std::size_t c = 0; c < d; ++c) {
                std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(row[c]));
                out << ',' << buf;
            }
            out << '\n';
        }
    }
    if (!out) throw std::runtime_error("write failure on '" + out_path + "'");
}

} // namespace refed
