#include "refed/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include <json.hpp>

namespace refed {

namespace {

constexpr char kMagic[8] = {'R', 'E', 'F', 'D', '0', '0', '0', '1'};

void write_common(const NamedTensors<float>& state, const CheckpointMeta& meta,
                  const std::string& path) {
    nlohmann::ordered_json header;
    header["kind"] = meta.kind;
    header["config_digest"] = meta.config_digest;
    header["best_epoch"] = meta.best_epoch;
    header["t_len"] = meta.t_len;
    header["n_bands"] = meta.n_bands;
    header["n_classes"] = meta.n_classes;
    header["tau"] = meta.tau;
    header["dropout"] = meta.dropout;
    header["normalize_embeddings"] = meta.normalize_embeddings;
    nlohmann::ordered_json tensors = nlohmann::ordered_json::array();
    std::size_t offset = 0;
    for (const auto& [name, tensor] : state) {
        tensors.push_back({{"name", name},
                           {"shape", tensor->shape},
                           {"offset", offset}});
        offset += tensor->size() * sizeof(float);
    }
    header["tensors"] = std::move(tensors);
    const std::string htext = header.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out.write(kMagic, 8);
    const std::uint32_t hlen = static_cast<std::uint32_t>(htext.size());
    out.write(reinterpret_cast<const char*>(&hlen), 4);
    out.write(htext.data(), static_cast<std::streamsize>(htext.size()));
    for (const auto& [name, tensor] : state)
        out.write(reinterpret_cast<const char*>(tensor->data()),
                  static_cast<std::streamsize>(tensor->size() * sizeof(float)));
    if (!out) throw std::runtime_error("write failure on '" + path + "'");
}

void read_into(std::ifstream& in, const nlohmann::json& header,
               const NamedTensors<float>& state, std::size_t payload_base) {
    std::map<std::string, const nlohmann::json*> directory;
    for (const auto& t : header.at("tensors"))
        directory[t.at("name").get<std::string>()] = &t;
    for (const auto& [name, tensor] : state) {
        auto it = directory.find(name);
        if (it == directory.end())
            throw std::runtime_error("checkpoint: missing tensor '" + name + "'");
        const auto& entry = *it->second;
        const auto shape = entry.at("shape").get<std::vector<std::size_t>>();
        if (shape != tensor->shape)
            throw std::runtime_error("checkpoint: shape mismatch for '" + name + "'");
        const std::size_t offset = entry.at("offset").get<std::size_t>();
        in.seekg(static_cast<std::streamoff>(payload_base + offset));
        in.read(reinterpret_cast<char*>(tensor->data()),
                static_cast<std::streamsize>(tensor->size() * sizeof(float)));
        if (!in) throw std::runtime_error("checkpoint: truncated payload at '" + name + "'");
    }
}

} // namespace

std::string fnv1a_hex(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void save_checkpoint(RefedModel<float>& model, const CheckpointMeta& meta,
                     const std::string& path) {
    CheckpointMeta m = meta;
    m.kind = "refed";
    m.t_len = model.t_len;
    m.n_bands = model.c_in;
    m.n_classes = model.n_classes;
    m.tau = model.tau;
    m.normalize_embeddings = model.normalize_embeddings;
    write_common(model.state(), m, path);
}

void save_checkpoint(TempCnnModel<float>& model, const CheckpointMeta& meta,
                     const std::string& path) {
    CheckpointMeta m = meta;
    m.kind = "tempcnn";
    m.t_len = model.enc.t_len;
    m.n_bands = model.enc.c_in;
    m.n_classes = model.cls.n_out;
    write_common(model.state(), m, path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint '" + path + "'");
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kMagic, 8) != 0)
        throw std::runtime_error("checkpoint: magic mismatch");
    std::uint32_t hlen = 0;
    in.read(reinterpret_cast<char*>(&hlen), 4);
    std::string htext(hlen, '\0');
    in.read(htext.data(), hlen);
    if (!in) throw std::runtime_error("checkpoint: truncated header");
    const auto header = nlohmann::json::parse(htext);

    LoadedCheckpoint ck;
    ck.meta.kind = header.at("kind").get<std::string>();
    ck.meta.config_digest = header.value("config_digest", "");
    ck.meta.best_epoch = header.value("best_epoch", -1);
    ck.meta.t_len = header.at("t_len").get<std::size_t>();
    ck.meta.n_bands = header.at("n_bands").get<std::size_t>();
    ck.meta.n_classes = header.at("n_classes").get<std::size_t>();
    ck.meta.tau = header.value("tau", 0.07);
    ck.meta.dropout = header.value("dropout", 0.5);
    ck.meta.normalize_embeddings = header.value("normalize_embeddings", true);

    const std::size_t payload_base = 8 + 4 + hlen;
    if (ck.meta.kind == "refed") {
        ck.refed.init(ck.meta.t_len, ck.meta.n_bands, ck.meta.n_classes,
                      static_cast<float>(ck.meta.dropout),
                      static_cast<float>(ck.meta.tau),
                      ck.meta.normalize_embeddings, 0);
        read_into(in, header, ck.refed.state(), payload_base);
    } else if (ck.meta.kind == "tempcnn") {
        ck.tempcnn.init(ck.meta.t_len, ck.meta.n_bands, ck.meta.n_classes,
                        static_cast<float>(ck.meta.dropout), 0);
        read_into(in, header, ck.tempcnn.state(), payload_base);
    } else {
        throw std::runtime_error("checkpoint: unknown model kind '" + ck.meta.kind + "'");
    }
    return ck;
}

} // namespace refed
