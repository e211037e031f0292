#ifndef REFED_CHECKPOINT_HPP
#define REFED_CHECKPOINT_HPP

#include <string>

#include "refed/refed.hpp"
#include "refed/tempcnn.hpp"

namespace refed {

/// Model checkpoint: magic "REFD0001", u32 header length, UTF-8 JSON header
/// (model kind, geometry, config digest, tensor directory with byte
/// offsets), then a little-endian float32 payload.
struct CheckpointMeta {
    std::string kind;          // "refed" or "tempcnn"
    std::string config_digest; // hex FNV-1a of the run config
    int best_epoch = -1;
    std::size_t t_len = 0, n_bands = 0, n_classes = 0;
    double tau = 0.07, dropout = 0.5;
    bool normalize_embeddings = true;
};

std::string fnv1a_hex(const std::string& text);

void save_checkpoint(RefedModel<float>& model, const CheckpointMeta& meta,
                     const std::string& path);
void save_checkpoint(TempCnnModel<float>& model, const CheckpointMeta& meta,
                     const std::string& path);

struct LoadedCheckpoint {
    CheckpointMeta meta;
    // Exactly one of these is populated, matching meta.kind.
    RefedModel<float> refed;
    TempCnnModel<float> tempcnn;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

} // namespace refed

#endif
