#pragma once

#include <string>

#include "lk/models.hpp"
#include "lk/optimizer.hpp"

namespace lk {

struct CheckpointMeta {
    std::string arch;         // "unet" or "alexnet"
    std::string config_json;  // model config as produced at build time
    int epoch = 0;
    double metric = 0.0;      // validation metric recorded at that epoch
};

// Flat little-endian container: "LKCP" magic, format version, a JSON header
// (arch, config, epoch, metric, optional optimizer scalars), then named
// (name, shape, float64 values) records covering every parameter. Passing
// adam adds its first/second-moment vectors so training resumes exactly.
std::string serialize_checkpoint(const Model& model, const CheckpointMeta& meta,
                                 const AdamState* adam = nullptr);

struct LoadedCheckpoint {
    CheckpointMeta meta;
    Model model;     // rebuilt from the header, parameters filled from the records
    bool has_adam = false;
    AdamState adam;  // aligned with model.params when has_adam
};

LoadedCheckpoint parse_checkpoint(const std::string& bytes);

void save_checkpoint(const std::string& path, const Model& model, const CheckpointMeta& meta,
                     const AdamState* adam = nullptr);
LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace lk
