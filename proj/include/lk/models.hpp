#pragma once

#include <functional>
#include <string>
#include <vector>

#include "lk/rng.hpp"
#include "lk/tensor.hpp"

namespace lk {

struct UNetConfig {
    int input_size = 64;  // square, divisible by 8 (three pooling halvings)
    int base_channels = 8;
    int bottleneck_width = 128;
    double dropout_rate = 0.5;
    int in_channels = 3;
};

struct AlexConfig {
    int input_size = 64;
    int fc_width = 1024;
    int num_classes = 3;
    double dropout_rate = 0.5;
    double width_multiplier = 1.0;  // scales the five conv stage widths together
    int in_channels = 3;
};

struct Param {
    std::string name;
    Tensor tensor;
};

struct ForwardCtx {
    bool training = false;
    Rng* rng = nullptr;  // dropout stream, required when training
};

struct Model {
    std::string arch;         // "unet" or "alexnet"
    std::string config_json;  // rebuilt from checkpoints byte-for-byte
    std::vector<Param> params;
    std::function<Tensor(const Tensor&, ForwardCtx&)> forward;

    Tensor* find(const std::string& name);
    const Tensor* find(const std::string& name) const;
};

Model build_unet(const UNetConfig& cfg, Rng& rng);
Model build_alexnet_variant(const AlexConfig& cfg, Rng& rng);

// zero-mean normal with variance 2/fan_in on weights, zero biases
void init_parameters(Model& m, Rng& rng);

int64_t param_count(const Model& m);

std::string unet_config_json(const UNetConfig& cfg);
std::string alex_config_json(const AlexConfig& cfg);
UNetConfig unet_config_from_json(const std::string& js);
AlexConfig alex_config_from_json(const std::string& js);

// rebuilds either architecture from its checkpoint header fields
Model build_model(const std::string& arch, const std::string& config_json, Rng& rng);

}  // namespace lk
