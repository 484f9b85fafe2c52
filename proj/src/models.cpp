#include "lk/models.hpp"

#include <cmath>
#include <stdexcept>

#include "json.hpp"
#include "lk/ops.hpp"

using nlohmann::json;

namespace lk {

namespace {

Tensor& add_param(Model& m, const std::string& name, std::vector<int> shape) {
    Param p;
    p.name = name;
    p.tensor = Tensor::zeros(std::move(shape), true);
    m.params.push_back(std::move(p));
    return m.params.back().tensor;
}

Tensor maybe_dropout(const Tensor& x, double rate, ForwardCtx& ctx) {
    if (!ctx.training || rate == 0.0) return x;
    if (!ctx.rng)
        throw std::invalid_argument("forward: training mode needs a generator for dropout");
    return ops::dropout(x, rate, *ctx.rng, true);
}

void check_input(const Tensor& x, int channels, int size, const char* arch) {
    if (x.ndim() != 4 || x.shape()[1] != channels || x.shape()[2] != size ||
        x.shape()[3] != size)
        throw std::invalid_argument(std::string(arch) + ": expected input [N," +
                                    std::to_string(channels) + "," + std::to_string(size) + "," +
                                    std::to_string(size) + "], got " +
                                    Tensor::shape_str(x.shape()));
}

int scaled_width(int base, double multiplier) {
    return std::max(1, int(std::lround(double(base) * multiplier)));
}

}  // namespace

Tensor* Model::find(const std::string& name) {
    for (auto& p : params)
        if (p.name == name) return &p.tensor;
    return nullptr;
}

const Tensor* Model::find(const std::string& name) const {
    for (const auto& p : params)
        if (p.name == name) return &p.tensor;
    return nullptr;
}

void init_parameters(Model& m, Rng& rng) {
    for (auto& p : m.params) {
        double* data = p.tensor.data();
        const int64_t n = p.tensor.numel();
        const auto& shape = p.tensor.shape();
        const bool is_bias = p.name.size() >= 5 && p.name.compare(p.name.size() - 5, 5, ".bias") == 0;
        if (is_bias) {
            for (int64_t i = 0; i < n; ++i) data[i] = 0.0;
            continue;
        }
        int64_t fan_in = 1;
        for (size_t d = 1; d < shape.size(); ++d) fan_in *= shape[d];
        if (shape.size() == 2) fan_in = shape[0];  // dense weights are [D,M]
        const double stddev = std::sqrt(2.0 / double(fan_in));
        for (int64_t i = 0; i < n; ++i) data[i] = rng.normal() * stddev;
    }
}

int64_t param_count(const Model& m) {
    int64_t total = 0;
    for (const auto& p : m.params) total += p.tensor.numel();
    return total;
}

Model build_unet(const UNetConfig& cfg, Rng& rng) {
    if (cfg.input_size <= 0 || cfg.input_size % 8 != 0)
        throw std::invalid_argument("build_unet: input_size " + std::to_string(cfg.input_size) +
                                    " must be a positive multiple of 8");
    if (cfg.base_channels < 1) throw std::invalid_argument("build_unet: base_channels must be >= 1");
    if (cfg.bottleneck_width < 1)
        throw std::invalid_argument("build_unet: bottleneck_width must be >= 1");
    if (cfg.in_channels < 1) throw std::invalid_argument("build_unet: in_channels must be >= 1");
    if (!(cfg.dropout_rate >= 0.0 && cfg.dropout_rate < 1.0))
        throw std::invalid_argument("build_unet: dropout_rate must lie in [0,1)");

    Model m;
    m.arch = "unet";
    m.config_json = unet_config_json(cfg);

    const int b = cfg.base_channels;
    const int bottom = cfg.input_size / 8;
    const int flat = 4 * b * bottom * bottom;

    add_param(m, "enc1a.weight", {b, cfg.in_channels, 3, 3});
    add_param(m, "enc1a.bias", {b});
    add_param(m, "enc1b.weight", {b, b, 3, 3});
    add_param(m, "enc1b.bias", {b});
    add_param(m, "enc2a.weight", {2 * b, b, 3, 3});
    add_param(m, "enc2a.bias", {2 * b});
    add_param(m, "enc2b.weight", {2 * b, 2 * b, 3, 3});
    add_param(m, "enc2b.bias", {2 * b});
    add_param(m, "enc3a.weight", {4 * b, 2 * b, 3, 3});
    add_param(m, "enc3a.bias", {4 * b});
    add_param(m, "enc3b.weight", {4 * b, 4 * b, 3, 3});
    add_param(m, "enc3b.bias", {4 * b});
    add_param(m, "fc1.weight", {flat, cfg.bottleneck_width});
    add_param(m, "fc1.bias", {cfg.bottleneck_width});
    add_param(m, "fc2.weight", {cfg.bottleneck_width, flat});
    add_param(m, "fc2.bias", {flat});
    add_param(m, "dec3a.weight", {4 * b, 8 * b, 3, 3});
    add_param(m, "dec3a.bias", {4 * b});
    add_param(m, "dec3b.weight", {4 * b, 4 * b, 3, 3});
    add_param(m, "dec3b.bias", {4 * b});
    add_param(m, "dec2a.weight", {2 * b, 6 * b, 3, 3});
    add_param(m, "dec2a.bias", {2 * b});
    add_param(m, "dec2b.weight", {2 * b, 2 * b, 3, 3});
    add_param(m, "dec2b.bias", {2 * b});
    add_param(m, "dec1a.weight", {b, 3 * b, 3, 3});
    add_param(m, "dec1a.bias", {b});
    add_param(m, "dec1b.weight", {b, b, 3, 3});
    add_param(m, "dec1b.bias", {b});
    add_param(m, "head.weight", {1, b, 1, 1});
    add_param(m, "head.bias", {1});
    init_parameters(m, rng);

    auto t = [&m](const char* name) { return *m.find(name); };
    const Tensor e1aw = t("enc1a.weight"), e1ab = t("enc1a.bias");
    const Tensor e1bw = t("enc1b.weight"), e1bb = t("enc1b.bias");
    const Tensor e2aw = t("enc2a.weight"), e2ab = t("enc2a.bias");
    const Tensor e2bw = t("enc2b.weight"), e2bb = t("enc2b.bias");
    const Tensor e3aw = t("enc3a.weight"), e3ab = t("enc3a.bias");
    const Tensor e3bw = t("enc3b.weight"), e3bb = t("enc3b.bias");
    const Tensor f1w = t("fc1.weight"), f1b = t("fc1.bias");
    const Tensor f2w = t("fc2.weight"), f2b = t("fc2.bias");
    const Tensor d3aw = t("dec3a.weight"), d3ab = t("dec3a.bias");
    const Tensor d3bw = t("dec3b.weight"), d3bb = t("dec3b.bias");
    const Tensor d2aw = t("dec2a.weight"), d2ab = t("dec2a.bias");
    const Tensor d2bw = t("dec2b.weight"), d2bb = t("dec2b.bias");
    const Tensor d1aw = t("dec1a.weight"), d1ab = t("dec1a.bias");
    const Tensor d1bw = t("dec1b.weight"), d1bb = t("dec1b.bias");
    const Tensor hw = t("head.weight"), hb = t("head.bias");
    const UNetConfig c = cfg;

    m.forward = [=](const Tensor& x, ForwardCtx& ctx) -> Tensor {
        check_input(x, c.in_channels, c.input_size, "unet");
        const int n = x.shape()[0];
        const int half = c.input_size / 8;

        Tensor e1 = ops::relu(ops::conv2d(ops::relu(ops::conv2d(x, e1aw, e1ab, 1, 1)), e1bw, e1bb, 1, 1));
        Tensor p1 = ops::maxpool2d(e1, 2);
        Tensor e2 = ops::relu(ops::conv2d(ops::relu(ops::conv2d(p1, e2aw, e2ab, 1, 1)), e2bw, e2bb, 1, 1));
        Tensor p2 = ops::maxpool2d(e2, 2);
        Tensor e3 = ops::relu(ops::conv2d(ops::relu(ops::conv2d(p2, e3aw, e3ab, 1, 1)), e3bw, e3bb, 1, 1));
        Tensor p3 = ops::maxpool2d(e3, 2);

        Tensor flat_in = ops::reshape(p3, {n, 4 * c.base_channels * half * half});
        Tensor hid = maybe_dropout(ops::relu(ops::dense(flat_in, f1w, f1b)), c.dropout_rate, ctx);
        Tensor flat_out = ops::dense(hid, f2w, f2b);
        Tensor bot = ops::reshape(flat_out, {n, 4 * c.base_channels, half, half});

        Tensor u3 = ops::concat_channels(ops::upsample_nn(bot, 2), e3);
        Tensor d3 = ops::relu(ops::conv2d(ops::relu(ops::conv2d(u3, d3aw, d3ab, 1, 1)), d3bw, d3bb, 1, 1));
        Tensor u2 = ops::concat_channels(ops::upsample_nn(d3, 2), e2);
        Tensor d2 = ops::relu(ops::conv2d(ops::relu(ops::conv2d(u2, d2aw, d2ab, 1, 1)), d2bw, d2bb, 1, 1));
        Tensor u1 = ops::concat_channels(ops::upsample_nn(d2, 2), e1);
        Tensor d1 = ops::relu(ops::conv2d(ops::relu(ops::conv2d(u1, d1aw, d1ab, 1, 1)), d1bw, d1bb, 1, 1));

        return ops::sigmoid(ops::conv2d(d1, hw, hb, 1, 0));
    };
    return m;
}

Model build_alexnet_variant(const AlexConfig& cfg, Rng& rng) {
    if (cfg.input_size <= 0) throw std::invalid_argument("build_alexnet: input_size must be positive");
    if (cfg.fc_width < 1) throw std::invalid_argument("build_alexnet: fc_width must be >= 1");
    if (cfg.num_classes < 2) throw std::invalid_argument("build_alexnet: num_classes must be >= 2");
    if (cfg.in_channels < 1) throw std::invalid_argument("build_alexnet: in_channels must be >= 1");
    if (!(cfg.dropout_rate >= 0.0 && cfg.dropout_rate < 1.0))
        throw std::invalid_argument("build_alexnet: dropout_rate must lie in [0,1)");
    if (cfg.width_multiplier <= 0.0)
        throw std::invalid_argument("build_alexnet: width_multiplier must be positive");

    const int w1 = scaled_width(96, cfg.width_multiplier);
    const int w2 = scaled_width(256, cfg.width_multiplier);
    const int w3 = scaled_width(384, cfg.width_multiplier);
    const int w4 = scaled_width(384, cfg.width_multiplier);
    const int w5 = scaled_width(256, cfg.width_multiplier);

    // trace the spatial size through the stack so a bad input names the
    // first stage that cannot run
    int s = (cfg.input_size + 2 * 5 - 11) / 4 + 1;  // conv1: 11x11 stride 4 pad 5
    if (cfg.input_size + 10 < 11)
        throw std::invalid_argument("build_alexnet: input too small for stage conv1");
    auto pool_check = [&s](const char* stage) {
        if (s < 2 || s % 2 != 0)
            throw std::invalid_argument(std::string("build_alexnet: input too small, stage ") +
                                        stage + " sees spatial size " + std::to_string(s));
        s /= 2;
    };
    pool_check("pool1");
    pool_check("pool2");  // conv2 5x5 pad 2 preserves size
    pool_check("pool3");  // conv3..conv5 3x3 pad 1 preserve size
    const int flat = w5 * s * s;

    Model m;
    m.arch = "alexnet";
    m.config_json = alex_config_json(cfg);

    add_param(m, "conv1.weight", {w1, cfg.in_channels, 11, 11});
    add_param(m, "conv1.bias", {w1});
    add_param(m, "conv2.weight", {w2, w1, 5, 5});
    add_param(m, "conv2.bias", {w2});
    add_param(m, "conv3.weight", {w3, w2, 3, 3});
    add_param(m, "conv3.bias", {w3});
    add_param(m, "conv4.weight", {w4, w3, 3, 3});
    add_param(m, "conv4.bias", {w4});
    add_param(m, "conv5.weight", {w5, w4, 3, 3});
    add_param(m, "conv5.bias", {w5});
    add_param(m, "fc1.weight", {flat, cfg.fc_width});
    add_param(m, "fc1.bias", {cfg.fc_width});
    add_param(m, "fc2.weight", {cfg.fc_width, cfg.fc_width});
    add_param(m, "fc2.bias", {cfg.fc_width});
    add_param(m, "fc3.weight", {cfg.fc_width, cfg.num_classes});
    add_param(m, "fc3.bias", {cfg.num_classes});
    init_parameters(m, rng);

    auto t = [&m](const char* name) { return *m.find(name); };
    const Tensor c1w = t("conv1.weight"), c1b = t("conv1.bias");
    const Tensor c2w = t("conv2.weight"), c2b = t("conv2.bias");
    const Tensor c3w = t("conv3.weight"), c3b = t("conv3.bias");
    const Tensor c4w = t("conv4.weight"), c4b = t("conv4.bias");
    const Tensor c5w = t("conv5.weight"), c5b = t("conv5.bias");
    const Tensor f1w = t("fc1.weight"), f1b = t("fc1.bias");
    const Tensor f2w = t("fc2.weight"), f2b = t("fc2.bias");
    const Tensor f3w = t("fc3.weight"), f3b = t("fc3.bias");
    const AlexConfig c = cfg;
    const int flat_dim = flat;

    m.forward = [=](const Tensor& x, ForwardCtx& ctx) -> Tensor {
        check_input(x, c.in_channels, c.input_size, "alexnet");
        const int n = x.shape()[0];
        Tensor p1 = ops::maxpool2d(ops::relu(ops::conv2d(x, c1w, c1b, 4, 5)), 2);
        Tensor p2 = ops::maxpool2d(ops::relu(ops::conv2d(p1, c2w, c2b, 1, 2)), 2);
        Tensor c3 = ops::relu(ops::conv2d(p2, c3w, c3b, 1, 1));
        Tensor c4 = ops::relu(ops::conv2d(c3, c4w, c4b, 1, 1));
        Tensor p3 = ops::maxpool2d(ops::relu(ops::conv2d(c4, c5w, c5b, 1, 1)), 2);
        Tensor flat_x = ops::reshape(p3, {n, flat_dim});
        Tensor h1 = maybe_dropout(ops::relu(ops::dense(flat_x, f1w, f1b)), c.dropout_rate, ctx);
        Tensor h2 = maybe_dropout(ops::relu(ops::dense(h1, f2w, f2b)), c.dropout_rate, ctx);
        return ops::softmax(ops::dense(h2, f3w, f3b));
    };
    return m;
}

std::string unet_config_json(const UNetConfig& cfg) {
    json j;
    j["input_size"] = cfg.input_size;
    j["base_channels"] = cfg.base_channels;
    j["bottleneck_width"] = cfg.bottleneck_width;
    j["dropout_rate"] = cfg.dropout_rate;
    j["in_channels"] = cfg.in_channels;
    return j.dump();
}

std::string alex_config_json(const AlexConfig& cfg) {
    json j;
    j["input_size"] = cfg.input_size;
    j["fc_width"] = cfg.fc_width;
    j["num_classes"] = cfg.num_classes;
    j["dropout_rate"] = cfg.dropout_rate;
    j["width_multiplier"] = cfg.width_multiplier;
    j["in_channels"] = cfg.in_channels;
    return j.dump();
}

UNetConfig unet_config_from_json(const std::string& js) {
    json j = json::parse(js);
    UNetConfig cfg;
    cfg.input_size = j.at("input_size").get<int>();
    cfg.base_channels = j.at("base_channels").get<int>();
    cfg.bottleneck_width = j.at("bottleneck_width").get<int>();
    cfg.dropout_rate = j.at("dropout_rate").get<double>();
    cfg.in_channels = j.at("in_channels").get<int>();
    return cfg;
}

AlexConfig alex_config_from_json(const std::string& js) {
    json j = json::parse(js);
    AlexConfig cfg;
    cfg.input_size = j.at("input_size").get<int>();
    cfg.fc_width = j.at("fc_width").get<int>();
    cfg.num_classes = j.at("num_classes").get<int>();
    cfg.dropout_rate = j.at("dropout_rate").get<double>();
    cfg.width_multiplier = j.at("width_multiplier").get<double>();
    cfg.in_channels = j.at("in_channels").get<int>();
    return cfg;
}

Model build_model(const std::string& arch, const std::string& config_json, Rng& rng) {
    if (arch == "unet") return build_unet(unet_config_from_json(config_json), rng);
    if (arch == "alexnet") return build_alexnet_variant(alex_config_from_json(config_json), rng);
    throw std::invalid_argument("build_model: unknown architecture '" + arch + "'");
}

}  // namespace lk
