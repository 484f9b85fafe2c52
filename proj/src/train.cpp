#include "lk/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>

#include "json.hpp"
#include "lk/ensemble.hpp"
#include "lk/models.hpp"
#include "lk/ops.hpp"
#include "lk/optimizer.hpp"

namespace lk {

namespace {

using nlohmann::json;

void check_config(const TrainConfig& cfg) {
    if (cfg.task != "segmentation" && cfg.task != "classification")
        throw std::invalid_argument("train config: unknown task '" + cfg.task + "'");
    if (cfg.epochs < 1) throw std::invalid_argument("train config: epochs must be >= 1");
    if (cfg.batch_size < 1) throw std::invalid_argument("train config: batch size must be >= 1");
    if (cfg.folds < 2) throw std::invalid_argument("train config: folds must be >= 2");
    if (!(cfg.lr > 0.0))
        throw std::invalid_argument("train config: learning rate must be positive");
}

Model build_for(const TrainConfig& cfg, Rng& rng) {
    if (cfg.task == "segmentation") {
        UNetConfig u;
        u.input_size = cfg.input_size;
        u.base_channels = cfg.base_channels;
        u.bottleneck_width = cfg.bottleneck_width;
        u.dropout_rate = cfg.dropout_rate;
        return build_unet(u, rng);
    }
    AlexConfig a;
    a.input_size = cfg.input_size;
    a.fc_width = cfg.fc_width;
    a.num_classes = cfg.num_classes;
    a.dropout_rate = cfg.dropout_rate;
    a.width_multiplier = cfg.width_multiplier;
    return build_alexnet_variant(a, rng);
}

void fisher_yates(std::vector<size_t>& order, Rng& rng) {
    for (size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[size_t(rng.uniform_int(i))]);
}

void fnv_add(uint64_t& h, const double* data, size_t n) {
    for (size_t i = 0; i < n; ++i) {
        uint64_t bits;
        std::memcpy(&bits, &data[i], 8);
        for (int b = 0; b < 8; ++b) {
            h ^= (bits >> (8 * b)) & 0xff;
            h *= 1099511628211ull;
        }
    }
}

uint64_t hash_parameters(uint64_t h, const Model& m) {
    for (const Param& p : m.params) fnv_add(h, p.tensor.data(), size_t(p.tensor.numel()));
    return h;
}

Raster center_crop(const Raster& img, int size) {
    int oy = (img.height - size) / 2, ox = (img.width - size) / 2;
    Raster out = make_raster(size, size, img.channels);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x)
            for (int c = 0; c < img.channels; ++c) out.at(y, x, c) = img.at(oy + y, ox + x, c);
    return out;
}

// deterministic inference-time view: square the image, then center crop down
// or resize up to the model input
Raster inference_view(const Raster& img, int size) {
    Raster sq = img.height == img.width ? img : center_crop_square(img);
    if (sq.height > size) return center_crop(sq, size);
    if (sq.height < size) return resize_bilinear(sq, size, size);
    return sq;
}

// training-time view for classification: random crop when there is margin
Raster training_view(const Raster& img, int size, Rng* aug) {
    Raster sq = img.height == img.width ? img : center_crop_square(img);
    if (sq.height > size)
        return aug ? random_crop(sq, size, size, *aug) : center_crop(sq, size);
    if (sq.height < size) return resize_bilinear(sq, size, size);
    return sq;
}

struct SegItem {
    Raster image;
    MaskRaster mask;
};

SegItem load_seg_item(const ManifestEntry& e) {
    if (e.mask_path.empty())
        throw std::invalid_argument("train_fold: item '" + e.item_id + "' has no mask");
    SegItem it;
    it.image = read_png(e.image_path);
    it.mask = read_mask_png(e.mask_path);
    if (it.mask.height != it.image.height || it.mask.width != it.image.width)
        throw std::invalid_argument("train_fold: item '" + e.item_id +
                                    "' image and mask sizes differ");
    return it;
}

struct SegBatchTensors {
    Tensor x, target, weight;
};

SegBatchTensors seg_batch(const std::vector<SegItem>& pool, const std::vector<size_t>& order,
                          size_t lo, size_t hi, const TrainConfig& cfg, Rng* aug) {
    int S = cfg.input_size;
    std::vector<Raster> imgs;
    std::vector<MaskRaster> masks;
    for (size_t k = lo; k < hi; ++k) {
        const SegItem& it = pool[order[k]];
        Raster img = it.image;
        MaskRaster m = it.mask;
        if (aug) std::tie(img, m) = runtime_transform(img, m, cfg.augment, *aug);
        if (img.height != S || img.width != S) {
            img = resize_bilinear(img, S, S);
            m = resize_mask_nearest(m, S, S);
        }
        imgs.push_back(std::move(img));
        masks.push_back(std::move(m));
    }
    std::vector<const Raster*> ip;
    std::vector<const MaskRaster*> mp;
    for (const Raster& r : imgs) ip.push_back(&r);
    for (const MaskRaster& m : masks) mp.push_back(&m);

    std::vector<double> w;
    w.reserve(imgs.size() * size_t(S) * size_t(S));
    for (const MaskRaster& m : masks) {
        WeightMap wm = pixel_weight_map(m);
        w.insert(w.end(), wm.weights.begin(), wm.weights.end());
    }
    SegBatchTensors b;
    b.x = rasters_to_batch(ip);
    b.target = masks_to_batch(mp);
    b.weight = Tensor::from_data({int(imgs.size()), 1, S, S}, std::move(w));
    return b;
}

// prebuilt evaluation chunks; validation content never touches training state
struct SegValChunk {
    Tensor x;
    std::vector<MaskRaster> truth;
};

struct ClsValSet {
    std::vector<Tensor> xs;  // chunked [B,3,S,S]
    std::vector<int> melanoma;  // 1 when the item's label is class 0
};

double validate_seg(const Model& m, const std::vector<SegValChunk>& chunks, int S) {
    double total = 0.0;
    int count = 0;
    for (const SegValChunk& ch : chunks) {
        ForwardCtx ctx;
        Tensor y = m.forward(ch.x, ctx);
        const double* v = y.data();
        for (size_t i = 0; i < ch.truth.size(); ++i) {
            ProbMap pm = make_prob_map(S, S);
            pm.values.assign(v + i * size_t(S) * S, v + (i + 1) * size_t(S) * S);
            total += jaccard(binarize(pm, 0.5), ch.truth[i]);
            ++count;
        }
    }
    return total / count;
}

double validate_cls(const Model& m, const ClsValSet& vs, int num_classes) {
    std::vector<double> scores;
    for (const Tensor& x : vs.xs) {
        ForwardCtx ctx;
        Tensor y = m.forward(x, ctx);
        for (int i = 0; i < y.dim(0); ++i) scores.push_back(y.values()[size_t(i) * num_classes]);
    }
    return roc_auc(scores, vs.melanoma);
}

}  // namespace

std::string train_config_to_json(const TrainConfig& cfg) {
    json j;
    j["task"] = cfg.task;
    j["epochs"] = cfg.epochs;
    j["batch_size"] = cfg.batch_size;
    j["lr"] = cfg.lr;
    j["folds"] = cfg.folds;
    j["seed"] = cfg.seed;
    j["input_size"] = cfg.input_size;
    j["base_channels"] = cfg.base_channels;
    j["bottleneck_width"] = cfg.bottleneck_width;
    j["dropout_rate"] = cfg.dropout_rate;
    j["fc_width"] = cfg.fc_width;
    j["num_classes"] = cfg.num_classes;
    j["width_multiplier"] = cfg.width_multiplier;
    j["offline_expansion"] = cfg.offline_expansion;
    j["runtime_augment"] = cfg.runtime_augment;
    j["augment"] = {{"flip_prob", cfg.augment.flip_prob},
                    {"rotation_choices", cfg.augment.rotation_choices},
                    {"zoom_lo", cfg.augment.zoom_lo},
                    {"zoom_hi", cfg.augment.zoom_hi}};
    j["out_dir"] = cfg.out_dir;
    return j.dump(2);
}

TrainConfig train_config_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("train config: not valid JSON: ") + e.what());
    }
    TrainConfig cfg;
    try {
        for (const auto& [key, val] : j.items()) {
            if (key == "task") cfg.task = val.get<std::string>();
            else if (key == "epochs") cfg.epochs = val.get<int>();
            else if (key == "batch_size") cfg.batch_size = val.get<int>();
            else if (key == "lr") cfg.lr = val.get<double>();
            else if (key == "folds") cfg.folds = val.get<int>();
            else if (key == "seed") cfg.seed = val.get<uint64_t>();
            else if (key == "input_size") cfg.input_size = val.get<int>();
            else if (key == "base_channels") cfg.base_channels = val.get<int>();
            else if (key == "bottleneck_width") cfg.bottleneck_width = val.get<int>();
            else if (key == "dropout_rate") cfg.dropout_rate = val.get<double>();
            else if (key == "fc_width") cfg.fc_width = val.get<int>();
            else if (key == "num_classes") cfg.num_classes = val.get<int>();
            else if (key == "width_multiplier") cfg.width_multiplier = val.get<double>();
            else if (key == "offline_expansion") cfg.offline_expansion = val.get<bool>();
            else if (key == "runtime_augment") cfg.runtime_augment = val.get<bool>();
            else if (key == "out_dir") cfg.out_dir = val.get<std::string>();
            else if (key == "augment") {
                for (const auto& [ak, av] : val.items()) {
                    if (ak == "flip_prob") cfg.augment.flip_prob = av.get<double>();
                    else if (ak == "rotation_choices")
                        cfg.augment.rotation_choices = av.get<std::vector<int>>();
                    else if (ak == "zoom_lo") cfg.augment.zoom_lo = av.get<double>();
                    else if (ak == "zoom_hi") cfg.augment.zoom_hi = av.get<double>();
                    else
                        throw std::invalid_argument("train config: unknown augment key '" + ak +
                                                    "'");
                }
            } else {
                throw std::invalid_argument("train config: unknown key '" + key + "'");
            }
        }
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("train config: bad field: ") + e.what());
    }
    check_config(cfg);
    return cfg;
}

void save_train_config(const std::string& path, const TrainConfig& cfg) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::invalid_argument("train config: cannot write '" + path + "'");
    f << train_config_to_json(cfg) << "\n";
}

TrainConfig load_train_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::invalid_argument("train config: cannot read '" + path + "'");
    std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return train_config_from_json(text);
}

FoldResult train_fold(const TrainConfig& cfg, int fold_index,
                      const std::vector<ManifestEntry>& manifest, const FoldAssignment& fa) {
    check_config(cfg);
    if (fold_index < 0 || fold_index >= cfg.folds)
        throw std::invalid_argument("train_fold: fold index " + std::to_string(fold_index) +
                                    " outside [0, " + std::to_string(cfg.folds) + ")");
    if (fa.k != cfg.folds)
        throw std::invalid_argument("train_fold: assignment has k=" + std::to_string(fa.k) +
                                    " but the config says folds=" + std::to_string(cfg.folds));

    std::vector<const ManifestEntry*> train_entries, val_entries;
    for (const ManifestEntry& e : manifest) {
        if (fa.fold_of(e) == fold_index) {
            if (!e.is_derived) val_entries.push_back(&e);
        } else {
            train_entries.push_back(&e);
        }
    }
    if (train_entries.empty())
        throw std::invalid_argument("train_fold: fold " + std::to_string(fold_index) +
                                    " has an empty training partition");
    if (val_entries.empty())
        throw std::invalid_argument("train_fold: fold " + std::to_string(fold_index) +
                                    " has an empty validation partition");

    const bool seg = cfg.task == "segmentation";
    const int S = cfg.input_size;

    Rng init_rng(derive_seed(cfg.seed, "init", uint64_t(fold_index)));
    Rng shuffle_rng(derive_seed(cfg.seed, "shuffle", uint64_t(fold_index)));
    Rng aug_rng(derive_seed(cfg.seed, "augment", uint64_t(fold_index)));
    Rng dropout_rng(derive_seed(cfg.seed, "dropout", uint64_t(fold_index)));
    Rng batch_rng(derive_seed(cfg.seed, "batch", uint64_t(fold_index)));
    Rng* aug = cfg.runtime_augment ? &aug_rng : nullptr;

    Model model = build_for(cfg, init_rng);
    AdamState st = make_adam(model, cfg.lr);

    // training pool; offline expansion derives extra items per original,
    // appended right after it so the order is reproducible
    std::vector<SegItem> seg_pool;
    std::vector<Raster> cls_pool;
    std::vector<ManifestEntry> cls_entries;  // parallel to cls_pool, feeds balanced_batch
    for (size_t i = 0; i < train_entries.size(); ++i) {
        const ManifestEntry& e = *train_entries[i];
        if (seg) {
            SegItem it = load_seg_item(e);
            if (cfg.offline_expansion && !e.is_derived) {
                Rng ex(derive_seed(cfg.seed, "expand", uint64_t(fold_index), i));
                for (SegExpansion& sx : offline_expand_segmentation(it.image, it.mask, ex, S))
                    seg_pool.push_back({std::move(sx.image), std::move(sx.mask)});
            }
            seg_pool.push_back(std::move(it));
        } else {
            if (e.label < 0)
                throw std::invalid_argument("train_fold: item '" + e.item_id + "' has no label");
            Raster img = read_png(e.image_path);
            if (cfg.offline_expansion && !e.is_derived) {
                int native = std::min(img.height, img.width);
                std::vector<Raster> turns = offline_expand_classification(img, native);
                for (size_t t = 0; t < turns.size(); ++t) {
                    ManifestEntry d = e;
                    d.item_id = e.item_id + "#rot" + std::to_string(t == 0 ? 90 : 270);
                    d.is_derived = true;
                    cls_entries.push_back(std::move(d));
                    cls_pool.push_back(std::move(turns[t]));
                }
            }
            cls_entries.push_back(e);
            cls_pool.push_back(std::move(img));
        }
    }
    std::map<std::string, size_t> cls_index;
    for (size_t i = 0; i < cls_entries.size(); ++i) cls_index[cls_entries[i].item_id] = i;

    // validation originals, prepared once at model resolution
    std::vector<SegValChunk> seg_val;
    ClsValSet cls_val;
    if (seg) {
        for (size_t lo = 0; lo < val_entries.size(); lo += size_t(cfg.batch_size)) {
            size_t hi = std::min(val_entries.size(), lo + size_t(cfg.batch_size));
            std::vector<Raster> imgs;
            SegValChunk ch;
            for (size_t k = lo; k < hi; ++k) {
                SegItem it = load_seg_item(*val_entries[k]);
                imgs.push_back(resize_bilinear(it.image, S, S));
                ch.truth.push_back(resize_mask_nearest(it.mask, S, S));
            }
            std::vector<const Raster*> ip;
            for (const Raster& r : imgs) ip.push_back(&r);
            ch.x = rasters_to_batch(ip);
            seg_val.push_back(std::move(ch));
        }
    } else {
        for (size_t lo = 0; lo < val_entries.size(); lo += size_t(cfg.batch_size)) {
            size_t hi = std::min(val_entries.size(), lo + size_t(cfg.batch_size));
            std::vector<Raster> imgs;
            for (size_t k = lo; k < hi; ++k) {
                const ManifestEntry& e = *val_entries[k];
                if (e.label < 0)
                    throw std::invalid_argument("train_fold: item '" + e.item_id +
                                                "' has no label");
                imgs.push_back(inference_view(read_png(e.image_path), S));
                cls_val.melanoma.push_back(e.label == 0 ? 1 : 0);
            }
            std::vector<const Raster*> ip;
            for (const Raster& r : imgs) ip.push_back(&r);
            cls_val.xs.push_back(rasters_to_batch(ip));
        }
    }

    std::filesystem::create_directories(cfg.out_dir);
    std::string ckpt_path =
        cfg.out_dir + "/fold_" + std::to_string(fold_index) + "_best.ckpt";
    std::string hist_path =
        cfg.out_dir + "/fold_" + std::to_string(fold_index) + "_history.csv";

    FoldResult fr;
    fr.fold = fold_index;
    fr.checkpoint_path = ckpt_path;
    double best = -1.0;
    uint64_t traj = 1469598103934665603ull;

    std::vector<size_t> order(seg_pool.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        if (seg) {
            fisher_yates(order, shuffle_rng);
            for (size_t lo = 0; lo < order.size(); lo += size_t(cfg.batch_size)) {
                size_t hi = std::min(order.size(), lo + size_t(cfg.batch_size));
                SegBatchTensors b = seg_batch(seg_pool, order, lo, hi, cfg, aug);
                ForwardCtx ctx;
                ctx.training = true;
                ctx.rng = &dropout_rng;
                Tensor y = model.forward(b.x, ctx);
                Tensor loss = ops::weighted_pixel_bce(y, b.target, b.weight);
                backward(loss);
                adam_step(model, st);
            }
        } else {
            size_t n_batches = (cls_pool.size() + size_t(cfg.batch_size) - 1) / size_t(cfg.batch_size);
            for (size_t bi = 0; bi < n_batches; ++bi) {
                std::vector<std::string> ids = balanced_batch(cls_entries, cfg.batch_size, batch_rng);
                std::vector<Raster> imgs;
                std::vector<int> labels;
                for (const std::string& id : ids) {
                    size_t k = cls_index.at(id);
                    imgs.push_back(training_view(cls_pool[k], S, aug));
                    labels.push_back(cls_entries[k].label);
                }
                std::vector<const Raster*> ip;
                for (const Raster& r : imgs) ip.push_back(&r);
                Tensor x = rasters_to_batch(ip);
                ForwardCtx ctx;
                ctx.training = true;
                ctx.rng = &dropout_rng;
                Tensor y = model.forward(x, ctx);
                Tensor loss = ops::class_cross_entropy(y, labels);
                backward(loss);
                adam_step(model, st);
            }
        }
        traj = hash_parameters(traj, model);

        double metric = seg ? validate_seg(model, seg_val, S)
                            : validate_cls(model, cls_val, cfg.num_classes);
        fr.history.push_back({epoch, metric, ""});
        if (metric > best) {
            best = metric;
            fr.best_epoch = epoch;
            CheckpointMeta meta;
            meta.arch = model.arch;
            meta.config_json = model.config_json;
            meta.epoch = epoch;
            meta.metric = metric;
            save_checkpoint(ckpt_path, model, meta, &st);
        }
    }

    fr.best_metric = best;
    fr.trajectory_hash = traj;
    // history stores the checkpoint by name so the file is identical across
    // reruns into different directories
    for (MetricRecord& r : fr.history)
        if (r.epoch == fr.best_epoch)
            r.checkpoint = std::filesystem::path(ckpt_path).filename().string();
    save_history(hist_path, fr.history);
    return fr;
}

CrossValReport train_all_folds(const TrainConfig& cfg, const std::vector<ManifestEntry>& manifest,
                               const FoldAssignment& fa) {
    check_config(cfg);
    CrossValReport rep;
    for (int f = 0; f < cfg.folds; ++f) {
        try {
            rep.folds.push_back(train_fold(cfg, f, manifest, fa));
        } catch (const std::exception& e) {
            FoldResult fr;
            fr.fold = f;
            fr.error = e.what();
            rep.folds.push_back(std::move(fr));
            ++rep.failed;
        }
    }
    double sum = 0.0;
    int ok = 0;
    for (const FoldResult& fr : rep.folds)
        if (fr.error.empty()) {
            sum += fr.best_metric;
            ++ok;
        }
    rep.mean_best = ok ? sum / ok : 0.0;

    char line[160];
    std::string table = "fold  metric\n";
    for (const FoldResult& fr : rep.folds) {
        if (fr.error.empty())
            std::snprintf(line, sizeof line, "%-4d  %.6f\n", fr.fold, fr.best_metric);
        else
            std::snprintf(line, sizeof line, "%-4d  failed: %s\n", fr.fold, fr.error.c_str());
        table += line;
    }
    std::snprintf(line, sizeof line, "mean  %.6f\n", rep.mean_best);
    table += line;
    rep.table = table;
    return rep;
}

namespace {

void check_fleet(const std::vector<LoadedCheckpoint>& cks, const char* want_arch) {
    if (cks.empty()) throw std::invalid_argument("predict: no checkpoints");
    for (size_t i = 0; i < cks.size(); ++i) {
        if (cks[i].model.arch != want_arch)
            throw std::invalid_argument("predict: checkpoint " + std::to_string(i) +
                                        " has architecture '" + cks[i].model.arch +
                                        "', expected '" + want_arch + "'");
        if (cks[i].model.config_json != cks[0].model.config_json)
            throw std::invalid_argument("predict: checkpoint " + std::to_string(i) +
                                        " was built from a different model config");
    }
}

}  // namespace

std::vector<ProbMap> predict_segmentation(const std::vector<LoadedCheckpoint>& checkpoints,
                                          const std::vector<Raster>& images) {
    check_fleet(checkpoints, "unet");
    int S = unet_config_from_json(checkpoints[0].model.config_json).input_size;
    std::vector<ProbMap> out;
    for (const Raster& img : images) {
        Raster r = img.height == S && img.width == S ? img : resize_bilinear(img, S, S);
        std::vector<const Raster*> ip = {&r};
        Tensor x = rasters_to_batch(ip);
        std::vector<ProbMap> per;
        for (const LoadedCheckpoint& ck : checkpoints) {
            ForwardCtx ctx;
            Tensor y = ck.model.forward(x, ctx);
            ProbMap pm = make_prob_map(S, S);
            pm.values.assign(y.values().begin(), y.values().end());
            per.push_back(std::move(pm));
        }
        out.push_back(average_prob_maps(per));
    }
    return out;
}

std::vector<std::vector<double>> predict_classification(
    const std::vector<LoadedCheckpoint>& checkpoints, const std::vector<Raster>& images) {
    check_fleet(checkpoints, "alexnet");
    AlexConfig acfg = alex_config_from_json(checkpoints[0].model.config_json);
    std::vector<std::vector<double>> out;
    for (const Raster& img : images) {
        Raster r = inference_view(img, acfg.input_size);
        std::vector<const Raster*> ip = {&r};
        Tensor x = rasters_to_batch(ip);
        std::vector<std::vector<double>> rows;
        for (const LoadedCheckpoint& ck : checkpoints) {
            ForwardCtx ctx;
            Tensor y = ck.model.forward(x, ctx);
            rows.push_back(y.values());
        }
        out.push_back(average_class_probs(rows));
    }
    return out;
}

}  // namespace lk
