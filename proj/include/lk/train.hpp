#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lk/augment.hpp"
#include "lk/checkpoint.hpp"
#include "lk/manifest.hpp"
#include "lk/metrics.hpp"

namespace lk {

struct TrainConfig {
    std::string task = "segmentation";  // or "classification"
    int epochs = 30;
    int batch_size = 20;
    double lr = 1e-4;
    int folds = 10;
    uint64_t seed = 1;

    // model
    int input_size = 64;
    int base_channels = 8;      // unet
    int bottleneck_width = 128;  // unet
    double dropout_rate = 0.5;
    int fc_width = 1024;         // alexnet
    int num_classes = 3;         // alexnet
    double width_multiplier = 1.0;

    // augmentation; offline expansion derives extra training items in memory
    // after the fold split, so manifests holding pre-materialized derived
    // items should leave it off
    bool offline_expansion = false;
    bool runtime_augment = true;
    RuntimeAugmentParams augment;

    std::string out_dir = "runs";
};

std::string train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const std::string& text);
void save_train_config(const std::string& path, const TrainConfig& cfg);
TrainConfig load_train_config(const std::string& path);

struct FoldResult {
    int fold = -1;
    std::string checkpoint_path;  // best epoch's file; empty when the fold failed
    MetricHistory history;        // one record per epoch; best carries the path
    int best_epoch = -1;
    double best_metric = 0.0;
    uint64_t trajectory_hash = 0;  // chained hash of parameters after every epoch
    std::string error;             // empty on success
};

FoldResult train_fold(const TrainConfig& cfg, int fold_index,
                      const std::vector<ManifestEntry>& manifest, const FoldAssignment& fa);

struct CrossValReport {
    std::vector<FoldResult> folds;
    int failed = 0;
    double mean_best = 0.0;  // over folds that completed
    std::string table;       // fold/metric rows plus a mean row
};

// runs every fold, isolating failures so completed folds survive
CrossValReport train_all_folds(const TrainConfig& cfg, const std::vector<ManifestEntry>& manifest,
                               const FoldAssignment& fa);

// evaluation-mode forward per checkpoint per image, fold outputs averaged;
// all checkpoints must share the task's architecture and config
std::vector<ProbMap> predict_segmentation(const std::vector<LoadedCheckpoint>& checkpoints,
                                          const std::vector<Raster>& images);
std::vector<std::vector<double>> predict_classification(
    const std::vector<LoadedCheckpoint>& checkpoints, const std::vector<Raster>& images);

}  // namespace lk
