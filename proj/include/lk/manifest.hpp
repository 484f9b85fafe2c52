#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "lk/image.hpp"
#include "lk/rng.hpp"

namespace lk {

struct ManifestEntry {
    std::string item_id;
    std::string group_id;  // originating image's id; originals point at themselves
    std::string image_path;
    std::string mask_path;  // empty when absent
    int label = -1;         // -1 when absent
    bool is_derived = false;
};

struct FoldAssignment {
    int k = 10;
    std::map<std::string, int> group_to_fold;
    uint64_t seed = 0;

    int fold_of(const ManifestEntry& e) const;
};

struct WeightMap {
    int height = 0, width = 0;
    std::vector<double> weights;
};

// seeded shuffle then round-robin dealing (within label strata when
// stratified); derived items inherit their group's fold
FoldAssignment assign_folds(const std::vector<ManifestEntry>& manifest, int k, bool stratify,
                            uint64_t seed);

// batch_size/K items per class, uniform without replacement inside the batch
std::vector<std::string> balanced_batch(const std::vector<ManifestEntry>& pool, int batch_size,
                                        Rng& rng);

// foreground weight N/(2n+), background N/(2n-); single-class masks uniform 1
WeightMap pixel_weight_map(const MaskRaster& mask);

std::string manifest_to_json(const std::vector<ManifestEntry>& m);
std::vector<ManifestEntry> manifest_from_json(const std::string& text);
void save_manifest(const std::string& path, const std::vector<ManifestEntry>& m);
std::vector<ManifestEntry> load_manifest(const std::string& path);

void save_fold_assignment(const std::string& path, const FoldAssignment& fa);
FoldAssignment load_fold_assignment(const std::string& path);

}  // namespace lk
