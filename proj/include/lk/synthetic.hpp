#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lk/image.hpp"
#include "lk/manifest.hpp"

namespace lk {

enum class SynthTask { segmentation, classification };

// classes: 0 = single dark blob, 1 = annular blob, 2 = scattered multi-blob
struct SynthOptions {
    int n_items = 100;
    int size = 64;
    SynthTask task = SynthTask::segmentation;
    int num_classes = 3;
    uint64_t seed = 1;
    // leak injection (classification): bilateral bright columns on class 1,
    // saturated border band on class 2; fractions of eligible items
    double bright_leak_frac = 0.0;
    double gauze_leak_frac = 0.0;
};

struct SynthItem {
    ManifestEntry entry;
    Raster image;
    MaskRaster mask;        // segmentation only
    int injected_leak = 0;  // 0 none, 1 bright edges, 2 gauze border
};

std::vector<SynthItem> generate_synthetic_dataset(const SynthOptions& opt);

// writes PNGs plus manifest.json under dir; returns the manifest
std::vector<ManifestEntry> write_synthetic_dataset(const SynthOptions& opt,
                                                   const std::string& dir);

}  // namespace lk
