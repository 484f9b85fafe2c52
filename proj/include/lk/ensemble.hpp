#pragma once

#include <map>
#include <vector>

#include "lk/metrics.hpp"

namespace lk {

// elementwise mean of same-shaped probability maps
ProbMap average_prob_maps(const std::vector<ProbMap>& maps);

// elementwise mean of per-class distributions; every row must sum to 1
// within 1e-9
std::vector<double> average_class_probs(const std::vector<std::vector<double>>& rows);

struct SegmentationResult {
    ProbMap averaged;
    MaskRaster mask;
};

// one map per expected fold; averages then thresholds, keeping the averaged
// map for inspection
SegmentationResult finalize_segmentation(const std::map<int, ProbMap>& fold_maps,
                                         const std::vector<int>& expected_folds,
                                         double threshold = 0.5);

}  // namespace lk
