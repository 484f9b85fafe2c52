#pragma once

#include <string>
#include <vector>

#include "lk/image.hpp"

namespace lk {

// row-major per-pixel foreground probabilities
struct ProbMap {
    int height = 0, width = 0;
    std::vector<double> values;
};

ProbMap make_prob_map(int h, int w, double fill = 0.0);

struct MetricRecord {
    int epoch = 0;
    double metric = 0.0;
    std::string checkpoint;
};

// epochs strictly increasing, one record per epoch
using MetricHistory = std::vector<MetricRecord>;

// |pred AND truth| / |pred OR truth|; two empty masks count as a perfect match
double jaccard(const MaskRaster& pred, const MaskRaster& truth);

// pixel >= threshold becomes foreground
MaskRaster binarize(const ProbMap& prob, double threshold = 0.5);

// Mann-Whitney statistic via midranks; ties earn half credit
double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels);

// argmax of the metric, earliest epoch on ties
const MetricRecord& select_best_epoch(const MetricHistory& history);

std::string history_to_csv(const MetricHistory& h);
MetricHistory history_from_csv(const std::string& text);
void save_history(const std::string& path, const MetricHistory& h);
MetricHistory load_history(const std::string& path);

}  // namespace lk
