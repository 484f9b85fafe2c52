#include "lk/ensemble.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace lk {

ProbMap average_prob_maps(const std::vector<ProbMap>& maps) {
    if (maps.empty()) throw std::invalid_argument("average_prob_maps: empty list");
    const ProbMap& head = maps.front();
    for (const auto& m : maps)
        if (m.height != head.height || m.width != head.width)
            throw std::invalid_argument("average_prob_maps: map dims differ");
    ProbMap out = make_prob_map(head.height, head.width);
    for (const auto& m : maps)
        for (size_t i = 0; i < out.values.size(); ++i) out.values[i] += m.values[i];
    // true division: an exact sum of n equal values divides back exactly
    for (auto& v : out.values) v /= double(maps.size());
    return out;
}

std::vector<double> average_class_probs(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) throw std::invalid_argument("average_class_probs: empty list");
    const size_t k = rows.front().size();
    if (k == 0) throw std::invalid_argument("average_class_probs: empty distribution");
    for (size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != k)
            throw std::invalid_argument("average_class_probs: class counts differ");
        double sum = 0.0;
        for (double v : rows[r]) sum += v;
        if (std::fabs(sum - 1.0) > 1e-9)
            throw std::invalid_argument("average_class_probs: row " + std::to_string(r) +
                                        " sums to " + std::to_string(sum));
    }
    std::vector<double> out(k, 0.0);
    for (const auto& r : rows)
        for (size_t i = 0; i < k; ++i) out[i] += r[i];
    for (auto& v : out) v /= double(rows.size());
    return out;
}

SegmentationResult finalize_segmentation(const std::map<int, ProbMap>& fold_maps,
                                         const std::vector<int>& expected_folds,
                                         double threshold) {
    if (expected_folds.empty())
        throw std::invalid_argument("finalize_segmentation: no folds expected");
    std::vector<ProbMap> maps;
    maps.reserve(expected_folds.size());
    for (int f : expected_folds) {
        auto it = fold_maps.find(f);
        if (it == fold_maps.end())
            throw std::invalid_argument("finalize_segmentation: missing map for fold " +
                                        std::to_string(f));
        maps.push_back(it->second);
    }
    if (fold_maps.size() != expected_folds.size())
        throw std::invalid_argument("finalize_segmentation: map count does not match fold count");
    SegmentationResult res;
    res.averaged = average_prob_maps(maps);
    res.mask = binarize(res.averaged, threshold);
    return res;
}

}  // namespace lk
