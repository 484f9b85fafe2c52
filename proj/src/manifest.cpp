#include "lk/manifest.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>
#include <unordered_map>

#include "json.hpp"

using nlohmann::json;

namespace lk {

int FoldAssignment::fold_of(const ManifestEntry& e) const {
    auto it = group_to_fold.find(e.group_id);
    if (it == group_to_fold.end())
        throw std::invalid_argument("fold_of: group '" + e.group_id + "' has no fold");
    return it->second;
}

FoldAssignment assign_folds(const std::vector<ManifestEntry>& manifest, int k, bool stratify,
                            uint64_t seed) {
    if (k < 2) throw std::invalid_argument("assign_folds: k must be >= 2");
    if (manifest.empty()) throw std::invalid_argument("assign_folds: empty manifest");

    // groups in first-appearance order, with label consistency per group
    std::vector<std::string> groups;
    std::unordered_map<std::string, int> group_label;
    for (const auto& e : manifest) {
        auto it = group_label.find(e.group_id);
        if (it == group_label.end()) {
            groups.push_back(e.group_id);
            group_label[e.group_id] = e.label;
        } else if (stratify && it->second != e.label) {
            throw std::invalid_argument("assign_folds: group '" + e.group_id +
                                        "' has mixed labels under stratification");
        }
    }
    if (stratify)
        for (const auto& g : groups)
            if (group_label[g] < 0)
                throw std::invalid_argument("assign_folds: group '" + g +
                                            "' lacks a label required for stratification");

    Rng rng(derive_seed(seed, "fold_shuffle"));
    for (size_t i = groups.size(); i > 1; --i)
        std::swap(groups[i - 1], groups[size_t(rng.uniform_int(i))]);

    FoldAssignment fa;
    fa.k = k;
    fa.seed = seed;

    // strata in ascending label order (single stratum when unstratified);
    // the dealing counter continues across strata so overall fold sizes
    // stay balanced too
    std::vector<int> labels_present;
    if (stratify) {
        for (const auto& g : groups) labels_present.push_back(group_label[g]);
        std::sort(labels_present.begin(), labels_present.end());
        labels_present.erase(std::unique(labels_present.begin(), labels_present.end()),
                             labels_present.end());
    } else {
        labels_present.push_back(-1);
    }
    int next_fold = 0;
    for (int lab : labels_present) {
        for (const auto& g : groups) {
            if (stratify && group_label[g] != lab) continue;
            fa.group_to_fold[g] = next_fold;
            next_fold = (next_fold + 1) % k;
        }
    }
    return fa;
}

std::vector<std::string> balanced_batch(const std::vector<ManifestEntry>& pool, int batch_size,
                                        Rng& rng) {
    if (pool.empty()) throw std::invalid_argument("balanced_batch: empty pool");
    int max_label = -1;
    for (const auto& e : pool) {
        if (e.label < 0)
            throw std::invalid_argument("balanced_batch: item '" + e.item_id + "' has no label");
        max_label = std::max(max_label, e.label);
    }
    const int K = max_label + 1;
    if (batch_size % K != 0)
        throw std::invalid_argument("balanced_batch: batch size " + std::to_string(batch_size) +
                                    " not divisible by " + std::to_string(K) + " classes");
    const int quota = batch_size / K;

    std::vector<std::vector<const ManifestEntry*>> by_class(static_cast<size_t>(K));
    for (const auto& e : pool) by_class[size_t(e.label)].push_back(&e);

    std::vector<std::string> out;
    out.reserve(size_t(batch_size));
    for (int c = 0; c < K; ++c) {
        auto& cls = by_class[size_t(c)];
        if (cls.empty())
            throw std::invalid_argument("balanced_batch: class " + std::to_string(c) +
                                        " is empty");
        if (int(cls.size()) < quota)
            throw std::invalid_argument("balanced_batch: class " + std::to_string(c) + " has " +
                                        std::to_string(cls.size()) + " items, quota is " +
                                        std::to_string(quota));
        // partial Fisher-Yates: first `quota` slots are a uniform draw
        // without replacement
        for (int i = 0; i < quota; ++i) {
            size_t j = size_t(i) + size_t(rng.uniform_int(cls.size() - size_t(i)));
            std::swap(cls[size_t(i)], cls[j]);
            out.push_back(cls[size_t(i)]->item_id);
        }
    }
    return out;
}

WeightMap pixel_weight_map(const MaskRaster& mask) {
    WeightMap wm;
    wm.height = mask.height;
    wm.width = mask.width;
    wm.weights.resize(mask.values.size());
    int64_t npos = 0;
    for (uint8_t v : mask.values) npos += v;
    const int64_t total = int64_t(mask.values.size());
    const int64_t nneg = total - npos;
    if (npos == 0 || nneg == 0) {
        std::fill(wm.weights.begin(), wm.weights.end(), 1.0);
        return wm;
    }
    const double wpos = double(total) / (2.0 * double(npos));
    const double wneg = double(total) / (2.0 * double(nneg));
    for (size_t i = 0; i < mask.values.size(); ++i)
        wm.weights[i] = mask.values[i] ? wpos : wneg;
    return wm;
}

namespace {

json entry_to_json(const ManifestEntry& e) {
    json j;
    j["item_id"] = e.item_id;
    j["group_id"] = e.group_id;
    j["image_path"] = e.image_path;
    if (!e.mask_path.empty()) j["mask_path"] = e.mask_path;
    if (e.label >= 0) j["label"] = e.label;
    j["is_derived"] = e.is_derived;
    return j;
}

ManifestEntry entry_from_json(const json& j) {
    ManifestEntry e;
    e.item_id = j.at("item_id").get<std::string>();
    e.group_id = j.at("group_id").get<std::string>();
    e.image_path = j.at("image_path").get<std::string>();
    if (j.contains("mask_path")) e.mask_path = j.at("mask_path").get<std::string>();
    if (j.contains("label")) e.label = j.at("label").get<int>();
    e.is_derived = j.at("is_derived").get<bool>();
    return e;
}

}  // namespace

std::string manifest_to_json(const std::vector<ManifestEntry>& m) {
    json arr = json::array();
    for (const auto& e : m) arr.push_back(entry_to_json(e));
    return arr.dump(2);
}

std::vector<ManifestEntry> manifest_from_json(const std::string& text) {
    json arr = json::parse(text);
    if (!arr.is_array()) throw std::invalid_argument("manifest: expected a JSON array");
    std::vector<ManifestEntry> m;
    m.reserve(arr.size());
    for (const auto& j : arr) m.push_back(entry_from_json(j));
    return m;
}

void save_manifest(const std::string& path, const std::vector<ManifestEntry>& m) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << manifest_to_json(m) << "\n";
}

std::vector<ManifestEntry> load_manifest(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot read " + path);
    std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return manifest_from_json(text);
}

void save_fold_assignment(const std::string& path, const FoldAssignment& fa) {
    json j;
    j["k"] = fa.k;
    j["seed"] = fa.seed;
    j["group_to_fold"] = fa.group_to_fold;
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << j.dump(2) << "\n";
}

FoldAssignment load_fold_assignment(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot read " + path);
    json j = json::parse(f);
    FoldAssignment fa;
    fa.k = j.at("k").get<int>();
    fa.seed = j.at("seed").get<uint64_t>();
    fa.group_to_fold = j.at("group_to_fold").get<std::map<std::string, int>>();
    return fa;
}

}  // namespace lk
