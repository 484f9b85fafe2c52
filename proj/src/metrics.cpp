#include "lk/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace lk {

ProbMap make_prob_map(int h, int w, double fill) {
    if (h <= 0 || w <= 0) throw std::invalid_argument("prob map dims must be positive");
    ProbMap p;
    p.height = h;
    p.width = w;
    p.values.assign(size_t(h) * size_t(w), fill);
    return p;
}

double jaccard(const MaskRaster& pred, const MaskRaster& truth) {
    if (pred.height != truth.height || pred.width != truth.width)
        throw std::invalid_argument("jaccard: mask dims differ");
    int64_t inter = 0, uni = 0;
    for (size_t i = 0; i < pred.values.size(); ++i) {
        const bool p = pred.values[i] != 0;
        const bool t = truth.values[i] != 0;
        inter += p && t;
        uni += p || t;
    }
    if (uni == 0) return 1.0;
    return double(inter) / double(uni);
}

MaskRaster binarize(const ProbMap& prob, double threshold) {
    MaskRaster m = make_mask(prob.height, prob.width);
    for (size_t i = 0; i < prob.values.size(); ++i)
        m.values[i] = prob.values[i] >= threshold ? 1 : 0;
    return m;
}

double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    const size_t n = scores.size();
    if (n != labels.size()) throw std::invalid_argument("roc_auc: score and label counts differ");
    int64_t pos = 0, neg = 0;
    for (int l : labels) {
        if (l != 0 && l != 1) throw std::invalid_argument("roc_auc: labels must be 0 or 1");
        (l ? pos : neg) += 1;
    }
    if (pos == 0 || neg == 0)
        throw std::invalid_argument("roc_auc: needs at least one item of each class");

    std::vector<size_t> idx(n);
    std::iota(idx.begin(), idx.end(), size_t(0));
    std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return scores[a] < scores[b]; });

    // tied scores all take the mean of the ranks they span
    std::vector<double> rank(n, 0.0);
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j + 1 < n && scores[idx[j + 1]] == scores[idx[i]]) ++j;
        const double mid = 0.5 * double(i + j) + 1.0;
        for (size_t t = i; t <= j; ++t) rank[idx[t]] = mid;
        i = j + 1;
    }
    double pos_rank_sum = 0.0;
    for (size_t t = 0; t < n; ++t)
        if (labels[t]) pos_rank_sum += rank[t];
    const double u = pos_rank_sum - 0.5 * double(pos) * double(pos + 1);
    return u / (double(pos) * double(neg));
}

const MetricRecord& select_best_epoch(const MetricHistory& history) {
    if (history.empty()) throw std::invalid_argument("select_best_epoch: empty history");
    size_t best = 0;
    for (size_t i = 1; i < history.size(); ++i)
        if (history[i].metric > history[best].metric) best = i;
    return history[best];
}

namespace {

void check_epochs(const MetricHistory& h) {
    for (size_t i = 1; i < h.size(); ++i)
        if (h[i].epoch <= h[i - 1].epoch)
            throw std::invalid_argument("metric history: epochs must be strictly increasing");
}

}  // namespace

std::string history_to_csv(const MetricHistory& h) {
    check_epochs(h);
    std::string out = "epoch,metric,checkpoint\n";
    char buf[64];
    for (const auto& r : h) {
        std::snprintf(buf, sizeof(buf), "%d,%.17g,", r.epoch, r.metric);
        out += buf;
        out += r.checkpoint;
        out += "\n";
    }
    return out;
}

MetricHistory history_from_csv(const std::string& text) {
    MetricHistory h;
    size_t pos = 0;
    bool first = true;
    while (pos < text.size()) {
        size_t eol = text.find('\n', pos);
        if (eol == std::string::npos) eol = text.size();
        const std::string line = text.substr(pos, eol - pos);
        pos = eol + 1;
        if (line.empty()) continue;
        if (first) {
            if (line != "epoch,metric,checkpoint")
                throw std::invalid_argument("metric history: bad header '" + line + "'");
            first = false;
            continue;
        }
        const size_t c1 = line.find(',');
        const size_t c2 = line.find(',', c1 == std::string::npos ? c1 : c1 + 1);
        if (c1 == std::string::npos || c2 == std::string::npos)
            throw std::invalid_argument("metric history: bad row '" + line + "'");
        MetricRecord r;
        r.epoch = std::stoi(line.substr(0, c1));
        r.metric = std::stod(line.substr(c1 + 1, c2 - c1 - 1));
        r.checkpoint = line.substr(c2 + 1);
        h.push_back(std::move(r));
    }
    if (first) throw std::invalid_argument("metric history: missing header");
    check_epochs(h);
    return h;
}

void save_history(const std::string& path, const MetricHistory& h) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << history_to_csv(h);
}

MetricHistory load_history(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot read " + path);
    std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return history_from_csv(text);
}

}  // namespace lk
