#include "lk/screen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace lk {

namespace {

void check_frac(double f, const char* what) {
    if (!(f > 0.0 && f < 0.5))
        throw std::invalid_argument(std::string(what) + " must lie in (0, 0.5)");
}

int strip_width(const Raster& img, const ScreenConfig& cfg) {
    return std::max(1, int(std::lround(cfg.strip_frac * img.width)));
}

int band_width(const Raster& img, const ScreenConfig& cfg) {
    return std::max(1, int(std::lround(cfg.border_frac * std::min(img.height, img.width))));
}

}  // namespace

DetectorResult bright_edge_score(const Raster& img, const ScreenConfig& cfg) {
    check_frac(cfg.strip_frac, "strip_frac");
    if (img.channels != 3) throw std::invalid_argument("bright_edge_score: expects RGB");
    const int w = strip_width(img, cfg);
    int64_t left = 0, right = 0;
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < w; ++x) {
            const int xr = img.width - 1 - x;
            left += luma(img.at(y, x, 0), img.at(y, x, 1), img.at(y, x, 2)) > cfg.luma_thresh;
            right += luma(img.at(y, xr, 0), img.at(y, xr, 1), img.at(y, xr, 2)) > cfg.luma_thresh;
        }
    const double strip_pixels = double(img.height) * double(w);
    DetectorResult r;
    r.score = std::min(double(left), double(right)) / strip_pixels;
    r.flag = r.score >= cfg.strip_trigger;
    return r;
}

DetectorResult gauze_score(const Raster& img, const ScreenConfig& cfg) {
    check_frac(cfg.border_frac, "border_frac");
    if (img.channels != 3) throw std::invalid_argument("gauze_score: expects RGB");
    const int b = band_width(img, cfg);
    int64_t border = 0, saturated = 0;
    int64_t bins[12] = {0};
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            const bool in_band =
                y < b || y >= img.height - b || x < b || x >= img.width - b;
            if (!in_band) continue;
            border += 1;
            double h, s, v;
            rgb_to_hsv(img.at(y, x, 0), img.at(y, x, 1), img.at(y, x, 2), h, s, v);
            if (s <= cfg.saturation_cut) continue;
            saturated += 1;
            int bin = int(h / 30.0);
            if (bin > 11) bin = 11;
            bins[bin] += 1;
        }
    DetectorResult r;
    if (saturated == 0) return r;
    const int64_t dominant = *std::max_element(bins, bins + 12);
    const double share = double(dominant) / double(saturated);
    if (share < cfg.hue_share_cut) return r;  // no coherent hue, not gauze
    r.score = double(dominant) / double(border);
    r.flag = r.score >= cfg.gauze_threshold;
    return r;
}

CropRect suggest_crop(const Raster& img, const ScreenReport& report, const ScreenConfig& cfg) {
    if (!report.bright_flag && !report.gauze_flag)
        throw std::invalid_argument("suggest_crop: nothing flagged for item '" + report.item_id +
                                    "'");
    int inset_x = 0, inset_y = 0;
    if (report.bright_flag) inset_x = std::max(inset_x, strip_width(img, cfg));
    if (report.gauze_flag) {
        const int b = band_width(img, cfg);
        inset_x = std::max(inset_x, b);
        inset_y = std::max(inset_y, b);
    }
    CropRect c;
    c.w = img.width - 2 * inset_x;
    c.h = img.height - 2 * inset_y;
    const int w_floor = (img.width + 1) / 2;
    const int h_floor = (img.height + 1) / 2;
    if (c.w < w_floor) c.w = w_floor;
    if (c.h < h_floor) c.h = h_floor;
    c.x = (img.width - c.w) / 2;
    c.y = (img.height - c.h) / 2;
    return c;
}

ScreenReport screen_image(const Raster& img, const std::string& item_id,
                          const ScreenConfig& cfg) {
    ScreenReport rep;
    rep.item_id = item_id;
    DetectorResult be = bright_edge_score(img, cfg);
    rep.bright_flag = be.flag;
    rep.bright_score = be.score;
    DetectorResult gz = gauze_score(img, cfg);
    rep.gauze_flag = gz.flag;
    rep.gauze_score = gz.score;
    if (rep.bright_flag || rep.gauze_flag) {
        rep.has_crop = true;
        rep.crop = suggest_crop(img, rep, cfg);
    }
    return rep;
}

ScreenOutcome screen_dataset(const std::vector<ManifestEntry>& manifest,
                             const ScreenConfig& cfg) {
    ScreenOutcome out;
    out.reports.resize(manifest.size());
    const int n = int(manifest.size());
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < n; ++i) {
        Raster img = read_png(manifest[size_t(i)].image_path);
        out.reports[size_t(i)] = screen_image(img, manifest[size_t(i)].item_id, cfg);
    }
    out.summary.total = n;
    for (int i = 0; i < n; ++i) {
        const auto& rep = out.reports[size_t(i)];
        const int label = manifest[size_t(i)].label;
        if (rep.bright_flag) {
            out.summary.bright_flagged += 1;
            out.summary.bright_by_label[label] += 1;
        }
        if (rep.gauze_flag) {
            out.summary.gauze_flagged += 1;
            out.summary.gauze_by_label[label] += 1;
        }
    }
    return out;
}

std::string reports_to_csv(const std::vector<ScreenReport>& reports) {
    std::string out = "item_id,bright_flag,bright_score,gauze_flag,gauze_score,crop_x,crop_y,crop_w,crop_h\n";
    char buf[128];
    for (const auto& r : reports) {
        std::snprintf(buf, sizeof(buf), ",%d,%.6g,%d,%.6g,", int(r.bright_flag), r.bright_score,
                      int(r.gauze_flag), r.gauze_score);
        out += r.item_id;
        out += buf;
        if (r.has_crop) {
            std::snprintf(buf, sizeof(buf), "%d,%d,%d,%d", r.crop.x, r.crop.y, r.crop.w,
                          r.crop.h);
            out += buf;
        } else {
            out += ",,,";
        }
        out += "\n";
    }
    return out;
}

void save_reports(const std::string& path, const std::vector<ScreenReport>& reports) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << reports_to_csv(reports);
}

}  // namespace lk
