#include "lk/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <stdexcept>

namespace lk {

namespace {

uint8_t clamp8(double v) { return uint8_t(std::min(std::max(v, 0.0), 255.0)); }

void hsv_to_rgb(double h, double s, double v, uint8_t& r, uint8_t& g, uint8_t& b) {
    double c = v * s;
    double hp = h / 60.0;
    double x = c * (1.0 - std::fabs(std::fmod(hp, 2.0) - 1.0));
    double r1 = 0, g1 = 0, b1 = 0;
    if (hp < 1) {
        r1 = c; g1 = x;
    } else if (hp < 2) {
        r1 = x; g1 = c;
    } else if (hp < 3) {
        g1 = c; b1 = x;
    } else if (hp < 4) {
        g1 = x; b1 = c;
    } else if (hp < 5) {
        r1 = x; b1 = c;
    } else {
        r1 = c; b1 = x;
    }
    double m = v - c;
    r = clamp8((r1 + m) * 255.0);
    g = clamp8((g1 + m) * 255.0);
    b = clamp8((b1 + m) * 255.0);
}

void fill_background(Raster& img, Rng& rng) {
    const double base = rng.uniform(165.0, 195.0);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            double n = rng.uniform(-18.0, 18.0);
            img.at(y, x, 0) = clamp8(base + 10 + n);
            img.at(y, x, 1) = clamp8(base + n);
            img.at(y, x, 2) = clamp8(base - 12 + n);
        }
}

void paint_dark(Raster& img, int y, int x, double level, Rng& rng) {
    double n = rng.uniform(-22.0, 22.0);
    img.at(y, x, 0) = clamp8(level + 18 + n);
    img.at(y, x, 1) = clamp8(level + n);
    img.at(y, x, 2) = clamp8(level - 14 + n);
}

struct Ellipse {
    double cx, cy, a, b, theta;
    bool contains(double x, double y) const {
        double dx = x - cx, dy = y - cy;
        double u = dx * std::cos(theta) + dy * std::sin(theta);
        double v = -dx * std::sin(theta) + dy * std::cos(theta);
        return (u * u) / (a * a) + (v * v) / (b * b) <= 1.0;
    }
};

// semi-axes and center chosen so the ellipse never clips the frame and the
// foreground fraction stays inside [0.05, 0.6]
Ellipse draw_ellipse(int s, Rng& rng, double ax_lo = 0.16, double ax_hi = 0.40) {
    Ellipse e;
    e.cx = rng.uniform(0.40, 0.60) * s;
    e.cy = rng.uniform(0.40, 0.60) * s;
    e.a = rng.uniform(ax_lo, ax_hi) * s;
    e.b = rng.uniform(ax_lo, ax_hi) * s;
    e.theta = rng.uniform(0.0, 3.14159265358979323846);
    return e;
}

void inject_bright_edges(Raster& img, Rng& rng) {
    const int w = std::max(2, int(std::lround(img.width * 0.06)));
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            if (x >= w && x < img.width - w) continue;
            uint8_t v = uint8_t(248 + rng.uniform_int(8));
            img.at(y, x, 0) = v;
            img.at(y, x, 1) = v;
            img.at(y, x, 2) = v;
        }
}

void inject_gauze_border(Raster& img, Rng& rng) {
    const int b = std::max(3, int(std::lround(img.width * 0.14)));
    const double hue = 15.0 + 30.0 * double(rng.uniform_int(12));
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            bool border = y < b || y >= img.height - b || x < b || x >= img.width - b;
            if (!border) continue;
            double hj = hue + rng.uniform(-4.0, 4.0);
            if (hj < 0) hj += 360.0;
            if (hj >= 360.0) hj -= 360.0;
            uint8_t r, g, bb;
            hsv_to_rgb(hj, rng.uniform(0.70, 0.85), rng.uniform(0.55, 0.75), r, g, bb);
            img.at(y, x, 0) = r;
            img.at(y, x, 1) = g;
            img.at(y, x, 2) = bb;
        }
}

}  // namespace

std::vector<SynthItem> generate_synthetic_dataset(const SynthOptions& opt) {
    if (opt.n_items <= 0) throw std::invalid_argument("synthetic: n_items must be positive");
    if (opt.size < 16) throw std::invalid_argument("synthetic: size must be at least 16");
    const int s = opt.size;
    std::vector<SynthItem> items;
    items.reserve(size_t(opt.n_items));

    for (int i = 0; i < opt.n_items; ++i) {
        Rng rng(derive_seed(opt.seed, "synth_item", uint64_t(i)));
        SynthItem it;
        char idbuf[32];
        std::snprintf(idbuf, sizeof(idbuf), "synth_%05d", i);
        it.entry.item_id = idbuf;
        it.entry.group_id = idbuf;
        it.entry.is_derived = false;
        it.image = make_raster(s, s, 3);
        fill_background(it.image, rng);

        if (opt.task == SynthTask::segmentation) {
            Ellipse e = draw_ellipse(s, rng);
            const double level = rng.uniform(60.0, 100.0);
            it.mask = make_mask(s, s);
            for (int y = 0; y < s; ++y)
                for (int x = 0; x < s; ++x)
                    if (e.contains(x + 0.5, y + 0.5)) {
                        it.mask.at(y, x) = 1;
                        paint_dark(it.image, y, x, level, rng);
                    }
        } else {
            const int label = i % opt.num_classes;
            it.entry.label = label;
            const double level = rng.uniform(55.0, 95.0);
            if (label == 0) {
                Ellipse e = draw_ellipse(s, rng, 0.22, 0.35);
                for (int y = 0; y < s; ++y)
                    for (int x = 0; x < s; ++x)
                        if (e.contains(x + 0.5, y + 0.5)) paint_dark(it.image, y, x, level, rng);
            } else if (label == 1) {
                const double cx = rng.uniform(0.42, 0.58) * s, cy = rng.uniform(0.42, 0.58) * s;
                const double r2 = rng.uniform(0.25, 0.38) * s;
                const double r1 = r2 * rng.uniform(0.45, 0.65);
                for (int y = 0; y < s; ++y)
                    for (int x = 0; x < s; ++x) {
                        double d = std::hypot(x + 0.5 - cx, y + 0.5 - cy);
                        if (d >= r1 && d <= r2) paint_dark(it.image, y, x, level, rng);
                    }
            } else {
                const int nb = 4 + int(rng.uniform_int(3));
                std::vector<double> bx(size_t(nb), 0.0), by(size_t(nb), 0.0), br(size_t(nb), 0.0);
                for (int k = 0; k < nb; ++k) {
                    bx[size_t(k)] = rng.uniform(0.15, 0.85) * s;
                    by[size_t(k)] = rng.uniform(0.15, 0.85) * s;
                    br[size_t(k)] = rng.uniform(0.05, 0.10) * s;
                }
                for (int y = 0; y < s; ++y)
                    for (int x = 0; x < s; ++x)
                        for (int k = 0; k < nb; ++k)
                            if (std::hypot(x + 0.5 - bx[size_t(k)], y + 0.5 - by[size_t(k)]) <=
                                br[size_t(k)]) {
                                paint_dark(it.image, y, x, level, rng);
                                break;
                            }
            }
            if (label == 1 && opt.bright_leak_frac > 0 && rng.uniform() < opt.bright_leak_frac) {
                inject_bright_edges(it.image, rng);
                it.injected_leak = 1;
            } else if (label == 2 && opt.gauze_leak_frac > 0 &&
                       rng.uniform() < opt.gauze_leak_frac) {
                inject_gauze_border(it.image, rng);
                it.injected_leak = 2;
            }
        }
        items.push_back(std::move(it));
    }
    return items;
}

std::vector<ManifestEntry> write_synthetic_dataset(const SynthOptions& opt,
                                                   const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    auto items = generate_synthetic_dataset(opt);
    std::vector<ManifestEntry> manifest;
    manifest.reserve(items.size());
    for (auto& it : items) {
        it.entry.image_path = dir + "/" + it.entry.item_id + ".png";
        write_png(it.entry.image_path, it.image);
        if (opt.task == SynthTask::segmentation) {
            it.entry.mask_path = dir + "/" + it.entry.item_id + "_mask.png";
            write_mask_png(it.entry.mask_path, it.mask);
        }
        manifest.push_back(it.entry);
    }
    save_manifest(dir + "/manifest.json", manifest);
    return manifest;
}

}  // namespace lk
