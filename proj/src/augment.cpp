#include "lk/augment.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace lk {

namespace {

inline int clampi(int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); }

inline uint8_t to_byte(double v) {
    // round half up after clamping
    double c = std::min(std::max(v, 0.0), 255.0);
    return uint8_t(std::floor(c + 0.5));
}

// bilinear sample with half-pixel centers and edge clamping
inline double sample_bilinear(const Raster& img, double sx, double sy, int c) {
    int x0 = int(std::floor(sx));
    int y0 = int(std::floor(sy));
    double fx = sx - x0, fy = sy - y0;
    int x1 = clampi(x0 + 1, 0, img.width - 1);
    int y1 = clampi(y0 + 1, 0, img.height - 1);
    x0 = clampi(x0, 0, img.width - 1);
    y0 = clampi(y0, 0, img.height - 1);
    double top = img.at(y0, x0, c) * (1 - fx) + img.at(y0, x1, c) * fx;
    double bot = img.at(y1, x0, c) * (1 - fx) + img.at(y1, x1, c) * fx;
    return top * (1 - fy) + bot * fy;
}

inline uint8_t sample_mask_nearest(const MaskRaster& m, double sx, double sy) {
    int x = clampi(int(std::lround(sx)), 0, m.width - 1);
    int y = clampi(int(std::lround(sy)), 0, m.height - 1);
    return m.at(y, x);
}

Raster crop(const Raster& img, int oy, int ox, int h, int w) {
    Raster out = make_raster(h, w, img.channels);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < img.channels; ++c) out.at(y, x, c) = img.at(oy + y, ox + x, c);
    return out;
}

MaskRaster crop(const MaskRaster& m, int oy, int ox, int h, int w) {
    MaskRaster out = make_mask(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) out.at(y, x) = m.at(oy + y, ox + x);
    return out;
}

// pad to (h, w) with edge replication, content placed at (oy, ox)
Raster pad_edge(const Raster& img, int h, int w, int oy, int ox) {
    Raster out = make_raster(h, w, img.channels);
    for (int y = 0; y < h; ++y) {
        int sy = clampi(y - oy, 0, img.height - 1);
        for (int x = 0; x < w; ++x) {
            int sx = clampi(x - ox, 0, img.width - 1);
            for (int c = 0; c < img.channels; ++c) out.at(y, x, c) = img.at(sy, sx, c);
        }
    }
    return out;
}

MaskRaster pad_edge(const MaskRaster& m, int h, int w, int oy, int ox) {
    MaskRaster out = make_mask(h, w);
    for (int y = 0; y < h; ++y) {
        int sy = clampi(y - oy, 0, m.height - 1);
        for (int x = 0; x < w; ++x) out.at(y, x) = m.at(sy, clampi(x - ox, 0, m.width - 1));
    }
    return out;
}

// separable Gaussian, kernel truncated at ceil(3*sigma), edges clamped
void gaussian_blur_inplace(std::vector<double>& v, int h, int w, double sigma) {
    const int R = int(std::ceil(3.0 * sigma));
    std::vector<double> k(size_t(2 * R + 1));
    double s = 0;
    for (int i = -R; i <= R; ++i) {
        k[size_t(i + R)] = std::exp(-double(i) * i / (2.0 * sigma * sigma));
        s += k[size_t(i + R)];
    }
    for (double& x : k) x /= s;

    std::vector<double> tmp(v.size());
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0;
            for (int i = -R; i <= R; ++i) acc += k[size_t(i + R)] * v[size_t(y) * w + clampi(x + i, 0, w - 1)];
            tmp[size_t(y) * w + x] = acc;
        }
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0;
            for (int i = -R; i <= R; ++i) acc += k[size_t(i + R)] * tmp[size_t(clampi(y + i, 0, h - 1)) * w + x];
            v[size_t(y) * w + x] = acc;
        }
}

}  // namespace

Raster resize_bilinear(const Raster& img, int out_h, int out_w) {
    if (out_h < 1 || out_w < 1)
        throw std::invalid_argument("resize_bilinear: zero-sized output " +
                                    std::to_string(out_h) + "x" + std::to_string(out_w));
    if (out_h == img.height && out_w == img.width) return img;
    Raster out = make_raster(out_h, out_w, img.channels);
    // half-pixel centers via one exact integer-numerator division, so
    // grid-aligned samples stay exact
    for (int y = 0; y < out_h; ++y) {
        double sy = double(int64_t(2 * y + 1) * img.height - out_h) / double(2 * out_h);
        for (int x = 0; x < out_w; ++x) {
            double sx = double(int64_t(2 * x + 1) * img.width - out_w) / double(2 * out_w);
            for (int c = 0; c < img.channels; ++c)
                out.at(y, x, c) = to_byte(sample_bilinear(img, sx, sy, c));
        }
    }
    return out;
}

MaskRaster resize_mask_nearest(const MaskRaster& mask, int out_h, int out_w) {
    if (out_h < 1 || out_w < 1)
        throw std::invalid_argument("resize_mask_nearest: zero-sized output " +
                                    std::to_string(out_h) + "x" + std::to_string(out_w));
    if (out_h == mask.height && out_w == mask.width) return mask;
    MaskRaster out = make_mask(out_h, out_w);
    // floor((y+0.5)*in/out) in exact integer arithmetic
    for (int y = 0; y < out_h; ++y) {
        int sy = clampi(int(int64_t(2 * y + 1) * mask.height / (2 * out_h)), 0, mask.height - 1);
        for (int x = 0; x < out_w; ++x) {
            int sx = clampi(int(int64_t(2 * x + 1) * mask.width / (2 * out_w)), 0, mask.width - 1);
            out.at(y, x) = mask.at(sy, sx);
        }
    }
    return out;
}

Raster center_crop_square(const Raster& img) {
    const int s = std::min(img.height, img.width);
    // top/left bias when the trim is odd
    return crop(img, (img.height - s) / 2, (img.width - s) / 2, s, s);
}

MaskRaster center_crop_square(const MaskRaster& m) {
    const int s = std::min(m.height, m.width);
    return crop(m, (m.height - s) / 2, (m.width - s) / 2, s, s);
}

Raster rot90(const Raster& img, int quarter_turns) {
    int k = ((quarter_turns % 4) + 4) % 4;
    if (k == 0) return img;
    Raster out = k == 2 ? make_raster(img.height, img.width, img.channels)
                        : make_raster(img.width, img.height, img.channels);
    for (int y = 0; y < out.height; ++y)
        for (int x = 0; x < out.width; ++x)
            for (int c = 0; c < img.channels; ++c) {
                // counterclockwise: out(r,c) = in(c, W-1-r) per turn
                uint8_t v;
                if (k == 1)
                    v = img.at(x, img.width - 1 - y, c);
                else if (k == 2)
                    v = img.at(img.height - 1 - y, img.width - 1 - x, c);
                else
                    v = img.at(img.height - 1 - x, y, c);
                out.at(y, x, c) = v;
            }
    return out;
}

MaskRaster rot90(const MaskRaster& m, int quarter_turns) {
    int k = ((quarter_turns % 4) + 4) % 4;
    if (k == 0) return m;
    MaskRaster out = k == 2 ? make_mask(m.height, m.width) : make_mask(m.width, m.height);
    for (int y = 0; y < out.height; ++y)
        for (int x = 0; x < out.width; ++x) {
            uint8_t v;
            if (k == 1)
                v = m.at(x, m.width - 1 - y);
            else if (k == 2)
                v = m.at(m.height - 1 - y, m.width - 1 - x);
            else
                v = m.at(m.height - 1 - x, y);
            out.at(y, x) = v;
        }
    return out;
}

Raster flip(const Raster& img, FlipAxis axis) {
    Raster out = make_raster(img.height, img.width, img.channels);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < img.channels; ++c)
                out.at(y, x, c) = axis == FlipAxis::horizontal
                                      ? img.at(y, img.width - 1 - x, c)
                                      : img.at(img.height - 1 - y, x, c);
    return out;
}

MaskRaster flip(const MaskRaster& m, FlipAxis axis) {
    MaskRaster out = make_mask(m.height, m.width);
    for (int y = 0; y < m.height; ++y)
        for (int x = 0; x < m.width; ++x)
            out.at(y, x) = axis == FlipAxis::horizontal ? m.at(y, m.width - 1 - x)
                                                        : m.at(m.height - 1 - y, x);
    return out;
}

Raster zoom(const Raster& img, double factor) {
    if (factor <= 0) throw std::invalid_argument("zoom: factor must be positive");
    if (factor == 1.0) return img;
    if (factor > 1.0) {
        int ch = std::max(1, int(std::lround(img.height / factor)));
        int cw = std::max(1, int(std::lround(img.width / factor)));
        Raster c = crop(img, (img.height - ch) / 2, (img.width - cw) / 2, ch, cw);
        return resize_bilinear(c, img.height, img.width);
    }
    int sh = std::max(1, int(std::lround(img.height * factor)));
    int sw = std::max(1, int(std::lround(img.width * factor)));
    Raster small = resize_bilinear(img, sh, sw);
    return pad_edge(small, img.height, img.width, (img.height - sh) / 2, (img.width - sw) / 2);
}

MaskRaster zoom(const MaskRaster& m, double factor) {
    if (factor <= 0) throw std::invalid_argument("zoom: factor must be positive");
    if (factor == 1.0) return m;
    if (factor > 1.0) {
        int ch = std::max(1, int(std::lround(m.height / factor)));
        int cw = std::max(1, int(std::lround(m.width / factor)));
        MaskRaster c = crop(m, (m.height - ch) / 2, (m.width - cw) / 2, ch, cw);
        return resize_mask_nearest(c, m.height, m.width);
    }
    int sh = std::max(1, int(std::lround(m.height * factor)));
    int sw = std::max(1, int(std::lround(m.width * factor)));
    MaskRaster small = resize_mask_nearest(m, sh, sw);
    return pad_edge(small, m.height, m.width, (m.height - sh) / 2, (m.width - sw) / 2);
}

Raster random_crop(const Raster& img, int out_h, int out_w, Rng& rng) {
    if (img.height < out_h || img.width < out_w)
        throw std::invalid_argument("random_crop: input " + std::to_string(img.height) + "x" +
                                    std::to_string(img.width) + " smaller than crop " +
                                    std::to_string(out_h) + "x" + std::to_string(out_w));
    int oy = int(rng.uniform_int(uint64_t(img.height - out_h + 1)));
    int ox = int(rng.uniform_int(uint64_t(img.width - out_w + 1)));
    if (oy == 0 && ox == 0 && img.height == out_h && img.width == out_w) return img;
    return crop(img, oy, ox, out_h, out_w);
}

DisplacementField elastic_field(int h, int w, double sigma, double alpha, Rng& rng) {
    if (sigma <= 0) throw std::invalid_argument("elastic_field: sigma must be positive");
    if (alpha < 0) throw std::invalid_argument("elastic_field: alpha must be non-negative");
    DisplacementField f;
    f.height = h;
    f.width = w;
    f.dx.resize(size_t(int64_t(h) * w));
    f.dy.resize(size_t(int64_t(h) * w));
    // draw order pinned: dx row-major, then dy row-major
    for (double& v : f.dx) v = rng.uniform(-1.0, 1.0);
    for (double& v : f.dy) v = rng.uniform(-1.0, 1.0);
    gaussian_blur_inplace(f.dx, h, w, sigma);
    gaussian_blur_inplace(f.dy, h, w, sigma);
    double maxmag = 0;
    for (size_t i = 0; i < f.dx.size(); ++i)
        maxmag = std::max(maxmag, std::hypot(f.dx[i], f.dy[i]));
    double scale = maxmag > 0 ? alpha / maxmag : 0.0;
    for (size_t i = 0; i < f.dx.size(); ++i) {
        f.dx[i] *= scale;
        f.dy[i] *= scale;
    }
    return f;
}

Raster apply_field(const Raster& img, const DisplacementField& f) {
    if (f.height != img.height || f.width != img.width)
        throw std::invalid_argument("apply_field: field " + std::to_string(f.height) + "x" +
                                    std::to_string(f.width) + " vs image " +
                                    std::to_string(img.height) + "x" + std::to_string(img.width));
    Raster out = make_raster(img.height, img.width, img.channels);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            size_t i = size_t(int64_t(y) * img.width + x);
            double sx = x + f.dx[i], sy = y + f.dy[i];
            for (int c = 0; c < img.channels; ++c)
                out.at(y, x, c) = to_byte(sample_bilinear(img, sx, sy, c));
        }
    return out;
}

MaskRaster apply_field(const MaskRaster& m, const DisplacementField& f) {
    if (f.height != m.height || f.width != m.width)
        throw std::invalid_argument("apply_field: field " + std::to_string(f.height) + "x" +
                                    std::to_string(f.width) + " vs mask " +
                                    std::to_string(m.height) + "x" + std::to_string(m.width));
    MaskRaster out = make_mask(m.height, m.width);
    for (int y = 0; y < m.height; ++y)
        for (int x = 0; x < m.width; ++x) {
            size_t i = size_t(int64_t(y) * m.width + x);
            out.at(y, x) = sample_mask_nearest(m, x + f.dx[i], y + f.dy[i]) ? 1 : 0;
        }
    return out;
}

std::vector<SegExpansion> offline_expand_segmentation(const Raster& img, const MaskRaster& mask,
                                                      Rng& rng, int out_size) {
    if (img.height != mask.height || img.width != mask.width)
        throw std::invalid_argument("offline_expand_segmentation: image " +
                                    std::to_string(img.height) + "x" + std::to_string(img.width) +
                                    " vs mask " + std::to_string(mask.height) + "x" +
                                    std::to_string(mask.width));
    const double sigma = std::min(img.height, img.width) / 20.0;
    const double alpha = std::min(img.height, img.width) / 10.0;
    std::vector<SegExpansion> out;
    out.reserve(9);

    auto emit_elastic = [&](const Raster& base_img, const MaskRaster& base_mask, int turns) {
        SegExpansion e;
        e.quarter_turns = turns;
        e.has_field = true;
        e.field = elastic_field(base_img.height, base_img.width, sigma, alpha, rng);
        e.image = resize_bilinear(apply_field(base_img, e.field), out_size, out_size);
        e.mask = resize_mask_nearest(apply_field(base_mask, e.field), out_size, out_size);
        out.push_back(std::move(e));
    };

    for (int i = 0; i < 4; ++i) emit_elastic(img, mask, 0);

    Raster rimg = rot90(img, 1);
    MaskRaster rmask = rot90(mask, 1);
    SegExpansion plain;
    plain.quarter_turns = 1;
    plain.image = resize_bilinear(rimg, out_size, out_size);
    plain.mask = resize_mask_nearest(rmask, out_size, out_size);
    out.push_back(std::move(plain));

    for (int i = 0; i < 4; ++i) emit_elastic(rimg, rmask, 1);
    return out;
}

std::vector<Raster> offline_expand_classification(const Raster& img, int out_size) {
    Raster sq = center_crop_square(img);
    return {resize_bilinear(rot90(sq, 1), out_size, out_size),
            resize_bilinear(rot90(sq, 3), out_size, out_size)};
}

RuntimeSample draw_runtime_sample(const RuntimeAugmentParams& p, Rng& rng) {
    if (p.flip_prob < 0 || p.flip_prob > 1)
        throw std::invalid_argument("runtime augment: flip_prob outside [0,1]");
    if (p.rotation_choices.empty())
        throw std::invalid_argument("runtime augment: empty rotation choices");
    if (!(p.zoom_lo > 0 && p.zoom_lo <= 1.0 && p.zoom_hi >= 1.0))
        throw std::invalid_argument("runtime augment: zoom range must satisfy 0 < lo <= 1 <= hi");
    for (int deg : p.rotation_choices)
        if (deg % 90 != 0)
            throw std::invalid_argument("runtime augment: rotation " + std::to_string(deg) +
                                        " is not a multiple of 90");
    // draw order pinned: hflip, vflip, rotation, zoom
    RuntimeSample s;
    s.hflip = rng.bernoulli(p.flip_prob);
    s.vflip = rng.bernoulli(p.flip_prob);
    int deg = p.rotation_choices[size_t(rng.uniform_int(p.rotation_choices.size()))];
    s.quarter_turns = ((deg / 90) % 4 + 4) % 4;
    s.zoom = p.zoom_lo == p.zoom_hi ? p.zoom_lo : rng.uniform(p.zoom_lo, p.zoom_hi);
    return s;
}

Raster apply_runtime(const Raster& img, const RuntimeSample& s) {
    Raster out = img;
    if (s.hflip) out = flip(out, FlipAxis::horizontal);
    if (s.vflip) out = flip(out, FlipAxis::vertical);
    if (s.quarter_turns) out = rot90(out, s.quarter_turns);
    if (s.zoom != 1.0) out = zoom(out, s.zoom);
    return out;
}

MaskRaster apply_runtime(const MaskRaster& m, const RuntimeSample& s) {
    MaskRaster out = m;
    if (s.hflip) out = flip(out, FlipAxis::horizontal);
    if (s.vflip) out = flip(out, FlipAxis::vertical);
    if (s.quarter_turns) out = rot90(out, s.quarter_turns);
    if (s.zoom != 1.0) out = zoom(out, s.zoom);
    return out;
}

std::pair<Raster, MaskRaster> runtime_transform(const Raster& img, const MaskRaster& mask,
                                                const RuntimeAugmentParams& p, Rng& rng) {
    RuntimeSample s = draw_runtime_sample(p, rng);
    return {apply_runtime(img, s), apply_runtime(mask, s)};
}

Raster runtime_transform(const Raster& img, const RuntimeAugmentParams& p, Rng& rng) {
    return apply_runtime(img, draw_runtime_sample(p, rng));
}

}  // namespace lk
