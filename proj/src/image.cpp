#include "lk/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

namespace lk {

Raster make_raster(int h, int w, int channels, uint8_t fill) {
    if (h < 1 || w < 1 || (channels != 1 && channels != 3))
        throw std::invalid_argument("raster: bad dims " + std::to_string(h) + "x" +
                                    std::to_string(w) + "x" + std::to_string(channels));
    Raster r;
    r.height = h;
    r.width = w;
    r.channels = channels;
    r.pixels.assign(size_t(int64_t(h) * w * channels), fill);
    return r;
}

MaskRaster make_mask(int h, int w, uint8_t fill) {
    if (h < 1 || w < 1)
        throw std::invalid_argument("mask: bad dims " + std::to_string(h) + "x" +
                                    std::to_string(w));
    if (fill > 1) throw std::invalid_argument("mask: fill must be 0 or 1");
    MaskRaster m;
    m.height = h;
    m.width = w;
    m.values.assign(size_t(int64_t(h) * w), fill);
    return m;
}

Raster read_png(const std::string& path) {
    png_image im;
    std::memset(&im, 0, sizeof(im));
    im.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&im, path.c_str()))
        throw std::runtime_error("png read failed: " + path + ": " + im.message);
    im.format = PNG_FORMAT_RGB;
    Raster r = make_raster(int(im.height), int(im.width), 3);
    if (!png_image_finish_read(&im, nullptr, r.pixels.data(), 0, nullptr)) {
        png_image_free(&im);
        throw std::runtime_error("png decode failed: " + path + ": " + im.message);
    }
    return r;
}

MaskRaster read_mask_png(const std::string& path) {
    png_image im;
    std::memset(&im, 0, sizeof(im));
    im.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&im, path.c_str()))
        throw std::runtime_error("png read failed: " + path + ": " + im.message);
    im.format = PNG_FORMAT_GRAY;
    std::vector<uint8_t> buf(size_t(im.height) * im.width);
    if (!png_image_finish_read(&im, nullptr, buf.data(), 0, nullptr)) {
        png_image_free(&im);
        throw std::runtime_error("png decode failed: " + path + ": " + im.message);
    }
    MaskRaster m = make_mask(int(im.height), int(im.width));
    for (size_t i = 0; i < buf.size(); ++i) m.values[i] = buf[i] >= 128 ? 1 : 0;
    return m;
}

void write_png(const std::string& path, const Raster& img) {
    png_image im;
    std::memset(&im, 0, sizeof(im));
    im.version = PNG_IMAGE_VERSION;
    im.width = png_uint_32(img.width);
    im.height = png_uint_32(img.height);
    im.format = img.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    if (!png_image_write_to_file(&im, path.c_str(), 0, img.pixels.data(), 0, nullptr))
        throw std::runtime_error("png write failed: " + path + ": " + im.message);
}

void write_mask_png(const std::string& path, const MaskRaster& m) {
    Raster g = make_raster(m.height, m.width, 1);
    for (size_t i = 0; i < m.values.size(); ++i) g.pixels[i] = m.values[i] ? 255 : 0;
    write_png(path, g);
}

int luma(uint8_t r, uint8_t g, uint8_t b) {
    return int(std::lround(0.299 * r + 0.587 * g + 0.114 * b));
}

void rgb_to_hsv(uint8_t r8, uint8_t g8, uint8_t b8, double& h, double& s, double& v) {
    double r = r8 / 255.0, g = g8 / 255.0, b = b8 / 255.0;
    double mx = std::max({r, g, b}), mn = std::min({r, g, b});
    double d = mx - mn;
    v = mx;
    s = mx > 0 ? d / mx : 0.0;
    if (d == 0) {
        h = 0;
        return;
    }
    if (mx == r)
        h = 60.0 * std::fmod((g - b) / d, 6.0);
    else if (mx == g)
        h = 60.0 * ((b - r) / d + 2.0);
    else
        h = 60.0 * ((r - g) / d + 4.0);
    if (h < 0) h += 360.0;
}

Tensor rasters_to_batch(const std::vector<const Raster*>& imgs) {
    if (imgs.empty()) throw std::invalid_argument("rasters_to_batch: empty batch");
    const int N = int(imgs.size());
    const int C = imgs[0]->channels, H = imgs[0]->height, W = imgs[0]->width;
    Tensor t = Tensor::zeros({N, C, H, W});
    double* dst = t.data();
    for (int n = 0; n < N; ++n) {
        const Raster& im = *imgs[size_t(n)];
        if (im.channels != C || im.height != H || im.width != W)
            throw std::invalid_argument("rasters_to_batch: mixed raster dims in one batch");
        for (int c = 0; c < C; ++c)
            for (int y = 0; y < H; ++y)
                for (int x = 0; x < W; ++x)
                    dst[((int64_t(n) * C + c) * H + y) * W + x] = im.at(y, x, c) / 255.0 - 0.5;
    }
    return t;
}

Tensor masks_to_batch(const std::vector<const MaskRaster*>& masks) {
    if (masks.empty()) throw std::invalid_argument("masks_to_batch: empty batch");
    const int N = int(masks.size());
    const int H = masks[0]->height, W = masks[0]->width;
    Tensor t = Tensor::zeros({N, 1, H, W});
    double* dst = t.data();
    for (int n = 0; n < N; ++n) {
        const MaskRaster& m = *masks[size_t(n)];
        if (m.height != H || m.width != W)
            throw std::invalid_argument("masks_to_batch: mixed mask dims in one batch");
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) dst[(int64_t(n) * H + y) * W + x] = double(m.at(y, x));
    }
    return t;
}

}  // namespace lk
