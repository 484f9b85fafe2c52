#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lk/tensor.hpp"

namespace lk {

// 8-bit interleaved raster, 1 or 3 channels
struct Raster {
    int height = 0, width = 0, channels = 0;
    std::vector<uint8_t> pixels;

    uint8_t at(int y, int x, int c = 0) const {
        return pixels[size_t((int64_t(y) * width + x) * channels + c)];
    }
    uint8_t& at(int y, int x, int c = 0) {
        return pixels[size_t((int64_t(y) * width + x) * channels + c)];
    }
};

// strictly binary mask: values hold 0 or 1
struct MaskRaster {
    int height = 0, width = 0;
    std::vector<uint8_t> values;

    uint8_t at(int y, int x) const { return values[size_t(int64_t(y) * width + x)]; }
    uint8_t& at(int y, int x) { return values[size_t(int64_t(y) * width + x)]; }
};

Raster make_raster(int h, int w, int channels, uint8_t fill = 0);
MaskRaster make_mask(int h, int w, uint8_t fill = 0);

Raster read_png(const std::string& path);       // always 3-channel
MaskRaster read_mask_png(const std::string& path);  // gray >= 128 becomes 1
void write_png(const std::string& path, const Raster& img);
void write_mask_png(const std::string& path, const MaskRaster& m);  // {0,255}

int luma(uint8_t r, uint8_t g, uint8_t b);
// h in [0,360), s and v in [0,1]
void rgb_to_hsv(uint8_t r, uint8_t g, uint8_t b, double& h, double& s, double& v);

// network input convention: samples scaled to [-0.5, 0.5]
Tensor rasters_to_batch(const std::vector<const Raster*>& imgs);
Tensor masks_to_batch(const std::vector<const MaskRaster*>& masks);  // [N,1,H,W] of {0,1}

}  // namespace lk
