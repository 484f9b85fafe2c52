#pragma once

#include <utility>
#include <vector>

#include "lk/image.hpp"
#include "lk/rng.hpp"

namespace lk {

struct DisplacementField {
    int height = 0, width = 0;
    std::vector<double> dx, dy;  // per-pixel offsets in pixels, row-major
};

struct RuntimeAugmentParams {
    double flip_prob = 0.5;
    std::vector<int> rotation_choices = {0, 90, 180, 270};  // degrees, multiples of 90
    double zoom_lo = 0.9, zoom_hi = 1.1;
};

// one materialized runtime draw; replaying it on a mask alone must match the
// mask half of the pair call
struct RuntimeSample {
    bool hflip = false;
    bool vflip = false;
    int quarter_turns = 0;
    double zoom = 1.0;
};

enum class FlipAxis { horizontal, vertical };

Raster resize_bilinear(const Raster& img, int out_h, int out_w);
MaskRaster resize_mask_nearest(const MaskRaster& mask, int out_h, int out_w);

Raster center_crop_square(const Raster& img);
MaskRaster center_crop_square(const MaskRaster& m);

// counterclockwise quarter turns, exact
Raster rot90(const Raster& img, int quarter_turns);
MaskRaster rot90(const MaskRaster& m, int quarter_turns);

Raster flip(const Raster& img, FlipAxis axis);
MaskRaster flip(const MaskRaster& m, FlipAxis axis);

// factor > 1 crops the center 1/factor then resizes back; factor < 1 resizes
// down and pads back with edge replication
Raster zoom(const Raster& img, double factor);
MaskRaster zoom(const MaskRaster& m, double factor);

Raster random_crop(const Raster& img, int out_h, int out_w, Rng& rng);

DisplacementField elastic_field(int h, int w, double sigma, double alpha, Rng& rng);

Raster apply_field(const Raster& img, const DisplacementField& f);
MaskRaster apply_field(const MaskRaster& m, const DisplacementField& f);

struct SegExpansion {
    Raster image;
    MaskRaster mask;
    int quarter_turns = 0;   // rotation applied before any field
    bool has_field = false;
    DisplacementField field;  // recorded at pre-resize resolution
};

// 4 elastic warps of the original, the 90-degree rotation, 4 elastic warps
// of the rotation; every output resized to out_size
std::vector<SegExpansion> offline_expand_segmentation(const Raster& img, const MaskRaster& mask,
                                                      Rng& rng, int out_size = 192);

// 90- and 270-degree rotations of the square crop, resized to out_size
std::vector<Raster> offline_expand_classification(const Raster& img, int out_size = 256);

RuntimeSample draw_runtime_sample(const RuntimeAugmentParams& p, Rng& rng);
Raster apply_runtime(const Raster& img, const RuntimeSample& s);
MaskRaster apply_runtime(const MaskRaster& m, const RuntimeSample& s);
std::pair<Raster, MaskRaster> runtime_transform(const Raster& img, const MaskRaster& mask,
                                                const RuntimeAugmentParams& p, Rng& rng);
Raster runtime_transform(const Raster& img, const RuntimeAugmentParams& p, Rng& rng);

}  // namespace lk
